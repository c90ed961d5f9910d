#include "clothkit/diagnostics.hpp"

#include <mutex>
#include <string>

#include "clothkit/error.hpp"

namespace clothkit {

namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

DiagnosticSink& sink() {
  static DiagnosticSink s;
  return s;
}

}  // namespace

void set_diagnostic_sink(DiagnosticSink s) {
  std::lock_guard lock(sink_mutex());
  sink() = std::move(s);
}

void diagnose(std::string_view message) {
  std::lock_guard lock(sink_mutex());
  if (sink()) sink()(message);
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Format: return "format error";
    case ErrorKind::Consistency: return "consistency error";
    case ErrorKind::Domain: return "domain error";
    case ErrorKind::Fit: return "fit error";
    case ErrorKind::Config: return "config error";
    case ErrorKind::Dimension: return "dimension error";
    case ErrorKind::Io: return "io error";
    case ErrorKind::Numeric: return "numeric error";
  }
  return "error";
}

}  // namespace clothkit
