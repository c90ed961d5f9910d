#pragma once

#include <functional>
#include <string_view>

namespace clothkit {

// Non-fatal conditions (empty histograms, ill-conditioned fits, skipped
// images) are reported through a process-wide sink. The default sink drops
// messages; the CLI installs one that writes to stderr.
using DiagnosticSink = std::function<void(std::string_view)>;

void set_diagnostic_sink(DiagnosticSink sink);
void diagnose(std::string_view message);

}  // namespace clothkit
