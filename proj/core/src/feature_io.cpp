#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "binary_io.hpp"
#include "clothkit/config.hpp"
#include "clothkit/error.hpp"
#include "clothkit/features.hpp"

namespace clothkit {

namespace {

constexpr std::string_view kCsvTag = "# clothkit-features";
constexpr std::string_view kBinaryMagic = "LSTB1";

void check_file(const FeatureFile& file) {
  for (const auto& r : file.records) {
    if (r.values.size() != file.dimension) {
      throw Error(ErrorKind::Dimension, "record '" + r.item_id + "' has " + std::to_string(r.values.size()) +
                                            " values, file dimension is " + std::to_string(file.dimension));
    }
    if (r.item_id.find_first_of(",\n") != std::string::npos || r.label.find_first_of(",\n") != std::string::npos) {
      throw Error(ErrorKind::Format, "item ids and labels may not contain commas or newlines");
    }
  }
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  for (;;) {
    const auto end = line.find(sep, pos);
    out.push_back(line.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

}  // namespace

void save_features_csv(const std::filesystem::path& path, const FeatureFile& file) {
  check_file(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out << kCsvTag << " config_hash=" << to_hex(file.config_hash) << " seed=" << file.seed
      << " feature_set=" << file.feature_set << " dim=" << file.dimension << '\n';
  out << "item,label,dim,values\n";
  for (const auto& r : file.records) {
    out << r.item_id << ',' << r.label << ',' << r.values.size();
    for (const double v : r.values) out << ',' << format_double(v);
    out << '\n';
  }
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

FeatureFile load_features_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  const auto fail = [&](int line, const std::string& why) {
    return Error(ErrorKind::Format, path.string() + ":" + std::to_string(line) + ": " + why);
  };

  FeatureFile file;
  std::string line;
  int n = 0;
  bool have_meta = false, have_header = false, have_dim = false;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (line.rfind(kCsvTag, 0) != 0) continue;
      have_meta = true;
      std::istringstream meta(line.substr(kCsvTag.size()));
      std::string kv;
      while (meta >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) continue;
        const auto key = kv.substr(0, eq);
        const auto value = kv.substr(eq + 1);
        try {
          if (key == "config_hash") file.config_hash = std::stoull(value, nullptr, 16);
          else if (key == "seed") file.seed = std::stoull(value);
          else if (key == "feature_set") file.feature_set = value;
          else if (key == "dim") {
            file.dimension = std::stoull(value);
            have_dim = true;
          }
        } catch (const std::exception&) {
          throw fail(n, "bad metadata value for " + key);
        }
      }
      continue;
    }
    if (!have_header) {
      if (line != "item,label,dim,values") throw fail(n, "expected header item,label,dim,values");
      have_header = true;
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() < 3) throw fail(n, "too few fields");
    FeatureRecord r;
    r.item_id = std::string(fields[0]);
    r.label = std::string(fields[1]);
    std::size_t dim = 0;
    const auto d = fields[2];
    if (std::from_chars(d.data(), d.data() + d.size(), dim).ec != std::errc{}) throw fail(n, "bad dimension");
    if (fields.size() != dim + 3) throw fail(n, "row has " + std::to_string(fields.size() - 3) + " values, declared " + std::to_string(dim));
    if (!have_dim) {
      file.dimension = dim;
      have_dim = true;
    }
    if (dim != file.dimension) throw fail(n, "row dimension differs from file dimension");
    r.values.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) {
      const std::string text(fields[i + 3]);
      char* end = nullptr;
      const double v = std::strtod(text.c_str(), &end);
      if (text.empty() || end != text.c_str() + text.size()) throw fail(n, "bad value '" + text + "'");
      r.values.push_back(v);
    }
    file.records.push_back(std::move(r));
  }
  if (!have_header) throw Error(ErrorKind::Format, path.string() + ": missing header");
  if (!have_meta) file.feature_set.clear();
  return file;
}

void save_features_binary(const std::filesystem::path& path, const FeatureFile& file) {
  check_file(file);
  detail::BinaryWriter out(path);
  out.bytes(kBinaryMagic);
  out.u64(file.config_hash);
  out.u64(file.seed);
  out.str(file.feature_set);
  out.u64(file.dimension);
  out.u64(file.records.size());
  for (const auto& r : file.records) {
    out.str(r.item_id);
    out.str(r.label);
    for (const double v : r.values) out.f64(v);
  }
  out.finish();
}

FeatureFile load_features_binary(const std::filesystem::path& path) {
  detail::BinaryReader in(path);
  in.expect_magic(kBinaryMagic);
  FeatureFile file;
  file.config_hash = in.u64();
  file.seed = in.u64();
  file.feature_set = in.str();
  file.dimension = in.u64();
  const auto count = in.u64();
  if (file.dimension > (1u << 24) || count > (1u << 28)) {
    throw Error(ErrorKind::Format, path.string() + ": implausible feature file size");
  }
  file.records.resize(count);
  for (auto& r : file.records) {
    r.item_id = in.str();
    r.label = in.str();
    r.values.resize(file.dimension);
    for (double& v : r.values) v = in.f64();
  }
  in.expect_end();
  return file;
}

FeatureFile load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::string head(kBinaryMagic.size(), '\0');
  in.read(head.data(), static_cast<std::streamsize>(head.size()));
  if (in && head == kBinaryMagic) return load_features_binary(path);
  return load_features_csv(path);
}

}  // namespace clothkit
