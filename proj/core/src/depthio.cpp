#include "clothkit/depthio.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <sstream>

#include "clothkit/error.hpp"

namespace clothkit {

void DepthMap::check(bool require_analysis_size) const {
  if (depth.width() != mask.width() || depth.height() != mask.height()) {
    throw Error(ErrorKind::Consistency, "depth and mask dimensions differ");
  }
  if (require_analysis_size && (width() < kMinAnalysisSide || height() < kMinAnalysisSide)) {
    throw Error(ErrorKind::Consistency, "depth map is " + std::to_string(width()) + "x" +
                                            std::to_string(height()) + ", need at least 16x16");
  }
  const auto d = depth.values();
  const auto m = mask.values();
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (m[i] && !std::isfinite(d[i])) {
      throw Error(ErrorKind::Consistency, "masked pixel with non-finite depth");
    }
  }
}

namespace {

struct PgmImage {
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::vector<unsigned> samples;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

PgmImage parse_pgm(const std::string& bytes, const std::filesystem::path& path) {
  const auto fail = [&](const std::string& why) {
    return Error(ErrorKind::Format, path.string() + ": " + why);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw fail("not a binary PGM (P5)");

  std::size_t pos = 2;
  const auto next_int = [&]() -> long {
    for (;;) {
      while (pos < bytes.size() && std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
      if (pos < bytes.size() && bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
        continue;
      }
      break;
    }
    if (pos >= bytes.size() || !std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      throw fail("malformed header");
    }
    long v = 0;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      v = v * 10 + (bytes[pos] - '0');
      if (v > 1'000'000'000) throw fail("header value too large");
      ++pos;
    }
    return v;
  };

  PgmImage img;
  img.width = static_cast<int>(next_int());
  img.height = static_cast<int>(next_int());
  img.maxval = static_cast<int>(next_int());
  if (img.width <= 0 || img.height <= 0) throw fail("non-positive dimensions");
  if (img.maxval <= 0 || img.maxval > 65535) throw fail("maxval out of range");
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw fail("malformed header");
  }
  ++pos;  // single whitespace before the raster

  const std::size_t bytes_per_sample = img.maxval > 255 ? 2 : 1;
  const std::size_t n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height);
  if (bytes.size() - pos < n * bytes_per_sample) throw fail("truncated raster");
  img.samples.resize(n);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < n; ++i) {
    img.samples[i] = bytes_per_sample == 2 ? (static_cast<unsigned>(p[2 * i]) << 8) | p[2 * i + 1]
                                           : p[i];
  }
  return img;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for " + path.string());
}

std::string pgm_header(int width, int height, int maxval) {
  return "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n" +
         std::to_string(maxval) + "\n";
}

}  // namespace

DepthMap load_depth(const std::filesystem::path& depth_path,
                    const std::optional<std::filesystem::path>& mask_path) {
  const auto depth_img = parse_pgm(read_file(depth_path), depth_path);
  if (depth_img.maxval <= 255) {
    throw Error(ErrorKind::Format, depth_path.string() + ": depth must be a 16-bit PGM");
  }

  DepthMap map(depth_img.width, depth_img.height);
  auto d = map.depth.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = static_cast<double>(depth_img.samples[i]);

  if (mask_path) {
    const auto mask_img = parse_pgm(read_file(*mask_path), *mask_path);
    if (mask_img.width != depth_img.width || mask_img.height != depth_img.height) {
      throw Error(ErrorKind::Consistency,
                  "mask " + mask_path->string() + " is " + std::to_string(mask_img.width) + "x" +
                      std::to_string(mask_img.height) + " but depth is " +
                      std::to_string(depth_img.width) + "x" + std::to_string(depth_img.height));
    }
    auto m = map.mask.values();
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = mask_img.samples[i] != 0 ? 1 : 0;
  }
  return map;
}

void save_depth(const std::filesystem::path& path, const DepthMap& map) {
  std::string bytes = pgm_header(map.width(), map.height(), 65535);
  bytes.reserve(bytes.size() + map.depth.size() * 2);
  for (const double v : map.depth.values()) {
    const double clamped = std::isfinite(v) ? std::clamp(std::round(v), 0.0, 65535.0) : 0.0;
    const auto s = static_cast<unsigned>(clamped);
    bytes.push_back(static_cast<char>(s >> 8));
    bytes.push_back(static_cast<char>(s & 0xff));
  }
  write_file(path, bytes);
}

void save_mask(const std::filesystem::path& path, const DepthMap& map) {
  std::string bytes = pgm_header(map.width(), map.height(), 255);
  for (const auto m : map.mask.values()) bytes.push_back(static_cast<char>(m ? 255 : 0));
  write_file(path, bytes);
}

DepthMap downsample(const DepthMap& map, int factor) {
  if (factor < 1) throw Error(ErrorKind::Config, "downsample factor must be >= 1");
  if (factor == 1) return map;
  const int w = map.width() / factor;
  const int h = map.height() / factor;
  DepthMap out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double sum = 0;
      int n = 0;
      for (int dy = 0; dy < factor; ++dy) {
        for (int dx = 0; dx < factor; ++dx) {
          const int sx = x * factor + dx;
          const int sy = y * factor + dy;
          if (map.valid(sx, sy)) {
            sum += map.depth(sx, sy);
            ++n;
          }
        }
      }
      // A coarse pixel is garment only when most of its block is.
      out.mask(x, y) = 2 * n > factor * factor ? 1 : 0;
      out.depth(x, y) = n ? sum / n : 0.0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

int DatasetManifest::category_index(const std::string& label) const {
  const auto it = std::find(categories.begin(), categories.end(), label);
  return it == categories.end() ? -1 : static_cast<int>(it - categories.begin());
}

std::filesystem::path DatasetManifest::resolve(const std::string& path) const {
  const std::filesystem::path p(path);
  return p.is_absolute() || base_dir.empty() ? p : base_dir / p;
}

DepthMap DatasetManifest::load_entry(std::size_t i) const {
  const auto& e = entries.at(i);
  std::optional<std::filesystem::path> mask;
  if (!e.mask_path.empty()) mask = resolve(e.mask_path);
  return load_depth(resolve(e.depth_path), mask);
}

namespace {

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto comma = line.find(',', pos);
    auto field = line.substr(pos, comma == std::string_view::npos ? line.size() - pos : comma - pos);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.front()))) field.remove_prefix(1);
    while (!field.empty() && std::isspace(static_cast<unsigned char>(field.back()))) field.remove_suffix(1);
    out.emplace_back(field);
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

DatasetManifest parse_manifest(const std::string& text, std::filesystem::path base_dir) {
  DatasetManifest manifest;
  manifest.base_dir = std::move(base_dir);

  std::istringstream in(text);
  std::string line;
  int line_number = 0;
  bool fixed_categories = false;
  int col_depth = -1, col_mask = -1, col_label = -1, col_item = -1;
  std::size_t columns = 0;

  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    if (line.front() == '#') {
      const auto key = line.find("categories=");
      if (key != std::string::npos && columns == 0) {
        for (auto& c : split_csv_line(std::string_view(line).substr(key + 11))) {
          if (!c.empty()) manifest.categories.push_back(c);
        }
        fixed_categories = true;
      }
      continue;
    }

    auto fields = split_csv_line(line);
    if (columns == 0) {
      columns = fields.size();
      for (std::size_t i = 0; i < fields.size(); ++i) {
        const auto& f = fields[i];
        int* slot = f == "depth" ? &col_depth : f == "mask" ? &col_mask
                  : f == "label" ? &col_label : f == "item" ? &col_item : nullptr;
        if (!slot || *slot != -1) {
          throw Error(ErrorKind::Format, "manifest header must be depth,mask,label,item (got '" + line + "')");
        }
        *slot = static_cast<int>(i);
      }
      if (col_depth < 0 || col_mask < 0 || col_label < 0 || col_item < 0) {
        throw Error(ErrorKind::Format, "manifest header must name depth,mask,label,item");
      }
      continue;
    }

    if (fields.size() != columns) {
      throw Error(ErrorKind::Format, "manifest line " + std::to_string(line_number) + ": expected " +
                                         std::to_string(columns) + " fields");
    }
    ManifestEntry e{fields[static_cast<std::size_t>(col_depth)], fields[static_cast<std::size_t>(col_mask)],
                    fields[static_cast<std::size_t>(col_label)], fields[static_cast<std::size_t>(col_item)]};
    if (e.depth_path.empty() || e.label.empty() || e.item_id.empty()) {
      throw Error(ErrorKind::Format,
                  "manifest line " + std::to_string(line_number) + ": depth, label and item are required");
    }
    if (manifest.category_index(e.label) < 0) {
      if (fixed_categories) {
        throw Error(ErrorKind::Format, "manifest line " + std::to_string(line_number) + ": label '" +
                                           e.label + "' is not a declared category");
      }
      manifest.categories.push_back(e.label);
    }
    manifest.entries.push_back(std::move(e));
  }
  if (columns == 0) throw Error(ErrorKind::Format, "manifest has no header");
  return manifest;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path), path.parent_path());
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  std::string out;
  if (!manifest.categories.empty()) {
    out += "# categories=";
    for (std::size_t i = 0; i < manifest.categories.size(); ++i) {
      if (i) out += ',';
      out += manifest.categories[i];
    }
    out += '\n';
  }
  out += "depth,mask,label,item\n";
  for (const auto& e : manifest.entries) {
    out += e.depth_path + ',' + e.mask_path + ',' + e.label + ',' + e.item_id + '\n';
  }
  write_file(path, out);
}

}  // namespace clothkit
