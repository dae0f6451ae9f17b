// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

#include "synthforge/errors.hpp"
#include "synthforge/format.hpp"

namespace synthforge {

namespace {

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  cells.push_back(cell);
  return cells;
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) {
      if (pos < text.size()) lines.push_back(text.substr(pos));
      break;
    }
    lines.push_back(text.substr(pos, end - pos));
    pos = end + 1;
  }
  return lines;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

Manifest parse_manifest(const std::string& csv_text, LabelingParadigm paradigm,
                        std::int64_t num_classes) {
  const std::vector<std::string> lines = split_lines(csv_text);
  if (lines.empty() || lines[0].empty()) {
    throw ValidationError("manifest is empty (header row required)");
  }

  const std::vector<std::string> header = split_csv_row(lines[0]);
  if (header.empty() || header[0] != "SubjectID") {
    throw ValidationError("manifest header: first column must be SubjectID");
  }
  std::size_t channels = 0;
  std::size_t col = 1;
  while (col < header.size() && header[col] == fmt::format("Channel_{}", channels)) {
    ++channels;
    ++col;
  }
  if (channels == 0) {
    throw ValidationError(fmt::format("manifest header: expected column 'Channel_0', got '{}'",
                                      header.size() > 1 ? header[1] : ""));
  }
  bool has_label = false;
  if (col < header.size()) {
    if (header[col] == "Label" && col + 1 == header.size()) {
      has_label = true;
    } else {
      throw ValidationError(fmt::format("manifest header: unexpected column '{}'", header[col]));
    }
  }
  if (has_label && paradigm == LabelingParadigm::unlabeled) {
    throw ValidationError("manifest header: Label column forbidden under the unlabeled paradigm");
  }
  if (!has_label && paradigm == LabelingParadigm::labeled) {
    throw ValidationError("manifest header: Label column required under the labeled paradigm");
  }

  Manifest manifest;
  manifest.paradigm = paradigm;
  manifest.channels = channels;
  std::set<std::string> seen;

  const std::size_t expected_cells = 1 + channels + (has_label ? 1 : 0);
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty() || lines[row] == "\r") continue;
    const std::vector<std::string> cells = split_csv_row(lines[row]);
    const int row_no = static_cast<int>(row) + 1;
    if (cells.size() != expected_cells) {
      throw ValidationError(fmt::format("manifest row {}: expected {} cells, got {}",
                                        row_no, expected_cells, cells.size()));
    }
    SampleRecord rec;
    rec.subject_id = cells[0];
    if (rec.subject_id.empty()) {
      throw ValidationError(fmt::format("manifest row {}: empty SubjectID", row_no));
    }
    if (!seen.insert(rec.subject_id).second) {
      throw ValidationError(fmt::format("manifest row {}: duplicate subject '{}'", row_no, rec.subject_id));
    }
    for (std::size_t c = 0; c < channels; ++c) {
      if (cells[1 + c].empty()) {
        throw ValidationError(fmt::format("manifest row {}: empty Channel_{} path", row_no, c));
      }
      rec.channel_paths.push_back(cells[1 + c]);
    }
    if (has_label) {
      long long label = 0;
      if (!parse_int64(cells[1 + channels], label)) {
        throw ValidationError(fmt::format("manifest row {}: label '{}' is not an integer",
                                          row_no, cells[1 + channels]));
      }
      if (label < 0 || label >= num_classes) {
        throw ValidationError(fmt::format("manifest row {}: label {} out of range [0, {})",
                                          row_no, label, num_classes));
      }
      rec.label = static_cast<int>(label);
    }
    manifest.records.push_back(std::move(rec));
  }
  return manifest;
}

Manifest load_manifest_file(const std::filesystem::path& path, LabelingParadigm paradigm,
                            std::int64_t num_classes) {
  return parse_manifest(read_text_file(path), paradigm, num_classes);
}

Manifest load_manifest_auto(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  const std::vector<std::string> lines = split_lines(text);
  if (lines.empty()) throw ValidationError(fmt::format("manifest '{}' is empty", path.string()));
  const std::vector<std::string> header = split_csv_row(lines[0]);
  const bool labeled = !header.empty() && header.back() == "Label";
  if (!labeled) return parse_manifest(text, LabelingParadigm::unlabeled, 0);

  long long max_label = 0;
  for (std::size_t row = 1; row < lines.size(); ++row) {
    if (lines[row].empty() || lines[row] == "\r") continue;
    const std::vector<std::string> cells = split_csv_row(lines[row]);
    long long label = 0;
    if (!cells.empty() && parse_int64(cells.back(), label)) max_label = std::max(max_label, label);
  }
  return parse_manifest(text, LabelingParadigm::labeled, max_label + 1);
}

std::string manifest_to_csv(const Manifest& manifest) {
  std::string out = "SubjectID";
  for (std::size_t c = 0; c < manifest.channels; ++c) out += fmt::format(",Channel_{}", c);
  if (manifest.labeled()) out += ",Label";
  out += '\n';
  for (const SampleRecord& rec : manifest.records) {
    out += rec.subject_id;
    for (const std::string& p : rec.channel_paths) {
      out += ',';
      out += p;
    }
    if (manifest.labeled()) out += fmt::format(",{}", rec.label);
    out += '\n';
  }
  return out;
}

// ---- PGM ----

namespace {

/// Reads the next header token, skipping whitespace and '#' comments.
std::string next_pgm_token(std::istream& in, const std::filesystem::path& path) {
  std::string token;
  int c = 0;
  while ((c = in.get()) != EOF) {
    if (c == '#') {
      while ((c = in.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  if (token.empty()) {
    throw ParseError(fmt::format("truncated header in '{}'", path.string()));
  }
  return token;
}

long long pgm_int_token(std::istream& in, const std::filesystem::path& path, const char* what) {
  const std::string token = next_pgm_token(in, path);
  long long v = 0;
  if (!parse_int64(token, v)) {
    throw ParseError(fmt::format("bad {} '{}' in '{}'", what, token, path.string()));
  }
  return v;
}

}  // namespace

Tensor read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));

  const std::string magic = next_pgm_token(in, path);
  if (magic != "P2" && magic != "P5") {
    throw ParseError(fmt::format("bad magic '{}' in '{}' (expected P2 or P5)", magic, path.string()));
  }
  const long long width = pgm_int_token(in, path, "width");
  const long long height = pgm_int_token(in, path, "height");
  const long long maxval = pgm_int_token(in, path, "maxval");
  if (width < 1 || height < 1) {
    throw ParseError(fmt::format("bad extent {}x{} in '{}'", width, height, path.string()));
  }
  if (maxval != 255 && maxval != 65535) {
    throw ParseError(fmt::format("unsupported maxval {} in '{}' (expected 255 or 65535)", maxval, path.string()));
  }

  const std::size_t h = static_cast<std::size_t>(height);
  const std::size_t w = static_cast<std::size_t>(width);
  Tensor img(Shape{h, w});
  auto data = img.data_mut();
  const double scale = 1.0 / static_cast<double>(maxval);

  if (magic == "P2") {
    for (std::size_t i = 0; i < h * w; ++i) {
      const long long v = pgm_int_token(in, path, "pixel");
      if (v < 0 || v > maxval) {
        throw ParseError(fmt::format("pixel value {} out of range [0, {}] in '{}'", v, maxval, path.string()));
      }
      data[i] = static_cast<double>(v) * scale;
    }
  } else {
    // Exactly one whitespace byte separates maxval from the payload; the
    // token reader has already consumed it.
    const std::size_t bytes_per = maxval == 255 ? 1 : 2;
    std::vector<unsigned char> payload(h * w * bytes_per);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
      throw ParseError(fmt::format("truncated payload in '{}': expected {} bytes, got {}",
                                   path.string(), payload.size(), in.gcount()));
    }
    for (std::size_t i = 0; i < h * w; ++i) {
      const unsigned v = bytes_per == 1
                             ? payload[i]
                             : (static_cast<unsigned>(payload[2 * i]) << 8) | payload[2 * i + 1];
      data[i] = static_cast<double>(v) * scale;
    }
  }
  return img;
}

void write_pgm(const Tensor& image, const std::filesystem::path& path) {
  if (image.ndim() != 2) {
    throw DimensionError(fmt::format("write_pgm expects a rank-2 image, got {}", shape_str(image.shape())));
  }
  const std::size_t h = image.extent(0), w = image.extent(1);
  if (h == 0 || w == 0) throw DimensionError("write_pgm image extents must be positive");

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out << "P5\n" << w << " " << h << "\n255\n";
  std::vector<unsigned char> payload(h * w);
  auto data = image.data();
  for (std::size_t i = 0; i < payload.size(); ++i) {
    const double v = std::min(1.0, std::max(0.0, data[i]));
    payload[i] = static_cast<unsigned char>(std::lround(v * 255.0));
  }
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

// ---- preprocessing ----

namespace {

double clamp_unit(double v) {
  if (v < 0.0 && v >= -1e-9) return 0.0;
  if (v > 1.0 && v <= 1.0 + 1e-9) return 1.0;
  return v;
}

}  // namespace

Tensor normalize_image(const Tensor& x, double lo, double hi) {
  Tensor out(x.shape());
  auto xd = x.data();
  auto od = out.data_mut();
  const double span = hi - lo;
  for (std::size_t i = 0; i < xd.size(); ++i) od[i] = lo + clamp_unit(xd[i]) * span;
  return out;
}

Tensor denormalize_image(const Tensor& x, double lo, double hi) {
  Tensor out(x.shape());
  auto xd = x.data();
  auto od = out.data_mut();
  const double span = hi - lo;
  for (std::size_t i = 0; i < xd.size(); ++i) {
    double v = (xd[i] - lo) / span;
    if (v < 0.0 && v >= -1e-9) v = 0.0;
    if (v > 1.0 && v <= 1.0 + 1e-9) v = 1.0;
    od[i] = v;
  }
  return out;
}

Tensor resize(const Tensor& image, std::int64_t target, ResizeMode mode) {
  if (image.ndim() != 2) {
    throw DimensionError(fmt::format("resize expects a rank-2 image, got {}", shape_str(image.shape())));
  }
  if (target <= 0) throw ArgumentError(fmt::format("resize target must be positive, got {}", target));
  const std::size_t h = image.extent(0), w = image.extent(1);
  if (h == 0 || w == 0) throw DimensionError("resize input extents must be positive");
  const std::size_t t = static_cast<std::size_t>(target);

  Tensor out(Shape{t, t});
  auto src = image.data();
  auto dst = out.data_mut();
  const double sy_scale = static_cast<double>(h) / static_cast<double>(t);
  const double sx_scale = static_cast<double>(w) / static_cast<double>(t);

  auto clamp_idx = [](std::ptrdiff_t i, std::size_t n) {
    if (i < 0) return std::size_t{0};
    if (i >= static_cast<std::ptrdiff_t>(n)) return n - 1;
    return static_cast<std::size_t>(i);
  };

  for (std::size_t i = 0; i < t; ++i) {
    const double sy = (static_cast<double>(i) + 0.5) * sy_scale - 0.5;
    for (std::size_t j = 0; j < t; ++j) {
      const double sx = (static_cast<double>(j) + 0.5) * sx_scale - 0.5;
      if (mode == ResizeMode::nearest) {
        const std::size_t yi = clamp_idx(static_cast<std::ptrdiff_t>(std::floor(sy + 0.5)), h);
        const std::size_t xi = clamp_idx(static_cast<std::ptrdiff_t>(std::floor(sx + 0.5)), w);
        dst[i * t + j] = src[yi * w + xi];
      } else {
        const std::ptrdiff_t y0 = static_cast<std::ptrdiff_t>(std::floor(sy));
        const std::ptrdiff_t x0 = static_cast<std::ptrdiff_t>(std::floor(sx));
        const double fy = sy - static_cast<double>(y0);
        const double fx = sx - static_cast<double>(x0);
        const std::size_t ya = clamp_idx(y0, h), yb = clamp_idx(y0 + 1, h);
        const std::size_t xa = clamp_idx(x0, w), xb = clamp_idx(x0 + 1, w);
        dst[i * t + j] = (1.0 - fy) * ((1.0 - fx) * src[ya * w + xa] + fx * src[ya * w + xb]) +
                         fy * ((1.0 - fx) * src[yb * w + xa] + fx * src[yb * w + xb]);
      }
    }
  }
  return out;
}

// ---- augmentation ----

namespace {

void flip_horizontal(double* plane, std::size_t h, std::size_t w) {
  for (std::size_t y = 0; y < h; ++y) {
    std::reverse(plane + y * w, plane + (y + 1) * w);
  }
}

void flip_vertical(double* plane, std::size_t h, std::size_t w) {
  for (std::size_t y = 0; y < h / 2; ++y) {
    std::swap_ranges(plane + y * w, plane + (y + 1) * w, plane + (h - 1 - y) * w);
  }
}

// One counterclockwise quarter turn of a square plane.
void rotate90(double* plane, std::size_t n, std::vector<double>& scratch) {
  scratch.assign(plane, plane + n * n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      plane[y * n + x] = scratch[x * n + (n - 1 - y)];
    }
  }
}

}  // namespace

void augment_batch(Batch& batch, const AugmentSettings& settings, RngStream& rng,
                   double lo, double hi) {
  if (batch.size() == 0) return;
  if (batch.images.ndim() != 4) {
    throw DimensionError(fmt::format("augment expects [N,C,H,W] images, got {}", shape_str(batch.images.shape())));
  }
  const std::size_t n = batch.images.extent(0), c = batch.images.extent(1);
  const std::size_t h = batch.images.extent(2), w = batch.images.extent(3);
  if (settings.rot90 && h != w) {
    throw DimensionError(fmt::format("rot90 augmentation requires square images, got {}x{}", h, w));
  }
  auto data = batch.images.data_mut();
  std::vector<double> scratch;

  for (std::size_t s = 0; s < n; ++s) {
    double* sample = data.data() + s * c * h * w;
    if (settings.hflip && rng.uniform01() < 0.5) {
      for (std::size_t ch = 0; ch < c; ++ch) flip_horizontal(sample + ch * h * w, h, w);
    }
    if (settings.vflip && rng.uniform01() < 0.5) {
      for (std::size_t ch = 0; ch < c; ++ch) flip_vertical(sample + ch * h * w, h, w);
    }
    if (settings.rot90) {
      const std::uint64_t k = rng.uniform_int(4);
      for (std::uint64_t turn = 0; turn < k; ++turn) {
        for (std::size_t ch = 0; ch < c; ++ch) rotate90(sample + ch * h * w, h, scratch);
      }
    }
    if (settings.noise_sigma > 0.0) {
      for (std::size_t i = 0; i < c * h * w; ++i) {
        sample[i] = std::min(hi, std::max(lo, sample[i] + settings.noise_sigma * rng.normal()));
      }
    }
  }
}

std::vector<std::vector<std::size_t>> make_batches(const Manifest& manifest,
                                                   std::int64_t batch_size,
                                                   std::uint64_t epoch, std::uint64_t seed) {
  if (manifest.records.empty()) throw ArgumentError("make_batches requires a nonempty manifest");
  if (batch_size < 1) throw ArgumentError("batch_size must be at least 1");

  const std::size_t n = manifest.records.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;

  RngStream rng(derive_seed(purpose_root(seed, SeedPurpose::shuffle), epoch, 0));
  for (std::size_t i = n; i-- > 1;) {
    const std::size_t j = static_cast<std::size_t>(rng.uniform_int(i + 1));
    std::swap(order[i], order[j]);
  }

  std::vector<std::vector<std::size_t>> batches;
  const std::size_t bs = static_cast<std::size_t>(batch_size);
  for (std::size_t start = 0; start < n; start += bs) {
    const std::size_t end = std::min(n, start + bs);
    batches.emplace_back(order.begin() + start, order.begin() + end);
  }
  return batches;
}

Batch load_batch(const Manifest& manifest, const std::vector<std::size_t>& indices,
                 const ExperimentConfig& cfg, const std::filesystem::path& data_root) {
  if (manifest.channels != static_cast<std::size_t>(cfg.channels)) {
    throw ValidationError(fmt::format("manifest provides {} channels but config expects {}",
                                      manifest.channels, cfg.channels));
  }
  const std::size_t n = indices.size();
  const std::size_t c = static_cast<std::size_t>(cfg.channels);
  const std::size_t s = static_cast<std::size_t>(cfg.image_size);

  Batch batch;
  batch.images = Tensor(Shape{n, c, s, s});
  auto out = batch.images.data_mut();

  for (std::size_t i = 0; i < n; ++i) {
    if (indices[i] >= manifest.records.size()) {
      throw ArgumentError(fmt::format("batch index {} out of range for manifest of size {}",
                                      indices[i], manifest.records.size()));
    }
    const SampleRecord& rec = manifest.records[indices[i]];
    for (std::size_t ch = 0; ch < c; ++ch) {
      Tensor img = read_pgm(data_root / rec.channel_paths[ch]);
      if (img.extent(0) != s || img.extent(1) != s) {
        img = resize(img, cfg.image_size, ResizeMode::bilinear);
      }
      img = normalize_image(img, cfg.normalization.lo, cfg.normalization.hi);
      std::copy(img.data().begin(), img.data().end(), out.begin() + (i * c + ch) * s * s);
    }
    if (manifest.labeled()) batch.labels.push_back(rec.label);
  }
  return batch;
}

void generate_phantom_dataset(const std::filesystem::path& out_dir, std::size_t n_per_class,
                              std::int64_t size, std::uint64_t seed) {
  if (size < 8) throw ArgumentError(fmt::format("phantom size must be at least 8, got {}", size));
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create directory '{}': {}", out_dir.string(), ec.message()));

  const std::size_t s = static_cast<std::size_t>(size);
  const double sd = static_cast<double>(size);
  const std::uint64_t root = purpose_root(seed, SeedPurpose::phantom);

  Manifest manifest;
  manifest.paradigm = LabelingParadigm::labeled;
  manifest.channels = 1;

  for (int klass = 0; klass < 2; ++klass) {
    for (std::size_t i = 0; i < n_per_class; ++i) {
      RngStream rng(derive_seed(root, static_cast<std::uint64_t>(klass), i));
      const double cx = 0.5 * sd + (2.0 * rng.uniform01() - 1.0) * 0.08 * sd;
      const double cy = 0.5 * sd + (2.0 * rng.uniform01() - 1.0) * 0.08 * sd;
      const double width = (0.17 + 0.02 * rng.uniform01()) * sd;
      const double amp = 0.75 + 0.1 * rng.uniform01();

      double lx = 0.0, ly = 0.0, lr = 0.0, bump = 0.0;
      if (klass == 1) {
        const double theta = 2.0 * 3.141592653589793238462643383279502884 * rng.uniform01();
        const double dist = (0.14 + 0.06 * rng.uniform01()) * sd;
        lr = (0.117 + 0.026 * rng.uniform01()) * sd;
        bump = 0.40 + 0.05 * rng.uniform01();
        lx = cx + dist * std::cos(theta);
        ly = cy + dist * std::sin(theta);
      }

      Tensor img(Shape{s, s});
      auto data = img.data_mut();
      for (std::size_t y = 0; y < s; ++y) {
        for (std::size_t x = 0; x < s; ++x) {
          const double dx = static_cast<double>(x) - cx;
          const double dy = static_cast<double>(y) - cy;
          double v = amp * std::exp(-(dx * dx + dy * dy) / (2.0 * width * width));
          if (klass == 1) {
            const double ox = static_cast<double>(x) - lx;
            const double oy = static_cast<double>(y) - ly;
            if (ox * ox + oy * oy <= lr * lr) v += bump;
          }
          v += 0.02 * rng.normal();
          data[y * s + x] = std::min(1.0, std::max(0.0, v));
        }
      }

      const std::string stem = fmt::format("c{}_{:04}", klass, i);
      write_pgm(img, out_dir / (stem + ".pgm"));
      SampleRecord rec;
      rec.subject_id = stem;
      rec.channel_paths.push_back(stem + ".pgm");
      rec.label = klass;
      manifest.records.push_back(std::move(rec));
    }
  }

  std::ofstream out(out_dir / "manifest.csv", std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", (out_dir / "manifest.csv").string()));
  out << manifest_to_csv(manifest);
  if (!out) throw IoError(fmt::format("write failed for '{}'", (out_dir / "manifest.csv").string()));
}

}  // namespace synthforge
