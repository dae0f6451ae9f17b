// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "synthforge/errors.hpp"

namespace synthforge {

const Tensor* Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : tensors) {
    if (n == name) return &t;
  }
  return nullptr;
}

namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big,
              "mixed-endian platforms are unsupported");

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
  }
}

void put_f64(std::vector<std::uint8_t>& out, double value) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &value, sizeof(bits));
  put_le(out, bits);
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }

  template <typename T>
  T get_le(const char* what) {
    need(sizeof(T), what);
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return static_cast<T>(v);
  }

  double get_f64(const char* what) {
    const std::uint64_t bits = get_le<std::uint64_t>(what);
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }

  std::string get_bytes(std::size_t count, const char* what) {
    need(count, what);
    std::string s(reinterpret_cast<const char*>(bytes_.data()) + pos_, count);
    pos_ += count;
    return s;
  }

  void need(std::size_t count, const char* what) {
    if (pos_ + count > bytes_.size()) {
      throw LoadError(fmt::format("truncated checkpoint at byte offset {}: need {} bytes for {}, have {}",
                                  pos_, count, what, bytes_.size() - pos_));
    }
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> checkpoint_serialize(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out;
  out.push_back('G');
  out.push_back('S');
  out.push_back('Y');
  out.push_back('N');
  put_le<std::uint32_t>(out, ckpt.version);
  put_le<std::uint64_t>(out, ckpt.epoch);
  put_le<std::uint64_t>(out, ckpt.step);

  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.config_text.size()));
  for (char c : ckpt.config_text) out.push_back(static_cast<std::uint8_t>(c));

  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.rng_states.size()));
  for (std::uint64_t s : ckpt.rng_states) put_le(out, s);

  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (name.size() > 0xffff) {
      throw ArgumentError(fmt::format("tensor name too long for checkpoint: {} bytes", name.size()));
    }
    put_le<std::uint16_t>(out, static_cast<std::uint16_t>(name.size()));
    for (char c : name) out.push_back(static_cast<std::uint8_t>(c));
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(tensor.ndim()));
    for (std::size_t d = 0; d < tensor.ndim(); ++d) {
      put_le<std::uint64_t>(out, tensor.extent(d));
    }
    for (double v : tensor.data()) put_f64(out, v);
  }
  return out;
}

Checkpoint checkpoint_deserialize(const std::vector<std::uint8_t>& bytes) {
  Reader in(bytes);
  const std::string magic = in.get_bytes(4, "magic");
  if (magic != "GSYN") {
    throw LoadError(fmt::format("bad magic at byte offset 0: expected \"GSYN\", got \"{}{}{}{}\"",
                                magic.size() > 0 ? magic[0] : '?', magic.size() > 1 ? magic[1] : '?',
                                magic.size() > 2 ? magic[2] : '?', magic.size() > 3 ? magic[3] : '?'));
  }

  Checkpoint ckpt;
  const std::size_t version_at = in.offset();
  ckpt.version = in.get_le<std::uint32_t>("version");
  if (ckpt.version != Checkpoint::kVersion) {
    throw LoadError(fmt::format("unsupported checkpoint version {} at byte offset {} (expected {})",
                                ckpt.version, version_at, Checkpoint::kVersion));
  }
  ckpt.epoch = in.get_le<std::uint64_t>("epoch");
  ckpt.step = in.get_le<std::uint64_t>("step");

  const std::uint32_t config_len = in.get_le<std::uint32_t>("config length");
  ckpt.config_text = in.get_bytes(config_len, "config text");

  const std::uint32_t rng_count = in.get_le<std::uint32_t>("rng state count");
  for (std::uint32_t i = 0; i < rng_count; ++i) {
    ckpt.rng_states.push_back(in.get_le<std::uint64_t>("rng state"));
  }

  const std::uint32_t tensor_count = in.get_le<std::uint32_t>("tensor count");
  for (std::uint32_t t = 0; t < tensor_count; ++t) {
    const std::uint16_t name_len = in.get_le<std::uint16_t>("tensor name length");
    const std::string name = in.get_bytes(name_len, "tensor name");
    const std::uint8_t ndim = in.get_le<std::uint8_t>("tensor rank");
    if (ndim > 4) {
      throw LoadError(fmt::format("tensor '{}' has unsupported rank {} at byte offset {}",
                                  name, ndim, in.offset() - 1));
    }
    Shape shape;
    for (std::uint8_t d = 0; d < ndim; ++d) {
      shape.push_back(in.get_le<std::uint64_t>("tensor extent"));
    }
    const std::size_t numel = shape_numel(shape);
    in.need(numel * sizeof(double), "tensor payload");
    Tensor tensor(shape);
    auto data = tensor.data_mut();
    for (std::size_t i = 0; i < numel; ++i) data[i] = in.get_f64("tensor payload");
    ckpt.tensors.emplace_back(name, std::move(tensor));
  }
  return ckpt;
}

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const std::vector<std::uint8_t> bytes = checkpoint_serialize(ckpt);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(fmt::format("write failed for '{}'", path.string()));
}

Checkpoint checkpoint_load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return checkpoint_deserialize(bytes);
}

}  // namespace synthforge
