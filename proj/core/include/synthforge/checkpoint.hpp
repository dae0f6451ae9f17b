// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "synthforge/tensor.hpp"

namespace synthforge {

/// On-disk training state.  The binary layout is fixed and little-endian on
/// every platform: magic "GSYN", u32 version, u64 epoch, u64 step, the
/// effective config text, the rng stream states, then named tensors.
struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  std::uint32_t version = kVersion;
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  std::string config_text;
  std::vector<std::uint64_t> rng_states;
  std::vector<std::pair<std::string, Tensor>> tensors;

  /// Returns nullptr when absent.
  const Tensor* find(const std::string& name) const;
};

std::vector<std::uint8_t> checkpoint_serialize(const Checkpoint& ckpt);
Checkpoint checkpoint_deserialize(const std::vector<std::uint8_t>& bytes);

void checkpoint_save(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint checkpoint_load(const std::filesystem::path& path);

}  // namespace synthforge
