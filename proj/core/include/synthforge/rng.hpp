// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>

namespace synthforge {

/// splitmix64 finalizer.  Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t x);

/// Derives a child seed from a global seed and two coordinates (typically an
/// epoch and an index within it).  The coordinates are rotated into different
/// bit positions before mixing so that (a, b) and (b, a) land on different
/// streams.
std::uint64_t derive_seed(std::uint64_t global_seed, std::uint64_t epoch, std::uint64_t index);

/// Deterministic counter-free generator: splitmix64.  Every stream is fully
/// defined by its 64-bit state, which makes streams trivial to serialize and
/// to fork via derive_seed.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform01();

  /// Uniform double in (0, 1]; safe as a log() argument.
  double uniform01_open();

  /// Uniform integer in [0, bound).  bound must be positive.
  std::uint64_t uniform_int(std::uint64_t bound);

  /// Standard normal via the Box-Muller transform.  Produces values in
  /// pairs; the second value of each pair is cached to keep the draw count
  /// even and the stream deterministic.
  double normal();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

/// Independent root streams for the different consumers of randomness inside
/// a run.  Each root is derived from the experiment seed once, so adding
/// draws to one consumer never perturbs another.
enum class SeedPurpose : std::uint64_t {
  init = 1,
  shuffle = 2,
  augment = 3,
  train = 4,
  generate = 5,
  phantom = 6,
};

std::uint64_t purpose_root(std::uint64_t global_seed, SeedPurpose purpose);

}  // namespace synthforge
