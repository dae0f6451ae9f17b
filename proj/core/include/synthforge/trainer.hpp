// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "synthforge/checkpoint.hpp"
#include "synthforge/config.hpp"
#include "synthforge/data.hpp"
#include "synthforge/models.hpp"
#include "synthforge/nn.hpp"

namespace synthforge {

struct MetricRow {
  std::uint64_t epoch = 0;
  std::uint64_t step = 0;
  std::string name;
  double value = 0.0;
  bool operator==(const MetricRow&) const = default;
};

/// Append-only per-step metric CSV.  The header is written when the backing
/// file is created or empty; every append is flushed.
class MetricLog {
 public:
  explicit MetricLog(std::filesystem::path path);

  /// Non-finite values are refused before anything is written.
  void append(std::uint64_t epoch, std::uint64_t step, const std::string& name, double value);
  /// Writes a '#'-prefixed marker line (used for abort diagnostics).
  void comment(const std::string& text);

  const std::filesystem::path& path() const { return path_; }

  /// Parses rows back, skipping comment lines.
  static std::vector<MetricRow> parse_csv(const std::string& text);

 private:
  std::filesystem::path path_;
};

/// One optimizer per parameter group, attached and index-aligned.
std::vector<Optimizer> make_optimizers(SynthesisModule& module);

/// Captures module parameters, optimizer state, and (for diffusion) the
/// noise schedule into a named-tensor checkpoint.
Checkpoint make_checkpoint(const SynthesisModule& module, const std::vector<Optimizer>& optimizers,
                           std::uint64_t epoch, std::uint64_t step, std::string config_text);

/// Restores parameters only (sampling path).
void restore_params(const Checkpoint& ckpt, SynthesisModule& module);
/// Restores parameters plus optimizer state (training resume path).
void restore_training_state(const Checkpoint& ckpt, SynthesisModule& module,
                            std::vector<Optimizer>& optimizers);

/// One synchronous data-parallel training step over K workers.  The batch is
/// split into K contiguous shards (balanced by default, or per shard_sizes);
/// each worker accumulates gradients on its own module replica, gradients
/// are combined as the shard-size-weighted mean in fixed worker order with
/// pairwise summation, and a single optimizer update is applied per phase.
/// K = 1 is bitwise identical to training_step.
TrainStepReport data_parallel_step(SynthesisModule& module, const Batch& batch,
                                   std::size_t workers, std::vector<Optimizer>& optimizers,
                                   std::uint64_t step_seed, double lr_override = -1.0,
                                   const std::vector<std::size_t>* shard_sizes = nullptr);

struct TrainResult {
  Checkpoint last;
  std::filesystem::path metrics_path;
  std::uint64_t epochs_run = 0;
};

/// Runs the full training loop: shuffled batches, optional augmentation,
/// data-parallel steps, per-step metric rows, periodic checkpoints every
/// checkpoint_every epochs, and a final "last" checkpoint.  With resume the
/// run continues from out_dir/checkpoint_last.bin, which must exist and must
/// embed a config identical to cfg up to the run length (epochs and the
/// derived scheduler horizon).
TrainResult train_run(const ExperimentConfig& cfg, const Manifest& manifest,
                      const std::filesystem::path& data_root,
                      const std::filesystem::path& out_dir, bool resume);

}  // namespace synthforge
