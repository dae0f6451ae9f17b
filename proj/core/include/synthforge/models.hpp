// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "synthforge/autodiff.hpp"
#include "synthforge/config.hpp"
#include "synthforge/data.hpp"
#include "synthforge/nn.hpp"
#include "synthforge/rng.hpp"
#include "synthforge/tensor.hpp"

namespace synthforge {

enum class ConditioningMode { none, klass };

/// Scalar metrics produced by one training step, in emission order, plus the
/// number of optimizer updates that were applied.
struct TrainStepReport {
  std::vector<std::pair<std::string, double>> metrics;
  int updates = 0;

  void add(const std::string& name, double value) { metrics.emplace_back(name, value); }
  /// Throws when the metric is absent.
  double metric(const std::string& name) const;
  bool has(const std::string& name) const;
};

// ---- losses and stochastic building blocks ----

/// Elementwise mean squared error as a scalar tensor on the tape.
Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target);

/// Mean over the batch of 1/2 * sum_dim(mu^2 + e^logvar - logvar - 1).
/// Inputs are [N, D]; the result is a scalar tensor.
Tensor kl_divergence(Tape& tape, const Tensor& mu, const Tensor& logvar);

/// z = mu + e^(logvar / 2) * eps with eps treated as a constant, so the
/// gradient flows to mu and logvar only.
Tensor reparameterize_with_noise(Tape& tape, const Tensor& mu, const Tensor& logvar,
                                 const Tensor& eps);
/// Same, drawing eps ~ N(0, I) from the stream.
Tensor reparameterize(Tape& tape, const Tensor& mu, const Tensor& logvar, RngStream& rng);

/// Discriminator and generator objectives of the non-saturating GAN.
/// d_real / d_fake are [N, 1] sigmoid outputs; logs are clamped at 1e-7.
/// real_target below 1 applies one-sided label smoothing to the real term.
Tensor gan_discriminator_loss(Tape& tape, const Tensor& d_real, const Tensor& d_fake,
                              double real_target = 1.0);
Tensor gan_generator_loss(Tape& tape, const Tensor& d_fake);

// ---- diffusion schedule ----

/// Linear noise schedule.  All vectors have length timesteps and are indexed
/// 1-based through the accessors; alpha_bar_at(0) is defined as 1.
struct NoiseSchedule {
  std::size_t timesteps = 0;
  std::vector<double> beta;
  std::vector<double> alpha;
  std::vector<double> alpha_bar;
  std::vector<double> posterior_variance;

  double beta_at(std::size_t t) const { return beta.at(t - 1); }
  double alpha_at(std::size_t t) const { return alpha.at(t - 1); }
  double alpha_bar_at(std::size_t t) const { return t == 0 ? 1.0 : alpha_bar.at(t - 1); }
  double posterior_variance_at(std::size_t t) const { return posterior_variance.at(t - 1); }
};

NoiseSchedule build_schedule(std::int64_t timesteps, double beta_start, double beta_end);

/// Forward process: x_t = sqrt(abar_t) * x0 + sqrt(1 - abar_t) * eps.
Tensor q_sample(const Tensor& x0, std::int64_t t, const Tensor& eps, const NoiseSchedule& schedule);

/// One ancestral sampling step from x_t to x_{t-1}.  The noise term is
/// drawn elementwise from the stream; at t = 1 no noise is drawn at all.
Tensor ddpm_sample_step(const Tensor& x_t, std::int64_t t, const Tensor& eps_hat,
                        const NoiseSchedule& schedule, RngStream& rng);

// ---- the unified module ----

/// One synthesis model family behind the shared training and sampling
/// abstraction.  Training is phase-structured: a step runs phase_gradients
/// for each phase in order and applies the optimizer of that phase's
/// parameter group.  The GAN has two phases (discriminator, then generator);
/// the other families have one.
///
/// Per-sample randomness inside a phase comes from streams derived as
/// derive_seed(step_seed, phase, sample_offset + i), which makes gradients
/// independent of how a batch is sharded across workers.
class SynthesisModule {
 public:
  virtual ~SynthesisModule() = default;

  ModelFamily family() const { return family_; }
  ConditioningMode conditioning() const { return conditioning_; }
  bool can_reconstruct() const { return family_ == ModelFamily::autoencoder; }
  bool needs_iterative_sampling() const { return family_ == ModelFamily::diffusion; }
  const ExperimentConfig& config() const { return cfg_; }

  std::vector<ParamGroup>& groups() { return groups_; }
  const std::vector<ParamGroup>& groups() const { return groups_; }

  virtual std::size_t phase_count() const = 0;
  virtual std::size_t phase_group(std::size_t phase) const = 0;

  /// Zeroes every parameter gradient, then accumulates this shard's
  /// gradients for the given phase.  Returns shard-mean metrics.
  virtual TrainStepReport phase_gradients(std::size_t phase, const Batch& shard,
                                          std::uint64_t step_seed, std::size_t sample_offset) = 0;

  /// Draws n samples.  labels must hold n class ids for a conditional
  /// module and must be empty for an unconditional one.
  virtual Tensor generate(std::size_t n, const std::vector<int>& labels, RngStream& rng) = 0;

  /// decode(encode(x)); autoencoder only.
  virtual Tensor reconstruct(const Batch& batch);

  /// Deep copy with independent parameter storage.
  std::unique_ptr<SynthesisModule> clone() const;
  /// Copies parameter values (not gradients) from a structurally identical
  /// module.
  void copy_params_from(const SynthesisModule& other);

  /// Non-null for the diffusion family.
  virtual const NoiseSchedule* schedule() const { return nullptr; }

 protected:
  SynthesisModule(ModelFamily family, ConditioningMode conditioning, ExperimentConfig cfg)
      : family_(family), conditioning_(conditioning), cfg_(std::move(cfg)) {}

  ModelFamily family_;
  ConditioningMode conditioning_;
  ExperimentConfig cfg_;
  std::vector<ParamGroup> groups_;
};

/// Builds the configured family with deterministic, seed-derived initial
/// parameters.
std::unique_ptr<SynthesisModule> build_module(const ExperimentConfig& cfg);

/// One full serial training step: every phase in order, one optimizer update
/// per phase.  optimizers must be index-aligned with module.groups().
TrainStepReport training_step(SynthesisModule& module, const Batch& batch,
                              std::vector<Optimizer>& optimizers, std::uint64_t step_seed,
                              double lr_override = -1.0);

/// Family-specific conveniences over training_step; the step seed is drawn
/// from the stream.
TrainStepReport ae_training_step(SynthesisModule& module, const Batch& batch,
                                 Optimizer& optimizer, RngStream& rng);
TrainStepReport gan_training_step(SynthesisModule& module, const Batch& batch,
                                  Optimizer& opt_g, Optimizer& opt_d, RngStream& rng);
TrainStepReport diffusion_training_step(SynthesisModule& module, const Batch& batch,
                                        Optimizer& optimizer, RngStream& rng);

}  // namespace synthforge
