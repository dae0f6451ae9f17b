// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/models.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "synthforge/errors.hpp"

namespace synthforge {

double TrainStepReport::metric(const std::string& name) const {
  for (const auto& [n, v] : metrics) {
    if (n == name) return v;
  }
  throw ArgumentError(fmt::format("no metric named '{}' in step report", name));
}

bool TrainStepReport::has(const std::string& name) const {
  for (const auto& [n, v] : metrics) {
    if (n == name) return true;
  }
  return false;
}

// ---- losses ----

Tensor mse_loss(Tape& tape, const Tensor& pred, const Tensor& target) {
  if (pred.shape() != target.shape()) {
    throw DimensionError(fmt::format("mse_loss shape mismatch: {} vs {}",
                                     shape_str(pred.shape()), shape_str(target.shape())));
  }
  return tape.mean(tape.square(tape.sub(pred, target)));
}

Tensor kl_divergence(Tape& tape, const Tensor& mu, const Tensor& logvar) {
  if (mu.shape() != logvar.shape()) {
    throw DimensionError(fmt::format("kl_divergence shape mismatch: {} vs {}",
                                     shape_str(mu.shape()), shape_str(logvar.shape())));
  }
  if (mu.ndim() != 2) {
    throw DimensionError(fmt::format("kl_divergence expects [N, D] inputs, got {}", shape_str(mu.shape())));
  }
  if (!all_finite(mu) || !all_finite(logvar)) {
    throw NumericError("kl_divergence inputs must be finite");
  }
  Tensor term = tape.add_const(
      tape.sub(tape.add(tape.square(mu), tape.exp(logvar)), logvar), -1.0);
  return tape.scale(tape.mean(tape.sum(term, {1})), 0.5);
}

Tensor reparameterize_with_noise(Tape& tape, const Tensor& mu, const Tensor& logvar,
                                 const Tensor& eps) {
  if (mu.shape() != logvar.shape() || mu.shape() != eps.shape()) {
    throw DimensionError(fmt::format("reparameterize shape mismatch: {} vs {} vs {}",
                                     shape_str(mu.shape()), shape_str(logvar.shape()),
                                     shape_str(eps.shape())));
  }
  return tape.add(mu, tape.mul(tape.exp(tape.scale(logvar, 0.5)), eps));
}

Tensor reparameterize(Tape& tape, const Tensor& mu, const Tensor& logvar, RngStream& rng) {
  Tensor eps(mu.shape());
  for (double& v : eps.data_mut()) v = rng.normal();
  return reparameterize_with_noise(tape, mu, logvar, eps);
}

namespace {

Tensor one_minus(Tape& tape, const Tensor& x) { return tape.add_const(tape.neg(x), 1.0); }

}  // namespace

Tensor gan_discriminator_loss(Tape& tape, const Tensor& d_real, const Tensor& d_fake,
                              double real_target) {
  if (real_target <= 0.0 || real_target > 1.0) {
    throw ArgumentError(fmt::format("real_target must be in (0, 1], got {}", real_target));
  }
  Tensor log_dr = tape.log_clamped(d_real);
  Tensor real_term = log_dr;
  if (real_target < 1.0) {
    Tensor log_1mdr = tape.log_clamped(one_minus(tape, d_real));
    real_term = tape.add(tape.scale(log_dr, real_target),
                         tape.scale(log_1mdr, 1.0 - real_target));
  }
  Tensor fake_term = tape.log_clamped(one_minus(tape, d_fake));
  return tape.neg(tape.add(tape.mean(real_term), tape.mean(fake_term)));
}

Tensor gan_generator_loss(Tape& tape, const Tensor& d_fake) {
  return tape.neg(tape.mean(tape.log_clamped(d_fake)));
}

// ---- diffusion schedule ----

NoiseSchedule build_schedule(std::int64_t timesteps, double beta_start, double beta_end) {
  if (timesteps < 2) {
    throw ConfigError(fmt::format("diffusion timesteps must be at least 2, got {}", timesteps));
  }
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0)) {
    throw ConfigError(fmt::format("diffusion betas must satisfy 0 < beta_start <= beta_end < 1, got {} and {}",
                                  beta_start, beta_end));
  }

  NoiseSchedule s;
  s.timesteps = static_cast<std::size_t>(timesteps);
  s.beta.resize(s.timesteps);
  s.alpha.resize(s.timesteps);
  s.alpha_bar.resize(s.timesteps);
  s.posterior_variance.resize(s.timesteps);
  double abar = 1.0;
  for (std::size_t t = 1; t <= s.timesteps; ++t) {
    const double frac = static_cast<double>(t - 1) / static_cast<double>(s.timesteps - 1);
    const double beta = beta_start + frac * (beta_end - beta_start);
    const double prev_abar = abar;
    abar *= 1.0 - beta;
    s.beta[t - 1] = beta;
    s.alpha[t - 1] = 1.0 - beta;
    s.alpha_bar[t - 1] = abar;
    s.posterior_variance[t - 1] = (1.0 - prev_abar) / (1.0 - abar) * beta;
  }
  return s;
}

Tensor q_sample(const Tensor& x0, std::int64_t t, const Tensor& eps, const NoiseSchedule& schedule) {
  if (t < 1 || static_cast<std::size_t>(t) > schedule.timesteps) {
    throw ArgumentError(fmt::format("diffusion step {} out of range [1, {}]", t, schedule.timesteps));
  }
  if (x0.shape() != eps.shape()) {
    throw DimensionError(fmt::format("q_sample shape mismatch: {} vs {}",
                                     shape_str(x0.shape()), shape_str(eps.shape())));
  }
  const double abar = schedule.alpha_bar_at(static_cast<std::size_t>(t));
  const double a = std::sqrt(abar);
  const double b = std::sqrt(1.0 - abar);
  Tensor out(x0.shape());
  auto xd = x0.data();
  auto ed = eps.data();
  auto od = out.data_mut();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] = a * xd[i] + b * ed[i];
  return out;
}

Tensor ddpm_sample_step(const Tensor& x_t, std::int64_t t, const Tensor& eps_hat,
                        const NoiseSchedule& schedule, RngStream& rng) {
  if (t < 1 || static_cast<std::size_t>(t) > schedule.timesteps) {
    throw ArgumentError(fmt::format("diffusion step {} out of range [1, {}]", t, schedule.timesteps));
  }
  if (x_t.shape() != eps_hat.shape()) {
    throw DimensionError(fmt::format("ddpm_sample_step shape mismatch: {} vs {}",
                                     shape_str(x_t.shape()), shape_str(eps_hat.shape())));
  }
  const std::size_t ts = static_cast<std::size_t>(t);
  const double beta = schedule.beta_at(ts);
  const double coef = beta / std::sqrt(1.0 - schedule.alpha_bar_at(ts));
  const double inv_sqrt_alpha = 1.0 / std::sqrt(schedule.alpha_at(ts));
  const double sigma = std::sqrt(schedule.posterior_variance_at(ts));

  Tensor out(x_t.shape());
  auto xd = x_t.data();
  auto ed = eps_hat.data();
  auto od = out.data_mut();
  for (std::size_t i = 0; i < od.size(); ++i) {
    od[i] = inv_sqrt_alpha * (xd[i] - coef * ed[i]);
  }
  if (t > 1) {
    for (std::size_t i = 0; i < od.size(); ++i) od[i] += sigma * rng.normal();
  }
  return out;
}

// ---- shared model plumbing ----

namespace {

constexpr double kLeakySlope = 0.2;
constexpr std::size_t kTimeEmbedDim = 32;

std::size_t down_stages(std::int64_t image_size) {
  switch (image_size) {
    case 8: return 1;
    case 16: return 2;
    case 32: return 3;
    case 64: return 4;
  }
  throw ConfigError(fmt::format("unsupported image_size {}", image_size));
}

std::size_t stage_channels(std::size_t stage) { return std::size_t{16} << (stage - 1); }

void check_labels(const std::vector<int>& labels, std::int64_t num_classes, const char* what) {
  for (int l : labels) {
    if (l < 0 || l >= num_classes) {
      throw ArgumentError(fmt::format("{} label {} out of range [0, {})", what, l, num_classes));
    }
  }
}

Tensor one_hot_rows(const std::vector<int>& labels, std::size_t num_classes) {
  Tensor out(Shape{labels.size(), num_classes});
  auto od = out.data_mut();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    od[i * num_classes + static_cast<std::size_t>(labels[i])] = 1.0;
  }
  return out;
}

Tensor one_hot_planes(const std::vector<int>& labels, std::size_t num_classes,
                      std::size_t h, std::size_t w) {
  Tensor out(Shape{labels.size(), num_classes, h, w});
  auto od = out.data_mut();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double* plane = od.data() + (i * num_classes + static_cast<std::size_t>(labels[i])) * h * w;
    std::fill(plane, plane + h * w, 1.0);
  }
  return out;
}

/// Conv stack halving the spatial size down to 4x4, leaky activations.
std::vector<Layer> make_encoder_stack(std::size_t in_channels, std::size_t stages) {
  std::vector<Layer> layers;
  std::size_t prev = in_channels;
  for (std::size_t j = 1; j <= stages; ++j) {
    layers.push_back(conv2d_layer(prev, stage_channels(j), 3, 2, 1));
    prev = stage_channels(j);
  }
  return layers;
}

/// Transposed-conv stack doubling 4x4 back to the image size.  All but the
/// last stage use leaky activations; the caller applies tanh after the last.
std::vector<Layer> make_decoder_stack(std::size_t out_channels, std::size_t stages) {
  std::vector<Layer> layers;
  for (std::size_t j = stages; j >= 1; --j) {
    const std::size_t in_ch = stage_channels(j);
    const std::size_t out_ch = j > 1 ? stage_channels(j - 1) : out_channels;
    layers.push_back(conv_transpose2d_layer(in_ch, out_ch, 4, 2, 1));
  }
  return layers;
}

void register_layer(ParamGroup& group, const std::string& name, Layer& layer) {
  layer.w.set_requires_grad();
  layer.b.set_requires_grad();
  group.params.push_back({name + "_w", layer.w});
  group.params.push_back({name + "_b", layer.b});
}

void zero_all_grads(std::vector<ParamGroup>& groups) {
  for (ParamGroup& g : groups) {
    for (NamedParam& p : g.params) p.tensor.zero_grad();
  }
}

double plain_mean(const Tensor& t) {
  double acc = 0.0;
  for (double v : t.data()) acc += v;
  return t.numel() ? acc / static_cast<double>(t.numel()) : 0.0;
}

}  // namespace

Tensor SynthesisModule::reconstruct(const Batch&) {
  throw CapabilityError(fmt::format("reconstruct is unavailable for the {} family", family_name(family_)));
}

void SynthesisModule::copy_params_from(const SynthesisModule& other) {
  if (groups_.size() != other.groups_.size()) {
    throw ArgumentError("copy_params_from: parameter group count mismatch");
  }
  for (std::size_t g = 0; g < groups_.size(); ++g) {
    auto& dst = groups_[g].params;
    const auto& src = other.groups_[g].params;
    if (dst.size() != src.size()) {
      throw ArgumentError(fmt::format("copy_params_from: group '{}' size mismatch", groups_[g].name));
    }
    for (std::size_t i = 0; i < dst.size(); ++i) {
      if (dst[i].name != src[i].name || dst[i].tensor.shape() != src[i].tensor.shape()) {
        throw ArgumentError(fmt::format("copy_params_from: parameter '{}' mismatch", dst[i].name));
      }
      std::copy(src[i].tensor.data().begin(), src[i].tensor.data().end(),
                dst[i].tensor.data_mut().begin());
    }
  }
}

std::unique_ptr<SynthesisModule> SynthesisModule::clone() const {
  std::unique_ptr<SynthesisModule> copy = build_module(cfg_);
  copy->copy_params_from(*this);
  return copy;
}

// ---- autoencoder ----

namespace {

class AutoencoderModule final : public SynthesisModule {
 public:
  AutoencoderModule(ExperimentConfig cfg, ConditioningMode conditioning, RngStream& rng)
      : SynthesisModule(ModelFamily::autoencoder, conditioning, std::move(cfg)) {
    const std::size_t s = static_cast<std::size_t>(cfg_.image_size);
    const std::size_t channels = static_cast<std::size_t>(cfg_.channels);
    const std::size_t classes = conditioning_ == ConditioningMode::klass
                                    ? static_cast<std::size_t>(cfg_.num_classes)
                                    : 0;
    const std::size_t latent = static_cast<std::size_t>(cfg_.latent_dim);
    stages_ = down_stages(cfg_.image_size);
    top_channels_ = stage_channels(stages_);
    flat_ = top_channels_ * 16;
    size_ = s;

    enc_ = make_encoder_stack(channels + classes, stages_);
    mu_ = dense_layer(flat_, latent);
    logvar_ = dense_layer(flat_, latent);
    dec_dense_ = dense_layer(latent + classes, flat_);
    dec_ = make_decoder_stack(channels, stages_);

    groups_.push_back(ParamGroup{"main", {}});
    ParamGroup& g = groups_[0];
    for (std::size_t i = 0; i < enc_.size(); ++i) {
      init_params(enc_[i], rng);
      register_layer(g, fmt::format("enc{}", i), enc_[i]);
    }
    init_params(mu_, rng);
    register_layer(g, "mu", mu_);
    init_params(logvar_, rng);
    register_layer(g, "logvar", logvar_);
    init_params(dec_dense_, rng);
    register_layer(g, "dec_dense", dec_dense_);
    for (std::size_t i = 0; i < dec_.size(); ++i) {
      init_params(dec_[i], rng);
      register_layer(g, fmt::format("dec{}", i), dec_[i]);
    }
  }

  std::size_t phase_count() const override { return 1; }
  std::size_t phase_group(std::size_t) const override { return 0; }

  TrainStepReport phase_gradients(std::size_t phase, const Batch& shard,
                                  std::uint64_t step_seed, std::size_t sample_offset) override {
    if (phase != 0) throw ArgumentError("autoencoder has a single training phase");
    require_label_policy(shard);
    const std::size_t n = shard.size();
    if (n == 0) throw ArgumentError("training shard must be nonempty");

    zero_all_grads(groups_);
    Tape tape;
    Tensor x = shard.images;
    auto [mu, logvar] = encode(tape, x, shard.labels);

    Tensor z = mu;
    const bool variational = cfg_.autoencoder.variational;
    if (variational) {
      Tensor eps(mu.shape());
      auto ed = eps.data_mut();
      const std::size_t latent = static_cast<std::size_t>(cfg_.latent_dim);
      for (std::size_t i = 0; i < n; ++i) {
        RngStream stream(derive_seed(step_seed, 0, sample_offset + i));
        for (std::size_t d = 0; d < latent; ++d) ed[i * latent + d] = stream.normal();
      }
      z = reparameterize_with_noise(tape, mu, logvar, eps);
    }

    Tensor xhat = decode(tape, z, shard.labels);
    Tensor recon = mse_loss(tape, xhat, x);
    Tensor loss = recon;
    double kl_value = 0.0;
    if (variational) {
      Tensor kl = kl_divergence(tape, mu, logvar);
      kl_value = kl.value();
      loss = tape.add(recon, tape.scale(kl, cfg_.autoencoder.beta_kl));
    }
    tape.backward(loss);

    TrainStepReport report;
    report.add("loss", loss.value());
    report.add("recon", recon.value());
    report.add("kl", kl_value);
    return report;
  }

  Tensor generate(std::size_t n, const std::vector<int>& labels, RngStream& rng) override {
    require_generate_labels(n, labels);
    const std::size_t latent = static_cast<std::size_t>(cfg_.latent_dim);
    Tensor z(Shape{n, latent});
    auto zd = z.data_mut();
    for (std::size_t i = 0; i < n * latent; ++i) zd[i] = rng.normal();
    if (n == 0) {
      return Tensor(Shape{0, static_cast<std::size_t>(cfg_.channels), size_, size_});
    }
    Tape tape(false);
    Tensor out = decode(tape, z, labels);
    return clamp_unit_range(out);
  }

  Tensor reconstruct(const Batch& batch) override {
    require_label_policy(batch);
    if (batch.size() == 0) {
      return Tensor(Shape{0, static_cast<std::size_t>(cfg_.channels), size_, size_});
    }
    Tape tape(false);
    auto [mu, logvar] = encode(tape, batch.images, batch.labels);
    return decode(tape, mu, batch.labels);
  }

 private:
  void require_label_policy(const Batch& batch) const {
    if (conditioning_ == ConditioningMode::klass && !batch.has_labels()) {
      throw ArgumentError("conditional module requires a labeled batch");
    }
    if (conditioning_ == ConditioningMode::none && batch.has_labels()) {
      throw ArgumentError("unconditional module was given a labeled batch");
    }
  }

  void require_generate_labels(std::size_t n, const std::vector<int>& labels) const {
    if (conditioning_ == ConditioningMode::klass) {
      if (labels.size() != n) {
        throw ArgumentError(fmt::format("conditional generation needs {} labels, got {}", n, labels.size()));
      }
      check_labels(labels, cfg_.num_classes, "generation");
    } else if (!labels.empty()) {
      throw ArgumentError("labels were supplied to an unconditional module");
    }
  }

  std::pair<Tensor, Tensor> encode(Tape& tape, const Tensor& x, const std::vector<int>& labels) {
    Tensor h = x;
    if (conditioning_ == ConditioningMode::klass) {
      h = tape.concat({x, one_hot_planes(labels, static_cast<std::size_t>(cfg_.num_classes),
                                         size_, size_)},
                      1);
    }
    for (const Layer& l : enc_) h = tape.leaky_relu(l.forward(tape, h), kLeakySlope);
    h = tape.reshape(h, Shape{h.extent(0), flat_});
    Tensor mu = mu_.forward(tape, h);
    Tensor logvar = tape.clamp(logvar_.forward(tape, h), -10.0, 10.0);
    return {mu, logvar};
  }

  Tensor decode(Tape& tape, const Tensor& z, const std::vector<int>& labels) {
    Tensor h = z;
    if (conditioning_ == ConditioningMode::klass) {
      h = tape.concat({z, one_hot_rows(labels, static_cast<std::size_t>(cfg_.num_classes))}, 1);
    }
    h = dec_dense_.forward(tape, h);
    h = tape.reshape(h, Shape{h.extent(0), top_channels_, 4, 4});
    h = tape.leaky_relu(h, kLeakySlope);
    for (std::size_t i = 0; i < dec_.size(); ++i) {
      h = dec_[i].forward(tape, h);
      h = i + 1 < dec_.size() ? tape.leaky_relu(h, kLeakySlope) : tape.tanh(h);
    }
    return h;
  }

  static Tensor clamp_unit_range(const Tensor& x) {
    Tensor out(x.shape());
    auto xd = x.data();
    auto od = out.data_mut();
    for (std::size_t i = 0; i < od.size(); ++i) od[i] = std::min(1.0, std::max(-1.0, xd[i]));
    return out;
  }

  std::vector<Layer> enc_;
  Layer mu_, logvar_, dec_dense_;
  std::vector<Layer> dec_;
  std::size_t stages_ = 0, top_channels_ = 0, flat_ = 0, size_ = 0;
};

// ---- gan ----

class GanModule final : public SynthesisModule {
 public:
  GanModule(ExperimentConfig cfg, ConditioningMode conditioning, RngStream& rng)
      : SynthesisModule(ModelFamily::gan, conditioning, std::move(cfg)) {
    const std::size_t s = static_cast<std::size_t>(cfg_.image_size);
    const std::size_t channels = static_cast<std::size_t>(cfg_.channels);
    const std::size_t classes = conditioning_ == ConditioningMode::klass
                                    ? static_cast<std::size_t>(cfg_.num_classes)
                                    : 0;
    stages_ = down_stages(cfg_.image_size);
    top_channels_ = stage_channels(stages_);
    flat_ = top_channels_ * 16;
    size_ = s;
    latent_ = static_cast<std::size_t>(cfg_.gan.latent_dim);

    g_dense_ = dense_layer(latent_ + classes, flat_);
    g_deconv_ = make_decoder_stack(channels, stages_);
    d_conv_ = make_encoder_stack(channels + classes, stages_);
    d_out_ = dense_layer(flat_, 1);

    groups_.push_back(ParamGroup{"generator", {}});
    groups_.push_back(ParamGroup{"discriminator", {}});
    ParamGroup& gg = groups_[0];
    ParamGroup& gd = groups_[1];
    init_params(g_dense_, rng);
    register_layer(gg, "g_dense", g_dense_);
    for (std::size_t i = 0; i < g_deconv_.size(); ++i) {
      init_params(g_deconv_[i], rng);
      register_layer(gg, fmt::format("g_deconv{}", i), g_deconv_[i]);
    }
    for (std::size_t i = 0; i < d_conv_.size(); ++i) {
      init_params(d_conv_[i], rng);
      register_layer(gd, fmt::format("d_conv{}", i), d_conv_[i]);
    }
    init_params(d_out_, rng);
    register_layer(gd, "d_out", d_out_);
  }

  std::size_t phase_count() const override { return 2; }
  // Discriminator trains first, generator second.
  std::size_t phase_group(std::size_t phase) const override { return phase == 0 ? 1 : 0; }

  TrainStepReport phase_gradients(std::size_t phase, const Batch& shard,
                                  std::uint64_t step_seed, std::size_t sample_offset) override {
    if (phase >= 2) throw ArgumentError("gan has exactly two training phases");
    require_label_policy(shard);
    const std::size_t n = shard.size();
    if (n == 0) throw ArgumentError("training shard must be nonempty");

    zero_all_grads(groups_);
    const bool conditional = conditioning_ == ConditioningMode::klass;

    // Per-sample draws: the latent vector first, then (conditionally) the
    // fake class id.
    Tensor z(Shape{n, latent_});
    std::vector<int> fake_labels;
    {
      auto zd = z.data_mut();
      for (std::size_t i = 0; i < n; ++i) {
        RngStream stream(derive_seed(step_seed, phase, sample_offset + i));
        for (std::size_t d = 0; d < latent_; ++d) zd[i * latent_ + d] = stream.normal();
        if (conditional) {
          fake_labels.push_back(static_cast<int>(stream.uniform_int(
              static_cast<std::uint64_t>(cfg_.num_classes))));
        }
      }
    }

    TrainStepReport report;
    if (phase == 0) {
      Tensor fake;
      {
        Tape frozen(false);
        fake = generator_forward(frozen, z, fake_labels);
      }
      Tape tape;
      Tensor d_real = discriminator_forward(tape, shard.images, shard.labels);
      Tensor d_fake = discriminator_forward(tape, fake, fake_labels);
      Tensor loss = gan_discriminator_loss(tape, d_real, d_fake,
                                           1.0 - cfg_.gan.label_smoothing);
      tape.backward(loss);
      report.add("d_loss", loss.value());
      report.add("d_real_mean", plain_mean(d_real));
      report.add("d_fake_mean", plain_mean(d_fake));
    } else {
      Tape tape;
      Tensor fake = generator_forward(tape, z, fake_labels);
      Tensor d_fake = discriminator_forward(tape, fake, fake_labels);
      Tensor loss = gan_generator_loss(tape, d_fake);
      tape.backward(loss);
      report.add("g_loss", loss.value());
    }
    return report;
  }

  Tensor generate(std::size_t n, const std::vector<int>& labels, RngStream& rng) override {
    if (conditioning_ == ConditioningMode::klass) {
      if (labels.size() != n) {
        throw ArgumentError(fmt::format("conditional generation needs {} labels, got {}", n, labels.size()));
      }
      check_labels(labels, cfg_.num_classes, "generation");
    } else if (!labels.empty()) {
      throw ArgumentError("labels were supplied to an unconditional module");
    }
    if (n == 0) {
      return Tensor(Shape{0, static_cast<std::size_t>(cfg_.channels), size_, size_});
    }
    Tensor z(Shape{n, latent_});
    for (double& v : z.data_mut()) v = rng.normal();
    Tape tape(false);
    return generator_forward(tape, z, labels);
  }

 private:
  void require_label_policy(const Batch& batch) const {
    if (conditioning_ == ConditioningMode::klass && !batch.has_labels()) {
      throw ArgumentError("conditional module requires a labeled batch");
    }
    if (conditioning_ == ConditioningMode::none && batch.has_labels()) {
      throw ArgumentError("unconditional module was given a labeled batch");
    }
  }

  Tensor generator_forward(Tape& tape, const Tensor& z, const std::vector<int>& labels) {
    Tensor h = z;
    if (conditioning_ == ConditioningMode::klass) {
      h = tape.concat({z, one_hot_rows(labels, static_cast<std::size_t>(cfg_.num_classes))}, 1);
    }
    h = g_dense_.forward(tape, h);
    h = tape.reshape(h, Shape{h.extent(0), top_channels_, 4, 4});
    h = tape.leaky_relu(h, kLeakySlope);
    for (std::size_t i = 0; i < g_deconv_.size(); ++i) {
      h = g_deconv_[i].forward(tape, h);
      h = i + 1 < g_deconv_.size() ? tape.leaky_relu(h, kLeakySlope) : tape.tanh(h);
    }
    return h;
  }

  Tensor discriminator_forward(Tape& tape, const Tensor& x, const std::vector<int>& labels) {
    Tensor h = x;
    if (conditioning_ == ConditioningMode::klass) {
      h = tape.concat({x, one_hot_planes(labels, static_cast<std::size_t>(cfg_.num_classes),
                                         size_, size_)},
                      1);
    }
    for (const Layer& l : d_conv_) h = tape.leaky_relu(l.forward(tape, h), kLeakySlope);
    h = tape.reshape(h, Shape{h.extent(0), flat_});
    return tape.sigmoid(d_out_.forward(tape, h));
  }

  Layer g_dense_, d_out_;
  std::vector<Layer> g_deconv_, d_conv_;
  std::size_t stages_ = 0, top_channels_ = 0, flat_ = 0, size_ = 0, latent_ = 0;
};

// ---- diffusion ----

class DiffusionModule final : public SynthesisModule {
 public:
  DiffusionModule(ExperimentConfig cfg, ConditioningMode conditioning, RngStream& rng)
      : SynthesisModule(ModelFamily::diffusion, conditioning, std::move(cfg)) {
    size_ = static_cast<std::size_t>(cfg_.image_size);
    channels_ = static_cast<std::size_t>(cfg_.channels);
    schedule_ = build_schedule(cfg_.diffusion.timesteps, cfg_.diffusion.beta_start,
                               cfg_.diffusion.beta_end);

    conv_in_ = conv2d_layer(channels_, 16, 3, 1, 1);
    down1_ = conv2d_layer(16, 32, 3, 2, 1);
    down2_ = conv2d_layer(32, 64, 3, 2, 1);
    mid_ = conv2d_layer(64, 64, 3, 1, 1);
    up1_ = conv_transpose2d_layer(64, 32, 4, 2, 1);
    up2_ = conv_transpose2d_layer(32, 16, 4, 2, 1);
    conv_out_ = conv2d_layer(16, channels_, 3, 1, 1);
    t_proj_ = {dense_layer(kTimeEmbedDim, 16), dense_layer(kTimeEmbedDim, 32),
               dense_layer(kTimeEmbedDim, 64), dense_layer(kTimeEmbedDim, 32),
               dense_layer(kTimeEmbedDim, 16)};
    if (conditioning_ == ConditioningMode::klass) {
      class_embed_ = dense_layer(static_cast<std::size_t>(cfg_.num_classes), kTimeEmbedDim);
    }

    groups_.push_back(ParamGroup{"main", {}});
    ParamGroup& g = groups_[0];
    Layer* convs[] = {&conv_in_, &down1_, &down2_, &mid_, &up1_, &up2_, &conv_out_};
    const char* conv_names[] = {"conv_in", "down1", "down2", "mid", "up1", "up2", "conv_out"};
    for (std::size_t i = 0; i < 7; ++i) {
      init_params(*convs[i], rng);
      register_layer(g, conv_names[i], *convs[i]);
    }
    for (std::size_t i = 0; i < t_proj_.size(); ++i) {
      init_params(t_proj_[i], rng);
      register_layer(g, fmt::format("t_proj{}", i), t_proj_[i]);
    }
    if (conditioning_ == ConditioningMode::klass) {
      init_params(class_embed_, rng);
      register_layer(g, "class_embed", class_embed_);
    }
  }

  std::size_t phase_count() const override { return 1; }
  std::size_t phase_group(std::size_t) const override { return 0; }
  const NoiseSchedule* schedule() const override { return &schedule_; }

  TrainStepReport phase_gradients(std::size_t phase, const Batch& shard,
                                  std::uint64_t step_seed, std::size_t sample_offset) override {
    if (phase != 0) throw ArgumentError("diffusion has a single training phase");
    require_label_policy(shard);
    const std::size_t n = shard.size();
    if (n == 0) throw ArgumentError("training shard must be nonempty");

    zero_all_grads(groups_);
    const std::size_t numel = channels_ * size_ * size_;
    const std::size_t big_t = schedule_.timesteps;

    // Per-sample draws: the step index first, then the noise field.
    std::vector<std::uint64_t> ts(n);
    Tensor eps(shard.images.shape());
    Tensor x_t(shard.images.shape());
    {
      auto x0 = shard.images.data();
      auto ed = eps.data_mut();
      auto xd = x_t.data_mut();
      for (std::size_t i = 0; i < n; ++i) {
        RngStream stream(derive_seed(step_seed, 0, sample_offset + i));
        ts[i] = 1 + stream.uniform_int(big_t);
        const double abar = schedule_.alpha_bar_at(ts[i]);
        const double a = std::sqrt(abar), b = std::sqrt(1.0 - abar);
        for (std::size_t k = 0; k < numel; ++k) {
          const double e = stream.normal();
          ed[i * numel + k] = e;
          xd[i * numel + k] = a * x0[i * numel + k] + b * e;
        }
      }
    }

    Tape tape;
    Tensor eps_hat = predict_noise(tape, x_t, ts, shard.labels);
    Tensor loss = mse_loss(tape, eps_hat, eps);
    tape.backward(loss);

    TrainStepReport report;
    report.add("diffusion_mse", loss.value());
    return report;
  }

  Tensor generate(std::size_t n, const std::vector<int>& labels, RngStream& rng) override {
    if (conditioning_ == ConditioningMode::klass) {
      if (labels.size() != n) {
        throw ArgumentError(fmt::format("conditional generation needs {} labels, got {}", n, labels.size()));
      }
      check_labels(labels, cfg_.num_classes, "generation");
    } else if (!labels.empty()) {
      throw ArgumentError("labels were supplied to an unconditional module");
    }
    Tensor x(Shape{n, channels_, size_, size_});
    if (n == 0) return x;
    for (double& v : x.data_mut()) v = rng.normal();

    std::vector<std::uint64_t> ts(n);
    for (std::size_t t = schedule_.timesteps; t >= 1; --t) {
      std::fill(ts.begin(), ts.end(), t);
      Tape tape(false);
      Tensor eps_hat = predict_noise(tape, x, ts, labels);
      x = ddpm_sample_step(x, static_cast<std::int64_t>(t), eps_hat, schedule_, rng);
    }
    auto xd = x.data_mut();
    for (double& v : xd) v = std::min(1.0, std::max(-1.0, v));
    return x;
  }

 private:
  void require_label_policy(const Batch& batch) const {
    if (conditioning_ == ConditioningMode::klass && !batch.has_labels()) {
      throw ArgumentError("conditional module requires a labeled batch");
    }
    if (conditioning_ == ConditioningMode::none && batch.has_labels()) {
      throw ArgumentError("unconditional module was given a labeled batch");
    }
  }

  Tensor predict_noise(Tape& tape, const Tensor& x_t, const std::vector<std::uint64_t>& ts,
                       const std::vector<int>& labels) {
    Tensor emb = time_embedding_batch(ts, kTimeEmbedDim);
    if (conditioning_ == ConditioningMode::klass) {
      Tensor hot = one_hot_rows(labels, static_cast<std::size_t>(cfg_.num_classes));
      emb = tape.add(emb, class_embed_.forward(tape, hot));
    }

    Tensor h0 = tape.leaky_relu(
        tape.add_channel_bias(conv_in_.forward(tape, x_t), t_proj_[0].forward(tape, emb)),
        kLeakySlope);
    Tensor h1 = tape.leaky_relu(
        tape.add_channel_bias(down1_.forward(tape, h0), t_proj_[1].forward(tape, emb)),
        kLeakySlope);
    Tensor h2 = tape.leaky_relu(
        tape.add_channel_bias(down2_.forward(tape, h1), t_proj_[2].forward(tape, emb)),
        kLeakySlope);
    Tensor m = tape.leaky_relu(mid_.forward(tape, h2), kLeakySlope);
    Tensor u1 = tape.leaky_relu(
        tape.add_channel_bias(up1_.forward(tape, m), t_proj_[3].forward(tape, emb)), kLeakySlope);
    u1 = tape.add(u1, h1);
    Tensor u2 = tape.leaky_relu(
        tape.add_channel_bias(up2_.forward(tape, u1), t_proj_[4].forward(tape, emb)), kLeakySlope);
    u2 = tape.add(u2, h0);
    return conv_out_.forward(tape, u2);
  }

  Layer conv_in_, down1_, down2_, mid_, up1_, up2_, conv_out_, class_embed_;
  std::vector<Layer> t_proj_;
  NoiseSchedule schedule_;
  std::size_t size_ = 0, channels_ = 0;
};

}  // namespace

// ---- factory and step drivers ----

std::unique_ptr<SynthesisModule> build_module(const ExperimentConfig& cfg) {
  const ConditioningMode conditioning = cfg.labeling_paradigm == LabelingParadigm::labeled
                                            ? ConditioningMode::klass
                                            : ConditioningMode::none;
  RngStream rng(purpose_root(cfg.seed, SeedPurpose::init));
  switch (cfg.model_family) {
    case ModelFamily::autoencoder:
      return std::make_unique<AutoencoderModule>(cfg, conditioning, rng);
    case ModelFamily::gan:
      return std::make_unique<GanModule>(cfg, conditioning, rng);
    case ModelFamily::diffusion:
      return std::make_unique<DiffusionModule>(cfg, conditioning, rng);
  }
  throw ConfigError("unsupported model family");
}

TrainStepReport training_step(SynthesisModule& module, const Batch& batch,
                              std::vector<Optimizer>& optimizers, std::uint64_t step_seed,
                              double lr_override) {
  if (optimizers.size() != module.groups().size()) {
    throw ArgumentError(fmt::format("expected {} optimizers, got {}", module.groups().size(),
                                    optimizers.size()));
  }
  TrainStepReport total;
  for (std::size_t phase = 0; phase < module.phase_count(); ++phase) {
    TrainStepReport r = module.phase_gradients(phase, batch, step_seed, 0);
    const std::size_t gi = module.phase_group(phase);
    optimizers[gi].step(module.groups()[gi], lr_override);
    for (auto& m : r.metrics) total.metrics.push_back(std::move(m));
    total.updates += 1;
  }
  return total;
}

TrainStepReport ae_training_step(SynthesisModule& module, const Batch& batch,
                                 Optimizer& optimizer, RngStream& rng) {
  if (module.family() != ModelFamily::autoencoder) {
    throw ArgumentError("ae_training_step requires an autoencoder module");
  }
  const std::uint64_t step_seed = rng.next_u64();
  TrainStepReport r = module.phase_gradients(0, batch, step_seed, 0);
  optimizer.step(module.groups()[0]);
  r.updates = 1;
  return r;
}

TrainStepReport gan_training_step(SynthesisModule& module, const Batch& batch,
                                  Optimizer& opt_g, Optimizer& opt_d, RngStream& rng) {
  if (module.family() != ModelFamily::gan) {
    throw ArgumentError("gan_training_step requires a gan module");
  }
  const std::uint64_t step_seed = rng.next_u64();
  TrainStepReport r0 = module.phase_gradients(0, batch, step_seed, 0);
  opt_d.step(module.groups()[1]);
  TrainStepReport r1 = module.phase_gradients(1, batch, step_seed, 0);
  opt_g.step(module.groups()[0]);
  TrainStepReport total;
  for (auto& m : r0.metrics) total.metrics.push_back(std::move(m));
  for (auto& m : r1.metrics) total.metrics.push_back(std::move(m));
  total.updates = 2;
  return total;
}

TrainStepReport diffusion_training_step(SynthesisModule& module, const Batch& batch,
                                        Optimizer& optimizer, RngStream& rng) {
  if (module.family() != ModelFamily::diffusion) {
    throw ArgumentError("diffusion_training_step requires a diffusion module");
  }
  const std::uint64_t step_seed = rng.next_u64();
  TrainStepReport r = module.phase_gradients(0, batch, step_seed, 0);
  optimizer.step(module.groups()[0]);
  r.updates = 1;
  return r;
}

}  // namespace synthforge
