// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "synthforge/errors.hpp"
#include "synthforge/format.hpp"
#include "synthforge/log.hpp"

namespace synthforge {

// ---- metric log ----

MetricLog::MetricLog(std::filesystem::path path) : path_(std::move(path)) {
  std::error_code ec;
  const bool fresh = !std::filesystem::exists(path_, ec) || std::filesystem::file_size(path_, ec) == 0;
  if (fresh) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (!out) throw IoError(fmt::format("cannot write '{}'", path_.string()));
    out << "epoch,step,metric,value\n";
  }
}

void MetricLog::append(std::uint64_t epoch, std::uint64_t step, const std::string& name,
                       double value) {
  if (!std::isfinite(value)) {
    throw NumericError(fmt::format("metric '{}' is non-finite at epoch {} step {}", name, epoch, step));
  }
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path_.string()));
  out << fmt::format("{},{},{},{}\n", epoch, step, name, double_to_string(value));
  out.flush();
  if (!out) throw IoError(fmt::format("write failed for '{}'", path_.string()));
}

void MetricLog::comment(const std::string& text) {
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (out) out << "# " << text << "\n";
}

std::vector<MetricRow> MetricLog::parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || (line != "epoch,step,metric,value" && line != "epoch,step,metric,value\r")) {
    throw ParseError("metric CSV: bad or missing header");
  }
  std::vector<MetricRow> rows;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    for (char c : line) {
      if (c == ',') {
        cells.push_back(cell);
        cell.clear();
      } else {
        cell.push_back(c);
      }
    }
    cells.push_back(cell);
    if (cells.size() != 4) {
      throw ParseError(fmt::format("metric CSV row {}: expected 4 cells, got {}", row_no, cells.size()));
    }
    MetricRow row;
    long long e = 0, s = 0;
    if (!parse_int64(cells[0], e) || e < 0 || !parse_int64(cells[1], s) || s < 0) {
      throw ParseError(fmt::format("metric CSV row {}: bad epoch/step", row_no));
    }
    row.epoch = static_cast<std::uint64_t>(e);
    row.step = static_cast<std::uint64_t>(s);
    row.name = cells[2];
    if (!parse_double(cells[3], row.value)) {
      throw ParseError(fmt::format("metric CSV row {}: bad value '{}'", row_no, cells[3]));
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---- checkpoint plumbing ----

std::vector<Optimizer> make_optimizers(SynthesisModule& module) {
  std::vector<Optimizer> optimizers;
  optimizers.reserve(module.groups().size());
  for (ParamGroup& group : module.groups()) {
    optimizers.emplace_back(module.config().optimizer);
    optimizers.back().attach(group);
  }
  return optimizers;
}

Checkpoint make_checkpoint(const SynthesisModule& module, const std::vector<Optimizer>& optimizers,
                           std::uint64_t epoch, std::uint64_t step, std::string config_text) {
  Checkpoint ckpt;
  ckpt.epoch = epoch;
  ckpt.step = step;
  ckpt.config_text = std::move(config_text);
  ckpt.rng_states = {module.config().seed};

  for (const ParamGroup& group : module.groups()) {
    for (const NamedParam& p : group.params) {
      ckpt.tensors.emplace_back(fmt::format("params/{}/{}", group.name, p.name), p.tensor.clone());
    }
  }
  if (optimizers.size() != module.groups().size()) {
    throw ArgumentError("make_checkpoint: optimizer count does not match group count");
  }
  for (std::size_t g = 0; g < optimizers.size(); ++g) {
    const ParamGroup& group = module.groups()[g];
    for (std::size_t i = 0; i < group.params.size(); ++i) {
      ckpt.tensors.emplace_back(fmt::format("opt/{}/m/{}", group.name, group.params[i].name),
                                optimizers[g].moment1()[i].clone());
    }
    for (std::size_t i = 0; i < group.params.size(); ++i) {
      ckpt.tensors.emplace_back(fmt::format("opt/{}/v/{}", group.name, group.params[i].name),
                                optimizers[g].moment2()[i].clone());
    }
    Tensor t_tensor(Shape{1});
    t_tensor.data_mut()[0] = static_cast<double>(optimizers[g].step_count());
    ckpt.tensors.emplace_back(fmt::format("opt/{}/t", group.name), std::move(t_tensor));
  }
  if (const NoiseSchedule* schedule = module.schedule()) {
    Tensor beta(Shape{schedule->timesteps});
    std::copy(schedule->beta.begin(), schedule->beta.end(), beta.data_mut().begin());
    ckpt.tensors.emplace_back("schedule/beta", std::move(beta));
  }
  return ckpt;
}

namespace {

const Tensor& require_tensor(const Checkpoint& ckpt, const std::string& name, const Shape& shape) {
  const Tensor* t = ckpt.find(name);
  if (t == nullptr) {
    throw LoadError(fmt::format("checkpoint is missing tensor '{}'", name));
  }
  if (t->shape() != shape) {
    throw LoadError(fmt::format("checkpoint tensor '{}' has shape {}, expected {}",
                                name, shape_str(t->shape()), shape_str(shape)));
  }
  return *t;
}

void copy_into(Tensor& dst, const Tensor& src) {
  std::copy(src.data().begin(), src.data().end(), dst.data_mut().begin());
}

}  // namespace

void restore_params(const Checkpoint& ckpt, SynthesisModule& module) {
  for (ParamGroup& group : module.groups()) {
    for (NamedParam& p : group.params) {
      const Tensor& src =
          require_tensor(ckpt, fmt::format("params/{}/{}", group.name, p.name), p.tensor.shape());
      copy_into(p.tensor, src);
    }
  }
  if (const NoiseSchedule* schedule = module.schedule()) {
    const Tensor& beta = require_tensor(ckpt, "schedule/beta", Shape{schedule->timesteps});
    for (std::size_t i = 0; i < schedule->timesteps; ++i) {
      if (beta.data()[i] != schedule->beta[i]) {
        throw LoadError(fmt::format("checkpoint noise schedule differs from the config at step {}", i + 1));
      }
    }
  }
}

void restore_training_state(const Checkpoint& ckpt, SynthesisModule& module,
                            std::vector<Optimizer>& optimizers) {
  restore_params(ckpt, module);
  if (optimizers.size() != module.groups().size()) {
    throw ArgumentError("restore_training_state: optimizer count does not match group count");
  }
  for (std::size_t g = 0; g < optimizers.size(); ++g) {
    ParamGroup& group = module.groups()[g];
    for (std::size_t i = 0; i < group.params.size(); ++i) {
      const std::string& pname = group.params[i].name;
      copy_into(optimizers[g].moment1()[i],
                require_tensor(ckpt, fmt::format("opt/{}/m/{}", group.name, pname),
                               group.params[i].tensor.shape()));
      copy_into(optimizers[g].moment2()[i],
                require_tensor(ckpt, fmt::format("opt/{}/v/{}", group.name, pname),
                               group.params[i].tensor.shape()));
    }
    const Tensor& t = require_tensor(ckpt, fmt::format("opt/{}/t", group.name), Shape{1});
    optimizers[g].set_step_count(static_cast<std::uint64_t>(std::llround(t.data()[0])));
  }
}

// ---- data-parallel step ----

namespace {

std::vector<std::size_t> balanced_shards(std::size_t n, std::size_t k) {
  std::vector<std::size_t> sizes(k, n / k);
  for (std::size_t i = 0; i < n % k; ++i) ++sizes[i];
  return sizes;
}

Batch slice_batch(const Batch& batch, std::size_t start, std::size_t count) {
  const Shape& s = batch.images.shape();
  Batch out;
  out.images = Tensor(Shape{count, s[1], s[2], s[3]});
  const std::size_t per = s[1] * s[2] * s[3];
  auto src = batch.images.data();
  auto dst = out.images.data_mut();
  std::copy(src.begin() + start * per, src.begin() + (start + count) * per, dst.begin());
  if (batch.has_labels()) {
    out.labels.assign(batch.labels.begin() + static_cast<std::ptrdiff_t>(start),
                      batch.labels.begin() + static_cast<std::ptrdiff_t>(start + count));
  }
  return out;
}

/// Pairwise tree sum of the k weighted gradient buffers, in worker order.
std::vector<double> pairwise_combine(const std::vector<std::vector<double>>& parts,
                                     std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  std::vector<double> left = pairwise_combine(parts, lo, mid);
  const std::vector<double> right = pairwise_combine(parts, mid, hi);
  for (std::size_t i = 0; i < left.size(); ++i) left[i] += right[i];
  return left;
}

}  // namespace

TrainStepReport data_parallel_step(SynthesisModule& module, const Batch& batch,
                                   std::size_t workers, std::vector<Optimizer>& optimizers,
                                   std::uint64_t step_seed, double lr_override,
                                   const std::vector<std::size_t>* shard_sizes) {
  const std::size_t n = batch.size();
  if (workers == 0) throw ArgumentError("worker count must be at least 1");
  if (workers > n) {
    throw ArgumentError(fmt::format("{} workers cannot split a batch of {}", workers, n));
  }
  if (workers == 1 && shard_sizes == nullptr) {
    return training_step(module, batch, optimizers, step_seed, lr_override);
  }

  std::vector<std::size_t> sizes = shard_sizes ? *shard_sizes : balanced_shards(n, workers);
  if (sizes.size() != workers) {
    throw ArgumentError(fmt::format("expected {} shard sizes, got {}", workers, sizes.size()));
  }
  std::size_t total = 0;
  for (std::size_t s : sizes) {
    if (s == 0) throw ArgumentError("every shard must be nonempty");
    total += s;
  }
  if (total != n) {
    throw ArgumentError(fmt::format("shard sizes sum to {}, batch holds {}", total, n));
  }

  std::vector<Batch> shards;
  std::vector<std::size_t> offsets;
  std::size_t at = 0;
  for (std::size_t s : sizes) {
    shards.push_back(slice_batch(batch, at, s));
    offsets.push_back(at);
    at += s;
  }

  std::vector<std::unique_ptr<SynthesisModule>> replicas;
  for (std::size_t k = 0; k < workers; ++k) replicas.push_back(module.clone());

  TrainStepReport combined;
  for (std::size_t phase = 0; phase < module.phase_count(); ++phase) {
    std::vector<TrainStepReport> reports(workers);
    std::vector<std::exception_ptr> failures(workers);
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (std::size_t k = 0; k < workers; ++k) {
      threads.emplace_back([&, k]() {
        try {
          reports[k] = replicas[k]->phase_gradients(phase, shards[k], step_seed, offsets[k]);
        } catch (...) {
          failures[k] = std::current_exception();
        }
      });
    }
    for (std::thread& t : threads) t.join();
    for (const std::exception_ptr& e : failures) {
      if (e) std::rethrow_exception(e);
    }

    const std::size_t gi = module.phase_group(phase);
    ParamGroup& group = module.groups()[gi];
    for (std::size_t p = 0; p < group.params.size(); ++p) {
      std::vector<std::vector<double>> weighted(workers);
      for (std::size_t k = 0; k < workers; ++k) {
        const Tensor& rp = replicas[k]->groups()[gi].params[p].tensor;
        const double w = static_cast<double>(sizes[k]) / static_cast<double>(n);
        weighted[k].assign(rp.grad().begin(), rp.grad().end());
        for (double& v : weighted[k]) v *= w;
      }
      const std::vector<double> sum = pairwise_combine(weighted, 0, workers);
      Tensor& dst = group.params[p].tensor;
      dst.zero_grad();
      std::copy(sum.begin(), sum.end(), dst.grad().begin());
    }
    optimizers[gi].step(group, lr_override);
    for (std::size_t k = 0; k < workers; ++k) {
      ParamGroup& rg = replicas[k]->groups()[gi];
      for (std::size_t p = 0; p < group.params.size(); ++p) {
        copy_into(rg.params[p].tensor, group.params[p].tensor);
      }
    }

    // Shard-size-weighted metric means in fixed worker order.
    for (std::size_t mi = 0; mi < reports[0].metrics.size(); ++mi) {
      const std::string& name = reports[0].metrics[mi].first;
      double acc = 0.0;
      for (std::size_t k = 0; k < workers; ++k) {
        acc += static_cast<double>(sizes[k]) / static_cast<double>(n) * reports[k].metrics[mi].second;
      }
      combined.add(name, acc);
    }
    combined.updates += 1;
  }
  return combined;
}

// ---- full training loop ----

namespace {

/// Run length (and the scheduler horizon derived from it) may differ between
/// the segments of a resumed run; everything else must match exactly.
bool config_matches_ignoring_run_length(ExperimentConfig a, ExperimentConfig b) {
  a.epochs = 0;
  b.epochs = 0;
  a.scheduler.t_max = 0;
  b.scheduler.t_max = 0;
  return a == b;
}

void save_checkpoint_pair(const SynthesisModule& module, const std::vector<Optimizer>& optimizers,
                          std::uint64_t epoch, std::uint64_t step, const std::string& config_text,
                          const std::filesystem::path& out_dir, bool periodic) {
  const Checkpoint ckpt = make_checkpoint(module, optimizers, epoch, step, config_text);
  if (periodic) {
    checkpoint_save(ckpt, out_dir / fmt::format("checkpoint_epoch_{}.bin", epoch));
  }
  checkpoint_save(ckpt, out_dir / "checkpoint_last.bin");
}

}  // namespace

TrainResult train_run(const ExperimentConfig& cfg, const Manifest& manifest,
                      const std::filesystem::path& data_root,
                      const std::filesystem::path& out_dir, bool resume) {
  if (manifest.paradigm != cfg.labeling_paradigm) {
    throw ValidationError(fmt::format("manifest paradigm '{}' does not match config paradigm '{}'",
                                      paradigm_name(manifest.paradigm),
                                      paradigm_name(cfg.labeling_paradigm)));
  }
  if (manifest.channels != static_cast<std::size_t>(cfg.channels)) {
    throw ValidationError(fmt::format("manifest provides {} channels but config expects {}",
                                      manifest.channels, cfg.channels));
  }
  if (manifest.records.empty()) {
    throw ValidationError("training manifest is empty");
  }

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create directory '{}': {}", out_dir.string(), ec.message()));

  const std::string config_text = dump_effective_config(cfg);
  std::unique_ptr<SynthesisModule> module = build_module(cfg);
  std::vector<Optimizer> optimizers = make_optimizers(*module);

  std::uint64_t start_epoch = 0;
  std::uint64_t global_step = 0;
  if (resume) {
    const std::filesystem::path last = out_dir / "checkpoint_last.bin";
    if (!std::filesystem::exists(last)) {
      throw IoError(fmt::format("resume requested but '{}' does not exist", last.string()));
    }
    const Checkpoint ckpt = checkpoint_load(last);
    const ExperimentConfig embedded = validate_config(parse_document(ckpt.config_text));
    if (!config_matches_ignoring_run_length(embedded, cfg)) {
      throw ValidationError("resume config differs from the checkpointed effective config");
    }
    restore_training_state(ckpt, *module, optimizers);
    start_epoch = ckpt.epoch;
    global_step = ckpt.step;
    log_message(LogLevel::info,
                fmt::format("resuming from epoch {} (global step {})", start_epoch, global_step));
  }

  MetricLog log(out_dir / "metrics.csv");
  const std::uint64_t epochs = static_cast<std::uint64_t>(cfg.epochs);
  const std::uint64_t train_root = purpose_root(cfg.seed, SeedPurpose::train);
  const std::uint64_t augment_root = purpose_root(cfg.seed, SeedPurpose::augment);
  const bool augmenting = cfg.augment.hflip || cfg.augment.vflip || cfg.augment.rot90 ||
                          cfg.augment.noise_sigma > 0.0;

  for (std::uint64_t epoch = start_epoch; epoch < epochs; ++epoch) {
    const double lr = scheduled_lr(cfg.optimizer.lr, cfg.scheduler, epoch);
    const auto batches = make_batches(manifest, cfg.batch_size, epoch, cfg.seed);
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      Batch batch = load_batch(manifest, batches[bi], cfg, data_root);
      if (augmenting) {
        RngStream aug_rng(derive_seed(augment_root, epoch, bi));
        augment_batch(batch, cfg.augment, aug_rng, cfg.normalization.lo, cfg.normalization.hi);
      }
      const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(cfg.workers),
                                                        batch.size());
      const std::uint64_t step_seed = derive_seed(train_root, epoch, global_step);
      TrainStepReport report;
      try {
        report = data_parallel_step(*module, batch, workers, optimizers, step_seed, lr);
        for (const auto& [name, value] : report.metrics) {
          if (!std::isfinite(value)) {
            throw NumericError(fmt::format("metric '{}' is non-finite", name));
          }
        }
      } catch (const NumericError& e) {
        log.comment(fmt::format("aborted at epoch {} step {}: {}", epoch, global_step, e.what()));
        throw NumericError(fmt::format("training diverged at epoch {} step {}: {}",
                                       epoch, global_step, e.what()));
      }
      for (const auto& [name, value] : report.metrics) {
        log.append(epoch, global_step, name, value);
      }
      ++global_step;
    }
    if (cfg.checkpoint_every > 0 &&
        (epoch + 1) % static_cast<std::uint64_t>(cfg.checkpoint_every) == 0) {
      save_checkpoint_pair(*module, optimizers, epoch + 1, global_step, config_text, out_dir, true);
    }
  }

  save_checkpoint_pair(*module, optimizers, std::max(start_epoch, epochs), global_step,
                       config_text, out_dir, false);
  TrainResult result;
  result.last = checkpoint_load(out_dir / "checkpoint_last.bin");
  result.metrics_path = out_dir / "metrics.csv";
  result.epochs_run = epochs > start_epoch ? epochs - start_epoch : 0;
  return result;
}

}  // namespace synthforge
