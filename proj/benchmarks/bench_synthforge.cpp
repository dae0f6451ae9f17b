// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <sstream>
#include <string>
#include <vector>

#include "synthforge/autodiff.hpp"
#include "synthforge/checkpoint.hpp"
#include "synthforge/config.hpp"
#include "synthforge/data.hpp"
#include "synthforge/metrics.hpp"
#include "synthforge/models.hpp"
#include "synthforge/nn.hpp"
#include "synthforge/rng.hpp"
#include "synthforge/tensor.hpp"
#include "synthforge/trainer.hpp"

using namespace synthforge;

namespace {

Tensor random_tensor(Shape shape, std::uint64_t seed) {
  Tensor t(std::move(shape));
  RngStream rng(seed);
  for (double& v : t.data_mut()) v = 2.0 * rng.uniform01() - 1.0;
  return t;
}

Batch random_batch(std::size_t n, std::size_t s, std::uint64_t seed) {
  Batch b;
  b.images = random_tensor(Shape{n, 1, s, s}, seed);
  return b;
}

const std::string kConfigText =
    "model_family: diffusion\n"
    "image_size: 16\n"
    "epochs: 30\n"
    "batch_size: 16\n"
    "seed: 42\n"
    "diffusion:\n"
    "  timesteps: 200\n"
    "  beta_start: 0.0001\n"
    "  beta_end: 0.02\n"
    "optimizer:\n"
    "  lr: 0.001\n"
    "augment:\n"
    "  hflip: true\n";

}  // namespace

static void BM_ConfigParseValidate(benchmark::State& state) {
  for (auto _ : state) {
    benchmark::DoNotOptimize(validate_config(parse_document(kConfigText)));
  }
}
BENCHMARK(BM_ConfigParseValidate);

static void BM_ConfigDump(benchmark::State& state) {
  const ExperimentConfig cfg = validate_config(parse_document(kConfigText));
  for (auto _ : state) {
    benchmark::DoNotOptimize(dump_effective_config(cfg));
  }
}
BENCHMARK(BM_ConfigDump);

static void BM_Conv2dForward(benchmark::State& state) {
  const Tensor x = random_tensor(Shape{8, 8, 16, 16}, 1);
  const Tensor k = random_tensor(Shape{16, 8, 3, 3}, 2);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(tape.conv2d(x, k, 1, 1));
  }
}
BENCHMARK(BM_Conv2dForward);

static void BM_Conv2dBackward(benchmark::State& state) {
  for (auto _ : state) {
    Tensor x = random_tensor(Shape{8, 8, 16, 16}, 1);
    Tensor k = random_tensor(Shape{16, 8, 3, 3}, 2);
    x.ensure_grad();
    k.ensure_grad();
    Tape tape;
    Tensor loss = tape.sum(tape.conv2d(x, k, 1, 1));
    tape.backward(loss);
    benchmark::DoNotOptimize(x.grad().data());
  }
}
BENCHMARK(BM_Conv2dBackward);

static void BM_ConvTranspose2dForward(benchmark::State& state) {
  const Tensor x = random_tensor(Shape{8, 16, 8, 8}, 1);
  const Tensor k = random_tensor(Shape{16, 8, 4, 4}, 2);
  for (auto _ : state) {
    Tape tape(false);
    benchmark::DoNotOptimize(tape.conv_transpose2d(x, k, 2, 1));
  }
}
BENCHMARK(BM_ConvTranspose2dForward);

static void BM_TrainingStepFamily(benchmark::State& state, const char* config_text) {
  const ExperimentConfig cfg = validate_config(parse_document(config_text));
  auto module = build_module(cfg);
  std::vector<Optimizer> optimizers = make_optimizers(*module);
  const Batch batch = random_batch(16, 16, 3);
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(training_step(*module, batch, optimizers, seed++));
  }
}
BENCHMARK_CAPTURE(BM_TrainingStepFamily, autoencoder,
                  "model_family: autoencoder\nimage_size: 16\nepochs: 1\n");
BENCHMARK_CAPTURE(BM_TrainingStepFamily, gan, "model_family: gan\nimage_size: 16\nepochs: 1\n");
BENCHMARK_CAPTURE(BM_TrainingStepFamily, diffusion,
                  "model_family: diffusion\nimage_size: 16\nepochs: 1\ndiffusion:\n  timesteps: 200\n");

static void BM_DataParallelStep(benchmark::State& state) {
  const ExperimentConfig cfg =
      validate_config(parse_document("model_family: autoencoder\nimage_size: 16\nepochs: 1\n"));
  auto module = build_module(cfg);
  std::vector<Optimizer> optimizers = make_optimizers(*module);
  const Batch batch = random_batch(16, 16, 3);
  const std::size_t workers = static_cast<std::size_t>(state.range(0));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(data_parallel_step(*module, batch, workers, optimizers, seed++));
  }
}
BENCHMARK(BM_DataParallelStep)->Arg(1)->Arg(2)->Arg(4);

static void BM_DdpmSampleStep(benchmark::State& state) {
  const NoiseSchedule sched = build_schedule(1000, 1e-4, 0.02);
  const Tensor x = random_tensor(Shape{16, 1, 16, 16}, 5);
  const Tensor eps = random_tensor(Shape{16, 1, 16, 16}, 6);
  RngStream rng(7);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ddpm_sample_step(x, 500, eps, sched, rng));
  }
}
BENCHMARK(BM_DdpmSampleStep);

static void BM_VaeGenerate(benchmark::State& state) {
  const ExperimentConfig cfg =
      validate_config(parse_document("model_family: autoencoder\nimage_size: 16\nepochs: 1\n"));
  auto module = build_module(cfg);
  RngStream rng(9);
  for (auto _ : state) {
    benchmark::DoNotOptimize(module->generate(16, {}, rng));
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_VaeGenerate);

static void BM_FirstOrderFeatures(benchmark::State& state) {
  Tensor img = random_tensor(Shape{64, 64}, 11);
  for (double& v : img.data_mut()) v = 0.5 * (v + 1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(first_order_features(img));
  }
}
BENCHMARK(BM_FirstOrderFeatures);

static void BM_KsStatistic(benchmark::State& state) {
  RngStream rng(13);
  std::vector<double> a(4096), b(4096);
  for (double& v : a) v = rng.normal();
  for (double& v : b) v = rng.normal() + 0.1;
  for (auto _ : state) {
    benchmark::DoNotOptimize(ks_statistic(a, b));
  }
}
BENCHMARK(BM_KsStatistic);

static void BM_CheckpointRoundTrip(benchmark::State& state) {
  const ExperimentConfig cfg =
      validate_config(parse_document("model_family: autoencoder\nimage_size: 16\nepochs: 1\n"));
  auto module = build_module(cfg);
  std::vector<Optimizer> optimizers = make_optimizers(*module);
  const Checkpoint ckpt =
      make_checkpoint(*module, optimizers, 1, 1, dump_effective_config(cfg));
  for (auto _ : state) {
    benchmark::DoNotOptimize(checkpoint_deserialize(checkpoint_serialize(ckpt)));
  }
}
BENCHMARK(BM_CheckpointRoundTrip);

static void BM_ManifestParse(benchmark::State& state) {
  std::ostringstream csv;
  csv << "SubjectID,Channel_0,Label\n";
  for (int i = 0; i < 1000; ++i) csv << "s" << i << ",img_" << i << ".pgm," << (i % 2) << "\n";
  const std::string text = csv.str();
  for (auto _ : state) {
    benchmark::DoNotOptimize(parse_manifest(text, LabelingParadigm::labeled, 2));
  }
}
BENCHMARK(BM_ManifestParse);

BENCHMARK_MAIN();
