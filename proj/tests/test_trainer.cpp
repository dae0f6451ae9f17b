// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <string>
#include <vector>

#include "synthforge/checkpoint.hpp"
#include "synthforge/config.hpp"
#include "synthforge/data.hpp"
#include "synthforge/errors.hpp"
#include "synthforge/models.hpp"
#include "synthforge/rng.hpp"
#include "synthforge/tensor.hpp"
#include "synthforge/trainer.hpp"
#include "test_util.hpp"

using namespace synthforge;
using doctest::Contains;
using synthtest::TempDir;

namespace {

ExperimentConfig config_for(const std::string& text) {
  return validate_config(parse_document(text));
}

Batch random_batch(std::size_t n, std::size_t s, std::uint64_t seed, int num_classes = 0) {
  Batch b;
  b.images = Tensor(Shape{n, 1, s, s});
  RngStream rng(seed);
  for (double& v : b.images.data_mut()) v = 2.0 * rng.uniform01() - 1.0;
  if (num_classes > 0) {
    for (std::size_t i = 0; i < n; ++i) {
      b.labels.push_back(static_cast<int>(rng.uniform_int(num_classes)));
    }
  }
  return b;
}

std::uint64_t read_u64(const std::string& bytes, std::size_t at) {
  std::uint64_t v = 0;
  std::memcpy(&v, bytes.data() + at, 8);
  return v;
}

std::uint32_t read_u32(const std::string& bytes, std::size_t at) {
  std::uint32_t v = 0;
  std::memcpy(&v, bytes.data() + at, 4);
  return v;
}

}  // namespace

TEST_CASE("checkpoint serialization round trip") {
  Checkpoint ckpt;
  ckpt.epoch = 3;
  ckpt.step = 17;
  ckpt.config_text = "model_family: gan\n";
  ckpt.rng_states = {42, 99};
  ckpt.tensors.emplace_back("params/main/w", Tensor(Shape{2, 2}, {1.5, -2.5, 0.0, 3.25}));
  ckpt.tensors.emplace_back("opt/main/t", Tensor(Shape{1}, {7.0}));

  const std::vector<std::uint8_t> bytes = checkpoint_serialize(ckpt);
  Checkpoint back = checkpoint_deserialize(bytes);
  CHECK(back.version == 1);
  CHECK(back.epoch == 3);
  CHECK(back.step == 17);
  CHECK(back.config_text == ckpt.config_text);
  CHECK(back.rng_states == ckpt.rng_states);
  REQUIRE(back.tensors.size() == 2);
  CHECK(back.tensors[0].first == "params/main/w");
  CHECK(back.tensors[0].second.shape() == Shape{2, 2});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(back.tensors[0].second.data()[i] == ckpt.tensors[0].second.data()[i]);
  }
  CHECK(checkpoint_serialize(back) == bytes);

  const Tensor* found = back.find("opt/main/t");
  REQUIRE(found != nullptr);
  CHECK(found->value() == 7.0);
  CHECK(back.find("nope") == nullptr);
}

TEST_CASE("checkpoint golden byte layout") {
  Checkpoint ckpt;
  ckpt.epoch = 5;
  ckpt.step = 9;
  ckpt.config_text = "ab";
  ckpt.rng_states = {0x1122334455667788ULL};
  ckpt.tensors.emplace_back("w", Tensor(Shape{2}, {1.0, -1.0}));

  const std::vector<std::uint8_t> raw = checkpoint_serialize(ckpt);
  const std::string bytes(raw.begin(), raw.end());

  CHECK(bytes.substr(0, 4) == "GSYN");
  CHECK(read_u32(bytes, 4) == 1);       // format version
  CHECK(read_u64(bytes, 8) == 5);       // epoch
  CHECK(read_u64(bytes, 16) == 9);      // step
  CHECK(read_u32(bytes, 24) == 2);      // config length
  CHECK(bytes.substr(28, 2) == "ab");
  CHECK(read_u32(bytes, 30) == 1);      // rng state count
  CHECK(read_u64(bytes, 34) == 0x1122334455667788ULL);
  CHECK(read_u32(bytes, 42) == 1);      // tensor count
  // Tensor record: u16 name length, name, u8 rank, u64 extents, f64 payload.
  CHECK(bytes[46] == 1);
  CHECK(bytes[48] == 'w');
  CHECK(bytes[49] == 1);
  CHECK(read_u64(bytes, 50) == 2);
  double v0 = 0.0, v1 = 0.0;
  std::memcpy(&v0, bytes.data() + 58, 8);
  std::memcpy(&v1, bytes.data() + 66, 8);
  CHECK(v0 == 1.0);
  CHECK(v1 == -1.0);
  CHECK(bytes.size() == 74);
}

TEST_CASE("checkpoint deserialization diagnoses corruption by offset") {
  Checkpoint ckpt;
  ckpt.tensors.emplace_back("w", Tensor(Shape{1}, {2.0}));
  std::vector<std::uint8_t> bytes = checkpoint_serialize(ckpt);

  {
    std::vector<std::uint8_t> bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_WITH_AS(checkpoint_deserialize(bad), Contains("bad magic at byte offset 0"),
                         LoadError);
  }
  {
    std::vector<std::uint8_t> bad = bytes;
    bad[4] = 9;
    CHECK_THROWS_WITH_AS(checkpoint_deserialize(bad),
                         Contains("unsupported checkpoint version 9"), LoadError);
  }
  {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + 2);
    CHECK_THROWS_WITH_AS(checkpoint_deserialize(cut), Contains("byte offset 0"), LoadError);
  }
  for (std::size_t cut_at : {10UL, 30UL, bytes.size() - 3}) {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + cut_at);
    CHECK_THROWS_AS(checkpoint_deserialize(cut), LoadError);
  }
}

TEST_CASE("checkpoint file io") {
  TempDir dir("ckptio");
  Checkpoint ckpt;
  ckpt.epoch = 2;
  ckpt.tensors.emplace_back("x", Tensor(Shape{3}, {1, 2, 3}));
  checkpoint_save(ckpt, dir / "c.bin");
  Checkpoint back = checkpoint_load(dir / "c.bin");
  CHECK(back.epoch == 2);
  CHECK(back.tensors[0].second.data()[2] == 3.0);
  CHECK_THROWS_AS(checkpoint_load(dir / "missing.bin"), IoError);
}

TEST_CASE("make_checkpoint captures params, moments, and metadata") {
  const ExperimentConfig cfg = config_for(
      "model_family: diffusion\nimage_size: 8\nepochs: 1\nseed: 11\ndiffusion:\n  timesteps: 6\n");
  auto module = build_module(cfg);
  std::vector<Optimizer> opts = make_optimizers(*module);
  REQUIRE(opts.size() == 1);

  Batch batch = random_batch(2, 8, 5);
  RngStream seeds(1);
  (void)diffusion_training_step(*module, batch, opts[0], seeds);

  Checkpoint ckpt = make_checkpoint(*module, opts, 1, 1, dump_effective_config(cfg));
  CHECK(ckpt.epoch == 1);
  CHECK(ckpt.rng_states == std::vector<std::uint64_t>{11});
  CHECK(ckpt.config_text == dump_effective_config(cfg));

  CHECK(ckpt.find("params/main/conv_in_w") != nullptr);
  CHECK(ckpt.find("opt/main/m/conv_in_w") != nullptr);
  CHECK(ckpt.find("opt/main/v/conv_in_w") != nullptr);
  const Tensor* t = ckpt.find("opt/main/t");
  REQUIRE(t != nullptr);
  CHECK(t->value() == 1.0);
  const Tensor* beta = ckpt.find("schedule/beta");
  REQUIRE(beta != nullptr);
  CHECK(beta->numel() == 6);
  CHECK(beta->data()[0] == module->schedule()->beta_at(1));

  // Snapshot tensors are deep copies, not views of the live parameters.
  const Tensor* w = ckpt.find("params/main/conv_in_w");
  CHECK_FALSE(w->same_storage(module->groups()[0].params[0].tensor));

  std::vector<Optimizer> wrong;
  CHECK_THROWS_AS(make_checkpoint(*module, wrong, 0, 0, ""), ArgumentError);
}

TEST_CASE("gan checkpoints carry both groups") {
  const ExperimentConfig cfg = config_for("model_family: gan\nimage_size: 8\nepochs: 1\n");
  auto module = build_module(cfg);
  std::vector<Optimizer> opts = make_optimizers(*module);
  REQUIRE(opts.size() == 2);
  Checkpoint ckpt = make_checkpoint(*module, opts, 0, 0, dump_effective_config(cfg));
  CHECK(ckpt.find("params/generator/g_dense_w") != nullptr);
  CHECK(ckpt.find("params/discriminator/d_out_w") != nullptr);
  CHECK(ckpt.find("opt/generator/t") != nullptr);
  CHECK(ckpt.find("opt/discriminator/t") != nullptr);
  CHECK(ckpt.find("schedule/beta") == nullptr);
}

TEST_CASE("restore_params round trips and validates") {
  const ExperimentConfig cfg = config_for("model_family: autoencoder\nimage_size: 8\nepochs: 1\n");
  auto module = build_module(cfg);
  std::vector<Optimizer> opts = make_optimizers(*module);
  Checkpoint ckpt = make_checkpoint(*module, opts, 0, 0, dump_effective_config(cfg));

  ExperimentConfig other = cfg;
  other.seed = 1234;
  auto fresh = build_module(other);
  restore_params(ckpt, *fresh);
  const auto& a = module->groups()[0].params;
  const auto& b = fresh->groups()[0].params;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < a[i].tensor.numel(); ++j) {
      CHECK(a[i].tensor.data()[j] == b[i].tensor.data()[j]);
    }
  }

  Checkpoint missing = ckpt;
  missing.tensors.erase(missing.tensors.begin());
  CHECK_THROWS_WITH_AS(restore_params(missing, *fresh), Contains("missing tensor"), LoadError);

  Checkpoint reshaped = make_checkpoint(*module, opts, 0, 0, "");
  reshaped.tensors[0].second = Tensor(Shape{2});
  CHECK_THROWS_WITH_AS(restore_params(reshaped, *fresh), Contains("has shape"), LoadError);
}

TEST_CASE("restore_params verifies the stored noise schedule") {
  const ExperimentConfig cfg = config_for(
      "model_family: diffusion\nimage_size: 8\nepochs: 1\ndiffusion:\n  timesteps: 6\n");
  auto module = build_module(cfg);
  std::vector<Optimizer> opts = make_optimizers(*module);
  Checkpoint ckpt = make_checkpoint(*module, opts, 0, 0, dump_effective_config(cfg));
  for (auto& [name, tensor] : ckpt.tensors) {
    if (name == "schedule/beta") tensor.data_mut()[3] += 1e-9;
  }
  CHECK_THROWS_WITH_AS(restore_params(ckpt, *module),
                       Contains("noise schedule differs from the config at step 4"), LoadError);
}

TEST_CASE("restore_training_state resumes moments and step counts") {
  const ExperimentConfig cfg = config_for("model_family: autoencoder\nimage_size: 8\nepochs: 1\n");
  Batch batch = random_batch(4, 8, 5);

  // Reference: five uninterrupted steps.
  auto ref = build_module(cfg);
  std::vector<Optimizer> ref_opts = make_optimizers(*ref);
  RngStream ref_seeds(9);
  for (int i = 0; i < 5; ++i) (void)ae_training_step(*ref, batch, ref_opts[0], ref_seeds);

  // Interrupted: three steps, checkpoint, restore into fresh objects, two more.
  auto a = build_module(cfg);
  std::vector<Optimizer> a_opts = make_optimizers(*a);
  RngStream a_seeds(9);
  for (int i = 0; i < 3; ++i) (void)ae_training_step(*a, batch, a_opts[0], a_seeds);
  Checkpoint ckpt = make_checkpoint(*a, a_opts, 0, 3, dump_effective_config(cfg));

  ExperimentConfig reseeded = cfg;
  reseeded.seed = 777;
  auto b = build_module(reseeded);
  std::vector<Optimizer> b_opts = make_optimizers(*b);
  restore_params(ckpt, *b);
  restore_training_state(ckpt, *b, b_opts);
  CHECK(b_opts[0].step_count() == 3);
  RngStream b_seeds = a_seeds;  // stream state carries across the boundary
  for (int i = 0; i < 2; ++i) (void)ae_training_step(*b, batch, b_opts[0], b_seeds);

  const auto& rp = ref->groups()[0].params;
  const auto& bp = b->groups()[0].params;
  for (std::size_t i = 0; i < rp.size(); ++i) {
    for (std::size_t j = 0; j < rp[i].tensor.numel(); ++j) {
      CHECK(rp[i].tensor.data()[j] == bp[i].tensor.data()[j]);
    }
  }
}

TEST_CASE("metric log writes, appends, and parses") {
  TempDir dir("mlog");
  const auto path = dir / "metrics.csv";
  {
    MetricLog log(path);
    log.append(0, 0, "loss", 1.5);
    log.append(0, 1, "loss", 1.25);
    log.comment("checkpoint written");
  }
  {
    MetricLog log(path);  // reopen must not duplicate the header
    log.append(1, 2, "loss", 1.0);
  }
  const std::string text = synthtest::read_file(path);
  CHECK(text.rfind("epoch,step,metric,value\n", 0) == 0);
  CHECK(text.find("# checkpoint written\n") != std::string::npos);
  CHECK(text.find("\nepoch,step,metric,value") == std::string::npos);

  std::vector<MetricRow> rows = MetricLog::parse_csv(text);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].epoch == 0);
  CHECK(rows[0].value == 1.5);
  CHECK(rows[2].step == 2);
  CHECK(rows[2].value == 1.0);

  MetricLog log(path);
  CHECK_THROWS_WITH_AS(log.append(0, 0, "loss", std::nan("")),
                       Contains("metric 'loss' is non-finite at epoch 0 step 0"), NumericError);

  CHECK_THROWS_WITH_AS(MetricLog::parse_csv("nope\n"), Contains("header"), ParseError);
  CHECK_THROWS_WITH_AS(MetricLog::parse_csv("epoch,step,metric,value\n0,0,loss\n"),
                       Contains("row 2"), ParseError);
}

TEST_CASE("data_parallel_step validates its arguments") {
  const ExperimentConfig cfg = config_for("model_family: autoencoder\nimage_size: 8\nepochs: 1\n");
  auto module = build_module(cfg);
  std::vector<Optimizer> opts = make_optimizers(*module);
  Batch batch = random_batch(4, 8, 5);
  CHECK_THROWS_AS(data_parallel_step(*module, batch, 0, opts, 1), ArgumentError);
  CHECK_THROWS_AS(data_parallel_step(*module, batch, 5, opts, 1), ArgumentError);
  const std::vector<std::size_t> bad_sum{1, 1};
  CHECK_THROWS_AS(data_parallel_step(*module, batch, 2, opts, 1, -1.0, &bad_sum), ArgumentError);
  const std::vector<std::size_t> has_zero{4, 0};
  CHECK_THROWS_AS(data_parallel_step(*module, batch, 2, opts, 1, -1.0, &has_zero), ArgumentError);
  const std::vector<std::size_t> wrong_len{4};
  CHECK_THROWS_AS(data_parallel_step(*module, batch, 2, opts, 1, -1.0, &wrong_len), ArgumentError);
}

TEST_CASE("single worker data_parallel_step is bitwise serial") {
  const ExperimentConfig cfg = config_for("model_family: autoencoder\nimage_size: 8\nepochs: 1\n");
  Batch batch = random_batch(6, 8, 5);

  auto serial = build_module(cfg);
  std::vector<Optimizer> serial_opts = make_optimizers(*serial);
  TrainStepReport sr = training_step(*serial, batch, serial_opts, 1234);

  auto par = build_module(cfg);
  std::vector<Optimizer> par_opts = make_optimizers(*par);
  TrainStepReport pr = data_parallel_step(*par, batch, 1, par_opts, 1234);

  CHECK(sr.metrics.size() == pr.metrics.size());
  for (std::size_t i = 0; i < sr.metrics.size(); ++i) {
    CHECK(sr.metrics[i].first == pr.metrics[i].first);
    CHECK(sr.metrics[i].second == pr.metrics[i].second);
  }
  const auto& sp = serial->groups()[0].params;
  const auto& pp = par->groups()[0].params;
  for (std::size_t i = 0; i < sp.size(); ++i) {
    for (std::size_t j = 0; j < sp[i].tensor.numel(); ++j) {
      CHECK(sp[i].tensor.data()[j] == pp[i].tensor.data()[j]);
    }
  }
}

TEST_CASE("sharded training matches serial within 1e-9") {
  for (const char* family_text :
       {"model_family: autoencoder\nimage_size: 8\nepochs: 1\n",
        "model_family: gan\nimage_size: 8\nepochs: 1\noptimizer:\n  lr: 0.0002\n"}) {
    CAPTURE(family_text);
    const ExperimentConfig cfg = config_for(family_text);
    Batch batch = random_batch(6, 8, 5);

    auto serial = build_module(cfg);
    std::vector<Optimizer> serial_opts = make_optimizers(*serial);
    (void)training_step(*serial, batch, serial_opts, 77);

    for (std::size_t workers : {2UL, 3UL}) {
      auto par = build_module(cfg);
      std::vector<Optimizer> par_opts = make_optimizers(*par);
      (void)data_parallel_step(*par, batch, workers, par_opts, 77);
      for (std::size_t g = 0; g < serial->groups().size(); ++g) {
        const auto& sp = serial->groups()[g].params;
        const auto& pp = par->groups()[g].params;
        for (std::size_t i = 0; i < sp.size(); ++i) {
          for (std::size_t j = 0; j < sp[i].tensor.numel(); ++j) {
            const double s = sp[i].tensor.data()[j];
            const double p = pp[i].tensor.data()[j];
            CHECK(std::abs(s - p) <= 1e-9 * std::max(1.0, std::abs(s)));
          }
        }
      }
    }

    // Deliberately unequal shards: per-sample streams keep gradients aligned.
    auto par = build_module(cfg);
    std::vector<Optimizer> par_opts = make_optimizers(*par);
    const std::vector<std::size_t> shards{1, 5};
    (void)data_parallel_step(*par, batch, 2, par_opts, 77, -1.0, &shards);
    const auto& sp = serial->groups()[0].params;
    const auto& pp = par->groups()[0].params;
    for (std::size_t i = 0; i < sp.size(); ++i) {
      for (std::size_t j = 0; j < sp[i].tensor.numel(); ++j) {
        const double s = sp[i].tensor.data()[j];
        const double p = pp[i].tensor.data()[j];
        CHECK(std::abs(s - p) <= 1e-9 * std::max(1.0, std::abs(s)));
      }
    }
  }
}

namespace {

constexpr const char* kRunConfig =
    "model_family: autoencoder\nimage_size: 8\nepochs: 4\nbatch_size: 8\nseed: 21\n"
    "labeling_paradigm: labeled\nnum_classes: 2\ncheckpoint_every: 2\n";

struct PhantomFixture {
  TempDir dir{"train_run"};
  Manifest manifest;
  PhantomFixture() {
    generate_phantom_dataset(dir / "data", 6, 8, 77);
    manifest = load_manifest_auto(dir / "data" / "manifest.csv");
  }
};

}  // namespace

TEST_CASE("train_run produces checkpoints and a replayable metric log") {
  PhantomFixture fx;
  const ExperimentConfig cfg = config_for(kRunConfig);
  TrainResult result = train_run(cfg, fx.manifest, fx.dir / "data", fx.dir / "run", false);
  CHECK(result.epochs_run == 4);
  CHECK(result.last.epoch == 4);
  CHECK(result.last.step == 8);  // 12 samples / batch 8 -> 2 steps per epoch

  CHECK(std::filesystem::exists(fx.dir / "run" / "checkpoint_last.bin"));
  CHECK(std::filesystem::exists(fx.dir / "run" / "checkpoint_epoch_2.bin"));
  CHECK(std::filesystem::exists(fx.dir / "run" / "checkpoint_epoch_4.bin"));

  const std::string metrics = synthtest::read_file(result.metrics_path);
  std::vector<MetricRow> rows = MetricLog::parse_csv(metrics);
  CHECK(rows.size() == 8 * 3);  // loss/recon/kl per step
  for (const MetricRow& row : rows) CHECK(std::isfinite(row.value));

  // Identical reruns reproduce the log bitwise.
  TrainResult again = train_run(cfg, fx.manifest, fx.dir / "data", fx.dir / "run2", false);
  CHECK(synthtest::read_file(again.metrics_path) == metrics);
}

TEST_CASE("train_run resume matches an uninterrupted run bitwise") {
  PhantomFixture fx;
  const ExperimentConfig cfg = config_for(kRunConfig);
  (void)train_run(cfg, fx.manifest, fx.dir / "data", fx.dir / "full", false);

  ExperimentConfig half = cfg;
  half.epochs = 2;
  (void)train_run(half, fx.manifest, fx.dir / "data", fx.dir / "split", false);
  TrainResult resumed = train_run(cfg, fx.manifest, fx.dir / "data", fx.dir / "split", true);
  CHECK(resumed.epochs_run == 2);

  CHECK(synthtest::read_file(fx.dir / "full" / "checkpoint_last.bin") ==
        synthtest::read_file(fx.dir / "split" / "checkpoint_last.bin"));
  CHECK(synthtest::read_file(fx.dir / "full" / "metrics.csv") ==
        synthtest::read_file(fx.dir / "split" / "metrics.csv"));
}

TEST_CASE("train_run resume at the configured horizon is a no-op") {
  PhantomFixture fx;
  ExperimentConfig cfg = config_for(kRunConfig);
  cfg.epochs = 2;
  (void)train_run(cfg, fx.manifest, fx.dir / "data", fx.dir / "run", false);
  const std::string before = synthtest::read_file(fx.dir / "run" / "checkpoint_last.bin");
  TrainResult result = train_run(cfg, fx.manifest, fx.dir / "data", fx.dir / "run", true);
  CHECK(result.epochs_run == 0);
  CHECK(synthtest::read_file(fx.dir / "run" / "checkpoint_last.bin") == before);
}

TEST_CASE("train_run rejects inconsistent inputs") {
  PhantomFixture fx;
  ExperimentConfig cfg = config_for(kRunConfig);

  Manifest unlabeled = fx.manifest;
  unlabeled.paradigm = LabelingParadigm::unlabeled;
  CHECK_THROWS_WITH_AS(train_run(cfg, unlabeled, fx.dir / "data", fx.dir / "r1", false),
                       Contains("does not match config paradigm"), ValidationError);

  Manifest empty;
  empty.paradigm = LabelingParadigm::labeled;
  CHECK_THROWS_AS(train_run(cfg, empty, fx.dir / "data", fx.dir / "r2", false), ValidationError);

  CHECK_THROWS_WITH_AS(train_run(cfg, fx.manifest, fx.dir / "data", fx.dir / "never_ran", true),
                       Contains("resume requested"), IoError);

  (void)train_run(cfg, fx.manifest, fx.dir / "data", fx.dir / "r3", false);
  ExperimentConfig drifted = cfg;
  drifted.optimizer.lr = 0.5;
  CHECK_THROWS_WITH_AS(train_run(drifted, fx.manifest, fx.dir / "data", fx.dir / "r3", true),
                       Contains("resume config differs"), ValidationError);

  // Extending epochs alone is the supported resume path.
  ExperimentConfig extended = cfg;
  extended.epochs = 5;
  TrainResult more = train_run(extended, fx.manifest, fx.dir / "data", fx.dir / "r3", true);
  CHECK(more.epochs_run == 1);
  CHECK(more.last.epoch == 5);
}

TEST_CASE("train_run honours the workers setting") {
  PhantomFixture fx;
  ExperimentConfig cfg = config_for(kRunConfig);
  (void)train_run(cfg, fx.manifest, fx.dir / "data", fx.dir / "serial", false);

  ExperimentConfig par = cfg;
  par.workers = 2;
  (void)train_run(par, fx.manifest, fx.dir / "data", fx.dir / "par", false);

  // Workers are part of the resume contract, so the checkpoints differ in
  // config text; compare the trained tensors numerically instead.
  Checkpoint cs = checkpoint_load(fx.dir / "serial" / "checkpoint_last.bin");
  Checkpoint cp = checkpoint_load(fx.dir / "par" / "checkpoint_last.bin");
  for (const auto& [name, tensor] : cs.tensors) {
    if (name.rfind("params/", 0) != 0) continue;
    const Tensor* other = cp.find(name);
    REQUIRE(other != nullptr);
    for (std::size_t i = 0; i < tensor.numel(); ++i) {
      CHECK(std::abs(tensor.data()[i] - other->data()[i]) <=
            1e-9 * std::max(1.0, std::abs(tensor.data()[i])));
    }
  }
}
