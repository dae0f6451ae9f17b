// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "synthforge/checkpoint.hpp"
#include "synthforge/config.hpp"
#include "synthforge/data.hpp"
#include "synthforge/errors.hpp"
#include "synthforge/log.hpp"
#include "synthforge/metrics.hpp"
#include "synthforge/models.hpp"
#include "synthforge/rng.hpp"
#include "synthforge/trainer.hpp"
#include "synthforge/version.hpp"

namespace fs = std::filesystem;
using namespace synthforge;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

/// Parses and validates a config file, prefixing diagnostics with the path.
ExperimentConfig load_validated_config(const fs::path& path) {
  const std::string text = slurp(path);
  try {
    return validate_config(parse_document(text));
  } catch (const ParseError& e) {
    throw ParseError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

Manifest load_manifest_checked(const fs::path& path, LabelingParadigm paradigm,
                               std::int64_t num_classes) {
  try {
    return load_manifest_file(path, paradigm, num_classes);
  } catch (const ValidationError& e) {
    throw ValidationError(fmt::format("{}: {}", path.string(), e.what()));
  }
}

int run_validate_config(const fs::path& config_path) {
  const ExperimentConfig cfg = load_validated_config(config_path);
  std::cout << dump_effective_config(cfg);
  return 0;
}

int run_phantom(const fs::path& out_dir, std::size_t n_per_class, std::int64_t size,
                std::uint64_t seed) {
  generate_phantom_dataset(out_dir, n_per_class, size, seed);
  log_message(LogLevel::info,
              fmt::format("wrote {} phantom images to '{}'", 2 * n_per_class, out_dir.string()));
  return 0;
}

int run_train(const fs::path& config_path, const fs::path& manifest_path,
              std::optional<fs::path> data_root, const fs::path& out_dir, bool resume,
              std::optional<std::int64_t> workers, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg = load_validated_config(config_path);
  if (workers) {
    if (*workers < 1) throw ValidationError("--workers must be at least 1");
    cfg.workers = *workers;
  }
  if (seed) cfg.seed = *seed;

  const Manifest manifest =
      load_manifest_checked(manifest_path, cfg.labeling_paradigm, cfg.num_classes);
  const fs::path root = data_root ? *data_root : manifest_path.parent_path();
  const TrainResult result = train_run(cfg, manifest, root, out_dir, resume);
  log_message(LogLevel::info,
              fmt::format("trained {} epochs; final checkpoint at '{}'", result.epochs_run,
                          (out_dir / "checkpoint_last.bin").string()));
  return 0;
}

int run_generate(const fs::path& checkpoint_path, std::int64_t num_samples,
                 std::optional<std::int64_t> class_id, const fs::path& out_dir,
                 std::optional<std::uint64_t> seed) {
  if (num_samples < 0) throw ValidationError("--num-samples must be non-negative");
  const Checkpoint ckpt = checkpoint_load(checkpoint_path);
  const ExperimentConfig cfg = validate_config(parse_document(ckpt.config_text));
  std::unique_ptr<SynthesisModule> module = build_module(cfg);
  restore_params(ckpt, *module);

  const bool conditional = module->conditioning() == ConditioningMode::klass;
  if (!conditional && class_id) {
    throw ValidationError("--class-id was given but the checkpointed model is unconditional");
  }
  if (class_id && (*class_id < 0 || *class_id >= cfg.num_classes)) {
    throw ValidationError(fmt::format("--class-id {} out of range [0, {})", *class_id, cfg.num_classes));
  }

  const std::size_t n = static_cast<std::size_t>(num_samples);
  std::vector<int> labels;
  if (conditional) {
    labels.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
      labels.push_back(class_id ? static_cast<int>(*class_id)
                                : static_cast<int>(i % static_cast<std::size_t>(cfg.num_classes)));
    }
  }

  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError(fmt::format("cannot create directory '{}': {}", out_dir.string(), ec.message()));

  RngStream rng(purpose_root(seed ? *seed : cfg.seed, SeedPurpose::generate));
  const Tensor samples = module->generate(n, labels, rng);

  Manifest manifest;
  manifest.paradigm = conditional ? LabelingParadigm::labeled : LabelingParadigm::unlabeled;
  manifest.channels = static_cast<std::size_t>(cfg.channels);
  const std::size_t c = manifest.channels;
  const std::size_t s = static_cast<std::size_t>(cfg.image_size);

  for (std::size_t i = 0; i < n; ++i) {
    const std::string stem = conditional ? fmt::format("sample_{}_{:04}", labels[i], i)
                                         : fmt::format("sample_{:04}", i);
    SampleRecord rec;
    rec.subject_id = stem;
    for (std::size_t ch = 0; ch < c; ++ch) {
      Tensor plane(Shape{s, s});
      auto src = samples.data();
      std::copy(src.begin() + (i * c + ch) * s * s, src.begin() + (i * c + ch + 1) * s * s,
                plane.data_mut().begin());
      plane = denormalize_image(plane, cfg.normalization.lo, cfg.normalization.hi);
      const std::string file = c == 1 ? stem + ".pgm" : fmt::format("{}_ch{}.pgm", stem, ch);
      write_pgm(plane, out_dir / file);
      rec.channel_paths.push_back(file);
    }
    if (conditional) rec.label = labels[i];
    manifest.records.push_back(std::move(rec));
  }

  std::ofstream out(out_dir / "manifest.csv", std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", (out_dir / "manifest.csv").string()));
  out << manifest_to_csv(manifest);
  if (!out) throw IoError(fmt::format("write failed for '{}'", (out_dir / "manifest.csv").string()));
  log_message(LogLevel::info, fmt::format("wrote {} samples to '{}'", n, out_dir.string()));
  return 0;
}

std::vector<Tensor> load_cohort(const fs::path& manifest_path) {
  const Manifest manifest = load_manifest_auto(manifest_path);
  if (manifest.records.empty()) {
    throw ValidationError(fmt::format("{}: manifest has no rows", manifest_path.string()));
  }
  const fs::path root = manifest_path.parent_path();
  std::vector<Tensor> images;
  for (const SampleRecord& rec : manifest.records) {
    for (const std::string& rel : rec.channel_paths) {
      images.push_back(read_pgm(root / rel));
    }
  }
  return images;
}

int run_compare(const fs::path& real_manifest, const fs::path& synth_manifest,
                const fs::path& output, std::optional<fs::path> json_output) {
  const std::vector<Tensor> real = load_cohort(real_manifest);
  const std::vector<Tensor> synth = load_cohort(synth_manifest);
  const FeatureReport report = compare_cohorts(real, synth);

  std::ofstream out(output, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", output.string()));
  out << report_to_csv(report);
  if (!out) throw IoError(fmt::format("write failed for '{}'", output.string()));

  if (json_output) {
    nlohmann::json doc;
    doc["real_count"] = report.real_count;
    doc["synth_count"] = report.synth_count;
    doc["features"] = nlohmann::json::array();
    for (const FeatureComparison& row : report.rows) {
      doc["features"].push_back({{"feature", row.feature},
                                 {"mean_real", row.mean_real},
                                 {"mean_synth", row.mean_synth},
                                 {"pooled_std", row.pooled_std},
                                 {"standardized_diff", row.standardized_diff},
                                 {"ks_distance", row.ks_distance}});
    }
    std::ofstream jout(*json_output, std::ios::binary);
    if (!jout) throw IoError(fmt::format("cannot write '{}'", json_output->string()));
    jout << doc.dump(2) << "\n";
  }
  return 0;
}

int run_info(std::optional<fs::path> checkpoint_path) {
  std::cout << "synthforge " << kVersionString << "\n";
  if (!checkpoint_path) return 0;

  const Checkpoint ckpt = checkpoint_load(*checkpoint_path);
  const ExperimentConfig cfg = validate_config(parse_document(ckpt.config_text));
  std::size_t param_count = 0;
  for (const auto& [name, tensor] : ckpt.tensors) {
    if (name.rfind("params/", 0) == 0) param_count += tensor.numel();
  }
  std::cout << "checkpoint: " << checkpoint_path->string() << "\n"
            << "format version: " << ckpt.version << "\n"
            << "epoch: " << ckpt.epoch << "\n"
            << "step: " << ckpt.step << "\n"
            << "model_family: " << family_name(cfg.model_family) << "\n"
            << "labeling_paradigm: " << paradigm_name(cfg.labeling_paradigm) << "\n"
            << "image_size: " << cfg.image_size << "\n"
            << "channels: " << cfg.channels << "\n"
            << "tensors: " << ckpt.tensors.size() << "\n"
            << "parameters: " << param_count << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* level = std::getenv("SYNTHFORGE_LOG_LEVEL")) {
    if (!set_log_level_from_string(level)) {
      std::cerr << "[synthforge] ignoring unknown SYNTHFORGE_LOG_LEVEL '" << level << "'\n";
    }
  }

  CLI::App app{"Config-driven generative image synthesis workbench"};
  app.require_subcommand(1);

  std::string config_path, manifest_path, out_dir, checkpoint_path;
  std::string real_manifest, synth_manifest, report_output;
  std::string data_root_s, json_output_s, info_checkpoint_s;
  std::uint64_t phantom_seed = 42;
  std::size_t n_per_class = 100;
  std::int64_t phantom_size = 16;
  std::int64_t num_samples = 0;
  std::int64_t class_id_v = -1;
  std::int64_t workers_v = 0;
  std::uint64_t seed_v = 0;
  bool resume = false;

  CLI::App* validate = app.add_subcommand("validate-config", "Parse and validate a config file");
  validate->add_option("--config", config_path, "Config file")->required();

  CLI::App* phantom = app.add_subcommand("phantom", "Generate the synthetic phantom dataset");
  phantom->add_option("--output-dir", out_dir, "Destination directory")->required();
  phantom->add_option("--n-per-class", n_per_class, "Images per class");
  phantom->add_option("--size", phantom_size, "Image side length");
  phantom->add_option("--seed", phantom_seed, "Dataset seed");

  CLI::App* train = app.add_subcommand("train", "Train a model from a config and manifest");
  train->add_option("--config", config_path, "Config file")->required();
  train->add_option("--manifest", manifest_path, "Training manifest CSV")->required();
  train->add_option("--data-root", data_root_s, "Image path root (default: manifest directory)");
  train->add_option("--output-dir", out_dir, "Run directory for checkpoints and metrics")->required();
  train->add_flag("--resume", resume, "Continue from checkpoint_last.bin in the run directory");
  train->add_option("--workers", workers_v, "Data-parallel worker count override")
      ->check(CLI::PositiveNumber);
  train->add_option("--seed", seed_v, "Seed override");

  CLI::App* generate = app.add_subcommand("generate", "Sample images from a checkpoint");
  generate->add_option("--checkpoint", checkpoint_path, "Checkpoint file")->required();
  generate->add_option("--num-samples", num_samples, "Number of samples")->required();
  generate->add_option("--class-id", class_id_v, "Fixed class for conditional models");
  generate->add_option("--output-dir", out_dir, "Destination directory")->required();
  generate->add_option("--seed", seed_v, "Sampling seed (default: checkpointed seed)");

  CLI::App* compare = app.add_subcommand("compare", "Compare two image cohorts");
  compare->add_option("--real-manifest", real_manifest, "Reference cohort manifest")->required();
  compare->add_option("--synth-manifest", synth_manifest, "Synthetic cohort manifest")->required();
  compare->add_option("--output", report_output, "Report CSV destination")->required();
  compare->add_option("--json", json_output_s, "Optional JSON mirror of the report");

  CLI::App* info = app.add_subcommand("info", "Print version and checkpoint metadata");
  info->add_option("--checkpoint", info_checkpoint_s, "Checkpoint file to describe");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    std::cerr << app.help() << "\n";
    return 1;
  }

  try {
    if (validate->parsed()) return run_validate_config(config_path);
    if (phantom->parsed()) return run_phantom(out_dir, n_per_class, phantom_size, phantom_seed);
    if (train->parsed()) {
      return run_train(
          config_path, manifest_path,
          data_root_s.empty() ? std::nullopt : std::optional<fs::path>(data_root_s), out_dir,
          resume,
          train->count("--workers") ? std::optional<std::int64_t>(workers_v) : std::nullopt,
          train->count("--seed") ? std::optional<std::uint64_t>(seed_v) : std::nullopt);
    }
    if (generate->parsed()) {
      return run_generate(
          checkpoint_path, num_samples,
          generate->count("--class-id") ? std::optional<std::int64_t>(class_id_v) : std::nullopt,
          out_dir,
          generate->count("--seed") ? std::optional<std::uint64_t>(seed_v) : std::nullopt);
    }
    if (compare->parsed()) {
      return run_compare(real_manifest, synth_manifest, report_output,
                         json_output_s.empty() ? std::nullopt
                                               : std::optional<fs::path>(json_output_s));
    }
    if (info->parsed()) {
      return run_info(info_checkpoint_s.empty() ? std::nullopt
                                                : std::optional<fs::path>(info_checkpoint_s));
    }
    std::cerr << app.help() << "\n";
    return 1;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
