// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "synthforge/nn.hpp"

namespace synthforge {

// ---------------------------------------------------------------------------
// SynthConf document model
//
// SynthConf is a strict line-oriented subset of indentation-based config
// syntax: "key: value" pairs, nesting by exactly two spaces per level,
// "- value" list items (scalars only), "#" comments, and scalars typed as
// int / float / bool / string.  Tabs are rejected outright.
// ---------------------------------------------------------------------------

struct ConfigScalar {
  enum class Kind { int64, float64, boolean, string };
  Kind kind = Kind::string;
  long long i = 0;
  double f = 0.0;
  bool b = false;
  std::string s;
};

struct ConfigNode {
  enum class Kind { scalar, map, list };
  Kind kind = Kind::map;
  int line = 0;
  ConfigScalar scalar;
  std::vector<std::pair<std::string, ConfigNode>> entries;
  std::vector<ConfigNode> items;

  /// Map lookup; null when the key is absent or the node is not a map.
  const ConfigNode* find(std::string_view key) const;
};

struct ConfigDocument {
  ConfigNode root;
};

/// Parses SynthConf text.  Every node carries the 1-based source line of the
/// key (or item) that introduced it.  Malformed input raises a parse error
/// whose message starts with "line N, column M:".
ConfigDocument parse_document(const std::string& text);

// ---------------------------------------------------------------------------
// Validated experiment record
// ---------------------------------------------------------------------------

enum class ModelFamily { autoencoder, gan, diffusion };
enum class LabelingParadigm { unlabeled, labeled };

std::string_view family_name(ModelFamily family);
std::string_view paradigm_name(LabelingParadigm paradigm);

struct AutoencoderSettings {
  double beta_kl = 1.0;
  bool variational = true;
  bool operator==(const AutoencoderSettings&) const = default;
};

struct GanSettings {
  std::int64_t latent_dim = 16;
  double label_smoothing = 0.0;
  bool operator==(const GanSettings&) const = default;
};

struct DiffusionSettings {
  std::int64_t timesteps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::int64_t sampling_steps = 1000;
  bool operator==(const DiffusionSettings&) const = default;
};

struct AugmentSettings {
  bool hflip = false;
  bool vflip = false;
  bool rot90 = false;
  double noise_sigma = 0.0;
  bool operator==(const AugmentSettings&) const = default;
};

struct NormalizationSettings {
  double lo = -1.0;
  double hi = 1.0;
  bool operator==(const NormalizationSettings&) const = default;
};

struct ExperimentConfig {
  ModelFamily model_family = ModelFamily::autoencoder;
  LabelingParadigm labeling_paradigm = LabelingParadigm::unlabeled;
  std::int64_t image_size = 16;
  std::int64_t channels = 1;
  std::int64_t num_classes = 0;
  std::int64_t latent_dim = 16;
  std::int64_t batch_size = 16;
  std::int64_t epochs = 1;
  std::uint64_t seed = 42;
  std::int64_t checkpoint_every = 0;
  std::int64_t workers = 1;
  OptimizerSettings optimizer;
  ScheduleSettings scheduler;
  AutoencoderSettings autoencoder;
  GanSettings gan;
  DiffusionSettings diffusion;
  AugmentSettings augment;
  NormalizationSettings normalization;
  bool operator==(const ExperimentConfig&) const = default;
};

/// Checks every key, fills defaults, and enforces cross-field invariants.
/// Unknown keys are hard errors that also name the nearest valid key.
/// Messages carry the source line of the offending key where one exists.
ExperimentConfig validate_config(const ConfigDocument& doc);

/// Canonical rendering: keys sorted lexicographically at every level, only
/// the active family's sub-record emitted, floats in shortest round-trip
/// form.  parse + validate of the output reproduces the record exactly.
std::string dump_effective_config(const ExperimentConfig& cfg);

/// Reads, parses, and validates a config file in one call.
ExperimentConfig load_config_file(const std::filesystem::path& path);

}  // namespace synthforge
