// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "synthforge/config.hpp"
#include "synthforge/rng.hpp"
#include "synthforge/tensor.hpp"

namespace synthforge {

/// One subject: a channel path per configured channel plus an optional
/// class label under the labeled paradigm.
struct SampleRecord {
  std::string subject_id;
  std::vector<std::string> channel_paths;
  int label = -1;
};

struct Manifest {
  std::vector<SampleRecord> records;
  LabelingParadigm paradigm = LabelingParadigm::unlabeled;
  std::size_t channels = 1;
  bool labeled() const { return paradigm == LabelingParadigm::labeled; }
  std::size_t size() const { return records.size(); }
};

/// Parses manifest CSV: header "SubjectID,Channel_0..Channel_{C-1}[,Label]".
/// Channel count is taken from the header.  Errors cite the 1-based CSV row.
Manifest parse_manifest(const std::string& csv_text, LabelingParadigm paradigm,
                        std::int64_t num_classes);
Manifest load_manifest_file(const std::filesystem::path& path, LabelingParadigm paradigm,
                            std::int64_t num_classes);
/// Detects the paradigm from the presence of the Label column; labeled class
/// count is inferred as max label + 1.
Manifest load_manifest_auto(const std::filesystem::path& path);
std::string manifest_to_csv(const Manifest& manifest);

/// Reads a P2/P5 graymap with maxval 255 or 65535 into [H,W] scaled to [0,1].
Tensor read_pgm(const std::filesystem::path& path);
/// Writes P5 maxval 255 after clamping values to [0,1].
void write_pgm(const Tensor& image, const std::filesystem::path& path);

/// Affine map [0,1] -> [lo,hi] and its inverse.  Inputs straying outside
/// [0,1] by at most 1e-9 are clamped; larger excursions are mapped as-is.
Tensor normalize_image(const Tensor& x, double lo = -1.0, double hi = 1.0);
Tensor denormalize_image(const Tensor& x, double lo = -1.0, double hi = 1.0);

enum class ResizeMode { nearest, bilinear };

/// Square resize with the half-pixel (align-corners-false) convention:
/// source coordinate = (i + 0.5) * extent / target - 0.5, edges clamped.
Tensor resize(const Tensor& image, std::int64_t target, ResizeMode mode);

struct Batch {
  Tensor images;  // [N, C, H, W]
  std::vector<int> labels;
  bool has_labels() const { return !labels.empty(); }
  std::size_t size() const { return images.ndim() ? images.extent(0) : 0; }
};

/// In-place augmentation: per sample, optional horizontal/vertical flips
/// (p = 0.5 each), 90-degree rotation by a uniform k in {0,1,2,3}, then
/// additive Gaussian pixel noise clamped back into [lo, hi].  Draws happen
/// in sample order; disabled transforms consume nothing.
void augment_batch(Batch& batch, const AugmentSettings& settings, RngStream& rng,
                   double lo, double hi);

/// Deterministic epoch batching: Fisher-Yates permutation seeded from the
/// experiment seed and epoch, split into contiguous batches with the last
/// partial batch kept.
std::vector<std::vector<std::size_t>> make_batches(const Manifest& manifest,
                                                   std::int64_t batch_size,
                                                   std::uint64_t epoch, std::uint64_t seed);

/// Loads, resizes, and normalizes the listed records into one batch.
/// Channel paths are resolved relative to data_root.
Batch load_batch(const Manifest& manifest, const std::vector<std::size_t>& indices,
                 const ExperimentConfig& cfg, const std::filesystem::path& data_root);

/// Two-class synthetic cohort: class 0 images are a jittered Gaussian blob
/// plus pixel noise; class 1 adds a small bright disk at a jittered offset.
/// Writes PGM files and manifest.csv (labeled) into out_dir.
void generate_phantom_dataset(const std::filesystem::path& out_dir, std::size_t n_per_class,
                              std::int64_t size, std::uint64_t seed);

}  // namespace synthforge
