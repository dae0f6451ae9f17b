// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "synthforge/tensor.hpp"

namespace synthforge {

/// First-order intensity statistics of a single image.  All statistics are
/// population statistics (moments divide by N, not N-1) and depend only on
/// the multiset of pixel values, never on their arrangement.
struct FeatureVector {
  double mean = 0.0;
  double median = 0.0;
  double min = 0.0;
  double max = 0.0;
  double range = 0.0;
  double variance = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  double energy = 0.0;
  double entropy_bits = 0.0;
  double uniformity = 0.0;
  double p10 = 0.0;
  double p90 = 0.0;
  double mad = 0.0;

  static constexpr std::size_t kCount = 14;
  static const std::array<std::string, kCount>& names();
  double value(std::size_t index) const;
};

/// One row of a cohort comparison.
struct FeatureComparison {
  std::string feature;
  double mean_real = 0.0;
  double mean_synth = 0.0;
  double pooled_std = 0.0;
  double standardized_diff = 0.0;
  double ks_distance = 0.0;
};

struct FeatureReport {
  std::vector<FeatureComparison> rows;
  std::size_t real_count = 0;
  std::size_t synth_count = 0;
};

/// Computes the feature vector of a rank-2 image.  The histogram behind
/// entropy_bits and uniformity uses 64 equal bins spanning the image's own
/// value range; a constant image has entropy 0 and uniformity 1.
FeatureVector first_order_features(const Tensor& img);

/// Two-sample Kolmogorov-Smirnov distance: the supremum of the absolute
/// difference between the two empirical CDFs.  Computed with integer
/// numerators so rational results are exact.
double ks_statistic(const std::vector<double>& a, const std::vector<double>& b);

/// Per-feature comparison of two image cohorts.  Rows appear in
/// FeatureVector::names() order.
FeatureReport compare_cohorts(const std::vector<Tensor>& real_images,
                              const std::vector<Tensor>& synth_images);

std::string report_to_csv(const FeatureReport& report);
FeatureReport parse_report_csv(const std::string& text);

}  // namespace synthforge
