// Copyright (c) 2026 SynthForge contributors
// SPDX-License-Identifier: Apache-2.0

#include "synthforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>

#include "synthforge/errors.hpp"
#include "synthforge/format.hpp"

namespace synthforge {

const std::array<std::string, FeatureVector::kCount>& FeatureVector::names() {
  static const std::array<std::string, kCount> kNames = {
      "mean",        "median",  "min",         "max",          "range",
      "variance",    "skewness", "excess_kurtosis", "energy",  "entropy_bits",
      "uniformity",  "p10",     "p90",         "mad"};
  return kNames;
}

double FeatureVector::value(std::size_t index) const {
  switch (index) {
    case 0: return mean;
    case 1: return median;
    case 2: return min;
    case 3: return max;
    case 4: return range;
    case 5: return variance;
    case 6: return skewness;
    case 7: return excess_kurtosis;
    case 8: return energy;
    case 9: return entropy_bits;
    case 10: return uniformity;
    case 11: return p10;
    case 12: return p90;
    case 13: return mad;
    default: throw ArgumentError(fmt::format("feature index {} out of range [0, {})", index, kCount));
  }
}

namespace {

/// Percentile by linear interpolation of sorted values at rank q * (n - 1).
double percentile(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double rank = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, n - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

}  // namespace

FeatureVector first_order_features(const Tensor& img) {
  auto v = img.data();
  const std::size_t n = v.size();
  if (n == 0) throw ArgumentError("first_order_features requires a nonempty image");

  FeatureVector f;
  double sum = 0.0, energy = 0.0;
  double lo = v[0], hi = v[0];
  for (double x : v) {
    sum += x;
    energy += x * x;
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  const double nd = static_cast<double>(n);
  f.mean = sum / nd;
  f.min = lo;
  f.max = hi;
  f.range = hi - lo;
  f.energy = energy;

  if (lo == hi) {
    // Constant image.  sum / n can land one ulp off the common value, which
    // would otherwise leak into the central moments and produce a spurious
    // skewness of +-1; pin the whole vector to its exact conventions.
    f.mean = lo;
    f.median = lo;
    f.p10 = lo;
    f.p90 = lo;
    f.variance = 0.0;
    f.skewness = 0.0;
    f.excess_kurtosis = 0.0;
    f.mad = 0.0;
    f.entropy_bits = 0.0;
    f.uniformity = 1.0;
    return f;
  }

  double m2 = 0.0, m3 = 0.0, m4 = 0.0, mad = 0.0;
  for (double x : v) {
    const double d = x - f.mean;
    const double d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
    mad += std::abs(d);
  }
  m2 /= nd;
  m3 /= nd;
  m4 /= nd;
  f.variance = m2;
  f.mad = mad / nd;
  f.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  f.excess_kurtosis = m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0;

  constexpr std::size_t kBins = 64;
  if (f.range > 0.0) {
    std::array<std::size_t, kBins> hist{};
    const double scale = static_cast<double>(kBins) / f.range;
    for (double x : v) {
      std::size_t b = static_cast<std::size_t>((x - lo) * scale);
      if (b >= kBins) b = kBins - 1;
      ++hist[b];
    }
    double entropy = 0.0, uniformity = 0.0;
    for (std::size_t c : hist) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / nd;
      entropy -= p * std::log2(p);
      uniformity += p * p;
    }
    f.entropy_bits = entropy;
    f.uniformity = uniformity;
  } else {
    f.entropy_bits = 0.0;
    f.uniformity = 1.0;
  }

  std::vector<double> sorted(v.begin(), v.end());
  std::sort(sorted.begin(), sorted.end());
  f.median = percentile(sorted, 0.5);
  f.p10 = percentile(sorted, 0.1);
  f.p90 = percentile(sorted, 0.9);
  return f;
}

double ks_statistic(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw ArgumentError("ks_statistic requires two nonempty samples");
  std::vector<double> sa(a), sb(b);
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const std::size_t n = sa.size(), m = sb.size();

  // Walk the merged order keeping integer step counts; D is the max of
  // |i*m - j*n| / (n*m), which keeps rational values like 1/3 exact.
  std::size_t i = 0, j = 0;
  std::uint64_t best = 0;
  while (i < n && j < m) {
    const double x = std::min(sa[i], sb[j]);
    while (i < n && sa[i] <= x) ++i;
    while (j < m && sb[j] <= x) ++j;
    const std::uint64_t num = i * m > j * n ? i * m - j * n : j * n - i * m;
    best = std::max(best, num);
  }
  return static_cast<double>(best) / static_cast<double>(n * m);
}

FeatureReport compare_cohorts(const std::vector<Tensor>& real_images,
                              const std::vector<Tensor>& synth_images) {
  if (real_images.empty() || synth_images.empty()) {
    throw ArgumentError("compare_cohorts requires two nonempty cohorts");
  }

  const auto& names = FeatureVector::names();
  std::array<std::vector<double>, FeatureVector::kCount> real_vals, synth_vals;
  for (const Tensor& img : real_images) {
    const FeatureVector f = first_order_features(img);
    for (std::size_t k = 0; k < FeatureVector::kCount; ++k) real_vals[k].push_back(f.value(k));
  }
  for (const Tensor& img : synth_images) {
    const FeatureVector f = first_order_features(img);
    for (std::size_t k = 0; k < FeatureVector::kCount; ++k) synth_vals[k].push_back(f.value(k));
  }

  FeatureReport report;
  report.real_count = real_images.size();
  report.synth_count = synth_images.size();
  for (std::size_t k = 0; k < FeatureVector::kCount; ++k) {
    const auto& rv = real_vals[k];
    const auto& sv = synth_vals[k];
    FeatureComparison row;
    row.feature = names[k];
    double rsum = 0.0, ssum = 0.0;
    for (double x : rv) rsum += x;
    for (double x : sv) ssum += x;
    row.mean_real = rsum / static_cast<double>(rv.size());
    row.mean_synth = ssum / static_cast<double>(sv.size());

    double ss = 0.0;
    for (double x : rv) ss += (x - row.mean_real) * (x - row.mean_real);
    for (double x : sv) ss += (x - row.mean_synth) * (x - row.mean_synth);
    const std::size_t dof = rv.size() + sv.size() >= 2 ? rv.size() + sv.size() - 2 : 1;
    row.pooled_std = std::sqrt(ss / static_cast<double>(std::max<std::size_t>(dof, 1)));
    row.standardized_diff =
        row.pooled_std > 0.0 ? std::abs(row.mean_real - row.mean_synth) / row.pooled_std : 0.0;
    row.ks_distance = ks_statistic(rv, sv);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string report_to_csv(const FeatureReport& report) {
  std::string out = "feature,mean_real,mean_synth,pooled_std,standardized_diff,ks_distance\n";
  for (const FeatureComparison& row : report.rows) {
    out += fmt::format("{},{},{},{},{},{}\n", row.feature, double_to_string(row.mean_real),
                       double_to_string(row.mean_synth), double_to_string(row.pooled_std),
                       double_to_string(row.standardized_diff), double_to_string(row.ks_distance));
  }
  return out;
}

FeatureReport parse_report_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) ||
      (line != "feature,mean_real,mean_synth,pooled_std,standardized_diff,ks_distance" &&
       line != "feature,mean_real,mean_synth,pooled_std,standardized_diff,ks_distance\r")) {
    throw ParseError("report CSV: bad or missing header");
  }
  FeatureReport report;
  int row_no = 1;
  while (std::getline(in, line)) {
    ++row_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
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
    if (cells.size() != 6) {
      throw ParseError(fmt::format("report CSV row {}: expected 6 cells, got {}", row_no, cells.size()));
    }
    FeatureComparison row;
    row.feature = cells[0];
    std::array<double*, 5> slots = {&row.mean_real, &row.mean_synth, &row.pooled_std,
                                    &row.standardized_diff, &row.ks_distance};
    for (std::size_t k = 0; k < slots.size(); ++k) {
      if (!parse_double(cells[k + 1], *slots[k])) {
        throw ParseError(fmt::format("report CSV row {}: bad float '{}'", row_no, cells[k + 1]));
      }
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace synthforge
