// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace quantkit {

inline constexpr int kDefaultNumBins = 2048;

// Fixed-bin histogram of absolute values observed during calibration.
// Bins partition (0, bin_upper_bound] into num_bins equal intervals that
// are half-open at the bottom: value v > 0 lands in bin ceil(v/width)-1,
// v == 0 lands in bin 0. When a value exceeds the current upper bound the
// range is widened by the smallest power-of-two factor that covers it and
// existing counts are merged into coarser bins exactly.
class Histogram {
 public:
  explicit Histogram(int num_bins = kDefaultNumBins);

  void observe(std::span<const double> values);
  void observe(double value) { observe(std::span<const double>(&value, 1)); }

  // Adds another histogram's counts. Exact when the bin ranges agree or are
  // related by a power-of-two factor; otherwise counts are reinserted at
  // source-bin midpoints.
  void merge(const Histogram& other);

  int num_bins() const { return static_cast<int>(counts_.size()); }
  double bin_upper_bound() const { return bin_upper_bound_; }
  double bin_width() const { return bin_upper_bound_ / num_bins(); }
  // Upper edge of bin i.
  double bin_edge(int i) const { return bin_upper_bound_ * (i + 1) / num_bins(); }

  std::uint64_t total_count() const { return total_count_; }
  double observed_max_abs() const { return observed_max_abs_; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }

 private:
  int bin_index(double abs_value) const;
  void widen_to(double required_max);

  std::vector<std::uint64_t> counts_;
  double bin_upper_bound_ = 0.0;
  std::uint64_t total_count_ = 0;
  double observed_max_abs_ = 0.0;
};

}  // namespace quantkit
