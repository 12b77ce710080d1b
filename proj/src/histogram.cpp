// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/histogram.hpp"

#include <algorithm>
#include <cmath>

#include "quantkit/error.hpp"

namespace quantkit {

Histogram::Histogram(int num_bins) {
  require(num_bins >= 1, ErrorCode::InvalidArgument, "histogram needs at least one bin");
  counts_.assign(static_cast<std::size_t>(num_bins), 0);
}

int Histogram::bin_index(double abs_value) const {
  if (abs_value <= 0.0) return 0;
  const int idx =
      static_cast<int>(std::ceil(abs_value * num_bins() / bin_upper_bound_)) - 1;
  return std::clamp(idx, 0, num_bins() - 1);
}

void Histogram::widen_to(double required_max) {
  if (required_max <= bin_upper_bound_) return;
  if (bin_upper_bound_ == 0.0) {
    bin_upper_bound_ = required_max;
    return;
  }
  // Smallest power-of-two growth factor covering the new max.
  int doublings = 0;
  double bound = bin_upper_bound_;
  while (bound < required_max) {
    bound *= 2.0;
    ++doublings;
  }
  std::vector<std::uint64_t> merged(counts_.size(), 0);
  const int shift = std::min(doublings, 63);  // beyond 2^63 everything folds to bin 0
  for (std::size_t i = 0; i < counts_.size(); ++i) {
    merged[i >> shift] += counts_[i];
  }
  counts_ = std::move(merged);
  bin_upper_bound_ = bound;
}

void Histogram::observe(std::span<const double> values) {
  if (values.empty()) return;
  double batch_max = 0.0;
  for (double v : values) {
    require(std::isfinite(v), ErrorCode::InvalidArgument, "non-finite activation");
    batch_max = std::max(batch_max, std::abs(v));
  }
  widen_to(batch_max);
  for (double v : values) {
    const double a = std::abs(v);
    if (a > 0.0) counts_[static_cast<std::size_t>(bin_index(a))] += 1;
    else counts_[0] += 1;
    observed_max_abs_ = std::max(observed_max_abs_, a);
  }
  total_count_ += values.size();
}

void Histogram::merge(const Histogram& other) {
  require(num_bins() == other.num_bins(), ErrorCode::InvalidArgument,
          "cannot merge histograms with different bin counts");
  if (other.total_count_ == 0) return;
  widen_to(other.bin_upper_bound_);
  if (bin_upper_bound_ == other.bin_upper_bound_) {
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  } else {
    // Same-origin histograms differ by a power-of-two factor and merge
    // exactly; anything else degrades to midpoint reinsertion.
    const double ratio = bin_upper_bound_ / other.bin_upper_bound_;
    const double log2r = std::log2(ratio);
    if (log2r == std::floor(log2r)) {
      const int shift = std::min(static_cast<int>(log2r), 63);
      for (std::size_t i = 0; i < other.counts_.size(); ++i) {
        counts_[i >> shift] += other.counts_[i];
      }
    } else {
      for (std::size_t i = 0; i < other.counts_.size(); ++i) {
        if (other.counts_[i] == 0) continue;
        const double midpoint = other.bin_upper_bound_ *
                                (static_cast<double>(i) + 0.5) / other.num_bins();
        counts_[static_cast<std::size_t>(bin_index(midpoint))] += other.counts_[i];
      }
    }
  }
  total_count_ += other.total_count_;
  observed_max_abs_ = std::max(observed_max_abs_, other.observed_max_abs_);
}

}  // namespace quantkit
