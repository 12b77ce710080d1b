// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Choosing the representable range for a tensor from its activation
// histogram: max, percentile and entropy (KL-divergence) calibration.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "quantkit/histogram.hpp"
#include "quantkit/quant.hpp"

namespace quantkit {

struct CalibrationMethod {
  enum class Kind { Max, Entropy, Percentile };

  Kind kind = Kind::Max;
  double fraction = 1.0;  // Percentile only

  static CalibrationMethod max() { return {Kind::Max, 1.0}; }
  static CalibrationMethod entropy() { return {Kind::Entropy, 1.0}; }
  static CalibrationMethod percentile(double fraction) {
    return {Kind::Percentile, fraction};
  }

  // "max", "entropy", "percentile=<fraction>". The textual form round-trips
  // bit-exactly, so it is also used in the cache file.
  std::string to_string() const;
  static CalibrationMethod parse(const std::string& text);

  bool operator==(const CalibrationMethod&) const = default;
};

// The workflow's default sweep: max, entropy, 99.99% and 99.999% percentile.
std::vector<CalibrationMethod> default_method_set();

// alpha = largest |x| observed.
RangeSpec calibrate_max(const Histogram& h);

// alpha = smallest bin edge covering at least `fraction` of the observed
// absolute values (clamped to the observed max so fraction = 1 reduces to
// max calibration).
RangeSpec calibrate_percentile(const Histogram& h, double fraction);

// alpha minimizing KL(P||Q) over candidate clip thresholds, where P is the
// first i bins with the clipped tail folded into bin i-1 and Q is P's
// support downsampled to 2^(bit_width-1)-1 levels and expanded back. Ties
// pick the larger threshold. Falls back to max calibration when the
// histogram has fewer bins than candidate thresholds require.
RangeSpec calibrate_entropy(const Histogram& h, int bit_width);

RangeSpec calibrate(const Histogram& h, const CalibrationMethod& method,
                    int bit_width = 8);

// Calibration cache: one "<tensor>: <method>: <alpha_hex>" line per tensor,
// where alpha_hex is the 64-bit bit pattern of alpha in lowercase hex.
class CalibrationCache {
 public:
  struct Entry {
    std::string tensor;
    CalibrationMethod method;
    double alpha;
  };

  void put(const std::string& tensor, const CalibrationMethod& method, double alpha);
  std::optional<double> alpha(const std::string& tensor) const;
  const Entry* find(const std::string& tensor) const;
  bool contains(const std::string& tensor) const { return alpha(tensor).has_value(); }

  const std::vector<Entry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  std::string serialize() const;
  static CalibrationCache deserialize(const std::string& text);

  void save(const std::string& path) const;
  static CalibrationCache load(const std::string& path);

 private:
  std::vector<Entry> entries_;
};

std::string double_to_hex(double v);
double double_from_hex(const std::string& hex);

}  // namespace quantkit
