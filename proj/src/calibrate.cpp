// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/calibrate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "quantkit/error.hpp"

namespace quantkit {

namespace {

std::string format_fraction(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", fraction);
  return buf;
}

void check_nonempty(const Histogram& h) {
  require(h.total_count() > 0, ErrorCode::DegenerateInput,
          "calibration requires a non-empty histogram");
}

}  // namespace

std::string CalibrationMethod::to_string() const {
  switch (kind) {
    case Kind::Max:
      return "max";
    case Kind::Entropy:
      return "entropy";
    case Kind::Percentile:
      return "percentile=" + format_fraction(fraction);
  }
  return "max";
}

CalibrationMethod CalibrationMethod::parse(const std::string& text) {
  if (text == "max") return max();
  if (text == "entropy") return entropy();
  if (text.rfind("percentile=", 0) == 0) {
    const std::string value = text.substr(11);
    char* end = nullptr;
    const double fraction = std::strtod(value.c_str(), &end);
    require(end && *end == '\0' && fraction > 0.0 && fraction <= 1.0,
            ErrorCode::InvalidArgument, "bad percentile fraction '" + value + "'");
    return percentile(fraction);
  }
  fail(ErrorCode::InvalidArgument, "unknown calibration method '" + text + "'");
}

std::vector<CalibrationMethod> default_method_set() {
  return {CalibrationMethod::max(), CalibrationMethod::entropy(),
          CalibrationMethod::percentile(0.9999), CalibrationMethod::percentile(0.99999)};
}

RangeSpec calibrate_max(const Histogram& h) {
  check_nonempty(h);
  require(h.observed_max_abs() > 0.0, ErrorCode::DegenerateInput, "degenerate tensor");
  return RangeSpec::symmetric(h.observed_max_abs());
}

RangeSpec calibrate_percentile(const Histogram& h, double fraction) {
  check_nonempty(h);
  require(fraction > 0.0 && fraction <= 1.0, ErrorCode::InvalidArgument,
          "percentile fraction must be in (0, 1]");
  require(h.observed_max_abs() > 0.0, ErrorCode::DegenerateInput, "degenerate tensor");
  const auto& counts = h.counts();
  const double needed = fraction * static_cast<double>(h.total_count());
  std::uint64_t cumulative = 0;
  for (int i = 0; i < h.num_bins(); ++i) {
    cumulative += counts[static_cast<std::size_t>(i)];
    if (static_cast<double>(cumulative) >= needed) {
      // The observed max caps the edge so percentile(1) == max exactly.
      return RangeSpec::symmetric(std::min(h.bin_edge(i), h.observed_max_abs()));
    }
  }
  return RangeSpec::symmetric(h.observed_max_abs());
}

namespace {

// KL(P||Q) between the clipped reference distribution over the first i bins
// and its quantized counterpart. Both the production path here and the
// brute-force oracle in the tests follow this construction; they differ in
// how the sweep is organized.
double kl_for_candidate(const std::vector<std::uint64_t>& counts, int candidate,
                        std::uint64_t tail, int levels) {
  constexpr double kEpsilonMass = 1e-9;
  const int i = candidate;
  std::vector<double> p(counts.begin(), counts.begin() + i);
  p[static_cast<std::size_t>(i - 1)] += static_cast<double>(tail);

  // Q: group the i bins into `levels` equal chunks; each chunk's mass is
  // spread uniformly over its non-empty source bins.
  std::vector<double> q(static_cast<std::size_t>(i), 0.0);
  for (int level = 0; level < levels; ++level) {
    const int begin = static_cast<int>(static_cast<std::int64_t>(level) * i / levels);
    const int end = static_cast<int>(static_cast<std::int64_t>(level + 1) * i / levels);
    double mass = 0.0;
    int occupied = 0;
    for (int b = begin; b < end; ++b) {
      mass += static_cast<double>(counts[static_cast<std::size_t>(b)]);
      if (counts[static_cast<std::size_t>(b)] > 0) ++occupied;
    }
    if (occupied == 0) continue;
    const double share = mass / occupied;
    for (int b = begin; b < end; ++b) {
      if (counts[static_cast<std::size_t>(b)] > 0) q[static_cast<std::size_t>(b)] = share;
    }
  }

  double p_sum = 0.0;
  double q_sum = 0.0;
  for (int b = 0; b < i; ++b) {
    auto bi = static_cast<std::size_t>(b);
    if (p[bi] == 0.0) p[bi] = kEpsilonMass;
    if (q[bi] == 0.0) q[bi] = kEpsilonMass;
    p_sum += p[bi];
    q_sum += q[bi];
  }
  double kl = 0.0;
  for (int b = 0; b < i; ++b) {
    auto bi = static_cast<std::size_t>(b);
    const double pn = p[bi] / p_sum;
    const double qn = q[bi] / q_sum;
    kl += pn * std::log(pn / qn);
  }
  return kl;
}

}  // namespace

RangeSpec calibrate_entropy(const Histogram& h, int bit_width) {
  check_nonempty(h);
  require(bit_width >= 2 && bit_width <= 8, ErrorCode::InvalidArgument,
          "bit_width must be in [2, 8]");
  require(h.observed_max_abs() > 0.0, ErrorCode::DegenerateInput, "degenerate tensor");

  const int levels = (1 << (bit_width - 1)) - 1;
  const int first_candidate = levels + 1;
  if (h.num_bins() < first_candidate) return calibrate_max(h);

  const auto& counts = h.counts();
  std::uint64_t tail = 0;  // counts in bins >= candidate
  for (int b = h.num_bins() - 1; b >= first_candidate; --b) {
    tail += counts[static_cast<std::size_t>(b)];
  }

  double best_kl = std::numeric_limits<double>::infinity();
  int best_candidate = h.num_bins();
  for (int i = first_candidate; i <= h.num_bins(); ++i) {
    const double kl = kl_for_candidate(counts, i, tail, levels);
    if (kl <= best_kl) {  // ties resolve toward the larger threshold
      best_kl = kl;
      best_candidate = i;
    }
    if (i < h.num_bins()) tail -= counts[static_cast<std::size_t>(i)];
  }
  return RangeSpec::symmetric(h.bin_edge(best_candidate - 1));
}

RangeSpec calibrate(const Histogram& h, const CalibrationMethod& method, int bit_width) {
  switch (method.kind) {
    case CalibrationMethod::Kind::Max:
      return calibrate_max(h);
    case CalibrationMethod::Kind::Entropy:
      return calibrate_entropy(h, bit_width);
    case CalibrationMethod::Kind::Percentile:
      return calibrate_percentile(h, method.fraction);
  }
  return calibrate_max(h);
}

std::string double_to_hex(double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(bits));
  return buf;
}

double double_from_hex(const std::string& hex) {
  require(hex.size() == 16, ErrorCode::Io, "bad alpha hex '" + hex + "'");
  std::uint64_t bits = 0;
  for (char c : hex) {
    int digit;
    if (c >= '0' && c <= '9') digit = c - '0';
    else if (c >= 'a' && c <= 'f') digit = c - 'a' + 10;
    else fail(ErrorCode::Io, "bad alpha hex '" + hex + "'");
    bits = (bits << 4) | static_cast<std::uint64_t>(digit);
  }
  return std::bit_cast<double>(bits);
}

void CalibrationCache::put(const std::string& tensor, const CalibrationMethod& method,
                           double alpha) {
  for (Entry& e : entries_) {
    if (e.tensor == tensor) {
      e.method = method;
      e.alpha = alpha;
      return;
    }
  }
  entries_.push_back({tensor, method, alpha});
}

std::optional<double> CalibrationCache::alpha(const std::string& tensor) const {
  const Entry* e = find(tensor);
  return e ? std::optional<double>(e->alpha) : std::nullopt;
}

const CalibrationCache::Entry* CalibrationCache::find(const std::string& tensor) const {
  for (const Entry& e : entries_) {
    if (e.tensor == tensor) return &e;
  }
  return nullptr;
}

std::string CalibrationCache::serialize() const {
  std::ostringstream out;
  for (const Entry& e : entries_) {
    out << e.tensor << ": " << e.method.to_string() << ": " << double_to_hex(e.alpha)
        << "\n";
  }
  return out.str();
}

CalibrationCache CalibrationCache::deserialize(const std::string& text) {
  CalibrationCache cache;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::size_t first = line.find(": ");
    require(first != std::string::npos, ErrorCode::Io,
            "bad calibration cache line '" + line + "'");
    const std::size_t second = line.find(": ", first + 2);
    require(second != std::string::npos, ErrorCode::Io,
            "bad calibration cache line '" + line + "'");
    Entry e;
    e.tensor = line.substr(0, first);
    e.method = CalibrationMethod::parse(line.substr(first + 2, second - first - 2));
    e.alpha = double_from_hex(line.substr(second + 2));
    cache.entries_.push_back(std::move(e));
  }
  return cache;
}

void CalibrationCache::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write calibration cache '" + path + "'");
  out << serialize();
  require(out.good(), ErrorCode::Io, "failed writing calibration cache '" + path + "'");
}

CalibrationCache CalibrationCache::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot read calibration cache '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return deserialize(text.str());
}

}  // namespace quantkit
