// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// The recommended pipeline: calibrate activations, evaluate PTQ across
// calibration methods, rank layers by one-at-a-time sensitivity, and skip
// the most sensitive layers until an accuracy target is met.

#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "quantkit/calibrate.hpp"
#include "quantkit/graph.hpp"
#include "quantkit/histogram.hpp"
#include "quantkit/model_io.hpp"

namespace quantkit {

struct EvalMetric {
  enum class Kind { Top1, MseThreshold };

  Kind kind = Kind::Top1;
  double threshold = 0.0;

  static EvalMetric top1() { return {Kind::Top1, 0.0}; }
  static EvalMetric mse_threshold(double tau) { return {Kind::MseThreshold, tau}; }

  // "top1" or "mse@<threshold>".
  std::string to_string() const;
  static EvalMetric parse(const std::string& text);
};

// Deterministic accuracy in [0, 100]. Runs the model as configured: enabled
// and calibrated layers execute on the int8 path, everything else in fp32.
double evaluate(const Model& model, const Dataset& data,
                const EvalMetric& metric = EvalMetric::top1());

// Histograms of the activation tensors feeding each quantizable layer,
// in layer order, collected over one fp32 pass of the calibration set.
using ActivationHistograms = std::vector<std::pair<std::string, Histogram>>;
ActivationHistograms collect_histograms(const Model& model, const Dataset& calib,
                                        int num_bins = kDefaultNumBins);

// Calibrated ranges for one method. All-zero (degenerate) tensors cannot be
// calibrated; they are skipped and reported by name, and the workflow
// leaves the corresponding layers unquantized.
struct CalibrationResult {
  CalibrationCache cache;
  std::vector<std::string> degenerate;
};
CalibrationResult calibrate_from_histograms(const ActivationHistograms& histograms,
                                            const CalibrationMethod& method);
CalibrationResult calibrate_activations(const Model& model, const Dataset& calib,
                                        const CalibrationMethod& method,
                                        int num_bins = kDefaultNumBins);

struct MethodResult {
  CalibrationMethod method;
  double accuracy = 0.0;
  double relative_change = 0.0;  // (acc_int8 - acc_fp32) / acc_fp32
  CalibrationCache cache;
  std::vector<std::string> degenerate;
};

struct PtqReport {
  double fp32_accuracy = 0.0;
  std::vector<MethodResult> methods;
  std::size_t best_index = 0;

  const MethodResult& best() const { return methods[best_index]; }

  std::string serialize() const;
  static PtqReport deserialize(const std::string& text);  // caches not persisted
  void save(const std::string& path) const;
  static PtqReport load(const std::string& path);
};

// Quantizes weights per-channel (max), calibrates activations with each
// method, and evaluates. Best method = highest accuracy, ties toward max
// calibration, then earlier position.
PtqReport run_ptq(const Model& model, const Dataset& calib, const Dataset& eval,
                  std::span<const CalibrationMethod> methods,
                  const EvalMetric& metric = EvalMetric::top1(),
                  int num_bins = kDefaultNumBins);

struct SensitivityEntry {
  std::string layer;
  double accuracy = 0.0;  // accuracy with only this layer quantized
};

struct SensitivityReport {
  double baseline_fp32 = 0.0;
  // Descending sensitivity == ascending accuracy; ties keep layer order.
  std::vector<SensitivityEntry> entries;

  std::string serialize() const;
  static SensitivityReport deserialize(const std::string& text);
  void save(const std::string& path) const;
  static SensitivityReport load(const std::string& path);
};

// One-at-a-time scan: each calibrated quantizable layer is quantized alone
// and the model evaluated. `threads` bounds optional data parallelism; the
// result does not depend on it.
SensitivityReport sensitivity_scan(const Model& model, const Dataset& eval,
                                   const CalibrationCache& cache,
                                   const EvalMetric& metric = EvalMetric::top1(),
                                   int threads = 1);

struct PartialResult {
  bool reached = false;
  double target = 0.0;
  double final_accuracy = 0.0;
  std::vector<std::string> skipped;   // most sensitive first
  std::vector<double> trajectory;     // accuracy before each skip and after the last

  std::string serialize() const;
  void save(const std::string& path) const;
};

// Disables the most sensitive remaining layer and re-evaluates until the
// accuracy target is met or every layer is skipped (reached = false, the
// "unreachable" outcome). The model is left in its final configuration.
PartialResult partial_quantize(Model& model, const Dataset& eval,
                               const CalibrationCache& cache,
                               const SensitivityReport& report, double target,
                               const EvalMetric& metric = EvalMetric::top1());

}  // namespace quantkit
