// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/workflow.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <thread>

#include "kv.hpp"
#include "quantkit/error.hpp"

namespace quantkit {

std::string EvalMetric::to_string() const {
  if (kind == Kind::Top1) return "top1";
  return "mse@" + kv::format_real(threshold);
}

EvalMetric EvalMetric::parse(const std::string& text) {
  if (text == "top1") return top1();
  if (text.rfind("mse@", 0) == 0) {
    const double tau = std::strtod(text.c_str() + 4, nullptr);
    require(tau >= 0.0, ErrorCode::InvalidArgument, "bad mse threshold in '" + text + "'");
    return mse_threshold(tau);
  }
  fail(ErrorCode::InvalidArgument, "unknown metric '" + text + "'");
}

double evaluate(const Model& model, const Dataset& data, const EvalMetric& metric) {
  model.validate();
  require(data.count() > 0, ErrorCode::InvalidArgument, "evaluation data is empty");
  std::vector<std::size_t> all(data.count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const Tensor out = forward_int8(model, data.batch(all));
  require(out.rank() == 2 && out.extent(0) == data.count(), ErrorCode::ShapeMismatch,
          "model output is not one row per sample");

  const std::size_t classes = out.extent(1);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.count(); ++i) {
    if (metric.kind == EvalMetric::Kind::Top1) {
      std::size_t arg = 0;
      for (std::size_t j = 1; j < classes; ++j) {
        if (out(i, j) > out(i, arg)) arg = j;
      }
      if (static_cast<std::int32_t>(arg) == data.labels[i]) ++correct;
    } else {
      const auto label = static_cast<std::size_t>(data.labels[i]);
      require(label < classes, ErrorCode::InvalidArgument, "label out of range");
      double mse = 0.0;
      for (std::size_t j = 0; j < classes; ++j) {
        const double diff = out(i, j) - (j == label ? 1.0 : 0.0);
        mse += diff * diff;
      }
      mse /= static_cast<double>(classes);
      if (mse <= metric.threshold) ++correct;
    }
  }
  return 100.0 * static_cast<double>(correct) / static_cast<double>(data.count());
}

ActivationHistograms collect_histograms(const Model& model, const Dataset& calib,
                                        int num_bins) {
  model.validate();
  require(calib.count() > 0, ErrorCode::InvalidArgument, "calibration data is empty");
  ActivationHistograms histograms;
  std::vector<std::size_t> layer_to_slot(model.layers.size(), SIZE_MAX);
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    if (model.layers[i].quantizable()) {
      layer_to_slot[i] = histograms.size();
      histograms.emplace_back(model.layers[i].input_tensor_name(),
                              Histogram(num_bins));
    }
  }
  std::vector<std::size_t> all(calib.count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  forward_fp32(model, calib.batch(all), [&](std::size_t layer, const Tensor& input) {
    histograms[layer_to_slot[layer]].second.observe(input.values());
  });
  return histograms;
}

CalibrationResult calibrate_from_histograms(const ActivationHistograms& histograms,
                                            const CalibrationMethod& method) {
  CalibrationResult result;
  for (const auto& [name, histogram] : histograms) {
    if (histogram.total_count() == 0 || histogram.observed_max_abs() == 0.0) {
      result.degenerate.push_back(name);
      continue;
    }
    result.cache.put(name, method, calibrate(histogram, method).alpha);
  }
  return result;
}

CalibrationResult calibrate_activations(const Model& model, const Dataset& calib,
                                        const CalibrationMethod& method, int num_bins) {
  return calibrate_from_histograms(collect_histograms(model, calib, num_bins), method);
}

namespace {

// Quantizable layers without a calibrated input cannot run on the int8
// path; they stay disabled.
void apply_cache_and_enable(Model& model, const CalibrationCache& cache) {
  set_all_quantized(model, true);
  attach_calibration(model, cache);
  prepare_weight_params(model);
  for (Layer& layer : model.layers) {
    if (layer.quant.enabled && !layer.quant.activation_params) {
      layer.quant.enabled = false;
    }
  }
}

}  // namespace

PtqReport run_ptq(const Model& model, const Dataset& calib, const Dataset& eval,
                  std::span<const CalibrationMethod> methods, const EvalMetric& metric,
                  int num_bins) {
  require(!methods.empty(), ErrorCode::InvalidArgument,
          "run_ptq needs at least one calibration method");
  model.validate();

  Model baseline = model;
  set_all_quantized(baseline, false);
  PtqReport report;
  report.fp32_accuracy = evaluate(baseline, eval, metric);

  const ActivationHistograms histograms = collect_histograms(model, calib, num_bins);
  for (const CalibrationMethod& method : methods) {
    MethodResult result;
    result.method = method;
    CalibrationResult calibrated = calibrate_from_histograms(histograms, method);
    result.cache = std::move(calibrated.cache);
    result.degenerate = std::move(calibrated.degenerate);

    Model candidate = model;
    apply_cache_and_enable(candidate, result.cache);
    result.accuracy = evaluate(candidate, eval, metric);
    result.relative_change =
        (result.accuracy - report.fp32_accuracy) / report.fp32_accuracy;
    report.methods.push_back(std::move(result));
  }

  report.best_index = 0;
  for (std::size_t i = 1; i < report.methods.size(); ++i) {
    if (report.methods[i].accuracy > report.methods[report.best_index].accuracy) {
      report.best_index = i;
    }
  }
  // Ties resolve toward max calibration.
  for (std::size_t i = 0; i < report.methods.size(); ++i) {
    if (report.methods[i].accuracy == report.methods[report.best_index].accuracy &&
        report.methods[i].method.kind == CalibrationMethod::Kind::Max) {
      report.best_index = i;
      break;
    }
  }
  return report;
}

SensitivityReport sensitivity_scan(const Model& model, const Dataset& eval,
                                   const CalibrationCache& cache,
                                   const EvalMetric& metric, int threads) {
  model.validate();
  Model base = model;
  apply_cache_and_enable(base, cache);

  Model fp32 = base;
  set_all_quantized(fp32, false);
  SensitivityReport report;
  report.baseline_fp32 = evaluate(fp32, eval, metric);

  std::vector<std::string> candidates;
  for (const Layer& layer : base.layers) {
    if (layer.quantizable() && layer.quant.activation_params) {
      candidates.push_back(layer.name);
    }
  }

  std::vector<SensitivityEntry> entries(candidates.size());
  const auto scan_one = [&](std::size_t i) {
    Model probe = base;
    set_all_quantized(probe, false);
    set_layer_quantized(probe, candidates[i], true);
    entries[i] = {candidates[i], evaluate(probe, eval, metric)};
  };

  const int workers = std::clamp(threads, 1, static_cast<int>(candidates.size() ? candidates.size() : 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < candidates.size(); ++i) scan_one(i);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w]() {
        for (std::size_t i = static_cast<std::size_t>(w); i < candidates.size();
             i += static_cast<std::size_t>(workers)) {
          scan_one(i);
        }
      });
    }
    for (std::thread& t : pool) t.join();
  }

  // Descending sensitivity = ascending accuracy; stable keeps layer order
  // for equal accuracies.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const SensitivityEntry& a, const SensitivityEntry& b) {
                     return a.accuracy < b.accuracy;
                   });
  report.entries = std::move(entries);
  return report;
}

PartialResult partial_quantize(Model& model, const Dataset& eval,
                               const CalibrationCache& cache,
                               const SensitivityReport& report, double target,
                               const EvalMetric& metric) {
  apply_cache_and_enable(model, cache);
  PartialResult result;
  result.target = target;

  double accuracy = evaluate(model, eval, metric);
  result.trajectory.push_back(accuracy);
  std::size_t next = 0;
  while (accuracy < target && next < report.entries.size()) {
    const std::string& layer = report.entries[next].layer;
    ++next;
    if (const Layer* l = model.find_layer(layer); !l || !l->quant.enabled) continue;
    set_layer_quantized(model, layer, false);
    result.skipped.push_back(layer);
    accuracy = evaluate(model, eval, metric);
    result.trajectory.push_back(accuracy);
  }
  result.final_accuracy = accuracy;
  result.reached = accuracy >= target;
  return result;
}

namespace {

std::string method_display(const CalibrationMethod& m) { return m.to_string(); }

}  // namespace

std::string PtqReport::serialize() const {
  std::ostringstream out;
  out << "report: ptq\n";
  out << "fp32_accuracy: " << kv::format_real(fp32_accuracy) << "\n";
  out << "methods: " << methods.size() << "\n";
  for (std::size_t i = 0; i < methods.size(); ++i) {
    const std::string p = "method." + std::to_string(i) + ".";
    out << p << "name: " << method_display(methods[i].method) << "\n";
    out << p << "accuracy: " << kv::format_real(methods[i].accuracy) << "\n";
    out << p << "relative_change: " << kv::format_real(methods[i].relative_change)
        << "\n";
    out << p << "degenerate: " << methods[i].degenerate.size() << "\n";
    for (std::size_t d = 0; d < methods[i].degenerate.size(); ++d) {
      out << p << "degenerate." << d << ": " << methods[i].degenerate[d] << "\n";
    }
  }
  out << "best_index: " << best_index << "\n";
  out << "best_method: " << method_display(methods[best_index].method) << "\n";
  return out.str();
}

PtqReport PtqReport::deserialize(const std::string& text) {
  const kv::Reader r = kv::Reader::from_text(text);
  require(r.get("report") == "ptq", ErrorCode::Io, "not a ptq report");
  PtqReport report;
  report.fp32_accuracy = r.get_real("fp32_accuracy");
  const std::size_t n = r.get_size("methods");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "method." + std::to_string(i) + ".";
    MethodResult m;
    m.method = CalibrationMethod::parse(r.get(p + "name"));
    m.accuracy = r.get_real(p + "accuracy");
    m.relative_change = r.get_real(p + "relative_change");
    const std::size_t deg = r.get_size(p + "degenerate");
    for (std::size_t d = 0; d < deg; ++d) {
      m.degenerate.push_back(r.get(p + "degenerate." + std::to_string(d)));
    }
    report.methods.push_back(std::move(m));
  }
  report.best_index = r.get_size("best_index");
  require(report.best_index < report.methods.size(), ErrorCode::Io,
          "ptq report best_index out of range");
  return report;
}

void PtqReport::save(const std::string& path) const { write_file(path, serialize()); }

PtqReport PtqReport::load(const std::string& path) {
  return deserialize(read_file(path));
}

std::string SensitivityReport::serialize() const {
  std::ostringstream out;
  out << "report: sensitivity\n";
  out << "baseline_fp32: " << kv::format_real(baseline_fp32) << "\n";
  out << "entries: " << entries.size() << "\n";
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const std::string p = "entry." + std::to_string(i) + ".";
    out << p << "layer: " << entries[i].layer << "\n";
    out << p << "accuracy: " << kv::format_real(entries[i].accuracy) << "\n";
  }
  return out.str();
}

SensitivityReport SensitivityReport::deserialize(const std::string& text) {
  const kv::Reader r = kv::Reader::from_text(text);
  require(r.get("report") == "sensitivity", ErrorCode::Io, "not a sensitivity report");
  SensitivityReport report;
  report.baseline_fp32 = r.get_real("baseline_fp32");
  const std::size_t n = r.get_size("entries");
  for (std::size_t i = 0; i < n; ++i) {
    const std::string p = "entry." + std::to_string(i) + ".";
    report.entries.push_back({r.get(p + "layer"), r.get_real(p + "accuracy")});
  }
  return report;
}

void SensitivityReport::save(const std::string& path) const {
  write_file(path, serialize());
}

SensitivityReport SensitivityReport::load(const std::string& path) {
  return deserialize(read_file(path));
}

std::string PartialResult::serialize() const {
  std::ostringstream out;
  out << "report: partial\n";
  out << "target: " << kv::format_real(target) << "\n";
  out << "reached: " << (reached ? 1 : 0) << "\n";
  out << "final_accuracy: " << kv::format_real(final_accuracy) << "\n";
  out << "skipped: " << skipped.size() << "\n";
  for (std::size_t i = 0; i < skipped.size(); ++i) {
    out << "skip." << i << ": " << skipped[i] << "\n";
  }
  out << "trajectory: " << trajectory.size() << "\n";
  for (std::size_t i = 0; i < trajectory.size(); ++i) {
    out << "trajectory." << i << ": " << kv::format_real(trajectory[i]) << "\n";
  }
  return out.str();
}

void PartialResult::save(const std::string& path) const {
  write_file(path, serialize());
}

}  // namespace quantkit
