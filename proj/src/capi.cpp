// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit.h"

#include <cstring>
#include <exception>
#include <string>
#include <vector>

#include "quantkit/autodiff.hpp"
#include "quantkit/error.hpp"
#include "quantkit/graph.hpp"
#include "quantkit/model_io.hpp"
#include "quantkit/train.hpp"
#include "quantkit/workflow.hpp"

using quantkit::CalibrationCache;
using quantkit::CalibrationMethod;
using quantkit::Dataset;
using quantkit::ErrorCode;
using quantkit::EvalMetric;
using quantkit::Model;

struct qk_model {
  Model model;
};

struct qk_dataset {
  Dataset data;
};

struct qk_calibration {
  CalibrationCache cache;
  std::vector<std::string> degenerate;
};

struct qk_ptq_report {
  quantkit::PtqReport report;
};

struct qk_sensitivity_report {
  quantkit::SensitivityReport report;
};

struct qk_partial_result {
  quantkit::PartialResult result;
};

namespace {

thread_local std::string g_last_error;

qk_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return QK_ERROR_INVALID_ARGUMENT;
    case ErrorCode::ShapeMismatch: return QK_ERROR_SHAPE_MISMATCH;
    case ErrorCode::DegenerateInput: return QK_ERROR_DEGENERATE;
    case ErrorCode::MissingCalibration: return QK_ERROR_MISSING_CALIBRATION;
    case ErrorCode::Io: return QK_ERROR_IO;
    case ErrorCode::Diverged: return QK_ERROR_DIVERGED;
    case ErrorCode::Unreachable: return QK_ERROR_UNREACHABLE;
  }
  return QK_ERROR_UNKNOWN;
}

template <typename F>
qk_status wrap(F&& body) {
  try {
    body();
    g_last_error.clear();
    return QK_OK;
  } catch (const quantkit::Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return QK_ERROR_UNKNOWN;
  } catch (...) {
    g_last_error = "unknown failure";
    return QK_ERROR_UNKNOWN;
  }
}

void check_arg(bool ok, const char* message) {
  quantkit::require(ok, ErrorCode::InvalidArgument, message);
}

std::vector<CalibrationMethod> parse_method_list(const char* csv) {
  check_arg(csv != nullptr && *csv != '\0', "empty method list");
  std::vector<CalibrationMethod> methods;
  const std::string text(csv);
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t comma = text.find(',', pos);
    if (comma == std::string::npos) comma = text.size();
    const std::string token = text.substr(pos, comma - pos);
    quantkit::require(!token.empty(), ErrorCode::InvalidArgument,
                      "empty method in list '" + text + "'");
    methods.push_back(CalibrationMethod::parse(token));
    pos = comma + 1;
    if (comma == text.size()) break;
  }
  return methods;
}

EvalMetric parse_metric(const char* metric) {
  return metric && *metric ? EvalMetric::parse(metric) : EvalMetric::top1();
}

}  // namespace

extern "C" {

const char* qk_version(void) { return "0.1.0"; }

const char* qk_status_name(qk_status status) {
  switch (status) {
    case QK_OK: return "ok";
    case QK_ERROR_INVALID_ARGUMENT: return "invalid argument";
    case QK_ERROR_SHAPE_MISMATCH: return "shape mismatch";
    case QK_ERROR_DEGENERATE: return "degenerate input";
    case QK_ERROR_MISSING_CALIBRATION: return "missing calibration";
    case QK_ERROR_IO: return "io error";
    case QK_ERROR_DIVERGED: return "diverged";
    case QK_ERROR_UNREACHABLE: return "unreachable";
    case QK_ERROR_UNKNOWN: break;
  }
  return "unknown error";
}

const char* qk_last_error(void) { return g_last_error.c_str(); }

/* ---- models ---- */

qk_status qk_model_load(const char* path, qk_model** out) {
  return wrap([&] {
    check_arg(path && out, "null argument");
    *out = new qk_model{quantkit::load_model(path)};
  });
}

qk_status qk_model_save(const qk_model* model, const char* path) {
  return wrap([&] {
    check_arg(model && path, "null argument");
    quantkit::save_model(model->model, path);
  });
}

qk_status qk_model_clone(const qk_model* model, qk_model** out) {
  return wrap([&] {
    check_arg(model && out, "null argument");
    *out = new qk_model{model->model};
  });
}

void qk_model_free(qk_model* model) { delete model; }

size_t qk_model_num_layers(const qk_model* model) {
  return model ? model->model.layers.size() : 0;
}

const char* qk_model_layer_name(const qk_model* model, size_t index) {
  if (!model || index >= model->model.layers.size()) return "";
  return model->model.layers[index].name.c_str();
}

const char* qk_model_layer_kind(const qk_model* model, size_t index) {
  if (!model || index >= model->model.layers.size()) return "";
  thread_local std::string kind;
  kind = quantkit::layer_kind_name(model->model.layers[index].kind);
  return kind.c_str();
}

int qk_model_layer_quantizable(const qk_model* model, size_t index) {
  if (!model || index >= model->model.layers.size()) return 0;
  return model->model.layers[index].quantizable() ? 1 : 0;
}

int qk_model_layer_quantized(const qk_model* model, size_t index) {
  if (!model || index >= model->model.layers.size()) return 0;
  return model->model.layers[index].quant.enabled ? 1 : 0;
}

qk_status qk_model_set_all_quantized(qk_model* model, int enabled) {
  return wrap([&] {
    check_arg(model != nullptr, "null model");
    quantkit::set_all_quantized(model->model, enabled != 0);
  });
}

qk_status qk_model_set_layer_quantized(qk_model* model, const char* layer, int enabled) {
  return wrap([&] {
    check_arg(model && layer, "null argument");
    quantkit::set_layer_quantized(model->model, layer, enabled != 0);
  });
}

qk_status qk_model_clip_gelu(qk_model* model, double limit) {
  return wrap([&] {
    check_arg(model != nullptr, "null model");
    model->model = quantkit::rewrite_gelu_clipped(model->model, limit);
  });
}

qk_status qk_model_fold_batch_norm(qk_model* model) {
  return wrap([&] {
    check_arg(model != nullptr, "null model");
    model->model = quantkit::fold_batch_norm(model->model);
  });
}

qk_status qk_model_attach_calibration(qk_model* model,
                                      const qk_calibration* calibration) {
  return wrap([&] {
    check_arg(model && calibration, "null argument");
    quantkit::attach_calibration(model->model, calibration->cache);
    quantkit::prepare_weight_params(model->model);
  });
}

qk_status qk_model_export_calibration(const qk_model* model, qk_calibration** out) {
  return wrap([&] {
    check_arg(model && out, "null argument");
    *out = new qk_calibration{quantkit::export_calibration(model->model), {}};
  });
}

/* ---- datasets ---- */

qk_status qk_dataset_load(const char* path, qk_dataset** out) {
  return wrap([&] {
    check_arg(path && out, "null argument");
    *out = new qk_dataset{quantkit::load_dataset(path)};
  });
}

void qk_dataset_free(qk_dataset* dataset) { delete dataset; }

size_t qk_dataset_size(const qk_dataset* dataset) {
  return dataset ? dataset->data.count() : 0;
}

/* ---- calibration ---- */

qk_status qk_calibrate(const qk_model* model, const qk_dataset* calib_data,
                       const char* method, double fraction, int num_bins,
                       qk_calibration** out) {
  return wrap([&] {
    check_arg(model && calib_data && method && out, "null argument");
    CalibrationMethod m;
    const std::string name(method);
    if (name == "percentile") {
      m = CalibrationMethod::percentile(fraction);
      check_arg(fraction > 0.0 && fraction <= 1.0, "percentile fraction out of (0, 1]");
    } else {
      m = CalibrationMethod::parse(name);
    }
    auto result = quantkit::calibrate_activations(model->model, calib_data->data, m,
                                                  num_bins > 0 ? num_bins
                                                               : quantkit::kDefaultNumBins);
    *out = new qk_calibration{std::move(result.cache), std::move(result.degenerate)};
  });
}

qk_status qk_calibration_load(const char* path, qk_calibration** out) {
  return wrap([&] {
    check_arg(path && out, "null argument");
    *out = new qk_calibration{CalibrationCache::load(path), {}};
  });
}

qk_status qk_calibration_save(const qk_calibration* calibration, const char* path) {
  return wrap([&] {
    check_arg(calibration && path, "null argument");
    calibration->cache.save(path);
  });
}

size_t qk_calibration_size(const qk_calibration* calibration) {
  return calibration ? calibration->cache.size() : 0;
}

size_t qk_calibration_num_degenerate(const qk_calibration* calibration) {
  return calibration ? calibration->degenerate.size() : 0;
}

const char* qk_calibration_degenerate_name(const qk_calibration* calibration,
                                           size_t index) {
  if (!calibration || index >= calibration->degenerate.size()) return "";
  return calibration->degenerate[index].c_str();
}

void qk_calibration_free(qk_calibration* calibration) { delete calibration; }

/* ---- evaluation ---- */

qk_status qk_evaluate(const qk_model* model, const qk_dataset* data, const char* metric,
                      double* accuracy) {
  return wrap([&] {
    check_arg(model && data && accuracy, "null argument");
    *accuracy = quantkit::evaluate(model->model, data->data, parse_metric(metric));
  });
}

/* ---- post-training quantization ---- */

qk_status qk_run_ptq(const qk_model* model, const qk_dataset* calib_data,
                     const qk_dataset* eval_data, const char* methods,
                     const char* metric, int num_bins, qk_ptq_report** out) {
  return wrap([&] {
    check_arg(model && calib_data && eval_data && out, "null argument");
    const auto method_list = parse_method_list(methods);
    *out = new qk_ptq_report{quantkit::run_ptq(
        model->model, calib_data->data, eval_data->data, method_list,
        parse_metric(metric), num_bins > 0 ? num_bins : quantkit::kDefaultNumBins)};
  });
}

double qk_ptq_report_fp32_accuracy(const qk_ptq_report* report) {
  return report ? report->report.fp32_accuracy : 0.0;
}

size_t qk_ptq_report_num_methods(const qk_ptq_report* report) {
  return report ? report->report.methods.size() : 0;
}

const char* qk_ptq_report_method_name(const qk_ptq_report* report, size_t index) {
  if (!report || index >= report->report.methods.size()) return "";
  thread_local std::string name;
  name = report->report.methods[index].method.to_string();
  return name.c_str();
}

double qk_ptq_report_accuracy(const qk_ptq_report* report, size_t index) {
  if (!report || index >= report->report.methods.size()) return 0.0;
  return report->report.methods[index].accuracy;
}

double qk_ptq_report_relative_change(const qk_ptq_report* report, size_t index) {
  if (!report || index >= report->report.methods.size()) return 0.0;
  return report->report.methods[index].relative_change;
}

size_t qk_ptq_report_best_index(const qk_ptq_report* report) {
  return report ? report->report.best_index : 0;
}

qk_status qk_ptq_report_calibration(const qk_ptq_report* report, size_t index,
                                    qk_calibration** out) {
  return wrap([&] {
    check_arg(report && out, "null argument");
    check_arg(index < report->report.methods.size(), "method index out of range");
    const auto& method = report->report.methods[index];
    *out = new qk_calibration{method.cache, method.degenerate};
  });
}

qk_status qk_ptq_report_save(const qk_ptq_report* report, const char* path) {
  return wrap([&] {
    check_arg(report && path, "null argument");
    report->report.save(path);
  });
}

qk_status qk_ptq_report_load(const char* path, qk_ptq_report** out) {
  return wrap([&] {
    check_arg(path && out, "null argument");
    *out = new qk_ptq_report{quantkit::PtqReport::load(path)};
  });
}

void qk_ptq_report_free(qk_ptq_report* report) { delete report; }

/* ---- sensitivity analysis ---- */

qk_status qk_sensitivity_scan(const qk_model* model, const qk_dataset* eval_data,
                              const qk_calibration* calibration, const char* metric,
                              int threads, qk_sensitivity_report** out) {
  return wrap([&] {
    check_arg(model && eval_data && calibration && out, "null argument");
    *out = new qk_sensitivity_report{
        quantkit::sensitivity_scan(model->model, eval_data->data, calibration->cache,
                                   parse_metric(metric), threads)};
  });
}

double qk_sensitivity_report_baseline(const qk_sensitivity_report* report) {
  return report ? report->report.baseline_fp32 : 0.0;
}

size_t qk_sensitivity_report_size(const qk_sensitivity_report* report) {
  return report ? report->report.entries.size() : 0;
}

const char* qk_sensitivity_report_layer(const qk_sensitivity_report* report,
                                        size_t index) {
  if (!report || index >= report->report.entries.size()) return "";
  return report->report.entries[index].layer.c_str();
}

double qk_sensitivity_report_accuracy(const qk_sensitivity_report* report,
                                      size_t index) {
  if (!report || index >= report->report.entries.size()) return 0.0;
  return report->report.entries[index].accuracy;
}

qk_status qk_sensitivity_report_save(const qk_sensitivity_report* report,
                                     const char* path) {
  return wrap([&] {
    check_arg(report && path, "null argument");
    report->report.save(path);
  });
}

qk_status qk_sensitivity_report_load(const char* path, qk_sensitivity_report** out) {
  return wrap([&] {
    check_arg(path && out, "null argument");
    *out = new qk_sensitivity_report{quantkit::SensitivityReport::load(path)};
  });
}

void qk_sensitivity_report_free(qk_sensitivity_report* report) { delete report; }

/* ---- partial quantization ---- */

qk_status qk_partial_quantize(qk_model* model, const qk_dataset* eval_data,
                              const qk_calibration* calibration,
                              const qk_sensitivity_report* sensitivity,
                              double target_accuracy, const char* metric,
                              qk_partial_result** out) {
  return wrap([&] {
    check_arg(model && eval_data && calibration && sensitivity && out, "null argument");
    *out = new qk_partial_result{quantkit::partial_quantize(
        model->model, eval_data->data, calibration->cache, sensitivity->report,
        target_accuracy, parse_metric(metric))};
  });
}

int qk_partial_result_reached(const qk_partial_result* result) {
  return result && result->result.reached ? 1 : 0;
}

double qk_partial_result_final_accuracy(const qk_partial_result* result) {
  return result ? result->result.final_accuracy : 0.0;
}

size_t qk_partial_result_num_skipped(const qk_partial_result* result) {
  return result ? result->result.skipped.size() : 0;
}

const char* qk_partial_result_skipped_layer(const qk_partial_result* result,
                                            size_t index) {
  if (!result || index >= result->result.skipped.size()) return "";
  return result->result.skipped[index].c_str();
}

size_t qk_partial_result_trajectory_size(const qk_partial_result* result) {
  return result ? result->result.trajectory.size() : 0;
}

double qk_partial_result_trajectory(const qk_partial_result* result, size_t index) {
  if (!result || index >= result->result.trajectory.size()) return 0.0;
  return result->result.trajectory[index];
}

qk_status qk_partial_result_save(const qk_partial_result* result, const char* path) {
  return wrap([&] {
    check_arg(result && path, "null argument");
    result->result.save(path);
  });
}

void qk_partial_result_free(qk_partial_result* result) { delete result; }

/* ---- quantization-aware training ---- */

void qk_train_config_default(qk_train_config* config) {
  if (!config) return;
  config->epochs = 0;
  config->batch_size = 32;
  config->learning_rate = 0.01;
  config->momentum = 0.9;
  config->seed = 0;
  config->learn_ranges = 0;
  config->range_learning_rate = 0.0;
  config->range_weight_decay = 1e-4;
}

qk_status qk_train(qk_model* model, const qk_dataset* train_data,
                   const qk_train_config* config, double* final_loss) {
  return wrap([&] {
    check_arg(model && train_data && config, "null argument");
    quantkit::TrainConfig c;
    c.epochs = config->epochs;
    c.batch_size = static_cast<std::size_t>(config->batch_size > 0 ? config->batch_size : 32);
    c.learning_rate = config->learning_rate;
    c.momentum = config->momentum;
    c.seed = config->seed;
    c.learn_ranges = config->learn_ranges != 0;
    c.range_learning_rate = config->range_learning_rate;
    c.range_weight_decay = config->range_weight_decay;
    quantkit::TrainResult result = quantkit::train(model->model, train_data->data, c);
    model->model = std::move(result.model);
    if (final_loss) *final_loss = result.final_loss;
  });
}

}  // extern "C"
