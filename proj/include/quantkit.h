/*
 * Copyright 2026 The quantkit Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C API of the quantkit shared library. All objects are opaque handles
 * created and destroyed by the library; every fallible call returns a
 * qk_status, and qk_last_error() describes the most recent failure on the
 * calling thread. Strings returned by accessors stay owned by the handle
 * they came from.
 */

#ifndef QUANTKIT_H
#define QUANTKIT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QK_API __declspec(dllexport)
#else
#define QK_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum qk_status {
  QK_OK = 0,
  QK_ERROR_INVALID_ARGUMENT = 1,
  QK_ERROR_SHAPE_MISMATCH = 2,
  QK_ERROR_DEGENERATE = 3,
  QK_ERROR_MISSING_CALIBRATION = 4,
  QK_ERROR_IO = 5,
  QK_ERROR_DIVERGED = 6,
  QK_ERROR_UNREACHABLE = 7,
  QK_ERROR_UNKNOWN = 8
} qk_status;

typedef struct qk_model qk_model;
typedef struct qk_dataset qk_dataset;
typedef struct qk_calibration qk_calibration;
typedef struct qk_ptq_report qk_ptq_report;
typedef struct qk_sensitivity_report qk_sensitivity_report;
typedef struct qk_partial_result qk_partial_result;

QK_API const char* qk_version(void);
QK_API const char* qk_status_name(qk_status status);
/* Message for the last failing call on this thread; empty string if none. */
QK_API const char* qk_last_error(void);

/* ---- models ---- */
QK_API qk_status qk_model_load(const char* path, qk_model** out);
QK_API qk_status qk_model_save(const qk_model* model, const char* path);
QK_API qk_status qk_model_clone(const qk_model* model, qk_model** out);
QK_API void qk_model_free(qk_model* model);

QK_API size_t qk_model_num_layers(const qk_model* model);
QK_API const char* qk_model_layer_name(const qk_model* model, size_t index);
QK_API const char* qk_model_layer_kind(const qk_model* model, size_t index);
QK_API int qk_model_layer_quantizable(const qk_model* model, size_t index);
QK_API int qk_model_layer_quantized(const qk_model* model, size_t index);

QK_API qk_status qk_model_set_all_quantized(qk_model* model, int enabled);
QK_API qk_status qk_model_set_layer_quantized(qk_model* model, const char* layer,
                                              int enabled);
/* Replace GELU layers with GELU clipped at `limit` (e.g. 10). */
QK_API qk_status qk_model_clip_gelu(qk_model* model, double limit);
QK_API qk_status qk_model_fold_batch_norm(qk_model* model);
QK_API qk_status qk_model_attach_calibration(qk_model* model,
                                             const qk_calibration* calibration);

/* ---- datasets ---- */
QK_API qk_status qk_dataset_load(const char* path, qk_dataset** out);
QK_API void qk_dataset_free(qk_dataset* dataset);
QK_API size_t qk_dataset_size(const qk_dataset* dataset);

/* ---- calibration ---- */
/* method: "max", "entropy" or "percentile"; fraction applies to percentile. */
QK_API qk_status qk_calibrate(const qk_model* model, const qk_dataset* calib_data,
                              const char* method, double fraction, int num_bins,
                              qk_calibration** out);
QK_API qk_status qk_calibration_load(const char* path, qk_calibration** out);
QK_API qk_status qk_calibration_save(const qk_calibration* calibration,
                                     const char* path);
QK_API size_t qk_calibration_size(const qk_calibration* calibration);
/* Tensors that could not be calibrated (all-zero activations). */
QK_API size_t qk_calibration_num_degenerate(const qk_calibration* calibration);
QK_API const char* qk_calibration_degenerate_name(const qk_calibration* calibration,
                                                  size_t index);
QK_API void qk_calibration_free(qk_calibration* calibration);

/* ---- evaluation ---- */
/* metric: "top1" or "mse@<threshold>". */
QK_API qk_status qk_evaluate(const qk_model* model, const qk_dataset* data,
                             const char* metric, double* accuracy);

/* ---- post-training quantization ---- */
/* methods: comma-separated, e.g. "max,entropy,percentile=0.9999". */
QK_API qk_status qk_run_ptq(const qk_model* model, const qk_dataset* calib_data,
                            const qk_dataset* eval_data, const char* methods,
                            const char* metric, int num_bins, qk_ptq_report** out);
QK_API double qk_ptq_report_fp32_accuracy(const qk_ptq_report* report);
QK_API size_t qk_ptq_report_num_methods(const qk_ptq_report* report);
QK_API const char* qk_ptq_report_method_name(const qk_ptq_report* report, size_t index);
QK_API double qk_ptq_report_accuracy(const qk_ptq_report* report, size_t index);
QK_API double qk_ptq_report_relative_change(const qk_ptq_report* report, size_t index);
QK_API size_t qk_ptq_report_best_index(const qk_ptq_report* report);
/* Calibration computed for method `index`; caller frees the returned handle.
 * Only available on reports produced by qk_run_ptq in this process. */
QK_API qk_status qk_ptq_report_calibration(const qk_ptq_report* report, size_t index,
                                           qk_calibration** out);
QK_API qk_status qk_ptq_report_save(const qk_ptq_report* report, const char* path);
QK_API qk_status qk_ptq_report_load(const char* path, qk_ptq_report** out);
QK_API void qk_ptq_report_free(qk_ptq_report* report);

/* ---- sensitivity analysis ---- */
QK_API qk_status qk_sensitivity_scan(const qk_model* model, const qk_dataset* eval_data,
                                     const qk_calibration* calibration,
                                     const char* metric, int threads,
                                     qk_sensitivity_report** out);
QK_API double qk_sensitivity_report_baseline(const qk_sensitivity_report* report);
QK_API size_t qk_sensitivity_report_size(const qk_sensitivity_report* report);
QK_API const char* qk_sensitivity_report_layer(const qk_sensitivity_report* report,
                                               size_t index);
QK_API double qk_sensitivity_report_accuracy(const qk_sensitivity_report* report,
                                             size_t index);
QK_API qk_status qk_sensitivity_report_save(const qk_sensitivity_report* report,
                                            const char* path);
QK_API qk_status qk_sensitivity_report_load(const char* path,
                                            qk_sensitivity_report** out);
QK_API void qk_sensitivity_report_free(qk_sensitivity_report* report);

/* ---- partial quantization ---- */
/* Mutates `model` into its final (partially quantized) configuration. */
QK_API qk_status qk_partial_quantize(qk_model* model, const qk_dataset* eval_data,
                                     const qk_calibration* calibration,
                                     const qk_sensitivity_report* sensitivity,
                                     double target_accuracy, const char* metric,
                                     qk_partial_result** out);
QK_API int qk_partial_result_reached(const qk_partial_result* result);
QK_API double qk_partial_result_final_accuracy(const qk_partial_result* result);
QK_API size_t qk_partial_result_num_skipped(const qk_partial_result* result);
QK_API const char* qk_partial_result_skipped_layer(const qk_partial_result* result,
                                                   size_t index);
QK_API size_t qk_partial_result_trajectory_size(const qk_partial_result* result);
QK_API double qk_partial_result_trajectory(const qk_partial_result* result,
                                           size_t index);
QK_API qk_status qk_partial_result_save(const qk_partial_result* result,
                                        const char* path);
QK_API void qk_partial_result_free(qk_partial_result* result);

/* ---- quantization-aware training ---- */
typedef struct qk_train_config {
  int epochs;
  int batch_size;
  double learning_rate;
  double momentum;
  uint64_t seed;
  int learn_ranges;            /* nonzero: PACT-style learned activation ranges */
  double range_learning_rate;  /* 0 uses learning_rate */
  double range_weight_decay;
} qk_train_config;

QK_API void qk_train_config_default(qk_train_config* config);
/* Fine-tunes `model` in place; final mean loss is written to *final_loss
 * when non-NULL. */
QK_API qk_status qk_train(qk_model* model, const qk_dataset* train_data,
                          const qk_train_config* config, double* final_loss);

/* Write the model's calibrated activation ranges back out as a cache. */
QK_API qk_status qk_model_export_calibration(const qk_model* model,
                                             qk_calibration** out);

#ifdef __cplusplus
}
#endif

#endif /* QUANTKIT_H */
