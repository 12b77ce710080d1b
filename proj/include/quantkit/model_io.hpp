// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// On-disk formats. Both files start with a magic line, carry a UTF-8
// key-value manifest, and end in a little-endian binary blob of 32-bit
// floats (plus 32-bit labels for datasets). Writing is deterministic, so
// write -> read -> write round-trips byte-identically.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "quantkit/graph.hpp"
#include "quantkit/tensor.hpp"

namespace quantkit {

inline constexpr const char* kModelMagic = "QKMODEL1";
inline constexpr const char* kDataMagic = "QKDATA1";

std::string serialize_model(const Model& model);
Model deserialize_model(const std::string& bytes);
void save_model(const Model& model, const std::string& path);
Model load_model(const std::string& path);

// Labeled dataset: features stored per sample, int32 class labels.
struct Dataset {
  Shape feature_shape;  // per-sample shape
  Tensor features;      // (count, ...feature_shape)
  std::vector<std::int32_t> labels;

  std::size_t count() const { return labels.size(); }
  // Rows `indices` gathered into a batch tensor.
  Tensor batch(const std::vector<std::size_t>& indices) const;
  Tensor all_features() const { return features; }
};

std::string serialize_dataset(const Dataset& data);
Dataset deserialize_dataset(const std::string& bytes);
void save_dataset(const Dataset& data, const std::string& path);
Dataset load_dataset(const std::string& path);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& bytes);

}  // namespace quantkit
