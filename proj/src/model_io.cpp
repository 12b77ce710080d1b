// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "quantkit/model_io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "quantkit/error.hpp"

namespace quantkit {

namespace {

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void append_f32_le(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

void append_i32_le(std::string& out, std::int32_t v) {
  append_f32_le(out, std::bit_cast<float>(static_cast<std::uint32_t>(v)));
}

float read_f32_le(const std::string& bytes, std::size_t offset) {
  std::uint32_t bits = 0;
  for (int i = 3; i >= 0; --i) {
    bits = (bits << 8) | static_cast<std::uint8_t>(bytes[offset + static_cast<std::size_t>(i)]);
  }
  return std::bit_cast<float>(bits);
}

std::int32_t read_i32_le(const std::string& bytes, std::size_t offset) {
  return std::bit_cast<std::int32_t>(
      std::bit_cast<std::uint32_t>(read_f32_le(bytes, offset)));
}

std::string shape_csv(const Shape& shape) {
  std::string out;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(shape[i]);
  }
  return out;
}

Shape parse_shape_csv(const std::string& text) {
  Shape shape;
  std::istringstream in(text);
  std::string token;
  while (std::getline(in, token, ',')) {
    require(!token.empty(), ErrorCode::Io, "bad shape '" + text + "'");
    shape.push_back(static_cast<std::size_t>(std::stoull(token)));
  }
  require(!shape.empty(), ErrorCode::Io, "bad shape '" + text + "'");
  return shape;
}

// Manifest section: "key: value" lines in file order with lookup.
class Manifest {
 public:
  void parse_line(const std::string& line) {
    const std::size_t sep = line.find(": ");
    require(sep != std::string::npos, ErrorCode::Io, "bad manifest line '" + line + "'");
    entries_.emplace_back(line.substr(0, sep), line.substr(sep + 2));
  }

  const std::string& get(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    fail(ErrorCode::Io, "manifest key '" + key + "' missing");
  }

  std::string get_or(const std::string& key, const std::string& fallback) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    return fallback;
  }

  bool has(const std::string& key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return true;
    }
    return false;
  }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

struct SplitFile {
  Manifest manifest;
  std::string blob;
};

// Common layout: magic line, manifest lines, "blob_bytes: N", "BLOB", blob.
SplitFile parse_container(const std::string& bytes, const char* magic) {
  SplitFile out;
  std::size_t pos = 0;
  auto next_line = [&]() {
    const std::size_t eol = bytes.find('\n', pos);
    require(eol != std::string::npos, ErrorCode::Io, "truncated file");
    std::string line = bytes.substr(pos, eol - pos);
    pos = eol + 1;
    return line;
  };
  require(next_line() == magic, ErrorCode::Io,
          std::string("bad magic, expected ") + magic);
  std::size_t blob_bytes = 0;
  while (true) {
    const std::string line = next_line();
    if (line == "BLOB") break;
    out.manifest.parse_line(line);
    if (line.rfind("blob_bytes: ", 0) == 0) {
      blob_bytes = std::stoull(line.substr(12));
    }
  }
  require(bytes.size() - pos == blob_bytes, ErrorCode::Io,
          "blob size mismatch: header says " + std::to_string(blob_bytes) +
              ", file holds " + std::to_string(bytes.size() - pos));
  out.blob = bytes.substr(pos);
  return out;
}

}  // namespace

std::string serialize_model(const Model& model) {
  std::ostringstream text;
  text << kModelMagic << "\n";
  text << "input_shape: " << shape_csv(model.input_shape) << "\n";
  text << "layers: " << model.layers.size() << "\n";
  for (std::size_t i = 0; i < model.layers.size(); ++i) {
    const Layer& l = model.layers[i];
    const std::string p = "layer." + std::to_string(i) + ".";
    text << p << "kind: " << layer_kind_name(l.kind) << "\n";
    text << p << "name: " << l.name << "\n";
    switch (l.kind) {
      case LayerKind::Linear:
        text << p << "in_features: " << l.in_features << "\n";
        text << p << "out_features: " << l.out_features << "\n";
        break;
      case LayerKind::Conv2d:
        text << p << "out_channels: " << l.out_channels << "\n";
        text << p << "in_channels: " << l.in_channels << "\n";
        text << p << "kernel: " << l.kernel_h << "," << l.kernel_w << "\n";
        text << p << "stride: " << l.conv.stride << "\n";
        text << p << "padding: " << l.conv.padding << "\n";
        break;
      case LayerKind::BatchNorm:
        text << p << "channels: " << l.channels << "\n";
        text << p << "epsilon: " << format_real(l.epsilon) << "\n";
        text << p << "gamma: " << l.gamma_name << "\n";
        text << p << "beta: " << l.beta_name << "\n";
        text << p << "mean: " << l.mean_name << "\n";
        text << p << "var: " << l.var_name << "\n";
        break;
      case LayerKind::ClippedGELU:
        text << p << "limit: " << format_real(l.clip_limit) << "\n";
        break;
      default:
        break;
    }
    if (l.quantizable()) {
      text << p << "weight: " << l.weight_name << "\n";
      if (!l.bias_name.empty()) text << p << "bias: " << l.bias_name << "\n";
      text << p << "quantized: " << (l.quant.enabled ? 1 : 0) << "\n";
      text << p << "per_channel: " << (l.quant.per_channel_weights ? 1 : 0) << "\n";
    }
  }

  std::string blob;
  std::size_t index = 0;
  text << "tensors: " << model.weights.size() << "\n";
  for (const auto& [name, tensor] : model.weights) {
    const std::string p = "tensor." + std::to_string(index++) + ".";
    text << p << "name: " << name << "\n";
    text << p << "shape: " << shape_csv(tensor.shape()) << "\n";
    text << p << "offset: " << blob.size() << "\n";
    for (double v : tensor.values()) append_f32_le(blob, static_cast<float>(v));
  }
  text << "blob_bytes: " << blob.size() << "\n";
  text << "BLOB\n";
  return text.str() + blob;
}

Model deserialize_model(const std::string& bytes) {
  const SplitFile file = parse_container(bytes, kModelMagic);
  const Manifest& m = file.manifest;

  Model model;
  model.input_shape = parse_shape_csv(m.get("input_shape"));
  const std::size_t num_layers = std::stoull(m.get("layers"));
  for (std::size_t i = 0; i < num_layers; ++i) {
    const std::string p = "layer." + std::to_string(i) + ".";
    Layer l;
    l.kind = layer_kind_from_name(m.get(p + "kind"));
    l.name = m.get(p + "name");
    switch (l.kind) {
      case LayerKind::Linear:
        l.in_features = std::stoull(m.get(p + "in_features"));
        l.out_features = std::stoull(m.get(p + "out_features"));
        break;
      case LayerKind::Conv2d: {
        l.out_channels = std::stoull(m.get(p + "out_channels"));
        l.in_channels = std::stoull(m.get(p + "in_channels"));
        const Shape k = parse_shape_csv(m.get(p + "kernel"));
        require(k.size() == 2, ErrorCode::Io, "bad kernel spec");
        l.kernel_h = k[0];
        l.kernel_w = k[1];
        l.conv.stride = std::stoull(m.get(p + "stride"));
        l.conv.padding = std::stoull(m.get(p + "padding"));
        break;
      }
      case LayerKind::BatchNorm:
        l.channels = std::stoull(m.get(p + "channels"));
        l.epsilon = std::strtod(m.get(p + "epsilon").c_str(), nullptr);
        l.gamma_name = m.get(p + "gamma");
        l.beta_name = m.get(p + "beta");
        l.mean_name = m.get(p + "mean");
        l.var_name = m.get(p + "var");
        break;
      case LayerKind::ClippedGELU:
        l.clip_limit = std::strtod(m.get(p + "limit").c_str(), nullptr);
        break;
      default:
        break;
    }
    if (l.quantizable()) {
      l.weight_name = m.get(p + "weight");
      l.bias_name = m.get_or(p + "bias", "");
      l.quant.enabled = m.get(p + "quantized") == "1";
      l.quant.per_channel_weights = m.get(p + "per_channel") == "1";
    }
    model.layers.push_back(std::move(l));
  }

  const std::size_t num_tensors = std::stoull(m.get("tensors"));
  for (std::size_t i = 0; i < num_tensors; ++i) {
    const std::string p = "tensor." + std::to_string(i) + ".";
    const std::string name = m.get(p + "name");
    const Shape shape = parse_shape_csv(m.get(p + "shape"));
    const std::size_t offset = std::stoull(m.get(p + "offset"));
    const std::size_t count = shape_size(shape);
    require(offset + 4 * count <= file.blob.size(), ErrorCode::Io,
            "tensor '" + name + "' overruns blob");
    std::vector<double> data(count);
    for (std::size_t k = 0; k < count; ++k) {
      data[k] = static_cast<double>(read_f32_le(file.blob, offset + 4 * k));
    }
    model.weights.emplace(name, Tensor(shape, std::move(data)));
  }
  model.validate();
  return model;
}

void save_model(const Model& model, const std::string& path) {
  write_file(path, serialize_model(model));
}

Model load_model(const std::string& path) { return deserialize_model(read_file(path)); }

Tensor Dataset::batch(const std::vector<std::size_t>& indices) const {
  const std::size_t row = shape_size(feature_shape);
  Shape shape;
  shape.push_back(indices.size());
  shape.insert(shape.end(), feature_shape.begin(), feature_shape.end());
  Tensor out(shape);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    require(indices[i] < count(), ErrorCode::InvalidArgument, "batch index out of range");
    for (std::size_t k = 0; k < row; ++k) out[i * row + k] = features[indices[i] * row + k];
  }
  return out;
}

std::string serialize_dataset(const Dataset& data) {
  require(data.features.size() == data.count() * shape_size(data.feature_shape),
          ErrorCode::ShapeMismatch, "dataset features do not match count");
  std::ostringstream text;
  text << kDataMagic << "\n";
  text << "count: " << data.count() << "\n";
  text << "feature_shape: " << shape_csv(data.feature_shape) << "\n";
  std::string blob;
  for (double v : data.features.values()) append_f32_le(blob, static_cast<float>(v));
  for (std::int32_t label : data.labels) append_i32_le(blob, label);
  text << "blob_bytes: " << blob.size() << "\n";
  text << "BLOB\n";
  return text.str() + blob;
}

Dataset deserialize_dataset(const std::string& bytes) {
  const SplitFile file = parse_container(bytes, kDataMagic);
  Dataset data;
  const std::size_t count = std::stoull(file.manifest.get("count"));
  data.feature_shape = parse_shape_csv(file.manifest.get("feature_shape"));
  const std::size_t row = shape_size(data.feature_shape);
  require(file.blob.size() == 4 * count * row + 4 * count, ErrorCode::Io,
          "dataset blob size mismatch");
  Shape shape;
  shape.push_back(count);
  shape.insert(shape.end(), data.feature_shape.begin(), data.feature_shape.end());
  std::vector<double> values(count * row);
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(read_f32_le(file.blob, 4 * i));
  }
  data.features = Tensor(shape, std::move(values));
  data.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    data.labels[i] = read_i32_le(file.blob, 4 * count * row + 4 * i);
  }
  return data;
}

void save_dataset(const Dataset& data, const std::string& path) {
  write_file(path, serialize_dataset(data));
}

Dataset load_dataset(const std::string& path) {
  return deserialize_dataset(read_file(path));
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorCode::Io, "cannot read '" + path + "'");
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorCode::Io, "cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  require(out.good(), ErrorCode::Io, "failed writing '" + path + "'");
}

}  // namespace quantkit
