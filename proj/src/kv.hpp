// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0
//
// Internal "key: value" line helpers shared by the file formats.

#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "quantkit/error.hpp"

namespace quantkit::kv {

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class Reader {
 public:
  void parse_line(const std::string& line) {
    const std::size_t sep = line.find(": ");
    require(sep != std::string::npos, ErrorCode::Io, "bad manifest line '" + line + "'");
    entries_.emplace_back(line.substr(0, sep), line.substr(sep + 2));
  }

  // Parses every line of `text` (used for blob-free files).
  static Reader from_text(const std::string& text) {
    Reader r;
    std::size_t pos = 0;
    while (pos < text.size()) {
      std::size_t eol = text.find('\n', pos);
      if (eol == std::string::npos) eol = text.size();
      if (eol > pos) r.parse_line(text.substr(pos, eol - pos));
      pos = eol + 1;
    }
    return r;
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

  double get_real(const std::string& key) const {
    return std::strtod(get(key).c_str(), nullptr);
  }

  std::size_t get_size(const std::string& key) const { return std::stoull(get(key)); }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

}  // namespace quantkit::kv
