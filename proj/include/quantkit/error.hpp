// Copyright 2026 The quantkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace quantkit {

enum class ErrorCode {
  InvalidArgument,
  ShapeMismatch,
  DegenerateInput,
  MissingCalibration,
  Io,
  Diverged,
  Unreachable,
};

// All recoverable failures in the library are reported through this type.
// The C API translates the code into a qk_status and keeps the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace quantkit
