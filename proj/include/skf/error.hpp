// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace skf {

enum class Errc {
  kNoOverlap,
  kEmptySketchSet,
  kBadMagic,
  kVersionMismatch,
  kTruncatedFile,
  kChecksumMismatch,
  kNonFiniteGradient,
  kConfigError,
  kEmptyIntersection,
  kBehindCamera,
  kProviderTimeout,
  kShapeMismatch,
  kNonFinite,
  kHandshakeVersionError,
  kMalformedFrame,
  kNonFiniteLoss,
  kIoError,
  kParseError,
  kCancelled,
  kOpenCurve,
};

const char* errc_name(Errc code);

// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace skf
