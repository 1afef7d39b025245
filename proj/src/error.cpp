// Copyright 2026 The sketchfield Authors
// SPDX-License-Identifier: Apache-2.0

#include "skf/error.hpp"

namespace skf {

const char* errc_name(Errc code) {
  switch (code) {
    case Errc::kNoOverlap: return "NoOverlap";
    case Errc::kEmptySketchSet: return "EmptySketchSet";
    case Errc::kBadMagic: return "BadMagic";
    case Errc::kVersionMismatch: return "VersionMismatch";
    case Errc::kTruncatedFile: return "TruncatedFile";
    case Errc::kChecksumMismatch: return "ChecksumMismatch";
    case Errc::kNonFiniteGradient: return "NonFiniteGradient";
    case Errc::kConfigError: return "ConfigError";
    case Errc::kEmptyIntersection: return "EmptyIntersection";
    case Errc::kBehindCamera: return "BehindCamera";
    case Errc::kProviderTimeout: return "ProviderTimeout";
    case Errc::kShapeMismatch: return "ShapeMismatch";
    case Errc::kNonFinite: return "NonFinite";
    case Errc::kHandshakeVersionError: return "HandshakeVersionError";
    case Errc::kMalformedFrame: return "MalformedFrame";
    case Errc::kNonFiniteLoss: return "NonFiniteLoss";
    case Errc::kIoError: return "IoError";
    case Errc::kParseError: return "ParseError";
    case Errc::kCancelled: return "Cancelled";
    case Errc::kOpenCurve: return "OpenCurve";
  }
  return "Unknown";
}

}  // namespace skf
