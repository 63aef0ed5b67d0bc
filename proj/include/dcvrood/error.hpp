// Copyright 2026 The dcv-rood Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DCVROOD_ERROR_HPP_
#define DCVROOD_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace dcvrood {

enum class Errc {
  // data
  ManifestParse,
  DimensionMismatch,
  OrphanClass,
  NonFiniteValue,
  UnknownClass,
  // splitting
  InvalidK,
  EmptyDataset,
  TooFewGroups,
  ClassOverlap,
  NoStrataLevel,
  TaxonomyMismatch,
  KMismatch,
  SampleOverlap,
  // detectors
  InvalidGamma,
  InvalidTopM,
  KTooLarge,
  ZeroVector,
  SingularCovariance,
  ClassTooSmall,
  MissingSample,
  ExtraSample,
  // metrics / stats
  EmptyClass,
  TooFewSamples,
  ConstantInput,
  TiesInExactMode,
  ZeroVariance,
  DetectorMismatch,
  // harness
  ConfigError,
  InvalidArgument,
  Io,
};

constexpr std::string_view errc_name(Errc c) noexcept {
  switch (c) {
    case Errc::ManifestParse: return "ManifestParseError";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::OrphanClass: return "OrphanClass";
    case Errc::NonFiniteValue: return "NonFiniteValue";
    case Errc::UnknownClass: return "UnknownClass";
    case Errc::InvalidK: return "InvalidK";
    case Errc::EmptyDataset: return "EmptyDataset";
    case Errc::TooFewGroups: return "TooFewGroups";
    case Errc::ClassOverlap: return "ClassOverlap";
    case Errc::NoStrataLevel: return "NoStrataLevel";
    case Errc::TaxonomyMismatch: return "TaxonomyMismatch";
    case Errc::KMismatch: return "KMismatch";
    case Errc::SampleOverlap: return "SampleOverlap";
    case Errc::InvalidGamma: return "InvalidGamma";
    case Errc::InvalidTopM: return "InvalidTopM";
    case Errc::KTooLarge: return "KTooLarge";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::SingularCovariance: return "SingularCovariance";
    case Errc::ClassTooSmall: return "ClassTooSmall";
    case Errc::MissingSample: return "MissingSample";
    case Errc::ExtraSample: return "ExtraSample";
    case Errc::EmptyClass: return "EmptyClass";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::ConstantInput: return "ConstantInput";
    case Errc::TiesInExactMode: return "TiesInExactMode";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::DetectorMismatch: return "DetectorMismatch";
    case Errc::ConfigError: return "ConfigError";
    case Errc::InvalidArgument: return "InvalidArgument";
    case Errc::Io: return "IoError";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

  /// Input problems (bad files, bad arguments) as opposed to numerical
  /// failures discovered while running. The CLI maps these to exit code 1.
  bool is_validation() const noexcept {
    switch (code_) {
      case Errc::SingularCovariance:
      case Errc::ConstantInput:
      case Errc::ZeroVariance:
      case Errc::TiesInExactMode:
      case Errc::Io:
        return false;
      default:
        return true;
    }
  }

 private:
  Errc code_;
};

}  // namespace dcvrood

#endif  // DCVROOD_ERROR_HPP_
