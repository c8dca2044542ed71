// Copyright 2026 The zorefine Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "zorefine/error.hpp"

namespace zorefine {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNotPsd: return "NotPSD";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kGradUnavailable: return "GradUnavailable";
    case ErrorCode::kActivationsUnavailable: return "ActivationsUnavailable";
    case ErrorCode::kActivationNoiseOnAnalyticObjective:
      return "ActivationNoiseOnAnalyticObjective";
    case ErrorCode::kBadM: return "BadM";
    case ErrorCode::kMissingLipschitzConstant: return "MissingLipschitzConstant";
    case ErrorCode::kStepsizeTooLarge: return "StepsizeTooLarge";
    case ErrorCode::kNotStationary: return "NotStationary";
    case ErrorCode::kStepsizeAboveCap: return "StepsizeAboveCap";
    case ErrorCode::kDomainExit: return "DomainExit";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kConfig: return "Config";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

Error Error::with_context(const std::string& context) const {
  return Error(code_, context + ": " + detail_);
}

}  // namespace zorefine
