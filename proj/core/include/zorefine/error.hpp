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

#ifndef ZOREFINE_ERROR_HPP_
#define ZOREFINE_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace zorefine {

enum class ErrorCode {
  kInvalidArgument,
  kLengthMismatch,
  kShapeMismatch,
  kNotPsd,
  kNonFiniteLoss,
  kGradUnavailable,
  kActivationsUnavailable,
  kActivationNoiseOnAnalyticObjective,
  kBadM,
  kMissingLipschitzConstant,
  kStepsizeTooLarge,
  kNotStationary,
  kStepsizeAboveCap,
  kDomainExit,
  kIo,
  kConfig,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }
  /// The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }
  /// Same code, message prefixed with `context` (e.g. a pipeline stage).
  Error with_context(const std::string& context) const;

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace zorefine

#endif  // ZOREFINE_ERROR_HPP_
