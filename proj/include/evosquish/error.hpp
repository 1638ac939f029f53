// Copyright 2026 The evosquish Authors.
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

#ifndef EVOSQUISH_ERROR_HPP_
#define EVOSQUISH_ERROR_HPP_

#include <stdexcept>
#include <string>
#include <string_view>

namespace evosquish {

enum class ErrorCode {
  kInvalidClassCount,
  kShapeUnderflow,
  kInvalidArchitecture,
  kDegenerateArchitecture,
  kShapeMismatch,
  kAllDeadLayer,
  kInvalidEnvironmentFactor,
  kNumericOverflow,
  kInvalidLabel,
  kEmptyDataset,
  kTruncatedFile,
  kInvalidLabelByte,
  kEmptySubset,
  kMissingClassFolder,
  kUndecodableImage,
  kEmptySplit,
  kInvalidConfig,
  kFormat,
  kIo,
};

std::string_view ErrorName(ErrorCode code);

// Every failure surfaced by the library carries one of the codes above so the
// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(ErrorName(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace evosquish

#endif  // EVOSQUISH_ERROR_HPP_
