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

#include "evosquish/error.hpp"

namespace evosquish {

std::string_view ErrorName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidClassCount: return "InvalidClassCount";
    case ErrorCode::kShapeUnderflow: return "ShapeUnderflow";
    case ErrorCode::kInvalidArchitecture: return "InvalidArchitecture";
    case ErrorCode::kDegenerateArchitecture: return "DegenerateArchitecture";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kAllDeadLayer: return "AllDeadLayer";
    case ErrorCode::kInvalidEnvironmentFactor: return "InvalidEnvironmentFactor";
    case ErrorCode::kNumericOverflow: return "NumericOverflow";
    case ErrorCode::kInvalidLabel: return "InvalidLabel";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kTruncatedFile: return "TruncatedFile";
    case ErrorCode::kInvalidLabelByte: return "InvalidLabelByte";
    case ErrorCode::kEmptySubset: return "EmptySubset";
    case ErrorCode::kMissingClassFolder: return "MissingClassFolder";
    case ErrorCode::kUndecodableImage: return "UndecodableImage";
    case ErrorCode::kEmptySplit: return "EmptySplit";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kIo: return "IoError";
  }
  return "UnknownError";
}

}  // namespace evosquish
