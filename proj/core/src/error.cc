// Copyright 2026 The AutoEval Authors
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

#include "autoeval/error.h"

#include <string>

namespace autoeval {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
      return "invalid argument";
    case ErrorCode::kDimensionMismatch:
      return "dimension mismatch";
    case ErrorCode::kNonFinite:
      return "non-finite value";
    case ErrorCode::kIo:
      return "i/o failure";
    case ErrorCode::kBadMagic:
      return "bad magic";
    case ErrorCode::kPayloadShape:
      return "payload shape mismatch";
    case ErrorCode::kInconsistentAccuracy:
      return "accuracy/labels inconsistency";
    case ErrorCode::kMissingData:
      return "missing data";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(ErrorCodeName(code)) + ": " + message),
      code_(code) {}

}  // namespace autoeval
