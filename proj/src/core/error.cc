// Copyright 2026 The Viscade Authors.
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

#include "viscade/core/error.h"

namespace viscade {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kDimMismatch: return "dim_mismatch";
    case ErrorCode::kLoad: return "load";
    case ErrorCode::kDecode: return "decode";
    case ErrorCode::kInvalidCrop: return "invalid_crop";
    case ErrorCode::kIntegrity: return "integrity";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kDegenerateTraining: return "degenerate_training";
    case ErrorCode::kCorruptCode: return "corrupt_code";
    case ErrorCode::kBuild: return "build";
    case ErrorCode::kNotFound: return "not_found";
    case ErrorCode::kMalformedRequest: return "malformed_request";
    case ErrorCode::kAllShardsTimedOut: return "all_shards_timed_out";
    case ErrorCode::kIo: return "io";
  }
  return "unknown";
}

void throw_error(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace viscade
