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

#ifndef VISCADE_CORE_ERROR_H_
#define VISCADE_CORE_ERROR_H_

#include <stdexcept>
#include <string>
#include <string_view>

namespace viscade {

enum class ErrorCode {
  kConfig,
  kDimMismatch,
  kLoad,
  kDecode,
  kInvalidCrop,
  kIntegrity,
  kDivergence,
  kDegenerateTraining,
  kCorruptCode,
  kBuild,
  kNotFound,
  kMalformedRequest,
  kAllShardsTimedOut,
  kIo,
};

std::string_view error_code_name(ErrorCode code);

// Every failure surfaced by the library is an Error carrying a code, so
// callers (the HTTP layer in particular) can map it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void throw_error(ErrorCode code, const std::string& message);

// Shorthand for the most common precondition check.
inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw_error(code, message);
}

}  // namespace viscade

#endif  // VISCADE_CORE_ERROR_H_
