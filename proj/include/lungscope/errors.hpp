// Copyright 2026 The lungscope Authors.
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

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lungscope {

enum class ErrorKind {
  kInvalidImage,
  kInvalidArgument,
  kInvalidConfig,
  kInvalidData,
  kInvalidInput,
  kInvalidModel,
  kInvalidLayout,
  kInvalidSplit,
  kResource,
  kDataLeak,
  kDivergence,
  kIo,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the library; `kind()` carries the category so
/// the CLI can map failures onto exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind), detail_(message) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the category prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace lungscope
