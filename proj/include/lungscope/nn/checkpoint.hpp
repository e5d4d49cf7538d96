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

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "lungscope/nn/tensor.hpp"

namespace lungscope::nn {

// Binary checkpoint layout (little-endian):
//   magic "LSCK" | u32 version | u64 header_len | header JSON bytes
//   | u64 tensor_count | per tensor: u64 element_count, f64[element_count]
// The header always carries "kind" plus whatever config is needed to rebuild
// the network the tensors belong to.

struct Checkpoint {
  nlohmann::json header;
  std::vector<std::vector<double>> tensors;
};

void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& header,
                      const std::vector<Parameter*>& params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies tensors into params; sizes must match one-to-one.
void load_parameters(const Checkpoint& ckpt, const std::vector<Parameter*>& params);

}  // namespace lungscope::nn
