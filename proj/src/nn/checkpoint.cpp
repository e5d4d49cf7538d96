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

#include "lungscope/nn/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "lungscope/errors.hpp"

namespace lungscope::nn {

namespace {

constexpr char kMagic[4] = {'L', 'S', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint IO assumes a little-endian host");

template <typename T>
void put(std::ofstream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) {
    throw Error(ErrorKind::kInvalidModel, "truncated checkpoint " + path.string());
  }
  return value;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const nlohmann::json& header,
                      const std::vector<Parameter*>& params) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write checkpoint " + path.string());
  const std::string text = header.dump();
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put<std::uint64_t>(out, params.size());
  for (const auto* p : params) {
    put<std::uint64_t>(out, p->value.size());
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(p->value.size() * sizeof(double)));
  }
  if (!out) throw Error(ErrorKind::kIo, "failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kResource, "cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::kInvalidModel, "not a lungscope checkpoint: " + path.string());
  }
  if (get<std::uint32_t>(in, path) != kVersion) {
    throw Error(ErrorKind::kInvalidModel, "unsupported checkpoint version in " + path.string());
  }
  const auto header_len = get<std::uint64_t>(in, path);
  std::string text(header_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(ErrorKind::kInvalidModel, "truncated checkpoint header " + path.string());
  }
  Checkpoint ckpt;
  try {
    ckpt.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kInvalidModel, "corrupt checkpoint header: " + std::string(e.what()));
  }
  const auto count = get<std::uint64_t>(in, path);
  ckpt.tensors.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto elements = get<std::uint64_t>(in, path);
    std::vector<double> values(elements);
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(elements * sizeof(double)))) {
      throw Error(ErrorKind::kInvalidModel, "truncated checkpoint tensor in " + path.string());
    }
    ckpt.tensors.push_back(std::move(values));
  }
  return ckpt;
}

void load_parameters(const Checkpoint& ckpt, const std::vector<Parameter*>& params) {
  if (ckpt.tensors.size() != params.size()) {
    throw Error(ErrorKind::kInvalidModel, "checkpoint holds " + std::to_string(ckpt.tensors.size()) +
                                              " tensors, model expects " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (ckpt.tensors[i].size() != params[i]->value.size()) {
      throw Error(ErrorKind::kInvalidModel, "checkpoint tensor " + std::to_string(i) + " size mismatch");
    }
    std::copy(ckpt.tensors[i].begin(), ckpt.tensors[i].end(), params[i]->value.data());
  }
}

}  // namespace lungscope::nn
