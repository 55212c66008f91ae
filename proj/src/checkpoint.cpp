// Copyright 2026 The aisrl Authors.
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

#include "aisrl/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

namespace aisrl {

namespace {

constexpr std::array<char, 8> kMagic = {'A', 'I', 'S', 'R', 'L', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

template <class T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <class T>
T read_pod(std::ifstream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) {
    throw CheckpointError(fmt::format("truncated checkpoint '{}'", path.string()));
  }
  return value;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError(fmt::format("cannot open '{}' for writing", path.string()));
  }
  out.write(kMagic.data(), kMagic.size());
  write_pod(out, kVersion);
  const auto& s = params.shape();
  for (const std::int32_t dim : {s.vocab_size, s.context_width, s.embed_dim, s.hidden_dim}) {
    write_pod(out, dim);
  }
  write_pod(out, static_cast<std::uint64_t>(params.size()));
  const auto values = params.values();
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!out) {
    throw CheckpointError(fmt::format("failed writing checkpoint '{}'", path.string()));
  }
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError(fmt::format("cannot open checkpoint '{}'", path.string()));
  }
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) {
    throw CheckpointError(fmt::format("'{}' is not an aisrl checkpoint", path.string()));
  }
  const auto version = read_pod<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw CheckpointError(fmt::format("unsupported checkpoint version {} in '{}'", version, path.string()));
  }
  PolicyShape shape;
  shape.vocab_size = read_pod<std::int32_t>(in, path);
  shape.context_width = read_pod<std::int32_t>(in, path);
  shape.embed_dim = read_pod<std::int32_t>(in, path);
  shape.hidden_dim = read_pod<std::int32_t>(in, path);
  PolicyParams params{shape};
  const auto count = read_pod<std::uint64_t>(in, path);
  if (count != params.size()) {
    throw CheckpointError(
        fmt::format("checkpoint '{}' holds {} scalars, shape implies {}", path.string(), count, params.size()));
  }
  auto values = params.values();
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
  if (!in) {
    throw CheckpointError(fmt::format("truncated checkpoint '{}'", path.string()));
  }
  return params;
}

}  // namespace aisrl
