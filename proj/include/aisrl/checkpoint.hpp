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

#ifndef AISRL_CHECKPOINT_HPP
#define AISRL_CHECKPOINT_HPP

#include <filesystem>
#include <stdexcept>

#include "aisrl/policy.hpp"

namespace aisrl {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary checkpoint, version 1:
///   magic "AISRLCKP", u32 version, 4 x i32 shape (V, k, D, H),
///   u64 scalar count, then the flat parameter vector as little-endian f64.
/// Loading a saved checkpoint reproduces the parameters bitwise.
void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::filesystem::path& path);

}  // namespace aisrl

#endif  // AISRL_CHECKPOINT_HPP
