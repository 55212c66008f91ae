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

#include "aisrl/rng.hpp"

namespace aisrl {

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

namespace {

// FNV-1a; std::hash is not guaranteed stable across library versions.
std::uint64_t hash_name(std::string_view name) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t hash_tokens(std::uint64_t seed, std::span<const int> tokens) noexcept {
  std::uint64_t h = mix64(seed ^ 0x5bd1e9955bd1e995ULL);
  for (const int t : tokens) {
    h = mix64(h ^ static_cast<std::uint64_t>(static_cast<std::uint32_t>(t)));
  }
  return h;
}

RngStream::RngStream(std::uint64_t key) : key_{key}, engine_{mix64(key)} {}

RngStream RngStream::child(std::string_view name) const {
  return RngStream{mix64(key_ ^ hash_name(name))};
}

RngStream RngStream::child(std::uint64_t index) const {
  return RngStream{mix64(mix64(key_) + index)};
}

double RngStream::uniform() {
  return std::uniform_real_distribution<double>{0.0, 1.0}(engine_);
}

double RngStream::normal(double mean, double stddev) {
  return std::normal_distribution<double>{mean, stddev}(engine_);
}

int RngStream::uniform_int(int lo, int hi) {
  return std::uniform_int_distribution<int>{lo, hi}(engine_);
}

std::size_t RngStream::categorical(std::span<const double> weights) {
  std::discrete_distribution<std::size_t> dist(weights.begin(), weights.end());
  return dist(engine_);
}

}  // namespace aisrl
