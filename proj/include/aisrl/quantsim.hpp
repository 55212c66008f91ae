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

#ifndef AISRL_QUANTSIM_HPP
#define AISRL_QUANTSIM_HPP

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

/**
 * \file
 * \brief Simulated reduced-precision grids: symmetric integer and FP8 E4M3.
 *
 * All kernels round half to even and operate on doubles. They are pure and
 * may be called concurrently.
 */

namespace aisrl {

/// Thrown when a kernel receives a NaN or infinite value.
class CorruptTensorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class QuantKind { kFull, kIntB, kE4M3 };

std::string_view to_string(QuantKind kind) noexcept;
/// Accepts "full", "intb", "e4m3" (case-sensitive).
QuantKind parse_quant_kind(std::string_view name);

/// Which numeric grid the rollout policy is projected onto.
struct QuantSpec {
  QuantKind kind = QuantKind::kFull;
  /// Only meaningful for kIntB; must be in [2, 16].
  int bits = 8;
  /// Also project each layer's pre-activation output, not just the weights.
  bool quantize_activations = false;

  static QuantSpec full() { return {}; }
  static QuantSpec int_b(int bits) { return {QuantKind::kIntB, bits, false}; }
  static QuantSpec e4m3() { return {QuantKind::kE4M3, 8, false}; }

  /// Throws std::invalid_argument when the spec is malformed.
  void validate() const;

  friend bool operator==(const QuantSpec&, const QuantSpec&) = default;
};

/// A dense row-major tensor of doubles.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);
  /// A rank-1 tensor.
  explicit Tensor(std::vector<double> values);

  [[nodiscard]] std::size_t size() const noexcept { return data.size(); }
  /// Throws std::invalid_argument if data length disagrees with the shape.
  void validate() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// Largest finite E4M3 magnitude.
inline constexpr double kE4M3Max = 448.0;

/// Per-tensor symmetric quantization onto a signed b-bit integer grid.
/**
 * Output is clamp(round(x / s), -2^(b-1), 2^(b-1) - 1) * s with
 * s = max|x| / (2^(b-1) - 1). An all-zero input is returned unchanged.
 * Elements landing on the top code are emitted as exactly +-max|x| so the
 * scale survives a second projection bitwise.
 */
std::vector<double> quantize_symmetric(std::span<const double> x, int bits);
Tensor quantize_symmetric(const Tensor& x, int bits);

/// Nearest E4M3 value (subnormals included), saturating at +-448.
double quantize_e4m3(double x);
std::vector<double> quantize_e4m3(std::span<const double> x);
Tensor quantize_e4m3(const Tensor& x);

/// Dispatches on spec.kind; kFull is the identity.
std::vector<double> project(std::span<const double> x, const QuantSpec& spec);
Tensor project(const Tensor& x, const QuantSpec& spec);
/// In-place variant used on the hot path.
void project_inplace(std::span<double> x, const QuantSpec& spec);

/// Decodes one E4M3 byte (1 sign, 4 exponent, 3 mantissa bits, bias 7).
/// The two all-ones encodings are NaN.
double decode_e4m3(std::uint8_t bits) noexcept;

/// All distinct finite E4M3 values, ascending, from full bit enumeration.
/// Positive and negative zero collapse into a single entry.
std::vector<double> e4m3_grid();

/// Number of E4M3 encodings that decode to a finite value.
std::size_t e4m3_finite_encoding_count();

}  // namespace aisrl

#endif  // AISRL_QUANTSIM_HPP
