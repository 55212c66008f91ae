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

#include "aisrl/quantsim.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

#include <fmt/format.h>

namespace aisrl {

std::string_view to_string(QuantKind kind) noexcept {
  switch (kind) {
    case QuantKind::kFull:
      return "full";
    case QuantKind::kIntB:
      return "intb";
    case QuantKind::kE4M3:
      return "e4m3";
  }
  return "full";
}

QuantKind parse_quant_kind(std::string_view name) {
  if (name == "full") {
    return QuantKind::kFull;
  }
  if (name == "intb") {
    return QuantKind::kIntB;
  }
  if (name == "e4m3") {
    return QuantKind::kE4M3;
  }
  throw std::invalid_argument(fmt::format("unknown quant kind '{}' (expected full, intb or e4m3)", name));
}

void QuantSpec::validate() const {
  if (kind == QuantKind::kIntB && (bits < 2 || bits > 16)) {
    throw std::invalid_argument(fmt::format("quant.bits must be in [2, 16], got {}", bits));
  }
}

Tensor::Tensor(std::vector<std::size_t> shape_in, std::vector<double> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
  validate();
}

Tensor::Tensor(std::vector<double> values) : shape{values.size()}, data(std::move(values)) {}

void Tensor::validate() const {
  const auto expected = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
  if (expected != data.size()) {
    throw std::invalid_argument(
        fmt::format("tensor data length {} does not match shape product {}", data.size(), expected));
  }
}

namespace {

void require_finite(std::span<const double> x) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i])) {
      throw CorruptTensorError(fmt::format("non-finite value at index {}", i));
    }
  }
}

void quantize_symmetric_inplace(std::span<double> x, int bits) {
  if (bits < 2 || bits > 16) {
    throw std::invalid_argument(fmt::format("bits must be in [2, 16], got {}", bits));
  }
  require_finite(x);
  double max_abs = 0.0;
  for (const double v : x) {
    max_abs = std::max(max_abs, std::abs(v));
  }
  if (max_abs == 0.0) {
    return;
  }
  const double top = std::ldexp(1.0, bits - 1) - 1.0;
  const double bottom = -std::ldexp(1.0, bits - 1);
  const double scale = max_abs / top;
  for (double& v : x) {
    const double code = std::clamp(std::nearbyint(v / scale), bottom, top);
    if (code == top) {
      v = max_abs;
    } else if (code == -top) {
      v = -max_abs;
    } else {
      v = code * scale;
    }
  }
}

double quantize_e4m3_unchecked(double x) {
  const double mag = std::abs(x);
  if (mag >= kE4M3Max) {
    return std::copysign(kE4M3Max, x);
  }
  if (mag == 0.0) {
    return x;
  }
  // Three mantissa bits: the spacing inside binade 2^e is 2^(e-3). Below the
  // smallest normal binade (2^-6) the subnormal spacing stays at 2^-9.
  const int exponent = std::max(std::ilogb(mag), -6);
  const double quantum = std::ldexp(1.0, exponent - 3);
  const double rounded = std::nearbyint(mag / quantum) * quantum;
  return std::copysign(std::min(rounded, kE4M3Max), x);
}

}  // namespace

std::vector<double> quantize_symmetric(std::span<const double> x, int bits) {
  std::vector<double> out(x.begin(), x.end());
  quantize_symmetric_inplace(out, bits);
  return out;
}

Tensor quantize_symmetric(const Tensor& x, int bits) {
  x.validate();
  return Tensor{x.shape, quantize_symmetric(std::span<const double>{x.data}, bits)};
}

double quantize_e4m3(double x) {
  if (!std::isfinite(x)) {
    throw CorruptTensorError("non-finite value passed to E4M3 quantizer");
  }
  return quantize_e4m3_unchecked(x);
}

std::vector<double> quantize_e4m3(std::span<const double> x) {
  require_finite(x);
  std::vector<double> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), quantize_e4m3_unchecked);
  return out;
}

Tensor quantize_e4m3(const Tensor& x) {
  x.validate();
  return Tensor{x.shape, quantize_e4m3(std::span<const double>{x.data})};
}

void project_inplace(std::span<double> x, const QuantSpec& spec) {
  switch (spec.kind) {
    case QuantKind::kFull:
      return;
    case QuantKind::kIntB:
      quantize_symmetric_inplace(x, spec.bits);
      return;
    case QuantKind::kE4M3:
      require_finite(x);
      std::transform(x.begin(), x.end(), x.begin(), quantize_e4m3_unchecked);
      return;
  }
}

std::vector<double> project(std::span<const double> x, const QuantSpec& spec) {
  spec.validate();
  std::vector<double> out(x.begin(), x.end());
  project_inplace(out, spec);
  return out;
}

Tensor project(const Tensor& x, const QuantSpec& spec) {
  x.validate();
  return Tensor{x.shape, project(std::span<const double>{x.data}, spec)};
}

double decode_e4m3(std::uint8_t bits) noexcept {
  const bool negative = (bits & 0x80U) != 0;
  const int exponent_field = (bits >> 3) & 0x0F;
  const int mantissa_field = bits & 0x07;
  if (exponent_field == 0x0F && mantissa_field == 0x07) {
    return std::numeric_limits<double>::quiet_NaN();
  }
  double magnitude = 0.0;
  if (exponent_field == 0) {
    magnitude = std::ldexp(static_cast<double>(mantissa_field), -6 - 3);
  } else {
    magnitude = std::ldexp(1.0 + mantissa_field / 8.0, exponent_field - 7);
  }
  return negative ? -magnitude : magnitude;
}

std::vector<double> e4m3_grid() {
  std::vector<double> grid;
  grid.reserve(256);
  for (int code = 0; code < 256; ++code) {
    const double value = decode_e4m3(static_cast<std::uint8_t>(code));
    if (std::isfinite(value)) {
      grid.push_back(value == 0.0 ? 0.0 : value);
    }
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

std::size_t e4m3_finite_encoding_count() {
  std::size_t count = 0;
  for (int code = 0; code < 256; ++code) {
    if (std::isfinite(decode_e4m3(static_cast<std::uint8_t>(code)))) {
      ++count;
    }
  }
  return count;
}

}  // namespace aisrl
