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

#ifndef AISRL_QUANTBENCH_HPP
#define AISRL_QUANTBENCH_HPP

#include <cstdint>
#include <optional>
#include <string>

#include "aisrl/quantsim.hpp"

/**
 * \file
 * \brief Randomized property checks for the quantizers.
 */

namespace aisrl {

struct QuantBenchOptions {
  QuantSpec spec;
  int num_tensors = 100000;
  /// Tensor lengths are drawn uniformly from [1, max_length].
  int max_length = 32;
  std::uint64_t seed = 0;
};

struct QuantBenchReport {
  long long tensors = 0;
  long long elements = 0;
  long long idempotence_failures = 0;
  long long error_bound_failures = 0;
  long long off_grid_values = 0;
  long long zero_failures = 0;
  double max_abs_error = 0.0;
  double mean_abs_error = 0.0;
  /// Largest |Q(x) - x| / bound over elements with a nonzero bound.
  double max_error_to_bound = 0.0;
  /// E4M3 only.
  std::optional<std::size_t> grid_size;
  std::optional<double> grid_max;
  std::optional<std::size_t> finite_encodings;
  std::optional<long long> first_failing_tensor;

  [[nodiscard]] bool passed() const noexcept;
};

/// Checks idempotence, the per-element error bound, grid membership (E4M3)
/// and zero preservation on seeded random tensors spanning several orders of
/// magnitude, including saturating and subnormal ranges.
QuantBenchReport run_quantbench(const QuantBenchOptions& options);

std::string quantbench_to_json(const QuantBenchReport& report, const QuantBenchOptions& options);

}  // namespace aisrl

#endif  // AISRL_QUANTBENCH_HPP
