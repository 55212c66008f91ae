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

#include "aisrl/quantbench.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <json.hpp>

#include "aisrl/rng.hpp"

namespace aisrl {

bool QuantBenchReport::passed() const noexcept {
  return idempotence_failures == 0 && error_bound_failures == 0 && off_grid_values == 0 && zero_failures == 0 &&
         (!grid_max || *grid_max == kE4M3Max);
}

namespace {

// Half the spacing of the E4M3 grid around |x|, for |x| within range.
double e4m3_half_spacing(double x) {
  const int e = std::max(std::ilogb(x == 0.0 ? 1.0 : x), -6);
  return std::ldexp(1.0, e - 4);
}

}  // namespace

QuantBenchReport run_quantbench(const QuantBenchOptions& options) {
  options.spec.validate();
  if (options.num_tensors < 0 || options.max_length < 1) {
    throw std::invalid_argument("num_tensors must be >= 0 and max_length >= 1");
  }
  QuantBenchReport report;
  std::vector<double> grid;
  if (options.spec.kind == QuantKind::kE4M3) {
    grid = e4m3_grid();
    report.grid_size = grid.size();
    report.grid_max = grid.back();
    report.finite_encodings = e4m3_finite_encoding_count();
  }

  const RngStream root = RngStream{options.seed}.child("quantbench");
  double error_total = 0.0;
  auto fail = [&](long long& counter, long long tensor) {
    ++counter;
    if (!report.first_failing_tensor) {
      report.first_failing_tensor = tensor;
    }
  };

  for (long long t = 0; t < options.num_tensors; ++t) {
    RngStream rng = root.child(static_cast<std::uint64_t>(t));
    const int n = rng.uniform_int(1, options.max_length);
    // Magnitudes from 1e-4 to 1e3 reach the subnormal and saturating ranges.
    const double scale = std::pow(10.0, -4.0 + 7.0 * rng.uniform());
    std::vector<double> x(static_cast<std::size_t>(n));
    for (double& v : x) {
      v = rng.normal(0.0, scale);
    }
    if (rng.uniform() < 0.05) {
      x[static_cast<std::size_t>(rng.uniform_int(0, n - 1))] = 0.0;
    }

    const std::vector<double> q = project(x, options.spec);
    const std::vector<double> qq = project(q, options.spec);
    if (qq != q) {
      fail(report.idempotence_failures, t);
    }

    double int_step = 0.0;
    if (options.spec.kind == QuantKind::kIntB) {
      double max_abs = 0.0;
      for (const double v : x) {
        max_abs = std::max(max_abs, std::abs(v));
      }
      int_step = max_abs / static_cast<double>((1LL << (options.spec.bits - 1)) - 1);
    }

    for (std::size_t i = 0; i < x.size(); ++i) {
      const double err = std::abs(q[i] - x[i]);
      ++report.elements;
      error_total += err;
      report.max_abs_error = std::max(report.max_abs_error, err);
      if (x[i] == 0.0 && q[i] != 0.0) {
        fail(report.zero_failures, t);
      }
      double bound = 0.0;
      switch (options.spec.kind) {
        case QuantKind::kFull:
          bound = 0.0;
          break;
        case QuantKind::kIntB:
          bound = 0.5 * int_step;
          break;
        case QuantKind::kE4M3: {
          const double mag = std::abs(x[i]);
          bound = mag >= kE4M3Max ? mag - kE4M3Max : e4m3_half_spacing(mag);
          if (!std::binary_search(grid.begin(), grid.end(), q[i] == 0.0 ? 0.0 : q[i])) {
            fail(report.off_grid_values, t);
          }
          break;
        }
      }
      // One ulp of slack for the division and product in the integer path.
      const double slack = options.spec.kind == QuantKind::kIntB ? 4.0 * std::numeric_limits<double>::epsilon() * std::abs(x[i]) : 0.0;
      if (err > bound + slack) {
        fail(report.error_bound_failures, t);
      }
      if (bound > 0.0) {
        report.max_error_to_bound = std::max(report.max_error_to_bound, err / bound);
      }
    }
    ++report.tensors;
  }
  report.mean_abs_error = report.elements > 0 ? error_total / static_cast<double>(report.elements) : 0.0;
  return report;
}

std::string quantbench_to_json(const QuantBenchReport& r, const QuantBenchOptions& options) {
  nlohmann::json j;
  j["passed"] = r.passed();
  j["spec"] = {{"kind", std::string(to_string(options.spec.kind))}, {"bits", options.spec.bits}};
  j["seed"] = options.seed;
  j["tensors"] = r.tensors;
  j["elements"] = r.elements;
  j["idempotence_failures"] = r.idempotence_failures;
  j["error_bound_failures"] = r.error_bound_failures;
  j["off_grid_values"] = r.off_grid_values;
  j["zero_failures"] = r.zero_failures;
  j["max_abs_error"] = r.max_abs_error;
  j["mean_abs_error"] = r.mean_abs_error;
  j["max_error_to_bound"] = r.max_error_to_bound;
  if (r.grid_size) {
    j["e4m3"] = {{"grid_size", *r.grid_size}, {"grid_max", *r.grid_max}, {"finite_encodings", *r.finite_encodings}};
  }
  j["first_failing_tensor"] = r.first_failing_tensor ? nlohmann::json(*r.first_failing_tensor) : nlohmann::json();
  return j.dump(2);
}

}  // namespace aisrl
