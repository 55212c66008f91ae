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

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "aisrl/quantsim.hpp"
#include "aisrl/rng.hpp"

namespace {

struct GridPoint {
  double value;
  int mantissa;
};

// Positive E4M3 values straight from the bit layout.
std::vector<GridPoint> positive_grid_oracle() {
  std::vector<GridPoint> out;
  for (int e = 0; e < 16; ++e) {
    for (int m = 0; m < 8; ++m) {
      if (e == 15 && m == 7) {
        continue;
      }
      const double v = e == 0 ? (m / 8.0) * std::pow(2.0, -6) : (1.0 + m / 8.0) * std::pow(2.0, e - 7);
      out.push_back({v, m});
    }
  }
  std::sort(out.begin(), out.end(), [](const GridPoint& a, const GridPoint& b) { return a.value < b.value; });
  return out;
}

double e4m3_oracle(double x) {
  static const std::vector<GridPoint> grid = positive_grid_oracle();
  const double mag = std::abs(x);
  if (mag >= grid.back().value) {
    return std::copysign(grid.back().value, x);
  }
  const GridPoint* best = &grid.front();
  double best_dist = std::abs(mag - best->value);
  for (const auto& g : grid) {
    const double d = std::abs(mag - g.value);
    if (d < best_dist || (d == best_dist && g.mantissa % 2 == 0 && best->mantissa % 2 != 0)) {
      best = &g;
      best_dist = d;
    }
  }
  return std::copysign(best->value, x);
}

double round_half_even(double v) {
  const double fl = std::floor(v);
  const double frac = v - fl;
  if (frac > 0.5) {
    return fl + 1.0;
  }
  if (frac < 0.5) {
    return fl;
  }
  return std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
}

std::vector<double> symmetric_oracle(const std::vector<double>& x, int bits) {
  double max_abs = 0.0;
  for (const double v : x) {
    max_abs = std::max(max_abs, std::abs(v));
  }
  if (max_abs == 0.0) {
    return x;
  }
  const double top = std::pow(2.0, bits - 1) - 1.0;
  const double s = max_abs / top;
  std::vector<double> out;
  for (const double v : x) {
    const double q = std::clamp(round_half_even(v / s), -top - 1.0, top);
    out.push_back(q * s);
  }
  return out;
}

TEST(QuantizeSymmetric, ZeroTensorUnchanged) {
  const std::vector<double> x{0.0, 0.0, 0.0};
  EXPECT_EQ(aisrl::quantize_symmetric(x, 8), x);
}

TEST(QuantizeSymmetric, EightBitExample) {
  const std::vector<double> x{3.0, -1.5, 0.5};
  const auto q = aisrl::quantize_symmetric(x, 8);
  ASSERT_EQ(q.size(), 3U);
  EXPECT_DOUBLE_EQ(q[0], 3.0);
  EXPECT_NEAR(q[1], -1.51181, 5e-6);
  EXPECT_NEAR(q[2], 0.49606, 5e-6);
  const auto oracle = symmetric_oracle(x, 8);
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_DOUBLE_EQ(q[i], oracle[i]);
  }
}

TEST(QuantizeSymmetric, TwoBitClampExample) {
  const std::vector<double> x{1.0, -0.4};
  const auto q = aisrl::quantize_symmetric(x, 2);
  EXPECT_EQ(q, (std::vector<double>{1.0, 0.0}));
  EXPECT_EQ(q, symmetric_oracle(x, 2));
}

TEST(QuantizeSymmetric, MatchesScalarOracleOnRandomTensors) {
  aisrl::RngStream rng{5};
  for (int t = 0; t < 500; ++t) {
    const int bits = rng.uniform_int(2, 16);
    std::vector<double> x(static_cast<std::size_t>(rng.uniform_int(1, 20)));
    for (double& v : x) {
      v = rng.normal(0.0, 3.0);
    }
    const auto q = aisrl::quantize_symmetric(x, bits);
    const auto oracle = symmetric_oracle(x, bits);
    for (std::size_t i = 0; i < x.size(); ++i) {
      ASSERT_NEAR(q[i], oracle[i], 1e-12 * std::abs(oracle[i]) + 1e-300) << "bits " << bits;
    }
  }
}

TEST(QuantizeSymmetric, RejectsNonFinite) {
  const std::vector<double> x{1.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW((void)aisrl::quantize_symmetric(x, 8), aisrl::CorruptTensorError);
  const std::vector<double> y{std::numeric_limits<double>::infinity()};
  EXPECT_THROW((void)aisrl::quantize_e4m3(y), aisrl::CorruptTensorError);
}

TEST(QuantizeE4M3, Examples) {
  EXPECT_EQ(aisrl::quantize_e4m3(1.0), 1.0);
  EXPECT_EQ(aisrl::quantize_e4m3(500.0), 448.0);
  EXPECT_EQ(aisrl::quantize_e4m3(-500.0), -448.0);
  EXPECT_EQ(aisrl::quantize_e4m3(0.3), 0.3125);
}

TEST(QuantizeE4M3, GridMatchesBitOracle) {
  const auto grid = aisrl::e4m3_grid();
  const auto positive = positive_grid_oracle();
  EXPECT_EQ(grid.size(), 2 * positive.size() - 1);
  EXPECT_EQ(grid.back(), 448.0);
  EXPECT_EQ(grid.back(), positive.back().value);
  EXPECT_EQ(aisrl::e4m3_finite_encoding_count(), 254U);
  EXPECT_TRUE(std::isnan(aisrl::decode_e4m3(0x7F)));
  EXPECT_TRUE(std::isnan(aisrl::decode_e4m3(0xFF)));
}

TEST(QuantizeE4M3, MatchesNearestGridOracle) {
  aisrl::RngStream rng{9};
  for (int i = 0; i < 20000; ++i) {
    const double x = rng.normal() * std::pow(10.0, -4.0 + 7.0 * rng.uniform());
    ASSERT_EQ(aisrl::quantize_e4m3(x), e4m3_oracle(x)) << "x = " << x;
  }
}

TEST(QuantizeE4M3, TiesRoundToEvenMantissa) {
  const auto positive = positive_grid_oracle();
  for (std::size_t i = 0; i + 1 < positive.size(); ++i) {
    const double mid = 0.5 * (positive[i].value + positive[i + 1].value);
    ASSERT_EQ(aisrl::quantize_e4m3(mid), e4m3_oracle(mid)) << "midpoint " << mid;
    ASSERT_EQ(aisrl::quantize_e4m3(-mid), e4m3_oracle(-mid)) << "midpoint " << -mid;
  }
}

TEST(Project, DispatchesBySpec) {
  const std::vector<double> x{3.0, -1.5, 0.5};
  EXPECT_EQ(aisrl::project(x, aisrl::QuantSpec::full()), x);
  EXPECT_EQ(aisrl::project(std::vector<double>{1.0}, aisrl::QuantSpec::e4m3()), std::vector<double>{1.0});
  EXPECT_EQ(aisrl::project(x, aisrl::QuantSpec::int_b(8)), aisrl::quantize_symmetric(x, 8));
}

TEST(Project, IdempotentAndZeroPreserving) {
  aisrl::RngStream rng{13};
  const aisrl::QuantSpec specs[] = {aisrl::QuantSpec::full(), aisrl::QuantSpec::int_b(4), aisrl::QuantSpec::int_b(8),
                                    aisrl::QuantSpec::e4m3()};
  for (const auto& spec : specs) {
    for (int t = 0; t < 1000; ++t) {
      std::vector<double> x(16);
      for (double& v : x) {
        v = rng.normal(0.0, std::pow(10.0, -3.0 + 5.0 * rng.uniform()));
      }
      const auto q = aisrl::project(x, spec);
      ASSERT_EQ(aisrl::project(q, spec), q);
    }
    const std::vector<double> zeros(5, 0.0);
    EXPECT_EQ(aisrl::project(zeros, spec), zeros);
  }
}

TEST(QuantSpec, Validation) {
  EXPECT_NO_THROW(aisrl::QuantSpec::int_b(2).validate());
  EXPECT_NO_THROW(aisrl::QuantSpec::int_b(16).validate());
  EXPECT_THROW(aisrl::QuantSpec::int_b(1).validate(), std::invalid_argument);
  EXPECT_THROW(aisrl::QuantSpec::int_b(17).validate(), std::invalid_argument);
  EXPECT_EQ(aisrl::parse_quant_kind("e4m3"), aisrl::QuantKind::kE4M3);
  EXPECT_THROW((void)aisrl::parse_quant_kind("fp4"), std::invalid_argument);
}

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_NO_THROW(aisrl::Tensor({2, 3}, std::vector<double>(6, 1.0)).validate());
  EXPECT_THROW(aisrl::Tensor({2, 3}, std::vector<double>(5, 1.0)), std::invalid_argument);
}

}  // namespace
