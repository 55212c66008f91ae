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

#include "aisrl/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <fmt/format.h>
#include <json.hpp>

namespace aisrl::theory {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += a[i] * b[i];
  }
  return total;
}

double squared_norm(std::span<const double> a) { return dot(a, a); }

// sum_x weight(x) * A(x) * s(x)
template <class Weight>
std::vector<double> weighted_sum(const EnumInstance& inst, Weight&& weight) {
  std::vector<double> out(inst.dim(), 0.0);
  for (std::size_t x = 0; x < inst.size(); ++x) {
    const double coef = weight(x) * inst.advantage[x];
    for (std::size_t j = 0; j < out.size(); ++j) {
      out[j] += coef * inst.scores[x][j];
    }
  }
  return out;
}

std::vector<double> log_softmax_row(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double total = 0.0;
  for (const double v : z) {
    total += std::exp(v - m);
  }
  const double norm = m + std::log(total);
  std::vector<double> out(z.size());
  std::transform(z.begin(), z.end(), out.begin(), [norm](double v) { return v - norm; });
  return out;
}

}  // namespace

double EnumInstance::w_bar(std::size_t x) const {
  const double w = p_train[x] / p_rollout[x];
  return c ? std::min(w, *c) : w;
}

double EnumInstance::max_abs_advantage() const {
  double m = 0.0;
  for (const double a : advantage) {
    m = std::max(m, std::abs(a));
  }
  return m;
}

double EnumInstance::max_score_norm() const {
  double m = 0.0;
  for (const auto& s : scores) {
    m = std::max(m, std::sqrt(squared_norm(s)));
  }
  return m;
}

void EnumInstance::validate() const {
  const std::size_t n = p_train.size();
  if (n == 0 || n > kMaxOutcomes) {
    throw std::invalid_argument(fmt::format("outcome space of size {} outside [1, {}]", n, kMaxOutcomes));
  }
  if (p_rollout.size() != n || advantage.size() != n || scores.size() != n) {
    throw std::invalid_argument("instance arrays disagree on the outcome count");
  }
  const std::size_t d = scores.front().size();
  for (const auto& s : scores) {
    if (s.size() != d) {
      throw std::invalid_argument("score vectors differ in dimension");
    }
  }
  const double sum_train = std::accumulate(p_train.begin(), p_train.end(), 0.0);
  const double sum_rollout = std::accumulate(p_rollout.begin(), p_rollout.end(), 0.0);
  if (std::abs(sum_train - 1.0) > 1e-12 || std::abs(sum_rollout - 1.0) > 1e-12) {
    throw std::invalid_argument(
        fmt::format("probabilities must sum to 1 (train {}, rollout {})", sum_train, sum_rollout));
  }
  for (std::size_t x = 0; x < n; ++x) {
    if (p_train[x] < 0.0 || p_rollout[x] < 0.0) {
      throw std::invalid_argument("negative probability");
    }
    if (p_train[x] > 0.0 && p_rollout[x] == 0.0) {
      throw std::invalid_argument(fmt::format("outcome {} violates absolute continuity", x));
    }
  }
  if (c && !(*c >= 1.0)) {
    throw std::invalid_argument(fmt::format("truncation threshold must be >= 1, got {}", *c));
  }
}

EnumInstance make_policy_instance(const PolicyInstanceOptions& options, RngStream rng) {
  const int v = options.vocab_size;
  const int horizon = options.horizon;
  if (v < 2 || horizon < 1) {
    throw std::invalid_argument("tiny policy needs vocab_size >= 2 and horizon >= 1");
  }
  std::size_t n = 1;
  for (int t = 0; t < horizon; ++t) {
    n *= static_cast<std::size_t>(v);
    if (n > kMaxOutcomes) {
      throw std::invalid_argument(
          fmt::format("V^T = {}^{} exceeds the enumeration cap of {} outcomes", v, horizon, kMaxOutcomes));
    }
  }
  const auto vs = static_cast<std::size_t>(v);
  const auto ts = static_cast<std::size_t>(horizon);
  // Transition rows (V + 1, with a start row at index V), then position biases.
  const std::size_t transition_size = (vs + 1) * vs;
  const std::size_t dim = transition_size + ts * vs;

  std::vector<double> theta(dim);
  RngStream param_rng = rng.child("params");
  for (double& p : theta) {
    p = param_rng.normal(0.0, options.param_scale);
  }
  std::vector<double> theta_rollout = theta;
  if (options.mismatch_scale > 0.0) {
    RngStream mismatch_rng = rng.child("mismatch");
    for (double& p : theta_rollout) {
      p += mismatch_rng.normal(0.0, options.mismatch_scale);
    }
  }

  auto step_logits = [&](const std::vector<double>& params, std::size_t prev, std::size_t t) {
    std::vector<double> z(vs);
    for (std::size_t j = 0; j < vs; ++j) {
      z[j] = params[prev * vs + j] + params[transition_size + t * vs + j];
    }
    return z;
  };

  EnumInstance inst;
  inst.c = options.c;
  inst.p_train.resize(n);
  inst.p_rollout.resize(n);
  inst.scores.assign(n, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> seq(ts);
  for (std::size_t x = 0; x < n; ++x) {
    std::size_t code = x;
    for (std::size_t t = 0; t < ts; ++t) {
      seq[t] = code % vs;
      code /= vs;
    }
    double log_train = 0.0;
    double log_rollout = 0.0;
    std::size_t prev = vs;
    for (std::size_t t = 0; t < ts; ++t) {
      const auto lp = log_softmax_row(step_logits(theta, prev, t));
      const auto lq = log_softmax_row(step_logits(theta_rollout, prev, t));
      log_train += lp[seq[t]];
      log_rollout += lq[seq[t]];
      // d log softmax / d z = onehot - p, shared by the transition row and the position bias.
      auto& s = inst.scores[x];
      for (std::size_t j = 0; j < vs; ++j) {
        const double g = (j == seq[t] ? 1.0 : 0.0) - std::exp(lp[j]);
        s[prev * vs + j] += g;
        s[transition_size + t * vs + j] += g;
      }
      prev = seq[t];
    }
    inst.p_train[x] = std::exp(log_train);
    inst.p_rollout[x] = std::exp(log_rollout);
  }

  RngStream adv_rng = rng.child("advantage");
  inst.advantage.resize(n);
  for (double& a : inst.advantage) {
    a = 2.0 * adv_rng.uniform() - 1.0;
  }
  return inst;
}

EnumInstance make_dominant_variance_instance(RngStream rng) {
  constexpr std::size_t kOutcomes = 16;
  constexpr std::size_t kDim = 4;
  constexpr double kJitter = 1e-4;

  for (int attempt = 0; attempt < 1000; ++attempt) {
    RngStream r = rng.child(static_cast<std::uint64_t>(attempt));
    // Outcome 0 is rare under rollout (mass rho) but likely under train (mass q).
    const double rho = std::pow(10.0, -5.0 + 2.0 * r.uniform());
    const double q = 0.3 + 0.4 * r.uniform();
    const double spread = std::pow(10.0, -1.0 + 2.0 * r.uniform()) / rho;

    std::vector<double> d(kDim);
    for (double& x : d) {
      x = r.normal();
    }
    const double d_norm = std::sqrt(squared_norm(d));
    for (double& x : d) {
      x /= d_norm;
    }
    // v orthogonal to d with ||v||^2 = spread keeps the cross term small.
    std::vector<double> v(kDim);
    for (double& x : v) {
      x = r.normal();
    }
    const double proj = dot(v, d);
    for (std::size_t j = 0; j < kDim; ++j) {
      v[j] -= proj * d[j];
    }
    const double v_norm = std::sqrt(squared_norm(v));
    for (double& x : v) {
      x *= std::sqrt(spread) / v_norm;
    }

    EnumInstance inst;
    inst.p_rollout.resize(kOutcomes);
    inst.p_train.resize(kOutcomes);
    inst.advantage.assign(kOutcomes, 1.0);
    inst.scores.assign(kOutcomes, std::vector<double>(kDim));

    std::vector<double> base(kOutcomes - 1);
    for (double& b : base) {
      b = std::exp(0.5 * r.normal());
    }
    const double base_total = std::accumulate(base.begin(), base.end(), 0.0);
    inst.p_rollout[0] = rho;
    inst.p_train[0] = q;
    inst.scores[0] = d;
    for (std::size_t x = 1; x < kOutcomes; ++x) {
      const double share = base[x - 1] / base_total;
      inst.p_rollout[x] = (1.0 - rho) * share;
      inst.p_train[x] = (1.0 - q) * share;
      for (std::size_t j = 0; j < kDim; ++j) {
        inst.scores[x][j] = d[j] + v[j] + kJitter * r.normal();
      }
    }
    const MseTerms terms = mse_terms(inst);
    if (terms.sigma0_sq < 0.01 * terms.sigma1_sq && std::abs(terms.kappa) < 0.01 * terms.sigma1_sq) {
      return inst;
    }
  }
  throw std::runtime_error("failed to construct a variance-dominated instance");
}

GradientTerms exact_gradients(const EnumInstance& inst) {
  inst.validate();
  GradientTerms out;
  out.g = weighted_sum(inst, [&](std::size_t x) { return inst.p_train[x]; });
  out.g0 = weighted_sum(inst, [&](std::size_t x) { return inst.p_rollout[x]; });
  out.g1 = weighted_sum(inst, [&](std::size_t x) { return inst.p_rollout[x] * inst.w_bar(x); });
  out.b0.resize(out.g.size());
  out.b1.resize(out.g.size());
  for (std::size_t j = 0; j < out.g.size(); ++j) {
    out.b0[j] = out.g0[j] - out.g[j];
    out.b1[j] = out.g1[j] - out.g[j];
  }
  return out;
}

VarianceTerms variance_terms(const EnumInstance& inst) {
  const GradientTerms grads = exact_gradients(inst);
  double second0 = 0.0;
  double second1 = 0.0;
  double cross = 0.0;
  for (std::size_t x = 0; x < inst.size(); ++x) {
    const double a2s2 = inst.advantage[x] * inst.advantage[x] * squared_norm(inst.scores[x]);
    const double w = inst.w_bar(x);
    second0 += inst.p_rollout[x] * a2s2;
    second1 += inst.p_rollout[x] * w * w * a2s2;
    cross += inst.p_rollout[x] * w * a2s2;
  }
  VarianceTerms out;
  out.sigma0_sq = second0 - squared_norm(grads.g0);
  out.sigma1_sq = second1 - squared_norm(grads.g1);
  out.kappa = cross - dot(grads.g0, grads.g1);
  return out;
}

MseTerms mse_terms(const EnumInstance& inst) {
  const GradientTerms grads = exact_gradients(inst);
  const VarianceTerms var = variance_terms(inst);
  MseTerms out;
  out.b0_sq = squared_norm(grads.b0);
  out.sigma0_sq = var.sigma0_sq;
  out.sigma1_sq = var.sigma1_sq;
  out.kappa = var.kappa;
  const double b1 = std::sqrt(squared_norm(grads.b1));
  out.b1_over_b0 = out.b0_sq > 0.0 ? b1 / std::sqrt(out.b0_sq) : (b1 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
  return out;
}

double mse_at(const MseTerms& t, double alpha) {
  const double beta = 1.0 - alpha;
  return beta * beta * t.b0_sq + beta * beta * t.sigma0_sq + alpha * alpha * t.sigma1_sq +
         2.0 * alpha * beta * t.kappa;
}

std::vector<double> mse_curve(const EnumInstance& inst, std::span<const double> alphas) {
  const MseTerms terms = mse_terms(inst);
  std::vector<double> out(alphas.size());
  std::transform(alphas.begin(), alphas.end(), out.begin(), [&](double a) { return mse_at(terms, a); });
  return out;
}

namespace {

OracleAlpha ratio_or_degenerate(double num, double den, double scale) {
  // Denominators at round-off level relative to the inputs count as zero.
  if (!(std::abs(den) > 1e-14 * std::max(scale, std::numeric_limits<double>::min()))) {
    return {0.0, true};
  }
  return {std::clamp(num / den, 0.0, 1.0), false};
}

}  // namespace

OracleAlpha oracle_alpha_exact(const MseTerms& t) {
  const double num = t.b0_sq + t.sigma0_sq - t.kappa;
  const double den = t.b0_sq + t.sigma0_sq + t.sigma1_sq - 2.0 * t.kappa;
  return ratio_or_degenerate(num, den, t.b0_sq + t.sigma0_sq + t.sigma1_sq + 2.0 * std::abs(t.kappa));
}

OracleAlpha oracle_alpha_exact(const EnumInstance& inst) { return oracle_alpha_exact(mse_terms(inst)); }

OracleAlpha oracle_alpha_simplified(const MseTerms& t) {
  return ratio_or_degenerate(t.b0_sq, t.b0_sq + t.sigma1_sq, t.b0_sq + t.sigma1_sq);
}

OracleAlpha oracle_alpha_simplified(const EnumInstance& inst) { return oracle_alpha_simplified(mse_terms(inst)); }

BoundCheck check_second_moment_bound(const EnumInstance& inst, double alpha, double c) {
  inst.validate();
  double moment = 0.0;
  for (std::size_t x = 0; x < inst.size(); ++x) {
    const double mix = 1.0 - alpha + alpha * inst.w_bar(x);
    moment += inst.p_rollout[x] * mix * mix * inst.advantage[x] * inst.advantage[x] * squared_norm(inst.scores[x]);
  }
  const double m_a = inst.max_abs_advantage();
  const double m_s = inst.max_score_norm();
  const double factor = 1.0 + alpha * (c - 1.0);
  BoundCheck out;
  out.second_moment = moment;
  out.bound = factor * factor * m_a * m_a * m_s * m_s;
  out.slack = out.bound - out.second_moment;
  out.holds = out.slack >= 0.0;
  return out;
}

RecoveryCheck check_on_policy_recovery(const EnumInstance& inst, std::span<const double> gating, double tol) {
  inst.validate();
  if (gating.size() != inst.size()) {
    throw std::invalid_argument("gating must supply one alpha per outcome");
  }
  const auto corrected = weighted_sum(inst, [&](std::size_t x) {
    return inst.p_rollout[x] * (1.0 - gating[x] + gating[x] * inst.w_bar(x));
  });
  const auto g = weighted_sum(inst, [&](std::size_t x) { return inst.p_train[x]; });
  RecoveryCheck out;
  for (std::size_t j = 0; j < g.size(); ++j) {
    out.max_abs_diff = std::max(out.max_abs_diff, std::abs(corrected[j] - g[j]));
  }
  out.holds = out.max_abs_diff <= tol;
  return out;
}

bool SuiteReport::passed() const noexcept {
  return oracle_grid.failed == 0 && oracle_minimum.failed == 0 && simplified_oracle.failed == 0 &&
         second_moment.failed == 0 && on_policy_recovery.failed == 0 && is_unbiased.failed == 0;
}

namespace {

void record(CheckSummary& summary, bool ok, std::uint64_t seed) {
  ++summary.checked;
  if (!ok) {
    ++summary.failed;
    if (!summary.first_failing_seed) {
      summary.first_failing_seed = seed;
    }
  }
}

PolicyInstanceOptions random_options(RngStream& r) {
  PolicyInstanceOptions opt;
  opt.vocab_size = r.uniform_int(2, 4);
  const int max_horizon = opt.vocab_size == 2 ? 4 : (opt.vocab_size == 3 ? 4 : 4);
  opt.horizon = r.uniform_int(1, max_horizon);
  opt.param_scale = 0.25 + 1.5 * r.uniform();
  opt.mismatch_scale = std::pow(10.0, -2.0 + 2.0 * r.uniform());
  return opt;
}

}  // namespace

SuiteReport run_suite(const SuiteOptions& options) {
  if (options.grid_points < 2) {
    throw std::invalid_argument("grid_points must be >= 2");
  }
  SuiteReport report;
  report.grid_spacing = 1.0 / static_cast<double>(options.grid_points - 1);
  std::vector<double> grid(static_cast<std::size_t>(options.grid_points));
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = static_cast<double>(i) * report.grid_spacing;
  }
  report.oracle_minimum.worst = -std::numeric_limits<double>::infinity();
  report.second_moment.worst = std::numeric_limits<double>::infinity();

  const RngStream root{options.seed};

  for (int i = 0; i < options.num_instances; ++i) {
    const RngStream stream = root.child("oracle").child(static_cast<std::uint64_t>(i));
    RngStream opt_rng = stream.child("options");
    const auto opt = random_options(opt_rng);
    const EnumInstance inst = make_policy_instance(opt, stream.child("instance"));
    const MseTerms terms = mse_terms(inst);
    report.max_b1_over_b0 = std::max(report.max_b1_over_b0, terms.b1_over_b0);

    // Closed form against the grid argmin.
    const OracleAlpha exact = oracle_alpha_exact(terms);
    std::size_t best = 0;
    double best_mse = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const double m = mse_at(terms, grid[k]);
      if (m < best_mse) {
        best_mse = m;
        best = k;
      }
    }
    const double gap = std::abs(exact.alpha - grid[best]);
    report.oracle_grid.worst = std::max(report.oracle_grid.worst, gap);
    record(report.oracle_grid, exact.degenerate || gap <= report.grid_spacing, stream.key());

    const double excess = mse_at(terms, exact.alpha) - best_mse;
    const double excess_tol = 1e-12 * std::max(1.0, std::abs(best_mse));
    report.oracle_minimum.worst = std::max(report.oracle_minimum.worst, excess);
    record(report.oracle_minimum, excess <= excess_tol, stream.key());

    // Untruncated importance sampling is exactly unbiased.
    EnumInstance untruncated = inst;
    untruncated.c.reset();
    const GradientTerms grads = exact_gradients(untruncated);
    double bias = 0.0;
    for (const double b : grads.b1) {
      bias = std::max(bias, std::abs(b));
    }
    report.is_unbiased.worst = std::max(report.is_unbiased.worst, bias);
    record(report.is_unbiased, bias <= 1e-12, stream.key());

    // Identical distributions: any gating recovers g.
    PolicyInstanceOptions same = opt;
    same.mismatch_scale = 0.0;
    const EnumInstance matched = make_policy_instance(same, stream.child("instance"));
    RngStream gate_rng = stream.child("gating");
    std::vector<double> gating(matched.size());
    for (double& a : gating) {
      a = gate_rng.uniform();
    }
    const RecoveryCheck recovery = check_on_policy_recovery(matched, gating);
    report.on_policy_recovery.worst = std::max(report.on_policy_recovery.worst, recovery.max_abs_diff);
    record(report.on_policy_recovery, recovery.holds, stream.key());

    // Dominant-variance family: the simplified oracle tracks the exact one.
    const EnumInstance dominated = make_dominant_variance_instance(stream.child("dominated"));
    const double diff =
        std::abs(oracle_alpha_simplified(dominated).alpha - oracle_alpha_exact(dominated).alpha);
    report.simplified_oracle.worst = std::max(report.simplified_oracle.worst, diff);
    record(report.simplified_oracle, diff < options.dominance_tol, stream.key());
  }

  // Second-moment bound over ten times as many instances.
  for (int i = 0; i < 10 * options.num_instances; ++i) {
    const RngStream stream = root.child("bound").child(static_cast<std::uint64_t>(i));
    RngStream opt_rng = stream.child("options");
    auto opt = random_options(opt_rng);
    for (const double c : {1.0, 2.0, 5.0}) {
      opt.c = c;
      const EnumInstance inst = make_policy_instance(opt, stream.child("instance"));
      for (const double alpha : {0.0, 0.5, 1.0}) {
        const BoundCheck check = check_second_moment_bound(inst, alpha, c * options.bound_c_scale);
        report.second_moment.worst = std::min(report.second_moment.worst, check.slack);
        record(report.second_moment, check.holds, stream.key());
      }
    }
  }
  if (report.second_moment.checked == 0) {
    report.second_moment.worst = 0.0;
  }
  if (report.oracle_minimum.checked == 0) {
    report.oracle_minimum.worst = 0.0;
  }
  return report;
}

std::string report_to_json(const SuiteReport& report, const SuiteOptions& options) {
  auto summary = [](const CheckSummary& s, const char* worst_label) {
    nlohmann::json j;
    j["checked"] = s.checked;
    j["failed"] = s.failed;
    j[worst_label] = s.worst;
    j["first_failing_instance_seed"] = s.first_failing_seed ? nlohmann::json(*s.first_failing_seed) : nlohmann::json();
    return j;
  };
  nlohmann::json j;
  j["passed"] = report.passed();
  j["num_instances"] = options.num_instances;
  j["seed"] = options.seed;
  j["grid_points"] = options.grid_points;
  j["grid_spacing"] = report.grid_spacing;
  j["oracle_alpha_vs_grid"] = summary(report.oracle_grid, "max_abs_gap");
  j["oracle_alpha_is_minimum"] = summary(report.oracle_minimum, "max_mse_excess");
  j["simplified_vs_exact"] = summary(report.simplified_oracle, "max_abs_diff");
  j["simplified_vs_exact"]["tolerance"] = options.dominance_tol;
  j["second_moment_bound"] = summary(report.second_moment, "min_slack");
  j["on_policy_recovery"] = summary(report.on_policy_recovery, "max_abs_diff");
  j["untruncated_is_unbiased"] = summary(report.is_unbiased, "max_abs_bias");
  j["max_b1_over_b0"] = report.max_b1_over_b0;
  return j.dump(2);
}

}  // namespace aisrl::theory
