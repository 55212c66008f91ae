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

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <span>
#include <string>
#include <vector>

#include "aisrl/config.hpp"
#include "aisrl/estimator.hpp"
#include "aisrl/experiment.hpp"
#include "aisrl/quantbench.hpp"
#include "aisrl/quantsim.hpp"
#include "aisrl/theory.hpp"
#include "aisrl/trainer.hpp"

namespace py = pybind11;

namespace {

aisrl::TrainConfig parse_config(const std::string& text) {
  return aisrl::config_from_json(nlohmann::json::parse(text));
}

std::vector<std::string> train_lines(const std::string& config_json) {
  const auto cfg = parse_config(config_json);
  std::vector<std::string> lines;
  {
    py::gil_scoped_release release;
    const auto result = aisrl::train(cfg);
    lines.reserve(result.metrics.size());
    for (const auto& m : result.metrics) {
      lines.push_back(aisrl::metrics_line(m));
    }
  }
  return lines;
}

std::string run_experiment_json(const std::string& config_json, const std::string& out_dir) {
  const auto cfg = parse_config(config_json);
  py::gil_scoped_release release;
  return aisrl::summary_to_json(aisrl::run_experiment(cfg, out_dir).summary).dump();
}

std::string oracle_suite_json(int num_instances, std::uint64_t seed, int grid_points) {
  aisrl::theory::SuiteOptions opt;
  opt.num_instances = num_instances;
  opt.seed = seed;
  opt.grid_points = grid_points;
  py::gil_scoped_release release;
  return aisrl::theory::report_to_json(aisrl::theory::run_suite(opt), opt);
}

std::string quantbench_json(const std::string& kind, int bits, long long num_tensors, std::uint64_t seed) {
  aisrl::QuantBenchOptions opt;
  switch (aisrl::parse_quant_kind(kind)) {
    case aisrl::QuantKind::kFull:
      opt.spec = aisrl::QuantSpec::full();
      break;
    case aisrl::QuantKind::kIntB:
      opt.spec = aisrl::QuantSpec::int_b(bits);
      break;
    case aisrl::QuantKind::kE4M3:
      opt.spec = aisrl::QuantSpec::e4m3();
      break;
  }
  opt.num_tensors = num_tensors;
  opt.seed = seed;
  py::gil_scoped_release release;
  return aisrl::quantbench_to_json(aisrl::run_quantbench(opt), opt);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the aisrl simulator";
  m.attr("__version__") = AISRL_VERSION;

  py::register_exception<aisrl::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<aisrl::NonFiniteError>(m, "NonFiniteError", PyExc_ArithmeticError);

  m.def(
      "quantize_symmetric",
      [](const std::vector<double>& x, int bits) { return aisrl::quantize_symmetric(std::span<const double>(x), bits); },
      py::arg("x"), py::arg("bits"));
  m.def("quantize_e4m3", py::overload_cast<double>(&aisrl::quantize_e4m3), py::arg("x"));
  m.def("e4m3_grid", &aisrl::e4m3_grid);

  m.def("group_advantage", [](const std::vector<double>& rewards) { return aisrl::group_advantage(rewards); },
        py::arg("rewards"));
  m.def(
      "alpha_ess",
      [](const std::vector<double>& weights) {
        const auto s = aisrl::alpha_ess(weights);
        return py::dict(py::arg("ess_ratio") = s.ess_ratio, py::arg("cv") = s.cv, py::arg("alpha_ess") = s.alpha_ess);
      },
      py::arg("truncated_weights"));
  m.def("alpha_mis", &aisrl::alpha_mis, py::arg("d_bar"), py::arg("delta"));
  m.def("alpha_var", &aisrl::alpha_var, py::arg("delta_sigma"), py::arg("gamma"));
  m.def("bilateral_alpha", py::overload_cast<double, double, double, double>(&aisrl::bilateral_alpha),
        py::arg("alpha_ess"), py::arg("alpha_var"), py::arg("alpha_mis"), py::arg("beta_var"));
  m.def("adjusted_advantage", &aisrl::adjusted_advantage, py::arg("advantage"), py::arg("w_bar"), py::arg("alpha"));

  m.def("resolve_config", [](const std::string& text) { return aisrl::config_to_json(parse_config(text)).dump(); },
        py::arg("config_json"));
  m.def("train_lines", &train_lines, py::arg("config_json"));
  m.def("run_experiment_json", &run_experiment_json, py::arg("config_json"), py::arg("out_dir"));
  m.def("oracle_suite_json", &oracle_suite_json, py::arg("num_instances"), py::arg("seed"), py::arg("grid_points"));
  m.def("quantbench_json", &quantbench_json, py::arg("kind"), py::arg("bits"), py::arg("num_tensors"),
        py::arg("seed"));
}
