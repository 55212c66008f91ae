# Copyright 2026 The aisrl Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Python interface to the aisrl simulator core."""

import json
from typing import Any, Dict, List, Optional

from aisrl._core import (
    ConfigError,
    NonFiniteError,
    __version__,
    adjusted_advantage,
    alpha_ess,
    alpha_mis,
    alpha_var,
    bilateral_alpha,
    e4m3_grid,
    group_advantage,
    quantize_e4m3,
    quantize_symmetric,
)
from aisrl import _core

__all__ = [
    "ConfigError",
    "NonFiniteError",
    "__version__",
    "adjusted_advantage",
    "alpha_ess",
    "alpha_mis",
    "alpha_var",
    "bilateral_alpha",
    "e4m3_grid",
    "group_advantage",
    "oracle_suite",
    "quantbench",
    "quantize_e4m3",
    "quantize_symmetric",
    "resolve_config",
    "run_experiment",
    "train",
]


def resolve_config(config: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """Returns the fully resolved configuration, defaults filled in."""
    return json.loads(_core.resolve_config(json.dumps(config or {})))


def train(config: Optional[Dict[str, Any]] = None) -> List[Dict[str, Any]]:
    """Trains in memory and returns one metrics record per step."""
    return [json.loads(line) for line in _core.train_lines(json.dumps(config or {}))]


def run_experiment(config: Optional[Dict[str, Any]], out_dir: str) -> Dict[str, Any]:
    """Trains and writes a run directory; returns the run summary."""
    return json.loads(_core.run_experiment_json(json.dumps(config or {}), str(out_dir)))


def oracle_suite(num_instances: int = 100, seed: int = 0, grid_points: int = 10001) -> Dict[str, Any]:
    """Runs the enumerable-instance checks and returns the report."""
    return json.loads(_core.oracle_suite_json(num_instances, seed, grid_points))


def quantbench(kind: str = "e4m3", bits: int = 8, num_tensors: int = 1000, seed: int = 0) -> Dict[str, Any]:
    """Property-checks a quantizer on random tensors and returns the report."""
    return json.loads(_core.quantbench_json(kind, bits, num_tensors, seed))
