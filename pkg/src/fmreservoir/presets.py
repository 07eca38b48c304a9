"""Default benchmark scans at full experimental scale.

Operating points (phi1, bias, beta) were picked from coarse tuning scans on
seeds disjoint from the ones the presets use.
"""

from __future__ import annotations

import copy

import numpy as np

from .errors import UsageError
from .scan import ScanSpec


def _phi0_grid(stop: float, num: int) -> list[float]:
    return [round(float(v), 12) for v in np.linspace(0.0, stop, num)]


PRESETS = {
    "narma10": {
        "task": "narma10",
        "replicates": 10,
        "base_seed": 0,
        "splits": [200, 1000, 2000],
        "ridge_lambda": 0.0,
        "reservoir": {
            "alpha": 0.81, "m": 2.0, "phi1": 1.0, "n_neurons": 13,
            "input_encoding": "sine", "input_bias": 0.75, "beta": 0.02,
        },
        "grid": {"phi0": [round(0.1 * i, 1) for i in range(37)]},
    },
    "channel": {
        "task": "channel",
        "replicates": 10,
        "base_seed": 0,
        "splits": [200, 3000, 6000],
        "ridge_lambda": 0.0,
        "reservoir": {
            "alpha": 0.81, "m": 2.0, "phi1": 0.5, "n_neurons": 13,
            "input_encoding": "sine", "input_bias": 0.75, "beta": 0.1,
        },
        "grid": {"snr_db": [12, 16, 20, 24, 28, 32], "phi0": _phi0_grid(np.pi, 9)},
    },
    "memory": {
        "task": "memory",
        "replicates": 10,
        "base_seed": 0,
        "splits": [200, 2000, 1000],
        "ridge_lambda": 0.0,
        "reservoir": {
            "alpha": 0.81, "m": 2.0, "phi1": 1.0, "n_neurons": 13, "input_encoding": "sine",
        },
        "grid": {
            "input_bias": [0.0, 0.25, 0.5, 0.75, 1.0],
            "beta": [0.1, 0.5, 1.0],
            "phi0": _phi0_grid(np.pi / 2, 5),
        },
        "options": {"k_max": 30, "threshold": 0.1},
    },
    "classification": {
        "task": "classification",
        "replicates": 5,
        "base_seed": 0,
        "ridge_lambda": 1e-6,
        "reservoir": {
            "alpha": 0.81, "m": 2.0, "phi1": 1.0, "n_neurons": 13,
            "input_encoding": "sine", "input_bias": 0.3, "beta": 0.5,
        },
        "grid": {"phi0": _phi0_grid(np.pi, 5)},
        "options": {"length": 100, "n_classes": 3},
    },
}


def preset(task: str, overrides: dict | None = None, n_neurons: int | None = None,
           replicates: int | None = None, base_seed: int | None = None) -> ScanSpec:
    """Build the default scan for ``task`` with optional overrides.

    ``overrides`` follows the scan-spec schema; its ``reservoir``, ``grid``
    and ``options`` mappings are merged key by key into the preset. Setting
    ``n_neurons`` away from 13 also sets ``m`` to ``"auto"`` (the smallest
    depth populating that many lines) unless ``m`` is given explicitly.
    """
    if task not in PRESETS:
        raise UsageError(f"unknown task {task!r}; choose from {', '.join(PRESETS)}")
    data = copy.deepcopy(PRESETS[task])
    for key, value in (overrides or {}).items():
        if key in ("reservoir", "grid", "options") and isinstance(value, dict):
            data.setdefault(key, {}).update(value)
        else:
            data[key] = value
    if data.get("task", task) != task:
        raise UsageError(f"task: config says {data['task']!r} but --task is {task!r}")
    if n_neurons is not None:
        data["reservoir"]["n_neurons"] = n_neurons
        explicit_m = "m" in (overrides or {}).get("reservoir", {})
        if n_neurons != 13 and not explicit_m:
            data["reservoir"]["m"] = "auto"
    if replicates is not None:
        data["replicates"] = replicates
    if base_seed is not None:
        data["base_seed"] = base_seed
    return ScanSpec.from_dict(data)
