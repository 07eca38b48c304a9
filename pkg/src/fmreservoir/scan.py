"""Grid scans over reservoir parameters with seeded replicates.

Replicate ``r`` of every grid point uses the same dataset seed, derived from
``(base_seed, task, r)``, so grid points are compared on identical data.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import itertools
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from . import tasks
from .errors import UsageError
from .readout import ReadoutWarning
from .sidebands import ReservoirConfig, populating_depth

TASK_PARAMS = ("ridge_lambda", "snr_db")
RESERVOIR_PARAMS = tuple(
    f.name for f in dataclasses.fields(ReservoirConfig) if f.name != "n_internal"
)
GRID_PARAMS = RESERVOIR_PARAMS + TASK_PARAMS
SPEC_FIELDS = ("task", "replicates", "base_seed", "splits", "reservoir", "grid", "options",
               "ridge_lambda", "snr_db")
TASK_OPTIONS = ("k_max", "threshold", "include_k0", "length", "n_classes")


def dataset_seed(base_seed: int, task: str, replicate: int) -> int:
    digest = hashlib.sha256(f"{base_seed}/{task}/{replicate}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass
class ScanSpec:
    """What to scan: a task, a parameter grid and the replication scheme.

    ``grid`` maps parameter names to value lists; points are enumerated as
    the Cartesian product in key order, last key fastest. ``reservoir`` holds
    the fixed parameters, and ``ridge_lambda``/``snr_db`` the fixed task
    parameters, that the grid overrides.
    """

    task: str
    grid: dict
    reservoir: dict = field(default_factory=dict)
    replicates: int = 10
    base_seed: int = 0
    splits: Optional[tuple] = None
    ridge_lambda: float = 0.0
    snr_db: float = 20.0
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.task not in tasks.TASKS:
            raise UsageError(f"task: unknown task {self.task!r}; choose from {', '.join(tasks.TASKS)}")
        if not self.grid:
            raise UsageError("grid: at least one parameter must be scanned")
        for name, values in self.grid.items():
            if name not in GRID_PARAMS:
                raise UsageError(f"grid.{name}: not a scannable parameter")
            if not isinstance(values, (list, tuple)) or len(values) == 0:
                raise UsageError(f"grid.{name}: needs a non-empty list of values")
        for name in self.reservoir:
            if name not in RESERVOIR_PARAMS:
                raise UsageError(f"reservoir.{name}: unknown reservoir field")
        for name in self.options:
            if name not in TASK_OPTIONS:
                raise UsageError(f"options.{name}: unknown task option")
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise UsageError(f"replicates: must be an integer >= 1, got {self.replicates!r}")
        if self.splits is not None:
            if len(self.splits) != 3 or any(int(s) != s or s < 0 for s in self.splits):
                raise UsageError(f"splits: need three non-negative integers, got {self.splits!r}")
            self.splits = tuple(int(s) for s in self.splits)
        self.grid = {k: list(v) for k, v in self.grid.items()}
        # fail early on invalid fixed parameters
        try:
            self.config_for({})
        except (TypeError, ValueError) as exc:
            raise UsageError(f"reservoir: {exc}") from exc

    @property
    def size(self) -> int:
        return math.prod(len(v) for v in self.grid.values())

    def points(self) -> list[dict]:
        names = list(self.grid)
        return [dict(zip(names, combo)) for combo in itertools.product(*self.grid.values())]

    def config_for(self, point: dict) -> ReservoirConfig:
        params = {**self.reservoir, **{k: v for k, v in point.items() if k in RESERVOIR_PARAMS}}
        if params.get("m") == "auto":
            params["m"] = populating_depth(int(params.get("n_neurons", 13)))
        return ReservoirConfig(**params)

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "splits": None if self.splits is None else list(self.splits),
            "ridge_lambda": self.ridge_lambda,
            "snr_db": self.snr_db,
            "reservoir": dict(self.reservoir),
            "grid": {k: list(v) for k, v in self.grid.items()},
            "options": dict(self.options),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScanSpec":
        if not isinstance(data, dict):
            raise UsageError("scan spec must be a mapping")
        for key in data:
            if key not in SPEC_FIELDS:
                raise UsageError(f"{key}: unknown scan spec field")
        if "task" not in data:
            raise UsageError("task: missing required field")
        if "grid" not in data:
            raise UsageError("grid: missing required field")
        grid = {}
        for name, values in (data["grid"] or {}).items():
            grid[name] = _expand_values(name, values)
        kwargs = {k: v for k, v in data.items() if k != "grid" and v is not None}
        for key in ("ridge_lambda", "snr_db"):
            if key in kwargs and not isinstance(kwargs[key], (int, float)):
                raise UsageError(f"{key}: must be a number")
        return cls(grid=grid, **kwargs)


def _expand_values(name: str, values: Any) -> list:
    if isinstance(values, dict):
        try:
            start, stop, num = float(values["start"]), float(values["stop"]), int(values["num"])
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"grid.{name}: range needs numeric start, stop and num") from exc
        if num < 1:
            raise UsageError(f"grid.{name}: num must be >= 1")
        return [round(float(v), 12) for v in np.linspace(start, stop, num)]
    if isinstance(values, (int, float, str)):
        return [values]
    if isinstance(values, (list, tuple)):
        return list(values)
    raise UsageError(f"grid.{name}: expected a list, a scalar or a start/stop/num range")


def load_spec(path) -> ScanSpec:
    """Read a scan spec from YAML (JSON is accepted too)."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    if isinstance(data, dict) and "resolved" in data and "command" in data:
        data = data["resolved"]["spec"]
    return ScanSpec.from_dict(data)


@dataclass
class ScanRecord:
    """Outcome of one grid point across its replicates."""

    index: int
    params: dict
    values: dict
    mean: dict
    std: dict
    wall_time: float = 0.0
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "params": self.params,
            "values": self.values,
            "mean": self.mean,
            "std": self.std,
            "errors": self.errors,
            "warnings": self.warnings,
        }


@dataclass
class ScanResult:
    spec: ScanSpec
    records: list

    @property
    def metrics(self) -> list[str]:
        names: list[str] = []
        for rec in self.records:
            for name in rec.mean:
                if name not in names:
                    names.append(name)
        return names

    @property
    def ok(self) -> bool:
        return all(rec.ok for rec in self.records)

    def to_dict(self) -> dict:
        return {"spec": self.spec.to_dict(), "records": [r.to_dict() for r in self.records]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"

    def to_csv(self) -> str:
        names = list(self.spec.grid)
        metrics = self.metrics
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["index", *names]
        for metric in metrics:
            header += [f"{metric}_mean", f"{metric}_std"]
        writer.writerow(header + ["n_ok", "error"])
        for rec in self.records:
            row = [rec.index, *(_cell(rec.params[n]) for n in names)]
            for metric in metrics:
                row += [_cell(rec.mean.get(metric, "")), _cell(rec.std.get(metric, ""))]
            n_ok = len(next(iter(rec.values.values()), []))
            writer.writerow(row + [n_ok, "; ".join(rec.errors)])
        return buf.getvalue()

    def write(self, out_dir, stem: str = "scan") -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        paths = [out / f"{stem}.csv", out / f"{stem}.json"]
        paths[0].write_text(self.to_csv(), encoding="utf-8")
        paths[1].write_text(self.to_json(), encoding="utf-8")
        return paths


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _run_unit(spec: ScanSpec, point: dict, replicate: int):
    seed = dataset_seed(spec.base_seed, spec.task, replicate)
    options = dict(spec.options)
    ridge = point.get("ridge_lambda", spec.ridge_lambda)
    if spec.task == "channel":
        options["snr_db"] = point.get("snr_db", spec.snr_db)
    if spec.splits is not None and spec.task != "classification":
        options["splits"] = spec.splits
    start = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ReadoutWarning)
        try:
            metrics = tasks.evaluate(spec.task, spec.config_for(point), seed, ridge, **options)
            error = None
        except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
            metrics, error = {}, f"replicate {replicate}: {type(exc).__name__}: {exc}"
    notes = sorted({str(w.message) for w in caught if issubclass(w.category, ReadoutWarning)})
    return metrics, error, notes, time.perf_counter() - start


def _run_point(args):
    spec, index, point = args
    outcomes = [_run_unit(spec, point, r) for r in range(spec.replicates)]
    values: dict = {}
    errors = []
    notes: set = set()
    wall = 0.0
    for metrics, error, caught, elapsed in outcomes:
        wall += elapsed
        notes.update(caught)
        if error:
            errors.append(error)
        for name, value in metrics.items():
            values.setdefault(name, []).append(float(value))
    mean = {k: float(np.mean(v)) for k, v in values.items()}
    std = {k: float(np.std(v, ddof=1)) if len(v) > 1 else 0.0 for k, v in values.items()}
    params = {k: (float(v) if isinstance(v, (int, float)) and not isinstance(v, bool) else v)
              for k, v in point.items()}
    return ScanRecord(index, params, values, mean, std, wall, errors, sorted(notes))


def run_scan(spec: ScanSpec, threads: int = 1) -> ScanResult:
    """Evaluate every grid point on ``spec.replicates`` seeded datasets.

    Failures are recorded per point and do not stop the scan. With
    ``threads > 1`` grid points run in worker processes; records are always
    returned in grid order.
    """
    jobs = [(spec, i, p) for i, p in enumerate(spec.points())]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_run_point, jobs))
    else:
        records = [_run_point(job) for job in jobs]
    records.sort(key=lambda rec: rec.index)
    return ScanResult(spec, records)


def best_point(result: ScanResult, direction: Optional[str] = None, metric: Optional[str] = None,
               records=None) -> ScanRecord:
    """Record with the best mean ``metric``; ties keep the earlier grid point.

    ``metric`` and ``direction`` default to the task's headline metric.
    ``records`` restricts the search to a subset (e.g. one SNR value).
    """
    default_metric, default_direction = tasks.PRIMARY_METRIC[result.spec.task]
    metric = metric or default_metric
    direction = direction or default_direction
    if direction not in ("min", "max"):
        raise UsageError(f"direction must be 'min' or 'max', got {direction!r}")
    pool = result.records if records is None else records
    candidates = [r for r in pool if metric in r.mean and np.isfinite(r.mean[metric])]
    if not candidates:
        raise UsageError(f"no record carries metric {metric!r}")
    sign = 1.0 if direction == "min" else -1.0
    best = candidates[0]
    for rec in candidates[1:]:
        if sign * rec.mean[metric] < sign * best.mean[metric]:
            best = rec
    return best
