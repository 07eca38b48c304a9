"""Command-line entry point: ``fmreservoir {simulate,bench,scan}``.

Every command writes ``manifest.json`` next to its outputs. Passing that
manifest back as ``--config`` replays the run with the same resolved
settings and reproduces the output files byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import platform
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np
import scipy
import yaml

from . import __version__, presets, tasks
from .errors import DomainError, NumericalInstabilityError, UsageError
from .scan import ScanResult, ScanSpec, best_point, dataset_seed, run_scan
from .sidebands import ReservoirConfig, populating_depth, run_sequence

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

GENERATORS = ("zero", "uniform", "narma10", "channel")
MANIFEST_VERSION = 1


# -- config and manifest helpers --------------------------------------------


def _read_yaml(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" (line {mark.line + 1}, column {mark.column + 1})" if mark else ""
        raise UsageError(f"{path}: malformed config{where}: {getattr(exc, 'problem', exc)}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: top level must be a mapping")
    return data


def _manifest_payload(data: dict, command: str) -> Optional[dict]:
    if "manifest_version" not in data:
        return None
    if data.get("command") != command:
        raise UsageError(f"manifest was written by {data.get('command')!r}, not {command!r}")
    return data["resolved"]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, command: str, resolved: dict, outputs: list[Path],
                    started: float, seeds: dict) -> Path:
    manifest = {
        "manifest_version": MANIFEST_VERSION,
        "command": command,
        "resolved": resolved,
        "seeds": seeds,
        "software": {
            "fmreservoir": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wall_clock": {
            "started": _dt.datetime.fromtimestamp(started, _dt.timezone.utc).isoformat(),
            "elapsed_s": round(time.time() - started, 3),
        },
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _reservoir_from(data: dict) -> ReservoirConfig:
    fields = data.get("reservoir", data)
    if not isinstance(fields, dict):
        raise UsageError("reservoir: must be a mapping")
    fields = dict(fields)
    if fields.get("m") == "auto":
        fields["m"] = populating_depth(int(fields.get("n_neurons", 13)))
    try:
        return ReservoirConfig.from_dict(fields)
    except TypeError as exc:
        raise UsageError(f"reservoir: {exc}") from exc
    except DomainError as exc:
        raise UsageError(f"reservoir: {exc}") from exc


# -- simulate ----------------------------------------------------------------


def _read_inputs(path) -> np.ndarray:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if first.startswith("#"):
        return tasks.TaskDataset.from_csv(path).inputs
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        return np.zeros(0)
    column = 0
    try:
        float(rows[0][0])
    except ValueError:
        header = [h.strip() for h in rows[0]]
        column = header.index("input") if "input" in header else 0
        rows = rows[1:]
    try:
        return np.array([float(row[column]) for row in rows])
    except (ValueError, IndexError) as exc:
        raise UsageError(f"{path}: cannot parse input column: {exc}") from exc


def _generate_inputs(name: str, length: int, seed: int, snr_db: float) -> np.ndarray:
    if name == "zero":
        return np.zeros(length)
    if name == "uniform":
        return tasks.gen_memory_inputs(length, seed).inputs
    if name == "narma10":
        return tasks.gen_narma10(length, seed).inputs
    if name == "channel":
        return tasks.gen_channel(length, snr_db, seed).inputs
    raise UsageError(f"unknown generator {name!r}; choose from {', '.join(GENERATORS)}")


def intensity_csv(intensities: np.ndarray, config: ReservoirConfig) -> str:
    half = (config.n_neurons - 1) // 2
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["n", *(f"k={k}" for k in range(-half, half + 1))])
    for n, row in enumerate(intensities):
        writer.writerow([n, *(repr(float(v)) for v in row)])
    return buf.getvalue()


def cmd_simulate(args) -> int:
    started = time.time()
    data = _read_yaml(args.config) if args.config else {}
    resolved = _manifest_payload(data, "simulate")
    if resolved is None:
        source = {"generator": args.generator, "length": args.length, "seed": args.seed,
                  "snr_db": args.snr_db}
        if args.input:
            source = {"input_file": str(args.input),
                      "input_sha256": _sha256(Path(args.input)), "seed": args.seed}
        elif not args.generator:
            raise UsageError("simulate needs --input or --generator")
        resolved = {"reservoir": _reservoir_from(data).to_dict(), "source": source}
    config = _reservoir_from(resolved)
    source = resolved["source"]
    if "input_file" in source:
        path = Path(source["input_file"])
        if not path.is_file():
            raise UsageError(f"input file {path} not found")
        if _sha256(path) != source["input_sha256"]:
            raise UsageError(f"input file {path} changed since the manifest was written")
        inputs = _read_inputs(path)
    else:
        inputs = _generate_inputs(source["generator"], int(source["length"]),
                                  int(source["seed"]), float(source["snr_db"]))
    seed = int(source.get("seed", 0) or 0)
    try:
        intensities = run_sequence(inputs, config, rng=tasks.noise_rng(seed))
    except DomainError as exc:
        raise UsageError(f"inputs: {exc}") from exc

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    trace = out_dir / "intensities.csv"
    trace.write_text(intensity_csv(intensities, config), encoding="utf-8")
    _write_manifest(out_dir, "simulate", resolved, [trace], started, {"noise_seed": seed})
    print(f"wrote {trace} ({intensities.shape[0]} x {intensities.shape[1]})")
    return EXIT_OK


# -- bench -------------------------------------------------------------------


def _record_summary(rec, metric: str) -> dict:
    return {
        "index": rec.index,
        "params": rec.params,
        "mean": rec.mean.get(metric),
        "std": rec.std.get(metric),
        "values": rec.values.get(metric, []),
    }


def bench_report(result: ScanResult) -> tuple[dict, Optional[str]]:
    """Summarize a preset scan; returns the JSON report and an optional CSV table."""
    spec = result.spec
    metric, direction = tasks.PRIMARY_METRIC[spec.task]
    config = spec.config_for({})
    report = {
        "task": spec.task,
        "metric": metric,
        "direction": direction,
        "n_neurons": config.n_neurons,
        "m": config.m,
        "replicates": spec.replicates,
        "all_points_ok": result.ok,
    }
    table = None
    if spec.task == "channel" and "snr_db" in spec.grid:
        rows = []
        for snr in spec.grid["snr_db"]:
            subset = [r for r in result.records if r.params["snr_db"] == float(snr)]
            rows.append({"snr_db": float(snr), **_record_summary(best_point(result, records=subset), metric)})
        report["per_snr"] = rows
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["snr_db", "ser_mean", "ser_std", "phi0"])
        for row in rows:
            writer.writerow([repr(row["snr_db"]), repr(row["mean"]), repr(row["std"]),
                             repr(row["params"].get("phi0", config.phi0))])
        table = buf.getvalue()
    elif spec.task == "memory":
        report["columns"] = {
            name: _record_summary(best_point(result, "max", name), name)
            for name in ("lmc", "qmc", "xmc", "total")
        }
        best = best_point(result, "max", "total")
        options = dict(spec.options)
        capacity = tasks.memory_capacities(
            spec.config_for(best.params),
            k_max=options.get("k_max", 30),
            threshold=options.get("threshold", 0.1),
            seed=dataset_seed(spec.base_seed, spec.task, 0),
            splits=spec.splits,
            length=sum(spec.splits) if spec.splits else 3200,
            ridge_lambda=spec.ridge_lambda,
            include_k0=options.get("include_k0", True),
        )
        report["capacity_report"] = capacity.to_dict()
    else:
        report["best"] = _record_summary(best_point(result), metric)
    return report, table


def _print_report(report: dict) -> None:
    metric = report["metric"]
    if "per_snr" in report:
        for row in report["per_snr"]:
            print(f"SNR {row['snr_db']:5.1f} dB: {metric} = {row['mean']:.5f} +/- {row['std']:.5f}")
    elif "columns" in report:
        for name, row in report["columns"].items():
            print(f"{name.upper():5s} = {row['mean']:.3f} +/- {row['std']:.3f}  at {row['params']}")
    else:
        row = report["best"]
        print(f"{report['task']} (N={report['n_neurons']}): {metric} = "
              f"{row['mean']:.4f} +/- {row['std']:.4f}  at {row['params']}")


def cmd_bench(args) -> int:
    started = time.time()
    data = _read_yaml(args.config) if args.config else {}
    resolved = _manifest_payload(data, "bench")
    if resolved is None:
        if not args.task:
            raise UsageError(f"bench needs --task; choose from {', '.join(presets.PRESETS)}")
        spec = presets.preset(args.task, data, n_neurons=args.neurons,
                              replicates=args.replicates, base_seed=args.seed)
        resolved = {"spec": spec.to_dict()}
    else:
        spec = ScanSpec.from_dict(resolved["spec"])

    result = run_scan(spec, threads=args.threads)
    report, table = bench_report(result)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = result.write(out_dir, stem=f"{spec.task}_scan")
    report_path = out_dir / f"{spec.task}_report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    outputs.append(report_path)
    if table is not None:
        table_path = out_dir / "ser_vs_snr.csv"
        table_path.write_text(table, encoding="utf-8")
        outputs.append(table_path)
    _write_manifest(out_dir, "bench", resolved, outputs, started,
                    {"base_seed": spec.base_seed,
                     "datasets": [dataset_seed(spec.base_seed, spec.task, r)
                                  for r in range(spec.replicates)]})
    _print_report(report)
    return EXIT_OK if result.ok else EXIT_NUMERIC


# -- scan --------------------------------------------------------------------


def cmd_scan(args) -> int:
    started = time.time()
    if not args.config:
        raise UsageError("scan needs --config SPEC")
    data = _read_yaml(args.config)
    resolved = _manifest_payload(data, "scan")
    spec = ScanSpec.from_dict(resolved["spec"] if resolved else data)
    if args.seed is not None and resolved is None:
        spec.base_seed = args.seed
    resolved = {"spec": spec.to_dict()}
    result = run_scan(spec, threads=args.threads)
    out_dir = Path(args.out_dir)
    outputs = result.write(out_dir)
    _write_manifest(out_dir, "scan", resolved, outputs, started,
                    {"base_seed": spec.base_seed,
                     "datasets": [dataset_seed(spec.base_seed, spec.task, r)
                                  for r in range(spec.replicates)]})
    failed = [r for r in result.records if not r.ok]
    print(f"{len(result.records)} grid points, {len(failed)} failed; wrote {outputs[0]}")
    for rec in failed:
        print(f"  point {rec.index} {rec.params}: {rec.errors[0]}", file=sys.stderr)
    return EXIT_OK if not failed else EXIT_NUMERIC


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fmreservoir",
        description="Frequency-multiplexed photonic reservoir simulator and benchmarks.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML config, or a manifest.json to replay")
        p.add_argument("--out-dir", default="out", help="output directory (default: out)")
        p.add_argument("--seed", type=int, default=None, help="base seed")
        p.add_argument("--threads", type=int, default=1, help="worker processes for scans")

    p = sub.add_parser("simulate", help="drive the reservoir and write its intensity trace")
    common(p)
    p.add_argument("--input", help="CSV with an 'input' column (values in [-1, 1])")
    p.add_argument("--generator", choices=GENERATORS, help="generate the input sequence")
    p.add_argument("--length", type=int, default=100)
    p.add_argument("--snr-db", type=float, default=20.0, help="SNR for the channel generator")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run a benchmark with its default scan")
    common(p)
    p.add_argument("--task", choices=tuple(presets.PRESETS))
    p.add_argument("--neurons", type=int, default=None, help="readout sidebands (odd)")
    p.add_argument("--replicates", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("scan", help="run a parameter scan from a spec file")
    common(p)
    p.set_defaults(func=cmd_scan)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.seed is None:
        args.seed = 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalInstabilityError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
