"""Benchmark tasks: seeded generators, metrics and end-to-end pipelines."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import readout
from .errors import DomainError, UsageError
from .sidebands import ReservoirConfig, run_sequence

SYMBOLS = np.array([-3.0, -1.0, 1.0, 3.0])

# q(n) = sum_t CHANNEL_TAPS[t] * d(n + 2 - t)
CHANNEL_TAPS = np.array([0.08, -0.12, 1.0, 0.18, -0.1, 0.091, -0.05, 0.04, 0.03, 0.01])
CHANNEL_LOOKAHEAD = 2
CHANNEL_HISTORY = len(CHANNEL_TAPS) - CHANNEL_LOOKAHEAD - 1

NARMA_ORDER = 10
NARMA_DIVERGENCE = 10.0
NARMA_MAX_RETRIES = 100

DEFAULT_WARMUP = 200

TASKS = ("narma10", "channel", "memory", "classification")

# primary metric and whether smaller is better
PRIMARY_METRIC = {
    "narma10": ("nmse", "min"),
    "channel": ("ser", "min"),
    "memory": ("total", "max"),
    "classification": ("error_rate", "min"),
}


@dataclass
class TaskDataset:
    """Input/target sequences of one benchmark instance.

    ``inputs`` is already conditioned to [-1, 1]. ``targets`` is aligned with
    ``inputs``: ``targets[n]`` is what the readout should produce after the
    reservoir has absorbed ``inputs[n]``. ``aux`` holds raw sequences needed
    to re-derive the targets; ``meta`` holds scalars.
    """

    name: str
    inputs: np.ndarray
    targets: np.ndarray
    splits: tuple[int, int, int]
    seed: int
    aux: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def split(self, intensities: np.ndarray) -> readout.SplitDataset:
        return readout.split_run(intensities, self.targets, *self.splits)

    def to_csv(self, path) -> None:
        """Write ``index, input, target..., aux...`` columns.

        The first line is a ``#`` comment carrying name, seed and splits.
        Auxiliary sequences are written only when they match the input length.
        """
        targets = self.targets.reshape(len(self), -1)
        target_cols = ["target"] if self.targets.ndim == 1 else [
            f"target_{j}" for j in range(targets.shape[1])
        ]
        aux = {k: v for k, v in self.aux.items() if np.ndim(v) == 1 and len(v) == len(self)}
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w, tr, te = self.splits
            fh.write(f"# task={self.name} seed={self.seed} warmup={w} train={tr} test={te}\n")
            writer = csv.writer(fh)
            writer.writerow(["index", "input", *target_cols, *aux])
            for n in range(len(self)):
                row = [n, _fmt(self.inputs[n]), *(_fmt(v) for v in targets[n])]
                row += [_fmt(a[n]) for a in aux.values()]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "TaskDataset":
        with open(path, newline="", encoding="utf-8") as fh:
            header = fh.readline()
            if not header.startswith("#"):
                raise UsageError(f"{path}: missing '# task=...' header line")
            meta = dict(item.split("=", 1) for item in header[1:].split())
            reader = csv.reader(fh)
            columns = next(reader)
            rows = np.array([[float(v) for v in row] for row in reader], dtype=float)
        rows = rows.reshape(-1, len(columns))
        col = {name: rows[:, i] for i, name in enumerate(columns)}
        target_names = [c for c in columns if c == "target" or c.startswith("target_")]
        targets = col["target"] if target_names == ["target"] else np.column_stack(
            [col[c] for c in target_names]
        )
        aux = {c: col[c] for c in columns if c not in ("index", "input", *target_names)}
        return cls(
            name=meta["task"],
            inputs=col["input"],
            targets=targets,
            splits=(int(meta["warmup"]), int(meta["train"]), int(meta["test"])),
            seed=int(meta["seed"]),
            aux=aux,
        )


def _fmt(value: float) -> str:
    return repr(float(value))


def default_splits(length: int, test_fraction: float = 1 / 3) -> tuple[int, int, int]:
    warmup = min(DEFAULT_WARMUP, length // 4)
    test = int((length - warmup) * test_fraction)
    return warmup, length - warmup - test, test


def _check_splits(splits, length: int) -> tuple[int, int, int]:
    splits = tuple(int(s) for s in splits)
    if len(splits) != 3 or min(splits) < 0 or sum(splits) != length:
        raise UsageError(f"splits {splits} do not partition a sequence of length {length}")
    return splits


# -- memory capacities ------------------------------------------------------


def gen_memory_inputs(length: int, seed: int, splits=None) -> TaskDataset:
    """I.i.d. uniform inputs on [-1, 1]; targets are built per delay later."""
    if length < 1:
        raise DomainError(f"length must be >= 1, got {length}")
    rng = np.random.default_rng(seed)
    u = rng.uniform(-1.0, 1.0, length)
    splits = _check_splits(splits or default_splits(length), length)
    return TaskDataset("memory", u, u.copy(), splits, seed)


def capacity(predicted, target) -> float:
    """``max(0, 1 - NMSE)``; works column-wise on matrices."""
    c = np.maximum(0.0, 1.0 - np.asarray(readout.nmse(predicted, target)))
    return float(c) if c.ndim == 0 else c


@dataclass
class CapacityReport:
    """Linear, quadratic and cross memory capacities of one reservoir run.

    ``linear[k]`` and ``quadratic[k]`` are the retained capacities at delay
    ``k``; ``cross[k, k2]`` (``k < k2``) those of ``u(n-k) u(n-k2)``.
    Capacities at or below ``threshold`` are stored as 0.
    """

    lmc: float
    qmc: float
    xmc: float
    total: float
    linear: np.ndarray
    quadratic: np.ndarray
    cross: np.ndarray
    threshold: float
    k_max: int
    n_neurons: int

    @property
    def within_bound(self) -> bool:
        return self.total <= self.n_neurons

    def to_dict(self) -> dict:
        pairs = [
            [int(k), int(k2), float(self.cross[k, k2])]
            for k, k2 in zip(*np.nonzero(self.cross))
        ]
        return {
            "lmc": self.lmc,
            "qmc": self.qmc,
            "xmc": self.xmc,
            "total": self.total,
            "threshold": self.threshold,
            "k_max": self.k_max,
            "n_neurons": self.n_neurons,
            "within_bound": self.within_bound,
            "linear": self.linear.tolist(),
            "quadratic": self.quadratic.tolist(),
            "cross": pairs,
        }


def _delayed(u: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros_like(u)
    out[k:] = u[: u.size - k]
    return out


def capacities_from_features(
    features: np.ndarray,
    inputs: np.ndarray,
    splits: tuple[int, int, int],
    k_max: int = 30,
    threshold: float = 0.1,
    ridge_lambda: float = 0.0,
    include_k0: bool = True,
) -> CapacityReport:
    """Memory capacities of an arbitrary feature trace.

    One readout is trained per target function on the train split and scored
    on the test split.
    """
    if k_max < 1:
        raise DomainError(f"k_max must be >= 1, got {k_max}")
    u = np.asarray(inputs, dtype=float)
    delays = np.arange(k_max + 1)
    shifted = np.column_stack([_delayed(u, k) for k in delays])
    pairs = [(k, k2) for k in delays for k2 in delays if k < k2]
    targets = np.column_stack(
        [shifted, 3.0 * shifted**2 - 1.0]
        + [shifted[:, [k for k, _ in pairs]] * shifted[:, [k2 for _, k2 in pairs]]]
    )
    parts = readout.split_run(features, targets, *splits)
    model = readout.train_ridge(parts.train[0], parts.train[1], ridge_lambda)
    caps = capacity(readout.predict(model, parts.test[0]), parts.test[1])
    caps = np.where(caps > threshold, caps, 0.0)

    n = k_max + 1
    linear, quadratic = caps[:n].copy(), caps[n : 2 * n].copy()
    if not include_k0:
        linear[0] = 0.0
    cross = np.zeros((n, n))
    for (k, k2), c in zip(pairs, caps[2 * n :]):
        cross[k, k2] = c
    lmc, qmc, xmc = float(linear.sum()), float(quadratic.sum()), float(cross.sum())
    return CapacityReport(
        lmc=lmc,
        qmc=qmc,
        xmc=xmc,
        total=lmc + qmc + xmc,
        linear=linear,
        quadratic=quadratic,
        cross=cross,
        threshold=threshold,
        k_max=k_max,
        n_neurons=np.shape(features)[1],
    )


def memory_capacities(
    config: ReservoirConfig,
    k_max: int = 30,
    threshold: float = 0.1,
    seed: int = 0,
    length: int = 3200,
    splits=None,
    ridge_lambda: float = 0.0,
    include_k0: bool = True,
) -> CapacityReport:
    """Simulate ``config`` on i.i.d. inputs and measure its memory capacities."""
    data = gen_memory_inputs(length, seed, splits)
    intensities = run_sequence(data.inputs, config, rng=noise_rng(seed))
    return capacities_from_features(
        intensities, data.inputs, data.splits, k_max, threshold, ridge_lambda, include_k0
    )


# -- NARMA10 -----------------------------------------------------------------


def narma10_target(u) -> np.ndarray:
    """Run the tenth-order NARMA recurrence from zero history.

    Returns ``y`` of length ``len(u) + 1`` with ``y[0] = 0`` and ``y[n+1]``
    computed from ``y[n-9..n]`` and ``u[n-9], u[n]`` (missing history is 0).
    """
    u = np.asarray(u, dtype=float)
    y = np.zeros(u.size + 1)
    for n in range(u.size):
        window = y[max(0, n - NARMA_ORDER + 1) : n + 1].sum()
        lagged = u[n - NARMA_ORDER + 1] if n >= NARMA_ORDER - 1 else 0.0
        y[n + 1] = 0.3 * y[n] + 0.05 * y[n] * window + 1.5 * lagged * u[n] + 0.1
    return y


def gen_narma10(length: int, seed: int, splits=None) -> TaskDataset:
    """NARMA10 instance with inputs drawn uniformly from [0, 0.5].

    The reservoir sees ``4u - 1``; the target uses the raw ``u``. A diverging
    draw (``|y| > 10``) is replaced by the draw of the next seed, and the
    number of such replacements is kept in ``meta["regenerations"]``.
    """
    if length < NARMA_ORDER:
        raise DomainError(f"length must be >= {NARMA_ORDER}, got {length}")
    splits = _check_splits(splits or default_splits(length, 2 / 3), length)
    for retry in range(NARMA_MAX_RETRIES):
        rng = np.random.default_rng(seed + retry)
        u = rng.uniform(0.0, 0.5, length)
        with np.errstate(over="ignore", invalid="ignore"):
            y = narma10_target(u)
        if np.all(np.isfinite(y)) and np.max(np.abs(y)) <= NARMA_DIVERGENCE:
            break
    else:
        raise DomainError(f"NARMA10 diverged for {NARMA_MAX_RETRIES} consecutive seeds")
    return TaskDataset(
        name="narma10",
        inputs=4.0 * u - 1.0,
        targets=y[1:],
        splits=splits,
        seed=seed,
        aux={"raw_u": u, "y": y},
        meta={"regenerations": retry, "effective_seed": seed + retry},
    )


# -- channel equalization ----------------------------------------------------


def linear_channel(d) -> np.ndarray:
    """Linear intersymbol-interference channel with zero outside ``d``.

    ``q[n] = sum_t CHANNEL_TAPS[t] * d[n + 2 - t]``.
    """
    d = np.asarray(d, dtype=float)
    full = np.convolve(d, CHANNEL_TAPS)
    return full[CHANNEL_LOOKAHEAD : CHANNEL_LOOKAHEAD + d.size]


def channel_nonlinearity(q):
    q = np.asarray(q, dtype=float)
    return q + 0.036 * q**2 - 0.011 * q**3


def gen_channel(length: int, snr_db: float, seed: int, splits=None) -> TaskDataset:
    """Nonlinear channel equalization instance.

    Symbols ``d`` are uniform over {-3, -1, 1, 3}. The noise variance is set
    from the mean square of the noiseless channel output. The reservoir input
    is the noisy output divided by its largest magnitude; the target is ``d``.
    """
    if length < 20:
        raise DomainError(f"length must be >= 20, got {length}")
    splits = _check_splits(splits or default_splits(length, 2 / 3), length)
    rng = np.random.default_rng(seed)
    d_full = rng.choice(SYMBOLS, size=length + CHANNEL_HISTORY + CHANNEL_LOOKAHEAD)
    keep = slice(CHANNEL_HISTORY, CHANNEL_HISTORY + length)
    q = linear_channel(d_full)[keep]
    s = channel_nonlinearity(q)
    noise_power = np.mean(s**2) / 10.0 ** (snr_db / 10.0)
    noise = rng.normal(0.0, np.sqrt(noise_power), length)
    received = s + noise
    scale = np.max(np.abs(received))
    if scale == 0:
        scale = 1.0
    return TaskDataset(
        name="channel",
        inputs=received / scale,
        targets=d_full[keep].copy(),
        splits=splits,
        seed=seed,
        aux={"d": d_full[keep].copy(), "q": q, "clean": s, "noise": noise, "received": received,
             "d_full": d_full},
        meta={"snr_db": float(snr_db), "noise_power": float(noise_power), "scale": float(scale)},
    )


def decide_symbols(predicted) -> np.ndarray:
    """Nearest symbol of {-3, -1, 1, 3}; exact midpoints go to the smaller one."""
    p = np.asarray(predicted, dtype=float)
    return np.select([p <= -2.0, p <= 0.0, p <= 2.0], [-3.0, -1.0, 1.0], 3.0)


def ser(predicted, symbols) -> float:
    """Symbol error rate after nearest-symbol decisions."""
    p = np.asarray(predicted, dtype=float)
    s = np.asarray(symbols, dtype=float)
    if p.shape != s.shape:
        raise UsageError(f"shape mismatch {p.shape} vs {s.shape}")
    if p.size == 0:
        return 0.0
    return float(np.mean(decide_symbols(p) != s))


# -- synthetic classification ------------------------------------------------


def gen_synthetic_classification(
    n_classes: int,
    length: int,
    seed: int,
    segment_length: int = 40,
    noise: float = 0.05,
    n_warmup: int = DEFAULT_WARMUP,
    train_fraction: float = 0.7,
) -> TaskDataset:
    """Segments of class-dependent noisy sinusoids.

    ``length`` is the number of segments; classes are balanced to within one
    segment and shuffled. Class ``c`` oscillates at ``(c + 1) / (4 (C + 1))``
    cycles per step with a random phase per segment. Targets are one ``+1/-1``
    column per class. Segment ``(start, stop)`` bounds are in
    ``aux["segments"]`` and the labels in ``aux["labels"]``.
    """
    if n_classes < 2:
        raise DomainError(f"n_classes must be >= 2, got {n_classes}")
    if length < 2:
        raise DomainError(f"need at least two segments, got {length}")
    rng = np.random.default_rng(seed)
    labels = rng.permutation(np.resize(np.arange(n_classes), length))
    freqs = (np.arange(n_classes) + 1) / (4.0 * (n_classes + 1))
    t = np.arange(segment_length)

    chunks = [noise * rng.standard_normal(n_warmup)]
    for c in labels:
        phase = rng.uniform(0, 2 * np.pi)
        chunks.append(0.8 * np.sin(2 * np.pi * freqs[c] * t + phase)
                      + noise * rng.standard_normal(segment_length))
    signal = np.concatenate(chunks)
    peak = np.max(np.abs(signal))
    inputs = signal / peak if peak > 1 else signal

    targets = -np.ones((signal.size, n_classes))
    starts = n_warmup + segment_length * np.arange(length)
    segments = np.column_stack([starts, starts + segment_length])
    for (a, b), c in zip(segments, labels):
        targets[a:b, c] = 1.0

    n_train_seg = max(1, min(length - 1, int(round(train_fraction * length))))
    splits = (n_warmup, n_train_seg * segment_length, (length - n_train_seg) * segment_length)
    return TaskDataset(
        name="classification",
        inputs=inputs,
        targets=targets,
        splits=splits,
        seed=seed,
        aux={"labels": labels, "segments": segments},
        meta={"n_classes": n_classes, "segment_length": segment_length,
              "n_train_segments": n_train_seg},
    )


# -- end-to-end pipelines ----------------------------------------------------


def noise_rng(seed: int) -> np.random.Generator:
    """Readout-noise stream paired with dataset seed ``seed``."""
    return np.random.default_rng([int(seed), 1])


def make_dataset(task: str, seed: int, length: Optional[int] = None, splits=None,
                 snr_db: float = 20.0, n_classes: int = 3) -> TaskDataset:
    if task == "narma10":
        splits = splits or (DEFAULT_WARMUP, 1000, 2000)
        return gen_narma10(length or sum(splits), seed, splits)
    if task == "channel":
        splits = splits or (DEFAULT_WARMUP, 3000, 6000)
        return gen_channel(length or sum(splits), snr_db, seed, splits)
    if task == "memory":
        splits = splits or (DEFAULT_WARMUP, 2000, 1000)
        return gen_memory_inputs(length or sum(splits), seed, splits)
    if task == "classification":
        return gen_synthetic_classification(n_classes, length or 100, seed)
    raise UsageError(f"unknown task {task!r}; choose from {', '.join(TASKS)}")


def evaluate(
    task: str,
    config: ReservoirConfig,
    seed: int,
    ridge_lambda: float = 0.0,
    dataset: Optional[TaskDataset] = None,
    **options,
) -> dict:
    """Generate, simulate, train on the train split and score the test split.

    Returns a dict of metrics; its keys depend on the task (see
    ``PRIMARY_METRIC`` for the headline one).
    """
    k_max = options.pop("k_max", 30)
    threshold = options.pop("threshold", 0.1)
    include_k0 = options.pop("include_k0", True)
    data = dataset if dataset is not None else make_dataset(task, seed, **options)
    intensities = run_sequence(data.inputs, config, rng=noise_rng(seed))

    if task == "memory":
        report = capacities_from_features(
            intensities, data.inputs, data.splits, k_max, threshold, ridge_lambda, include_k0
        )
        return {"lmc": report.lmc, "qmc": report.qmc, "xmc": report.xmc, "total": report.total}

    parts = data.split(intensities)
    model = readout.train_ridge(parts.train[0], parts.train[1], ridge_lambda)
    predicted = readout.predict(model, parts.test[0])
    if task == "narma10":
        return {"nmse": readout.nmse(predicted, parts.test[1]),
                "train_nmse": readout.nmse(readout.predict(model, parts.train[0]), parts.train[1])}
    if task == "channel":
        return {"ser": ser(predicted, parts.test[1])}
    if task == "classification":
        offset = data.splits[0] + data.splits[1]
        test_segments = [(a - offset, b - offset) for a, b in data.aux["segments"] if a >= offset]
        labels = readout.wta_classify(predicted, test_segments)
        truth = data.aux["labels"][data.meta["n_train_segments"]:]
        return {"error_rate": float(np.mean(labels != truth))}
    raise UsageError(f"unknown task {task!r}; choose from {', '.join(TASKS)}")
