"""Linear output layer: per-neuron rescaling, ridge training and decisions."""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from .errors import DomainError, UsageError


class ReadoutWarning(UserWarning):
    """Recoverable degeneracy met while fitting the readout."""


@dataclass(frozen=True)
class NormStats:
    """Per-neuron (min, max) of the training intensities."""

    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def fit(cls, intensities: np.ndarray) -> "NormStats":
        intensities = np.atleast_2d(np.asarray(intensities, dtype=float))
        if intensities.shape[0] == 0:
            raise UsageError("cannot compute normalization statistics of an empty trace")
        return cls(lo=intensities.min(axis=0), hi=intensities.max(axis=0))


def normalize(intensities: np.ndarray, stats: NormStats) -> np.ndarray:
    """Affine per-neuron map sending ``(min, max)`` to ``(-1, +1)``.

    A constant neuron (``max == min``) is mapped to 0 and a
    :class:`ReadoutWarning` is emitted.
    """
    x = np.asarray(intensities, dtype=float)
    if x.ndim != 2 or x.shape[1] != stats.lo.size:
        raise UsageError(
            f"expected a (T, {stats.lo.size}) matrix, got shape {x.shape}"
        )
    span = stats.hi - stats.lo
    flat = span <= 0
    if flat.any():
        warnings.warn(
            f"constant neuron(s) {np.flatnonzero(flat).tolist()} mapped to 0",
            ReadoutWarning,
            stacklevel=2,
        )
    safe = np.where(flat, 1.0, span)
    out = 2.0 * (x - stats.lo) / safe - 1.0
    out[:, flat] = 0.0
    return out


@dataclass(frozen=True)
class ReadoutModel:
    """Trained output layer.

    ``weights`` has shape ``(N,)`` for a single target or ``(N, C)`` for C
    targets trained jointly; ``bias`` matches the target dimension.
    """

    weights: np.ndarray
    bias: np.ndarray | float
    ridge_lambda: float
    norm_stats: Optional[NormStats] = None

    @property
    def n_features(self) -> int:
        return self.weights.shape[0]

    def to_dict(self) -> dict:
        return {
            "weights": np.asarray(self.weights).tolist(),
            "bias": np.asarray(self.bias).tolist(),
            "ridge_lambda": self.ridge_lambda,
            "norm_stats": None
            if self.norm_stats is None
            else {"min": self.norm_stats.lo.tolist(), "max": self.norm_stats.hi.tolist()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReadoutModel":
        stats = data.get("norm_stats")
        bias = np.asarray(data["bias"], dtype=float)
        return cls(
            weights=np.asarray(data["weights"], dtype=float),
            bias=float(bias) if bias.ndim == 0 else bias,
            ridge_lambda=float(data["ridge_lambda"]),
            norm_stats=None
            if stats is None
            else NormStats(np.asarray(stats["min"], float), np.asarray(stats["max"], float)),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "ReadoutModel":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_ridge(
    features: np.ndarray,
    targets: np.ndarray,
    ridge_lambda: float = 0.0,
    fit_bias: bool = True,
    rescale: bool = True,
) -> ReadoutModel:
    """Fit ``w, b`` minimizing ``sum (y - X w - b)^2 + lambda |w|^2``.

    The bias is not penalized. With ``rescale`` the features are first mapped
    to [-1, 1] using statistics of ``features`` itself, and the same map is
    stored in the model for later calls to :func:`predict`.

    ``targets`` may be a vector or a ``(T, C)`` matrix; each column gets its
    own weights. A rank-deficient problem with ``lambda = 0`` returns the
    minimum-norm solution and emits a :class:`ReadoutWarning`.
    """
    if ridge_lambda < 0 or not np.isfinite(ridge_lambda):
        raise DomainError(f"ridge_lambda must be finite and >= 0, got {ridge_lambda}")
    x = np.asarray(features, dtype=float)
    y = np.asarray(targets, dtype=float)
    if x.ndim != 2:
        raise UsageError(f"features must be a 2-D matrix, got shape {x.shape}")
    if y.shape[0] != x.shape[0]:
        raise UsageError(f"{x.shape[0]} feature rows but {y.shape[0]} targets")
    n_rows, n_feat = x.shape
    if n_rows == 0:
        raise UsageError("cannot train on an empty trace")

    stats = None
    if rescale:
        stats = NormStats.fit(x)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ReadoutWarning)
            x = normalize(x, stats)
        if np.any(stats.hi <= stats.lo):
            warnings.warn("constant neuron(s) in training features", ReadoutWarning, stacklevel=2)

    if fit_bias:
        x_mean = x.mean(axis=0)
        y_mean = y.mean(axis=0)
        xc, yc = x - x_mean, y - y_mean
    else:
        xc, yc = x, y

    if ridge_lambda > 0:
        # stacked least squares avoids squaring the condition number
        a = np.vstack([xc, np.sqrt(ridge_lambda) * np.eye(n_feat)])
        pad = np.zeros((n_feat,) + yc.shape[1:])
        rhs = np.concatenate([yc, pad], axis=0)
        weights, _, rank, _ = linalg.lstsq(a, rhs, lapack_driver="gelsd")
    else:
        weights, _, rank, _ = linalg.lstsq(xc, yc, lapack_driver="gelsd")
        if rank < n_feat:
            warnings.warn(
                f"singular readout system (rank {rank} < {n_feat}); using minimum-norm weights",
                ReadoutWarning,
                stacklevel=2,
            )

    if fit_bias:
        bias = y_mean - x_mean @ weights
    else:
        bias = np.zeros(y.shape[1:]) if y.ndim > 1 else 0.0
    if np.ndim(bias) == 0:
        bias = float(bias)
    return ReadoutModel(weights=weights, bias=bias, ridge_lambda=float(ridge_lambda), norm_stats=stats)


def predict(model: ReadoutModel, intensities: np.ndarray) -> np.ndarray:
    """Readout output: rescale (if the model carries statistics), weight, add bias."""
    x = np.asarray(intensities, dtype=float)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise UsageError(
            f"model expects {model.n_features} features, got shape {x.shape}"
        )
    if model.norm_stats is not None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ReadoutWarning)
            x = normalize(x, model.norm_stats)
    return x @ model.weights + model.bias


def nmse(predicted, target) -> float:
    """Normalized mean square error: residual power over target variance."""
    p = np.asarray(predicted, dtype=float)
    t = np.asarray(target, dtype=float)
    if p.shape != t.shape:
        raise UsageError(f"shape mismatch {p.shape} vs {t.shape}")
    if t.shape[0] < 2:
        raise DomainError("NMSE needs at least two samples")
    var = np.mean((t - t.mean(axis=0)) ** 2, axis=0)
    if np.any(var == 0):
        raise DomainError("NMSE is undefined for a constant target")
    result = np.mean((t - p) ** 2, axis=0) / var
    return float(result) if np.ndim(result) == 0 else result


def wta_classify(class_scores: np.ndarray, segment_bounds: Sequence[tuple[int, int]]) -> np.ndarray:
    """Winner-take-all decision per segment.

    Each segment ``(start, stop)`` (half-open) averages every classifier's
    score column and picks the largest mean; ties go to the lowest class index.
    """
    scores = np.asarray(class_scores, dtype=float)
    if scores.ndim != 2 or scores.shape[1] < 2:
        raise UsageError(f"need a (T, C>=2) score matrix, got shape {scores.shape}")
    bounds = sorted((int(a), int(b)) for a, b in segment_bounds)
    for (a0, b0), (a1, _) in zip(bounds, bounds[1:]):
        if a1 < b0:
            raise UsageError(f"segments ({a0}, {b0}) and ({a1}, ...) overlap")
    labels = []
    for start, stop in segment_bounds:
        if stop <= start:
            raise DomainError(f"empty segment ({start}, {stop})")
        if start < 0 or stop > scores.shape[0]:
            raise UsageError(f"segment ({start}, {stop}) outside the score matrix")
        labels.append(int(np.argmax(scores[start:stop].mean(axis=0))))
    return np.array(labels, dtype=int)


@dataclass
class SplitDataset:
    """Contiguous warm-up / train / test partitions of a recorded run.

    Each part is an ``(intensities, targets)`` pair.
    """

    warmup: tuple[np.ndarray, np.ndarray]
    train: tuple[np.ndarray, np.ndarray]
    test: tuple[np.ndarray, np.ndarray]
    bounds: dict = field(default_factory=dict)


def split_run(intensities, targets, n_warmup: int, n_train: int, n_test: int) -> SplitDataset:
    """Cut a run into warm-up, train and test parts in temporal order."""
    x = np.asarray(intensities)
    y = np.asarray(targets)
    total = n_warmup + n_train + n_test
    if min(n_warmup, n_train, n_test) < 0:
        raise UsageError("split sizes must be non-negative")
    if x.shape[0] < total or y.shape[0] < total:
        raise UsageError(f"run has {min(x.shape[0], y.shape[0])} steps, splits need {total}")
    cuts = {
        "warmup": (0, n_warmup),
        "train": (n_warmup, n_warmup + n_train),
        "test": (n_warmup + n_train, total),
    }
    parts = {name: (x[a:b], y[a:b]) for name, (a, b) in cuts.items()}
    return SplitDataset(bounds=cuts, **parts)
