"""Sideband-amplitude dynamics of the frequency-multiplexed reservoir.

The reservoir state is a vector of complex slowly-varying amplitudes ``x_k``,
one per spectral line ``omega_0 + k * Omega``. A phase modulator of depth
``m`` spreads each line over its neighbours with weights ``J_l(m) (-1)^l``;
the cavity then applies the gain ``alpha`` and the roundtrip phase
``phi0 + k * phi1``. The input is added to the central line only, and the
photodiode reads out ``|x_k|^2``.

Sideband index ``k`` runs over ``-(K-1)/2 .. (K-1)/2``; array position ``i``
holds ``k = i - (K-1)/2``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Any, Mapping, Optional

import numpy as np
from scipy import special

from .errors import DomainError, NumericalInstabilityError, UsageError

ENCODINGS = ("linear", "sine")

MAX_BESSEL_ORDER = 60
MAX_BESSEL_ARG = 10.0

BAND_MARGIN = 8
BAND_FLOOR = 1e-10


def bessel_j(order: int, m: float) -> float:
    """Bessel function of the first kind ``J_order(m)``.

    Negative orders follow ``J_{-l}(m) = (-1)^l J_l(m)``.

    Raises:
        DomainError: ``|order| > 60``, ``m`` outside ``[0, 10]`` or a
            non-integer order.
    """
    if int(order) != order:
        raise DomainError(f"Bessel order must be an integer, got {order!r}")
    order = int(order)
    if abs(order) > MAX_BESSEL_ORDER:
        raise DomainError(f"|order| must be <= {MAX_BESSEL_ORDER}, got {order}")
    if not (0.0 <= m <= MAX_BESSEL_ARG):
        raise DomainError(f"argument must lie in [0, {MAX_BESSEL_ARG}], got {m}")
    value = float(special.jv(abs(order), m))
    if order < 0 and order % 2:
        value = -value
    return value


def band_half_width(m: float) -> int:
    """Largest coupling order kept for modulation depth ``m``.

    At least ``ceil(m) + 8``, and extended until every dropped order has
    ``|J_l(m)| < 1e-10`` (``J_l(m)`` decays monotonically once ``l > m``).
    """
    width = int(math.ceil(m)) + BAND_MARGIN
    while abs(special.jv(width + 1, m)) >= BAND_FLOOR:
        width += 1
    return width


def populating_depth(n_neurons: int, floor: float = 1e-3, step: float = 0.01) -> float:
    """Smallest modulation depth whose outermost readout line is populated.

    A line at offset ``l`` counts as populated when a single pass through the
    modulator gives it amplitude ``|J_l(m)| >= floor``. With the default floor
    this returns ``m`` close to 2 for 13 lines.
    """
    if n_neurons < 1 or n_neurons % 2 == 0:
        raise DomainError(f"n_neurons must be a positive odd integer, got {n_neurons}")
    edge = (n_neurons - 1) // 2
    if edge == 0:
        return 0.0
    grid = np.arange(step, 4.0 * edge + 10.0, step)
    hits = np.nonzero(np.abs(special.jv(edge, grid)) >= floor)[0]
    return float(round(grid[hits[0]], 10))


@dataclass(frozen=True)
class ReservoirConfig:
    """Global parameters of the simulated reservoir.

    ``n_internal`` defaults to ``n_neurons + 2 * band_half_width(m)`` so that
    truncating the comb only costs energy far from the readout lines.
    ``readout_noise_sigma`` is the standard deviation of additive Gaussian
    noise on each intensity column, as a fraction of that column's range.
    """

    alpha: float = 0.81
    phi0: float = 0.0
    phi1: float = 0.0
    m: float = 2.0
    beta: float = 1.0
    n_neurons: int = 13
    n_internal: Optional[int] = None
    input_encoding: str = "linear"
    input_bias: float = 0.0
    readout_noise_sigma: float = 0.0

    def __post_init__(self):
        if self.n_internal is None:
            object.__setattr__(self, "n_internal", self.n_neurons + 2 * self.l_max)
        for name in ("n_neurons", "n_internal"):
            value = getattr(self, name)
            if int(value) != value or value < 1 or value % 2 == 0:
                raise DomainError(f"{name} must be a positive odd integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.n_internal < self.n_neurons:
            raise DomainError(
                f"n_internal ({self.n_internal}) must be >= n_neurons ({self.n_neurons})"
            )
        for name in ("alpha", "m", "readout_noise_sigma"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {value!r}")
        for name in ("phi0", "phi1", "beta", "input_bias"):
            if not np.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.input_encoding not in ENCODINGS:
            raise DomainError(
                f"input_encoding must be one of {ENCODINGS}, got {self.input_encoding!r}"
            )

    @property
    def l_max(self) -> int:
        return band_half_width(self.m)

    @property
    def center(self) -> int:
        """Array position of the ``k = 0`` line."""
        return (self.n_internal - 1) // 2

    @property
    def readout_slice(self) -> slice:
        half = (self.n_neurons - 1) // 2
        return slice(self.center - half, self.center + half + 1)

    def replace(self, **changes) -> "ReservoirConfig":
        # n_internal is derived unless set explicitly
        if "n_internal" not in changes and ("m" in changes or "n_neurons" in changes):
            changes["n_internal"] = None
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ReservoirConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        for key in data:
            if key not in known:
                raise UsageError(f"unknown reservoir field {key!r}")
        return cls(**dict(data))


@dataclass(frozen=True)
class CouplingMatrix:
    """One roundtrip of the linear sideband map, stored densely.

    Entry ``(k, k - l)`` is ``alpha e^{j(phi0 + k phi1)} J_l(m) (-1)^l`` for
    ``|l| <= l_max``; every other entry is exactly zero.
    """

    band: np.ndarray
    l_max: int

    @property
    def n_internal(self) -> int:
        return self.band.shape[0]

    def __matmul__(self, state: np.ndarray) -> np.ndarray:
        return self.band @ state


def build_coupling_matrix(config: ReservoirConfig) -> CouplingMatrix:
    """Coupling matrix for ``config``; lines leaving the band are dropped."""
    size = config.n_internal
    l_max = config.l_max
    k = np.arange(size) - config.center
    offsets = np.arange(-l_max, l_max + 1)
    weights = special.jv(offsets, config.m) * (-1.0) ** offsets
    band = np.zeros((size, size), dtype=complex)
    for l, w in zip(offsets, weights):
        if abs(l) < size:
            band += np.diag(np.full(size - abs(l), w, dtype=complex), k=-l)
    band *= (config.alpha * np.exp(1j * (config.phi0 + k * config.phi1)))[:, None]
    return CouplingMatrix(band=band, l_max=l_max)


def encode_input(u, config: ReservoirConfig):
    """Map a conditioned input ``u`` in [-1, 1] to the injected amplitude.

    ``linear`` returns ``beta * u``; ``sine`` models a biased Mach-Zehnder
    modulator, ``sin(pi/2 * (beta * u + input_bias))``. Works on scalars and
    arrays alike.
    """
    arr = np.asarray(u, dtype=float)
    if arr.size and not (np.all(arr >= -1.0) and np.all(arr <= 1.0)):
        raise DomainError("inputs must lie in [-1, 1]")
    if config.input_encoding == "linear":
        out = config.beta * arr
    else:
        out = np.sin(0.5 * np.pi * (config.beta * arr + config.input_bias))
    return float(out) if np.ndim(u) == 0 else out


def zero_state(config: ReservoirConfig) -> np.ndarray:
    return np.zeros(config.n_internal, dtype=complex)


def step(state: np.ndarray, u: float, matrix: CouplingMatrix, config: ReservoirConfig) -> np.ndarray:
    """Advance the amplitudes by one roundtrip and inject ``u`` at ``k = 0``."""
    state = np.asarray(state)
    if state.shape != (matrix.n_internal,):
        raise UsageError(
            f"state has shape {state.shape}, matrix expects ({matrix.n_internal},)"
        )
    if matrix.n_internal != config.n_internal:
        raise UsageError("coupling matrix was built for a different band width")
    new = matrix @ state
    new[config.center] += encode_input(u, config)
    return new


def simulate(
    inputs,
    config: ReservoirConfig,
    initial: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    matrix: Optional[CouplingMatrix] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Drive the reservoir with ``inputs``.

    Returns:
        ``(intensities, final_state)``; row ``n`` of the ``T x n_neurons``
        intensity matrix holds ``|x_k(n+1)|^2`` for the readout lines.
    """
    inputs = np.asarray(inputs, dtype=float).ravel()
    if matrix is None:
        matrix = build_coupling_matrix(config)
    if matrix.n_internal != config.n_internal:
        raise UsageError("coupling matrix was built for a different band width")
    state = zero_state(config) if initial is None else np.array(initial, dtype=complex)
    if state.shape != (config.n_internal,):
        raise UsageError(f"initial state must have shape ({config.n_internal},)")

    drive = encode_input(inputs, config)
    band = matrix.band
    center = config.center
    readout = config.readout_slice
    intensities = np.empty((inputs.size, config.n_neurons))
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(inputs.size):
            state = band @ state
            state[center] += drive[n]
            intensities[n] = state[readout].real ** 2 + state[readout].imag ** 2

    bad = ~np.isfinite(intensities).all(axis=1)
    if bad.any() or not np.isfinite(state).all():
        first = int(np.argmax(bad)) if bad.any() else inputs.size - 1
        raise NumericalInstabilityError(first)

    if config.readout_noise_sigma > 0 and inputs.size:
        if rng is None:
            raise UsageError("readout noise requires an explicit random generator")
        spread = intensities.max(axis=0) - intensities.min(axis=0)
        intensities = intensities + config.readout_noise_sigma * spread * rng.standard_normal(
            intensities.shape
        )
    return intensities, state


def run_sequence(
    inputs,
    config: ReservoirConfig,
    initial: Optional[np.ndarray] = None,
    rng: Optional[np.random.Generator] = None,
    matrix: Optional[CouplingMatrix] = None,
) -> np.ndarray:
    """Intensity trace (``T x n_neurons``) recorded while driving with ``inputs``."""
    return simulate(inputs, config, initial, rng, matrix)[0]
