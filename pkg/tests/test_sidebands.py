import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fmreservoir.errors import DomainError, NumericalInstabilityError, UsageError
from fmreservoir.sidebands import (
    ReservoirConfig,
    band_half_width,
    bessel_j,
    build_coupling_matrix,
    encode_input,
    populating_depth,
    run_sequence,
    simulate,
    step,
    zero_state,
)

from oracles import bessel_series, scalar_intensities, scalar_step

# J_0(2) from the power series, frozen
J0_OF_2 = 0.22389077914123562


def test_bessel_trivial_values():
    assert bessel_j(0, 0.0) == 1.0
    assert bessel_j(1, 0.0) == 0.0
    assert bessel_j(-3, 0.0) == 0.0


def test_bessel_matches_power_series():
    assert abs(bessel_j(0, 2.0) - J0_OF_2) < 1e-12
    for order in (-7, -2, 0, 1, 5, 12):
        for m in (0.3, 1.0, 2.0, 4.5):
            assert abs(bessel_j(order, m) - bessel_series(order, m)) < 1e-12


@given(st.integers(0, 60), st.floats(0, 10))
def test_bessel_negative_order_symmetry(order, m):
    assert bessel_j(-order, m) == pytest.approx((-1) ** order * bessel_j(order, m), abs=1e-15)


@pytest.mark.parametrize("order, m", [(61, 1.0), (-61, 1.0), (0, -0.1), (0, 10.5), (1.5, 1.0)])
def test_bessel_domain(order, m):
    with pytest.raises(DomainError):
        bessel_j(order, m)


def test_config_defaults_and_validation():
    cfg = ReservoirConfig()
    assert cfg.l_max == band_half_width(2.0)
    assert cfg.n_internal == 13 + 2 * cfg.l_max
    assert cfg.readout_slice == slice(cfg.l_max, cfg.l_max + 13)
    with pytest.raises(DomainError):
        ReservoirConfig(n_neurons=12)
    with pytest.raises(DomainError):
        ReservoirConfig(n_neurons=13, n_internal=11)
    with pytest.raises(DomainError):
        ReservoirConfig(alpha=-0.1)
    with pytest.raises(DomainError):
        ReservoirConfig(input_encoding="cubic")
    with pytest.raises(UsageError):
        ReservoirConfig.from_dict({"alpah": 0.5})


def test_replace_recomputes_band():
    cfg = ReservoirConfig(m=2.0).replace(m=5.0)
    assert cfg.n_internal == 13 + 2 * band_half_width(5.0)


@pytest.mark.parametrize("m", [0.0, 0.5, 2.0, 7.3, 17.51])
def test_band_half_width_drops_only_negligible_orders(m):
    width = band_half_width(m)
    assert width >= math.ceil(m) + 8
    assert all(abs(bessel_series(l, m)) < 1e-10 for l in range(width + 1, width + 6))


def test_populating_depth():
    assert 1.8 < populating_depth(13) <= 2.0
    m51 = populating_depth(51)
    assert abs(bessel_series(25, m51)) >= 1e-3 > abs(bessel_series(25, m51 - 0.01))
    assert m51 > populating_depth(13)


def test_coupling_identity_and_phase():
    eye = build_coupling_matrix(ReservoirConfig(m=0.0, alpha=1.0))
    assert np.array_equal(eye.band, np.eye(eye.n_internal))
    neg = build_coupling_matrix(ReservoirConfig(m=0.0, alpha=0.5, phi0=math.pi))
    assert np.allclose(neg.band, -0.5 * np.eye(neg.n_internal), atol=1e-15)


def test_coupling_is_banded():
    cfg = ReservoirConfig(m=1.3, phi0=0.4, phi1=0.7, n_neurons=5)
    band = build_coupling_matrix(cfg).band
    i, j = np.indices(band.shape)
    assert np.all(band[np.abs(i - j) > cfg.l_max] == 0)
    assert np.all(band[np.abs(i - j) <= cfg.l_max] != 0)


def test_coupling_entries_follow_definition():
    cfg = ReservoirConfig(alpha=0.7, m=1.5, phi0=0.3, phi1=0.2, n_neurons=3)
    band = build_coupling_matrix(cfg).band
    h = cfg.center
    for k in (-4, 0, 3):
        for l in (-2, 0, 1, 5):
            expected = 0.7 * np.exp(1j * (0.3 + 0.2 * k)) * bessel_series(l, 1.5) * (-1) ** l
            assert band[h + k, h + k - l] == pytest.approx(expected, abs=1e-14)


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_interior_rows_are_unit_norm(m):
    cfg = ReservoirConfig(m=m, alpha=1.0, phi1=0.9)
    band = build_coupling_matrix(cfg).band
    oracle = sum(bessel_series(l, m) ** 2 for l in range(-cfg.l_max, cfg.l_max + 1))
    assert abs(oracle - 1) < 1e-8
    assert abs(np.sum(np.abs(band[cfg.center]) ** 2) - 1) < 1e-8


def test_encode_input():
    assert encode_input(1.0, ReservoirConfig(beta=0.5)) == 0.5
    sine = ReservoirConfig(input_encoding="sine", beta=1.0)
    assert encode_input(0.0, sine) == 0.0
    assert encode_input(1.0, sine) == pytest.approx(1.0)
    biased = ReservoirConfig(input_encoding="sine", beta=0.3, input_bias=0.5)
    assert encode_input(-0.4, biased) == pytest.approx(math.sin(math.pi / 2 * (0.3 * -0.4 + 0.5)))
    with pytest.raises(DomainError):
        encode_input(1.01, sine)
    out = encode_input(np.array([0.0, 1.0]), ReservoirConfig(beta=2.0))
    assert out.tolist() == [0.0, 2.0]


def test_step_examples():
    cfg0 = ReservoirConfig(alpha=0.0)
    x = step(zero_state(cfg0), 0.7, build_coupling_matrix(cfg0), cfg0)
    expected = np.zeros(cfg0.n_internal, complex)
    expected[cfg0.center] = 0.7
    assert np.array_equal(x, expected)

    ident = ReservoirConfig(m=0.0, alpha=1.0)
    e0 = zero_state(ident)
    e0[ident.center] = 1.0
    assert np.array_equal(step(e0, 0.0, build_coupling_matrix(ident), ident), e0)


def test_step_single_line_response():
    cfg = ReservoirConfig(m=2.0, alpha=0.81, phi0=0.4, phi1=0.3)
    e0 = zero_state(cfg)
    e0[cfg.center] = 1.0
    x = step(e0, 0.0, build_coupling_matrix(cfg), cfg)
    ref = scalar_step(e0, 0.0, 0.81, 0.4, 0.3, 2.0, cfg.l_max)
    assert np.max(np.abs(x - ref)) < 1e-12
    for k in range(-cfg.l_max, cfg.l_max + 1):
        # only the l = k term survives: J_k(m) (-1)^k = J_{-k}(m)
        closed = 0.81 * np.exp(1j * (0.4 + 0.3 * k)) * bessel_series(-k, 2.0)
        assert abs(x[cfg.center + k] - closed) < 1e-13
        assert abs(x[cfg.center + k]) ** 2 == pytest.approx(0.81**2 * bessel_series(k, 2.0) ** 2,
                                                            abs=1e-15)


def test_step_matches_scalar_loop_on_random_states():
    cfg = ReservoirConfig(m=1.7, alpha=0.9, phi0=1.1, phi1=0.6, n_neurons=5)
    matrix = build_coupling_matrix(cfg)
    rng = np.random.default_rng(5)
    for _ in range(10):
        x = rng.normal(size=cfg.n_internal) + 1j * rng.normal(size=cfg.n_internal)
        ref = scalar_step(x, 0.25, 0.9, 1.1, 0.6, 1.7, cfg.l_max)
        assert np.max(np.abs(step(x, 0.25, matrix, cfg) - ref)) < 1e-12


def test_step_dimension_mismatch():
    cfg = ReservoirConfig()
    with pytest.raises(UsageError):
        step(np.zeros(5, complex), 0.0, build_coupling_matrix(cfg), cfg)


def test_run_sequence_trivial():
    cfg = ReservoirConfig()
    assert run_sequence([], cfg).shape == (0, 13)
    assert not run_sequence(np.zeros(20), cfg).any()


def test_run_sequence_matches_scalar_loop():
    cfg = ReservoirConfig(m=2.0, alpha=0.81, phi0=0.9, phi1=0.4, n_neurons=13,
                          input_encoding="sine", beta=0.7, input_bias=0.2)
    u = np.random.default_rng(11).uniform(-1, 1, 5)
    drives = [math.sin(math.pi / 2 * (0.7 * v + 0.2)) for v in u]
    ref = scalar_intensities(drives, cfg.n_internal, 13, 0.81, 0.9, 0.4, 2.0, cfg.l_max)
    assert np.max(np.abs(run_sequence(u, cfg) - ref)) < 1e-10


def test_run_sequence_records_after_injection():
    cfg = ReservoirConfig(alpha=0.0, beta=1.0)
    out = run_sequence([0.5, -0.2], cfg)
    assert out[0, 6] == 0.25 and out[1, 6] == pytest.approx(0.04)


def test_instability_reports_step():
    cfg = ReservoirConfig(alpha=1e80, m=0.0)
    with pytest.raises(NumericalInstabilityError) as info:
        run_sequence(np.full(10, 1.0), cfg)
    assert 0 < info.value.step < 10


def test_readout_noise_is_seeded():
    cfg = ReservoirConfig(readout_noise_sigma=0.05, phi1=0.5)
    u = np.random.default_rng(0).uniform(-1, 1, 50)
    a = run_sequence(u, cfg, rng=np.random.default_rng(3))
    b = run_sequence(u, cfg, rng=np.random.default_rng(3))
    clean = run_sequence(u, cfg.replace(readout_noise_sigma=0.0))
    assert np.array_equal(a, b)
    assert not np.allclose(a, clean)
    with pytest.raises(UsageError):
        run_sequence(u, cfg)


# -- properties ---------------------------------------------------------------


def _random_state(rng, size, support=None):
    x = rng.normal(size=size) + 1j * rng.normal(size=size)
    if support is not None:
        x[:support] = 0
        x[size - support:] = 0
    return x


def test_global_phase_invariance():
    cfg = ReservoirConfig(m=2.0, alpha=0.85, phi0=0.3, phi1=0.8)
    rng = np.random.default_rng(2)
    x = _random_state(rng, cfg.n_internal)
    a = run_sequence(np.zeros(30), cfg, initial=x)
    b = run_sequence(np.zeros(30), cfg, initial=x * np.exp(1.234j))
    assert np.allclose(a, b, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("m", [0.5, 1.0, 2.0])
def test_energy_conserved_away_from_edges(m):
    cfg = ReservoirConfig(m=m, alpha=1.0, phi0=0.7, phi1=1.3)
    matrix = build_coupling_matrix(cfg)
    rng = np.random.default_rng(4)
    for _ in range(20):
        x = _random_state(rng, cfg.n_internal, support=cfg.l_max)
        y = step(x, 0.0, matrix, cfg)
        assert abs(np.vdot(y, y).real - np.vdot(x, x).real) < 1e-8


@settings(max_examples=50, deadline=None)
@given(st.floats(0.0, 0.99), st.floats(0.0, 3.0), st.floats(-3.2, 3.2), st.integers(0, 2**31))
def test_energy_contracts(alpha, m, phi1, seed):
    cfg = ReservoirConfig(m=m, alpha=alpha, phi1=phi1, n_neurons=5)
    x = _random_state(np.random.default_rng(seed), cfg.n_internal)
    y = step(x, 0.0, build_coupling_matrix(cfg), cfg)
    assert np.vdot(y, y).real <= alpha**2 * np.vdot(x, x).real + 1e-8


@pytest.mark.parametrize("alpha", [0.5, 0.81, 0.9])
def test_fading_memory(alpha):
    cfg = ReservoirConfig(m=2.0, alpha=alpha, phi0=1.0, phi1=0.5,
                          input_encoding="sine", beta=0.5, input_bias=0.3)
    rng = np.random.default_rng(7)
    u = rng.uniform(-1, 1, 200)
    _, xa = simulate(u, cfg, initial=_random_state(rng, cfg.n_internal))
    _, xb = simulate(u, cfg, initial=_random_state(rng, cfg.n_internal))
    assert np.linalg.norm(xa - xb) < 1e-6
