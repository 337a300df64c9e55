import math

import numpy as np
import pytest

from chiralroute.dynamics import (
    evolve,
    evolve_batch_piecewise,
    evolve_piecewise,
    propagator,
    reduced_spectrum,
    reduction_deviation,
    spectrum,
)
from chiralroute.errors import ValidationError
from chiralroute.hamiltonian import build_full_hamiltonian, build_reduced_hamiltonian, reduction_isometry
from chiralroute.types import FullGraphLayout, Propagator, PureState, RouterParams


def _random_params(rng, n_max=100):
    return RouterParams(
        int(rng.integers(2, n_max + 1)), rng.uniform(-3, 3), rng.uniform(0, 2 * math.pi)
    )


def test_propagator_at_zero_is_identity():
    u = propagator(build_reduced_hamiltonian(RouterParams(7, 1.0, 2.0)), 0.0)
    np.testing.assert_allclose(u.matrix, np.eye(6), atol=1e-14)


def test_real_hamiltonian_gives_orthogonal_propagator():
    h = build_reduced_hamiltonian(RouterParams(2, 1.0, 0.0))
    u = propagator(h, 3.3).matrix

    np.testing.assert_allclose(u.conj().T @ u, np.eye(6), atol=1e-10)
    # exp(-iHt) with real H is symmetric
    np.testing.assert_allclose(u, u.T, atol=1e-12)


def test_propagator_group_property():
    h = build_reduced_hamiltonian(RouterParams(12, 0.8, 1.1))
    product = propagator(h, 1.7).matrix @ propagator(h, 4.2).matrix

    np.testing.assert_allclose(product, propagator(h, 5.9).matrix, atol=1e-9)


def test_propagator_unitarity(rng):
    for _ in range(1000):
        params = _random_params(rng)
        u = propagator(build_reduced_hamiltonian(params), rng.uniform(0, 50)).matrix
        assert np.linalg.norm(u.conj().T @ u - np.eye(6)) < 1e-10


def test_propagator_rejects_bad_input():
    h = build_reduced_hamiltonian(RouterParams(3))
    with pytest.raises(ValidationError):
        propagator(h, math.nan)
    with pytest.raises(ValidationError):
        propagator(np.array([[0.0, 1.0], [2.0, 0.0]]), 1.0)


def test_spectrum_reconstructs(rng):
    for _ in range(50):
        h = build_reduced_hamiltonian(_random_params(rng, n_max=10))
        np.testing.assert_allclose(spectrum(h).reconstruct(), h.entries, atol=1e-12)


def test_evolve_at_zero_keeps_state():
    psi = PureState(np.array([0.6, 0.8j, 0, 0, 0, 0]))
    out = evolve(build_reduced_hamiltonian(RouterParams(9)), 0.0, psi)

    np.testing.assert_allclose(out.amplitudes, psi.amplitudes, atol=1e-15)


def test_evolve_conserves_probability(rng):
    for _ in range(200):
        h = build_reduced_hamiltonian(_random_params(rng))
        out = evolve(h, rng.uniform(0, 50), PureState.localized(1))
        assert abs(np.sum(np.abs(out.amplitudes) ** 2) - 1.0) < 1e-10


def test_evolve_rejects_dimension_mismatch():
    h = build_reduced_hamiltonian(RouterParams(3))
    with pytest.raises(ValidationError):
        evolve(h, 1.0, PureState(np.array([1.0, 0.0])))


def test_broad_chiral_peak():
    h = build_reduced_hamiltonian(RouterParams(40, 1.0, math.pi))
    out = evolve(h, 17.0, PureState.localized(1))

    assert abs(out.amplitudes[3]) ** 2 > 0.8


def test_evolve_matches_full_graph():
    params = RouterParams(5, 1.0, 1.3)
    layout = FullGraphLayout(5)
    start = np.zeros(layout.dim, dtype=complex)
    start[layout.input_external] = 1.0

    full = evolve(build_full_hamiltonian(params, layout), 2.7, PureState(start))
    reduced = evolve(build_reduced_hamiltonian(params), 2.7, PureState.localized(1))

    np.testing.assert_allclose(
        reduction_isometry(layout).T @ full.amplitudes, reduced.amplitudes, atol=1e-9
    )


def test_amplitudes_on_time_grid():
    params = RouterParams(8, 1.1, 0.3)
    times = np.linspace(0, 20, 41)
    grid = reduced_spectrum(params).amplitudes(times, PureState.localized(2).amplitudes)
    h = build_reduced_hamiltonian(params)

    for i in (0, 17, 40):
        expected = evolve(h, times[i], PureState.localized(2)).amplitudes
        np.testing.assert_allclose(grid[i], expected, atol=1e-12)


def test_piecewise_constant_sequence_matches_evolve():
    h = build_reduced_hamiltonian(RouterParams(20, 1.0, 4.7))
    psi = PureState.localized(1)
    out = evolve_piecewise([h] * 250, 0.02, psi)

    np.testing.assert_allclose(out.amplitudes, evolve(h, 5.0, psi).amplitudes, atol=1e-9)


def test_piecewise_single_step():
    h = build_reduced_hamiltonian(RouterParams(6, 0.4, 2.2))
    psi = PureState.localized(3)

    np.testing.assert_allclose(
        evolve_piecewise([h], 1.9, psi).amplitudes,
        evolve(h, 1.9, psi).amplitudes,
        atol=1e-12,
    )


def _wobbling_sequence(params, dt, duration=5.0):
    steps = round(duration / dt)
    midpoints = (np.arange(steps) + 0.5) * dt
    return [
        build_reduced_hamiltonian(params.with_phi(math.pi + 0.3 * math.sin(t))) for t in midpoints
    ]


def test_piecewise_step_refinement():
    params = RouterParams(20, 1.0, math.pi)
    psi = PureState.localized(1)
    coarse, fine, finest = (
        evolve_piecewise(_wobbling_sequence(params, dt), dt, psi).amplitudes
        for dt in (0.05, 0.005, 0.0005)
    )

    assert np.linalg.norm(coarse - fine) < 1e-3
    # midpoint sampling converges at second order
    assert np.linalg.norm(fine - finest) < 0.05 * np.linalg.norm(coarse - finest)


def test_piecewise_norm_drift():
    params = RouterParams(20, 1.0, math.pi)
    out = evolve_piecewise(_wobbling_sequence(params, 0.0005), 0.0005, PureState.localized(1))

    assert abs(np.linalg.norm(out.amplitudes) - 1.0) < 1e-9


def test_batch_piecewise_norm_drift(rng):
    phases = math.pi + 0.3 * rng.standard_normal((4, 10_000))
    states = np.tile(PureState.localized(2).amplitudes, (4, 1))
    out = evolve_batch_piecewise(20, 1.0, phases, 0.001, states)

    np.testing.assert_allclose(np.linalg.norm(out, axis=1), 1.0, atol=1e-9)


def test_piecewise_rejects_bad_input():
    h = build_reduced_hamiltonian(RouterParams(3))
    with pytest.raises(ValidationError):
        evolve_piecewise([], 0.1, PureState.localized(1))
    with pytest.raises(ValidationError):
        evolve_piecewise([h], 0.0, PureState.localized(1))


def test_batch_piecewise_matches_sequential(rng):
    params = RouterParams(15, 1.0, 4.7)
    phases = params.phi + 0.2 * rng.standard_normal((3, 40))
    states = np.tile(PureState.localized(1).amplitudes, (3, 1))
    batch = evolve_batch_piecewise(params.n_outputs, params.beta, phases, 0.05, states)

    for b in range(3):
        sequence = [build_reduced_hamiltonian(params.with_phi(p)) for p in phases[b]]
        expected = evolve_piecewise(sequence, 0.05, PureState.localized(1))
        np.testing.assert_allclose(batch[b], expected.amplitudes, atol=1e-10)


def test_propagator_record_rejects_non_unitary():
    with pytest.raises(ValidationError):
        Propagator(2 * np.eye(3), 0.0)


def test_reduction_deviation_is_roundoff(rng):
    for n in range(2, 9):
        for _ in range(5):
            params = RouterParams(n, rng.uniform(-2, 2), rng.uniform(0, 2 * math.pi))
            assert reduction_deviation(params, rng.uniform(0, 30)) < 1e-9
