import math

import numpy as np
import pytest

from chiralroute import noise, routing
from chiralroute.errors import ValidationError
from chiralroute.types import OUSpec, RouterParams


def test_spec_validation():
    with pytest.raises(ValidationError):
        OUSpec(theta=0.0)
    with pytest.raises(ValidationError):
        OUSpec(sigma_vol=-0.1)
    with pytest.raises(ValidationError):
        OUSpec(dt=0.0)
    assert OUSpec(theta=1.0, sigma_vol=0.4).stationary_variance == pytest.approx(0.08)


def test_mean_defaults_to_router_phase():
    assert OUSpec().centred_on(4.7).mu == 4.7
    assert OUSpec(mu=1.0).centred_on(4.7).mu == 1.0


def test_sample_path_is_seeded():
    spec = OUSpec(seed=11)
    path = noise.ou_sample_path(spec, 500)

    assert path.shape == (500,)
    np.testing.assert_array_equal(path, noise.ou_sample_path(spec, 500))
    with pytest.raises(ValidationError):
        noise.ou_sample_path(spec, 0)


def test_quiet_path_stays_at_mean():
    path = noise.ou_sample_path(OUSpec(sigma_vol=0.0, mu=2.5), 100)

    np.testing.assert_allclose(path, 2.5)


def test_paths_are_sliceable():
    spec = OUSpec(trajectories=10, seed=3)
    every = noise.ou_paths(spec, 20)

    assert every.shape == (10, 20)
    np.testing.assert_array_equal(noise.ou_paths(spec, 20, first=4, count=3), every[4:7])


@pytest.mark.parametrize("sigma, expected", [(0.4, 2 / 25), (0.8, 8 / 25), (1.0, 1 / 2)])
def test_stationary_variance(sigma, expected):
    draws = 100_000
    spec = OUSpec(theta=1.0, sigma_vol=sigma, mu=0.0, trajectories=draws, seed=5)
    sample = noise.ou_paths(spec, 30)[:, -1]
    stderr = expected * math.sqrt(2.0 / (draws - 1))

    assert abs(sample.var(ddof=1) - expected) < 3 * stderr + expected * spec.dt


def test_zero_volatility_is_noiseless(router_n20, noisy_input):
    spec = OUSpec(sigma_vol=0.0, trajectories=2)
    times = np.linspace(0, 10, 11)
    curve = noise.ou_fidelity_curve(router_n20, times, noisy_input, spec)
    reference = routing.fidelity_curve(router_n20, times, noisy_input)

    np.testing.assert_allclose(curve.values, reference.values, atol=1e-6)
    np.testing.assert_allclose(curve.stderr, 0.0, atol=1e-9)


def test_curve_does_not_depend_on_workers(router_n20, noisy_input):
    spec = OUSpec(trajectories=600, dt=0.05, seed=9)
    times = np.linspace(0, 3, 7)
    serial = noise.ou_fidelity_curve(router_n20, times, noisy_input, spec)
    threaded = noise.ou_fidelity_curve(router_n20, times, noisy_input, spec, workers=3)

    np.testing.assert_array_equal(serial.values, threaded.values)


def test_curve_records_off_grid_times(router_n20, noisy_input):
    spec = OUSpec(sigma_vol=0.0, trajectories=2, dt=0.1)
    times = np.array([0.0, 0.05, 0.33, 1.0])
    curve = noise.ou_fidelity_curve(router_n20, times, noisy_input, spec)

    for t, value in zip(times, curve.values):
        assert value == pytest.approx(routing.routing_fidelity(router_n20, t, noisy_input), abs=1e-9)


def test_ensemble_state(router_n20, noisy_input):
    spec = OUSpec(trajectories=64, dt=0.05, seed=2)
    state = noise.ou_ensemble_state(router_n20, 5.0, routing.input_state(noisy_input), spec)
    estimate = state.fidelity(routing.target_state(noisy_input))

    assert state.monte_carlo
    assert state.members.shape == (64, 6)
    assert state.density.eigenvalues.min() >= -1e-10
    assert estimate.samples == 64
    assert estimate.stderr > 0


def test_single_trajectory_rejected(router_n20, noisy_input):
    with pytest.raises(ValidationError):
        noise.ou_fidelity_curve(
            router_n20, np.array([0.0, 1.0]), noisy_input, OUSpec(trajectories=1)
        )


@pytest.mark.slow
def test_step_halving_is_within_sampling_error(router_n20, noisy_input):
    times = np.linspace(0, 5, 6)
    coarse = noise.ou_fidelity_curve(
        router_n20, times, noisy_input, OUSpec(dt=0.02, trajectories=1000, seed=1)
    )
    fine = noise.ou_fidelity_curve(
        router_n20, times, noisy_input, OUSpec(dt=0.01, trajectories=1000, seed=2)
    )
    combined = np.sqrt(coarse.stderr**2 + fine.stderr**2)

    assert np.all(np.abs(coarse.values - fine.values) <= 3 * combined + 1e-12)


@pytest.mark.slow
def test_first_noisy_peak(noisy_input):
    params = RouterParams(20, 1.0, 4.712)
    times = np.linspace(0, 10, 101)
    noiseless = routing.fidelity_curve(params, times, noisy_input).values.max()
    mild = noise.ou_fidelity_curve(params, times, noisy_input, OUSpec(theta=1.0, sigma_vol=0.4))
    strong = noise.ou_fidelity_curve(params, times, noisy_input, OUSpec(theta=1.0, sigma_vol=1.0))

    assert mild.values.max() < noiseless
    assert noiseless - mild.values.max() < 0.05
    peak = strong.values.argmax()
    assert strong.values[peak] + 3 * strong.stderr[peak] < mild.values.max()


def test_stationary_mean_and_autocovariance():
    draws = 50_000
    spec = OUSpec(theta=1.0, sigma_vol=1.0, mu=0.3, dt=0.01, trajectories=draws, seed=17)
    paths = noise.ou_paths(spec, 101)
    start, lagged = paths[:, 0] - 0.3, paths[:, 100] - 0.3

    assert abs(paths[:, 0].mean() - 0.3) < 3 * math.sqrt(0.5 / draws)
    expected = 0.5 * math.exp(-1.0)
    assert np.mean(start * lagged) == pytest.approx(expected, rel=0.05)
