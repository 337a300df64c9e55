"""Phase-noise models for the chiral link.

Static disorder shifts the phase by a fixed ε drawn from a von Mises
distribution; the output is the ε-average of the evolved states, computed by
Gauss–Legendre quadrature. Dynamical noise lets the phase follow an
Ornstein–Uhlenbeck path; the output is the average over sampled trajectories
of the time-ordered evolution.
"""
import logging
import math
import typing as tp
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.signal
import scipy.special
import scipy.stats

from chiralroute.dynamics import BatchSpectrum, reduced_hamiltonian_batch
from chiralroute.errors import ValidationError
from chiralroute.routing import input_state, target_state
from chiralroute.types import (
    DensityMatrix,
    FidelityCurve,
    OUSpec,
    PureState,
    RouterParams,
    SuperpositionParams,
    VonMisesSpec,
)

logger = logging.getLogger(__name__)

# p_k(ε)/p_k(0) < e^{-40} outside the integration window
_TAIL_EXPONENT = 40.0
# doubling that moves the result by more than this is reported unconverged
_CONVERGENCE_FLAG = 1e-6
# trajectories are processed in fixed-size chunks so results do not depend
# on the number of workers
_CHUNK = 256


@dataclass(frozen=True)
class NoiseEstimate:
    """Noise-averaged fidelity.

    ``stderr`` is the Monte Carlo standard error (``None`` for quadrature).
    """

    value: float
    stderr: tp.Optional[float] = None
    converged: bool = True
    samples: int = 0

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True, eq=False)
class EnsembleState:
    """Weighted mixture of evolved pure states.

    ``members[b]`` is one realisation of the evolved state and ``weights``
    sum to one.
    """

    members: np.ndarray
    weights: np.ndarray
    monte_carlo: bool
    converged: bool = True

    @property
    def density(self) -> DensityMatrix:
        rho = np.einsum("b,bi,bj->ij", self.weights, self.members, self.members.conj())
        return DensityMatrix((rho + rho.conj().T) / 2.0)

    def fidelity(self, target: PureState) -> NoiseEstimate:
        """⟨w|ρ|w⟩, with a standard error when the mixture was sampled."""
        per_member = np.abs(self.members @ target.amplitudes.conj()) ** 2
        value = float(np.clip(self.weights @ per_member, 0.0, 1.0))
        stderr = None
        if self.monte_carlo:
            stderr = float(np.std(per_member, ddof=1) / math.sqrt(per_member.size))
        return NoiseEstimate(value, stderr, self.converged, per_member.size)


# --- von Mises ----------------------------------------------------------------


def bessel_i0(k: float) -> float:
    """Modified Bessel function of the first kind, order 0.

    Raises:
        ValidationError: negative or non-finite ``k``
    """
    k = float(k)
    if not math.isfinite(k) or k < 0:
        raise ValidationError(f"I0 needs a finite non-negative argument, got {k}")
    return float(scipy.special.i0(k))


def von_mises_pdf(eps, k: float):
    """``e^{k cos ε} / (2π I₀(k))``, evaluated without overflow for large ``k``."""
    if k < 0:
        raise ValidationError(f"concentration k must be non-negative, got {k}")
    eps = np.asarray(eps, dtype=float)
    # i0e(k) = e^{-k} I0(k)
    density = np.exp(k * (np.cos(eps) - 1.0)) / (2.0 * math.pi * scipy.special.i0e(k))
    return float(density) if density.ndim == 0 else density


def _integration_halfwidth(k: float) -> float:
    if k <= _TAIL_EXPONENT / 2.0:
        return math.pi
    return float(np.arccos(1.0 - _TAIL_EXPONENT / k))


def von_mises_nodes(vm: VonMisesSpec, points: int) -> tp.Tuple[np.ndarray, np.ndarray]:
    """Gauss–Legendre nodes on the effective support and normalised weights."""
    half = _integration_halfwidth(vm.k)
    roots, weights = scipy.special.roots_legendre(points)
    eps = half * roots
    weights = half * weights * von_mises_pdf(eps, vm.k)
    return eps, weights / weights.sum()


def _evolve_over_phases(
    params: RouterParams, phases: np.ndarray, times: np.ndarray, psi0: PureState
) -> np.ndarray:
    """Evolved amplitudes for each phase and time, shape ``(B, T, 6)``."""
    batch = BatchSpectrum.of(
        reduced_hamiltonian_batch(params.n_outputs, params.beta, phases)
    )
    q = batch.eigenvectors
    coefficients = np.einsum("bji,j->bi", q.conj(), psi0.amplitudes)
    phase_factors = np.exp(-1j * batch.eigenvalues[:, np.newaxis, :] * times[:, np.newaxis])
    return np.einsum("bij,btj->bti", q, phase_factors * coefficients[:, np.newaxis, :])


_R = tp.TypeVar("_R")


def _doubling_quadrature(
    vm: VonMisesSpec,
    evaluate: tp.Callable[[np.ndarray, np.ndarray], tp.Tuple[np.ndarray, _R]],
) -> tp.Tuple[_R, bool]:
    """Double the node count until the evaluated array settles.

    ``evaluate(eps, weights)`` returns ``(measure, payload)``; the change of
    ``measure`` between doublings decides convergence and the payload of the
    last evaluation is returned.
    """
    points = vm.quadrature_points
    previous, payload = evaluate(*von_mises_nodes(vm, points))
    change = math.inf

    while points * 2 <= vm.max_quadrature_points:
        points *= 2
        current, payload = evaluate(*von_mises_nodes(vm, points))
        change = float(np.max(np.abs(current - previous)))
        previous = current
        logger.debug("von Mises quadrature: %d nodes, change %.3e", points, change)
        if change <= vm.tolerance:
            break

    converged = change <= _CONVERGENCE_FLAG
    if not converged:
        logger.warning(
            "von Mises quadrature for k=%g did not settle (last change %.3e at %d nodes)",
            vm.k,
            change,
            points,
        )
    return payload, converged


def static_noise_state(
    params: RouterParams, t: float, psi0: PureState, vm: VonMisesSpec
) -> EnsembleState:
    """Mixed state ``∫ dε p_k(ε) U(φ+ε)|ψ₀⟩⟨ψ₀|U†(φ+ε)`` at time ``t``."""
    times = np.array([float(t)])

    def evaluate(eps, weights):
        members = _evolve_over_phases(params, params.phi + eps, times, psi0)[:, 0, :]
        density = np.einsum("b,bi,bj->ij", weights, members, members.conj())
        return density, (members, weights)

    (members, weights), converged = _doubling_quadrature(vm, evaluate)
    return EnsembleState(members, weights, monte_carlo=False, converged=converged)


def static_noise_fidelity(
    params: RouterParams, t: float, sp: SuperpositionParams, vm: VonMisesSpec
) -> NoiseEstimate:
    """Routing fidelity averaged over static phase offsets ε ~ p_k.

    Equal to ``⟨w|σ_out|w⟩`` of :func:`static_noise_state`.
    """
    state = static_noise_state(params, t, input_state(sp), vm)
    return state.fidelity(target_state(sp))


def static_noise_curve(
    params: RouterParams,
    times: np.ndarray,
    sp: SuperpositionParams,
    vm: VonMisesSpec,
    time_chunk: int = 64,
) -> FidelityCurve:
    """Static-noise fidelity over a time grid."""
    times = np.asarray(times, dtype=float)
    psi0 = input_state(sp)
    target = target_state(sp).amplitudes.conj()

    def evaluate(eps, weights):
        values = np.empty(times.size)
        for lo in range(0, times.size, time_chunk):
            members = _evolve_over_phases(
                params, params.phi + eps, times[lo : lo + time_chunk], psi0
            )
            values[lo : lo + time_chunk] = weights @ (np.abs(members @ target) ** 2)
        return values, values

    values, converged = _doubling_quadrature(vm, evaluate)
    return FidelityCurve(
        times=times,
        values=np.clip(values, 0.0, 1.0),
        params=params,
        input_label=f"alpha={sp.alpha!r},chi={sp.chi!r}",
        target_label="w",
        converged=converged,
    )


def static_noise_fidelity_mc(
    params: RouterParams,
    t: float,
    sp: SuperpositionParams,
    vm: VonMisesSpec,
    samples: int = 4000,
    seed: int = 0,
) -> NoiseEstimate:
    """Monte Carlo cross-check of :func:`static_noise_fidelity`."""
    if samples < 2:
        raise ValidationError("Monte Carlo needs at least 2 samples")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if vm.k == 0:
        eps = rng.uniform(-math.pi, math.pi, size=samples)
    else:
        eps = scipy.stats.vonmises(kappa=vm.k).rvs(size=samples, random_state=rng)
    members = _evolve_over_phases(
        params, params.phi + eps, np.array([float(t)]), input_state(sp)
    )[:, 0, :]
    state = EnsembleState(members, np.full(samples, 1.0 / samples), monte_carlo=True)
    return state.fidelity(target_state(sp))


# --- Ornstein–Uhlenbeck -------------------------------------------------------


def _ou_from_normals(spec: OUSpec, mu: float, normals: np.ndarray) -> np.ndarray:
    """Euler–Maruyama paths from standard normal draws along the last axis.

    ``normals[..., 0]`` sets the stationary start, the rest drive the steps.
    """
    decay = 1.0 - spec.theta * spec.dt
    drive = np.empty_like(normals)
    drive[..., 0] = math.sqrt(spec.stationary_variance) * normals[..., 0]
    drive[..., 1:] = spec.sigma_vol * math.sqrt(spec.dt) * normals[..., 1:]
    # deviation from mu follows Y_{m+1} = (1 - θ dt) Y_m + Σ √dt ξ_m
    return mu + scipy.signal.lfilter([1.0], [1.0, -decay], drive, axis=-1)


def ou_sample_path(spec: OUSpec, steps: int) -> np.ndarray:
    """One OU path ``X_0 .. X_{steps-1}`` with stationary ``X_0``.

    ``spec.mu=None`` is read as zero mean.
    """
    if steps < 1:
        raise ValidationError(f"steps must be positive, got {steps}")
    rng = np.random.default_rng(np.random.SeedSequence(spec.seed))
    mu = 0.0 if spec.mu is None else spec.mu
    return _ou_from_normals(spec, mu, rng.standard_normal(steps))


def ou_paths(
    spec: OUSpec, steps: int, first: int = 0, count: tp.Optional[int] = None
) -> np.ndarray:
    """Trajectories ``first .. first+count`` of the ensemble, shape ``(count, steps)``.

    Trajectory ``i`` always draws from the ``i``-th child of ``SeedSequence(seed)``,
    whichever slice it is generated in.
    """
    count = spec.trajectories - first if count is None else count
    children = np.random.SeedSequence(spec.seed).spawn(first + count)[first:]
    normals = np.stack(
        [np.random.default_rng(child).standard_normal(steps) for child in children]
    )
    mu = 0.0 if spec.mu is None else spec.mu
    return _ou_from_normals(spec, mu, normals)


def _step_count(t_max: float, dt: float) -> int:
    return max(1, math.ceil(t_max / dt - 1e-9))


def _evolve_chunk(
    params: RouterParams,
    spec: OUSpec,
    psi0: PureState,
    times: np.ndarray,
    first: int,
    count: int,
) -> np.ndarray:
    """States of trajectories ``first..first+count`` at ``times``, shape ``(B, T, 6)``."""
    steps = _step_count(times[-1], spec.dt)
    phases = ou_paths(spec, steps, first, count)
    states = np.broadcast_to(psi0.amplitudes, (count, psi0.dim)).copy()
    recorded = np.empty((count, times.size, psi0.dim), dtype=complex)

    idx = 0
    while idx < times.size and times[idx] <= 0.0:
        recorded[:, idx] = states
        idx += 1

    for m in range(steps):
        if idx >= times.size:
            break
        start = m * spec.dt
        batch = BatchSpectrum.of(
            reduced_hamiltonian_batch(params.n_outputs, params.beta, phases[:, m])
        )
        last = m == steps - 1
        while idx < times.size and (last or times[idx] <= start + spec.dt * (1 + 1e-9)):
            recorded[:, idx] = batch.evolve(states, times[idx] - start)
            idx += 1
        states = batch.evolve(states, spec.dt)

    return recorded


def _ensemble_members(
    params: RouterParams,
    spec: OUSpec,
    psi0: PureState,
    times: np.ndarray,
    workers: int,
) -> np.ndarray:
    if spec.trajectories < 2:
        raise ValidationError("an OU ensemble needs at least 2 trajectories")
    if np.any(np.diff(times) < 0) or times.size == 0:
        raise ValidationError("times must be a non-empty sorted array")

    chunks = [
        (first, min(_CHUNK, spec.trajectories - first))
        for first in range(0, spec.trajectories, _CHUNK)
    ]
    logger.debug(
        "OU ensemble: %d trajectories in %d chunks, %d steps, %d workers",
        spec.trajectories,
        len(chunks),
        _step_count(times[-1], spec.dt),
        workers,
    )

    def run(chunk):
        return _evolve_chunk(params, spec, psi0, times, *chunk)

    if workers <= 1:
        parts = [run(chunk) for chunk in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    return np.concatenate(parts, axis=0)


def ou_ensemble_state(
    params: RouterParams,
    t: float,
    psi0: PureState,
    spec: OUSpec,
    workers: int = 1,
) -> EnsembleState:
    """Trajectory average of the time-ordered evolution under an OU phase.

    The OU mean defaults to ``params.phi``.

    Raises:
        ValidationError: fewer than 2 trajectories
    """
    spec = spec.centred_on(params.phi)
    members = _ensemble_members(params, spec, psi0, np.array([float(t)]), workers)
    weights = np.full(spec.trajectories, 1.0 / spec.trajectories)
    return EnsembleState(members[:, 0, :], weights, monte_carlo=True)


def ou_fidelity_curve(
    params: RouterParams,
    times: np.ndarray,
    sp: SuperpositionParams,
    spec: OUSpec,
    workers: int = 1,
) -> FidelityCurve:
    """Ensemble fidelity and its standard error at every time, in a single pass."""
    spec = spec.centred_on(params.phi)
    times = np.asarray(times, dtype=float)
    members = _ensemble_members(params, spec, input_state(sp), times, workers)
    per_member = np.abs(members @ target_state(sp).amplitudes.conj()) ** 2
    return FidelityCurve(
        times=times,
        values=np.clip(per_member.mean(axis=0), 0.0, 1.0),
        params=params,
        input_label=f"alpha={sp.alpha!r},chi={sp.chi!r}",
        target_label="w",
        stderr=per_member.std(axis=0, ddof=1) / math.sqrt(spec.trajectories),
    )


# --- noise correspondence -------------------------------------------------------


@dataclass(frozen=True)
class NoiseEquivalence:
    """Von Mises and OU settings sharing one Gaussian phase variance."""

    k: float
    variance: float
    theta: float
    sigma_vol: float


def noise_equivalence(k: float, theta: float = 1.0) -> NoiseEquivalence:
    """σ² = 1/k, then the OU volatility with ``Σ²/(2θ) = σ²``."""
    if not k > 0 or not theta > 0:
        raise ValidationError(f"k and theta must be positive, got k={k}, theta={theta}")
    variance = 1.0 / k
    return NoiseEquivalence(k, variance, theta, math.sqrt(2.0 * theta * variance))


def noise_equivalence_from_ou(theta: float, sigma_vol: float) -> NoiseEquivalence:
    if not theta > 0 or not sigma_vol > 0:
        raise ValidationError(
            f"theta and sigma_vol must be positive, got theta={theta}, sigma_vol={sigma_vol}"
        )
    variance = sigma_vol**2 / (2.0 * theta)
    return NoiseEquivalence(1.0 / variance, variance, theta, sigma_vol)


NOISE_TABLE: tp.Tuple[NoiseEquivalence, ...] = tuple(
    noise_equivalence(k) for k in (25 / 2, 25 / 8, 2.0)
)
