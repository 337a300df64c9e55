"""Routing figures of merit.

Localized routing sends ``|1⟩`` to ``|4⟩``. Superposition routing sends
``α|1⟩ + √(1−α²)e^{iχ}|2⟩`` to ``α|4⟩ + √(1−α²)e^{iχ}|3⟩``; its fidelity is
summarised by the mean or the minimum over an (α, χ) grid.
"""
import logging
import math
import typing as tp

import numpy as np
import scipy.linalg as la

from chiralroute.dynamics import reduced_spectrum
from chiralroute.errors import ValidationError
from chiralroute.types import (
    REDUCED_DIM,
    TWO_PI,
    DensityMatrix,
    FidelityCurve,
    PureState,
    RouterParams,
    SuperpositionGrid,
    SuperpositionParams,
    label_index,
)
from chiralroute.utils import coordinate_ascent

logger = logging.getLogger(__name__)

DEFAULT_GRID = SuperpositionGrid()

# eigenvalues of a density matrix below this are treated as exact zeros
# before taking square roots
_SQRT_EIGEN_CUTOFF = 1e-12


def _clamp(values):
    return np.clip(values, 0.0, 1.0)


def _two_site(first: int, second: int, sp: SuperpositionParams) -> PureState:
    amplitudes = np.zeros(REDUCED_DIM, dtype=complex)
    amplitudes[label_index(first)] = sp.alpha
    amplitudes[label_index(second)] = math.sqrt(max(0.0, 1.0 - sp.alpha**2)) * np.exp(
        1j * sp.chi
    )
    return PureState(amplitudes)


def input_state(sp: SuperpositionParams) -> PureState:
    """α|1⟩ + √(1−α²) e^{iχ}|2⟩"""
    return _two_site(1, 2, sp)


def target_state(sp: SuperpositionParams) -> PureState:
    """α|4⟩ + √(1−α²) e^{iχ}|3⟩"""
    return _two_site(4, 3, sp)


def transition_probabilities(
    params: RouterParams, times: np.ndarray, from_label: int = 1, to_label: int = 4
) -> np.ndarray:
    """|⟨to|e^{-iHt}|from⟩|² for every time in ``times``."""
    source, target = label_index(from_label), label_index(to_label)
    initial = np.zeros(REDUCED_DIM, dtype=complex)
    initial[source] = 1.0
    amplitudes = reduced_spectrum(params).amplitudes(np.atleast_1d(times), initial)
    return _clamp(np.abs(amplitudes[:, target]) ** 2)


def transition_probability(
    params: RouterParams, t: float, from_label: int = 1, to_label: int = 4
) -> float:
    """Transition probability between two localized reduced states.

    Example:
    ```
    # probability that the walker reached the target output at t = 17
    transition_probability(RouterParams(40, phi=math.pi), 17.0, 1, 4)
    ```

    Raises:
        ValidationError: label outside 1..6
    """
    return float(transition_probabilities(params, np.array([t]), from_label, to_label)[0])


def per_wrong_output_probability(params: RouterParams, t: float) -> float:
    """Probability of ending on any single one of the ``n − 1`` wrong outputs."""
    return transition_probability(params, t, 1, 6) / (params.n_outputs - 1)


def _routing_blocks(params: RouterParams, times: np.ndarray) -> np.ndarray:
    """Entries of U(t) coupling {|1⟩, |2⟩} to {|4⟩, |3⟩}, shape ``(T, 2, 2)``.

    ``block[t, a, b] = ⟨target_a|U(t)|input_b⟩`` with targets (|4⟩, |3⟩) and
    inputs (|1⟩, |2⟩).
    """
    unitaries = reduced_spectrum(params).matrix_elements(np.atleast_1d(times))
    return unitaries[:, [3, 2]][:, :, [0, 1]]


def _fidelity_from_blocks(
    blocks: np.ndarray, alphas: np.ndarray, chis: np.ndarray
) -> np.ndarray:
    """|⟨w|U|ψ₀⟩|² for every block and every (α, χ) pair.

    ``alphas`` and ``chis`` broadcast together; the result has shape
    ``(T,) + broadcast shape``.
    """
    alphas = np.asarray(alphas, dtype=float)
    rest = np.sqrt(np.clip(1.0 - alphas**2, 0.0, None)) * np.exp(1j * np.asarray(chis))
    # ⟨w| = α⟨4| + conj(rest)⟨3|,  |ψ₀⟩ = α|1⟩ + rest|2⟩
    expand = (slice(None),) + (np.newaxis,) * np.broadcast(alphas, rest).ndim
    b = blocks[expand]
    overlap = (
        alphas * alphas * b[..., 0, 0]
        + alphas * rest * b[..., 0, 1]
        + np.conj(rest) * alphas * b[..., 1, 0]
        + np.conj(rest) * rest * b[..., 1, 1]
    )
    return _clamp(np.abs(overlap) ** 2)


def routing_fidelity(params: RouterParams, t: float, sp: SuperpositionParams) -> float:
    """|⟨w|U(t)|ψ₀⟩|² for the superposition described by ``sp``."""
    blocks = _routing_blocks(params, np.array([t]))
    return float(_fidelity_from_blocks(blocks, np.array(sp.alpha), np.array(sp.chi))[0])


def fidelity_surface(
    params: RouterParams, t: float, grid: SuperpositionGrid = DEFAULT_GRID
) -> np.ndarray:
    """Fidelity over the whole (α, χ) grid, shape ``(alpha_points, chi_points)``."""
    alphas, chis = grid.mesh()
    return _fidelity_from_blocks(_routing_blocks(params, np.array([t])), alphas, chis)[0]


def average_fidelities(
    params: RouterParams, times: np.ndarray, grid: SuperpositionGrid = DEFAULT_GRID
) -> np.ndarray:
    alphas, chis = grid.mesh()
    surfaces = _fidelity_from_blocks(_routing_blocks(params, times), alphas, chis)
    return surfaces.mean(axis=(1, 2))


def average_fidelity(
    params: RouterParams, t: float, grid: SuperpositionGrid = DEFAULT_GRID
) -> float:
    """Arithmetic mean of the routing fidelity over ``grid``."""
    return float(fidelity_surface(params, t, grid).mean())


def _worst_from_surface(
    block: np.ndarray, surface: np.ndarray, grid: SuperpositionGrid, refine: bool
) -> tp.Tuple[SuperpositionParams, float]:
    """Grid argmin of ``surface``, then coordinate descent on (α, χ) from it.

    ``block`` holds the routing block of a single time, shape ``(1, 2, 2)``.
    """
    alphas, chis = grid.alphas(), grid.chis()
    i, j = np.unravel_index(np.argmin(surface), surface.shape)
    worst = SuperpositionParams(float(alphas[i]), float(chis[j]))
    value = float(surface[i, j])
    if not refine:
        return worst, value

    def negated(alpha: float, chi: float) -> float:
        return -float(_fidelity_from_blocks(block, np.array(alpha), np.array(chi))[0])

    alpha_step = 1.0 / max(grid.alpha_points - 1, 1)
    chi_step = TWO_PI / grid.chi_points
    result = coordinate_ascent(
        negated,
        start=(worst.alpha, worst.chi),
        bounds=((0.0, 1.0), (None, None)),
        steps=(alpha_step, chi_step),
    )
    refined = -result.value
    if refined < value:
        worst = SuperpositionParams(*result.point)
        value = refined
    return worst, value


def worst_case_superposition(
    params: RouterParams,
    t: float,
    grid: SuperpositionGrid = DEFAULT_GRID,
    refine: bool = True,
) -> tp.Tuple[SuperpositionParams, float]:
    """Input superposition with the lowest fidelity, and that fidelity.

    The grid minimum is refined by coordinate descent on (α, χ) with step
    halving down to 1e-4.
    """
    block = _routing_blocks(params, np.array([t]))
    alphas, chis = grid.mesh()
    surface = _fidelity_from_blocks(block, alphas, chis)[0]
    return _worst_from_surface(block, surface, grid, refine)


def min_fidelity(
    params: RouterParams,
    t: float,
    grid: SuperpositionGrid = DEFAULT_GRID,
    refine: bool = True,
) -> float:
    """Worst-case routing fidelity over input superpositions."""
    return worst_case_superposition(params, t, grid, refine)[1]


def min_fidelities(
    params: RouterParams,
    times: np.ndarray,
    grid: SuperpositionGrid = DEFAULT_GRID,
    refine: bool = True,
) -> np.ndarray:
    """:func:`min_fidelity` for every time in ``times``.

    The grid surfaces are evaluated in one batch; refinement then runs per
    time from each grid argmin.
    """
    blocks = _routing_blocks(params, np.atleast_1d(times))
    alphas, chis = grid.mesh()
    surfaces = _fidelity_from_blocks(blocks, alphas, chis)
    return np.array(
        [
            _worst_from_surface(blocks[i : i + 1], surfaces[i], grid, refine)[1]
            for i in range(blocks.shape[0])
        ]
    )


def fidelity_curve(
    params: RouterParams, times: np.ndarray, sp: SuperpositionParams
) -> FidelityCurve:
    """Noiseless fidelity as a function of time."""
    times = np.asarray(times, dtype=float)
    blocks = _routing_blocks(params, times)
    values = _fidelity_from_blocks(blocks, np.array(sp.alpha), np.array(sp.chi))
    return FidelityCurve(
        times=times,
        values=values,
        params=params,
        input_label=f"alpha={sp.alpha!r},chi={sp.chi!r}",
        target_label="w",
    )


def _psd_sqrt(entries: np.ndarray) -> np.ndarray:
    eigenvalues, eigenvectors = la.eigh(entries)
    eigenvalues = np.where(eigenvalues < _SQRT_EIGEN_CUTOFF, 0.0, eigenvalues)
    return (eigenvectors * np.sqrt(eigenvalues)) @ eigenvectors.conj().T


def _pure_vector(rho: DensityMatrix) -> tp.Optional[np.ndarray]:
    eigenvalues, eigenvectors = la.eigh(rho.entries)
    if eigenvalues[-1] >= 1.0 - 1e-10:
        return eigenvectors[:, -1]
    return None


def mixed_state_fidelity(
    rho: DensityMatrix, sigma: DensityMatrix, *, shortcut: bool = True
) -> float:
    """Uhlmann fidelity ``[Tr √(√ρ σ √ρ)]²``.

    Evaluated as the squared nuclear norm of ``√ρ √σ``. When either state is
    pure the expectation value ``⟨w|σ|w⟩`` is returned directly (disable with
    ``shortcut=False``).

    Raises:
        ValidationError: dimension mismatch
    """
    if rho.dim != sigma.dim:
        raise ValidationError(f"dimension mismatch: {rho.dim} vs {sigma.dim}")

    if shortcut:
        for pure, other in ((rho, sigma), (sigma, rho)):
            w = _pure_vector(pure)
            if w is not None:
                return float(_clamp(np.vdot(w, other.entries @ w).real))

    product = _psd_sqrt(rho.entries) @ _psd_sqrt(sigma.entries)
    nuclear = float(np.sum(la.svdvals(product)))
    return float(_clamp(nuclear**2))
