"""Unitary evolution through Hermitian eigendecomposition.

``U(t) = Q exp(-iΛt) Q†`` with ``H = Q Λ Q†``. A decomposition is computed
once and reused for every time on a grid.
"""
import functools
import logging
import math
import typing as tp
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from chiralroute.errors import ValidationError
from chiralroute.hamiltonian import (
    _reduced_entries,
    build_full_hamiltonian,
    reduction_isometry,
)
from chiralroute.types import (
    FullGraphLayout,
    HermitianMatrix,
    Propagator,
    PureState,
    RouterParams,
)

logger = logging.getLogger(__name__)

MatrixLike = tp.Union[HermitianMatrix, np.ndarray]


def _as_hermitian(h: MatrixLike) -> HermitianMatrix:
    return h if isinstance(h, HermitianMatrix) else HermitianMatrix(h)


def _check_time(t: float) -> float:
    t = float(t)
    if not math.isfinite(t):
        raise ValidationError(f"evolution time must be finite, got {t}")
    return t


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Eigendecomposition ``H = Q diag(λ) Q†`` of a Hermitian matrix.

    Immutable; safe to share between threads.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[0]

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T

    def propagator_matrix(self, t: float) -> np.ndarray:
        q = self.eigenvectors
        return (q * np.exp(-1j * self.eigenvalues * t)) @ q.conj().T

    def evolve(self, amplitudes: np.ndarray, t: float) -> np.ndarray:
        q = self.eigenvectors
        return q @ (np.exp(-1j * self.eigenvalues * t) * (q.conj().T @ amplitudes))

    def amplitudes(self, times: np.ndarray, initial: np.ndarray) -> np.ndarray:
        """Evolved amplitudes for every time at once.

        Args:
            times (np.ndarray): shape ``(T,)``
            initial (np.ndarray): initial amplitudes, shape ``(dim,)``

        Returns:
            np.ndarray: shape ``(T, dim)``
        """
        q = self.eigenvectors
        coefficients = q.conj().T @ initial
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), self.eigenvalues))
        return (phases * coefficients) @ q.T

    def matrix_elements(self, times: np.ndarray) -> np.ndarray:
        """``U(t)`` for every time, shape ``(T, dim, dim)``."""
        q = self.eigenvectors
        phases = np.exp(-1j * np.outer(np.asarray(times, dtype=float), self.eigenvalues))
        return np.einsum("ak,tk,bk->tab", q, phases, q.conj())


def spectrum(h: MatrixLike) -> Spectrum:
    h = _as_hermitian(h)
    eigenvalues, eigenvectors = la.eigh(h.entries)
    return Spectrum(eigenvalues, eigenvectors)


@functools.lru_cache(maxsize=4096)
def _reduced_spectrum(n: int, beta: float, phi: float) -> Spectrum:
    eigenvalues, eigenvectors = la.eigh(_reduced_entries(n, beta, phi))
    eigenvalues.setflags(write=False)
    eigenvectors.setflags(write=False)
    return Spectrum(eigenvalues, eigenvectors)


def reduced_spectrum(params: RouterParams) -> Spectrum:
    """Cached decomposition of the reduced Hamiltonian for ``params``."""
    return _reduced_spectrum(params.n_outputs, params.beta, params.phi)


def propagator(h: MatrixLike, t: float) -> Propagator:
    """``exp(-iHt)``.

    Raises:
        ValidationError: non-finite ``t`` or non-Hermitian ``h``
    """
    t = _check_time(t)
    return Propagator(spectrum(h).propagator_matrix(t), t)


def _check_state(h: HermitianMatrix, psi0: PureState) -> None:
    if h.dim != psi0.dim:
        raise ValidationError(
            f"state dimension {psi0.dim} does not match Hamiltonian dimension {h.dim}"
        )


def evolve(h: MatrixLike, t: float, psi0: PureState) -> PureState:
    h = _as_hermitian(h)
    _check_state(h, psi0)
    t = _check_time(t)
    return PureState(spectrum(h).evolve(psi0.amplitudes, t))


def evolve_piecewise(
    h_sequence: tp.Sequence[MatrixLike], dt: float, psi0: PureState
) -> PureState:
    """Time-ordered evolution with ``h_sequence[m]`` acting on step ``m``.

    Computes ``U_M ··· U_1 ψ`` with ``U_m = exp(-i H_m dt)``.

    Raises:
        ValidationError: empty sequence, ``dt <= 0`` or mismatched dimensions
    """
    if len(h_sequence) == 0:
        raise ValidationError("Hamiltonian sequence is empty")
    dt = _check_time(dt)
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")

    amplitudes = psi0.amplitudes
    for h in h_sequence:
        h = _as_hermitian(h)
        _check_state(h, psi0)
        amplitudes = spectrum(h).evolve(amplitudes, dt)
    return PureState(amplitudes)


def reduced_hamiltonian_batch(
    n_outputs: int, beta: float, phases: np.ndarray
) -> np.ndarray:
    """Reduced Hamiltonians for a batch of phases, shape ``(B, 6, 6)``."""
    phases = np.asarray(phases, dtype=float)
    base = np.array(_reduced_entries(n_outputs, beta, 0.0))
    batch = np.broadcast_to(base, phases.shape + base.shape).copy()
    link = beta * np.exp(-1j * phases)
    batch[..., 1, 2] = link
    batch[..., 2, 1] = np.conj(link)
    return batch


@dataclass(frozen=True, eq=False)
class BatchSpectrum:
    """Stacked eigendecompositions of ``B`` Hamiltonians."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def of(cls, hamiltonians: np.ndarray) -> "BatchSpectrum":
        # numpy's eigh broadcasts over leading axes; scipy's does not
        eigenvalues, eigenvectors = np.linalg.eigh(hamiltonians)
        return cls(eigenvalues, eigenvectors)

    def evolve(self, states: np.ndarray, duration: float) -> np.ndarray:
        """Apply ``exp(-i H_b duration)`` to ``states[b]`` for every ``b``."""
        q = self.eigenvectors
        coefficients = np.einsum("bji,bj->bi", q.conj(), states)
        coefficients *= np.exp(-1j * self.eigenvalues * duration)
        return np.einsum("bij,bj->bi", q, coefficients)


def reduction_deviation(
    params: RouterParams,
    t: float,
    layout: tp.Optional[FullGraphLayout] = None,
    isometry: tp.Optional[np.ndarray] = None,
) -> float:
    """Largest amplitude gap between full-graph and reduced evolution of ``|1⟩``.

    The full graph is evolved from the input external vertex and projected
    onto the reduced basis; the result is compared entrywise with the reduced
    evolution of ``|1⟩``.
    """
    layout = layout or FullGraphLayout(params.n_outputs)
    if isometry is None:
        isometry = reduction_isometry(layout)
    start = np.zeros(layout.dim, dtype=complex)
    start[layout.input_external] = 1.0
    full = spectrum(build_full_hamiltonian(params, layout)).evolve(start, t)
    reduced = reduced_spectrum(params).evolve(isometry.conj().T @ start, t)
    return float(np.max(np.abs(isometry.conj().T @ full - reduced)))


def evolve_batch_piecewise(
    n_outputs: int,
    beta: float,
    phases: np.ndarray,
    dt: float,
    states: np.ndarray,
) -> np.ndarray:
    """Evolve ``B`` trajectories whose chiral phase changes every step.

    Args:
        phases (np.ndarray): phase of trajectory ``b`` on step ``m``, shape ``(B, M)``
        dt (float): step length
        states (np.ndarray): reduced-basis amplitudes, shape ``(B, 6)``

    Returns:
        np.ndarray: final amplitudes, shape ``(B, 6)``
    """
    phases = np.atleast_2d(np.asarray(phases, dtype=float))
    states = np.asarray(states, dtype=complex)
    if phases.shape[0] != states.shape[0]:
        raise ValidationError(
            f"{phases.shape[0]} phase paths for {states.shape[0]} initial states"
        )
    dt = _check_time(dt)
    if dt <= 0:
        raise ValidationError(f"dt must be positive, got {dt}")

    for m in range(phases.shape[1]):
        batch = BatchSpectrum.of(reduced_hamiltonian_batch(n_outputs, beta, phases[:, m]))
        states = batch.evolve(states, dt)
    return states
