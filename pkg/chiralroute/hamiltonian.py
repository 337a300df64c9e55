"""Router Hamiltonians.

The full router is a complete graph on ``n + 1`` internal vertices, each
attached to one external vertex. A single internal link, between the input
and output pairs, carries weight ``beta`` and chiral phase ``phi``. Grouping
identically evolving vertices gives a 6-dimensional reduced model in which
``n`` only enters as a parameter.

Phase convention: the reduced matrix element ⟨2|H|3⟩ is ``beta·e^{-i·phi}``
and the full matrix carries the same value at (input internal, output
internal), so that ``V† H_full V == H_red`` exactly.
"""
import functools
import logging
import math
import typing as tp

import numpy as np

from chiralroute.errors import ValidationError
from chiralroute.types import (
    REDUCED_DIM,
    FullGraphLayout,
    HermitianMatrix,
    RouterParams,
)

logger = logging.getLogger(__name__)

REDUCED_BASIS_LABELS: tp.Tuple[str, ...] = (
    "input external",
    "input internal",
    "output internal",
    "output external",
    "other internal",
    "other external",
)


def reduced_basis_labels() -> tp.Dict[int, str]:
    """1-based reduced label → vertex group it represents."""
    return {j + 1: name for j, name in enumerate(REDUCED_BASIS_LABELS)}


def _check_layout(params: RouterParams, layout: FullGraphLayout) -> None:
    if layout.n_outputs != params.n_outputs:
        raise ValidationError(
            f"layout has {layout.n_outputs} outputs, params have {params.n_outputs}"
        )


def adjacency_matrix(layout: FullGraphLayout) -> np.ndarray:
    """0/1 adjacency of the router graph (complete core plus pendant vertices)."""
    dim = layout.dim
    adjacency = np.zeros((dim, dim))
    core = np.asarray(layout.internal_indices)
    adjacency[np.ix_(core, core)] = 1.0
    adjacency[core, core] = 0.0
    external = layout.external_of(core)
    adjacency[core, external] = 1.0
    adjacency[external, core] = 1.0
    return adjacency


def build_full_hamiltonian(
    params: RouterParams, layout: tp.Optional[FullGraphLayout] = None
) -> HermitianMatrix:
    """Hamiltonian of the full ``2(n + 1)``-vertex router.

    The entry at (input internal, output internal) is ``beta·e^{-i·phi}``, so
    ``phi = π/2`` with ``beta = 1`` puts ``-i`` there and ``+i`` on the
    transposed entry. This is the sign for which projecting onto the reduced
    basis reproduces :func:`build_reduced_hamiltonian` exactly.

    Args:
        params (RouterParams): router instance
        layout (FullGraphLayout, optional): vertex numbering and port choice.
            Defaults to input on pair 0 and output on pair 1.

    Raises:
        ValidationError: layout inconsistent with ``params``

    Returns:
        HermitianMatrix: adjacency with the chiral link replaced by
            ``beta·e^{∓i·phi}``
    """
    if layout is None:
        layout = FullGraphLayout(params.n_outputs)
    _check_layout(params, layout)

    entries = adjacency_matrix(layout).astype(complex)
    link = params.beta * np.exp(-1j * params.phi)
    j, k = layout.input_internal, layout.output_internal
    entries[j, k] = link
    entries[k, j] = np.conj(link)
    return HermitianMatrix(entries)


@functools.lru_cache(maxsize=4096)
def _reduced_entries(n: int, beta: float, phi: float) -> np.ndarray:
    root = math.sqrt(n - 1)
    link = beta * np.exp(-1j * phi)
    h = np.zeros((REDUCED_DIM, REDUCED_DIM), dtype=complex)
    # upper triangle, 0-based (label - 1)
    h[0, 1] = 1.0
    h[1, 2] = link
    h[1, 4] = root
    h[2, 3] = 1.0
    h[2, 4] = root
    h[4, 5] = 1.0
    h = h + h.conj().T
    h[4, 4] = n - 2
    h.setflags(write=False)
    return h


def build_reduced_hamiltonian(params: RouterParams) -> HermitianMatrix:
    """6×6 reduced Hamiltonian in the grouped basis.

    Example:
    ```
    h = build_reduced_hamiltonian(RouterParams(5, beta=1.0, phi=math.pi))
    h.entries[1, 2]  # ⟨2|H|3⟩ == -1
    ```
    """
    return HermitianMatrix(
        _reduced_entries(params.n_outputs, params.beta, params.phi).copy()
    )


def reduction_isometry(layout: FullGraphLayout) -> np.ndarray:
    """Columns are the full-space vectors of reduced states |1⟩..|6⟩.

    Returns:
        np.ndarray: real ``2(n + 1) × 6`` matrix with orthonormal columns
    """
    isometry = np.zeros((layout.dim, REDUCED_DIM))
    isometry[layout.input_external, 0] = 1.0
    isometry[layout.input_internal, 1] = 1.0
    isometry[layout.output_internal, 2] = 1.0
    isometry[layout.output_external, 3] = 1.0
    weight = 1.0 / math.sqrt(layout.n_outputs - 1)
    isometry[layout.bulk_internal, 4] = weight
    isometry[layout.bulk_external, 5] = weight
    return isometry


def project_to_reduced(
    full: np.ndarray, layout: FullGraphLayout
) -> np.ndarray:
    """V† · M · V for a full-space operator ``M`` (or V† · ψ for a vector)."""
    isometry = reduction_isometry(layout)
    if full.ndim == 1:
        return isometry.T @ full
    return isometry.T @ full @ isometry
