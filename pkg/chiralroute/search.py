"""Parameter scans over (t, φ) or (t, β), peak detection and local refinement."""
import logging
import math
import typing as tp
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy import ndimage

from chiralroute import routing
from chiralroute.errors import ValidationError
from chiralroute.types import (
    TWO_PI,
    Objective,
    Objective2D,
    ParamKind,
    PeakReport,
    RefineResult,
    RouterParams,
    ScanGrid,
    ScanResult,
    SuperpositionGrid,
)
from chiralroute.utils import coordinate_ascent

logger = logging.getLogger(__name__)

PeakSortKey = tp.Literal["value", "width"]


def router_at(params_base: RouterParams, kind: ParamKind, value: float) -> RouterParams:
    """``params_base`` with the scanned parameter set to ``value``."""
    if ParamKind(kind) is ParamKind.PHASE:
        return params_base.with_phi(value)
    return params_base.with_beta(value)


def _objective_column(
    params: RouterParams,
    times: np.ndarray,
    objective: Objective,
    sp_grid: SuperpositionGrid,
) -> np.ndarray:
    if objective is Objective.LOCALIZED:
        return routing.transition_probabilities(params, times, 1, 4)
    if objective is Objective.AVERAGE:
        return routing.average_fidelities(params, times, sp_grid)
    return routing.min_fidelities(params, times, sp_grid)


def scan(
    params_base: RouterParams,
    grid: ScanGrid,
    objective: Objective = Objective.LOCALIZED,
    sp_grid: tp.Optional[SuperpositionGrid] = None,
    workers: int = 1,
) -> ScanResult:
    """Dense fidelity surface over ``grid``.

    One reduced-Hamiltonian decomposition is made per parameter value and
    reused along the whole time axis. The worst-case surface is the refined
    minimum of :func:`chiralroute.routing.min_fidelity` at every grid point.

    Args:
        params_base (RouterParams): router whose ``phi`` or ``beta`` is scanned
        grid (ScanGrid): time and parameter axes
        objective (Objective): localized P₁,₄, average or worst-case fidelity
        sp_grid (SuperpositionGrid, optional): (α, χ) grid for superposition
            objectives. Defaults to the 41 × 64 uniform grid.
        workers (int, optional): threads used across parameter values

    Returns:
        ScanResult: fidelity and aggregate wrong-output probability P₁,₆,
            time along axis 0
    """
    objective = Objective(objective)
    sp_grid = sp_grid or routing.DEFAULT_GRID
    times = grid.t_values()
    values = grid.param_values()
    logger.debug(
        "scanning %s over %d × %d points (%s)",
        grid.param_kind.value,
        times.size,
        values.size,
        objective.value,
    )

    def column(value: float) -> tp.Tuple[np.ndarray, np.ndarray]:
        params = router_at(params_base, grid.param_kind, float(value))
        return (
            _objective_column(params, times, objective, sp_grid),
            routing.transition_probabilities(params, times, 1, 6),
        )

    if workers <= 1:
        columns = [column(v) for v in values]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            columns = list(pool.map(column, values))

    return ScanResult(
        t_values=times,
        param_values=values,
        fidelity=np.stack([c[0] for c in columns], axis=1),
        p_wrong=np.stack([c[1] for c in columns], axis=1),
        param_kind=grid.param_kind,
        objective=objective,
    )


def _spacing(values: np.ndarray) -> float:
    return float(values[1] - values[0]) if values.size > 1 else 1.0


def _is_periodic(result: ScanResult) -> bool:
    if result.param_kind is not ParamKind.PHASE or result.param_values.size < 2:
        return False
    span = _spacing(result.param_values) * result.param_values.size
    return math.isclose(span, TWO_PI, rel_tol=1e-9)


def _run_length(line: np.ndarray, index: int, threshold: float, periodic: bool) -> int:
    """Length of the run of ``line >= threshold`` containing ``index``."""
    size = line.size
    above = line >= threshold
    if not above[index]:
        return 0
    if periodic and above.all():
        return size
    count = 1
    for direction in (1, -1):
        j = index + direction
        while True:
            if periodic:
                j %= size
            elif not 0 <= j < size:
                break
            if not above[j] or j == index:
                break
            count += 1
            j += direction
    return count


def find_peaks(
    result: ScanResult, threshold: float, sort_by: PeakSortKey = "value"
) -> tp.List[PeakReport]:
    """Local maxima of the surface above ``threshold`` with their widths.

    Widths are the extent of the contiguous region ``>= threshold`` through
    the peak along each axis (cell count × spacing). Equal keys are broken by
    larger width product, then smaller ``t``.

    Raises:
        ValidationError: ``threshold`` outside (0, 1)
    """
    if not 0.0 < threshold < 1.0:
        raise ValidationError(f"threshold must lie in (0, 1), got {threshold}")

    fidelity, p_wrong = result.oriented()
    periodic = _is_periodic(result)
    modes = ("nearest", "wrap" if periodic else "nearest")
    local_max = ndimage.maximum_filter(fidelity, size=3, mode=modes) == fidelity
    candidates = local_max & (fidelity >= threshold)
    # a flat plateau of maxima is one peak
    labels, count = ndimage.label(candidates, structure=np.ones((3, 3), dtype=int))

    dt = _spacing(result.t_values)
    dp = _spacing(result.param_values)
    peaks = []
    for label in range(1, count + 1):
        cells = np.argwhere(labels == label)
        i, j = (int(x) for x in cells[0])
        peaks.append(
            PeakReport(
                t=float(result.t_values[i]),
                param=float(result.param_values[j]),
                value=float(fidelity[i, j]),
                width_t=_run_length(fidelity[:, j], i, threshold, False) * dt,
                width_param=_run_length(fidelity[i, :], j, threshold, periodic) * dp,
                wrong_output_prob=float(p_wrong[i, j]),
            )
        )

    if sort_by == "width":
        peaks.sort(key=lambda p: (-p.width_product, -p.value, p.t))
    else:
        peaks.sort(key=lambda p: (-p.value, -p.width_product, p.t))
    logger.debug("found %d peaks above %.3f", len(peaks), threshold)
    return peaks


def objective_function(
    params_base: RouterParams,
    kind: ParamKind,
    objective: Objective,
    sp_grid: tp.Optional[SuperpositionGrid] = None,
) -> Objective2D:
    """Fidelity at ``(t, param)`` for use with :func:`refine`.

    The worst-case objective uses the refined minimum of
    :func:`chiralroute.routing.min_fidelity`.
    """
    objective = Objective(objective)
    sp_grid = sp_grid or routing.DEFAULT_GRID

    def evaluate(t: float, param: float) -> float:
        params = router_at(params_base, kind, param)
        if objective is Objective.LOCALIZED:
            return routing.transition_probability(params, t, 1, 4)
        if objective is Objective.AVERAGE:
            return routing.average_fidelity(params, t, sp_grid)
        return routing.min_fidelity(params, t, sp_grid)

    return evaluate


def refine(
    objective: Objective2D,
    start: tp.Tuple[float, float],
    bounds: tp.Sequence[tp.Tuple[float, float]],
    steps: tp.Optional[tp.Tuple[float, float]] = None,
    tolerance: float = 1e-4,
) -> RefineResult:
    """Local maximisation of ``objective(t, param)`` from ``start``.

    Coordinate ascent with step halving; stops when both steps are below
    ``tolerance``. Accepted iterates never decrease the objective.

    Raises:
        ValidationError: ``start`` outside ``bounds``
        ConvergenceError: the objective returned a non-finite value
    """
    if steps is None:
        steps = tuple(0.05 * (hi - lo) for lo, hi in bounds)
    return coordinate_ascent(objective, start, bounds, steps, tolerance=tolerance)
