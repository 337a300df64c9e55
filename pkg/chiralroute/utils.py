import logging
import math
import typing as tp
from functools import wraps

from chiralroute.errors import ConvergenceError, ValidationError
from chiralroute.types import RefineResult

logger = logging.getLogger(__name__)

_RT = tp.TypeVar("_RT")  # return type
P = tp.ParamSpec("P")

Bounds = tp.Sequence[tp.Tuple[tp.Optional[float], tp.Optional[float]]]


def finite_objective(f: tp.Callable[P, float]) -> tp.Callable[P, float]:
    """Decorator rejecting NaN/inf objective values."""

    @wraps(f)
    def wrapper(*args: P.args, **kwargs: P.kwargs) -> float:
        value = float(f(*args, **kwargs))
        if not math.isfinite(value):
            raise ConvergenceError(f"objective returned {value} at {args}")
        return value

    return wrapper


def _clip(value: float, bound: tp.Tuple[tp.Optional[float], tp.Optional[float]]) -> float:
    lo, hi = bound
    if lo is not None and value < lo:
        return lo
    if hi is not None and value > hi:
        return hi
    return value


def coordinate_ascent(
    objective: tp.Callable[..., float],
    start: tp.Sequence[float],
    bounds: Bounds,
    steps: tp.Sequence[float],
    *,
    tolerance: float = 1e-4,
    max_evaluations: int = 20_000,
) -> RefineResult:
    """Derivative-free maximisation by coordinate moves with step halving.

    Every coordinate is tried at ``x ± step``; the best strictly improving
    trial is accepted. When no trial improves, all steps are halved. Stops
    once every step is below ``tolerance``.

    Args:
        objective: called as ``objective(*point)``
        start: initial point, must lie within ``bounds``
        bounds: ``(lo, hi)`` per coordinate, ``None`` for unbounded
        steps: initial step per coordinate

    Raises:
        ValidationError: start outside bounds or mismatched lengths
        ConvergenceError: non-finite objective value

    Returns:
        RefineResult: best point, its value and whether the tolerance was met
    """
    if not len(start) == len(bounds) == len(steps):
        raise ValidationError("start, bounds and steps must have equal length")
    for x, bound in zip(start, bounds):
        if _clip(x, bound) != x:
            raise ValidationError(f"start point {tuple(start)} outside bounds {bounds}")

    f = finite_objective(objective)
    point = [float(x) for x in start]
    steps = [float(s) for s in steps]
    value = f(*point)
    evaluations = 1
    iterations = 0

    while max(steps) >= tolerance:
        if evaluations >= max_evaluations:
            logger.warning(
                "coordinate ascent stopped after %d evaluations (steps %s)",
                evaluations,
                steps,
            )
            return RefineResult(tuple(point), value, False, iterations, evaluations)

        best_point, best_value = None, value
        for i, step in enumerate(steps):
            if step < tolerance:
                continue
            for direction in (1.0, -1.0):
                trial = list(point)
                trial[i] = _clip(point[i] + direction * step, bounds[i])
                if trial[i] == point[i]:
                    continue
                trial_value = f(*trial)
                evaluations += 1
                if trial_value > best_value:
                    best_point, best_value = trial, trial_value

        iterations += 1
        if best_point is None:
            steps = [s / 2.0 for s in steps]
        else:
            point, value = best_point, best_value

    logger.debug(
        "coordinate ascent converged at %s (value %.6g, %d evaluations)",
        point,
        value,
        evaluations,
    )
    return RefineResult(tuple(point), value, True, iterations, evaluations)
