import math

import numpy as np
import pytest

from chiralroute import routing, search
from chiralroute.errors import ConvergenceError, ValidationError
from chiralroute.types import (
    AxisRange,
    Objective,
    ParamKind,
    RouterParams,
    ScanGrid,
    ScanResult,
    SuperpositionGrid,
)
from chiralroute.utils import coordinate_ascent


def _synthetic(fidelity, param_values=None, kind=ParamKind.WEIGHT):
    fidelity = np.asarray(fidelity, dtype=float)
    t_values = np.arange(fidelity.shape[0], dtype=float)
    if param_values is None:
        param_values = np.arange(fidelity.shape[1], dtype=float)
    return ScanResult(
        t_values=t_values,
        param_values=np.asarray(param_values, dtype=float),
        fidelity=fidelity,
        p_wrong=np.zeros_like(fidelity),
        param_kind=kind,
    )


def test_scan_shape_and_rows():
    grid = ScanGrid(AxisRange(0, 10, 11), AxisRange(0, 2 * math.pi, 8))
    result = search.scan(RouterParams(10), grid)

    assert result.fidelity.shape == (11, 8)
    assert result.param_values[-1] < 2 * math.pi
    rows = list(result.rows())
    assert len(rows) == 88
    assert rows[9][:2] == (1.0, result.param_values[1])


def test_scan_localized_matches_transition_probability():
    grid = ScanGrid(AxisRange(0, 20, 21), AxisRange(0, 3, 4), ParamKind.WEIGHT)
    result = search.scan(RouterParams(12, 1.0, 0.5), grid)

    params = RouterParams(12, 2.0, 0.5)
    assert result.fidelity[7, 2] == pytest.approx(routing.transition_probability(params, 7.0))
    assert result.p_wrong[7, 2] == pytest.approx(routing.transition_probability(params, 7.0, 1, 6))


def test_scan_workers_do_not_change_result():
    grid = ScanGrid(AxisRange(0, 20, 21), AxisRange(0, 2 * math.pi, 6))
    sp_grid = SuperpositionGrid(5, 6)
    serial = search.scan(RouterParams(20), grid, Objective.AVERAGE, sp_grid)
    threaded = search.scan(RouterParams(20), grid, Objective.AVERAGE, sp_grid, workers=3)

    np.testing.assert_array_equal(serial.fidelity, threaded.fidelity)


def test_scan_worst_case_is_refined_minimum():
    grid = ScanGrid(AxisRange(10, 30, 3), AxisRange(4.708, 4.808, 2), ParamKind.PHASE)
    sp_grid = SuperpositionGrid(3, 4)
    result = search.scan(RouterParams(20), grid, Objective.WORST_CASE, sp_grid)
    params = RouterParams(20, 1.0, 4.708)

    for i, t in enumerate(result.t_values):
        assert result.fidelity[i, 0] == pytest.approx(
            routing.min_fidelity(params, t, sp_grid), abs=1e-12
        )
    # a coarse grid alone misses the true worst case by a wide margin here
    assert result.fidelity[2, 0] < routing.min_fidelity(params, 30.0, sp_grid, refine=False) - 0.05


def test_broad_chiral_peak_near_pi():
    grid = ScanGrid(AxisRange(15, 19, 81), AxisRange(0, 2 * math.pi, 128))
    result = search.scan(RouterParams(40, 1.0, 0.0), grid)
    peaks = search.find_peaks(result, 0.8, sort_by="width")

    near_pi = [
        p
        for p in peaks
        if abs(p.param - math.pi) < 0.3 and p.value > 0.8 and p.wrong_output_prob <= 0.03
    ]
    assert near_pi
    # the sharp high-fidelity peak lies elsewhere in phase
    assert abs(max(peaks, key=lambda p: p.value).param - math.pi) > 0.3


def test_early_robust_peak():
    grid = ScanGrid(AxisRange(3, 5, 41), AxisRange(0, 2 * math.pi, 64))
    result = search.scan(RouterParams(40, 1.0, 0.0), grid)
    peaks = search.find_peaks(result, 0.8)

    assert peaks
    assert 3 <= peaks[0].t <= 5
    assert peaks[0].value > 0.8


@pytest.mark.parametrize("t", [10, 20, 30, 40])
def test_weight_ray(t):
    # the high-fidelity ridge runs close to beta = 0.69 t
    betas = np.linspace(0.6 * t, 0.8 * t, 201)
    p14 = np.array([routing.transition_probability(RouterParams(50, b, 0.0), t) for b in betas])
    p16 = np.array(
        [routing.transition_probability(RouterParams(50, b, 0.0), t, 1, 6) for b in betas]
    )

    good = (p14 >= 0.90) & (p14 <= 1.0) & (p16 <= 0.05)
    assert good.any()


def test_find_peaks_widths():
    surface = np.zeros((5, 6))
    surface[1:4, 2] = [0.85, 0.95, 0.85]
    surface[2, 1:5] = [0.82, 0.95, 0.9, 0.81]
    peaks = search.find_peaks(_synthetic(surface), 0.8)

    assert len(peaks) == 1
    peak = peaks[0]
    assert peak.location == (2.0, 2.0)
    assert peak.value == 0.95
    assert peak.width_t == 3.0
    assert peak.width_param == 4.0


def test_find_peaks_wraps_phase_axis():
    phases = np.linspace(0, 2 * math.pi, 8, endpoint=False)
    surface = np.zeros((3, 8))
    surface[1, [7, 0, 1]] = [0.85, 0.9, 0.85]
    peaks = search.find_peaks(_synthetic(surface, phases, ParamKind.PHASE), 0.8)

    assert len(peaks) == 1
    assert peaks[0].width_param == pytest.approx(3 * 2 * math.pi / 8)


def test_find_peaks_plateau_is_one_peak():
    surface = np.zeros((4, 6))
    surface[1, 1:4] = 0.9
    peaks = search.find_peaks(_synthetic(surface), 0.5)

    assert len(peaks) == 1
    assert peaks[0].width_param == 3.0


def test_find_peaks_tie_break_by_width():
    surface = np.zeros((7, 9))
    surface[1, 1] = 0.9
    surface[5, 4:7] = [0.85, 0.9, 0.85]
    peaks = search.find_peaks(_synthetic(surface), 0.8)

    assert [p.location for p in peaks] == [(5.0, 5.0), (1.0, 1.0)]


def test_find_peaks_sort_by_width():
    surface = np.zeros((7, 9))
    surface[1, 1] = 0.95
    surface[5, 4:7] = [0.85, 0.9, 0.85]
    by_value = search.find_peaks(_synthetic(surface), 0.8)
    by_width = search.find_peaks(_synthetic(surface), 0.8, sort_by="width")

    assert by_value[0].location == (1.0, 1.0)
    assert by_width[0].location == (5.0, 5.0)


def test_find_peaks_invariant_under_transpose():
    grid = ScanGrid(AxisRange(0, 20, 41), AxisRange(0, 2 * math.pi, 32))
    result = search.scan(RouterParams(40, 1.0, 0.0), grid)

    assert search.find_peaks(result, 0.5) == search.find_peaks(result.transpose(), 0.5)
    assert list(result.rows()) == list(result.transpose().rows())


def test_find_peaks_gaussian_bump():
    t_values = np.linspace(0, 10, 41)
    param_values = np.linspace(0, 5, 31)
    tt, pp = np.meshgrid(t_values, param_values, indexing="ij")
    surface = 0.95 * np.exp(-((tt - 6.13) ** 2) / 2.0 - (pp - 2.71) ** 2 / 0.5)
    result = ScanResult(
        t_values=t_values,
        param_values=param_values,
        fidelity=surface,
        p_wrong=np.zeros_like(surface),
        param_kind=ParamKind.WEIGHT,
    )
    peaks = search.find_peaks(result, 0.5)

    assert len(peaks) == 1
    assert abs(peaks[0].t - 6.13) <= t_values[1] - t_values[0]
    assert abs(peaks[0].param - 2.71) <= param_values[1] - param_values[0]


def test_find_peaks_rejects_threshold():
    result = _synthetic(np.zeros((3, 3)))
    for threshold in (0.0, 1.0, -0.5):
        with pytest.raises(ValidationError):
            search.find_peaks(result, threshold)


def test_find_peaks_empty():
    assert search.find_peaks(_synthetic(np.full((4, 4), 0.1)), 0.5) == []


def test_refine_average_objective(router_n20):
    fn = search.objective_function(router_n20, ParamKind.PHASE, Objective.AVERAGE)
    result = search.refine(fn, (18.5, 4.71), ((18.0, 19.0), (4.6, 4.8)))

    assert result.converged
    assert result.value >= 0.99
    assert result.value >= fn(18.5, 4.71)


def test_refine_on_plateau_keeps_start():
    result = search.refine(lambda t, p: 0.5, (3.0, 1.0), ((0.0, 10.0), (0.0, 2.0)))

    assert result.converged
    assert result.point == (3.0, 1.0)
    assert result.value == 0.5


def test_refine_rejects_start_outside_bounds():
    fn = search.objective_function(RouterParams(10), ParamKind.WEIGHT, Objective.LOCALIZED)
    with pytest.raises(ValidationError):
        search.refine(fn, (5.0, 3.0), ((0.0, 4.0), (0.0, 2.0)))


def test_coordinate_ascent_quadratic():
    result = coordinate_ascent(
        lambda x, y: -((x - 1.3) ** 2) - 2 * (y + 0.4) ** 2,
        start=(0.0, 0.0),
        bounds=((-5.0, 5.0), (None, None)),
        steps=(0.5, 0.5),
        tolerance=1e-6,
    )

    assert result.converged
    assert result.point == pytest.approx((1.3, -0.4), abs=1e-5)


def test_coordinate_ascent_respects_bounds():
    result = coordinate_ascent(lambda x: x, start=(0.0,), bounds=((0.0, 2.0),), steps=(0.3,))

    assert result.point == (2.0,)


def test_coordinate_ascent_rejects_nan():
    with pytest.raises(ConvergenceError):
        coordinate_ascent(lambda x: math.nan, (0.0,), ((None, None),), (1.0,))
