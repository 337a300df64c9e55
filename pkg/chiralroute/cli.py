"""Command-line front end.

Exit codes: 0 success, 1 verification or acceptance failure, 2 invalid
usage or parameters. Curves and surfaces are written as CSV, matrices and
reports as JSON; numbers use shortest round-trip formatting.
"""
import contextlib
import csv
import json
import logging
import math
import sys
import typing as tp
from functools import wraps

import click
import numpy as np
import pydantic
import sqlalchemy.exc

from chiralroute import noise, routing, search
from chiralroute.config import (
    CONFIG_ENV,
    DB_ENV,
    HamiltonianConfig,
    NoiseConfig,
    OptimizeConfig,
    ScanConfig,
    Table1Config,
    VerifyConfig,
    read_config_file,
    resolve,
)
from chiralroute.dynamics import reduction_deviation
from chiralroute.errors import ConvergenceError, ValidationError
from chiralroute.store import (
    ExperimentRun,
    open_store,
    record_curve,
    record_scan,
    record_summary,
)
from chiralroute.hamiltonian import (
    build_full_hamiltonian,
    build_reduced_hamiltonian,
    reduction_isometry,
)
from chiralroute.types import (
    AxisRange,
    FullGraphLayout,
    Objective,
    OUSpec,
    ParamKind,
    RouterParams,
    ScanGrid,
    SuperpositionGrid,
    SuperpositionParams,
    VonMisesSpec,
)

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_USAGE = 2

SCAN_HEADER = ("t", "param", "fidelity", "p_wrong")
NOISE_HEADER = ("t", "fidelity", "stderr")
PEAK_HEADER = ("t", "param", "value", "width_t", "width_param", "wrong_output_prob")

# (n, t, phi, measure, tabulated fidelity) for the high-fidelity
# superposition-routing configurations
TABLE1_ROWS: tp.Tuple[tp.Tuple[int, float, float, str, float], ...] = (
    (20, 18.550, 4.712, "avg", 0.993),
    (20, 18.523, 4.708, "min", 0.984),
    (70, 18.397, 4.758, "avg", 0.987),
    (70, 18.484, 4.765, "min", 0.976),
    (10**6, 40.068, 4.716, "min", 0.995),
)
TABLE1_TOLERANCE = 0.01


def _fmt(value: tp.Optional[float]) -> str:
    return "" if value is None else repr(float(value))


@contextlib.contextmanager
def _output(path: tp.Optional[str]) -> tp.Iterator[tp.TextIO]:
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", newline="", encoding="utf-8") as fh:
        yield fh


def _write_csv(path: tp.Optional[str], header, rows) -> None:
    with _output(path) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def _write_json(path: tp.Optional[str], document) -> None:
    with _output(path) as fh:
        fh.write(json.dumps(document, indent=2))
        fh.write("\n")


def _complex_rows(matrix: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in matrix]


def handle_errors(f):
    """Map validation failures to exit code 2."""

    @wraps(f)
    def wrapper(*args, **kwargs):
        ctx = click.get_current_context()
        try:
            return f(*args, **kwargs)
        except (ValidationError, pydantic.ValidationError) as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_USAGE)
        except ConvergenceError as exc:
            click.echo(f"error: {exc}", err=True)
            ctx.exit(EXIT_FAILURE)

    return wrapper


def _load(ctx: click.Context, name: str, model, flags: dict):
    section = ctx.obj["file"].get(name)
    return resolve(model, section, flags)


def _store(ctx: click.Context):
    return ctx.obj.get("store")


@click.group()
@click.option(
    "--config",
    "config_path",
    envvar=CONFIG_ENV,
    default=None,
    help=f"JSON config file keyed by command (env {CONFIG_ENV})",
)
@click.option("--db", envvar=DB_ENV, default=None, help=f"SQLAlchemy URL recording runs (env {DB_ENV})")
@click.option("-v", "--verbose", count=True, help="-v info, -vv debug logging on stderr")
@click.pass_context
def main(ctx: click.Context, config_path, db, verbose):
    """Chiral quantum-walk router simulator."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(
        level=level,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    ctx.ensure_object(dict)
    try:
        ctx.obj["file"] = read_config_file(config_path)
    except ValidationError as exc:
        click.echo(f"error: {exc}", err=True)
        ctx.exit(EXIT_USAGE)
    db = db or ctx.obj["file"].get("db")
    if db:
        try:
            ctx.obj["store"] = open_store(db)
        except sqlalchemy.exc.ArgumentError as exc:
            click.echo(f"error: invalid database URL {db!r}: {exc}", err=True)
            ctx.exit(EXIT_USAGE)


@main.command()
@click.option("--n", type=int, default=None, help="number of outputs")
@click.option("--beta", type=float, default=None)
@click.option("--phi", type=float, default=None)
@click.option("--full/--reduced", default=None, help="full 2(n+1) graph or 6-dim reduced model")
@click.option("--input-port", type=int, default=None)
@click.option("--output-port", type=int, default=None)
@click.option("--output", default=None, help="write to file instead of stdout")
@click.pass_context
@handle_errors
def hamiltonian(ctx, **flags):
    """Dump the router Hamiltonian as [re, im] pairs."""
    cfg = _load(ctx, "hamiltonian", HamiltonianConfig, flags)
    params = RouterParams(cfg.n, cfg.beta, cfg.phi)
    if cfg.full:
        layout = FullGraphLayout(cfg.n, cfg.input_port, cfg.output_port)
        h = build_full_hamiltonian(params, layout)
    else:
        h = build_reduced_hamiltonian(params)
    _write_json(
        cfg.output,
        {
            "kind": "full" if cfg.full else "reduced",
            "n": params.n_outputs,
            "beta": params.beta,
            "phi": params.phi,
            "dim": h.dim,
            "entries": _complex_rows(h.entries),
        },
    )


@main.command("scan")
@click.argument("kind", type=click.Choice([k.value for k in ParamKind]), required=False)
@click.option("--n", type=int, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--phi", type=float, default=None)
@click.option("--t-min", type=float, default=None)
@click.option("--t-max", type=float, default=None)
@click.option("--t-steps", type=int, default=None)
@click.option("--param-min", type=float, default=None)
@click.option("--param-max", type=float, default=None)
@click.option("--param-steps", type=int, default=None)
@click.option("--objective", type=click.Choice([o.value for o in Objective]), default=None)
@click.option("--alpha-points", type=int, default=None)
@click.option("--chi-points", type=int, default=None)
@click.option("--measure", type=click.Choice(["uniform", "haar"]), default=None)
@click.option("--threshold", type=float, default=None, help="report peaks above this value")
@click.option("--peaks-output", default=None, help="CSV file for the peak report")
@click.option("--workers", type=int, default=None)
@click.option("--output", default=None)
@click.pass_context
@handle_errors
def scan_command(ctx, **flags):
    """Fidelity surface over (t, phi) or (t, beta) as CSV."""
    cfg = _load(ctx, "scan", ScanConfig, flags)
    grid = ScanGrid(
        t_range=AxisRange(cfg.t_min, cfg.t_max, cfg.t_steps),
        param_range=AxisRange(*cfg.param_axis()),
        param_kind=cfg.kind,
    )
    sp_grid = SuperpositionGrid(cfg.alpha_points, cfg.chi_points, cfg.measure)
    result = search.scan(
        RouterParams(cfg.n, cfg.beta, cfg.phi), grid, cfg.objective, sp_grid, cfg.workers
    )
    _write_csv(cfg.output, SCAN_HEADER, result.rows())

    peaks = []
    if cfg.threshold is not None:
        peaks = search.find_peaks(result, cfg.threshold)
        logger.info("%d peaks above %s", len(peaks), cfg.threshold)
        if cfg.peaks_output is not None:
            _write_csv(
                cfg.peaks_output,
                PEAK_HEADER,
                (
                    (p.t, p.param, p.value, p.width_t, p.width_param, p.wrong_output_prob)
                    for p in peaks
                ),
            )
    if _store(ctx):
        with _store(ctx)() as session:
            record_scan(session, "scan", cfg.model_dump(mode="json"), peaks)


def _table1_rows(selector: str):
    valid = sorted({row[0] for row in TABLE1_ROWS})
    if selector == "all":
        return list(TABLE1_ROWS)
    try:
        n = int(float(selector))
    except ValueError:
        n = None
    rows = [row for row in TABLE1_ROWS if row[0] == n]
    if not rows:
        raise ValidationError(
            f"unknown row {selector!r}; valid rows: all, {', '.join(map(str, valid))}"
        )
    return rows


@main.command()
@click.option("--row", default=None, help="n of the rows to evaluate, or 'all'")
@click.option("--alpha-points", type=int, default=None)
@click.option("--chi-points", type=int, default=None)
@click.option("--measure", type=click.Choice(["uniform", "haar"]), default=None)
@click.option("--refine/--no-refine", default=None, help="also search the nearby optimum")
@click.option("--check/--no-check", default=None, help="exit 1 if a row misses by > 0.01")
@click.option("--output", default=None)
@click.pass_context
@handle_errors
def table1(ctx, **flags):
    """Average and worst-case fidelity at the tabulated configurations."""
    cfg = _load(ctx, "table1", Table1Config, flags)
    sp_grid = SuperpositionGrid(cfg.alpha_points, cfg.chi_points, cfg.measure)

    report = []
    for n, t, phi, measure, tabulated in _table1_rows(cfg.row):
        params = RouterParams(n, 1.0, phi)
        if measure == "avg":
            computed = routing.average_fidelity(params, t, sp_grid)
            objective = Objective.AVERAGE
        else:
            computed = routing.min_fidelity(params, t, sp_grid)
            objective = Objective.WORST_CASE
        entry = {
            "n": n,
            "t": t,
            "phi": phi,
            "measure": measure,
            "computed": computed,
            "tabulated": tabulated,
            "abs_diff": abs(computed - tabulated),
        }
        if cfg.refine:
            fn = search.objective_function(
                RouterParams(n, 1.0, phi), ParamKind.PHASE, objective, sp_grid
            )
            refined = search.refine(
                fn,
                start=(t, phi),
                bounds=((t - 0.5, t + 0.5), (phi - 0.1, phi + 0.1)),
                steps=(0.02, 0.004),
            )
            entry.update(
                refined_t=refined.point[0],
                refined_phi=refined.point[1],
                refined_value=refined.value,
            )
        report.append(entry)

    worst = max(entry["abs_diff"] for entry in report)
    _write_json(cfg.output, {"rows": report, "max_abs_diff": worst})
    if _store(ctx):
        with _store(ctx)() as session:
            record_summary(session, "table1", cfg.model_dump(mode="json"), worst)
    if cfg.check and worst > TABLE1_TOLERANCE:
        click.echo(f"table check failed: max deviation {worst:.4f}", err=True)
        ctx.exit(EXIT_FAILURE)


@main.command("noise")
@click.argument("model", type=click.Choice(["vonmises", "ou"]), required=False)
@click.option("--n", type=int, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--phi", type=float, default=None)
@click.option("--alpha", type=float, default=None)
@click.option("--chi", type=float, default=None)
@click.option("--k", type=float, default=None, help="von Mises concentration")
@click.option("--quadrature-points", type=int, default=None)
@click.option("--theta", type=float, default=None, help="OU mean reversion speed")
@click.option("--sigma", type=float, default=None, help="OU volatility")
@click.option("--mu", type=float, default=None, help="OU long-time mean (default: phi)")
@click.option("--dt", type=float, default=None)
@click.option("--trajectories", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--t-min", type=float, default=None)
@click.option("--t-max", type=float, default=None)
@click.option("--t-steps", type=int, default=None)
@click.option("--workers", type=int, default=None)
@click.option("--output", default=None)
@click.pass_context
@handle_errors
def noise_command(ctx, **flags):
    """Noise-averaged fidelity curve as CSV."""
    cfg = _load(ctx, "noise", NoiseConfig, flags)
    params = RouterParams(cfg.n, cfg.beta, cfg.phi)
    sp = SuperpositionParams(cfg.alpha, cfg.chi)
    axis = AxisRange(cfg.t_min, cfg.t_max, cfg.t_steps)
    times = np.linspace(axis.lo, axis.hi, axis.steps)

    if cfg.model == "vonmises":
        vm = VonMisesSpec(cfg.k, quadrature_points=cfg.quadrature_points)
        curve = noise.static_noise_curve(params, times, sp, vm)
        stderr = [None] * len(curve)
    else:
        spec = OUSpec(
            theta=cfg.theta,
            sigma_vol=cfg.sigma,
            mu=cfg.mu,
            dt=cfg.dt,
            trajectories=cfg.trajectories,
            seed=cfg.seed,
        )
        curve = noise.ou_fidelity_curve(params, times, sp, spec, workers=cfg.workers)
        stderr = curve.stderr

    _write_csv(cfg.output, NOISE_HEADER, zip(curve.times, curve.values, stderr))
    if _store(ctx):
        with _store(ctx)() as session:
            record_curve(session, "noise", cfg.model_dump(mode="json"), curve)


@main.command("verify-reduction")
@click.option("--n-max", type=int, default=None)
@click.option("--samples", type=int, default=None, help="random (beta, phi, t) per n")
@click.option("--seed", type=int, default=None)
@click.option("--tolerance", type=float, default=None)
@click.option("--corrupt-isometry", is_flag=True, default=None, hidden=True)
@click.option("--output", default=None)
@click.pass_context
@handle_errors
def verify_reduction(ctx, **flags):
    """Compare projected full-graph evolution with the reduced model."""
    cfg = _load(ctx, "verify-reduction", VerifyConfig, flags)
    rng = np.random.default_rng(cfg.seed)

    per_n = {}
    for n in range(2, cfg.n_max + 1):
        layout = FullGraphLayout(n)
        isometry = reduction_isometry(layout)
        if cfg.corrupt_isometry:
            isometry = isometry.copy()
            isometry[layout.output_external, 5] += 0.1
        deviation = 0.0
        for _ in range(cfg.samples):
            params = RouterParams(n, rng.uniform(-2.0, 2.0), rng.uniform(0.0, 2.0 * math.pi))
            t = rng.uniform(0.0, 30.0)
            deviation = max(deviation, reduction_deviation(params, t, layout, isometry))
        per_n[str(n)] = deviation

    worst = max(per_n.values())
    passed = worst <= cfg.tolerance
    _write_json(
        cfg.output,
        {"n_max": cfg.n_max, "max_deviation": worst, "per_n": per_n, "passed": passed},
    )
    if _store(ctx):
        with _store(ctx)() as session:
            record_summary(session, "verify-reduction", cfg.model_dump(mode="json"), worst)
    if not passed:
        ctx.exit(EXIT_FAILURE)


@main.command()
@click.argument("kind", type=click.Choice([k.value for k in ParamKind]), required=False)
@click.option("--n", type=int, default=None)
@click.option("--beta", type=float, default=None)
@click.option("--phi", type=float, default=None)
@click.option("--objective", type=click.Choice([o.value for o in Objective]), default=None)
@click.option("--t-start", type=float, default=None)
@click.option("--param-start", type=float, default=None)
@click.option("--t-min", type=float, default=None)
@click.option("--t-max", type=float, default=None)
@click.option("--param-min", type=float, default=None)
@click.option("--param-max", type=float, default=None)
@click.option("--tolerance", type=float, default=None)
@click.option("--alpha-points", type=int, default=None)
@click.option("--chi-points", type=int, default=None)
@click.option("--measure", type=click.Choice(["uniform", "haar"]), default=None)
@click.option("--output", default=None)
@click.pass_context
@handle_errors
def optimize(ctx, **flags):
    """Refine a (t, phi) or (t, beta) optimum from a starting point."""
    cfg = _load(ctx, "optimize", OptimizeConfig, flags)
    base = RouterParams(cfg.n, cfg.beta, cfg.phi)
    if cfg.param_start is not None:
        param_start = cfg.param_start
    elif cfg.kind is ParamKind.PHASE:
        param_start = cfg.phi
    else:
        param_start = cfg.beta
    bounds = (
        (
            max(0.0, cfg.t_start - 1.0) if cfg.t_min is None else cfg.t_min,
            cfg.t_start + 1.0 if cfg.t_max is None else cfg.t_max,
        ),
        (
            param_start - 0.2 if cfg.param_min is None else cfg.param_min,
            param_start + 0.2 if cfg.param_max is None else cfg.param_max,
        ),
    )
    sp_grid = SuperpositionGrid(cfg.alpha_points, cfg.chi_points, cfg.measure)
    fn = search.objective_function(base, cfg.kind, cfg.objective, sp_grid)
    start_value = fn(cfg.t_start, param_start)
    result = search.refine(fn, (cfg.t_start, param_start), bounds, tolerance=cfg.tolerance)
    _write_json(
        cfg.output,
        {
            "kind": cfg.kind.value,
            "objective": cfg.objective.value,
            "n": cfg.n,
            "start": [cfg.t_start, param_start],
            "start_value": start_value,
            "t": result.point[0],
            "param": result.point[1],
            "value": result.value,
            "converged": result.converged,
            "iterations": result.iterations,
            "evaluations": result.evaluations,
        },
    )
    if _store(ctx):
        with _store(ctx)() as session:
            record_summary(session, "optimize", cfg.model_dump(mode="json"), result.value)


@main.command()
@click.option("--command", "command_name", default=None, help="only runs of this command")
@click.option("--output", default=None)
@click.pass_context
@handle_errors
def runs(ctx, command_name, output):
    """List runs recorded with --db."""
    if not _store(ctx):
        raise ValidationError(f"no result store configured (use --db or {DB_ENV})")
    filters = {} if command_name is None else {"command": command_name}
    with _store(ctx)() as session:
        stored = ExperimentRun.find(session, **filters)
        rows = [(r.id, r.command, r.created_at.isoformat(), r.summary) for r in stored]

    with _output(output) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("id", "command", "created_at", "summary"))
        for run_id, command, created, summary in rows:
            writer.writerow((run_id, command, created, _fmt(summary)))


if __name__ == "__main__":
    main()
