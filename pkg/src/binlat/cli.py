"""Command-line interface: CSV in, JSON / text tables / CSV curves out.

Exit codes: 0 success, 1 usage error, 2 data error, 3 statistical degeneracy
(pile-up or a degenerate score variance).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .glm import ConvergenceWarning, SingularInformationError, fit_glm
from .latent_test import DegenerateStatisticError, standard_latent_test, sup_latent_test
from .marginal import fit_marginal, marginal_covariance
from .model import ModelError, ObservationSeries
from .numerics import RandomSource, gauss_hermite
from .serial_test import SerialTestUndefined, serial_dependence_test
from .simulation import (
    DgpSpec,
    NullQuantileConfig,
    PowerConfig,
    TwoStepConfig,
    run_null_quantiles,
    run_power_curve,
    run_two_step_table,
    simulate_series,
    simulated_sup_pvalue,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DEGENERATE = 0, 1, 2, 3
DEFAULT_SEED = 42


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    output: str | None = None
    grid: tuple[float, ...] = ()
    lags: int = 2
    nodes: int = 40
    reps: int = 0
    seed: int = DEFAULT_SEED
    pvalue: str = "davies"
    scaling: str = "marginal"
    extra: dict = field(default_factory=dict)


# ---------------------------------------------------------------- CSV


def read_csv(path, binary: bool = False) -> ObservationSeries:
    """Read ``y``, ``m`` and regressor columns into a series.

    An intercept column is prepended unless one named ``intercept`` is
    present. With ``binary=True`` a missing ``m`` column means m_t = 1.
    """
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise DataError(f"cannot read {path}: {err.strerror}") from err
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "y" not in header:
        raise DataError(f"{path}: missing column 'y'")
    if "m" not in header and not binary:
        raise DataError(f"{path}: missing column 'm' (use --binary for 0/1 data)")
    regs = [h for h in header if h not in ("y", "m")]
    idx = {h: i for i, h in enumerate(header)}
    y, m, x = [], [], []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {line} has {len(row)} fields, expected {len(header)}")
        try:
            yv = _as_int(row[idx["y"]])
            mv = _as_int(row[idx["m"]]) if "m" in idx else 1
            xv = [float(row[idx[h]]) for h in regs]
        except ValueError as err:
            raise DataError(f"{path}: row {line}: {err}") from err
        if yv < 0 or mv < 1 or yv > mv:
            raise DataError(f"{path}: row {line}: need 0 <= y <= m and m >= 1 (y={yv}, m={mv})")
        if not all(map(math.isfinite, xv)):
            raise DataError(f"{path}: row {line}: non-finite regressor")
        y.append(yv)
        m.append(mv)
        x.append(xv)
    if not y:
        raise DataError(f"{path}: no data rows")
    xm = np.array(x, dtype=float).reshape(len(y), len(regs))
    names = list(regs)
    if "intercept" not in regs:
        xm = np.column_stack([np.ones(len(y)), xm])
        names.insert(0, "intercept")
    try:
        return ObservationSeries(np.array(y), np.array(m), xm, tuple(names))
    except ModelError as err:
        raise DataError(f"{path}: {err}") from err


def _as_int(cell: str) -> int:
    v = float(cell)
    if not v.is_integer():
        raise ValueError(f"expected an integer count, got {cell!r}")
    return int(v)


def write_csv(path, series: ObservationSeries):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "m", *series.names])
        for t in range(series.n):
            w.writerow([int(series.y[t]), int(series.m[t]), *(repr(float(v)) for v in series.x[t])])


def write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# ---------------------------------------------------------------- output


def _clean(obj):
    """Convert numpy containers and non-finite floats to plain JSON values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(f"{v:.17g}") if math.isfinite(v) else None
    return obj


def envelope(cfg: RunConfig, results, diagnostics=None) -> dict:
    return _clean({
        "config": {k: v for k, v in vars(cfg).items() if k != "extra"} | cfg.extra,
        "results": results,
        "diagnostics": diagnostics or {},
        "seed": cfg.seed,
        "version": __version__,
    })


def format_table(headers, rows) -> str:
    def cell(v):
        if v is None:
            return "-"
        if isinstance(v, (float, np.floating)):
            return f"{float(v):.4g}"
        return str(v)

    body = [[cell(v) for v in r] for r in rows]
    widths = [max(len(str(h)), *(len(r[i]) for r in body)) if body else len(str(h)) for i, h in enumerate(headers)]
    lines = ["  ".join(str(h).rjust(w) for h, w in zip(headers, widths))]
    lines += ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in body]
    return "\n".join(lines)


def _emit(args, doc: dict, table: str):
    text = json.dumps(doc, indent=2, allow_nan=False)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text + "\n")
    if args.text:
        print(table)
    elif not args.output:
        print(text)


# ---------------------------------------------------------------- parsing


def parse_grid(spec: str) -> tuple[float, ...]:
    """``lo:hi:step`` to a tuple of grid values (end point included)."""
    try:
        lo, hi, step = (float(p) for p in spec.split(":"))
    except ValueError as err:
        raise UsageError(f"grid must look like lo:hi:step, got {spec!r}") from err
    if step <= 0 or hi < lo:
        raise UsageError("grid needs step > 0 and lo <= hi")
    if lo <= -1 or hi >= 1:
        raise UsageError("grid bounds must lie in (-1, 1)")
    k = int(math.floor((hi - lo) / step + 1e-9))
    return tuple(float(np.round(lo + i * step, 12)) for i in range(k + 1))


def _floats(spec: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in spec.split(","))
    except ValueError as err:
        raise UsageError(f"expected comma-separated numbers, got {spec!r}") from err


def _ints(spec: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in spec.split(","))
    except ValueError as err:
        raise UsageError(f"expected comma-separated integers, got {spec!r}") from err


def _positive(v: str) -> int:
    k = int(v)
    if k < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return k


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    env_seed = os.environ.get("BINLAT_SEED")
    default_seed = int(env_seed) if env_seed and env_seed.lstrip("-").isdigit() else DEFAULT_SEED

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=default_seed, help="random seed (env BINLAT_SEED)")
    common.add_argument("--workers", type=_positive, default=1)
    common.add_argument("-o", "--output", help="write JSON here instead of stdout")
    common.add_argument("--text", action="store_true", help="print an aligned text table")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("input", help="CSV with columns y, m, regressors...")
    data.add_argument("--binary", action="store_true", help="assume m = 1 when the m column is absent")

    grid = argparse.ArgumentParser(add_help=False)
    grid.add_argument("--grid", default="-0.9:0.9:0.1", help="psi grid lo:hi:step")

    p = _Parser(prog="binlat", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"binlat {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("fit-glm", parents=[common, data], help="logistic GLM ignoring latent effects")
    q = sub.add_parser("fit-marginal", parents=[common, data], help="marginal likelihood fit")
    q.add_argument("--nodes", type=_positive, default=40)

    q = sub.add_parser("test-latent", parents=[common, data, grid], help="standard and supremum tests of tau = 0")
    q.add_argument("--simulated-null", type=int, default=0, metavar="REPS",
                   help="add a parametric-bootstrap p-value from REPS null series")
    q.add_argument("--integration", choices=("continuous", "grid"), default="continuous")

    q = sub.add_parser("test-serial", parents=[common, data], help="serial dependence test of psi = 0")
    q.add_argument("--lags", type=_positive, default=2)
    q.add_argument("--nodes", type=_positive, default=40)

    q = sub.add_parser("simulate", parents=[common], help="simulate one series to CSV")
    q.add_argument("--n", type=_positive, required=True)
    q.add_argument("--m", type=_positive, default=1)
    q.add_argument("--beta", default="1,2")
    q.add_argument("--tau", type=float, default=0.0)
    q.add_argument("--phi", type=float, default=0.0)
    q.add_argument("--scaling", choices=("marginal", "innovation"), default="marginal")
    q.add_argument("--csv", required=True, help="output CSV path")

    q = sub.add_parser("table1", parents=[common, grid], help="null quantiles of the supremum statistic")
    q.add_argument("--reps", type=_positive, default=10_000)
    q.add_argument("--ns", default="200,1000")
    q.add_argument("--ms", default="1,2")
    q.add_argument("--integration", choices=("continuous", "grid"), default="continuous")
    q.add_argument("--csv", help="write the quantile table as CSV")

    q = sub.add_parser("power", parents=[common, grid], help="power curves of the supremum and standard tests")
    q.add_argument("--m", type=_positive, default=1)
    q.add_argument("--n", type=_positive, default=200)
    q.add_argument("--reps", type=_positive, default=10_000)
    q.add_argument("--phi", type=float, default=0.9)
    q.add_argument("--tau0", type=float, default=1.0)
    q.add_argument("--factors", default="0,0.1,0.2,0.3,0.4,0.5,0.6,0.7,0.8,0.9,1")
    q.add_argument("--scaling", choices=("marginal", "innovation"), default="innovation")
    q.add_argument("--csv", help="write the curve as CSV")

    q = sub.add_parser("two-step-table", parents=[common, data, grid],
                       help="simulated null tables for the two-step workflow")
    q.add_argument("--reps", type=_positive, default=10_000)
    q.add_argument("--lags", type=_positive, default=2)
    q.add_argument("--step-two-tau", type=float, default=1.0)
    q.add_argument("--csv", help="write the quantile rows as CSV")
    return p


# ---------------------------------------------------------------- commands


def _config(args, **extra) -> RunConfig:
    return RunConfig(command=args.command, input=getattr(args, "input", None), output=args.output,
                     grid=parse_grid(args.grid) if hasattr(args, "grid") else (),
                     lags=getattr(args, "lags", 2), nodes=getattr(args, "nodes", 40),
                     reps=getattr(args, "reps", 0) or getattr(args, "simulated_null", 0), seed=args.seed,
                     pvalue="simulated" if getattr(args, "simulated_null", 0) else "davies",
                     scaling=getattr(args, "scaling", "marginal"), extra=extra)


def _glm(series):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ConvergenceWarning)
        fit = fit_glm(series)
    return fit, [str(w.message) for w in caught]


def cmd_fit_glm(args) -> int:
    series = read_csv(args.input, args.binary)
    fit, warns = _glm(series)
    se = np.sqrt(np.diag(fit.covariance(series)))
    res = {"beta_hat": dict(zip(series.names, fit.beta_hat)), "se": dict(zip(series.names, se)),
           "loglik": fit.loglik, "converged": fit.converged, "iterations": fit.iterations}
    rows = [(nm, b, s) for nm, b, s in zip(series.names, fit.beta_hat, se)]
    _emit(args, envelope(_config(args), res, {"n": series.n, "warnings": warns}),
          format_table(["term", "estimate", "se"], rows))
    return EXIT_OK


def cmd_fit_marginal(args) -> int:
    series = read_csv(args.input, args.binary)
    glm, warns = _glm(series)
    fit = fit_marginal(series, gauss_hermite(args.nodes), glm=glm)
    cov = marginal_covariance(series, fit)
    se = None if cov is None else np.sqrt(np.diag(cov))
    res = {"beta_hat": dict(zip(series.names, fit.beta_hat)), "tau_hat": fit.tau_hat, "sd_hat": fit.sd_hat,
           "pile_up": fit.pile_up, "loglik": fit.loglik, "converged": fit.converged,
           "se": None if se is None else dict(zip([*series.names, "tau"], se))}
    rows = [(nm, b, None if se is None else s) for nm, b, s in
            zip([*series.names, "tau"], [*fit.beta_hat, fit.tau_hat], se if se is not None else [None] * (series.r + 1))]
    diag = {"n": series.n, "warnings": warns,
            "note": "tau_hat = 0 (pile-up): no standard errors at the boundary" if fit.pile_up else ""}
    _emit(args, envelope(_config(args), res, diag), format_table(["term", "estimate", "se"], rows))
    return EXIT_OK


def cmd_test_latent(args) -> int:
    series = read_csv(args.input, args.binary)
    cfg = _config(args, integration=args.integration)
    glm, warns = _glm(series)
    if not glm.converged:
        raise DataError("GLM fit did not converge (possible separation); tests need a converged fit")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        sup = sup_latent_test(series, glm, cfg.grid, integration=args.integration)
    warns += [str(w.message) for w in caught]
    try:
        std = standard_latent_test(series, glm)
        std_res = {"statistic": std.statistic, "df": std.df, "p_value": std.p_value, "method": std.method}
    except DegenerateStatisticError as err:
        std_res, std = {"status": "degenerate", "message": str(err)}, None
    sup_res = sup.to_dict() | {"df": 1}
    if args.simulated_null:
        sup_res["p_value_simulated"] = simulated_sup_pvalue(series, glm, sup.statistic, args.simulated_null,
                                                            args.seed, cfg.grid, args.workers)
    res = {"supremum": sup_res, "standard": std_res}
    rows = [("supremum", sup.statistic, sup.argmax_psi, sup.p_value_davies, sup_res.get("p_value_simulated")),
            ("standard", None if std is None else std.statistic, 0.0,
             None if std is None else std.p_value, None)]
    _emit(args, envelope(cfg, res, {"n": series.n, "warnings": warns, "beta_glm": glm.beta_hat}),
          format_table(["test", "statistic", "psi", "p_value", "p_simulated"], rows))
    return EXIT_OK


def cmd_test_serial(args) -> int:
    series = read_csv(args.input, args.binary)
    cfg = _config(args)
    glm, warns = _glm(series)
    fit = fit_marginal(series, gauss_hermite(args.nodes), glm=glm)
    diag = {"n": series.n, "warnings": warns, "tau_hat": fit.tau_hat, "pile_up": fit.pile_up,
            "beta_marginal": fit.beta_hat}
    try:
        res = serial_dependence_test(series, fit, args.lags)
    except SerialTestUndefined as err:
        doc = envelope(cfg, {"status": "undefined", "message": str(err)}, diag)
        _emit(args, doc, format_table(["status", "tau_hat"], [("undefined (pile-up)", fit.tau_hat)]))
        print(f"binlat: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    rows = [(a, s, o, s * s / o) for a, s, o in zip(range(1, res.L + 1), res.scores, res.omegas)]
    rows.append(("total", None, None, res.statistic))
    _emit(args, envelope(cfg, res.to_dict(), diag | {"p_value": res.p_value}),
          format_table(["lag", "score", "omega", "contribution"], rows) + f"\np-value (chi2({res.df})): {res.p_value:.4g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    beta = _floats(args.beta)
    spec = DgpSpec(n=args.n, m=args.m, beta=beta, tau=args.tau, phi=args.phi, scaling=args.scaling)
    sim = simulate_series(spec, RandomSource(args.seed))
    series = ObservationSeries(sim.y, sim.m, sim.x, ("intercept", "trend"))
    write_csv(args.csv, series)
    cfg = _config(args, n=args.n, m=args.m, beta=beta, tau=args.tau, phi=args.phi, csv=args.csv)
    res = {"n": series.n, "successes": int(series.y.sum()), "trials": int(series.m.sum())}
    _emit(args, envelope(cfg, res), format_table(["n", "successes", "trials"], [tuple(res.values())]))
    return EXIT_OK


def cmd_table1(args) -> int:
    cfg = NullQuantileConfig(ns=_ints(args.ns), ms=_ints(args.ms), reps=args.reps, seed=args.seed,
                             grid=parse_grid(args.grid), integration=args.integration, workers=args.workers)
    rep = run_null_quantiles(cfg)
    header = ["n", "m", "kind", *(f"q{100 * a:g}" for a in rep.cells[0]["levels"])]
    rows = []
    for c in rep.cells:
        rows.append((c["n"], c["m"], "theoretical", *c["theoretical"]))
        rows.append((c["n"], c["m"], "empirical", *c["empirical"]))
    if args.csv:
        write_rows(args.csv, header, rows)
    doc = envelope(_config(args), rep.cells, {"wall_time": rep.wall_time, "flagged": rep.flagged})
    _emit(args, doc, format_table(header, rows))
    return EXIT_OK


def cmd_power(args) -> int:
    cfg = PowerConfig(m=args.m, n=args.n, reps=args.reps, seed=args.seed, phi=args.phi, tau0=args.tau0,
                      factors=_floats(args.factors), grid=parse_grid(args.grid), scaling=args.scaling,
                      workers=args.workers)
    rep = run_power_curve(cfg)
    header = ["factor", "power_sup", "power_standard", "se_sup", "se_standard"]
    rows = [tuple(c[h] for h in header) for c in rep.cells]
    if args.csv:
        write_rows(args.csv, header, rows)
    diag = {"wall_time": rep.wall_time, "flagged": rep.flagged, "critical_sup": rep.config["critical_sup"],
            "critical_standard": rep.config["critical_standard"]}
    _emit(args, envelope(_config(args, m=args.m, n=args.n, phi=args.phi), rep.cells, diag),
          format_table(header, rows))
    return EXIT_OK


def cmd_two_step_table(args) -> int:
    series = read_csv(args.input, args.binary)
    cfg = TwoStepConfig(reps=args.reps, seed=args.seed, grid=parse_grid(args.grid), lags=args.lags,
                        step_two_tau=args.step_two_tau, workers=args.workers)
    rep = run_two_step_table(series, cfg, name=os.path.basename(args.input))
    c = rep.cells[0]
    header = ["test", *(f"q{100 * a:g}" for a in c["levels"]), "observed"]
    rows = [("latent", *c["latent_quantiles"], c["latent_observed"]),
            ("standard", *c["standard_quantiles"], c["standard_observed"]),
            (f"serial(L={args.lags})", *c["serial_quantiles"], c["serial_observed"])]
    if args.csv:
        write_rows(args.csv, header, rows)
    diag = {"wall_time": rep.wall_time, "flagged": rep.flagged,
            "step_two_pile_up_rate": c["step_two_pile_up_rate"], "serial_status": c["serial_status"]}
    _emit(args, envelope(_config(args), c, diag), format_table(header, rows))
    return EXIT_OK


COMMANDS = {
    "fit-glm": cmd_fit_glm,
    "fit-marginal": cmd_fit_marginal,
    "test-latent": cmd_test_latent,
    "test-serial": cmd_test_serial,
    "simulate": cmd_simulate,
    "table1": cmd_table1,
    "power": cmd_power,
    "two-step-table": cmd_two_step_table,
}


def _join_grid(argv: list[str]) -> list[str]:
    # "--grid -0.9:0.9:0.1" would otherwise be read as an unknown option
    out, it = [], iter(argv)
    for a in it:
        if a == "--grid":
            out.append(f"--grid={next(it, '')}")
        else:
            out.append(a)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(_join_grid(argv))
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as err:
        print(f"binlat: {err}", file=sys.stderr)
        return EXIT_USAGE
    except SingularInformationError as err:
        print(f"binlat: data error: {err} (is a constant column duplicating the intercept?)", file=sys.stderr)
        return EXIT_DATA
    except (DataError, ModelError) as err:
        print(f"binlat: data error: {err}", file=sys.stderr)
        return EXIT_DATA
    except (DegenerateStatisticError, SerialTestUndefined) as err:
        print(f"binlat: {err}", file=sys.stderr)
        return EXIT_DEGENERATE
    except ValueError as err:
        print(f"binlat: {err}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
