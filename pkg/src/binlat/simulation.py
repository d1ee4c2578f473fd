"""Data-generating processes and Monte Carlo experiments.

Every replicate draws from its own ``RandomSource(seed, stream)`` where the
stream id encodes (cell, replicate). Results are therefore identical for any
number of workers.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np

from .glm import ConvergenceWarning, GlmFit, fit_glm
from .latent_test import DEFAULT_GRID, DegenerateStatisticError, ScoreProfile, davies_integral, \
    davies_quantile_from_integral, sup_statistics
from .marginal import fit_marginal
from .model import ObservationSeries, logistic, trend_design
from .numerics import RandomSource, binomial_draws, gauss_hermite
from .serial_test import SerialTestUndefined, serial_dependence_test

LEVELS = (0.10, 0.05, 0.025, 0.01)
TWO_STEP_LEVELS = (0.20, 0.10, 0.05, 0.01)
# stream ids are cell * _CELL_STRIDE + replicate
_CELL_STRIDE = 10_000_000

MARGINAL = "marginal"
INNOVATION = "innovation"


@dataclass(frozen=True)
class DgpSpec:
    """Latent AR(1) logistic DGP.

    ``scaling="marginal"`` makes Var(alpha_t) = tau. ``scaling="innovation"``
    sets alpha_t = sqrt(tau) * a_t with a_t = phi a_{t-1} + N(0, 1), so that
    Var(alpha_t) = tau / (1 - phi^2).
    """

    n: int
    m: int | tuple[int, ...] = 1
    beta: tuple[float, ...] = (1.0, 2.0)
    tau: float = 0.0
    phi: float = 0.0
    scaling: str = MARGINAL
    design: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")
        if abs(self.phi) >= 1:
            raise ValueError("|phi| must be < 1")
        if self.scaling not in (MARGINAL, INNOVATION):
            raise ValueError(f"unknown scaling {self.scaling!r}")

    def design_matrix(self) -> np.ndarray:
        return trend_design(self.n) if self.design is None else np.asarray(self.design, dtype=float)

    def trials(self) -> np.ndarray:
        m = np.asarray(self.m, dtype=np.int64)
        return np.full(self.n, int(m)) if m.ndim == 0 else m


def simulate_latent(n: int, tau: float, phi: float, scaling: str, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) path with the requested variance convention."""
    if tau == 0:
        return np.zeros(n)
    eps = rng.standard_normal(n)
    a = np.empty(n)
    a[0] = eps[0] / np.sqrt(1 - phi**2)
    for t in range(1, n):
        a[t] = phi * a[t - 1] + eps[t]
    if scaling == MARGINAL:
        return np.sqrt(tau * (1 - phi**2)) * a
    return np.sqrt(tau) * a


def simulate_series(spec: DgpSpec, rs: RandomSource) -> ObservationSeries:
    rng = rs.generator()
    x = spec.design_matrix()
    m = spec.trials()
    alpha = simulate_latent(spec.n, spec.tau, spec.phi, spec.scaling, rng)
    pi = logistic(x @ np.asarray(spec.beta, dtype=float) + alpha)
    y = binomial_draws(rng, m, pi)
    return ObservationSeries(y, m, x)


@dataclass
class ExperimentReport:
    name: str
    config: dict
    cells: list[dict]
    reps: int
    wall_time: float
    flagged: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


def map_replicates(worker: Callable, streams: Sequence[RandomSource], workers: int = 1) -> list:
    """Apply ``worker(rs)`` to every stream, in stream order."""
    if workers <= 1 or len(streams) < 2:
        return [worker(rs) for rs in streams]
    chunk = max(1, len(streams) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(worker, streams, chunksize=chunk))


def _streams(seed: int, cell: int, reps: int) -> list[RandomSource]:
    return [RandomSource(seed, cell * _CELL_STRIDE + i) for i in range(reps)]


def _quiet_glm(series: ObservationSeries) -> GlmFit:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        return fit_glm(series)


def latent_statistics(series: ObservationSeries, grid=DEFAULT_GRID):
    """(sup statistic, standard statistic) for one series, or None on failure."""
    glm = _quiet_glm(series)
    if not glm.converged:
        return None
    g, stats, _ = sup_statistics(series, glm.beta_hat, grid)
    if np.all(np.isnan(stats)):
        return None
    zero = np.flatnonzero(g == 0)
    std = float(stats[zero[0]]) if zero.size else np.nan
    return float(np.nanmax(stats)), std


def _latent_worker(rs: RandomSource, spec: DgpSpec, grid) -> tuple | None:
    return latent_statistics(simulate_series(spec, rs), grid)


def _collect(results):
    ok = [r for r in results if r is not None]
    failures = len(results) - len(ok)
    sup = np.array([r[0] for r in ok])
    std = np.array([r[1] for r in ok])
    return sup, std, failures


def upper_quantiles(x: np.ndarray, levels=LEVELS) -> list[float]:
    x = np.asarray(x, dtype=float)
    x = x[~np.isnan(x)]
    if x.size == 0:
        return [float("nan")] * len(levels)
    return [float(np.quantile(x, 1 - a)) for a in levels]


def theoretical_quantiles(n: int, m: int, beta=(1.0, 2.0), grid=DEFAULT_GRID, levels=LEVELS,
                          integration: str = "continuous") -> list[float]:
    """Davies-bound quantiles of the sup statistic at the true beta on the trend design."""
    series = ObservationSeries(np.zeros(n, dtype=int), np.full(n, m), trend_design(n))
    prof = ScoreProfile.build(series, beta, np.max(np.abs(grid)))
    integral = davies_integral(prof, grid, integration)
    return [davies_quantile_from_integral(a, integral) for a in levels]


@dataclass(frozen=True)
class NullQuantileConfig:
    ns: tuple[int, ...] = (200, 1000)
    ms: tuple[int, ...] = (1, 2)
    reps: int = 10_000
    seed: int = 42
    grid: tuple[float, ...] = tuple(DEFAULT_GRID)
    beta: tuple[float, ...] = (1.0, 2.0)
    integration: str = "continuous"
    workers: int = 1


def run_null_quantiles(cfg: NullQuantileConfig) -> ExperimentReport:
    """Empirical vs Davies-bound quantiles of the sup statistic under tau = 0."""
    start = time.perf_counter()
    cells, flagged = [], False
    grid = np.asarray(cfg.grid)
    for ci, (n, m) in enumerate((n, m) for n in cfg.ns for m in cfg.ms):
        spec = DgpSpec(n=n, m=m, beta=cfg.beta)
        res = map_replicates(partial(_latent_worker, spec=spec, grid=grid), _streams(cfg.seed, ci, cfg.reps),
                             cfg.workers)
        sup, std, failures = _collect(res)
        flagged |= failures > 0.01 * cfg.reps
        cells.append({
            "n": n, "m": m, "levels": list(LEVELS),
            "theoretical": theoretical_quantiles(n, m, cfg.beta, grid, LEVELS, cfg.integration),
            "empirical": upper_quantiles(sup),
            "standard_empirical": upper_quantiles(std),
            "failures": failures, "used": int(sup.size),
        })
    return ExperimentReport("table1", asdict(cfg), cells, cfg.reps, time.perf_counter() - start, flagged)


@dataclass(frozen=True)
class PowerConfig:
    m: int = 1
    n: int = 200
    reps: int = 10_000
    seed: int = 42
    phi: float = 0.9
    tau0: float = 1.0
    factors: tuple[float, ...] = tuple(np.round(np.arange(0, 11) / 10, 1))
    grid: tuple[float, ...] = tuple(DEFAULT_GRID)
    scaling: str = INNOVATION
    beta: tuple[float, ...] = (1.0, 2.0)
    workers: int = 1


def _rate(stats: np.ndarray, crit: float) -> float:
    stats = stats[~np.isnan(stats)]
    return float(np.mean(stats > crit)) if stats.size else float("nan")


def run_power_curve(cfg: PowerConfig) -> ExperimentReport:
    """Power of the sup and standard tests at the empirical 95% null quantile.

    Alternatives are sqrt(tau) = factor * sqrt(tau0). The factor-0 cell is the
    null sample that fixes both critical values, so its power is 0.05 by
    construction; without a zero factor a separate null sample is drawn.
    """
    start = time.perf_counter()
    grid = np.asarray(cfg.grid)

    def run_cell(ci, f):
        spec = DgpSpec(n=cfg.n, m=cfg.m, beta=cfg.beta, tau=(f**2) * cfg.tau0, phi=cfg.phi, scaling=cfg.scaling)
        res = map_replicates(partial(_latent_worker, spec=spec, grid=grid), _streams(cfg.seed, ci, cfg.reps),
                             cfg.workers)
        return _collect(res)

    factors = [float(f) for f in cfg.factors]
    results = {}
    if 0.0 in factors:
        results[0.0] = run_cell(1 + factors.index(0.0), 0.0)
        sup0, std0, fail0 = results[0.0]
    else:
        sup0, std0, fail0 = run_cell(0, 0.0)
    crit_sup, crit_std = float(np.nanquantile(sup0, 0.95)), float(np.nanquantile(std0, 0.95))
    cells, flagged = [], fail0 > 0.01 * cfg.reps
    for ci, f in enumerate(factors, start=1):
        sup, std, failures = results[f] if f in results else run_cell(ci, f)
        flagged |= failures > 0.01 * cfg.reps
        p_sup, p_std = _rate(sup, crit_sup), _rate(std, crit_std)
        cells.append({
            "factor": f, "power_sup": p_sup, "power_standard": p_std,
            "se_sup": float(np.sqrt(p_sup * (1 - p_sup) / max(sup.size, 1))),
            "se_standard": float(np.sqrt(p_std * (1 - p_std) / max(np.sum(~np.isnan(std)), 1))),
            "failures": failures,
        })
    config = asdict(cfg) | {"critical_sup": crit_sup, "critical_standard": crit_std, "null_failures": fail0}
    return ExperimentReport("power", config, cells, cfg.reps, time.perf_counter() - start, flagged)


def serial_statistic(series: ObservationSeries, L: int = 2, rule=None):
    """Q_psi(L) for one series, or None when the marginal fit piles up."""
    glm = _quiet_glm(series)
    if not glm.converged:
        return None
    fit = fit_marginal(series, rule or gauss_hermite(), glm=glm)
    try:
        return serial_dependence_test(series, fit, L).statistic
    except SerialTestUndefined:
        return float("nan")


def _serial_worker(rs: RandomSource, spec: DgpSpec, L: int):
    return serial_statistic(simulate_series(spec, rs), L)


def run_serial_null(spec: DgpSpec, reps: int, seed: int, L: int = 2, workers: int = 1, cell: int = 0) -> dict:
    """Null distribution of Q_psi(L); pile-up replicates are counted and excluded."""
    res = map_replicates(partial(_serial_worker, spec=spec, L=L), _streams(seed, cell, reps), workers)
    failures = sum(r is None for r in res)
    vals = np.array([r for r in res if r is not None], dtype=float)
    pile = int(np.sum(np.isnan(vals)))
    return {"statistics": vals[~np.isnan(vals)], "pile_ups": pile, "failures": failures}


def _pileup_worker(rs: RandomSource, spec: DgpSpec):
    series = simulate_series(spec, rs)
    glm = _quiet_glm(series)
    if not glm.converged:
        return None
    fit = fit_marginal(series, glm=glm)
    return fit.pile_up, fit.tau_hat


def run_pileup_frequency(spec: DgpSpec, reps: int, seed: int, workers: int = 1) -> dict:
    res = map_replicates(partial(_pileup_worker, spec=spec), _streams(seed, 0, reps), workers)
    ok = [r for r in res if r is not None]
    pile = np.array([r[0] for r in ok], dtype=bool)
    p = float(pile.mean()) if ok else float("nan")
    return {"pile_up_rate": p, "se": float(np.sqrt(p * (1 - p) / max(len(ok), 1))), "used": len(ok),
            "failures": len(res) - len(ok), "tau_hats": [r[1] for r in ok]}


@dataclass(frozen=True)
class TwoStepConfig:
    reps: int = 10_000
    seed: int = 42
    grid: tuple[float, ...] = tuple(DEFAULT_GRID)
    lags: int = 2
    step_two_tau: float = 1.0
    workers: int = 1


def run_two_step_table(series: ObservationSeries, cfg: TwoStepConfig, name: str = "series") -> ExperimentReport:
    """Simulated null tables for both steps of the latent/serial workflow on one series.

    Step one simulates independent binomials at the GLM fit. Step two adds an
    independent N(0, step_two_tau) latent effect to the GLM linear predictor.
    """
    if cfg.step_two_tau <= 0:
        raise SerialTestUndefined("the serial-test null needs a latent variance tau > 0")
    start = time.perf_counter()
    grid = np.asarray(cfg.grid)
    glm = fit_glm(series)
    obs = latent_statistics(series, grid)
    beta = tuple(glm.beta_hat)
    spec1 = DgpSpec(n=series.n, m=tuple(series.m), beta=beta, design=series.x)
    res1 = map_replicates(partial(_latent_worker, spec=spec1, grid=grid), _streams(cfg.seed, 0, cfg.reps),
                          cfg.workers)
    sup, std, fail1 = _collect(res1)

    fit = fit_marginal(series, glm=glm)
    try:
        obs_serial = serial_dependence_test(series, fit, cfg.lags).statistic
        serial_status = "ok"
    except SerialTestUndefined:
        obs_serial, serial_status = None, "pile-up"
    spec2 = DgpSpec(n=series.n, m=tuple(series.m), beta=beta, tau=cfg.step_two_tau, design=series.x)
    null2 = run_serial_null(spec2, cfg.reps, cfg.seed, cfg.lags, cfg.workers, cell=1)
    q2 = null2["statistics"]

    step1_q = upper_quantiles(sup, TWO_STEP_LEVELS)
    cell = {
        "name": name,
        "levels": list(TWO_STEP_LEVELS),
        "latent_quantiles": step1_q,
        "standard_quantiles": upper_quantiles(std, TWO_STEP_LEVELS),
        "latent_observed": None if obs is None else obs[0],
        "standard_observed": None if obs is None else obs[1],
        "latent_significant_5pct": None if obs is None else bool(obs[0] > step1_q[2]),
        "serial_quantiles": upper_quantiles(q2, TWO_STEP_LEVELS),
        "serial_observed": obs_serial,
        "serial_status": serial_status,
        "serial_significant_5pct": None if obs_serial is None or q2.size == 0
        else bool(obs_serial > upper_quantiles(q2, TWO_STEP_LEVELS)[2]),
        "tau_hat": fit.tau_hat,
        "beta_glm": glm.beta_hat.tolist(),
        "step_one_failures": fail1,
        "step_two_pile_ups": null2["pile_ups"],
        "step_two_pile_up_rate": null2["pile_ups"] / cfg.reps,
        "step_two_failures": null2["failures"],
    }
    flagged = fail1 > 0.01 * cfg.reps or null2["failures"] > 0.01 * cfg.reps
    return ExperimentReport("two-step-table", asdict(cfg), [cell], cfg.reps, time.perf_counter() - start, flagged)


def _sup_only_worker(rs: RandomSource, spec: DgpSpec, grid):
    out = _latent_worker(rs, spec, grid)
    return None if out is None else out[0]


def simulated_sup_pvalue(series: ObservationSeries, glm: GlmFit, observed: float, reps: int, seed: int,
                         grid=DEFAULT_GRID, workers: int = 1) -> float:
    """Parametric-bootstrap p-value of an observed sup statistic under tau = 0 at the GLM fit."""
    spec = DgpSpec(n=series.n, m=tuple(series.m), beta=tuple(glm.beta_hat), design=series.x)
    res = map_replicates(partial(_sup_only_worker, spec=spec, grid=np.asarray(grid)), _streams(seed, 0, reps),
                         workers)
    vals = np.array([r for r in res if r is not None])
    if vals.size == 0:
        raise DegenerateStatisticError("no usable bootstrap replicates")
    return float((1 + np.sum(vals >= observed)) / (1 + vals.size))
