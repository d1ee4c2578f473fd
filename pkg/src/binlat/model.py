"""Domain types and logistic-link primitives for binomial parameter-driven series.

The observation model is

    W_t = x_t' beta + tau^(1/2) * a_t,    Y_t | W_t ~ Binomial(m_t, logistic(W_t)),

where ``a_t`` is a zero-mean, unit-variance stationary Gaussian process with
correlation function ``R(h; psi)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

# Beyond this |w| the logistic is saturated to double precision.
_SATURATION = 35.0


class ModelError(ValueError):
    """Invalid model input (bad data, dimensions, or parameters)."""


class KernelError(ModelError):
    """Invalid latent correlation kernel parameters."""


@dataclass(frozen=True)
class ObservationSeries:
    """Counts ``y``, trials ``m`` and regressors ``x`` for t = 1..n.

    ``x`` is an ``(n, r)`` design matrix. By convention the first column is the
    intercept.
    """

    y: np.ndarray
    m: np.ndarray
    x: np.ndarray
    names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        y = np.asarray(self.y)
        m = np.asarray(self.m)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim != 1 or m.ndim != 1 or x.ndim != 2:
            raise ModelError("y and m must be 1-d and x must be 2-d")
        n = y.shape[0]
        if m.shape[0] != n or x.shape[0] != n:
            raise ModelError(f"length mismatch: y={n}, m={m.shape[0]}, x={x.shape[0]}")
        if n == 0:
            raise ModelError("empty series")
        if not (np.all(y == np.round(y)) and np.all(m == np.round(m))):
            raise ModelError("y and m must be integers")
        y = y.astype(np.int64)
        m = m.astype(np.int64)
        if np.any(m < 1):
            raise ModelError("trials m_t must be >= 1")
        if np.any(y < 0) or np.any(y > m):
            bad = int(np.flatnonzero((y < 0) | (y > m))[0])
            raise ModelError(f"need 0 <= y_t <= m_t; violated at t={bad + 1}")
        if x.shape[1] < 1:
            raise ModelError("need at least one regressor")
        if n < x.shape[1]:
            raise ModelError(f"n={n} is smaller than the number of regressors r={x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise ModelError("regressors must be finite")
        for v in (y, m, x):
            v.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "x", x)
        names = tuple(self.names) or tuple(f"x{j}" for j in range(x.shape[1]))
        if len(names) != x.shape[1]:
            raise ModelError("names must match the number of regressor columns")
        object.__setattr__(self, "names", names)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def r(self) -> int:
        return self.x.shape[1]

    @property
    def max_trials(self) -> int:
        return int(self.m.max())

    def linear_predictor(self, beta) -> np.ndarray:
        beta = np.asarray(beta, dtype=float)
        if beta.shape != (self.r,):
            raise ModelError(f"beta has shape {beta.shape}, expected ({self.r},)")
        return self.x @ beta


@dataclass(frozen=True)
class ModelParams:
    beta: np.ndarray
    tau: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "beta", np.asarray(self.beta, dtype=float))
        if not self.tau >= 0:
            raise ModelError(f"tau must be >= 0, got {self.tau}")
        if abs(self.psi) >= 1:
            raise KernelError(f"AR(1) coefficient must satisfy |psi| < 1, got {self.psi}")


@dataclass(frozen=True)
class LatentKernel:
    """Correlation function ``R(h; psi)`` of the standardized latent process.

    ``family="ar1"`` gives ``R(h) = psi**h``. A user-supplied kernel passes
    ``family="custom"`` and a callable ``func(h, psi) -> R`` that must return 1
    at lag 0.
    """

    psi: float = 0.0
    family: str = "ar1"
    func: Callable[[np.ndarray, float], np.ndarray] | None = None

    def __post_init__(self):
        if self.family == "ar1":
            if not np.isfinite(self.psi) or abs(self.psi) >= 1:
                raise KernelError(f"AR(1) kernel needs |psi| < 1, got {self.psi}")
        elif self.family == "custom":
            if self.func is None:
                raise KernelError("custom kernel needs func")
        else:
            raise KernelError(f"unknown kernel family {self.family!r}")

    def __call__(self, h):
        return kernel_eval(self, h)


def kernel_eval(kernel: LatentKernel, h):
    """R(h; psi) for integer lag(s) ``h >= 0``."""
    h_arr = np.asarray(h)
    if np.any(h_arr < 0):
        raise KernelError("lag must be nonnegative")
    if kernel.family == "ar1":
        out = np.where(h_arr == 0, 1.0, float(kernel.psi) ** np.maximum(h_arr, 0).astype(float))
    else:
        out = np.asarray(kernel.func(h_arr, kernel.psi), dtype=float)
        out = np.where(h_arr == 0, 1.0, out)
    return float(out) if np.ndim(out) == 0 else out


def logistic(w):
    """Numerically stable ``1 / (1 + exp(-w))``."""
    w = np.asarray(w, dtype=float)
    out = np.empty_like(w)
    pos = w >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-w[pos]))
    ew = np.exp(w[~pos])
    out[~pos] = ew / (1.0 + ew)
    return out if out.ndim else float(out)


def log1pexp(w):
    """Stable ``log(1 + exp(w))``, the binomial cumulant function b(w)."""
    w = np.asarray(w, dtype=float)
    out = np.where(w > _SATURATION, w, np.log1p(np.exp(np.minimum(w, _SATURATION))))
    return out if out.ndim else float(out)


def link_derivatives(w):
    """Return ``(b, b1, b2, b3)`` for ``b(w) = log(1 + e^w)``.

    ``b1`` is the success probability, ``b2 = b1 (1 - b1)`` the unit variance
    and ``b3 = b2 (1 - 2 b1)``. Works elementwise on arrays.
    """
    w_arr = np.asarray(w, dtype=float)
    if not np.all(np.isfinite(w_arr)):
        raise ModelError("link_derivatives needs finite w")
    b = log1pexp(w_arr)
    p = logistic(w_arr)
    # q = 1 - p computed without cancellation for large w
    q = logistic(-w_arr)
    b2 = p * q
    b3 = b2 * (q - p)
    return b, p, b2, b3


@dataclass(frozen=True)
class ConditionalMoments:
    pi: np.ndarray
    mu: np.ndarray
    sigma2: np.ndarray
    resid: np.ndarray


def conditional_moments(series: ObservationSeries, beta) -> ConditionalMoments:
    """Per-t success probability, mean, variance and raw residual at ``tau = 0``."""
    eta = series.linear_predictor(beta)
    _, p, b2, _ = link_derivatives(eta)
    mu = series.m * p
    return ConditionalMoments(pi=p, mu=mu, sigma2=series.m * b2, resid=series.y - mu)


def trend_design(n: int) -> np.ndarray:
    """Design with an intercept and a linear time trend ``t/n``."""
    t = np.arange(1, n + 1, dtype=float)
    return np.column_stack([np.ones(n), t / n])
