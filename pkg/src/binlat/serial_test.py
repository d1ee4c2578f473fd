"""Score test of H0: psi = 0 given a latent process with tau > 0.

Built from the conditional residuals U_t of the marginal fit. The lag-a
score is the same whether the lag-a parameter is autoregressive or moving
average, so only the lag is exposed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .marginal import MarginalFit
from .model import ObservationSeries
from .numerics import chi2_tail

MAX_LAGS = 20


class SerialTestUndefined(ArithmeticError):
    """The marginal fit piled up at tau = 0, so the serial test cannot be formed."""

    def __init__(self, message: str, fit: MarginalFit | None = None):
        super().__init__(message)
        self.fit = fit


@dataclass(frozen=True)
class SerialTestResult:
    L: int
    scores: np.ndarray
    omegas: np.ndarray
    statistic: float
    p_value: float
    df: int
    method: str = "serial"

    def to_dict(self) -> dict:
        return {
            "statistic": self.statistic,
            "df": self.df,
            "p_value": self.p_value,
            "method": self.method,
            "lags": self.L,
            "scores": self.scores.tolist(),
            "omegas": self.omegas.tolist(),
        }


def _require_latent(fit: MarginalFit):
    if fit.pile_up or fit.tau_hat <= 0:
        raise SerialTestUndefined(
            "marginal fit has tau_hat = 0 (pile-up); the serial dependence test cannot be constructed",
            fit,
        )


def _check_lag(a: int, n: int):
    if not 1 <= a <= n - 1:
        raise ValueError(f"lag {a} outside 1..{n - 1}")


def score_psi(series: ObservationSeries, fit: MarginalFit, a: int) -> float:
    """``tau_hat * sum_{t=a+1}^n U_t U_{t-a}``."""
    _require_latent(fit)
    _check_lag(a, series.n)
    return fit.tau_hat * float(fit.U[a:] @ fit.U[:-a])


def omega_aa(series: ObservationSeries, fit: MarginalFit, a: int) -> float:
    """Null variance ``tau_hat^2 * sum_{t=a+1}^n E(U_t^2) E(U_{t-a}^2)`` of the lag-a score."""
    _require_latent(fit)
    _check_lag(a, series.n)
    return fit.tau_hat**2 * float(fit.EU2[a:] @ fit.EU2[:-a])


def serial_dependence_test(series: ObservationSeries, fit: MarginalFit, L: int = 2) -> SerialTestResult:
    _require_latent(fit)
    if not 1 <= L <= min(MAX_LAGS, series.n // 4):
        raise ValueError(f"L={L} must be in 1..{min(MAX_LAGS, series.n // 4)}")
    scores = np.array([score_psi(series, fit, a) for a in range(1, L + 1)])
    omegas = np.array([omega_aa(series, fit, a) for a in range(1, L + 1)])
    stat = float(np.sum(scores**2 / omegas))
    return SerialTestResult(L=L, scores=scores, omegas=omegas, statistic=stat,
                            p_value=chi2_tail(stat, L), df=L)
