"""Forecast evaluation: R^2, MSE, QLIKE, utility-of-wealth, and the
Diebold-Mariano test on loss differentials.

Conventions fixed here and relied on elsewhere:

* R^2 defaults to the ratio-of-sums form 1 - SSE/SST. A pointwise-ratio
  variant (squaring each (a-p)/(a-abar) term before summing) is available
  behind ``form="pointwise_ratio"`` for comparison; it is not the default
  because it is not a scale-free goodness-of-fit statistic.
* QLIKE and UoW floor predictions at ``PRED_FLOOR`` before dividing;
  helpers report how many observations were floored.
* ``dm_test(loss_benchmark, loss_candidate, ...)`` uses the differential
  d_t = benchmark loss - candidate loss, so a positive statistic favors the
  candidate. Variance of the mean differential uses Bartlett-weighted
  autocovariances with bandwidth h - 1 (plain sample variance at h = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MetricReport",
    "r2",
    "mse",
    "qlike",
    "uow",
    "loss_series",
    "dm_test",
    "metric_report",
]

PRED_FLOOR = 1e-8
TARGET_SHARPE = 0.4
RISK_AVERSION = 2.0


@dataclass(frozen=True)
class MetricReport:
    """One evaluation cell: an (asset, model, horizon) triple's metrics."""

    r2: float
    mse: float
    qlike: float
    uow: float | None  # only defined at the 7-day horizon
    n: int
    n_floored: int = 0

    def __post_init__(self) -> None:
        if self.mse < 0 or self.qlike < -1e-15:
            raise ValueError("mse and qlike must be non-negative")


def _aligned(actuals, predictions) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actuals, dtype=float)
    p = np.asarray(predictions, dtype=float)
    if a.shape != p.shape or a.ndim != 1:
        raise ValueError("actuals and predictions must be equal-length 1-d arrays")
    if len(a) == 0:
        raise ValueError("empty series")
    return a, p


def r2(actuals, predictions, form: str = "standard") -> float:
    """Out-of-sample coefficient of determination.

    "standard": 1 - sum((a-p)^2) / sum((a-abar)^2).
    "pointwise_ratio": 1 - sum(((a-p)/(a-abar))^2), kept for comparison.
    """
    a, p = _aligned(actuals, predictions)
    if len(a) < 2:
        raise ValueError("need at least 2 observations")
    abar = a.mean()
    dev = a - abar
    sst = float(dev @ dev)
    if sst == 0.0:
        raise ValueError("zero variance: actuals are constant")
    if form == "standard":
        err = a - p
        return 1.0 - float(err @ err) / sst
    if form == "pointwise_ratio":
        if np.any(dev == 0.0):
            raise ValueError("pointwise form undefined when an actual equals the mean")
        return 1.0 - float(np.sum(((a - p) / dev) ** 2))
    raise ValueError(f"unknown r2 form {form!r}")


def mse(actuals, predictions) -> float:
    a, p = _aligned(actuals, predictions)
    return float(np.mean((a - p) ** 2))


def qlike(actuals, predictions) -> float:
    """Mean of a/p - ln(a/p) - 1 with predictions floored at PRED_FLOOR."""
    a, p = _aligned(actuals, predictions)
    if np.any(a <= 0):
        raise ValueError("qlike requires positive actuals")
    ratio = a / np.maximum(p, PRED_FLOOR)
    return float(np.mean(ratio - np.log(ratio) - 1.0))


def uow(actuals, predictions, sharpe: float = TARGET_SHARPE, gamma: float = RISK_AVERSION) -> float:
    """Volatility-timing utility with target Sharpe ``sharpe`` and risk aversion ``gamma``.

    Mean of (SR^2/gamma) x - (SR^2/(2 gamma)) x^2 with x the realized/forecast
    ratio; maximized at x = 1 where it equals SR^2 / (2 gamma).
    """
    a, p = _aligned(actuals, predictions)
    if np.any(p <= 0):
        raise ValueError("uow requires positive predictions")
    x = a / np.maximum(p, PRED_FLOOR)
    s2 = sharpe * sharpe
    return float(np.mean((s2 / gamma) * x - (s2 / (2.0 * gamma)) * x * x))


def n_floored(predictions) -> int:
    p = np.asarray(predictions, dtype=float)
    return int(np.sum(p < PRED_FLOOR))


def loss_series(actuals, predictions, kind: str = "mse") -> np.ndarray:
    """Per-date losses: squared error, or the negated per-date utility."""
    a, p = _aligned(actuals, predictions)
    if kind == "mse":
        return (a - p) ** 2
    if kind == "utility":
        if np.any(p <= 0):
            raise ValueError("utility loss requires positive predictions")
        x = a / np.maximum(p, PRED_FLOOR)
        s2 = TARGET_SHARPE * TARGET_SHARPE
        return -((s2 / RISK_AVERSION) * x - (s2 / (2.0 * RISK_AVERSION)) * x * x)
    raise ValueError(f"unknown loss kind {kind!r}")


def dm_test(loss_benchmark, loss_candidate, horizon: int = 1) -> tuple[float, float]:
    """Diebold-Mariano statistic and two-sided normal p-value.

    d_t = benchmark loss - candidate loss; positive statistic means the
    candidate (typically the augmented model) is more accurate. The variance
    of the mean uses Bartlett weights at lags 1..horizon-1.
    """
    lb = np.asarray(loss_benchmark, dtype=float)
    lc = np.asarray(loss_candidate, dtype=float)
    if lb.shape != lc.shape or lb.ndim != 1:
        raise ValueError("loss series must be equal-length 1-d arrays")
    n = len(lb)
    if n < 10:
        raise ValueError("need at least 10 loss observations")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    d = lb - lc
    dbar = d.mean()
    dc = d - dbar
    gamma0 = float(dc @ dc) / n
    var_mean = gamma0
    for lag in range(1, horizon):
        w = 1.0 - lag / horizon
        cov = float(dc[lag:] @ dc[:-lag]) / n
        var_mean += 2.0 * w * cov
    var_mean /= n
    if var_mean <= 0.0 or gamma0 == 0.0:
        raise ValueError("degenerate differential: zero variance of d_t")
    stat = dbar / math.sqrt(var_mean)
    pvalue = math.erfc(abs(stat) / math.sqrt(2.0))
    return stat, pvalue


def metric_report(actuals, predictions, horizon: int, r2_form: str = "standard") -> MetricReport:
    """Bundle the accuracy metrics for one forecast series."""
    a, p = _aligned(actuals, predictions)
    return MetricReport(
        r2=r2(a, p, form=r2_form),
        mse=mse(a, p),
        qlike=qlike(a, p),
        uow=uow(a, p) if horizon == 7 else None,
        n=len(a),
        n_floored=n_floored(p),
    )
