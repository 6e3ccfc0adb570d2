"""Seeded synthetic-data generators used as ground-truth oracles.

Three generators cover the verification needs of the rest of the package:

* :func:`gen_factor_panel` -- volatility panels with a known low-rank factor
  structure and optionally drifting loadings.
* :func:`gen_forecastable_rv` -- panels whose one-step conditional mean is
  known in closed form and depends on a cross-sectional common factor, so
  factor-augmented forecasters have a provable edge (or provably none when
  the factor strength is zero).
* :func:`gen_cointegrated_pair` -- log-price pairs sharing a random walk with
  a stationary AR(1) spread.

All draws come from the counter-based stream in :mod:`volfactors.rng`, so a
spec with a fixed seed reproduces byte-identical output on every run.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, timedelta

import numpy as np

from .ingest import VolPanel
from .rng import Rng

__all__ = ["SynthSpec", "gen_factor_panel", "gen_forecastable_rv", "gen_cointegrated_pair"]

_EPOCH = date(2018, 1, 1)


def synthetic_dates(T: int, start: date = _EPOCH) -> list[date]:
    """T consecutive calendar dates (crypto-style continuous calendar)."""
    return [start + timedelta(days=i) for i in range(T)]


@dataclass(frozen=True)
class SynthSpec:
    """Parameters for the synthetic generators.

    Each generator reads the subset of fields it needs; unrelated fields are
    ignored. ``seed`` is mandatory and fully determines the output.
    """

    seed: int
    T: int = 500
    p: int = 5
    k_true: int = 1
    factor_persistence: float = 0.9   # AR(1) coefficient of each latent factor
    loading_smoothness: float = 0.0   # sd of the per-step loading drift
    noise_scale: float = 0.0          # sd of idiosyncratic noise
    base_level: float = 1.0           # stationary mean of latent factors / RV levels
    factor_vol: float = 0.3           # stationary sd of each latent factor
    ar_coef: float = 0.35             # own-lag coefficient of forecastable RV
    factor_strength: float = 0.45     # loading of the cross-sectional mean in forecastable RV
    spread_reversion: float = 0.5     # mean-reversion speed of the pair spread (0 = none)
    spread_vol: float = 0.02          # innovation sd of the spread
    rw_vol: float = 0.03              # innovation sd of the shared random walk
    hedge_beta: float = 1.0           # true hedge ratio of the pair
    positivity_floor: float = 1e-6

    def __post_init__(self) -> None:
        if not 0.0 <= self.factor_persistence < 1.0:
            raise ValueError("factor_persistence must be in [0, 1)")
        for name in ("loading_smoothness", "noise_scale", "factor_vol", "spread_vol",
                     "rw_vol", "positivity_floor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.T < 2 or self.p < 1 or not 1 <= self.k_true <= self.p:
            raise ValueError("need T >= 2 and 1 <= k_true <= p")


def _positivity_map(raw: np.ndarray, floor: float) -> np.ndarray:
    # abs-then-floor keeps the low-rank structure intact wherever the panel
    # clears the floor, which an additive constant would not
    return np.maximum(np.abs(raw), floor)


def gen_factor_panel(spec: SynthSpec) -> tuple[VolPanel, np.ndarray, np.ndarray]:
    """Factor-structured volatility panel plus its generating truths.

    The panel is ``max(|Lambda_t f_t + eps_t|, floor)`` where the latent
    factors follow independent AR(1) processes around ``base_level`` and the
    loadings drift by ``loading_smoothness`` per step. Returns
    ``(panel, factors (T, k), loadings (T, p, k))`` with the pre-map truths.
    """
    rng = Rng(spec.seed)
    T, p, k = spec.T, spec.p, spec.k_true
    phi = spec.factor_persistence
    innov_sd = spec.factor_vol * np.sqrt(1.0 - phi * phi)

    loadings = np.empty((T, p, k))
    loadings[0] = rng.uniform_range(0.5, 1.5, (p, k))
    drift = rng.normal((T - 1, p, k))
    for t in range(1, T):
        loadings[t] = loadings[t - 1] + spec.loading_smoothness * drift[t - 1]

    factors = np.empty((T, k))
    factors[0] = spec.base_level
    shocks = rng.normal((T - 1, k))
    for t in range(1, T):
        factors[t] = spec.base_level + phi * (factors[t - 1] - spec.base_level) + innov_sd * shocks[t - 1]

    raw = np.einsum("tpk,tk->tp", loadings, factors)
    if spec.noise_scale > 0:
        raw = raw + spec.noise_scale * rng.normal((T, p))
    values = _positivity_map(raw, spec.positivity_floor)

    assets = [f"A{i + 1}" for i in range(p)]
    panel = VolPanel(dates=synthetic_dates(T), assets=assets, values=values)
    return panel, factors, loadings


def forecastable_truth(spec: SynthSpec) -> dict:
    """Closed-form moments of the :func:`gen_forecastable_rv` process."""
    b, c, p = spec.ar_coef, spec.factor_strength, spec.p
    sigma = spec.noise_scale
    intercept = spec.base_level * (1.0 - b - c)
    var_mean = (sigma**2 / p) / (1.0 - (b + c) ** 2)
    var_dev = sigma**2 * (1.0 - 1.0 / p) / (1.0 - b**2)
    var_y = var_mean + var_dev
    r2_one_step = 1.0 - sigma**2 / var_y if var_y > 0 else 1.0
    return {
        "ar_coef": b,
        "factor_strength": c,
        "intercept": intercept,
        "noise_sd": sigma,
        "var_y": var_y,
        "true_one_step_r2": r2_one_step,
    }


def gen_forecastable_rv(spec: SynthSpec) -> tuple[VolPanel, dict]:
    """Panel whose one-step conditional mean is known in closed form.

    Dynamics: ``y[i, t+1] = a + b * y[i, t] + c * mean_j(y[j, t]) + sigma * e``
    with ``a`` chosen so the stationary mean is ``base_level``. The
    cross-sectional mean is the single common factor; with ``c = 0`` the
    assets are independent AR(1) series and factors carry no signal. Values
    are floored at ``positivity_floor`` (binding only in deep left tails).

    Returns ``(panel, truth)`` where ``truth`` holds the generating
    coefficients and the closed-form one-step R^2 (see
    :func:`forecastable_truth`).
    """
    if spec.ar_coef + spec.factor_strength >= 1.0:
        raise ValueError("ar_coef + factor_strength must be < 1 for stationarity")
    rng = Rng(spec.seed)
    T, p = spec.T, spec.p
    b, c, sigma = spec.ar_coef, spec.factor_strength, spec.noise_scale
    a = spec.base_level * (1.0 - b - c)

    values = np.empty((T, p))
    values[0] = spec.base_level
    shocks = rng.normal((T - 1, p))
    for t in range(1, T):
        common = values[t - 1].mean()
        raw = a + b * values[t - 1] + c * common + sigma * shocks[t - 1]
        values[t] = np.maximum(raw, spec.positivity_floor)

    assets = [f"A{i + 1}" for i in range(p)]
    panel = VolPanel(dates=synthetic_dates(T), assets=assets, values=values)
    return panel, forecastable_truth(spec)


def gen_cointegrated_pair(spec: SynthSpec) -> tuple[np.ndarray, np.ndarray, dict]:
    """Log-price pair ``log_pa = beta * log_pb + spread`` with AR(1) spread.

    ``log_pb`` is a driftless random walk started at log(100). The spread
    mean-reverts at rate ``spread_reversion``; at rate 0 the spread is itself
    a random walk and the pair is not cointegrated. Returns
    ``(log_pa, log_pb, truth)``.
    """
    rng = Rng(spec.seed)
    T = spec.T
    walk_shocks = rng.normal(T - 1)
    spread_shocks = rng.normal(T - 1)

    log_pb = np.empty(T)
    log_pb[0] = np.log(100.0)
    np.cumsum(spec.rw_vol * walk_shocks, out=log_pb[1:])
    log_pb[1:] += log_pb[0]

    spread = np.empty(T)
    spread[0] = 0.0
    keep = 1.0 - spec.spread_reversion
    for t in range(1, T):
        spread[t] = keep * spread[t - 1] + spec.spread_vol * spread_shocks[t - 1]

    log_pa = spec.hedge_beta * log_pb + spread
    truth = {
        "beta": spec.hedge_beta,
        "spread_reversion": spec.spread_reversion,
        "spread_vol": spec.spread_vol,
        "rw_vol": spec.rw_vol,
    }
    return log_pa, log_pb, truth
