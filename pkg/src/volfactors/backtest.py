"""Volatility-targeted pairs-trading backtest on a cointegrated pair.

Spread construction: a rolling OLS of log price A on log price B (with
intercept) gives per-date hedge ratios; the spread is the regression
residual at each date, i.e. the fitted intercept is subtracted. Subtracting
the intercept makes the spread (and everything downstream: z-scores,
signals, returns) exactly invariant to rescaling both price series, which
a bare ``log_pa - beta * log_pb`` would not be when the hedge ratio moves.

Signals: enter long when the z-score drops below -entry, short above
+entry; exit on touch-or-cross of zero, never earlier than the day after
entry; no re-entry on an exit day.

Sizing: notional = equity * min(vol_target / sigma_spread, max_leverage),
with the spread volatility from the paired asset-vol forecasts and their
return covariance. Positions are resized daily while in a trade; each leg
pays a proportional cost on the absolute change of its notional.

Accounting identity, enforced to float precision and asserted in tests:

    equity[t] = equity[t-1] + sum_leg w_leg[t-1] * r_leg[t] - cost[t]

where r_leg is the close-to-close simple return ``exp(dlog) - 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date

import numpy as np

__all__ = [
    "BacktestConfig",
    "Fill",
    "BacktestResult",
    "rolling_hedge_ratio",
    "rolling_spread",
    "rolling_return_cov",
    "zscore",
    "generate_signals",
    "spread_vol_forecast",
    "position_size",
    "simulate",
]


@dataclass(frozen=True)
class BacktestConfig:
    entry_z: float = 1.5
    exit_z: float = 0.0
    window: int = 70                 # z-score window; 30 is the LSTM-aligned choice
    hedge_window: int | None = None  # defaults to window
    vol_target: float = 0.25
    max_leverage: float = 5.0
    initial_equity: float = 50_000.0
    cost_per_leg: float = 5e-4
    sizing_annualizer: float = math.sqrt(252.0)  # kept at sqrt(252) inside the sizing formula
    metrics_annualization: float = 365.0         # calendar-day annualization for performance metrics

    def __post_init__(self) -> None:
        if not self.entry_z > self.exit_z >= 0:
            raise ValueError("need entry_z > exit_z >= 0")
        if self.max_leverage <= 0 or self.cost_per_leg < 0:
            raise ValueError("need max_leverage > 0 and cost_per_leg >= 0")
        if self.window < 2 or self.initial_equity <= 0:
            raise ValueError("need window >= 2 and positive initial equity")

    @property
    def effective_hedge_window(self) -> int:
        return self.hedge_window if self.hedge_window is not None else self.window


@dataclass(frozen=True)
class Fill:
    date: date
    leg: str               # "a" or "b"
    notional_change: float  # signed change of the leg notional, in currency units
    price: float
    cost: float


@dataclass
class BacktestResult:
    dates: list[date]
    equity: np.ndarray
    fills: list[Fill]
    metrics: dict
    z: np.ndarray
    beta: np.ndarray
    side: np.ndarray
    gross: np.ndarray
    sizing_equity: np.ndarray


def rolling_spread(log_pa: np.ndarray, log_pb: np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-date (spread, alpha, beta) from a trailing OLS of log A on log B.

    Entries before the first full window are NaN. A constant log B inside
    any window makes the regression degenerate and raises.
    """
    n = len(log_pa)
    if len(log_pb) != n:
        raise ValueError("price series must align")
    if window > n:
        raise ValueError("window longer than the series")
    if window < 2:
        raise ValueError("window must be >= 2")
    alpha = np.full(n, np.nan)
    beta = np.full(n, np.nan)
    wa = np.lib.stride_tricks.sliding_window_view(log_pa, window)
    wb = np.lib.stride_tricks.sliding_window_view(log_pb, window)
    mean_a = wa.mean(axis=1)
    mean_b = wb.mean(axis=1)
    var_b = ((wb - mean_b[:, None]) ** 2).sum(axis=1)
    if np.any(var_b == 0.0):
        bad = int(np.nonzero(var_b == 0.0)[0][0]) + window - 1
        raise ValueError(f"degenerate regression: constant log price B in window ending at index {bad}")
    cov_ab = ((wa - mean_a[:, None]) * (wb - mean_b[:, None])).sum(axis=1)
    slope = cov_ab / var_b
    beta[window - 1 :] = slope
    alpha[window - 1 :] = mean_a - slope * mean_b
    spread = log_pa - alpha - beta * log_pb
    return spread, alpha, beta


def rolling_hedge_ratio(log_pa: np.ndarray, log_pb: np.ndarray, window: int) -> np.ndarray:
    """Trailing OLS slope of log A on log B; NaN before the window fills."""
    _, _, beta = rolling_spread(np.asarray(log_pa, float), np.asarray(log_pb, float), window)
    return beta


def rolling_return_cov(log_pa: np.ndarray, log_pb: np.ndarray, window: int) -> np.ndarray:
    """Trailing sample covariance (ddof=1) of daily log returns over ``window`` returns."""
    ra = np.diff(log_pa)
    rb = np.diff(log_pb)
    n = len(log_pa)
    out = np.full(n, np.nan)
    if window < 2 or len(ra) < window:
        return out
    wa = np.lib.stride_tricks.sliding_window_view(ra, window)
    wb = np.lib.stride_tricks.sliding_window_view(rb, window)
    da = wa - wa.mean(axis=1, keepdims=True)
    db = wb - wb.mean(axis=1, keepdims=True)
    cov = (da * db).sum(axis=1) / (window - 1)
    out[window:] = cov
    return out


def zscore(spread: np.ndarray, window: int) -> np.ndarray:
    """Trailing-window z-score (window includes the current date, std uses ddof=1).

    Undefined entries (head of the series, NaNs in the window, zero window
    std) come back as NaN and are treated as "no signal" downstream.
    """
    s = np.asarray(spread, dtype=float)
    n = len(s)
    if window < 2:
        raise ValueError("window must be >= 2")
    if n < window:
        raise ValueError(f"need at least {window} observations")
    out = np.full(n, np.nan)
    win = np.lib.stride_tricks.sliding_window_view(s, window)
    mean = win.mean(axis=1)
    var = ((win - mean[:, None]) ** 2).sum(axis=1) / (window - 1)
    std = np.sqrt(var)
    with np.errstate(invalid="ignore", divide="ignore"):
        z = (s[window - 1 :] - mean) / std
    z[~np.isfinite(z)] = np.nan
    out[window - 1 :] = z
    return out


def generate_signals(z: np.ndarray, entry_z: float = 1.5, exit_z: float = 0.0) -> np.ndarray:
    """Position state per date: +1 long spread, -1 short, 0 flat.

    Entries trigger on z beyond +-entry_z; exits on touch-or-cross of the
    exit band, evaluated only from the day after entry (minimum one-day
    hold); the exit day itself admits no re-entry. NaN z is no signal.
    """
    states = np.zeros(len(z), dtype=int)
    state = 0
    entry_day = -1
    for t, zt in enumerate(np.asarray(z, dtype=float)):
        defined = not math.isnan(zt)
        if state != 0 and defined and t > entry_day:
            if (state == 1 and zt >= -exit_z) or (state == -1 and zt <= exit_z):
                state = 0
                states[t] = 0
                continue  # no re-entry on the exit day
        if state == 0 and defined:
            if zt < -entry_z:
                state, entry_day = 1, t
            elif zt > entry_z:
                state, entry_day = -1, t
        states[t] = state
    return states


def spread_vol_forecast(
    vol_a: float, vol_b: float, beta: float, cov_ab: float, annualizer: float = math.sqrt(252.0)
) -> float:
    """Annualized spread volatility from per-asset vol forecasts and their covariance.

    The radicand is floored at zero: a perfectly hedged combination can land
    a hair below zero in floating point.
    """
    if vol_a < 0 or vol_b < 0:
        raise ValueError("vol forecasts must be non-negative")
    radicand = vol_a * vol_a + beta * beta * vol_b * vol_b - 2.0 * beta * cov_ab
    return annualizer * math.sqrt(max(radicand, 0.0))


def position_size(vol_target: float, sigma_spread: float, equity: float, max_leverage: float) -> float:
    """Gross notional: equity times min(target/sigma, max leverage)."""
    if equity <= 0:
        raise ValueError("bankrupt: non-positive equity")
    if sigma_spread < 0:
        raise ValueError("sigma_spread must be >= 0")
    if sigma_spread == 0.0:
        return equity * max_leverage
    return equity * min(vol_target / sigma_spread, max_leverage)


def simulate(
    dates: list[date],
    prices_a: np.ndarray,
    prices_b: np.ndarray,
    vol_a: np.ndarray,
    vol_b: np.ndarray,
    cov_ab: np.ndarray | None,
    config: BacktestConfig,
) -> BacktestResult:
    """Daily pairs-trading loop; see the module docstring for the accounting.

    ``vol_a``/``vol_b`` are per-date daily volatility forecasts usable at
    each date's close (e.g. one-step-ahead model predictions made at that
    origin). ``cov_ab=None`` falls back to the trailing sample covariance of
    log returns over the z-score window.
    """
    pa = np.asarray(prices_a, dtype=float)
    pb = np.asarray(prices_b, dtype=float)
    T = len(pa)
    if not (len(pb) == len(dates) == T and len(vol_a) == len(vol_b) == T):
        raise ValueError("all inputs must be date-aligned")
    if np.any(pa <= 0) or np.any(pb <= 0):
        raise ValueError("prices must be positive")
    la, lb = np.log(pa), np.log(pb)
    if cov_ab is None:
        cov_ab = rolling_return_cov(la, lb, config.window)
    spread, _, beta = rolling_spread(la, lb, config.effective_hedge_window)
    first_spread = config.effective_hedge_window - 1
    z = np.full(T, np.nan)
    tail = spread[first_spread:]
    if len(tail) >= config.window:
        z[first_spread:] = zscore(tail, config.window)
    side = generate_signals(z, config.entry_z, config.exit_z)

    ret_a = np.empty(T)
    ret_b = np.empty(T)
    ret_a[0] = ret_b[0] = 0.0
    ret_a[1:] = np.exp(np.diff(la)) - 1.0
    ret_b[1:] = np.exp(np.diff(lb)) - 1.0

    equity = np.full(T, np.nan)
    gross = np.zeros(T)
    sizing_equity = np.full(T, np.nan)
    fills: list[Fill] = []
    w_a = w_b = 0.0
    e = config.initial_equity
    bankrupt = False
    last_t = T - 1
    for t in range(T):
        if t > 0:
            e = e + w_a * ret_a[t] + w_b * ret_b[t]
        if e <= 0.0:
            equity[t] = e
            bankrupt = True
            last_t = t
            break
        sizing_equity[t] = e
        if side[t] != 0:
            if not (np.isfinite(vol_a[t]) and np.isfinite(vol_b[t]) and np.isfinite(cov_ab[t])):
                raise ValueError(f"missing vol forecast or covariance at {dates[t]}")
            sigma = spread_vol_forecast(vol_a[t], vol_b[t], beta[t], cov_ab[t], config.sizing_annualizer)
            notional = position_size(config.vol_target, sigma, e, config.max_leverage)
            split = 1.0 + abs(beta[t])
            new_a = side[t] * notional / split
            new_b = -side[t] * beta[t] * notional / split
        else:
            new_a = new_b = 0.0
        cost_a = config.cost_per_leg * abs(new_a - w_a)
        cost_b = config.cost_per_leg * abs(new_b - w_b)
        if new_a != w_a:
            fills.append(Fill(dates[t], "a", new_a - w_a, float(pa[t]), cost_a))
        if new_b != w_b:
            fills.append(Fill(dates[t], "b", new_b - w_b, float(pb[t]), cost_b))
        e = e - cost_a - cost_b
        if e <= 0.0:
            equity[t] = e
            bankrupt = True
            last_t = t
            break
        w_a, w_b = new_a, new_b
        gross[t] = abs(w_a) + abs(w_b)
        equity[t] = e

    curve = equity[: last_t + 1]
    out_dates = list(dates[: last_t + 1])
    metrics = _performance_metrics(curve, config, bankrupt)
    return BacktestResult(
        dates=out_dates,
        equity=curve,
        fills=fills,
        metrics=metrics,
        z=z[: last_t + 1],
        beta=beta[: last_t + 1],
        side=side[: last_t + 1],
        gross=gross[: last_t + 1],
        sizing_equity=sizing_equity[: last_t + 1],
    )


def _performance_metrics(curve: np.ndarray, config: BacktestConfig, bankrupt: bool) -> dict:
    final = float(curve[-1])
    days = max(len(curve) - 1, 1)
    A = config.metrics_annualization
    if final > 0:
        ann_return = (final / config.initial_equity) ** (A / days) - 1.0
    else:
        ann_return = -1.0
    rets = np.diff(curve) / curve[:-1] if len(curve) > 1 else np.array([])
    std = float(rets.std(ddof=1)) if len(rets) > 1 else 0.0
    sharpe = float(rets.mean()) / std * math.sqrt(A) if std > 0 else 0.0
    return {
        "portfolio_value": final,
        "ann_return": float(ann_return),
        "ann_sharpe": sharpe,
        "n_days": int(days),
        "bankrupt": bankrupt,
    }
