"""Linear forecasting models: AR(5), HAR, and Beta-lag MIDAS, each in
baseline and factor-augmented form, run under an expanding window.

Targets are horizon-aggregated: the record at origin t predicts the mean of
the next h daily RVs (for h = 1 this is simply the next day's RV). Factor
regressors enter contemporaneously (date-t values only); the HAR
augmentation additionally uses 7-day trailing means of the factors.

All fitting is ordinary least squares. MIDAS selects its Beta-polynomial
decay parameter(s) by in-sample MSE over a fixed grid at every forecast
origin, refitting from scratch; no state is carried across origins,
so out-of-sample runs are reproducible and free of look-ahead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date

import numpy as np

from .factors import FactorPath, SelectionPolicy, explained_variance, extract_factors, select_k, weekly_factor
from .ingest import VolPanel, VolSeries, aggregate_rv

__all__ = [
    "RegressionDesign",
    "MidasSpec",
    "FactorConfig",
    "ForecastSeries",
    "ols_fit",
    "build_ar_design",
    "build_har_design",
    "midas_weights",
    "midas_fit_forecast",
    "expanding_window_run",
]

DEFAULT_THETA2_GRID = (1.0, 1.5, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0)
MIN_INSAMPLE_ORIGINS = 50
AR_LAGS = 5
COLLINEARITY_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class RegressionDesign:
    """Aligned (target, regressor-row) pairs plus the origin index of each row."""

    targets: np.ndarray      # (n,)
    regressors: np.ndarray   # (n, w); first column is the intercept
    names: list[str]
    origins: np.ndarray      # (n,) indices into the source daily series

    def __post_init__(self) -> None:
        n, w = self.regressors.shape
        if self.targets.shape != (n,) or self.origins.shape != (n,):
            raise ValueError("design rows must align")
        if len(self.names) != w:
            raise ValueError("one name per regressor column")

    @property
    def width(self) -> int:
        return self.regressors.shape[1]

    def rows_through(self, origin: int) -> "RegressionDesign":
        mask = self.origins <= origin
        return RegressionDesign(
            self.targets[mask], self.regressors[mask], list(self.names), self.origins[mask]
        )


@dataclass(frozen=True)
class MidasSpec:
    """Lag depth and decay grid for the Beta-polynomial lag weights.

    theta1 is pinned at 1; theta2 >= 1 keeps the endpoint weight finite.
    The factor polynomial gets the same lag depth and grid unless overridden.
    """

    k_lags: int = 30
    theta1: float = 1.0
    theta2_grid: tuple[float, ...] = DEFAULT_THETA2_GRID
    factor_k_lags: int | None = None
    factor_theta2_grid: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.k_lags not in (30, 50, 80):
            raise ValueError("k_lags must be one of 30, 50, 80")
        if not self.theta2_grid:
            raise ValueError("theta2 grid must be non-empty")
        if any(b <= a for a, b in zip(self.theta2_grid, self.theta2_grid[1:])):
            raise ValueError("theta2 grid must be ascending")
        if self.theta2_grid[0] < 1.0:
            raise ValueError("theta2 values must be >= 1")
        if self.factor_theta2_grid is not None:
            grid = self.factor_theta2_grid
            if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1.0:
                raise ValueError("factor theta2 grid must be ascending with values >= 1")

    @property
    def effective_factor_k(self) -> int:
        return self.factor_k_lags if self.factor_k_lags is not None else self.k_lags

    @property
    def effective_factor_grid(self) -> tuple[float, ...]:
        return self.factor_theta2_grid if self.factor_theta2_grid is not None else self.theta2_grid


@dataclass(frozen=True)
class FactorConfig:
    """Factor augmentation settings for a model run."""

    enabled: bool = True
    window: int = 60
    policy: SelectionPolicy = field(default_factory=SelectionPolicy)
    k_override: int | None = None
    weekly: bool = True  # HAR only: add trailing-week factor means


@dataclass(frozen=True)
class ForecastSeries:
    """Aligned (origin, actual, predicted) records for one (asset, model, horizon)."""

    origin_dates: list[date]
    horizon: int
    actuals: np.ndarray
    predictions: np.ndarray
    model: str
    asset: str

    def __post_init__(self) -> None:
        if not (len(self.origin_dates) == len(self.actuals) == len(self.predictions)):
            raise ValueError("forecast records must align")
        if any(b <= a for a, b in zip(self.origin_dates, self.origin_dates[1:])):
            raise ValueError("origins must be strictly increasing")


def ols_fit(design: RegressionDesign) -> np.ndarray:
    """Least-squares coefficients; rejects rank-deficient designs by name."""
    X, y = design.regressors, design.targets
    if X.shape[0] < X.shape[1]:
        raise ValueError(f"need at least {X.shape[1]} rows, got {X.shape[0]}")
    cond = np.linalg.cond(X)
    if not np.isfinite(cond) or cond > COLLINEARITY_CONDITION_LIMIT:
        offenders = _collinear_columns(X, design.names)
        raise ValueError(f"collinear design (condition {cond:.3g}); suspect columns: {offenders}")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef


def _collinear_columns(X: np.ndarray, names: list[str]) -> list[str]:
    # entries of the smallest right-singular vector flag the dependent columns
    _, _, vt = np.linalg.svd(X, full_matrices=False)
    weights = np.abs(vt[-1])
    cutoff = 0.1 * weights.max()
    return [name for name, w in zip(names, weights) if w >= cutoff]


def horizon_target(values: np.ndarray, t: int, h: int) -> float:
    """Mean of the next h daily values: RV_{t+1} for h=1, RV^h_{t+h} otherwise."""
    if t + h >= len(values):
        raise ValueError("target not realized within the sample")
    return float(values[t + 1 : t + h + 1].mean())


def horizon_targets(values: np.ndarray, h: int) -> np.ndarray:
    """horizon_target at every origin 0..T-h-1, as one array."""
    windows = np.lib.stride_tricks.sliding_window_view(values[1:], h)
    return windows.mean(axis=1)


def _factor_lookup(rv_dates: list[date], path: FactorPath | None) -> dict[int, int]:
    """Map daily index -> factor row index for dates present in the path."""
    if path is None:
        return {}
    by_date = path.date_index()
    return {i: by_date[d] for i, d in enumerate(rv_dates) if d in by_date}


def build_ar_design(
    rv: VolSeries, factors: FactorPath | None = None, S: int = 0, h: int = 1
) -> RegressionDesign:
    """Rows (1, RV_t..RV_{t-4} [, f_1t..f_St]) with target = mean of the next h RVs."""
    values = rv.values
    if S < 0:
        raise ValueError("S must be >= 0")
    if S > 0:
        if factors is None:
            raise ValueError("factor path required when S > 0")
        if S > factors.k:
            raise ValueError(f"S={S} exceeds available factors k={factors.k}")
    fmap = _factor_lookup(rv.dates, factors) if S > 0 else {}
    rows, targets, origins = [], [], []
    for t in range(AR_LAGS - 1, len(values) - h):
        if S > 0 and t not in fmap:
            continue
        row = [1.0] + [float(values[t - i]) for i in range(AR_LAGS)]
        if S > 0:
            row.extend(float(v) for v in factors.factors[fmap[t], :S])
        rows.append(row)
        targets.append(horizon_target(values, t, h))
        origins.append(t)
    if not rows:
        raise ValueError("not enough history for any AR design row")
    names = ["const"] + [f"rv_lag{i}" for i in range(AR_LAGS)] + [f"factor{j + 1}" for j in range(S)]
    return RegressionDesign(np.array(targets), np.array(rows), names, np.array(origins))


def build_har_design(
    rv: VolSeries,
    rv7: VolSeries,
    rv30: VolSeries,
    daily_factors: FactorPath | None = None,
    weekly_factors: FactorPath | None = None,
    h: int = 1,
    S_d: int | None = None,
    S_w: int | None = None,
) -> RegressionDesign:
    """Rows (1, RV_t, RV7_t, RV30_t [, daily factors, weekly factors])."""
    if len(rv7.dates) > len(rv.dates) or len(rv30.dates) > len(rv.dates):
        raise ValueError("misaligned series lengths: aggregates longer than the daily series")
    if not set(rv7.dates) <= set(rv.dates) or not set(rv30.dates) <= set(rv.dates):
        raise ValueError("misaligned series: aggregate dates must be a subset of daily dates")
    S_d = (daily_factors.k if daily_factors is not None else 0) if S_d is None else S_d
    S_w = (weekly_factors.k if weekly_factors is not None else 0) if S_w is None else S_w
    if S_d > 0 and (daily_factors is None or S_d > daily_factors.k):
        raise ValueError("S_d exceeds available daily factors")
    if S_w > 0 and (weekly_factors is None or S_w > weekly_factors.k):
        raise ValueError("S_w exceeds available weekly factors")

    values = rv.values
    rv7_map = {d: float(v) for d, v in zip(rv7.dates, rv7.values)}
    rv30_map = {d: float(v) for d, v in zip(rv30.dates, rv30.values)}
    dmap = _factor_lookup(rv.dates, daily_factors) if S_d > 0 else {}
    wmap = _factor_lookup(rv.dates, weekly_factors) if S_w > 0 else {}

    rows, targets, origins = [], [], []
    for t in range(len(values) - h):
        d = rv.dates[t]
        if d not in rv7_map or d not in rv30_map:
            continue
        if (S_d > 0 and t not in dmap) or (S_w > 0 and t not in wmap):
            continue
        row = [1.0, float(values[t]), rv7_map[d], rv30_map[d]]
        if S_d > 0:
            row.extend(float(v) for v in daily_factors.factors[dmap[t], :S_d])
        if S_w > 0:
            row.extend(float(v) for v in weekly_factors.factors[wmap[t], :S_w])
        rows.append(row)
        targets.append(horizon_target(values, t, h))
        origins.append(t)
    if not rows:
        raise ValueError("not enough history for any HAR design row")
    names = (
        ["const", "rv_d", "rv_w", "rv_m"]
        + [f"dfactor{j + 1}" for j in range(S_d)]
        + [f"wfactor{j + 1}" for j in range(S_w)]
    )
    return RegressionDesign(np.array(targets), np.array(rows), names, np.array(origins))


def midas_weights(theta1: float, theta2: float, k: int) -> np.ndarray:
    """Normalized Beta-polynomial lag weights at i = 1..k (i = 1 is the newest lag)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if theta1 < 1.0:
        raise ValueError("theta1 must be >= 1")
    if theta2 < 1.0:
        raise ValueError("theta2 must be >= 1 (the endpoint diverges otherwise)")
    if k == 1:
        return np.ones(1)  # single lag takes all weight; the raw endpoint term is 0 for theta2 > 1
    i = np.arange(1, k + 1, dtype=float)
    x = i / k
    coeff = math.gamma(theta1 + theta2) / (math.gamma(theta1) * math.gamma(theta2))
    raw = x ** (theta1 - 1.0) * (1.0 - x) ** (theta2 - 1.0) * coeff
    return raw / raw.sum()


def _weighted_lag_series(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """w . (values[t], values[t-1], ..., values[t-k+1]) for t >= k-1."""
    k = len(weights)
    windows = np.lib.stride_tricks.sliding_window_view(values, k)
    return windows @ weights[::-1]


class _MidasBank:
    """Precomputed weighted regressors for every grid value, shared by the
    one-shot forecast API and the expanding-window runner."""

    def __init__(
        self,
        rv_values: np.ndarray,
        spec: MidasSpec,
        factor_values: np.ndarray | None,  # (T, S) aligned to rv, NaN before burn-in
    ):
        self.spec = spec
        self.k = spec.k_lags
        self.rv_reg = {
            th2: _weighted_lag_series(rv_values, midas_weights(spec.theta1, th2, self.k))
            for th2 in spec.theta2_grid
        }
        self.factor_values = factor_values
        self.S = 0 if factor_values is None else factor_values.shape[1]
        self.kf = spec.effective_factor_k
        if self.S > 0:
            self.factor_reg = {}
            for th2 in spec.effective_factor_grid:
                w = midas_weights(spec.theta1, th2, self.kf)
                cols = [_weighted_lag_series(factor_values[:, j], w) for j in range(self.S)]
                self.factor_reg[th2] = np.column_stack(cols)

    def first_origin(self) -> int:
        t0 = self.k - 1
        if self.S > 0:
            # factor windows must clear both the NaN burn-in and the lag depth
            finite = np.all(np.isfinite(self.factor_values), axis=1)
            idx = np.nonzero(finite)[0]
            if len(idx) == 0:
                raise ValueError("no finite factor history")
            t0 = max(t0, int(idx[0]) + self.kf - 1)
        return t0

    def design_row(self, th2: float, th2f: float | None, t: int) -> np.ndarray:
        row = [1.0, self.rv_reg[th2][t - self.k + 1]]
        if self.S > 0:
            row.extend(self.factor_reg[th2f][t - self.kf + 1])
        return np.array(row)

    def design_block(self, th2: float, th2f: float | None, origins: np.ndarray) -> np.ndarray:
        cols = [np.ones(len(origins)), self.rv_reg[th2][origins - self.k + 1]]
        X = np.column_stack(cols)
        if self.S > 0:
            X = np.hstack([X, self.factor_reg[th2f][origins - self.kf + 1]])
        return X


def _grid_pairs(bank: _MidasBank) -> list[tuple[float, float | None]]:
    if bank.S == 0:
        return [(th2, None) for th2 in bank.spec.theta2_grid]
    return [(th2, th2f) for th2 in bank.spec.theta2_grid for th2f in bank.spec.effective_factor_grid]


def _midas_forecast_at(
    bank: _MidasBank,
    rv_values: np.ndarray,
    h: int,
    t: int,
    min_fit_rows: int,
    targets: np.ndarray | None = None,
) -> float:
    first = bank.first_origin()
    if t < first:
        raise ValueError(f"insufficient history: origin {t} precedes first valid origin {first}")
    fit_origins = np.arange(first, min(t - h, len(rv_values) - h - 1) + 1)
    width = 2 + bank.S
    if len(fit_origins) < max(min_fit_rows, width + 1):
        raise ValueError("insufficient in-sample history for MIDAS fit")
    if targets is None:
        targets = horizon_targets(rv_values, h)
    y = targets[fit_origins]
    best: tuple[float, float, float | None, np.ndarray] | None = None
    for th2, th2f in _grid_pairs(bank):
        X = bank.design_block(th2, th2f, fit_origins)
        coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        mse = float(np.mean((y - X @ coef) ** 2))
        if best is None or mse < best[0] - 1e-15:
            best = (mse, th2, th2f, coef)
    _, th2, th2f, coef = best
    return float(bank.design_row(th2, th2f, t) @ coef)


def midas_fit_forecast(
    rv: VolSeries,
    factors: FactorPath | None,
    spec: MidasSpec,
    h: int,
    t: int,
    S: int | None = None,
    min_fit_rows: int = 0,
) -> float:
    """Grid-searched MIDAS prediction at origin index t, fit on origins <= t - h."""
    factor_values = _aligned_factor_matrix(rv, factors, S) if factors is not None else None
    bank = _MidasBank(rv.values, spec, factor_values)
    return _midas_forecast_at(bank, rv.values, h, t, min_fit_rows)


def _aligned_factor_matrix(rv: VolSeries, path: FactorPath, S: int | None) -> np.ndarray:
    S = path.k if S is None else S
    if S > path.k:
        raise ValueError(f"S={S} exceeds available factors k={path.k}")
    fmap = _factor_lookup(rv.dates, path)
    out = np.full((len(rv.values), S), np.nan)
    for t, row in fmap.items():
        out[t] = path.factors[row, :S]
    return out


def _truncate_path(path: FactorPath, S: int) -> FactorPath:
    if S == path.k:
        return path
    return FactorPath(
        dates=list(path.dates),
        k=S,
        loadings=path.loadings[:, :, :S].copy(),
        factors=path.factors[:, :S].copy(),
        eigenvalues=path.eigenvalues.copy(),
    )


def select_factor_count(path: FactorPath, policy: SelectionPolicy, through_index: int) -> int:
    """Apply the selection policy to explained-variance fractions averaged over
    the path dates up to ``through_index`` (inclusive); no look-ahead."""
    upto = max(1, through_index + 1)
    fractions = np.array([explained_variance(ev) for ev in path.eigenvalues[:upto]])
    return select_k(fractions.mean(axis=0), policy)


def _model_label(model_id: str, spec: MidasSpec | None, augmented: bool) -> str:
    label = model_id if model_id != "midas" else f"midas_k{spec.k_lags}"
    return label + ("_aug" if augmented else "")


def expanding_window_run(
    model_id: str,
    panel: VolPanel,
    asset: str,
    factor_config: FactorConfig | None = None,
    h: int = 1,
    start: int | None = None,
    midas_spec: MidasSpec | None = None,
    min_insample: int = MIN_INSAMPLE_ORIGINS,
    pooled: bool = False,
) -> ForecastSeries:
    """Refit-at-every-origin out-of-sample run for one (asset, model, horizon).

    At each origin t the model is estimated on origins s <= t - h (whose
    targets are fully realized by date t) and predicts the target at t.
    Factors come from rolling windows ending at or before each origin, and
    the factor count is fixed by the selection policy using spectra up to
    the first forecast origin only.
    """
    if model_id not in ("ar", "har", "midas"):
        raise ValueError(f"unknown statistical model {model_id!r}")
    if asset not in panel.assets:
        raise ValueError(f"asset {asset!r} not in panel")
    augmented = factor_config is not None and factor_config.enabled
    rv = panel.series(asset)
    values = rv.values
    T = len(values)

    path = None
    if augmented:
        full_path = extract_factors(panel, factor_config.window, k=panel.p)
        path = full_path  # truncated after k is selected at the start origin

    if model_id == "midas":
        spec = midas_spec or MidasSpec()
        return _run_midas(rv, path, factor_config, spec, h, start, min_insample, augmented, asset, pooled)

    def make_design(s_count: int, factors_path, weekly_path) -> RegressionDesign:
        if model_id == "ar":
            return build_ar_design(rv, factors_path, S=s_count, h=h)
        rv7 = aggregate_rv(rv, 7)
        rv30 = aggregate_rv(rv, 30)
        return build_har_design(
            rv, rv7, rv30,
            daily_factors=factors_path, weekly_factors=weekly_path,
            h=h, S_d=s_count, S_w=s_count if weekly_path is not None else 0,
        )

    # provisional S for locating the first origin; re-selected causally below
    if augmented:
        S0 = factor_config.k_override or 1
        weekly0 = weekly_factor(path) if (model_id == "har" and factor_config.weekly) else None
        design = make_design(S0, _truncate_path(path, S0), weekly0 and _truncate_path(weekly0, S0))
    else:
        design = make_design(0, None, None)

    origins = design.origins
    start_idx = _resolve_start(origins, h, start, min_insample)

    if augmented:
        if factor_config.k_override is not None:
            S = factor_config.k_override
        else:
            first_origin_date = rv.dates[start_idx]
            through = max(i for i, d in enumerate(path.dates) if d <= first_origin_date)
            S = select_factor_count(path, factor_config.policy, through)
        if S != (factor_config.k_override or 1):
            truncated = _truncate_path(path, S)
            weekly = weekly_factor(truncated) if (model_id == "har" and factor_config.weekly) else None
            design = make_design(S, truncated, weekly)
            origins = design.origins
            start_idx = _resolve_start(origins, h, start, min_insample)

    pooled_designs: list[RegressionDesign] = []
    if pooled:
        if model_id not in ("ar", "har"):
            raise ValueError("pooled estimation is only exposed for ar and har")
        if augmented:
            raise ValueError("pooled estimation is exposed for unaugmented designs only")
        for other in panel.assets:
            if other == asset:
                continue
            other_rv = panel.series(other)
            if model_id == "ar":
                pooled_designs.append(build_ar_design(other_rv, None, S=0, h=h))
            else:
                pooled_designs.append(
                    build_har_design(other_rv, aggregate_rv(other_rv, 7), aggregate_rv(other_rv, 30), h=h)
                )

    out_dates, actuals, preds = [], [], []
    row_of = {int(s): i for i, s in enumerate(origins)}
    for t in range(start_idx, T - h):
        if t not in row_of:
            continue
        fit = design.rows_through(t - h)
        if pooled_designs:
            X = np.vstack([fit.regressors] + [d.rows_through(t - h).regressors for d in pooled_designs])
            y = np.concatenate([fit.targets] + [d.rows_through(t - h).targets for d in pooled_designs])
            coef, *_ = np.linalg.lstsq(X, y, rcond=None)
        else:
            coef = ols_fit(fit)
        preds.append(float(design.regressors[row_of[t]] @ coef))
        actuals.append(horizon_target(values, t, h))
        out_dates.append(rv.dates[t])
    label = _model_label(model_id, midas_spec, augmented) + ("_pooled" if pooled else "")
    return ForecastSeries(out_dates, h, np.array(actuals), np.array(preds), label, asset)


def _resolve_start(origins: np.ndarray, h: int, start: int | None, min_insample: int) -> int:
    """First forecast origin leaving at least ``min_insample`` realized fit rows."""
    counts = {int(t): int(np.sum(origins <= t - h)) for t in origins}
    feasible = [t for t in origins if counts[int(t)] >= min_insample]
    if not feasible:
        raise ValueError(
            f"too little history: no origin leaves {min_insample} in-sample origins"
        )
    auto = int(feasible[0])
    if start is None:
        return auto
    if start < auto:
        raise ValueError(
            f"start index {start} leaves fewer than {min_insample} in-sample origins (first feasible: {auto})"
        )
    return start


def _run_midas(
    rv: VolSeries,
    path: FactorPath | None,
    factor_config: FactorConfig | None,
    spec: MidasSpec,
    h: int,
    start: int | None,
    min_insample: int,
    augmented: bool,
    asset: str,
    pooled: bool,
) -> ForecastSeries:
    if pooled:
        raise ValueError("pooled estimation is only exposed for ar and har")
    values = rv.values
    T = len(values)
    factor_values = None
    if augmented:
        # provisional bank to locate the first feasible origin, then causal k selection
        probe = _MidasBank(values, spec, _aligned_factor_matrix(rv, _truncate_path(path, 1), None))
        first = probe.first_origin()
        candidate_origins = np.arange(first, T - h)
        start_idx = _resolve_start(candidate_origins, h, start, min_insample)
        if factor_config.k_override is not None:
            S = factor_config.k_override
        else:
            first_origin_date = rv.dates[start_idx]
            through = max(i for i, d in enumerate(path.dates) if d <= first_origin_date)
            S = select_factor_count(path, factor_config.policy, through)
        factor_values = _aligned_factor_matrix(rv, _truncate_path(path, S), None)
    bank = _MidasBank(values, spec, factor_values)
    first = bank.first_origin()
    candidate_origins = np.arange(first, T - h)
    start_idx = _resolve_start(candidate_origins, h, start, min_insample)

    out_dates, actuals, preds = [], [], []
    targets = horizon_targets(values, h)
    for t in range(start_idx, T - h):
        preds.append(_midas_forecast_at(bank, values, h, t, min_fit_rows=0, targets=targets))
        actuals.append(horizon_target(values, t, h))
        out_dates.append(rv.dates[t])
    label = _model_label("midas", spec, augmented)
    return ForecastSeries(out_dates, h, np.array(actuals), np.array(preds), label, asset)
