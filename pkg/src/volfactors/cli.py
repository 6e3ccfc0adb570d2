"""Command-line entry point wiring the modules into reproducible pipelines.

Runs are driven by a JSON configuration file; flags override config fields.
Every output CSV carries a provenance comment (config hash, seed, package
version), outputs are first written to a temporary directory and promoted
atomically, and all randomness flows from the single config seed, so a
rerun with unchanged inputs rewrites byte-identical artifacts.

Exit codes: 0 success, 1 computation error, 2 usage/config error. The
``VOLFACTORS_LOG`` environment variable sets the log level.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, fields
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__, reports
from .backtest import BacktestConfig, simulate
from .coint import engle_granger, johansen_trace
from .factors import SelectionPolicy, extract_factors
from .ingest import (
    SessionSpec,
    VolPanel,
    aggregate_rv,
    daily_rv_from_quotes,
    load_quotes_csv,
    load_rv_panel,
    load_wide_csv,
    write_rv_panel,
)
from .models import FactorConfig, ForecastSeries, MidasSpec, expanding_window_run
from .nnet import lstm_forecast_series, save_trained
from .synth import SynthSpec, gen_cointegrated_pair, gen_factor_panel, gen_forecastable_rv, synthetic_dates

log = logging.getLogger("volfactors")


class ConfigError(Exception):
    """Invalid configuration; reported with exit code 2."""


@dataclass
class RunConfig:
    seed: int = 42
    market: str = "crypto"
    horizon: int = 1
    models: list[str] = field(default_factory=lambda: ["ar", "har", "midas"])
    augmented: bool = True
    assets: list[str] | None = None       # None -> first panel asset only
    factor_window: int = 60
    factor_policy: str = "auto"           # auto | dominant | variance_threshold
    variance_threshold: float | None = None
    midas_k: int = 30
    zscore_window: int = 70
    hedge_window: int | None = None
    panel_csv: str | None = None
    prices_csv: str | None = None
    output_dir: str = "out"
    session: dict = field(default_factory=dict)  # open/close "HH:MM" (or omitted: continuous), interval_seconds
    synth: dict = field(default_factory=dict)
    lstm: dict = field(default_factory=dict)
    backtest: dict = field(default_factory=dict)

    VALID_MODELS = ("ar", "har", "midas", "lstm")

    def validate(self) -> None:
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError(f"seed: expected an integer, got {self.seed!r}")
        if self.market not in ("crypto", "equity"):
            raise ConfigError(f"market: expected 'crypto' or 'equity', got {self.market!r}")
        if self.horizon not in (1, 7):
            raise ConfigError(f"horizon: expected 1 or 7, got {self.horizon!r}")
        if not isinstance(self.models, list):
            raise ConfigError(f"models: expected a list, got {type(self.models).__name__}")
        if self.assets is not None and (
            not isinstance(self.assets, list) or not all(isinstance(a, str) for a in self.assets)
        ):
            raise ConfigError("assets: expected a list of asset names")
        for name in ("session", "synth", "lstm", "backtest"):
            if not isinstance(getattr(self, name), dict):
                raise ConfigError(f"{name}: expected an object of overrides")
        bad = [m for m in self.models if m not in self.VALID_MODELS]
        if bad:
            raise ConfigError(f"models: unknown entries {bad}; valid: {list(self.VALID_MODELS)}")
        if self.midas_k not in (30, 50, 80):
            raise ConfigError(f"midas_k: expected 30, 50, or 80, got {self.midas_k!r}")
        if self.midas_k != 30 and self.horizon == 1:
            raise ConfigError("midas_k: the 50/80 lag extension applies to the 7-day horizon only")
        if self.variance_threshold is not None and not 0.0 < self.variance_threshold <= 1.0:
            raise ConfigError(f"variance_threshold: must be in (0, 1], got {self.variance_threshold!r}")
        if self.factor_policy not in ("auto", "dominant", "variance_threshold"):
            raise ConfigError(f"factor_policy: unknown value {self.factor_policy!r}")
        if self.factor_window < 2 or self.zscore_window < 2:
            raise ConfigError("factor_window and zscore_window must be >= 2")
        for name in ("panel_csv", "prices_csv"):
            value = getattr(self, name)
            if value is not None and not Path(value).exists():
                raise ConfigError(f"{name}: file not found: {value}")

    def resolved_policy(self) -> SelectionPolicy:
        policy = self.factor_policy
        if policy == "auto":
            policy = "dominant" if self.horizon == 1 else "variance_threshold"
        threshold = self.variance_threshold
        if threshold is None:
            threshold = 0.90 if self.market == "crypto" else 0.85
        return SelectionPolicy(mode=policy, threshold=threshold)

    def config_hash(self) -> str:
        payload = asdict(self)
        payload.pop("output_dir", None)  # artifact placement does not affect results
        blob = json.dumps(payload, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Config from JSON plus flag overrides; unknown keys are field-level errors."""
    data: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{p}: invalid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError(f"{p}: top-level JSON must be an object")
    known = {f.name for f in fields(RunConfig)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"unknown config fields: {unknown}; valid fields: {sorted(known)}")
    merged = dict(data)
    for key, value in (overrides or {}).items():
        if value is not None:
            merged[key] = value
    config = RunConfig(**merged)
    for f in fields(RunConfig):
        if f.name not in merged:
            log.info("config: %s defaulted to %r", f.name, getattr(config, f.name))
    config.validate()
    return config


@contextmanager
def atomic_outputs(out_dir: str | Path):
    """Collect artifacts in a temp directory; promote into out_dir on success."""
    out_dir = Path(out_dir)
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out_dir.name}.partial.", dir=out_dir.parent))
    try:
        yield tmp
        out_dir.mkdir(parents=True, exist_ok=True)
        for p in sorted(tmp.rglob("*")):
            if p.is_file():
                dest = out_dir / p.relative_to(tmp)
                dest.parent.mkdir(parents=True, exist_ok=True)
                os.replace(p, dest)
    finally:
        shutil.rmtree(tmp, ignore_errors=True)


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2, default=str)
        fh.write("\n")


# ---------------------------------------------------------------- subcommands


def cmd_synth(args) -> int:
    config = load_config(args.config, {"seed": args.seed, "output_dir": args.out})
    spec_kwargs = dict(config.synth)
    spec_kwargs.pop("pair_T", None)  # pipeline-only knob
    if args.kind == "forecastable":
        spec_kwargs.setdefault("noise_scale", 0.15)  # noiseless would be a degenerate fixed point
    if args.T is not None:
        spec_kwargs["T"] = args.T
    if args.p is not None:
        spec_kwargs["p"] = args.p
    spec = SynthSpec(seed=config.seed, **spec_kwargs)
    prov = reports.provenance_line(config.config_hash(), config.seed)
    with atomic_outputs(config.output_dir) as tmp:
        if args.kind == "factor_panel":
            panel, factors, loadings = gen_factor_panel(spec)
            write_rv_panel(tmp / "rv_panel.csv", panel, prov)
            _write_json(tmp / "truth.json", {
                "kind": "factor_panel",
                "spec": asdict(spec),
                "true_factors": factors.tolist(),
                "true_loadings": loadings.tolist(),
            })
        elif args.kind == "forecastable":
            panel, truth = gen_forecastable_rv(spec)
            write_rv_panel(tmp / "rv_panel.csv", panel, prov)
            _write_json(tmp / "truth.json", {"kind": "forecastable", "spec": asdict(spec), "truth": truth})
        elif args.kind == "pair":
            log_pa, log_pb, truth = gen_cointegrated_pair(spec)
            dates = synthetic_dates(spec.T)
            _write_wide(tmp / "log_prices.csv", dates, ["A", "B"], np.column_stack([log_pa, log_pb]), prov)
            _write_wide(tmp / "prices.csv", dates, ["A", "B"],
                        np.column_stack([np.exp(log_pa), np.exp(log_pb)]), prov)
            _write_json(tmp / "truth.json", {"kind": "pair", "spec": asdict(spec), "truth": truth})
        else:
            raise ConfigError(f"unknown synth kind {args.kind!r}")
    print(f"synth artifacts written to {config.output_dir}")
    return 0


def _write_wide(path: Path, dates: list[date], names: list[str], values: np.ndarray, prov: str) -> None:
    import csv as _csv

    with open(path, "w", newline="") as fh:
        fh.write(f"# {prov}\n")
        writer = _csv.writer(fh)
        writer.writerow(["date"] + names)
        for d, row in zip(dates, values):
            writer.writerow([d.isoformat()] + [repr(float(v)) for v in row])


def _resolve_session(config: RunConfig, interval: int | None) -> SessionSpec:
    spec = dict(config.session)
    if interval is not None:
        spec["interval_seconds"] = interval
    if spec.get("open") or spec.get("close"):
        return SessionSpec(spec.get("open"), spec.get("close"), spec.get("interval_seconds", 300))
    if "interval_seconds" in spec or config.market == "crypto":
        interval_s = spec.get("interval_seconds", 300)
        if config.market == "crypto":
            return SessionSpec.crypto(interval_s)
        return SessionSpec.equity(interval_s)
    return SessionSpec.equity()


def cmd_rv(args) -> int:
    config = load_config(args.config, {"seed": args.seed, "output_dir": args.out, "market": args.market})
    quotes = load_quotes_csv(args.quotes)
    session = _resolve_session(config, args.interval)
    series, report = daily_rv_from_quotes(quotes, session, args.asset)
    prov = reports.provenance_line(config.config_hash(), config.seed)
    with atomic_outputs(config.output_dir) as tmp:
        _write_wide(tmp / "rv_daily.csv", series.dates, [series.asset], series.values[:, None], prov)
        if args.aggregate:
            agg = aggregate_rv(series, args.aggregate)
            _write_wide(tmp / f"rv_agg{args.aggregate}.csv", agg.dates, [agg.asset], agg.values[:, None], prov)
        _write_json(tmp / "filter_report.json", {
            "n_input": report.n_input,
            "n_nonpositive": report.n_nonpositive,
            "n_crossed": report.n_crossed,
            "n_spurious": report.n_spurious,
            "n_kept": report.n_kept,
            "spurious_rule": report.spurious_rule,
            "note": "the spurious-quote rule is a documented stand-in; see README",
        })
    print(f"rv artifacts written to {config.output_dir}")
    return 0


def cmd_factors(args) -> int:
    config = load_config(args.config, {
        "seed": args.seed, "output_dir": args.out, "panel_csv": args.panel,
        "factor_window": args.window,
    })
    panel, dropped = load_rv_panel(config.panel_csv)
    k = args.k if args.k is not None else panel.p
    path = extract_factors(panel, config.factor_window, k=k)
    prov = reports.provenance_line(config.config_hash(), config.seed)
    with atomic_outputs(config.output_dir) as tmp:
        reports.write_factor_outputs(tmp, path, panel.assets, prov)
        if dropped:
            _write_json(tmp / "dropped_dates.json", {"dropped": [d.isoformat() for d in dropped]})
    print(f"factor artifacts written to {config.output_dir}")
    return 0


def _forecast_one(
    config: RunConfig,
    panel: VolPanel,
    model: str,
    asset: str,
    augment: bool,
    params_dir: Path | None = None,
) -> list[ForecastSeries]:
    policy = config.resolved_policy()
    fc = FactorConfig(enabled=True, window=config.factor_window, policy=policy) if augment else None
    if model == "lstm":
        lstm_kwargs = dict(config.lstm)
        lstm_kwargs.pop("seed", None)  # the run seed governs
        series, trained = lstm_forecast_series(panel, asset, fc, h=config.horizon, seed=config.seed, **lstm_kwargs)
        if params_dir is not None:
            save_trained(params_dir / f"lstm_params_{asset}{'_aug' if augment else ''}.bin", trained)
        return [series]
    midas = MidasSpec(k_lags=config.midas_k) if model == "midas" else None
    return [expanding_window_run(model, panel, asset, fc, h=config.horizon, midas_spec=midas)]


def _lstm_predict_from_file(config: RunConfig, panel: VolPanel, asset: str, params_path: str) -> ForecastSeries:
    """Score the 80:20 test block with previously trained parameters."""
    from .models import _aligned_factor_matrix, _truncate_path
    from .nnet import build_sequences, load_trained, split_80_20

    trained = load_trained(params_path)
    S = trained.config.input_width - 1
    rv = panel.series(asset)
    factor_matrix = None
    if S > 0:
        path = extract_factors(panel, config.factor_window, k=panel.p)
        if S > path.k:
            raise ConfigError(f"{params_path}: expects {S} factors, panel supports {path.k}")
        factor_matrix = _aligned_factor_matrix(rv, _truncate_path(path, S), None)
    X, y, origins = build_sequences(rv.values, factor_matrix, trained.config.window, config.horizon)
    _, test = split_80_20(len(y))
    preds = trained.predict(X[test])
    return ForecastSeries(
        origin_dates=[rv.dates[int(t)] for t in origins[test]],
        horizon=config.horizon,
        actuals=y[test],
        predictions=np.asarray(preds),
        model="lstm_aug" if S > 0 else "lstm",
        asset=asset,
    )


def cmd_forecast(args) -> int:
    config = load_config(args.config, {
        "seed": args.seed, "output_dir": args.out, "panel_csv": args.panel,
        "horizon": args.horizon, "midas_k": args.midas_k,
        "models": [args.model] if args.model else None,
        "assets": args.asset or None,
    })
    panel, _ = load_rv_panel(config.panel_csv)
    assets = config.assets or [panel.assets[0]]
    missing = [a for a in assets if a not in panel.assets]
    if missing:
        raise ConfigError(f"assets not in panel: {missing}")
    prov = reports.provenance_line(config.config_hash(), config.seed)
    with atomic_outputs(config.output_dir) as tmp:
        series: list[ForecastSeries] = []
        if args.lstm_params:
            if config.models != ["lstm"]:
                raise ConfigError("--lstm-params applies to --model lstm only")
            for asset in assets:
                series.append(_lstm_predict_from_file(config, panel, asset, args.lstm_params))
        else:
            for model in config.models:
                for asset in assets:
                    if args.pooled:
                        series.append(expanding_window_run(
                            model, panel, asset, None, h=config.horizon,
                            midas_spec=MidasSpec(k_lags=config.midas_k) if model == "midas" else None,
                            pooled=True,
                        ))
                        continue
                    series.extend(_forecast_one(config, panel, model, asset, augment=False, params_dir=tmp))
                    if args.augment or (config.augmented and args.augment is None):
                        series.extend(_forecast_one(config, panel, model, asset, augment=True, params_dir=tmp))
        reports.write_forecasts(tmp / "forecasts.csv", series, prov)
    print(f"forecast artifacts written to {config.output_dir}")
    return 0


def cmd_evaluate(args) -> int:
    config = load_config(args.config, {"seed": args.seed, "output_dir": args.out})
    series: list[ForecastSeries] = []
    for f in args.forecasts:
        series.extend(reports.load_forecasts(f))
    rows = reports.build_metric_table(series, r2_form=args.r2_form)
    prov = reports.provenance_line(config.config_hash(), config.seed)
    with atomic_outputs(config.output_dir) as tmp:
        reports.write_metric_table(tmp / "metrics.csv", rows, prov)
    print(f"evaluation artifacts written to {config.output_dir}")
    return 0


def cmd_coint(args) -> int:
    config = load_config(args.config, {"seed": args.seed, "output_dir": args.out})
    dates, names, values, _ = load_wide_csv(args.log_prices, value_kind="log price")
    out: dict = {}
    johansen = johansen_trace(values, lag_order=args.lag, det=args.det)
    out["johansen"] = johansen
    if args.pair:
        a, b = args.pair
        for name in (a, b):
            if name not in names:
                raise ConfigError(f"pair asset {name!r} not in columns {names}")
        out[f"engle_granger_{a}_{b}"] = engle_granger(values[:, names.index(a)], values[:, names.index(b)])
    else:
        for i in range(len(names)):
            for j in range(i + 1, len(names)):
                out[f"engle_granger_{names[i]}_{names[j]}"] = engle_granger(values[:, i], values[:, j])
    prov = reports.provenance_line(config.config_hash(), config.seed)
    with atomic_outputs(config.output_dir) as tmp:
        reports.write_coint_outputs(tmp, out, names, prov)
    print(f"cointegration artifacts written to {config.output_dir}")
    return 0


def _load_single_forecast(path: str, model: str | None) -> ForecastSeries:
    series = reports.load_forecasts(path)
    if model is not None:
        series = [s for s in series if s.model == model]
    if len(series) != 1:
        names = sorted({s.model for s in series})
        raise ConfigError(f"{path}: expected one forecast series, found {names}; use --model to select")
    return series[0]


def _vol_forecast_array(dates: list[date], series: ForecastSeries) -> np.ndarray:
    out = np.full(len(dates), np.nan)
    index = {d: i for i, d in enumerate(dates)}
    for d, pred in zip(series.origin_dates, series.predictions):
        if d in index:
            out[index[d]] = pred
    return out


def _run_backtest(config: RunConfig, dates, prices, names, fa: ForecastSeries, fb: ForecastSeries):
    bt_kwargs = dict(config.backtest)
    bt_kwargs.setdefault("window", config.zscore_window)
    if config.hedge_window is not None:
        bt_kwargs.setdefault("hedge_window", config.hedge_window)
    bt_config = BacktestConfig(**bt_kwargs)
    vol_a = _vol_forecast_array(dates, fa)
    vol_b = _vol_forecast_array(dates, fb)
    have = np.nonzero(np.isfinite(vol_a) & np.isfinite(vol_b))[0]
    if len(have) == 0:
        raise ConfigError("no dates with vol forecasts for both legs")
    lo, hi = int(have[0]), int(have[-1]) + 1
    result = simulate(
        list(dates[lo:hi]),
        prices[lo:hi, 0],
        prices[lo:hi, 1],
        vol_a[lo:hi],
        vol_b[lo:hi],
        None,
        bt_config,
    )
    return result, bt_config


def cmd_backtest(args) -> int:
    config = load_config(args.config, {"seed": args.seed, "output_dir": args.out, "prices_csv": args.prices})
    dates, names, prices, _ = load_wide_csv(config.prices_csv, value_kind="price", require_nonnegative=True)
    if prices.shape[1] != 2:
        raise ConfigError(f"{config.prices_csv}: backtest needs exactly two price columns, got {names}")
    fa = _load_single_forecast(args.vol_forecast_a, args.model)
    fb = _load_single_forecast(args.vol_forecast_b, args.model)
    result, _ = _run_backtest(config, dates, prices, names, fa, fb)
    prov = reports.provenance_line(config.config_hash(), config.seed)
    with atomic_outputs(config.output_dir) as tmp:
        reports.write_backtest_outputs(tmp, result, prov)
    print(f"backtest artifacts written to {config.output_dir}")
    return 0


def _rv_proxy_panel(dates: list[date], log_prices: np.ndarray, names: list[str], window: int = 7) -> VolPanel:
    """Daily vol proxy: root mean squared log return over a trailing window."""
    returns = np.diff(log_prices, axis=0)
    sq = returns**2
    win = np.lib.stride_tricks.sliding_window_view(sq, window, axis=0)
    proxy = np.sqrt(win.mean(axis=2))
    return VolPanel(dates=list(dates[window:]), assets=list(names), values=proxy)


def cmd_pipeline(args) -> int:
    config = load_config(args.config, {"seed": args.seed, "output_dir": args.out})
    prov = reports.provenance_line(config.config_hash(), config.seed)
    summary: dict = {"config_hash": config.config_hash(), "seed": config.seed, "version": __version__}

    with atomic_outputs(config.output_dir) as tmp:
        # 1. volatility panel: load or synthesize a forecastable one
        if config.panel_csv:
            panel, _ = load_rv_panel(config.panel_csv)
            summary["panel"] = str(config.panel_csv)
        else:
            synth_kwargs = {"T": 600, "p": 5, "noise_scale": 0.15, **config.synth}
            synth_kwargs.pop("pair_T", None)
            spec = SynthSpec(seed=config.seed, **synth_kwargs)
            panel, truth = gen_forecastable_rv(spec)
            write_rv_panel(tmp / "rv_panel.csv", panel, prov)
            _write_json(tmp / "synth_truth.json", {"spec": asdict(spec), "truth": truth})
            summary["panel"] = "rv_panel.csv (synthetic)"

        # 2. factor artifacts over the full panel
        path = extract_factors(panel, config.factor_window, k=panel.p)
        reports.write_factor_outputs(tmp, path, panel.assets, prov)

        # 3. forecasts for the configured models
        assets = config.assets or [panel.assets[0]]
        series: list[ForecastSeries] = []
        for model in config.models:
            for asset in assets:
                series.extend(_forecast_one(config, panel, model, asset, augment=False))
                if config.augmented:
                    series.extend(_forecast_one(config, panel, model, asset, augment=True))
        reports.write_forecasts(tmp / "forecasts.csv", series, prov)

        # 4. metric table
        rows = reports.build_metric_table(series)
        reports.write_metric_table(tmp / "metrics.csv", rows, prov)
        summary["n_forecast_series"] = len(series)

        # 5. cointegrated pair (synthetic unless prices supplied)
        if config.prices_csv:
            pair_dates, pair_names, pair_prices, _ = load_wide_csv(
                config.prices_csv, value_kind="price", require_nonnegative=True
            )
            if pair_prices.shape[1] != 2:
                raise ConfigError("pipeline: prices_csv must hold exactly two columns")
            pair_logs = np.log(pair_prices)
        else:
            pair_T = int(config.synth.get("pair_T", 800))
            pair_spec = SynthSpec(seed=config.seed + 1, T=pair_T)
            log_pa, log_pb, pair_truth = gen_cointegrated_pair(pair_spec)
            pair_dates = synthetic_dates(pair_T)
            pair_names = ["A", "B"]
            pair_logs = np.column_stack([log_pa, log_pb])
            pair_prices = np.exp(pair_logs)
            _write_wide(tmp / "pair_prices.csv", pair_dates, pair_names, pair_prices, prov)
            _write_json(tmp / "pair_truth.json", {"spec": asdict(pair_spec), "truth": pair_truth})

        # 6. cointegration screen on the pair
        coint_reports = {
            "johansen": johansen_trace(pair_logs, lag_order=1, det="restricted_constant"),
            f"engle_granger_{pair_names[0]}_{pair_names[1]}": engle_granger(pair_logs[:, 0], pair_logs[:, 1]),
        }
        reports.write_coint_outputs(tmp, coint_reports, pair_names, prov)
        summary["johansen_rank"] = coint_reports["johansen"].details["selected_rank"]

        # 7. per-leg vol forecasts from the primary statistical model on an RV proxy
        proxy = _rv_proxy_panel(pair_dates, pair_logs, pair_names)
        sizing_model = next((m for m in config.models if m != "lstm"), "ar")
        fc = FactorConfig(enabled=True, window=config.factor_window, policy=config.resolved_policy()) \
            if config.augmented else None
        midas = MidasSpec(k_lags=config.midas_k) if sizing_model == "midas" else None
        leg_forecasts = [
            expanding_window_run(sizing_model, proxy, name, fc, h=1, midas_spec=midas)
            for name in pair_names
        ]
        reports.write_forecasts(tmp / "pair_vol_forecasts.csv", leg_forecasts, prov)

        # 8. backtest on the pair
        result, bt_config = _run_backtest(
            config, pair_dates, pair_prices, pair_names, leg_forecasts[0], leg_forecasts[1]
        )
        reports.write_backtest_outputs(tmp, result, prov)
        summary["backtest"] = {k: result.metrics[k] for k in ("portfolio_value", "ann_return", "ann_sharpe")}
        summary["n_fills"] = len(result.fills)

        _write_json(tmp / "pipeline_summary.json", summary)

    print(f"pipeline artifacts written to {config.output_dir}")
    return 0


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="volfactors", description=__doc__)
    parser.add_argument("--version", action="version", version=f"volfactors {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory", default=None)

    p = sub.add_parser("synth", help="emit synthetic data plus a truth sidecar")
    common(p)
    p.add_argument("--kind", choices=["factor_panel", "forecastable", "pair"], required=True)
    p.add_argument("--T", type=int)
    p.add_argument("--p", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("rv", help="realized volatility from a quote CSV")
    common(p)
    p.add_argument("--quotes", required=True, help="CSV with columns timestamp_ms,bid,ask")
    p.add_argument("--asset", required=True)
    p.add_argument("--market", choices=["crypto", "equity"])
    p.add_argument("--interval", type=int, default=None, help="grid interval in seconds (default 300)")
    p.add_argument("--aggregate", type=int, help="also emit an h-day trailing aggregate")
    p.set_defaults(func=cmd_rv)

    p = sub.add_parser("factors", help="rolling-window factor extraction to CSV")
    common(p)
    p.add_argument("--panel", required=True, help="RV panel CSV (date,ASSET1,...)")
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--k", type=int, help="factor count to emit (default: all)")
    p.set_defaults(func=cmd_factors)

    p = sub.add_parser("forecast", help="out-of-sample forecasts for one model")
    common(p)
    p.add_argument("--panel", required=True)
    p.add_argument("--model", choices=["ar", "har", "midas", "lstm"], required=True)
    p.add_argument("--horizon", type=int, choices=[1, 7], default=None)
    p.add_argument("--augment", action=argparse.BooleanOptionalAction, default=None,
                   help="also run the factor-augmented variant")
    p.add_argument("--midas-k", dest="midas_k", type=int, choices=[30, 50, 80], default=None)
    p.add_argument("--asset", action="append", help="panel asset (repeatable; default first)")
    p.add_argument("--lstm-params", dest="lstm_params",
                   help="score with a saved LSTM parameter file instead of training")
    p.add_argument("--pooled", action="store_true",
                   help="share coefficients across all panel assets (ar/har, unaugmented)")
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("evaluate", help="metric table from forecast CSVs")
    common(p)
    p.add_argument("--forecasts", nargs="+", required=True)
    p.add_argument("--r2-form", dest="r2_form", choices=["standard", "pointwise_ratio"],
                   default="standard", help="alternative R2 definition, kept for comparison")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("coint", help="ADF/Engle-Granger/Johansen screen over a log-price CSV")
    common(p)
    p.add_argument("--log-prices", dest="log_prices", required=True)
    p.add_argument("--pair", nargs=2, metavar=("A", "B"), help="limit Engle-Granger to one pair")
    p.add_argument("--lag", type=int, default=1, help="lagged differences in the Johansen VECM")
    p.add_argument("--det", choices=["none", "constant", "restricted_constant"],
                   default="restricted_constant")
    p.set_defaults(func=cmd_coint)

    p = sub.add_parser("backtest", help="pairs backtest from prices and vol forecasts")
    common(p)
    p.add_argument("--prices", required=True, help="CSV date,ASSET_A,ASSET_B with price levels")
    p.add_argument("--vol-forecast-a", dest="vol_forecast_a", required=True)
    p.add_argument("--vol-forecast-b", dest="vol_forecast_b", required=True)
    p.add_argument("--model", help="select a model when a forecast CSV holds several")
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("pipeline", help="full chain: panel -> factors -> forecasts -> "
                                        "evaluation -> cointegration -> backtest")
    common(p)
    p.set_defaults(func=cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("VOLFACTORS_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"computation error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
