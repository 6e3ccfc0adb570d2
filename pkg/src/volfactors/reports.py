"""CSV/JSON artifact writers and readers.

Every CSV artifact starts with a provenance comment line
``# config_hash=<hash> seed=<seed> version=<version>`` followed by a fixed
header. Numbers are written with ``repr`` so artifacts round-trip exactly
and reruns with the same config are byte-identical. Readers skip comment
lines.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass
from datetime import date
from pathlib import Path

import numpy as np

log = logging.getLogger("volfactors.reports")

from . import __version__
from .backtest import BacktestResult
from .coint import CointReport
from .evaluation import dm_test, loss_series, metric_report
from .factors import FactorPath
from .models import ForecastSeries

FORECAST_HEADER = ["origin_date", "horizon", "actual", "predicted", "model", "asset"]
METRIC_HEADER = ["asset", "model", "R2", "MSE", "QLIKE", "UoW", "DM_vs_benchmark"]
BACKTEST_METRIC_HEADER = ["portfolio_value", "ann_return", "ann_sharpe"]


def provenance_line(config_hash: str, seed: int) -> str:
    return f"config_hash={config_hash} seed={seed} version={__version__}"


def _fmt(x: float) -> str:
    return repr(float(x))


def _open_writer(path: Path, provenance: str | None):
    fh = open(path, "w", newline="")
    if provenance:
        fh.write(f"# {provenance}\n")
    return fh, csv.writer(fh)


def write_forecasts(path: str | Path, series_list: list[ForecastSeries], provenance: str | None = None) -> None:
    fh, writer = _open_writer(Path(path), provenance)
    with fh:
        writer.writerow(FORECAST_HEADER)
        for fs in series_list:
            for d, a, p in zip(fs.origin_dates, fs.actuals, fs.predictions):
                writer.writerow([d.isoformat(), fs.horizon, _fmt(a), _fmt(p), fs.model, fs.asset])


def load_forecasts(path: str | Path) -> list[ForecastSeries]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"forecast file not found: {path}")
    groups: dict[tuple[str, str, int], list[tuple[date, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            if header is None:
                header = row
                if header != FORECAST_HEADER:
                    raise ValueError(f"{path}: unexpected forecast header {header!r}")
                continue
            d, h, a, p, model, asset = row
            groups.setdefault((model, asset, int(h)), []).append(
                (date.fromisoformat(d), float(a), float(p))
            )
    out = []
    for (model, asset, h), rows in groups.items():
        rows.sort(key=lambda r: r[0])
        out.append(
            ForecastSeries(
                origin_dates=[r[0] for r in rows],
                horizon=h,
                actuals=np.array([r[1] for r in rows]),
                predictions=np.array([r[2] for r in rows]),
                model=model,
                asset=asset,
            )
        )
    return out


def _benchmark_name(model: str) -> str | None:
    if model.endswith("_aug"):
        return model[: -len("_aug")]
    return None


@dataclass(frozen=True)
class MetricRow:
    asset: str
    model: str
    r2: float
    mse: float
    qlike: float
    uow: float | None
    dm_vs_benchmark: float | None


def build_metric_table(series_list: list[ForecastSeries], r2_form: str = "standard") -> list[MetricRow]:
    """One row per forecast series; augmented rows get an MSE-loss DM statistic
    against their unaugmented counterpart when it is present and aligned."""
    by_key = {(fs.model, fs.asset, fs.horizon): fs for fs in series_list}
    rows = []
    for fs in series_list:
        report = metric_report(fs.actuals, fs.predictions, fs.horizon, r2_form=r2_form)
        if report.n_floored:
            log.warning(
                "%s/%s h=%d: %d prediction(s) floored inside QLIKE/UoW",
                fs.asset, fs.model, fs.horizon, report.n_floored,
            )
        dm_stat = None
        bench_name = _benchmark_name(fs.model)
        if bench_name is not None:
            bench = by_key.get((bench_name, fs.asset, fs.horizon))
            if bench is not None:
                cand_by_date = {d: i for i, d in enumerate(fs.origin_dates)}
                bench_by_date = {d: i for i, d in enumerate(bench.origin_dates)}
                common = [d for d in bench.origin_dates if d in cand_by_date]
                if len(common) >= 10:
                    bench_idx = [bench_by_date[d] for d in common]
                    cand_idx = [cand_by_date[d] for d in common]
                    lb = loss_series(bench.actuals[bench_idx], bench.predictions[bench_idx])
                    lc = loss_series(fs.actuals[cand_idx], fs.predictions[cand_idx])
                    try:
                        dm_stat, _ = dm_test(lb, lc, fs.horizon)
                    except ValueError:
                        dm_stat = None  # identical forecasts: degenerate differential
        rows.append(
            MetricRow(fs.asset, fs.model, report.r2, report.mse, report.qlike, report.uow, dm_stat)
        )
    rows.sort(key=lambda r: (r.asset, r.model))
    return rows


def write_metric_table(path: str | Path, rows: list[MetricRow], provenance: str | None = None) -> None:
    fh, writer = _open_writer(Path(path), provenance)
    with fh:
        writer.writerow(METRIC_HEADER)
        for r in rows:
            writer.writerow(
                [
                    r.asset,
                    r.model,
                    _fmt(r.r2),
                    _fmt(r.mse),
                    _fmt(r.qlike),
                    "" if r.uow is None else _fmt(r.uow),
                    "" if r.dm_vs_benchmark is None else _fmt(r.dm_vs_benchmark),
                ]
            )


def write_factor_outputs(
    out_dir: str | Path, path: FactorPath, assets: list[str], provenance: str | None = None
) -> dict[str, Path]:
    """Plottable CSVs: factors, long-format loadings, explained-variance shares."""
    out_dir = Path(out_dir)
    factors_csv = out_dir / "factors.csv"
    loadings_csv = out_dir / "loadings.csv"
    ev_csv = out_dir / "explained_variance.csv"

    fh, writer = _open_writer(factors_csv, provenance)
    with fh:
        writer.writerow(["date"] + [f"f{j + 1}" for j in range(path.k)])
        for d, row in zip(path.dates, path.factors):
            writer.writerow([d.isoformat()] + [_fmt(v) for v in row])

    fh, writer = _open_writer(loadings_csv, provenance)
    with fh:
        writer.writerow(["date", "asset", "component", "loading"])
        for d, mat in zip(path.dates, path.loadings):
            for i, asset in enumerate(assets):
                for j in range(path.k):
                    writer.writerow([d.isoformat(), asset, j + 1, _fmt(mat[i, j])])

    fh, writer = _open_writer(ev_csv, provenance)
    with fh:
        p = path.eigenvalues.shape[1]
        writer.writerow(["date"] + [f"ev{j + 1}" for j in range(p)])
        for d, eigvals in zip(path.dates, path.eigenvalues):
            total = max(float(np.clip(eigvals, 0, None).sum()), 1e-300)
            writer.writerow([d.isoformat()] + [_fmt(max(v, 0.0) / total) for v in eigvals])

    return {"factors": factors_csv, "loadings": loadings_csv, "explained_variance": ev_csv}


def write_backtest_outputs(
    out_dir: str | Path, result: BacktestResult, provenance: str | None = None
) -> dict[str, Path]:
    out_dir = Path(out_dir)
    equity_csv = out_dir / "equity.csv"
    ledger_csv = out_dir / "ledger.csv"
    metrics_csv = out_dir / "backtest_metrics.csv"
    metrics_json = out_dir / "backtest_metrics.json"

    fh, writer = _open_writer(equity_csv, provenance)
    with fh:
        writer.writerow(["date", "equity"])
        for d, e in zip(result.dates, result.equity):
            writer.writerow([d.isoformat(), _fmt(e)])

    fh, writer = _open_writer(ledger_csv, provenance)
    with fh:
        writer.writerow(["date", "leg", "notional_change", "price", "cost"])
        for fill in result.fills:
            writer.writerow(
                [fill.date.isoformat(), fill.leg, _fmt(fill.notional_change), _fmt(fill.price), _fmt(fill.cost)]
            )

    fh, writer = _open_writer(metrics_csv, provenance)
    with fh:
        writer.writerow(BACKTEST_METRIC_HEADER)
        m = result.metrics
        writer.writerow([_fmt(m["portfolio_value"]), _fmt(m["ann_return"]), _fmt(m["ann_sharpe"])])

    with open(metrics_json, "w") as fh:
        json.dump(result.metrics, fh, sort_keys=True, indent=2)
        fh.write("\n")

    return {
        "equity": equity_csv,
        "ledger": ledger_csv,
        "metrics_csv": metrics_csv,
        "metrics_json": metrics_json,
    }


def write_coint_outputs(
    out_dir: str | Path,
    reports: dict[str, CointReport],
    asset_names: list[str],
    provenance: str | None = None,
) -> dict[str, Path]:
    """JSON report bundle plus the cointegrating-vector table as CSV."""
    out_dir = Path(out_dir)
    report_json = out_dir / "coint_report.json"
    cev_csv = out_dir / "cev.csv"

    payload = {}
    for name, rep in reports.items():
        payload[name] = {
            "method": rep.method,
            "statistic": rep.statistic,
            "critical_values": {str(k): v for k, v in rep.critical_values.items()},
            "reject_at_5pct": rep.reject_at_5pct,
            "pvalue": rep.pvalue,
            "pvalue_note": rep.pvalue_note,
            "lag": rep.lag,
            "details": rep.details,
        }
    with open(report_json, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")

    johansen = next((r for r in reports.values() if r.method == "johansen"), None)
    if johansen is not None:
        fh, writer = _open_writer(cev_csv, provenance)
        with fh:
            cols = list(asset_names)
            if johansen.details.get("has_restricted_constant"):
                cols = cols + ["const"]
            writer.writerow(["vector"] + cols)
            for i, row in enumerate(johansen.details["vectors"]):
                writer.writerow([f"CEV{i + 1}"] + [_fmt(v) for v in row])
        return {"report": report_json, "cev": cev_csv}
    return {"report": report_json}
