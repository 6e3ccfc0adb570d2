"""Quote ingestion and realized-volatility measurement.

Pipeline: raw bid/ask quotes -> filtered quotes -> five-minute midpoint grid
(previous-tick sampling) -> daily realized volatility -> h-day trailing
aggregates. Precomputed RV panels can also be loaded straight from CSV.

Realized volatility of a session is the square root of the sum of squared
log returns between consecutive grid midpoints. A standard equity session
(09:30-16:00, 300 s grid) has 78 intervals; a continuous 24 h session has
288.
"""

from __future__ import annotations

import csv
import math
import statistics
from collections import deque
from dataclasses import dataclass, field
from datetime import date, datetime, timedelta, timezone
from pathlib import Path

import numpy as np

__all__ = [
    "QuoteRecord",
    "SessionSpec",
    "MidpointGrid",
    "VolSeries",
    "VolPanel",
    "FilterReport",
    "filter_quotes",
    "filter_quotes_with_report",
    "sample_midpoints",
    "compute_daily_rv",
    "aggregate_rv",
    "load_rv_panel",
    "load_wide_csv",
    "write_rv_panel",
]

SPURIOUS_WINDOW = 50
SPURIOUS_MAD_MULT = 10.0


@dataclass(frozen=True)
class QuoteRecord:
    timestamp_ms: int
    bid: float
    ask: float

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.bid + self.ask)


@dataclass(frozen=True)
class SessionSpec:
    """Sampling session: fixed open/close times or a continuous 24 h day.

    ``open_time``/``close_time`` are "HH:MM" wall-clock strings (UTC); both
    ``None`` means a continuous day from midnight to midnight.
    """

    open_time: str | None = None
    close_time: str | None = None
    interval_seconds: int = 300

    @classmethod
    def equity(cls, interval_seconds: int = 300) -> "SessionSpec":
        return cls("09:30", "16:00", interval_seconds)

    @classmethod
    def crypto(cls, interval_seconds: int = 300) -> "SessionSpec":
        return cls(None, None, interval_seconds)

    def __post_init__(self) -> None:
        if self.interval_seconds <= 0:
            raise ValueError("interval_seconds must be positive")
        if (self.open_time is None) != (self.close_time is None):
            raise ValueError("open_time and close_time must be set together")
        if self.session_seconds % self.interval_seconds != 0:
            raise ValueError("session length must be a whole number of intervals")

    @property
    def open_seconds(self) -> int:
        return 0 if self.open_time is None else _parse_hhmm(self.open_time)

    @property
    def session_seconds(self) -> int:
        if self.open_time is None:
            return 86400
        return _parse_hhmm(self.close_time) - _parse_hhmm(self.open_time)

    @property
    def n_intervals(self) -> int:
        return self.session_seconds // self.interval_seconds


def _parse_hhmm(text: str) -> int:
    hh, mm = text.split(":")
    return int(hh) * 3600 + int(mm) * 60


@dataclass(frozen=True)
class MidpointGrid:
    """Previous-tick midpoints on a fixed grid covering one session."""

    session: date
    ticks: tuple[tuple[int, float], ...]  # (grid_time_ms, midpoint)
    interval_seconds: int = 300

    def __post_init__(self) -> None:
        times = [t for t, _ in self.ticks]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("grid times must be strictly increasing")
        if any(m <= 0 for _, m in self.ticks):
            raise ValueError("midpoints must be positive")

    @property
    def midpoints(self) -> np.ndarray:
        return np.array([m for _, m in self.ticks])


@dataclass(frozen=True)
class VolSeries:
    asset: str
    dates: list[date]
    values: np.ndarray
    horizon_tag: str = "daily"

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if len(self.dates) != len(values):
            raise ValueError("dates and values must align")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if len(values) and float(values.min()) < 0:
            raise ValueError("rv values must be >= 0")


@dataclass(frozen=True)
class VolPanel:
    """Fully aligned T x p panel of realized volatilities."""

    dates: list[date]
    assets: list[str]
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.ndim != 2 or values.shape != (len(self.dates), len(self.assets)):
            raise ValueError("values must be a (len(dates), len(assets)) matrix")
        if any(b <= a for a, b in zip(self.dates, self.dates[1:])):
            raise ValueError("dates must be strictly increasing")
        if len(set(self.assets)) != len(self.assets):
            raise ValueError("asset names must be unique")
        if values.size and (not np.isfinite(values).all() or float(values.min()) < 0):
            raise ValueError("panel cells must be finite and >= 0")

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def p(self) -> int:
        return self.values.shape[1]

    def column(self, asset: str) -> np.ndarray:
        return self.values[:, self.assets.index(asset)]

    def series(self, asset: str) -> VolSeries:
        return VolSeries(asset=asset, dates=list(self.dates), values=self.column(asset).copy())


@dataclass
class FilterReport:
    n_input: int = 0
    n_nonpositive: int = 0
    n_crossed: int = 0
    n_spurious: int = 0
    spurious_rule: str = field(
        default=f"midpoint deviates > {SPURIOUS_MAD_MULT:g} x rolling MAD from the "
        f"rolling median of the previous {SPURIOUS_WINDOW} kept midpoints "
        "(stand-in rule; window and multiplier are configurable)"
    )

    @property
    def n_kept(self) -> int:
        return self.n_input - self.n_nonpositive - self.n_crossed - self.n_spurious


def filter_quotes_with_report(
    raw: list[QuoteRecord],
    window: int = SPURIOUS_WINDOW,
    mad_mult: float = SPURIOUS_MAD_MULT,
) -> tuple[list[QuoteRecord], FilterReport]:
    """Drop non-positive, crossed, and spurious quotes; report what was cut.

    The spurious rule engages only once ``window`` previously kept midpoints
    exist. The MAD is floored at a relative epsilon so a flat-price window
    does not reject every subsequent move.
    """
    report = FilterReport(n_input=len(raw))
    if any(b.timestamp_ms <= a.timestamp_ms for a, b in zip(raw, raw[1:])):
        raise ValueError("quotes must be strictly increasing in time")
    kept: list[QuoteRecord] = []
    recent: deque[float] = deque(maxlen=window)
    for q in raw:
        if q.bid <= 0 or q.ask <= 0:
            report.n_nonpositive += 1
            continue
        if q.ask < q.bid:
            report.n_crossed += 1
            continue
        mid = q.midpoint
        if len(recent) == window:
            med = statistics.median(recent)
            mad = statistics.median(abs(m - med) for m in recent)
            if abs(mid - med) > mad_mult * max(mad, 1e-12 * abs(med)):
                report.n_spurious += 1
                continue
        kept.append(q)
        recent.append(mid)
    return kept, report


def filter_quotes(
    raw: list[QuoteRecord],
    window: int = SPURIOUS_WINDOW,
    mad_mult: float = SPURIOUS_MAD_MULT,
) -> list[QuoteRecord]:
    kept, _ = filter_quotes_with_report(raw, window=window, mad_mult=mad_mult)
    return kept


def _session_grid_ms(session_date: date, session: SessionSpec) -> list[int]:
    open_dt = datetime.combine(session_date, datetime.min.time(), tzinfo=timezone.utc)
    open_ms = int(open_dt.timestamp() * 1000) + session.open_seconds * 1000
    step = session.interval_seconds * 1000
    # N intervals need N + 1 grid points, open through close inclusive
    return [open_ms + i * step for i in range(session.n_intervals + 1)]


def sample_midpoints(
    quotes: list[QuoteRecord], session: SessionSpec, session_date: date
) -> MidpointGrid:
    """Previous-tick midpoint at each grid time; leading empty grid times are omitted."""
    grid = _session_grid_ms(session_date, session)
    ticks: list[tuple[int, float]] = []
    j = -1
    for g in grid:
        while j + 1 < len(quotes) and quotes[j + 1].timestamp_ms <= g:
            j += 1
        if j >= 0:
            ticks.append((g, quotes[j].midpoint))
    if not ticks:
        raise ValueError(f"empty session: no quotes at or before any grid time on {session_date}")
    return MidpointGrid(session=session_date, ticks=tuple(ticks), interval_seconds=session.interval_seconds)


def compute_daily_rv(grid: MidpointGrid) -> tuple[date, float]:
    """sqrt of the summed squared log returns between consecutive grid midpoints."""
    if len(grid.ticks) < 2:
        raise ValueError(f"insufficient ticks: need >= 2, got {len(grid.ticks)}")
    logmid = np.log(grid.midpoints)
    rv = math.sqrt(float(np.sum(np.diff(logmid) ** 2)))
    return grid.session, rv


def aggregate_rv(daily: VolSeries, h: int) -> VolSeries:
    """Trailing h-observation mean; the first h - 1 dates are omitted."""
    if h < 1:
        raise ValueError("h must be >= 1")
    if len(daily.values) < h:
        raise ValueError(f"need at least {h} observations, got {len(daily.values)}")
    if h == 1:
        return VolSeries(daily.asset, list(daily.dates), daily.values.copy(), "agg(1)")
    window = np.lib.stride_tricks.sliding_window_view(daily.values, h)
    return VolSeries(daily.asset, list(daily.dates[h - 1:]), window.mean(axis=1), f"agg({h})")


def _read_csv_rows(path: Path) -> tuple[list[str], list[tuple[int, list[str]]]]:
    """CSV rows with 1-based line numbers, skipping '#' provenance comments."""
    header: list[str] | None = None
    rows: list[tuple[int, list[str]]] = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (row[0].startswith("#") and header is None):
                continue
            if row and row[0].startswith("#"):
                continue
            if header is None:
                header = row
            else:
                rows.append((lineno, row))
    if header is None:
        raise ValueError(f"{path}: no header row found")
    return header, rows


def load_wide_csv(
    path: str | Path, value_kind: str = "value", require_nonnegative: bool = False
) -> tuple[list[date], list[str], np.ndarray, list[date]]:
    """Load a `date,NAME1,...` CSV; returns (dates, names, values, dropped_dates).

    Empty or NaN cells mark a row as incomplete and drop it (reported);
    non-numeric cells (and negative ones when ``require_nonnegative``) are
    hard errors naming the row and column.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{value_kind} file not found: {path}")
    header, rows = _read_csv_rows(path)
    if len(header) < 2 or header[0] != "date":
        raise ValueError(f"{path}: header must be 'date,NAME1,...', got {header!r}")
    names = header[1:]
    dates: list[date] = []
    dropped: list[date] = []
    data: list[list[float]] = []
    for lineno, row in rows:
        if len(row) != len(header):
            raise ValueError(f"{path}: row {lineno} has {len(row)} cells, expected {len(header)}")
        d = date.fromisoformat(row[0])
        parsed: list[float] = []
        missing = False
        for name, cell in zip(names, row[1:]):
            text = cell.strip()
            if text == "" or text.lower() == "nan":
                missing = True
                continue
            try:
                value = float(text)
            except ValueError:
                raise ValueError(
                    f"{path}: non-numeric {value_kind} at row {lineno}, column {name}: {cell!r}"
                ) from None
            if math.isnan(value):
                missing = True
                continue
            if require_nonnegative and value < 0:
                raise ValueError(f"{path}: negative {value_kind} at row {lineno}, column {name}: {value}")
            parsed.append(value)
        if missing:
            dropped.append(d)
            continue
        dates.append(d)
        data.append(parsed)
    if not data:
        raise ValueError(f"{path}: no complete rows")
    return dates, names, np.array(data), dropped


def load_rv_panel(path: str | Path) -> tuple[VolPanel, list[date]]:
    """Load a `date,ASSET1,...` RV CSV, dropping (and reporting) incomplete rows."""
    dates, assets, values, dropped = load_wide_csv(path, value_kind="rv", require_nonnegative=True)
    return VolPanel(dates=dates, assets=assets, values=values), dropped


def write_rv_panel(path: str | Path, panel: VolPanel, provenance: str | None = None) -> None:
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(["date"] + list(panel.assets))
        for d, row in zip(panel.dates, panel.values):
            writer.writerow([d.isoformat()] + [repr(float(v)) for v in row])


def load_quotes_csv(path: str | Path) -> list[QuoteRecord]:
    """Read a `timestamp_ms,bid,ask` CSV (header required)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"quote file not found: {path}")
    header, rows = _read_csv_rows(path)
    if header != ["timestamp_ms", "bid", "ask"]:
        raise ValueError(f"{path}: header must be 'timestamp_ms,bid,ask', got {header!r}")
    quotes = []
    for lineno, row in rows:
        try:
            quotes.append(QuoteRecord(int(row[0]), float(row[1]), float(row[2])))
        except (ValueError, IndexError):
            raise ValueError(f"{path}: malformed quote at row {lineno}: {row!r}") from None
    return quotes


def session_dates_covered(quotes: list[QuoteRecord]) -> list[date]:
    """Distinct UTC dates spanned by the quote timestamps, in order."""
    seen: list[date] = []
    for q in quotes:
        d = datetime.fromtimestamp(q.timestamp_ms / 1000, tz=timezone.utc).date()
        if not seen or seen[-1] != d:
            if seen and d < seen[-1]:
                raise ValueError("quotes must be time-sorted")
            if not seen or d != seen[-1]:
                seen.append(d)
    return seen


def daily_rv_from_quotes(
    quotes: list[QuoteRecord], session: SessionSpec, asset: str
) -> tuple[VolSeries, FilterReport]:
    """Full per-asset pipeline: filter, grid, and per-session RV."""
    kept, report = filter_quotes_with_report(quotes)
    dates: list[date] = []
    values: list[float] = []
    for d in session_dates_covered(kept):
        day_quotes = [q for q in kept if _utc_date(q.timestamp_ms) == d]
        try:
            grid = sample_midpoints(day_quotes, session, d)
            _, rv = compute_daily_rv(grid)
        except ValueError:
            continue  # sessions without enough ticks are skipped
        dates.append(d)
        values.append(rv)
    return VolSeries(asset=asset, dates=dates, values=np.array(values)), report


def _utc_date(timestamp_ms: int) -> date:
    return datetime.fromtimestamp(timestamp_ms / 1000, tz=timezone.utc).date()


def next_session_date(d: date) -> date:
    return d + timedelta(days=1)
