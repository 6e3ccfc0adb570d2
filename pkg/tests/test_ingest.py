import math
from datetime import date

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volfactors.ingest import (
    MidpointGrid,
    QuoteRecord,
    SessionSpec,
    VolPanel,
    VolSeries,
    aggregate_rv,
    compute_daily_rv,
    filter_quotes,
    filter_quotes_with_report,
    load_rv_panel,
    sample_midpoints,
    write_rv_panel,
)
from volfactors.rng import Rng

DAY = date(2020, 3, 2)
DAY_MS = 1583107200000  # 2020-03-02T00:00:00Z


def q(ts, bid, ask):
    return QuoteRecord(ts, bid, ask)


class TestFilterQuotes:
    def test_nonpositive_bid_dropped(self):
        raw = [q(1, 10.0, 10.2), q(2, -1.0, 10.2)]
        assert filter_quotes(raw) == [raw[0]]

    def test_crossed_quote_dropped(self):
        assert filter_quotes([q(1, 10.2, 10.0)]) == []

    def test_empty_input_is_empty_output(self):
        assert filter_quotes([]) == []

    def test_spurious_spike_dropped(self):
        # 1000 clean quotes oscillating around 100, one 100x outlier in the middle
        rng = Rng(17)
        noise = 0.05 * rng.normal(1000)
        raw = []
        for i in range(1000):
            mid = 100.0 + noise[i]
            raw.append(q(i + 1, mid - 0.01, mid + 0.01))
        outlier = q(500, 9999.99, 10000.01)
        raw_with = raw[:499] + [outlier] + [q(r.timestamp_ms + 1, r.bid, r.ask) for r in raw[499:]]
        kept, report = filter_quotes_with_report(raw_with)
        assert report.n_spurious == 1
        assert all(k.midpoint < 1000 for k in kept)
        # hand-applied rule: deviation vs median/MAD of previous 50 kept midpoints
        window = [r.midpoint for r in raw_with[449:499]]
        med = sorted(window)[25 - 1 : 25 + 1]
        med = 0.5 * (med[0] + med[1])
        mad_vals = sorted(abs(m - med) for m in window)
        mad = 0.5 * (mad_vals[24] + mad_vals[25])
        assert abs(outlier.midpoint - med) > 10 * mad

    def test_flat_prices_not_rejected(self):
        raw = [q(i + 1, 10.0, 10.2) for i in range(200)]
        assert len(filter_quotes(raw)) == 200

    def test_unsorted_input_rejected(self):
        with pytest.raises(ValueError):
            filter_quotes([q(5, 1, 2), q(4, 1, 2)])

    @given(st.lists(st.tuples(st.floats(0.1, 100), st.floats(0.1, 100)), max_size=80))
    @settings(max_examples=40, deadline=None)
    def test_output_is_subsequence(self, prices):
        raw = [q(i + 1, min(b, a), max(b, a)) for i, (b, a) in enumerate(prices)]
        kept = filter_quotes(raw)
        it = iter(raw)
        assert all(any(k is r for r in it) for k in kept)  # order-preserving subsequence


class TestSampleMidpoints:
    def test_single_early_quote_fills_grid(self):
        session = SessionSpec.equity()
        grid = sample_midpoints([q(DAY_MS, 10.0, 12.0)], session, DAY)
        assert all(m == 11.0 for _, m in grid.ticks)

    def test_equity_session_has_78_intervals(self):
        session = SessionSpec.equity()
        assert session.n_intervals == 78
        grid = sample_midpoints([q(DAY_MS, 10.0, 12.0)], session, DAY)
        assert len(grid.ticks) == 79

    def test_crypto_day_has_288_intervals(self):
        session = SessionSpec.crypto()
        assert session.n_intervals == 288
        grid = sample_midpoints([q(DAY_MS, 10.0, 12.0)], session, DAY)
        assert len(grid.ticks) == 289

    def test_previous_tick_sampling(self):
        session = SessionSpec.crypto(interval_seconds=3600)
        quotes = [q(DAY_MS, 10.0, 10.2), q(DAY_MS + 3_600_000 + 1, 20.0, 20.2)]
        grid = sample_midpoints(quotes, session, DAY)
        mids = grid.midpoints
        assert mids[0] == pytest.approx(10.1)
        assert mids[1] == pytest.approx(10.1)  # second quote arrives just after the tick
        assert mids[2] == pytest.approx(20.1)

    def test_grid_times_before_first_quote_omitted(self):
        session = SessionSpec.crypto(interval_seconds=3600)
        quotes = [q(DAY_MS + 2 * 3_600_000, 10.0, 10.2)]
        grid = sample_midpoints(quotes, session, DAY)
        assert len(grid.ticks) == 25 - 2

    def test_empty_session_error(self):
        session = SessionSpec.equity()
        with pytest.raises(ValueError, match="empty session"):
            sample_midpoints([], session, DAY)

    def test_idempotent_on_gridded_input(self):
        session = SessionSpec.crypto(interval_seconds=3600)
        quotes = [q(DAY_MS + i * 3_600_000, 10.0 + i, 10.2 + i) for i in range(25)]
        grid1 = sample_midpoints(quotes, session, DAY)
        regridded = [q(t, m - 0.1, m + 0.1) for t, m in grid1.ticks]
        grid2 = sample_midpoints(regridded, session, DAY)
        assert np.allclose(grid1.midpoints, grid2.midpoints)


class TestDailyRv:
    def test_constant_midpoints_zero_rv(self):
        grid = MidpointGrid(DAY, tuple((DAY_MS + i * 300_000, 50.0) for i in range(79)))
        _, rv = compute_daily_rv(grid)
        assert rv == 0.0

    def test_three_four_five_identity(self):
        mids = (100.0, 100.0 * math.exp(0.3), 100.0 * math.exp(0.3) * math.exp(0.4))
        grid = MidpointGrid(DAY, tuple((DAY_MS + i * 300_000, m) for i, m in enumerate(mids)))
        _, rv = compute_daily_rv(grid)
        assert rv == pytest.approx(0.5, abs=1e-12)

    def test_matches_direct_recomputation(self):
        rng = Rng(5)
        mids = np.exp(np.cumsum(0.001 * rng.normal(79))) * 100
        grid = MidpointGrid(DAY, tuple((DAY_MS + i * 300_000, float(m)) for i, m in enumerate(mids)))
        _, rv = compute_daily_rv(grid)
        oracle = 0.0
        for s in range(1, 79):
            oracle += math.log(mids[s] / mids[s - 1]) ** 2
        assert rv == pytest.approx(math.sqrt(oracle), rel=1e-12)

    def test_insufficient_ticks(self):
        grid = MidpointGrid(DAY, ((DAY_MS, 50.0),))
        with pytest.raises(ValueError, match="insufficient ticks"):
            compute_daily_rv(grid)


def _series(values, asset="X"):
    from datetime import timedelta

    dates = [date(2020, 1, 1) + timedelta(days=i) for i in range(len(values))]
    return VolSeries(asset, dates, np.asarray(values, dtype=float))


class TestAggregateRv:
    def test_h1_is_identity(self):
        s = _series([1.0, 2.0, 3.0])
        agg = aggregate_rv(s, 1)
        assert np.array_equal(agg.values, s.values)
        assert agg.dates == s.dates

    def test_seven_day_mean(self):
        agg = aggregate_rv(_series([1, 2, 3, 4, 5, 6, 7]), 7)
        assert len(agg.values) == 1
        assert agg.values[0] == pytest.approx(4.0)

    def test_matches_prefix_sum_oracle(self):
        rng = Rng(8)
        vals = np.abs(rng.normal(60)) + 0.1
        agg = aggregate_rv(_series(vals), 7)
        csum = np.concatenate([[0.0], np.cumsum(vals)])
        oracle = (csum[7:] - csum[:-7]) / 7.0
        assert np.allclose(agg.values, oracle, rtol=1e-12)

    def test_invalid_h(self):
        with pytest.raises(ValueError):
            aggregate_rv(_series([1, 2, 3]), 0)

    @given(st.integers(1, 10), st.integers(10, 40))
    @settings(max_examples=30, deadline=None)
    def test_output_length_property(self, h, n):
        vals = np.abs(Rng(n).normal(n)) + 0.01
        agg = aggregate_rv(_series(vals), h)
        assert len(agg.values) == n - h + 1
        assert agg.values.min() >= 0


class TestPanelIO:
    def test_well_formed_roundtrip(self, tmp_path):
        panel = VolPanel(
            dates=[date(2020, 1, 1), date(2020, 1, 2), date(2020, 1, 3)],
            assets=["A", "B"],
            values=np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.5]]),
        )
        path = tmp_path / "panel.csv"
        write_rv_panel(path, panel, provenance="test")
        loaded, dropped = load_rv_panel(path)
        assert dropped == []
        assert loaded.assets == ["A", "B"]
        assert np.array_equal(loaded.values, panel.values)
        assert loaded.dates == panel.dates

    def test_synthetic_panel_roundtrip_exact(self, tmp_path):
        from volfactors.synth import SynthSpec, gen_factor_panel

        panel, _, _ = gen_factor_panel(SynthSpec(seed=23, T=60, p=4, noise_scale=0.2))
        path = tmp_path / "synth_panel.csv"
        write_rv_panel(path, panel, provenance="roundtrip")
        loaded, dropped = load_rv_panel(path)
        assert dropped == []
        assert np.array_equal(loaded.values, panel.values)  # repr round-trips doubles exactly

    def test_missing_cell_drops_row(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("date,A,B\n2020-01-01,1.0,2.0\n2020-01-02,,2.0\n2020-01-03,3.0,4.0\n")
        panel, dropped = load_rv_panel(path)
        assert panel.values.shape == (2, 2)
        assert dropped == [date(2020, 1, 2)]

    def test_negative_cell_is_error_with_location(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("date,A,B\n2020-01-01,1.0,2.0\n2020-01-02,-0.5,2.0\n")
        with pytest.raises(ValueError, match=r"row 3, column A"):
            load_rv_panel(path)

    def test_non_numeric_cell_is_error(self, tmp_path):
        path = tmp_path / "panel.csv"
        path.write_text("date,A,B\n2020-01-01,1.0,oops\n")
        with pytest.raises(ValueError, match=r"column B"):
            load_rv_panel(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_rv_panel(tmp_path / "nope.csv")
