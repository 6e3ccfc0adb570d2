import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from volfactors.evaluation import (
    PRED_FLOOR,
    dm_test,
    loss_series,
    metric_report,
    mse,
    qlike,
    r2,
    uow,
)
from volfactors.rng import Rng

positive_series = st.lists(st.floats(0.01, 100.0), min_size=12, max_size=60)


class TestR2:
    def test_perfect_is_one(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        assert r2(a, a) == pytest.approx(1.0)

    def test_mean_prediction_is_zero(self):
        a = np.array([1.0, 2.0, 3.0, 4.0])
        p = np.full(4, a.mean())
        assert r2(a, p) == pytest.approx(0.0, abs=1e-14)

    def test_matches_two_pass_oracle(self):
        rng = Rng(2)
        a = rng.normal(60) + 3.0
        p = a + 0.3 * rng.normal(60)
        abar = sum(a) / len(a)
        sse = sum((x - y) ** 2 for x, y in zip(a, p))
        sst = sum((x - abar) ** 2 for x in a)
        assert r2(a, p) == pytest.approx(1 - sse / sst, rel=1e-12)

    def test_constant_actuals_error(self):
        with pytest.raises(ValueError, match="zero variance"):
            r2(np.ones(5), np.ones(5))

    def test_pointwise_ratio_form(self):
        a = np.array([1.0, 2.0, 4.0])
        p = np.array([1.5, 2.0, 3.0])
        abar = a.mean()
        expected = 1 - sum(((x - y) / (x - abar)) ** 2 for x, y in zip(a, p))
        assert r2(a, p, form="pointwise_ratio") == pytest.approx(expected)


class TestMse:
    def test_identical_zero(self):
        a = np.array([1.0, 2.0])
        assert mse(a, a) == 0.0

    def test_constant_error(self):
        a = np.array([1.0, 2.0, 3.0])
        assert mse(a, a + 0.5) == pytest.approx(0.25)

    def test_brute_force(self):
        rng = Rng(3)
        a, p = rng.normal(40), rng.normal(40)
        assert mse(a, p) == pytest.approx(sum((x - y) ** 2 for x, y in zip(a, p)) / 40)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            mse([], [])


class TestQlike:
    def test_identity_zero(self):
        a = np.array([0.5, 1.0, 2.0])
        assert qlike(a, a) == 0.0

    def test_known_value(self):
        assert qlike([2.0], [1.0]) == pytest.approx(2 - math.log(2) - 1, abs=1e-12)

    @given(positive_series)
    @settings(max_examples=50, deadline=None)
    def test_nonnegative(self, vals):
        a = np.array(vals)
        p = np.roll(a, 1)
        assert qlike(a, p) >= 0.0

    def test_positive_when_different(self):
        assert qlike([1.0, 2.0], [1.1, 1.9]) > 0.0

    def test_nonpositive_actual_error(self):
        with pytest.raises(ValueError):
            qlike([0.0, 1.0], [1.0, 1.0])

    def test_floor_applied_to_predictions(self):
        val = qlike([1.0], [0.0])  # floored to PRED_FLOOR instead of dividing by zero
        expected = 1.0 / PRED_FLOOR - math.log(1.0 / PRED_FLOOR) - 1.0
        assert val == pytest.approx(expected, rel=1e-12)


class TestUow:
    def test_perfect_value(self):
        a = np.array([0.5, 1.0, 2.0])
        assert uow(a, a) == pytest.approx(0.04, abs=1e-15)

    def test_ratio_two_is_zero(self):
        a = np.array([2.0, 4.0])
        p = np.array([1.0, 2.0])
        assert uow(a, p) == pytest.approx(0.0, abs=1e-15)

    def test_maximized_at_ratio_one(self):
        a = np.full(10, 3.0)
        for eps in (1e-3, -1e-3):
            assert uow(a, a * (1 + eps)) < uow(a, a)

    def test_nonpositive_prediction_error(self):
        with pytest.raises(ValueError):
            uow([1.0], [0.0])


class TestDmTest:
    def test_identical_losses_degenerate(self):
        losses = np.abs(Rng(4).normal(50))
        with pytest.raises(ValueError, match="degenerate differential"):
            dm_test(losses, losses)

    def test_candidate_strictly_better_positive(self):
        rng = Rng(5)
        lc = np.abs(rng.normal(100))
        lb = lc + 0.5  # benchmark strictly worse every date
        stat, p = dm_test(lb, lc, 1)
        assert stat > 0
        assert p < 0.05

    def test_antisymmetry(self):
        rng = Rng(6)
        la = np.abs(rng.normal(80))
        lb = np.abs(rng.normal(80))
        s1, p1 = dm_test(la, lb, 1)
        s2, p2 = dm_test(lb, la, 1)
        assert s1 == pytest.approx(-s2, rel=1e-12)
        assert p1 == pytest.approx(p2, rel=1e-12)

    def test_h7_uses_hac_bandwidth(self):
        rng = Rng(7)
        d = rng.normal(200)
        lb = np.abs(rng.normal(200)) + d
        lc = np.abs(rng.normal(200))
        s1, _ = dm_test(lb, lc, 1)
        s7, _ = dm_test(lb, lc, 7)
        assert s1 != s7  # Bartlett terms at lags 1..6 enter

    def test_hac_matches_manual_bartlett(self):
        rng = Rng(8)
        lb = np.abs(rng.normal(120))
        lc = np.abs(rng.normal(120))
        h = 7
        d = lb - lc
        n = len(d)
        dc = d - d.mean()
        var = float(dc @ dc) / n
        for lag in range(1, h):
            w = 1 - lag / h
            var += 2 * w * float(dc[lag:] @ dc[:-lag]) / n
        oracle = d.mean() / math.sqrt(var / n)
        stat, _ = dm_test(lb, lc, h)
        assert stat == pytest.approx(oracle, rel=1e-12)

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            dm_test(np.ones(5), np.zeros(5))


class TestLossSeriesAndReport:
    def test_mse_loss(self):
        ls = loss_series([1.0, 2.0], [1.5, 1.5], "mse")
        assert np.allclose(ls, [0.25, 0.25])

    def test_utility_loss_is_negated_utility(self):
        a = np.array([1.0, 2.0])
        p = np.array([1.0, 2.0])
        ls = loss_series(a, p, "utility")
        assert np.allclose(ls, -0.04)

    def test_report_fields(self):
        rng = Rng(9)
        a = np.abs(rng.normal(30)) + 0.5
        p = a * (1 + 0.05 * rng.normal(30))
        rep = metric_report(a, p, horizon=7)
        assert rep.uow is not None and rep.n == 30
        rep1 = metric_report(a, p, horizon=1)
        assert rep1.uow is None

    def test_r2_mse_rank_consistency(self):
        rng = Rng(10)
        a = np.abs(rng.normal(50)) + 1.0
        preds = [a + eps * rng.normal(50) for eps in (0.05, 0.1, 0.4)]
        r2s = [r2(a, p) for p in preds]
        mses = [mse(a, p) for p in preds]
        assert np.argsort(r2s).tolist() == np.argsort(mses)[::-1].tolist()
