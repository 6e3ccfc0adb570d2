import numpy as np
import pytest

from volfactors.coint import CointReport, adf_test, default_max_lag, engle_granger, johansen_trace
from volfactors.rng import Rng
from volfactors.synth import SynthSpec, gen_cointegrated_pair


def random_walk(seed, n=500, vol=1.0):
    return np.cumsum(vol * Rng(seed).normal(n))


def stationary_ar(seed, n=500, coef=0.2):
    shocks = Rng(seed).normal(n - 1)
    out = np.empty(n)
    out[0] = 0.0
    for t in range(1, n):
        out[t] = coef * out[t - 1] + shocks[t - 1]
    return out


class TestAdf:
    def test_constant_series_rejected(self):
        with pytest.raises(ValueError, match="constant"):
            adf_test(np.ones(100))

    def test_short_series_rejected(self):
        with pytest.raises(ValueError):
            adf_test(np.arange(10.0))

    def test_strongly_stationary_rejects(self):
        rep = adf_test(stationary_ar(3, 500, 0.2))
        assert rep.reject_at_5pct
        assert rep.pvalue < 0.05

    def test_random_walk_usually_not_rejected(self):
        rep = adf_test(random_walk(4, 500))
        assert rep.method == "adf"
        assert rep.critical_values[0.01] < rep.critical_values[0.05] < rep.critical_values[0.10]

    def test_monte_carlo_size_and_power(self):
        # random walks: unit root retained in >= 90% of seeds; AR(0.2): rejected in >= 95%
        n_seeds = 120
        keep = sum(not adf_test(random_walk(1_000 + s, 500)).reject_at_5pct for s in range(n_seeds))
        power = sum(adf_test(stationary_ar(2_000 + s, 500, 0.2)).reject_at_5pct for s in range(n_seeds))
        assert keep >= 0.90 * n_seeds
        assert power >= 0.95 * n_seeds

    def test_white_noise_rejects(self):
        rep = adf_test(Rng(77).normal(300))
        assert rep.reject_at_5pct

    def test_scale_and_shift_invariance_with_constant(self):
        y = random_walk(9, 400)
        base = adf_test(y, trend="constant")
        shifted = adf_test(3.0 * y + 10.0, trend="constant")
        assert shifted.statistic == pytest.approx(base.statistic, rel=1e-9)

    def test_default_max_lag_formula(self):
        assert default_max_lag(100) == 12
        assert default_max_lag(1000) == 21


class TestEngleGranger:
    def test_cointegrated_pair_rejects(self):
        la, lb, _ = gen_cointegrated_pair(SynthSpec(seed=31, T=1000, spread_reversion=0.5))
        rep = engle_granger(la, lb)
        assert rep.reject_at_5pct
        assert rep.pvalue < 0.05

    def test_independent_walks_usually_retain(self):
        count = 0
        for s in range(60):
            r = Rng(5_000 + s)
            w1 = np.cumsum(0.03 * r.normal(800))
            w2 = np.cumsum(0.03 * r.normal(800))
            count += engle_granger(w1, w2).reject_at_5pct
        assert count <= 0.10 * 60 + 2

    def test_both_orderings_reported(self):
        la, lb, _ = gen_cointegrated_pair(SynthSpec(seed=32, T=600, spread_reversion=0.5))
        rep = engle_granger(la, lb)
        assert "tau_yx" in rep.details
        assert "beta_xy" in rep.details
        rev = engle_granger(lb, la)
        assert rev.statistic == pytest.approx(rep.details["tau_yx"], rel=1e-9)

    def test_scale_invariance(self):
        la, lb, _ = gen_cointegrated_pair(SynthSpec(seed=33, T=600, spread_reversion=0.5))
        base = engle_granger(la, lb)
        scaled = engle_granger(la + np.log(3.0), lb + np.log(2.0))  # price rescaling
        assert scaled.statistic == pytest.approx(base.statistic, rel=1e-9)
        assert scaled.reject_at_5pct == base.reject_at_5pct

    def test_too_short_rejected(self):
        with pytest.raises(ValueError):
            engle_granger(np.arange(30.0), np.arange(30.0) + 1)

    def test_pvalue_labeled(self):
        la, lb, _ = gen_cointegrated_pair(SynthSpec(seed=34, T=400, spread_reversion=0.5))
        rep = engle_granger(la, lb)
        assert "interpolat" in rep.pvalue_note


class TestJohansen:
    def _rank1_system(self, seed, n=1000):
        la, lb, _ = gen_cointegrated_pair(SynthSpec(seed=seed, T=n, spread_reversion=0.5))
        extra = np.cumsum(0.03 * Rng(seed + 100_000).normal(n))
        return np.column_stack([la, lb, extra])

    def test_rank1_recovery(self):
        rep = johansen_trace(self._rank1_system(41))
        assert rep.details["selected_rank"] == 1

    def test_independent_walks_rank0(self):
        W = np.cumsum(0.03 * Rng(42).normal((1000, 3)), axis=0)
        rep = johansen_trace(W)
        assert rep.details["selected_rank"] == 0

    def test_trace_stats_non_increasing(self):
        rep = johansen_trace(self._rank1_system(43))
        stats = [row[1] for row in rep.details["rank_table"]]
        assert all(b <= a for a, b in zip(stats, stats[1:]))

    def test_scale_invariance_restricted_constant(self):
        X = self._rank1_system(44)
        base = johansen_trace(X, det="restricted_constant")
        scaled = johansen_trace(X + np.log(2.0), det="restricted_constant")
        base_stats = [row[1] for row in base.details["rank_table"]]
        scaled_stats = [row[1] for row in scaled.details["rank_table"]]
        assert np.allclose(base_stats, scaled_stats, rtol=1e-8)
        assert scaled.details["selected_rank"] == base.details["selected_rank"]

    def test_vectors_shape_and_normalization(self):
        rep = johansen_trace(self._rank1_system(45))
        vectors = np.array(rep.details["vectors"])
        assert vectors.shape == (1, 4)  # 3 assets + restricted constant

    def test_preconditions(self):
        with pytest.raises(ValueError):
            johansen_trace(np.ones((25, 3)))  # T < 10p
        with pytest.raises(ValueError):
            johansen_trace(Rng(1).normal((300, 13)))  # p > 12

    def test_deterministic_cases_run(self):
        X = self._rank1_system(46)
        for det in ("none", "constant", "restricted_constant"):
            rep = johansen_trace(X, det=det)
            assert rep.method == "johansen"
            assert rep.critical_values[0.01] > rep.critical_values[0.05]

    def test_singular_input_rejected(self):
        w = random_walk(47, 300)
        X = np.column_stack([w, w, 2 * w])  # exactly collinear
        with pytest.raises(ValueError, match="singular"):
            johansen_trace(X)


class TestCointReport:
    def test_decision_consistency_enforced(self):
        with pytest.raises(ValueError, match="inconsistent"):
            CointReport(
                method="adf",
                statistic=-1.0,
                critical_values={0.01: -3.43, 0.05: -2.86, 0.10: -2.57},
                reject_at_5pct=True,  # -1.0 is not below -2.86
                tail="left",
                pvalue=0.5,
            )

    def test_ordering_enforced(self):
        with pytest.raises(ValueError, match="critical values"):
            CointReport(
                method="adf",
                statistic=-3.0,
                critical_values={0.01: -2.0, 0.05: -2.86, 0.10: -2.57},
                reject_at_5pct=True,
                tail="left",
                pvalue=0.01,
            )
