"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines; the suite is deterministic (fixed seed ranges throughout).
"""

import hashlib
import json
import time
from pathlib import Path

import numpy as np
import pytest

from volfactors.backtest import BacktestConfig, simulate
from volfactors.cli import main as cli_main
from volfactors.coint import engle_granger, johansen_trace
from volfactors.evaluation import dm_test, loss_series, qlike, r2, uow
from volfactors.factors import SelectionPolicy, extract_factors
from volfactors.models import FactorConfig, expanding_window_run, midas_weights
from volfactors.nnet import LstmConfig, gradient_check, init_params, train
from volfactors.rng import Rng
from volfactors.synth import SynthSpec, gen_cointegrated_pair, gen_factor_panel, gen_forecastable_rv, synthetic_dates


def _report(num: int, name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] criterion {num}: {name}{suffix}")
    assert passed, f"criterion {num}: {name}{suffix}"


def test_criterion_1_factor_recovery():
    t0 = time.perf_counter()
    spec = SynthSpec(seed=101, T=500, p=5, k_true=1, loading_smoothness=0.0, noise_scale=0.0)
    panel, _, _ = gen_factor_panel(spec)
    path = extract_factors(panel, 60, k=1)
    fitted = np.einsum("tpk,tk->tp", path.loadings, path.factors)
    residual = float(np.abs(panel.values[59:] - fitted).max())
    elapsed = time.perf_counter() - t0
    _report(
        1, "noiseless rank-1 factor recovery",
        residual < 1e-8 and elapsed < 1.0,
        f"max residual {residual:.2e}, {elapsed:.2f}s",
    )


def test_criterion_2_loading_normalization():
    worst = 0.0
    for seed in range(100):
        rng = Rng(seed)
        p = int(rng.integers(2, 7, 1)[0])
        k = int(rng.integers(1, p + 1, 1)[0])
        spec = SynthSpec(seed=seed + 500, T=90, p=p, k_true=k,
                         noise_scale=0.2, loading_smoothness=0.02)
        panel, _, _ = gen_factor_panel(spec)
        path = extract_factors(panel, 20, k=k)
        gram = np.einsum("tpi,tpj->tij", path.loadings, path.loadings) / p
        worst = max(worst, float(np.abs(gram - np.eye(k)[None]).max()))
    _report(2, "loading normalization L'L/p = I on 100 random panels",
            worst < 1e-8, f"max deviation {worst:.2e}")


def test_criterion_3_midas_weights():
    uniform = midas_weights(1.0, 1.0, 4)
    uniform_ok = np.array_equal(uniform, np.full(4, 0.25))
    sums_ok = True
    monotone_ok = True
    for theta2 in (1.0, 1.5, 2.0, 3.0, 5.0, 7.0, 10.0, 15.0, 20.0, 30.0, 50.0):
        for k in (30, 50, 80):
            w = midas_weights(1.0, theta2, k)
            sums_ok &= abs(w.sum() - 1.0) < 1e-12
            if theta2 > 1.0:
                monotone_ok &= bool(np.all(np.diff(w) < 0))
    _report(3, "MIDAS weight identities (uniform, sums, monotonicity)",
            uniform_ok and sums_ok and monotone_ok)


def _aug_vs_base(seed: int, factor_strength: float):
    spec = SynthSpec(seed=seed, T=600, p=10, noise_scale=0.2,
                     ar_coef=0.15, factor_strength=factor_strength)
    panel, _ = gen_forecastable_rv(spec)
    base = expanding_window_run("ar", panel, "A1", None, h=1, min_insample=300)
    fc = FactorConfig(enabled=True, window=60, policy=SelectionPolicy("dominant"))
    aug = expanding_window_run("ar", panel, "A1", fc, h=1, min_insample=300)
    common = sorted(set(base.origin_dates) & set(aug.origin_dates))
    bidx = {d: i for i, d in enumerate(base.origin_dates)}
    aidx = {d: i for i, d in enumerate(aug.origin_dates)}
    bi = [bidx[d] for d in common]
    ai = [aidx[d] for d in common]
    lb = loss_series(base.actuals[bi], base.predictions[bi])
    la = loss_series(aug.actuals[ai], aug.predictions[ai])
    try:
        stat, pvalue = dm_test(lb, la, 1)
    except ValueError:
        stat, pvalue = 0.0, 1.0
    win = r2(aug.actuals[ai], aug.predictions[ai]) > r2(base.actuals[bi], base.predictions[bi])
    return win, stat, pvalue


def test_criterion_4_augmentation_benefit():
    t0 = time.perf_counter()
    wins = dm_hits = 0
    for seed in range(100):
        win, stat, pvalue = _aug_vs_base(seed, factor_strength=0.8)
        wins += win
        dm_hits += (stat > 0 and pvalue < 0.05)
    null_rejects = 0
    for seed in range(100):
        _, _, pvalue = _aug_vs_base(seed, factor_strength=0.0)
        null_rejects += (pvalue < 0.05)
    elapsed = time.perf_counter() - t0
    _report(
        4, "augmentation benefit oracle",
        wins >= 95 and dm_hits >= 80 and null_rejects <= 10 and elapsed < 120.0,
        f"R2 wins {wins}/100, DM sig {dm_hits}/100, null rejects {null_rejects}/100, {elapsed:.0f}s",
    )


def test_criterion_5_metric_identities():
    ok = True
    for seed in range(50):
        vals = np.abs(Rng(seed + 900).normal(40)) + 0.5
        ok &= qlike(vals, vals) == 0.0
        ok &= abs(uow(vals, vals) - 0.04) < 1e-15
        ok &= abs(r2(vals, vals) - 1.0) < 1e-15
    _report(5, "metric identities on 50 random series", ok)


def test_criterion_6_dm_size_calibration():
    t0 = time.perf_counter()
    draws, n = 2000, 250
    rejections = 0
    for seed in range(draws):
        rng = Rng(30_000 + seed)
        losses_a = rng.normal(n) ** 2
        losses_b = rng.normal(n) ** 2
        _, pvalue = dm_test(losses_a, losses_b, 1)
        rejections += (pvalue < 0.05)
    rate = rejections / draws
    elapsed = time.perf_counter() - t0
    _report(6, "DM size calibration under the equal-accuracy null",
            0.035 <= rate <= 0.065 and elapsed < 60.0,
            f"rejection rate {rate:.3%}, {elapsed:.0f}s")


def _random_check_params(config: LstmConfig, seed: int, scale: float = 1.2):
    # random parameters with healthy gradient flow: at the tiny standard-init
    # scale, third-layer gradients shrink to ~1e-9 and the pinned 1e-5
    # central-difference step hits float64 roundoff before 1e-4 accuracy
    params = init_params(config)
    rng = Rng(seed + 777)
    for arr in (*params.W, *params.U, *params.b, params.w_out):
        arr[:] = rng.uniform_range(-scale, scale, arr.shape)
    params.b_out = float(rng.uniform_range(-scale, scale, 1)[0])
    return params


def test_criterion_7_lstm_gradients_and_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(10):
        config = LstmConfig(seed=seed, input_width=2, hidden=8, layers=3, window=7)
        params = _random_check_params(config, seed)
        sample = Rng(40_000 + seed).normal((7, 2))
        target = float(Rng(41_000 + seed).normal(1)[0])
        worst = max(worst, gradient_check(params, sample, target, n_params=250, seed=seed))
    rng = Rng(42_000)
    series = np.abs(1.0 + 0.3 * rng.normal(207))
    X = np.array([series[t - 6 : t + 1, None] for t in range(6, 206)])
    y = series[6:206]
    model = train(LstmConfig(seed=3, input_width=1, hidden=32, layers=3, window=7), X, y)
    test = slice(160, 200)
    preds = model.predict(X[test])
    test_mse = float(np.mean((preds - y[test]) ** 2))
    bound = 0.01 * float(np.var(y[test]))
    elapsed = time.perf_counter() - t0
    _report(7, "LSTM gradient check and learnable identity",
            worst < 1e-4 and test_mse < bound and elapsed < 120.0,
            f"max grad err {worst:.2e}, test MSE {test_mse:.2e} < {bound:.2e}, {elapsed:.0f}s")


def test_criterion_8_cointegration_power_and_size():
    t0 = time.perf_counter()
    n_seeds = 500
    power = 0
    for seed in range(n_seeds):
        la, lb, _ = gen_cointegrated_pair(SynthSpec(seed=seed, T=1000, spread_reversion=0.5))
        power += engle_granger(la, lb).reject_at_5pct
    size = 0
    for seed in range(n_seeds):
        rng = Rng(60_000 + seed)
        w1 = np.cumsum(0.03 * rng.normal(1000))
        w2 = np.cumsum(0.03 * rng.normal(1000))
        size += engle_granger(w1, w2).reject_at_5pct
    johansen_ok = 0
    for seed in range(200):
        la, lb, _ = gen_cointegrated_pair(SynthSpec(seed=70_000 + seed, T=1000, spread_reversion=0.5))
        extra = np.cumsum(0.03 * Rng(80_000 + seed).normal(1000))
        rep = johansen_trace(np.column_stack([la, lb, extra]))
        johansen_ok += (rep.details["selected_rank"] == 1)
    elapsed = time.perf_counter() - t0
    _report(
        8, "cointegration power and size",
        power >= 0.90 * n_seeds and size <= 0.10 * n_seeds and johansen_ok >= 180 and elapsed < 180.0,
        f"EG power {power}/{n_seeds}, EG size {size}/{n_seeds}, "
        f"Johansen rank {johansen_ok}/200, {elapsed:.0f}s",
    )


def _oracle_equity_path(dates, pa, pb, vol_a, vol_b, config):
    """Independent re-derivation of the documented accounting rules."""
    la, lb = np.log(pa), np.log(pb)
    n = len(pa)
    W = config.effective_hedge_window
    alpha = np.full(n, np.nan)
    beta = np.full(n, np.nan)
    for t in range(W - 1, n):
        xs = lb[t - W + 1 : t + 1]
        ys = la[t - W + 1 : t + 1]
        mx, my = xs.mean(), ys.mean()
        slope = ((xs - mx) * (ys - my)).sum() / ((xs - mx) ** 2).sum()
        beta[t] = slope
        alpha[t] = my - slope * mx
    spread = la - alpha - beta * lb
    z = np.full(n, np.nan)
    for t in range(W - 1 + config.window - 1, n):
        win = spread[t - config.window + 1 : t + 1]
        sd = win.std(ddof=1)
        if np.isfinite(win).all() and sd > 0:
            z[t] = (spread[t] - win.mean()) / sd
    # trailing return covariance over the z window
    ra = np.diff(la)
    rb = np.diff(lb)
    cov = np.full(n, np.nan)
    for t in range(config.window, n):
        wa = ra[t - config.window : t]
        wb = rb[t - config.window : t]
        cov[t] = ((wa - wa.mean()) * (wb - wb.mean())).sum() / (config.window - 1)
    # signals
    side = np.zeros(n, dtype=int)
    state, entry_day = 0, -1
    for t in range(n):
        zt = z[t]
        defined = np.isfinite(zt)
        if state != 0 and defined and t > entry_day:
            if (state == 1 and zt >= -config.exit_z) or (state == -1 and zt <= config.exit_z):
                state = 0
                side[t] = 0
                continue
        if state == 0 and defined:
            if zt < -config.entry_z:
                state, entry_day = 1, t
            elif zt > config.entry_z:
                state, entry_day = -1, t
        side[t] = state
    # accounting
    equity = np.empty(n)
    w_a = w_b = 0.0
    e = config.initial_equity
    for t in range(n):
        if t > 0:
            e += w_a * (np.exp(la[t] - la[t - 1]) - 1) + w_b * (np.exp(lb[t] - lb[t - 1]) - 1)
        if side[t] != 0:
            radicand = vol_a[t] ** 2 + beta[t] ** 2 * vol_b[t] ** 2 - 2 * beta[t] * cov[t]
            sigma = config.sizing_annualizer * np.sqrt(max(radicand, 0.0))
            lev = config.max_leverage if sigma == 0 else min(config.vol_target / sigma, config.max_leverage)
            notional = e * lev
            split = 1.0 + abs(beta[t])
            na = side[t] * notional / split
            nb = -side[t] * beta[t] * notional / split
        else:
            na = nb = 0.0
        e -= config.cost_per_leg * (abs(na - w_a) + abs(nb - w_b))
        w_a, w_b = na, nb
        equity[t] = e
    return equity


def test_criterion_9_backtest_accounting():
    # flat-signal run ends exactly at the initial equity
    spec = SynthSpec(seed=7, T=400, spread_reversion=0.3)
    la, lb, _ = gen_cointegrated_pair(spec)
    dates = synthetic_dates(400)
    vol = np.full(400, 0.03)
    flat = simulate(dates, np.exp(la), np.exp(lb), vol, vol, None,
                    BacktestConfig(entry_z=1e9, window=70))
    flat_ok = flat.metrics["portfolio_value"] == 50_000.0 and len(flat.fills) == 0

    # scripted trading run vs a fully independent accounting oracle (5 bp legs)
    cfg = BacktestConfig(window=30, hedge_window=30, cost_per_leg=5e-4)
    res = simulate(dates, np.exp(la), np.exp(lb), vol, vol, None, cfg)
    oracle = _oracle_equity_path(dates, np.exp(la), np.exp(lb), vol, vol, cfg)
    worst_dev = float(np.max(np.abs(res.equity - oracle[: len(res.equity)]) /
                             np.maximum(np.abs(oracle[: len(res.equity)]), 1.0)))
    oracle_ok = worst_dev < 1e-9 and len(res.fills) > 0

    # accounting identity + leverage cap across 100 random simulations
    identity_ok = True
    leverage_ok = True
    for seed in range(100):
        rng = Rng(95_000 + seed)
        rev = 0.1 + 0.5 * float(rng.uniform(1)[0])
        s = SynthSpec(seed=seed, T=300, spread_reversion=rev,
                      spread_vol=0.01 + 0.03 * float(rng.uniform(1)[0]))
        a, b, _ = gen_cointegrated_pair(s)
        d = synthetic_dates(300)
        v = np.full(300, 0.02 + 0.02 * float(rng.uniform(1)[0]))
        config = BacktestConfig(window=40, vol_target=0.5)
        r = simulate(d, np.exp(a), np.exp(b), v, v, None, config)
        ra = np.concatenate([[0.0], np.exp(np.diff(a)) - 1.0])
        rb = np.concatenate([[0.0], np.exp(np.diff(b)) - 1.0])
        fills = {}
        for f in r.fills:
            fills.setdefault(f.date, []).append(f)
        w_a = w_b = 0.0
        e = config.initial_equity
        for t, dd in enumerate(r.dates):
            if t > 0:
                e += w_a * ra[t] + w_b * rb[t]
            for f in fills.get(dd, []):
                if f.leg == "a":
                    w_a += f.notional_change
                else:
                    w_b += f.notional_change
                e -= f.cost
            if abs(e - r.equity[t]) > 1e-9 * max(abs(e), 1.0):
                identity_ok = False
            if np.isfinite(r.sizing_equity[t]) and r.gross[t] > config.max_leverage * r.sizing_equity[t] * (1 + 1e-12):
                leverage_ok = False
    _report(
        9, "backtest accounting identity, flat run, hand oracle, leverage cap",
        flat_ok and oracle_ok and identity_ok and leverage_ok,
        f"oracle max dev {worst_dev:.2e}",
    )


@pytest.fixture(scope="module")
def pipeline_runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("acceptance_pipeline")
    config = base / "config.json"
    config.write_text(json.dumps({"seed": 404, "models": ["ar", "har"],
                                  "synth": {"T": 450, "pair_T": 600}}))
    out1, out2 = base / "run1", base / "run2"
    assert cli_main(["pipeline", "--config", str(config), "--out", str(out1)]) == 0
    assert cli_main(["pipeline", "--config", str(config), "--out", str(out2)]) == 0
    return out1, out2


def test_criterion_10_pipeline_determinism(pipeline_runs):
    out1, out2 = pipeline_runs
    names = sorted(p.name for p in out1.iterdir())
    mismatches = []
    for name in names:
        h1 = hashlib.sha256((out1 / name).read_bytes()).hexdigest()
        h2 = hashlib.sha256((out2 / name).read_bytes()).hexdigest()
        if h1 != h2:
            mismatches.append(name)
    _report(10, "pipeline rerun is byte-identical",
            len(names) > 5 and not mismatches,
            f"{len(names)} artifacts" + (f", mismatches: {mismatches}" if mismatches else ""))


def test_criterion_11_reporting_format(pipeline_runs):
    out1, _ = pipeline_runs

    def first_data_line(path: Path) -> str:
        return next(l for l in path.read_text().splitlines() if l and not l.startswith("#"))

    metrics_ok = first_data_line(out1 / "metrics.csv") == "asset,model,R2,MSE,QLIKE,UoW,DM_vs_benchmark"
    backtest_ok = first_data_line(out1 / "backtest_metrics.csv") == "portfolio_value,ann_return,ann_sharpe"
    _report(11, "golden report headers", metrics_ok and backtest_ok)
