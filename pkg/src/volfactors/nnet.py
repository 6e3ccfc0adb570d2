"""Minimal from-scratch stacked LSTM regressor (numpy only).

Three LSTM layers over a 7-step window of (RV, factors) rows feed a dense
head that emits one scalar. Training is mini-batch gradient descent with
per-parameter adaptive step sizes (first/second moment estimates, decay
0.9/0.999), a fixed 80:20 time split, and early stopping on a validation
slice (the last 10% of the training block). Everything is seeded through
the package RNG, so runs are bit-reproducible.

Backpropagation through time is hand-written and verified against central
finite differences by :func:`gradient_check`.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .rng import Rng

__all__ = [
    "LstmConfig",
    "LstmParams",
    "Standardizer",
    "TrainedLstm",
    "init_params",
    "forward",
    "loss_and_gradients",
    "gradient_check",
    "train",
    "save_trained",
    "load_trained",
    "build_sequences",
    "lstm_forecast_series",
]

GATES = 4  # input, forget, candidate, output blocks stacked in this order


@dataclass(frozen=True)
class LstmConfig:
    seed: int
    input_width: int
    hidden: int = 32
    layers: int = 3
    window: int = 7
    learning_rate: float = 1e-3
    epochs: int = 200
    batch_size: int = 32
    patience: int = 20

    def __post_init__(self) -> None:
        if self.input_width < 1 or self.hidden < 1:
            raise ValueError("input_width and hidden must be positive")
        if self.layers != 3:
            raise ValueError("the forecaster is a fixed stack of 3 LSTM layers")
        if self.window != 7:
            raise ValueError("the input window is fixed at 7 days")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be positive, epochs >= 0")


@dataclass
class LstmParams:
    """Gate weights per layer plus the dense head.

    W[l] maps the layer input (width D_l), U[l] the previous hidden state;
    rows are the four gate blocks [input; forget; candidate; output].
    """

    W: list[np.ndarray]   # (4H, D_l)
    U: list[np.ndarray]   # (4H, H)
    b: list[np.ndarray]   # (4H,)
    w_out: np.ndarray     # (H,)
    b_out: float

    def arrays(self) -> list[np.ndarray]:
        return [*self.W, *self.U, *self.b, self.w_out, np.array([self.b_out])]

    def flatten(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def shapes(self) -> list[tuple[int, ...]]:
        return [a.shape for a in self.arrays()]

    @classmethod
    def from_flat(cls, flat: np.ndarray, config: "LstmConfig") -> "LstmParams":
        template = init_params(config)
        out_arrays = []
        pos = 0
        for arr in template.arrays():
            out_arrays.append(flat[pos : pos + arr.size].reshape(arr.shape).copy())
            pos += arr.size
        if pos != flat.size:
            raise ValueError("flat parameter vector has the wrong length")
        n = config.layers
        return cls(
            W=out_arrays[:n],
            U=out_arrays[n : 2 * n],
            b=out_arrays[2 * n : 3 * n],
            w_out=out_arrays[3 * n],
            b_out=float(out_arrays[3 * n + 1][0]),
        )

    def copy(self) -> "LstmParams":
        return LstmParams(
            [w.copy() for w in self.W],
            [u.copy() for u in self.U],
            [b.copy() for b in self.b],
            self.w_out.copy(),
            self.b_out,
        )


def init_params(config: LstmConfig, rng: Rng | None = None) -> LstmParams:
    """Uniform +-1/sqrt(fan_in) init; forget-gate biases start at 1.0."""
    rng = rng or Rng(config.seed)
    H = config.hidden
    W, U, b = [], [], []
    for layer in range(config.layers):
        d = config.input_width if layer == 0 else H
        bound_w = 1.0 / np.sqrt(d)
        bound_u = 1.0 / np.sqrt(H)
        W.append(rng.uniform_range(-bound_w, bound_w, (GATES * H, d)))
        U.append(rng.uniform_range(-bound_u, bound_u, (GATES * H, H)))
        bias = np.zeros(GATES * H)
        bias[H : 2 * H] = 1.0
        b.append(bias)
    w_out = rng.uniform_range(-1.0 / np.sqrt(H), 1.0 / np.sqrt(H), H)
    return LstmParams(W=W, U=U, b=b, w_out=w_out, b_out=0.0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward_batch(params: LstmParams, X: np.ndarray, keep_cache: bool):
    """Predictions for X of shape (B, T, D); optionally the full BPTT cache."""
    B, T, D = X.shape
    H = len(params.w_out)
    layers = len(params.W)
    cache = [] if keep_cache else None
    inputs = X
    for layer in range(layers):
        Wl, Ul, bl = params.W[layer], params.U[layer], params.b[layer]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs = np.empty((B, T, H))
        steps = []
        for t in range(T):
            x_t = inputs[:, t, :]
            z = x_t @ Wl.T + h @ Ul.T + bl
            i = _sigmoid(z[:, 0:H])
            f = _sigmoid(z[:, H : 2 * H])
            g = np.tanh(z[:, 2 * H : 3 * H])
            o = _sigmoid(z[:, 3 * H : 4 * H])
            c_new = f * c + i * g
            tanh_c = np.tanh(c_new)
            h_new = o * tanh_c
            if keep_cache:
                steps.append((x_t, h, c, i, f, g, o, tanh_c))
            h, c = h_new, c_new
            hs[:, t, :] = h
        if keep_cache:
            cache.append(steps)
        inputs = hs
    preds = inputs[:, -1, :] @ params.w_out + params.b_out
    return preds, inputs, cache


def forward(params: LstmParams, sequence: np.ndarray) -> float:
    """Scalar prediction for one (window, input_width) sequence."""
    seq = np.asarray(sequence, dtype=float)
    if seq.ndim != 2:
        raise ValueError("sequence must be a (window, input_width) matrix")
    expected = params.W[0].shape[1]
    if seq.shape[1] != expected:
        raise ValueError(f"sequence width {seq.shape[1]} != expected {expected}")
    preds, _, _ = _forward_batch(params, seq[None, :, :], keep_cache=False)
    return float(preds[0])


def loss_and_gradients(params: LstmParams, X: np.ndarray, y: np.ndarray):
    """Mean squared error over the batch and its gradients for every parameter."""
    B, T, _ = X.shape
    H = len(params.w_out)
    layers = len(params.W)
    preds, last_hs, cache = _forward_batch(params, X, keep_cache=True)
    err = preds - y
    loss = float(err @ err) / B
    dpred = 2.0 * err / B

    grads = LstmParams(
        W=[np.zeros_like(w) for w in params.W],
        U=[np.zeros_like(u) for u in params.U],
        b=[np.zeros_like(b) for b in params.b],
        w_out=last_hs[:, -1, :].T @ dpred,
        b_out=float(dpred.sum()),
    )
    # gradient flowing into each layer's hidden outputs, all timesteps
    dh_above = np.zeros((B, T, H))
    dh_above[:, -1, :] = np.outer(dpred, params.w_out)
    for layer in range(layers - 1, -1, -1):
        steps = cache[layer]
        Wl, Ul = params.W[layer], params.U[layer]
        d_in = Wl.shape[1]
        dx_all = np.empty((B, T, d_in))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            x_t, h_prev, c_prev, i, f, g, o, tanh_c = steps[t]
            dh = dh_above[:, t, :] + dh_next
            do = dh * tanh_c
            dc = dh * o * (1.0 - tanh_c**2) + dc_next
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dz = np.empty((B, GATES * H))
            dz[:, 0:H] = di * i * (1.0 - i)
            dz[:, H : 2 * H] = df * f * (1.0 - f)
            dz[:, 2 * H : 3 * H] = dg * (1.0 - g**2)
            dz[:, 3 * H : 4 * H] = do * o * (1.0 - o)
            grads.W[layer] += dz.T @ x_t
            grads.U[layer] += dz.T @ h_prev
            grads.b[layer] += dz.sum(axis=0)
            dx_all[:, t, :] = dz @ Wl
            dh_next = dz @ Ul
            dc_next = dc * f
        dh_above = dx_all  # becomes the output-gradient of the layer below
    return loss, grads


def gradient_check(
    params: LstmParams,
    sample_x: np.ndarray,
    sample_y: float,
    n_params: int = 200,
    step: float = 1e-5,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients
    over a random subsample of at least ``n_params`` parameters."""
    X = np.asarray(sample_x, dtype=float)[None, :, :]
    y = np.array([float(sample_y)])
    _, grads = loss_and_gradients(params, X, y)
    flat_params = params.flatten()
    flat_grads = grads.flatten()
    rng = Rng(seed)
    total = flat_params.size
    take = min(n_params, total)
    idx = rng.permutation(total)[:take]

    def loss_at(flat: np.ndarray) -> float:
        trial = _params_like(params, flat)
        preds, _, _ = _forward_batch(trial, X, keep_cache=False)
        e = preds - y
        return float(e @ e) / 1.0

    worst = 0.0
    for j in idx:
        bumped = flat_params.copy()
        bumped[j] += step
        up = loss_at(bumped)
        bumped[j] -= 2 * step
        down = loss_at(bumped)
        cd = (up - down) / (2 * step)
        a = flat_grads[j]
        rel = abs(a - cd) / (abs(a) + abs(cd) + 1e-12)
        worst = max(worst, rel)
    return worst


def _params_like(template: LstmParams, flat: np.ndarray) -> LstmParams:
    out_arrays = []
    pos = 0
    for arr in template.arrays():
        out_arrays.append(flat[pos : pos + arr.size].reshape(arr.shape))
        pos += arr.size
    n = len(template.W)
    return LstmParams(
        W=out_arrays[:n],
        U=out_arrays[n : 2 * n],
        b=out_arrays[2 * n : 3 * n],
        w_out=out_arrays[3 * n],
        b_out=float(out_arrays[3 * n + 1][0]),
    )


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray  # floored so constant features transform to zeros

    @classmethod
    def fit(cls, data: np.ndarray) -> "Standardizer":
        flat = data.reshape(-1, data.shape[-1]) if data.ndim == 3 else data.reshape(-1, 1)
        std = flat.std(axis=0)
        return cls(mean=flat.mean(axis=0), std=np.maximum(std, 1e-12))

    def transform(self, data: np.ndarray) -> np.ndarray:
        return (data - self.mean) / self.std

    def inverse(self, data: np.ndarray) -> np.ndarray:
        return data * self.std + self.mean


@dataclass
class TrainedLstm:
    config: LstmConfig
    params: LstmParams
    x_scaler: Standardizer
    y_scaler: Standardizer
    history: dict[str, list[float]] = field(default_factory=dict)

    def predict(self, sequences: np.ndarray) -> np.ndarray:
        X = np.asarray(sequences, dtype=float)
        single = X.ndim == 2
        if single:
            X = X[None, :, :]
        preds, _, _ = _forward_batch(self.params, self.x_scaler.transform(X), keep_cache=False)
        out = self.y_scaler.inverse(preds.reshape(-1, 1)).ravel()
        return out[0] if single else out


class _MomentState:
    """Per-parameter adaptive step sizes from first/second moment estimates."""

    def __init__(self, size: int, lr: float, beta1: float = 0.9, beta2: float = 0.999):
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.lr, self.beta1, self.beta2 = lr, beta1, beta2
        self.t = 0

    def step(self, flat_params: np.ndarray, flat_grads: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * flat_grads
        self.v = self.beta2 * self.v + (1 - self.beta2) * flat_grads**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return flat_params - self.lr * m_hat / (np.sqrt(v_hat) + 1e-8)


def split_80_20(n: int) -> tuple[slice, slice]:
    cut = int(n * 0.8)
    return slice(0, cut), slice(cut, n)


def train(config: LstmConfig, X: np.ndarray, y: np.ndarray) -> TrainedLstm:
    """Fit on the first 80% of the sample (time order); the last 20% is untouched.

    Within the training block the final 10% serves as a validation slice for
    early stopping. Raises ``RuntimeError("diverged ...")`` on a NaN loss.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 3 or X.shape[0] != y.shape[0]:
        raise ValueError("X must be (n, window, width) aligned with y")
    if X.shape[1] != config.window or X.shape[2] != config.input_width:
        raise ValueError("sequence shape does not match the config")
    train_slice, _ = split_80_20(len(y))
    X_train, y_train = X[train_slice], y[train_slice]
    if len(y_train) < 100:
        raise ValueError(f"need >= 100 training sequences, got {len(y_train)}")

    x_scaler = Standardizer.fit(X_train)
    y_scaler = Standardizer.fit(y_train.reshape(-1, 1))
    Xs = x_scaler.transform(X_train)
    ys = y_scaler.transform(y_train.reshape(-1, 1)).ravel()

    n_val = max(1, len(ys) // 10)
    X_fit, y_fit = Xs[:-n_val], ys[:-n_val]
    X_val, y_val = Xs[-n_val:], ys[-n_val:]

    rng = Rng(config.seed)
    params = init_params(config, rng)
    history: dict[str, list[float]] = {"train_loss": [], "val_loss": []}
    if config.epochs == 0:
        return TrainedLstm(config, params, x_scaler, y_scaler, history)

    opt = _MomentState(params.flatten().size, config.learning_rate)
    best_val = np.inf
    best_params = params.copy()
    since_best = 0
    for epoch in range(config.epochs):
        order = rng.permutation(len(y_fit))
        epoch_losses = []
        for lo in range(0, len(order), config.batch_size):
            batch = order[lo : lo + config.batch_size]
            loss, grads = loss_and_gradients(params, X_fit[batch], y_fit[batch])
            if not np.isfinite(loss):
                raise RuntimeError(f"diverged: non-finite loss at epoch {epoch}")
            params = _params_like(params, opt.step(params.flatten(), grads.flatten()))
            params = params.copy()
            epoch_losses.append(loss)
        val_preds, _, _ = _forward_batch(params, X_val, keep_cache=False)
        val_loss = float(np.mean((val_preds - y_val) ** 2))
        if not np.isfinite(val_loss):
            raise RuntimeError(f"diverged: non-finite validation loss at epoch {epoch}")
        history["train_loss"].append(float(np.mean(epoch_losses)))
        history["val_loss"].append(val_loss)
        if val_loss < best_val - 1e-12:
            best_val = val_loss
            best_params = params.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                break
    return TrainedLstm(config, best_params, x_scaler, y_scaler, history)


def save_trained(path: str | Path, model: TrainedLstm) -> None:
    """Flat float64 parameter blob prefixed by a one-line JSON shape header."""
    header = {
        "config": asdict(model.config),
        "x_mean": model.x_scaler.mean.tolist(),
        "x_std": model.x_scaler.std.tolist(),
        "y_mean": model.y_scaler.mean.tolist(),
        "y_std": model.y_scaler.std.tolist(),
        "shapes": [list(s) for s in model.params.shapes()],
        "format": "volfactors-lstm-v1",
    }
    flat = model.params.flatten()
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode("utf-8"))
        fh.write(b"\n")
        fh.write(flat.astype("<f8").tobytes())


def load_trained(path: str | Path) -> TrainedLstm:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != "volfactors-lstm-v1":
        raise ValueError(f"{path}: not a recognized parameter file")
    config = LstmConfig(**header["config"])
    flat = np.frombuffer(blob, dtype="<f8").copy()
    params = LstmParams.from_flat(flat, config)
    x_scaler = Standardizer(np.array(header["x_mean"]), np.array(header["x_std"]))
    y_scaler = Standardizer(np.array(header["y_mean"]), np.array(header["y_std"]))
    return TrainedLstm(config, params, x_scaler, y_scaler)


def build_sequences(
    rv_values: np.ndarray,
    factor_matrix: np.ndarray | None,
    window: int,
    h: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(X, y, origins): windows of (RV, factors) rows and their horizon targets.

    ``factor_matrix`` is (T, S) aligned to the daily series with NaN rows
    before the factor burn-in; origins require a fully finite window and a
    realized target.
    """
    from .models import horizon_target  # local import to keep the dependency one-way

    T = len(rv_values)
    S = 0 if factor_matrix is None else factor_matrix.shape[1]
    feats = rv_values[:, None] if S == 0 else np.hstack([rv_values[:, None], factor_matrix])
    X, y, origins = [], [], []
    for t in range(window - 1, T - h):
        block = feats[t - window + 1 : t + 1]
        if not np.all(np.isfinite(block)):
            continue
        X.append(block)
        y.append(horizon_target(rv_values, t, h))
        origins.append(t)
    if not X:
        raise ValueError("no valid sequences: series too short or factors all missing")
    return np.array(X), np.array(y), np.array(origins)


def lstm_forecast_series(
    panel,
    asset: str,
    factor_config=None,
    h: int = 1,
    seed: int = 0,
    hidden: int = 32,
    layers: int = 3,
    window: int = 7,
    learning_rate: float = 1e-3,
    epochs: int = 200,
    batch_size: int = 32,
    patience: int = 20,
):
    """80:20 out-of-sample LSTM run for one (asset, horizon).

    Trains on the first 80% of valid origins and predicts the remaining 20%.
    The factor count is selected from spectra up to the last training origin
    only. Returns ``(ForecastSeries, TrainedLstm)``.
    """
    from .factors import extract_factors
    from .models import (
        FactorConfig,
        ForecastSeries,
        _aligned_factor_matrix,
        _truncate_path,
        select_factor_count,
    )

    if factor_config is None:
        factor_config = FactorConfig(enabled=False)
    rv = panel.series(asset)
    augmented = factor_config.enabled
    factor_matrix = None
    if augmented:
        path = extract_factors(panel, factor_config.window, k=panel.p)
        # locate origins via the k=1 alignment first (alignment does not depend on S)
        probe = _aligned_factor_matrix(rv, _truncate_path(path, 1), None)
        _, _, origins = build_sequences(rv.values, probe, window, h)
        cut = int(len(origins) * 0.8)
        last_train_date = rv.dates[int(origins[cut - 1])]
        through = max(i for i, d in enumerate(path.dates) if d <= last_train_date)
        S = factor_config.k_override or select_factor_count(path, factor_config.policy, through)
        factor_matrix = _aligned_factor_matrix(rv, _truncate_path(path, S), None)
    X, y, origins = build_sequences(rv.values, factor_matrix, window, h)
    config = LstmConfig(
        seed=seed,
        input_width=X.shape[2],
        hidden=hidden,
        layers=layers,
        window=window,
        learning_rate=learning_rate,
        epochs=epochs,
        batch_size=batch_size,
        patience=patience,
    )
    model = train(config, X, y)
    _, test_slice = split_80_20(len(y))
    preds = model.predict(X[test_slice])
    test_origins = origins[test_slice]
    series = ForecastSeries(
        origin_dates=[rv.dates[int(t)] for t in test_origins],
        horizon=h,
        actuals=y[test_slice],
        predictions=np.asarray(preds),
        model="lstm_aug" if augmented else "lstm",
        asset=asset,
    )
    return series, model
