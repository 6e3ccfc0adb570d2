"""Time-varying volatility factors from rolling second-moment eigenstructure.

For each date t with a full n-observation window, the local second moment

    M_t = (1/n) * sum_{s=t-n+1..t} y_s y_s'

is eigendecomposed; loadings are the top-k eigenvectors scaled by sqrt(p)
and the contemporaneous factor is the projection f_t = (1/p) * L_t' y_t.
M_t is the uncentered second moment, not a demeaned covariance: the window
average of outer products is used exactly as written.

Eigenvectors are sign-ambiguous, so a deterministic convention is applied:
each vector is flipped so its largest-magnitude entry is positive (ties
resolved to the lowest asset index). Fitted values L_t f_t are invariant to
this choice; regression coefficients and golden files are not, hence the
fixed rule.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date

import numpy as np

from .ingest import VolPanel

__all__ = [
    "SelectionPolicy",
    "FactorPath",
    "rolling_second_moment",
    "eigen_sym",
    "extract_factors",
    "explained_variance",
    "select_k",
    "weekly_factor",
    "reconstruct_residual",
]

DEFAULT_WINDOW = 60


@dataclass(frozen=True)
class SelectionPolicy:
    """How many factors to keep: the dominant one, or enough to clear a
    cumulative explained-variance threshold."""

    mode: str = "dominant"
    threshold: float = 0.9

    def __post_init__(self) -> None:
        if self.mode not in ("dominant", "variance_threshold"):
            raise ValueError(f"unknown selection mode {self.mode!r}")
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError("threshold must be in (0, 1]")


@dataclass(frozen=True)
class FactorPath:
    """Per-date loadings, factors, and eigenvalues for dates with a full window."""

    dates: list[date]
    k: int
    loadings: np.ndarray      # (Tw, p, k)
    factors: np.ndarray       # (Tw, k)
    eigenvalues: np.ndarray   # (Tw, p), descending per date

    def __post_init__(self) -> None:
        Tw = len(self.dates)
        if self.loadings.shape[0] != Tw or self.factors.shape != (Tw, self.k):
            raise ValueError("inconsistent factor path shapes")
        p = self.loadings.shape[1]
        if self.loadings.shape[2] != self.k or self.eigenvalues.shape != (Tw, p):
            raise ValueError("inconsistent factor path shapes")
        if Tw:
            gram = np.einsum("tpi,tpj->tij", self.loadings, self.loadings) / p
            if not np.allclose(gram, np.eye(self.k)[None, :, :], atol=1e-8):
                raise ValueError("loadings must satisfy L'L / p = I_k to 1e-8")
            if np.any(np.diff(self.eigenvalues, axis=1) > 1e-12):
                raise ValueError("eigenvalues must be sorted descending")

    @property
    def p(self) -> int:
        return self.loadings.shape[1]

    def date_index(self) -> dict[date, int]:
        return {d: i for i, d in enumerate(self.dates)}


def rolling_second_moment(panel: VolPanel, n: int, t: int) -> np.ndarray:
    """Uncentered second moment over the window {t-n+1, ..., t}."""
    if n < 1:
        raise ValueError("window length n must be >= 1")
    if t < n - 1:
        raise ValueError(f"window not yet full at index {t} for n={n}")
    if t >= panel.T:
        raise ValueError(f"index {t} out of range for panel of length {panel.T}")
    block = panel.values[t - n + 1 : t + 1]
    return block.T @ block / n


def eigen_sym(m: np.ndarray, asym_tol: float = 1e-8) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigenvalues and orthonormal eigenvectors of a symmetric matrix."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    scale = max(float(np.abs(m).max()), 1.0)
    if float(np.abs(m - m.T).max()) > asym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    eigvals, eigvecs = np.linalg.eigh(0.5 * (m + m.T))
    order = np.argsort(eigvals)[::-1]
    return eigvals[order], eigvecs[:, order]


def _apply_sign_convention(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-|.| entry is positive (tie: lowest index)."""
    flipped = vectors.copy()
    for j in range(vectors.shape[1]):
        idx = int(np.argmax(np.abs(vectors[:, j])))
        if vectors[idx, j] < 0:
            flipped[:, j] = -vectors[:, j]
    return flipped


def extract_factors(panel: VolPanel, n: int = DEFAULT_WINDOW, k: int = 1) -> FactorPath:
    """Loadings sqrt(p) * [u_1..u_k] and factors (1/p) L' y_t for every full-window date."""
    p = panel.p
    if not 1 <= k <= p:
        raise ValueError(f"need 1 <= k <= p, got k={k}, p={p}")
    if panel.T < n:
        raise ValueError(f"panel has {panel.T} rows, window needs {n}")
    Tw = panel.T - n + 1
    loadings = np.empty((Tw, p, k))
    factors = np.empty((Tw, k))
    eigenvalues = np.empty((Tw, p))
    sqrt_p = np.sqrt(p)
    # incremental window sum; each date still gets its own eigh
    block = panel.values[0:n]
    moment = block.T @ block
    for i in range(Tw):
        t = n - 1 + i
        if i > 0:
            y_in = panel.values[t]
            y_out = panel.values[t - n]
            moment += np.outer(y_in, y_in) - np.outer(y_out, y_out)
        eigvals, eigvecs = eigen_sym(moment / n)
        vecs = _apply_sign_convention(eigvecs[:, :k])
        lam = sqrt_p * vecs
        loadings[i] = lam
        factors[i] = lam.T @ panel.values[t] / p
        eigenvalues[i] = eigvals
    return FactorPath(
        dates=list(panel.dates[n - 1 :]),
        k=k,
        loadings=loadings,
        factors=factors,
        eigenvalues=eigenvalues,
    )


def explained_variance(eigenvalues: np.ndarray) -> np.ndarray:
    """Eigenvalue shares lambda_i / sum(lambda), clipped at zero."""
    eigvals = np.asarray(eigenvalues, dtype=float)
    if eigvals.ndim != 1:
        raise ValueError("expected a 1-d eigenvalue vector")
    if np.any(eigvals < -1e-10 * max(eigvals.max(initial=0.0), 1.0)):
        raise ValueError("eigenvalues must be non-negative")
    clipped = np.clip(eigvals, 0.0, None)
    total = clipped.sum()
    if total <= 0.0:
        raise ValueError("degenerate spectrum: all eigenvalues are zero")
    return clipped / total


def select_k(fractions: np.ndarray, policy: SelectionPolicy) -> int:
    """Factor count under the policy; threshold mode takes the smallest k
    whose cumulative share reaches the target."""
    fractions = np.asarray(fractions, dtype=float)
    if policy.mode == "dominant":
        return 1
    cumulative = np.cumsum(fractions)
    hit = np.nonzero(cumulative >= policy.threshold - 1e-12)[0]
    return int(hit[0]) + 1 if len(hit) else len(fractions)


def weekly_factor(path: FactorPath, h: int = 7) -> FactorPath:
    """Trailing h-observation mean of each factor coordinate.

    Output is aligned to the last date of each window and reuses that date's
    loadings and eigenvalues, so the path invariants still hold.
    """
    if len(path.dates) < h:
        raise ValueError(f"need at least {h} dates, got {len(path.dates)}")
    window = np.lib.stride_tricks.sliding_window_view(path.factors, h, axis=0)
    return FactorPath(
        dates=list(path.dates[h - 1 :]),
        k=path.k,
        loadings=path.loadings[h - 1 :].copy(),
        factors=window.mean(axis=2),
        eigenvalues=path.eigenvalues[h - 1 :].copy(),
    )


def reconstruct_residual(path: FactorPath, panel: VolPanel) -> np.ndarray:
    """Implied idiosyncratic term y_t - L_t f_t on the path's dates."""
    index = {d: i for i, d in enumerate(panel.dates)}
    rows = [index[d] for d in path.dates]
    fitted = np.einsum("tpk,tk->tp", path.loadings, path.factors)
    return panel.values[rows] - fitted
