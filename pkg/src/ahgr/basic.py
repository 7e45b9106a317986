"""Per-source basic embeddings by regularised symmetric NMF.

Minimises ``0.5 * ||M - X X^T||_F^2 + lam * ||X||_F^2`` over ``X >= 0`` with
the multiplicative ratio ``R = (M X) / (X X^T X + lam X + eps)``, applied as
``X <- X * (1 - beta + beta * R)``.  ``beta = 1`` is the plain rule; it
oscillates on symmetric problems (scaling X by c scales R by ~1/c^2), so the
default ``beta = 0.5`` damps it without moving the fixed points.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import FormatError, NumericalError, ParameterError
from .graph import load_embedding
from .reweighting import mnorm, znorm

log = logging.getLogger(__name__)

EPS = 1e-12


@dataclass(frozen=True)
class SnmfConfig:
    K: int
    lam: float = 1.0
    tol: float = 1e-6
    max_iter: int = 1000
    epsilon: float = EPS
    init: str = "nndsvda"  # "nndsvd", "nndsvda" or "random"
    seed: Optional[int] = None
    damping: float = 0.5

    def __post_init__(self):
        if self.K < 1:
            raise ParameterError(f"K must be >= 1, got {self.K}")
        if self.lam < 0:
            raise ParameterError(f"lambda must be >= 0, got {self.lam}")
        if not self.tol > 0:
            raise ParameterError(f"tol must be > 0, got {self.tol}")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")
        if self.max_iter < 0:
            raise ParameterError(f"max_iter must be >= 0, got {self.max_iter}")
        if self.init not in ("nndsvd", "nndsvda", "random"):
            raise ParameterError(f"unknown init {self.init!r}")
        if not 0 < self.damping <= 1:
            raise ParameterError(f"damping must lie in (0, 1], got {self.damping}")


@dataclass(frozen=True)
class BasicEmbedding:
    X: np.ndarray
    X_hat: np.ndarray
    source_id: int = 0
    final_objective: float = float("nan")
    iterations: int = 0
    objective_trace: list = field(default_factory=list, repr=False)


def nndsvd_init(M, K: int, epsilon: float = EPS, fill_zeros: bool = False) -> np.ndarray:
    """NNDSVD starting point for a symmetric non-negative ``M``.

    Uses the K eigenpairs of largest magnitude.  The leading column is
    ``sqrt(s1) * |u1|``; each further column keeps whichever of the positive
    or negative part of its eigenvector carries more mass.  Columns that end
    up all zero are set to ``epsilon``.

    With ``fill_zeros`` (the NNDSVDa variant) every remaining zero is replaced
    by the mean of ``M``; multiplicative updates can never move an exact zero.
    """
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if M.ndim != 2 or M.shape[1] != n:
        raise ParameterError(f"M must be square, got {M.shape}")
    if K > n:
        raise ParameterError(f"K={K} exceeds matrix size {n}")
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    w, V = np.linalg.eigh(M)
    order = np.argsort(-np.abs(w), kind="stable")[:K]
    X = np.zeros((n, K))
    for r, j in enumerate(order):
        sigma = abs(w[j])
        u = V[:, j]
        if r == 0:
            X[:, 0] = np.sqrt(sigma) * np.abs(u)
            continue
        up, um = np.maximum(u, 0), np.maximum(-u, 0)
        part = up if up @ up >= um @ um else um
        X[:, r] = np.sqrt(sigma) * part
    X = np.maximum(X, 0)
    X[:, ~X.any(axis=0)] = epsilon
    if fill_zeros:
        X[X == 0] = max(M.mean(), epsilon)
    return X


def snmf_objective(M, X, lam: float, m_sq: Optional[float] = None) -> float:
    """``0.5 * ||M - X X^T||_F^2 + lam * ||X||_F^2`` without forming X X^T."""
    if m_sq is None:
        m_sq = (M * M).sum()
    G = X.T @ X
    fit = m_sq - 2.0 * np.einsum("ij,ij->", X, M @ X) + (G * G).sum()
    return 0.5 * max(fit, 0.0) + lam * (X * X).sum()


def snmf_gradient(M, X, lam: float) -> np.ndarray:
    return -2.0 * M @ X + 2.0 * X @ (X.T @ X) + 2.0 * lam * X


def row_normalize(X) -> np.ndarray:
    """Z-score then min-max each row separately; constant rows become zeros."""
    X = np.asarray(X, dtype=float)
    out = np.zeros_like(X)
    for i, row in enumerate(X):
        out[i] = mnorm(znorm(row))
    return np.clip(out, 0.0, 1.0)


def snmf_embed(M, cfg: SnmfConfig, source_id: int = 0, X0=None) -> BasicEmbedding:
    M = np.asarray(M, dtype=float)
    n = M.shape[0]
    if X0 is not None:
        X = np.array(X0, dtype=float)
        if X.shape != (n, cfg.K) or np.any(X < 0):
            raise ParameterError("X0 must be a non-negative N x K matrix")
    elif cfg.init in ("nndsvd", "nndsvda"):
        X = nndsvd_init(M, cfg.K, cfg.epsilon, fill_zeros=cfg.init == "nndsvda")
    else:
        rng = np.random.default_rng(cfg.seed)
        X = rng.uniform(np.finfo(float).tiny, 1.0, size=(n, cfg.K))

    m_sq = (M * M).sum()
    obj = snmf_objective(M, X, cfg.lam, m_sq)
    trace = [obj]
    beta = cfg.damping
    it = 0
    for it in range(1, cfg.max_iter + 1):
        ratio = (M @ X) / (X @ (X.T @ X) + cfg.lam * X + cfg.epsilon)
        if beta == 1.0:
            X = X * ratio
        else:
            X = X * (1.0 - beta + beta * ratio)
        new = snmf_objective(M, X, cfg.lam, m_sq)
        if not np.isfinite(new):
            raise NumericalError(f"SNMF objective became non-finite at iteration {it}")
        trace.append(new)
        rel = abs(obj - new) / max(obj, cfg.epsilon)
        obj = new
        if rel < cfg.tol:
            break
    log.debug("snmf source %d: %d iterations, objective %.6g", source_id, it, obj)
    return BasicEmbedding(X, row_normalize(X), source_id, obj, it, trace)


def import_basic_embedding(path, expected_N: int, expected_K: Optional[int] = None,
                           source_id: int = 0) -> BasicEmbedding:
    """Load an externally computed embedding (e.g. from LINE) as a basic embedding.

    Arbitrary-sign vectors are accepted; row normalisation maps them into
    [0, 1].
    """
    raw = load_embedding(path)
    n, k = raw.shape
    if n != expected_N:
        raise FormatError(f"{path}: expected {expected_N} rows, got {n}")
    if expected_K is not None and k != expected_K:
        raise FormatError(f"{path}: expected dimension {expected_K}, got {k}")
    return BasicEmbedding(np.maximum(raw, 0.0), row_normalize(raw), source_id)
