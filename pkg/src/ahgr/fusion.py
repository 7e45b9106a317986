"""Fuse normalised basic embeddings into one embedding with transition matrices.

Solves::

    min_{Y >= 0, U_l >= 0}  sum_l ||Y U_l - Xhat_l||_F^2 + delta_l ||U_l||_F^2
                            + delta ||Y||_F^2

by alternating one multiplicative Y update with one update per U_l.  Each
source's transition matrix U_l also yields a consistency score rho_l in
[0, 1]: column-concentrated (near-permutation) transitions score high,
flat ones score low.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import NumericalError, ParameterError

log = logging.getLogger(__name__)

EPS = 1e-12


@dataclass(frozen=True)
class FusionConfig:
    K: int
    delta_per_source: Sequence[float]
    delta_y: float = 1.0
    tol: float = 1e-6
    max_iter: int = 1000
    restarts: int = 10
    seed: int = 0
    epsilon: float = EPS

    def __post_init__(self):
        object.__setattr__(self, "delta_per_source", tuple(float(d) for d in self.delta_per_source))
        if self.K < 1:
            raise ParameterError(f"K must be >= 1, got {self.K}")
        if not self.delta_per_source:
            raise ParameterError("at least one source is required")
        if any(d < 0 for d in self.delta_per_source) or self.delta_y < 0:
            raise ParameterError("regularisation weights must be non-negative")
        if self.restarts < 1:
            raise ParameterError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iter < 0:
            raise ParameterError(f"max_iter must be >= 0, got {self.max_iter}")
        if not self.tol >= 0:
            raise ParameterError(f"tol must be >= 0, got {self.tol}")
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be > 0, got {self.epsilon}")

    @property
    def n_sources(self) -> int:
        return len(self.delta_per_source)


@dataclass(frozen=True)
class FusionResult:
    Y: np.ndarray
    U: list
    rho: list
    objective_trace: list
    winning_restart: int = 0
    restart_objectives: list = field(default_factory=list)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]


def _check_shapes(Y, U_list, Xhat_list):
    if len(U_list) != len(Xhat_list):
        raise ParameterError(f"{len(U_list)} transition matrices for {len(Xhat_list)} sources")
    n, k = Y.shape
    for l, (U, X) in enumerate(zip(U_list, Xhat_list)):
        if U.shape != (k, k):
            raise ParameterError(f"U[{l}] has shape {U.shape}, expected {(k, k)}")
        if X.shape != (n, k):
            raise ParameterError(f"Xhat[{l}] has shape {X.shape}, expected {(n, k)}")


def objective(Y, U_list, Xhat_list, delta_per_source, delta_y) -> float:
    Y = np.asarray(Y, dtype=float)
    _check_shapes(Y, U_list, Xhat_list)
    if len(delta_per_source) != len(U_list):
        raise ParameterError("one delta per source is required")
    total = delta_y * (Y * Y).sum()
    for U, X, d in zip(U_list, Xhat_list, delta_per_source):
        R = Y @ U - X
        total += (R * R).sum() + d * (U * U).sum()
    return float(total)


def y_objective(Y, U_list, Xhat_list, delta_y) -> float:
    """Objective restricted to the terms depending on Y."""
    total = delta_y * (Y * Y).sum()
    for U, X in zip(U_list, Xhat_list):
        R = Y @ U - X
        total += (R * R).sum()
    return float(total)


def y_gradient(Y, U_list, Xhat_list, delta_y) -> np.ndarray:
    G = 2.0 * delta_y * Y
    for U, X in zip(U_list, Xhat_list):
        G += 2.0 * (Y @ U @ U.T - X @ U.T)
    return G


def u_objective(Y, U, Xhat, delta) -> float:
    R = Y @ U - Xhat
    return float((R * R).sum() + delta * (U * U).sum())


def u_gradient(Y, U, Xhat, delta) -> np.ndarray:
    return 2.0 * (Y.T @ Y @ U - Y.T @ Xhat) + 2.0 * delta * U


def y_step(Y, U_list, Xhat_list, delta_y, epsilon=EPS) -> np.ndarray:
    k = Y.shape[1]
    num = sum(X @ U.T for U, X in zip(U_list, Xhat_list))
    gram = sum(U @ U.T for U in U_list) + delta_y * np.eye(k)
    Y = Y * (num / (Y @ gram + epsilon))
    if not np.isfinite(Y).all():
        raise NumericalError("non-finite value in Y update")
    return Y


def u_step(Y, U, Xhat, delta, epsilon=EPS) -> np.ndarray:
    num = Y.T @ Xhat
    den = (Y.T @ Y) @ U + delta * U + epsilon
    U = U * (num / den)
    if not np.isfinite(U).all():
        raise NumericalError("non-finite value in U update")
    return U


def consistency_indicator(U, epsilon=EPS) -> float:
    """Mean rescaled squared norm of the column-stochastic form of ``U``.

    After normalising each column to sum to one its squared norm lies in
    [1/K, 1]; the score maps that range linearly onto [0, 1] and averages
    over columns.  Columns summing to at most ``epsilon`` count as uniform.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ParameterError(f"U must be square, got {U.shape}")
    K = U.shape[0]
    if K < 2:
        raise ParameterError("consistency indicator needs K >= 2")
    sums = U.sum(axis=0)
    ok = sums > epsilon
    Uhat = U[:, ok] / sums[ok]
    score = np.zeros(K)
    score[ok] = (K * (Uhat * Uhat).sum(axis=0) - 1.0) / (K - 1.0)
    # pin the two extremes so that they come out exact rather than within an ulp
    score[ok & (U.max(axis=0) == sums)] = 1.0
    score[ok & (U.max(axis=0) == U.min(axis=0))] = 0.0
    return float(min(max(score.mean(), 0.0), 1.0))


def column_sq_norms(U) -> np.ndarray:
    """Squared norms of the columns of ``U`` after scaling each to sum 1."""
    U = np.asarray(U, dtype=float)
    return ((U / U.sum(axis=0)) ** 2).sum(axis=0)


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng([seed, restart])


def random_init(n, k, L, rng) -> tuple[np.ndarray, list]:
    lo = np.finfo(float).tiny
    Y = rng.uniform(lo, 1.0, size=(n, k))
    U = [rng.uniform(lo, 1.0, size=(k, k)) for _ in range(L)]
    return Y, U


def run_single(Y, U_list, Xhat_list, cfg: FusionConfig):
    """One descent from a given start; returns ``(Y, U_list, trace)``."""
    Y = np.array(Y, dtype=float)
    U_list = [np.array(U, dtype=float) for U in U_list]
    deltas = cfg.delta_per_source
    obj = objective(Y, U_list, Xhat_list, deltas, cfg.delta_y)
    trace = [obj]
    for it in range(1, cfg.max_iter + 1):
        Y = y_step(Y, U_list, Xhat_list, cfg.delta_y, cfg.epsilon)
        for l in range(len(U_list)):
            U_list[l] = u_step(Y, U_list[l], Xhat_list[l], deltas[l], cfg.epsilon)
        new = objective(Y, U_list, Xhat_list, deltas, cfg.delta_y)
        if not np.isfinite(new):
            raise NumericalError(f"fusion objective became non-finite at iteration {it}")
        trace.append(new)
        rel = abs(obj - new) / max(obj, cfg.epsilon)
        obj = new
        if rel < cfg.tol:
            break
    return Y, U_list, trace


def fit(Xhat_list, cfg: FusionConfig, init: Optional[tuple] = None) -> FusionResult:
    """Run ``cfg.restarts`` random restarts and keep the lowest final objective.

    ``init`` may supply an explicit ``(Y0, [U0_l])`` start, in which case a
    single run is performed from it.
    """
    Xhat_list = [np.asarray(X, dtype=float) for X in Xhat_list]
    if not Xhat_list:
        raise ParameterError("at least one basic embedding is required")
    L = len(Xhat_list)
    if L != cfg.n_sources:
        raise ParameterError(f"{cfg.n_sources} deltas configured for {L} sources")
    n, k = Xhat_list[0].shape
    if k != cfg.K:
        raise ParameterError(f"basic embeddings have dimension {k}, config says K={cfg.K}")
    for l, X in enumerate(Xhat_list):
        if X.shape != (n, k):
            raise ParameterError(f"basic embedding {l} has shape {X.shape}, expected {(n, k)}")

    best = None
    finals = []
    failures = []
    n_runs = 1 if init is not None else cfg.restarts
    for r in range(n_runs):
        if init is not None:
            Y0, U0 = init
        else:
            Y0, U0 = random_init(n, k, L, restart_rng(cfg.seed, r))
        try:
            Y, U, trace = run_single(Y0, U0, Xhat_list, cfg)
        except NumericalError as exc:
            log.warning("fusion restart %d failed: %s", r, exc)
            failures.append(str(exc))
            finals.append(float("inf"))
            continue
        finals.append(trace[-1])
        if best is None or trace[-1] < best[2][-1]:
            best = (Y, U, trace, r)
    if best is None:
        raise NumericalError(f"all {n_runs} fusion restarts failed: " + "; ".join(failures))
    Y, U, trace, r = best
    # a 1x1 transition is trivially fully concentrated
    rho = [consistency_indicator(u, cfg.epsilon) if k > 1 else 1.0 for u in U]
    return FusionResult(Y, U, rho, trace, r, finals)
