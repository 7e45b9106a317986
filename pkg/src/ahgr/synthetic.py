"""GN-net style attributed benchmark graphs with injected source inconsistency.

128 nodes in 4 planted clusters of 32; 128 attributes in 4 blocks of 32, block
``s`` being relevant to cluster ``s``.  Inconsistency cases:

* ``swap_attributes`` (case 1): a fraction of nodes exchange attribute rows.
* ``swap_topology``   (case 2): a fraction of nodes exchange positions in A.
* ``attr_noise``      (case 3): noise set through ``h_out``.
* ``topo_noise``      (case 4): noise set through ``z_out``.
"""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import basic, evaluation, fusion, reweighting
from .errors import ParameterError
from .graph import AttributedGraph

log = logging.getLogger(__name__)

CASES = ("none", "swap_attributes", "swap_topology", "attr_noise", "topo_noise")
CASE_BY_ID = {0: "none", 1: "swap_attributes", 2: "swap_topology", 3: "attr_noise", 4: "topo_noise"}

# delta_A (case 1, 3) or delta_T (case 2, 4) per sweep point for the
# prior-knowledge runs; the noise schedule has 12 entries for 13 points so the
# last value is repeated.
SWAP_DELTA_SCHEDULE = (1, 1, 2, 2, 3, 5, 5, 10, 10, 10, 10)
NOISE_DELTA_SCHEDULE = (1, 1, 1, 1, 1, 1, 1, 1, 2, 2, 5, 5)

METHODS = ("NMF-T", "NMF-A", "AHGR")
INDICATORS = ("rho_T", "rho_A")


@dataclass(frozen=True)
class SyntheticSpec:
    z_in: float = 8.0
    z_out: float = 8.0
    h_in: float = 8.0
    h_out: float = 8.0
    case: str = "none"
    gamma_inc: float = 0.0
    seed: int = 0
    n_clusters: int = 4
    p: int = 32
    q: int = 32
    cross_cluster_swaps_only: bool = False

    def __post_init__(self):
        if self.case not in CASES:
            raise ParameterError(f"unknown case {self.case!r}; expected one of {CASES}")
        if not 0.0 <= self.gamma_inc <= 1.0:
            raise ParameterError(f"gamma_inc must lie in [0, 1], got {self.gamma_inc}")
        for name in ("z_in", "z_out", "h_in", "h_out"):
            if getattr(self, name) < 0:
                raise ParameterError(f"{name} must be non-negative")
        if self.z_in > self.p or self.z_out > (self.n_clusters - 1) * self.p:
            raise ParameterError("degree parameters imply probabilities above 1")
        if self.h_in > self.q or self.h_out > (self.n_clusters - 1) * self.q:
            raise ParameterError("attribute parameters imply probabilities above 1")

    @property
    def n_nodes(self) -> int:
        return self.n_clusters * self.p

    @property
    def n_attrs(self) -> int:
        return self.n_clusters * self.q

    @classmethod
    def for_case(cls, case, value: float = 0.0, seed: int = 0, total: float = 16.0) -> "SyntheticSpec":
        """Spec for one sweep point: ``value`` is gamma for cases 1/2 and the
        swept ``h_out``/``z_out`` for cases 3/4; the other side stays at 8."""
        case = CASE_BY_ID.get(case, case)
        if case in ("none", "swap_attributes", "swap_topology"):
            return cls(8.0, 8.0, 8.0, 8.0, case, float(value), seed)
        if case == "attr_noise":
            return cls(8.0, 8.0, total - value, float(value), case, 0.0, seed)
        if case == "topo_noise":
            return cls(total - value, float(value), 8.0, 8.0, case, 0.0, seed)
        raise ParameterError(f"unknown case {case!r}")


def block_labels(n_clusters: int, size: int) -> np.ndarray:
    return np.repeat(np.arange(n_clusters), size)


def generate(spec: SyntheticSpec) -> AttributedGraph:
    rng = np.random.default_rng(spec.seed)
    k, p, q = spec.n_clusters, spec.p, spec.q
    labels = block_labels(k, p)
    n, m = spec.n_nodes, spec.n_attrs

    same = labels[:, None] == labels[None, :]
    P = np.where(same, spec.z_in / p, spec.z_out / ((k - 1) * p))
    draws = rng.random((n, n)) < P
    A = np.triu(draws, 1)
    A = (A | A.T).astype(float)

    attr_block = np.repeat(np.arange(k), q)
    own = labels[:, None] == attr_block[None, :]
    Q = np.where(own, spec.h_in / q, spec.h_out / ((k - 1) * q))
    C = (rng.random((n, m)) < Q).astype(float)

    A, C = apply_inconsistency(A, C, labels, spec, rng)
    return AttributedGraph(A, C, labels)


def swap_pairs(labels, gamma: float, rng, cross_cluster_only: bool = False) -> np.ndarray:
    """Random disjoint node pairs covering ``floor(gamma * N)`` nodes (minus one if odd)."""
    n = len(labels)
    count = int(np.floor(gamma * n + 1e-9))
    chosen = rng.choice(n, size=count, replace=False)
    if count % 2:
        chosen = np.delete(chosen, rng.integers(count))
    if cross_cluster_only:
        return _cross_cluster_pairs(chosen, labels, rng)
    chosen = rng.permutation(chosen)
    return chosen.reshape(-1, 2)


def _cross_cluster_pairs(chosen, labels, rng):
    pool = list(rng.permutation(chosen))
    pairs = []
    while pool:
        a = pool.pop()
        for i in range(len(pool) - 1, -1, -1):
            if labels[pool[i]] != labels[a]:
                pairs.append((a, pool.pop(i)))
                break
    return np.asarray(pairs, dtype=int).reshape(-1, 2)


def apply_inconsistency(A, C, labels, spec: SyntheticSpec, rng=None):
    """Return modified copies of ``(A, C)``; labels are never touched."""
    A = np.array(A, dtype=float)
    C = np.array(C, dtype=float)
    if spec.case not in ("swap_attributes", "swap_topology") or spec.gamma_inc == 0:
        return A, C
    rng = rng if rng is not None else np.random.default_rng(spec.seed)
    pairs = swap_pairs(labels, spec.gamma_inc, rng, spec.cross_cluster_swaps_only)
    perm = np.arange(len(labels))
    perm[pairs[:, 0]] = pairs[:, 1]
    perm[pairs[:, 1]] = pairs[:, 0]
    if spec.case == "swap_attributes":
        C = C[perm]
    else:
        A = A[np.ix_(perm, perm)]
    return A, C


def delta_schedule(case: str, value: float) -> float:
    if case in ("swap_attributes", "swap_topology"):
        idx = int(round(value * 10))
        return float(SWAP_DELTA_SCHEDULE[min(max(idx, 0), len(SWAP_DELTA_SCHEDULE) - 1)])
    idx = int(round(value))
    return float(NOISE_DELTA_SCHEDULE[min(max(idx, 0), len(NOISE_DELTA_SCHEDULE) - 1)])


@dataclass(frozen=True)
class SweepConfig:
    """Embedding, fusion and evaluation settings for a synthetic sweep."""

    K: int = 8
    lambda_t: float = 5.0
    lambda_a: float = 1.0
    delta_t: float = 1.0
    delta_a: float = 1.0
    delta_y: float = 1.0
    prior_schedule: bool = False
    snmf_tol: float = 1e-6
    snmf_max_iter: int = 1000
    tol: float = 1e-6
    max_iter: int = 1000
    restarts: int = 10
    kmeans_runs: int = 100
    seed: int = 0


def run_trial(case: str, value: float, trial_seed: int, cfg: SweepConfig) -> dict:
    """Generate one graph and return the mean NMI of each method plus indicators."""
    case = CASE_BY_ID.get(case, case)
    graph = generate(SyntheticSpec.for_case(case, value, seed=trial_seed))
    views = reweighting.build_views(graph, h_max=1, include_attributes=True)
    emb_t = basic.snmf_embed(views[0].matrix, basic.SnmfConfig(
        cfg.K, cfg.lambda_t, cfg.snmf_tol, cfg.snmf_max_iter))
    emb_a = basic.snmf_embed(views[1].matrix, basic.SnmfConfig(
        cfg.K, cfg.lambda_a, cfg.snmf_tol, cfg.snmf_max_iter))

    delta_t, delta_a = cfg.delta_t, cfg.delta_a
    if cfg.prior_schedule:
        if case in ("swap_attributes", "attr_noise"):
            delta_a = delta_schedule(case, value)
        elif case in ("swap_topology", "topo_noise"):
            delta_t = delta_schedule(case, value)
    fres = fusion.fit([emb_t.X_hat, emb_a.X_hat], fusion.FusionConfig(
        cfg.K, (delta_t, delta_a), cfg.delta_y, cfg.tol, cfg.max_iter, cfg.restarts, trial_seed))

    k = graph.n_classes
    out = {}
    for name, Z in zip(METHODS, (emb_t.X, emb_a.X, fres.Y)):
        rep = evaluation.evaluate_clustering(Z, graph.labels, k, cfg.kmeans_runs, seed=trial_seed)
        out[name] = rep.nmi_mean
    out["rho_T"], out["rho_A"] = fres.rho
    return out


def _trial_job(args):
    return run_trial(*args)


def run_case_sweep(case, values: Sequence[float], trials: int, cfg: Optional[SweepConfig] = None,
                   jobs: int = 1) -> list[tuple[float, str, float, float]]:
    """Rows ``(sweep_value, series, mean, std)`` over ``trials`` graphs per value.

    Series are the three methods followed by the two consistency indicators.
    Trial seeds derive from ``(cfg.seed, sweep index, trial index)`` so results
    do not depend on ``jobs``.
    """
    cfg = cfg or SweepConfig()
    case = CASE_BY_ID.get(case, case)
    if case not in CASES:
        raise ParameterError(f"unknown case {case!r}")
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    tasks = []
    for si, v in enumerate(values):
        for t in range(trials):
            seed = int(np.random.SeedSequence([cfg.seed, si, t]).generate_state(1)[0])
            tasks.append((case, float(v), seed, cfg))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_trial_job, tasks))
    else:
        results = [_trial_job(t) for t in tasks]

    rows = []
    for si, v in enumerate(values):
        chunk = results[si * trials:(si + 1) * trials]
        for series in METHODS + INDICATORS:
            vals = np.array([r[series] for r in chunk])
            rows.append((float(v), series, float(vals.mean()), float(vals.std())))
        log.info("case %s value %g: %s", case, v,
                 ", ".join(f"{r[1]}={r[2]:.3f}" for r in rows[-5:]))
    return rows


def write_sweep_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep", "series", "mean", "std"])
        for v, s, m, sd in rows:
            w.writerow(["%.6g" % v, s, "%.6g" % m, "%.6g" % sd])
