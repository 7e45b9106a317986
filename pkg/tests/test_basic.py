import numpy as np
import pytest

from ahgr.basic import (
    SnmfConfig,
    import_basic_embedding,
    nndsvd_init,
    row_normalize,
    snmf_embed,
    snmf_gradient,
    snmf_objective,
)
from ahgr.errors import FormatError, ParameterError
from ahgr.evaluation import clustering_accuracy, kmeans
from ahgr.graph import save_embedding


def jacobi_eigh(M, sweeps=100):
    """Cyclic Jacobi eigen-solver, used as an independent reference."""
    A = np.array(M, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    for _ in range(sweeps):
        off = np.sqrt((A ** 2).sum() - (np.diag(A) ** 2).sum())
        if off < 1e-14:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(A[p, q]) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2 * A[p, q])
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta ** 2 + 1)) if theta else 1.0
                c = 1 / np.sqrt(t ** 2 + 1)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q], J[q, p] = s, -s
                A = J.T @ A @ J
                V = V @ J
    return np.diag(A), V


def best_rank_error(M, k):
    w, V = jacobi_eigh(M)
    idx = np.argsort(-np.abs(w))[:k]
    approx = (V[:, idx] * w[idx]) @ V[:, idx].T
    return np.linalg.norm(M - approx)


def test_jacobi_reference_sanity():
    rng = np.random.default_rng(0)
    B = rng.random((6, 6))
    M = B + B.T
    w, V = jacobi_eigh(M)
    np.testing.assert_allclose((V * w) @ V.T, M, atol=1e-10)


def test_nndsvd_rank_one():
    u = np.array([0.2, 0.5, 0.1, 0.8])
    u /= np.linalg.norm(u)
    X = nndsvd_init(3.0 * np.outer(u, u), 1)
    np.testing.assert_allclose(X[:, 0], np.sqrt(3.0) * u, atol=1e-8)


def test_nndsvd_identity_matches_best_rank_two():
    M = np.eye(4)
    X = nndsvd_init(M, 2)
    assert np.linalg.norm(M - X @ X.T) <= best_rank_error(M, 2) + 1e-6


def test_nndsvd_nonnegative_and_shape():
    rng = np.random.default_rng(1)
    for _ in range(10):
        B = rng.random((12, 12))
        X = nndsvd_init(B + B.T, 5)
        assert X.shape == (12, 5)
        assert X.min() >= 0


def test_nndsvd_fill_removes_zeros():
    M = np.eye(4)
    X = nndsvd_init(M, 2, fill_zeros=True)
    assert X.min() > 0


def test_nndsvd_k_too_large():
    with pytest.raises(ParameterError):
        nndsvd_init(np.eye(3), 4)


def test_snmf_rank_one_recovery():
    x = np.array([0.1, 0.4, 0.3, 0.7, 0.5])
    x /= np.linalg.norm(x)
    M = np.outer(x, x)
    emb = snmf_embed(M, SnmfConfig(1, lam=0.0, tol=1e-12, max_iter=5000))
    assert emb.final_objective < 1e-6
    assert np.linalg.norm(emb.X @ emb.X.T - M) < 1e-3


def test_snmf_identity():
    emb = snmf_embed(np.eye(2), SnmfConfig(2, lam=0.0, tol=1e-12, max_iter=5000))
    assert emb.final_objective < 1e-3


def test_snmf_block_diagonal_clusters():
    M = np.zeros((10, 10))
    M[:5, :5] = 1
    M[5:, 5:] = 1
    emb = snmf_embed(M, SnmfConfig(2, lam=0.0))
    truth = np.repeat([0, 1], 5)
    for seed in range(5):
        assert clustering_accuracy(kmeans(emb.X, 2, seed), truth) == 1.0


def test_snmf_objective_matches_direct():
    rng = np.random.default_rng(2)
    B = rng.random((9, 9))
    M, X = B + B.T, rng.random((9, 3))
    direct = 0.5 * np.linalg.norm(M - X @ X.T) ** 2 + 0.7 * np.linalg.norm(X) ** 2
    assert snmf_objective(M, X, 0.7) == pytest.approx(direct, rel=1e-12)


def test_snmf_gradient_finite_differences():
    rng = np.random.default_rng(3)
    h = 1e-6
    for _ in range(20):
        B = rng.random((15, 15))
        M, X, lam = B + B.T, rng.random((15, 3)), rng.uniform(0, 2)
        G = snmf_gradient(M, X, lam)
        F = np.zeros_like(X)
        for idx in np.ndindex(*X.shape):
            E = np.zeros_like(X)
            E[idx] = h
            F[idx] = (snmf_objective(M, X + E, lam) - snmf_objective(M, X - E, lam)) / (2 * h)
        assert np.linalg.norm(G - F) / np.linalg.norm(F) < 1e-4


def test_snmf_nonnegative_and_endpoint_descent():
    rng = np.random.default_rng(4)
    for seed in range(10):
        B = rng.random((20, 20)) < 0.3
        M = (B | B.T).astype(float)
        for init in ("nndsvd", "nndsvda", "random"):
            emb = snmf_embed(M, SnmfConfig(4, lam=1.0, init=init, seed=seed))
            assert emb.X.min() >= 0
            assert emb.final_objective <= emb.objective_trace[0]
            assert 0 <= emb.X_hat.min() and emb.X_hat.max() <= 1


def test_snmf_deterministic():
    rng = np.random.default_rng(5)
    B = rng.random((15, 15))
    M = B + B.T
    a = snmf_embed(M, SnmfConfig(3))
    b = snmf_embed(M, SnmfConfig(3))
    assert np.array_equal(a.X, b.X)


def test_snmf_undamped_rule_available():
    emb = snmf_embed(np.eye(3), SnmfConfig(3, lam=0.0, damping=1.0, max_iter=10))
    assert emb.X.min() >= 0
    with pytest.raises(ParameterError):
        SnmfConfig(3, damping=0.0)


@pytest.mark.parametrize("row, expected", [
    ([0, 5, 10], [0, 0.5, 1]),
    ([3, 3, 3], [0, 0, 0]),
])
def test_row_normalize_examples(row, expected):
    np.testing.assert_allclose(row_normalize(np.array([row], dtype=float))[0], expected, atol=1e-15)


def test_row_normalize_range():
    X = np.random.default_rng(6).normal(size=(30, 7)) * 50
    out = row_normalize(X)
    assert out.min() >= 0 and out.max() <= 1
    np.testing.assert_allclose(out.min(axis=1), 0)
    np.testing.assert_allclose(out.max(axis=1), 1)


def test_import_basic_embedding(tmp_path):
    p = tmp_path / "e.emb"
    raw = np.array([[-1.0, 2.0, 0.5], [3.0, -4.0, 1.0]])
    save_embedding(p, raw)
    emb = import_basic_embedding(p, 2, 3)
    assert emb.X.min() >= 0
    assert emb.X_hat.min() >= 0 and emb.X_hat.max() <= 1
    with pytest.raises(FormatError):
        import_basic_embedding(p, 2, 4)
    with pytest.raises(FormatError):
        import_basic_embedding(p, 3)
