"""Unit tests for the linear-algebra and simplex-solver kernels.

The optimization routines are checked against independent oracles:
dense grid search over the simplex, exhaustive vertex enumeration, and
full (non-randomized) SVD.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atelier.numerics import (
    SimplexVector,
    _simplex_lsq_apg,
    project_simplex,
    simplex_kkt_residual,
    simplex_lsq,
    sym_eig,
    sym_matrix_power,
    truncated_svd,
)


def simplex_grid(dim: int, step: float) -> np.ndarray:
    """All points of the probability simplex on a regular grid, shape (dim, M)."""
    n = round(1.0 / step)
    if dim == 2:
        a = np.arange(n + 1)
        pts = np.stack([a, n - a])
    elif dim == 3:
        a, b = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = (a + b) <= n
        pts = np.stack([a[keep], b[keep], n - a[keep] - b[keep]])
    else:
        raise NotImplementedError
    return pts.astype(np.float64) / n


def lsq_objective(z, x, alpha) -> float:
    r = x - z @ alpha
    return float(r @ r)


# ---------------------------------------------------------------------------
# SimplexVector


def test_simplex_vector_validates():
    v = SimplexVector(np.array([0.25, 0.75]))
    assert v.dim == 2
    with pytest.raises(ValueError):
        SimplexVector(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        SimplexVector(np.array([-0.1, 1.1]))
    with pytest.raises(ValueError):
        SimplexVector(np.array([np.nan, 1.0]))
    with pytest.raises(ValueError):
        SimplexVector(np.array([]))


def test_simplex_vector_is_immutable_and_hashable():
    v = SimplexVector(np.array([1.0]))
    with pytest.raises(ValueError):
        v.weights[0] = 0.5
    assert v == SimplexVector(np.array([1.0]))
    assert hash(v) == hash(SimplexVector(np.array([1.0])))
    assert SimplexVector.unit(3, 1).weights.tolist() == [0.0, 1.0, 0.0]
    assert np.allclose(SimplexVector.uniform(4).weights, 0.25)


# ---------------------------------------------------------------------------
# sym_eig / sym_matrix_power


def test_sym_eig_descending_orthonormal():
    rng = np.random.default_rng(0)
    for n in (1, 2, 5, 17):
        m = rng.standard_normal((n, n))
        a = m + m.T
        dec = sym_eig(a)
        assert np.all(np.diff(dec.eigenvalues) <= 1e-12)
        recon = (dec.eigenvectors * dec.eigenvalues) @ dec.eigenvectors.T
        assert np.abs(recon - a).max() < 1e-10 * max(1.0, np.abs(a).max())
        gram = dec.eigenvectors.T @ dec.eigenvectors
        assert np.abs(gram - np.eye(n)).max() < 1e-12


def test_sym_eig_rejects_non_symmetric():
    with pytest.raises(ValueError):
        sym_eig(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        sym_eig(np.ones((2, 3)))


def test_sym_matrix_power_clamps_small_eigenvalues():
    # eigenvalue 0 is below eps * 4, so its direction is dropped
    out = sym_matrix_power(np.diag([4.0, 0.0]), -0.5, eps=1e-8)
    assert np.allclose(out, np.diag([0.5, 0.0]), atol=1e-14)
    out = sym_matrix_power(np.diag([4.0, 1.0]), -0.5)
    assert np.allclose(out, np.diag([0.5, 1.0]), atol=1e-14)


def test_sym_matrix_power_identity():
    assert np.allclose(sym_matrix_power(np.eye(5), 0.5), np.eye(5), atol=1e-14)
    assert np.allclose(sym_matrix_power(np.eye(5), -0.5), np.eye(5), atol=1e-14)


def test_sym_matrix_power_square_roundtrip():
    rng = np.random.default_rng(1)
    m = rng.standard_normal((6, 4))
    cov = m @ m.T  # PSD, rank 4
    root = sym_matrix_power(cov, 0.5)
    assert np.allclose(root @ root, cov, atol=1e-10)
    inv_root = sym_matrix_power(cov, -0.5)
    # pseudo-inverse square root: W C W = projection onto the range of C
    proj = inv_root @ cov @ inv_root
    assert np.allclose(proj @ proj, proj, atol=1e-8)


def test_sym_matrix_power_rejects_bad_input():
    with pytest.raises(ValueError):
        sym_matrix_power(np.eye(2), 2.0)
    with pytest.raises(ValueError):
        sym_matrix_power(np.zeros((2, 2)), 0.5)


# ---------------------------------------------------------------------------
# project_simplex


def test_project_simplex_known_points():
    assert np.allclose(project_simplex([0.6, 0.6]).weights, [0.5, 0.5], atol=1e-15)
    assert np.allclose(project_simplex([2.0, 0.0]).weights, [1.0, 0.0], atol=1e-15)
    feasible = np.array([0.3, 0.7])
    assert np.allclose(project_simplex(feasible).weights, feasible, atol=1e-15)


def test_project_simplex_rejects_bad_input():
    with pytest.raises(ValueError):
        project_simplex([])
    with pytest.raises(ValueError):
        project_simplex([np.inf, 0.0])
    with pytest.raises(ValueError):
        project_simplex(np.ones((2, 2)))


def test_project_simplex_matches_grid_oracle():
    rng = np.random.default_rng(7)
    grid = simplex_grid(3, 1e-3)
    for _ in range(10):
        v = rng.uniform(-2, 2, size=3)
        proj = project_simplex(v).weights
        dists = np.sum((grid - v[:, None]) ** 2, axis=0)
        best = grid[:, int(np.argmin(dists))]
        assert np.abs(proj - best).max() <= 2e-3
        assert np.sum((proj - v) ** 2) <= np.min(dists) + 1e-12


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=1, max_size=24))
def test_project_simplex_properties(vals):
    v = np.array(vals)
    p = project_simplex(v).weights
    assert p.min() >= 0.0
    assert abs(p.sum() - 1.0) <= 1e-9
    # variational characterization: for any feasible w, <v - p, w - p> <= 0
    rng = np.random.default_rng(0)
    for _ in range(5):
        w = rng.dirichlet(np.ones(v.size))
        assert (v - p) @ (w - p) <= 1e-7 * max(1.0, np.abs(v).max())


# ---------------------------------------------------------------------------
# simplex_lsq


def test_simplex_lsq_identity_dictionary_interior():
    # Z = I: solution equals the (feasible) target itself
    x = np.array([0.2, 0.3, 0.5])
    a = simplex_lsq(np.eye(3), x).weights
    assert np.abs(a - x).max() < 1e-12


def test_simplex_lsq_identity_dictionary_exterior():
    a = simplex_lsq(np.eye(3), np.array([2.0, 0.0, 0.0])).weights
    assert np.abs(a - [1.0, 0.0, 0.0]).max() < 1e-12


def test_simplex_lsq_single_atom():
    a = simplex_lsq(np.array([[3.0], [1.0]]), np.array([0.0, 1.0]))
    assert a.weights.tolist() == [1.0]


def test_simplex_lsq_matches_grid_oracle():
    # independent oracle: dense grid over the 3-simplex at step 1e-3
    rng = np.random.default_rng(21)
    grid = simplex_grid(3, 1e-3)
    for trial in range(8):
        z = rng.standard_normal((5, 3))
        if trial % 2 == 0:
            alpha_true = rng.dirichlet(np.ones(3))
            x = z @ alpha_true + 0.05 * rng.standard_normal(5)
        else:
            x = rng.standard_normal(5)
        a = simplex_lsq(z, x).weights
        objs = np.sum((x[:, None] - z @ grid) ** 2, axis=0)
        best = grid[:, int(np.argmin(objs))]
        assert np.abs(a - best).max() <= 2e-3
        assert lsq_objective(z, x, a) <= float(np.min(objs)) + 1e-10


def test_simplex_lsq_beats_vertices_and_uniform():
    rng = np.random.default_rng(3)
    for _ in range(20):
        k = int(rng.integers(1, 9))
        p = int(rng.integers(1, 12))
        z = rng.standard_normal((p, k))
        x = rng.standard_normal(p)
        a = simplex_lsq(z, x)
        obj = lsq_objective(z, x, a.weights)
        for j in range(k):
            assert obj <= lsq_objective(z, x, SimplexVector.unit(k, j).weights) + 1e-9
        assert obj <= lsq_objective(z, x, np.full(k, 1.0 / k)) + 1e-9


def test_simplex_lsq_kkt_residual():
    rng = np.random.default_rng(5)
    for _ in range(20):
        z = rng.standard_normal((8, 6))
        x = rng.standard_normal(8)
        a = simplex_lsq(z, x).weights
        q = z.T @ z
        c = z.T @ x
        assert simplex_kkt_residual(q, c, a) <= 1e-6


def test_simplex_lsq_warm_start_never_degrades():
    rng = np.random.default_rng(11)
    for _ in range(10):
        z = rng.standard_normal((6, 4))
        x = rng.standard_normal(6)
        warm = SimplexVector(rng.dirichlet(np.ones(4)))
        start_obj = lsq_objective(z, x, warm.weights)
        a = simplex_lsq(z, x, warm=warm)
        assert lsq_objective(z, x, a.weights) <= start_obj + 1e-12


def test_simplex_lsq_warm_and_cold_agree():
    rng = np.random.default_rng(13)
    z = rng.standard_normal((10, 5))
    x = rng.standard_normal(10)
    cold = simplex_lsq(z, x).weights
    warm = simplex_lsq(z, x, warm=rng.dirichlet(np.ones(5))).weights
    assert lsq_objective(z, x, cold) == pytest.approx(lsq_objective(z, x, warm), abs=1e-10)


def test_simplex_lsq_deterministic_tie_break():
    # two identical atoms: solution must deterministically use the first
    z = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    a = simplex_lsq(z, np.array([1.0, 0.0])).weights
    assert a[0] == pytest.approx(1.0)
    assert a[1] == 0.0
    again = simplex_lsq(z, np.array([1.0, 0.0])).weights
    assert np.array_equal(a, again)


def test_simplex_lsq_agrees_with_apg():
    rng = np.random.default_rng(17)
    for _ in range(5):
        z = rng.standard_normal((12, 10))
        x = rng.standard_normal(12)
        active = simplex_lsq(z, x).weights
        q = z.T @ z
        c = z.T @ x
        apg = _simplex_lsq_apg(q, c, None, 1e-10, 20000)
        assert lsq_objective(z, x, active) == pytest.approx(
            lsq_objective(z, x, apg), abs=1e-8
        )


def test_simplex_lsq_large_k_uses_apg_path():
    rng = np.random.default_rng(19)
    k = 600  # above the active-set cutoff
    z = rng.standard_normal((20, k))
    x = rng.standard_normal(20)
    a = simplex_lsq(z, x)
    assert a.dim == k
    q = z.T @ z
    c = z.T @ x
    assert simplex_kkt_residual(q, c, a.weights) <= 1e-6


def test_simplex_lsq_rejects_bad_input():
    with pytest.raises(ValueError):
        simplex_lsq(np.eye(3), np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        simplex_lsq(np.full((2, 2), np.nan), np.ones(2))
    with pytest.raises(ValueError):
        simplex_lsq(np.eye(2), np.array([np.inf, 0.0]))
    with pytest.raises(ValueError):
        simplex_lsq(np.eye(2), np.ones(2), warm=np.ones(3) / 3)


# ---------------------------------------------------------------------------
# truncated_svd


def test_truncated_svd_recovers_low_rank():
    rng = np.random.default_rng(23)
    u = np.linalg.qr(rng.standard_normal((40, 2)))[0]
    v = np.linalg.qr(rng.standard_normal((30, 2)))[0]
    x = (u * [5.0, 2.0]) @ v.T
    uu, ss, vv = truncated_svd(x, rank=2, seed=0)
    assert np.allclose(ss, [5.0, 2.0], atol=1e-8)
    assert np.abs((uu * ss) @ vv.T - x).max() < 1e-8


def test_truncated_svd_identity():
    n = 12
    uu, ss, vv = truncated_svd(np.eye(n), rank=n, seed=0)
    assert np.allclose(ss, 1.0, atol=1e-10)
    assert np.abs((uu * ss) @ vv.T - np.eye(n)).max() < 1e-10


def test_truncated_svd_variance_close_to_exact():
    # randomized top-10 captures within 1% of the exact top-10 energy
    rng = np.random.default_rng(29)
    base = rng.standard_normal((80, 60)) * (1.5 ** -np.arange(60))
    x = base @ rng.standard_normal((60, 60))
    _, s_exact, _ = np.linalg.svd(x, full_matrices=False)
    _, s_rand, _ = truncated_svd(x, rank=10, seed=1)
    exact_energy = float(np.sum(s_exact[:10] ** 2))
    rand_energy = float(np.sum(s_rand**2))
    assert rand_energy >= 0.99 * exact_energy
    assert rand_energy <= exact_energy * (1 + 1e-10)


def test_truncated_svd_orthonormal_factors():
    rng = np.random.default_rng(31)
    x = rng.standard_normal((50, 35))
    u, s, v = truncated_svd(x, rank=8, seed=3)
    assert np.abs(u.T @ u - np.eye(8)).max() < 1e-8
    assert np.abs(v.T @ v - np.eye(8)).max() < 1e-8
    assert np.all(np.diff(s) <= 1e-12)


def test_truncated_svd_deterministic_per_seed():
    rng = np.random.default_rng(37)
    x = rng.standard_normal((25, 20))
    a1 = truncated_svd(x, rank=5, seed=42)
    a2 = truncated_svd(x, rank=5, seed=42)
    for m1, m2 in zip(a1, a2):
        assert np.array_equal(m1, m2)
    b = truncated_svd(x, rank=5, seed=43)
    # different seed: estimates agree only approximately on a flat spectrum
    assert np.allclose(a1[1], b[1], rtol=1e-2)


def test_truncated_svd_rejects_bad_rank():
    x = np.ones((4, 3))
    with pytest.raises(ValueError):
        truncated_svd(x, rank=0)
    with pytest.raises(ValueError):
        truncated_svd(x, rank=4)
    with pytest.raises(ValueError):
        truncated_svd(np.array([np.nan]).reshape(1, 1), rank=1)
