"""Dense linear algebra and simplex-constrained least squares kernels.

Everything in here is deterministic: randomized routines take an explicit
seed, and ties in combinatorial choices are broken by lowest index.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SimplexVector",
    "EigenDecomposition",
    "sym_eig",
    "sym_matrix_power",
    "project_simplex",
    "simplex_lsq",
    "simplex_kkt_residual",
    "truncated_svd",
]

# Sum tolerance for the simplex invariant; solver outputs are renormalized
# well below this before construction.
SIMPLEX_SUM_TOL = 1e-9

# Active-set problems above this size fall back to accelerated projected
# gradient: the KKT solves stop being cheap relative to gradient steps.
ACTIVE_SET_MAX_DIM = 512


def _as_finite_f64(a, name: str) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.size and not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SimplexVector:
    """Nonnegative weights summing to one (a point on the probability simplex)."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("simplex vector must be a non-empty 1-d array")
        if not np.all(np.isfinite(w)):
            raise ValueError("simplex vector contains non-finite entries")
        if w.min() < 0.0:
            raise ValueError("simplex vector has negative entries")
        if abs(float(w.sum()) - 1.0) > SIMPLEX_SUM_TOL:
            raise ValueError(
                f"simplex vector sums to {w.sum():.12g}, expected 1 within "
                f"{SIMPLEX_SUM_TOL:g}"
            )
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return int(self.weights.size)

    def __len__(self) -> int:
        return self.dim

    def __eq__(self, other) -> bool:
        if not isinstance(other, SimplexVector):
            return NotImplemented
        return self.weights.shape == other.weights.shape and bool(
            np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash(self.weights.tobytes())

    @classmethod
    def unit(cls, dim: int, index: int) -> "SimplexVector":
        """The vertex e_index of the simplex in R^dim."""
        if not 0 <= index < dim:
            raise ValueError(f"index {index} out of range for dimension {dim}")
        w = np.zeros(dim)
        w[index] = 1.0
        return cls(w)

    @classmethod
    def uniform(cls, dim: int) -> "SimplexVector":
        if dim < 1:
            raise ValueError("dimension must be positive")
        return cls(np.full(dim, 1.0 / dim))


@dataclass(frozen=True)
class EigenDecomposition:
    """Symmetric eigendecomposition with eigenvalues in descending order."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def _check_square_symmetric(a, name: str = "matrix") -> np.ndarray:
    arr = _as_finite_f64(a, name)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be square, got shape {arr.shape}")
    scale = max(1.0, float(np.abs(arr).max())) if arr.size else 1.0
    if arr.size and float(np.abs(arr - arr.T).max()) > 1e-8 * scale:
        raise ValueError(f"{name} is not symmetric")
    return arr


def sym_eig(a) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending."""
    arr = _check_square_symmetric(a)
    sym = (arr + arr.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    return EigenDecomposition(
        eigenvalues=np.ascontiguousarray(vals[::-1]),
        eigenvectors=np.ascontiguousarray(vecs[:, ::-1]),
    )


def sym_matrix_power(a, exponent: float, eps: float = 1e-8) -> np.ndarray:
    """Matrix power of a symmetric PSD matrix for exponents +1/2 and -1/2.

    Eigenvalues below ``eps`` times the largest eigenvalue are treated as
    zero: their directions contribute nothing to the result, which makes the
    -1/2 power a pseudo-inverse square root. Raises if the matrix has no
    positive eigenvalue at all.
    """
    if exponent not in (0.5, -0.5):
        raise ValueError("exponent must be +0.5 or -0.5")
    dec = sym_eig(a)
    lam = dec.eigenvalues
    lam_max = float(lam[0]) if lam.size else 0.0
    if lam_max <= 0.0:
        raise ValueError("matrix has no positive eigenvalue; cannot take power")
    keep = lam > eps * lam_max
    powered = np.zeros_like(lam)
    powered[keep] = lam[keep] ** exponent
    vecs = dec.eigenvectors
    return (vecs * powered) @ vecs.T


def project_simplex(v) -> SimplexVector:
    """Euclidean projection onto the probability simplex.

    Sort-and-threshold algorithm: with u the sorted entries (descending) and
    rho the largest index with u_rho > (cumsum(u)_rho - 1) / rho, the
    projection is max(v - tau, 0) with tau = (cumsum(u)_rho - 1) / rho.
    """
    arr = _as_finite_f64(v, "input vector")
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("input must be a non-empty 1-d vector")
    u = np.sort(arr)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, arr.size + 1)
    rho = int(np.nonzero(u * idx > css - 1.0)[0][-1])
    tau = (css[rho] - 1.0) / (rho + 1.0)
    w = np.maximum(arr - tau, 0.0)
    total = float(w.sum())
    # total == 1 in exact arithmetic; divide away the last ulps of drift
    return SimplexVector(w / total)


def simplex_kkt_residual(q: np.ndarray, c: np.ndarray, alpha: np.ndarray) -> float:
    """Relative KKT residual of min .5 a'Qa - c'a over the simplex at alpha.

    With g = Q alpha - c and the multiplier nu = -min(g), dual feasibility
    (g + nu >= 0) holds by construction and the residual is the
    complementarity gap alpha . (g + nu), scaled by the problem magnitude.
    """
    g = q @ alpha - c
    lam = g - g.min()
    scale = max(1.0, float(np.abs(c).max(initial=0.0)), float(np.abs(q).max(initial=0.0)))
    return float(alpha @ lam) / scale


def _solve_restricted_kkt(q: np.ndarray, c: np.ndarray, free_idx: np.ndarray) -> np.ndarray:
    """Minimize .5 a'Qa - c'a subject to sum(a)=1 over the free coordinates.

    Solves the bordered KKT system; a singular system (degenerate Q block)
    falls back to the least-norm solution, which exists because the primal
    problem is bounded below.
    """
    nf = free_idx.size
    kkt = np.zeros((nf + 1, nf + 1))
    kkt[:nf, :nf] = q[np.ix_(free_idx, free_idx)]
    kkt[:nf, nf] = 1.0
    kkt[nf, :nf] = 1.0
    rhs = np.empty(nf + 1)
    rhs[:nf] = c[free_idx]
    rhs[nf] = 1.0
    try:
        sol = np.linalg.solve(kkt, rhs)
        if not np.all(np.isfinite(sol)):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
    return sol[:nf]


def _simplex_lsq_active_set(
    q: np.ndarray, c: np.ndarray, warm: np.ndarray | None, tol: float, max_iter: int
) -> np.ndarray:
    k = c.size
    scale = max(1.0, float(np.abs(c).max()), float(np.abs(q).max()))
    dual_tol = tol * scale

    if warm is not None:
        alpha = warm.copy()
        free = alpha > 0.0
    else:
        # best single vertex: argmin over j of .5*Q_jj - c_j, ties -> lowest j
        j0 = int(np.argmin(0.5 * np.diag(q) - c))
        alpha = np.zeros(k)
        alpha[j0] = 1.0
        free = np.zeros(k, dtype=bool)
        free[j0] = True

    for _ in range(max_iter):
        free_idx = np.flatnonzero(free)
        target = _solve_restricted_kkt(q, c, free_idx)
        if target.min(initial=0.0) >= -1e-12:
            # EQP minimizer is feasible: move there, then test the duals
            alpha.fill(0.0)
            alpha[free_idx] = np.maximum(target, 0.0)
            g = q @ alpha - c
            nu = -float(g[free_idx].mean())
            lam = g + nu
            lam[free] = np.inf
            j = int(np.argmin(lam))
            if lam[j] >= -dual_tol:
                break
            free[j] = True
        else:
            # step toward the EQP minimizer until a coordinate hits zero
            direction = target - alpha[free_idx]
            blocking = direction < -1e-16
            ratios = np.full(free_idx.size, np.inf)
            ratios[blocking] = alpha[free_idx][blocking] / -direction[blocking]
            hit = int(np.argmin(ratios))
            step = min(1.0, float(ratios[hit]))
            alpha[free_idx] += step * direction
            removed = free_idx[hit]
            alpha[removed] = 0.0
            free[removed] = False
            np.maximum(alpha, 0.0, out=alpha)

    np.maximum(alpha, 0.0, out=alpha)
    return alpha / alpha.sum()


def _simplex_lsq_apg(
    q: np.ndarray, c: np.ndarray, warm: np.ndarray | None, tol: float, max_iter: int
) -> np.ndarray:
    k = c.size
    lipschitz = max(float(np.linalg.eigvalsh(q)[-1]), 1e-30)
    alpha = warm.copy() if warm is not None else np.full(k, 1.0 / k)
    y = alpha.copy()
    t = 1.0
    for _ in range(max_iter):
        grad = q @ y - c
        nxt = project_simplex(y - grad / lipschitz).weights
        t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
        y = nxt + ((t - 1.0) / t_next) * (nxt - alpha)
        alpha = nxt
        t = t_next
        if simplex_kkt_residual(q, c, alpha) <= tol:
            break
    return alpha


def simplex_lsq(z, x, warm: SimplexVector | np.ndarray | None = None,
                tol: float = 1e-8, max_iter: int | None = None) -> SimplexVector:
    """Minimize ||x - Z a||^2 over the probability simplex.

    Parameters
    ----------
    z : (p, k) array
        Dictionary whose columns are the candidate atoms.
    x : (p,) array
        Target vector.
    warm : optional simplex vector of dimension k
        Warm start; projected onto the simplex before use. With a feasible
        warm start the solver never increases the objective.
    tol : float
        Relative KKT residual tolerance.
    max_iter : optional int
        Iteration cap; defaults scale with k.

    Uses a primal active-set method on the Gram system for k <= 512 and
    accelerated projected gradient above that. Ties in index selection are
    broken by lowest index, so results are deterministic.
    """
    z = _as_finite_f64(z, "dictionary")
    x = _as_finite_f64(x, "target")
    if z.ndim != 2:
        raise ValueError(f"dictionary must be 2-d, got shape {z.shape}")
    if x.ndim != 1 or x.size != z.shape[0]:
        raise ValueError(
            f"target shape {x.shape} does not match dictionary rows {z.shape[0]}"
        )
    k = z.shape[1]
    if k == 0:
        raise ValueError("dictionary has no columns")

    q = z.T @ z
    c = z.T @ x

    warm_arr = None
    if warm is not None:
        w = warm.weights if isinstance(warm, SimplexVector) else np.asarray(warm, dtype=np.float64)
        if w.shape != (k,):
            raise ValueError(f"warm start has dimension {w.size}, expected {k}")
        warm_arr = project_simplex(w).weights.copy()

    if k == 1:
        return SimplexVector(np.ones(1))
    if k > ACTIVE_SET_MAX_DIM:
        iters = max_iter if max_iter is not None else 5000
        alpha = _simplex_lsq_apg(q, c, warm_arr, tol, iters)
    else:
        iters = max_iter if max_iter is not None else max(20 * k, 200)
        alpha = _simplex_lsq_active_set(q, c, warm_arr, tol, iters)
    return SimplexVector(alpha)


def truncated_svd(x, rank: int, seed: int = 0, oversample: int = 10,
                  power_iters: int = 2) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Randomized truncated SVD of x, returning (U, S, V) with x ~ U diag(S) V'.

    Gaussian range finder with ``oversample`` extra columns and ``power_iters``
    subspace iterations (QR-renormalized). All randomness comes from
    ``numpy.random.default_rng(seed)``, so the output is deterministic per
    seed. When the oversampled sketch already spans the smaller matrix
    dimension the range is exact and the power iterations are skipped.
    """
    x = _as_finite_f64(x, "matrix")
    if x.ndim != 2:
        raise ValueError(f"expected a 2-d matrix, got shape {x.shape}")
    n, p = x.shape
    small = min(n, p)
    if rank < 1:
        raise ValueError("rank must be at least 1")
    if rank > small:
        raise ValueError(f"rank {rank} exceeds min(n, p) = {small}")

    rng = np.random.default_rng(seed)
    sketch = min(rank + oversample, small)
    omega = rng.standard_normal((p, sketch))
    basis, _ = np.linalg.qr(x @ omega)
    if sketch < small:
        for _ in range(power_iters):
            codomain, _ = np.linalg.qr(x.T @ basis)
            basis, _ = np.linalg.qr(x @ codomain)
    projected = basis.T @ x
    u_small, s, vt = np.linalg.svd(projected, full_matrices=False)
    u = basis @ u_small[:, :rank]
    return u, s[:rank], np.ascontiguousarray(vt[:rank].T)
