"""Archetypal analysis of reduced style descriptors.

Fits k archetypes Z = X B where every archetype is a convex combination of
corpus points and every corpus point is approximated by a convex combination
of archetypes, by alternating exact block updates. Both code matrices live on
probability simplices, which is what makes decompositions interpretable:
weights are nonnegative shares that sum to one.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from atelier.numerics import SimplexVector, project_simplex, simplex_lsq
from atelier.style_stats import (
    LayerStats,
    Reducer,
    StyleDescriptor,
    flatten_stats,
    unflatten_stats,
)

__all__ = [
    "FitTelemetry",
    "ArchetypeModel",
    "MixedStyle",
    "fit_archetypes",
    "encode_style",
    "decomposition_residual",
    "archetype_stats",
    "mix_style",
    "enhance_code",
    "furthest_sum",
]


@dataclass(frozen=True)
class FitTelemetry:
    """Convergence record of one archetypal fit."""

    objective_curve: tuple[float, ...]
    iterations: int
    converged: bool
    seed: int

    @property
    def final_objective(self) -> float:
        return self.objective_curve[-1]


@dataclass(frozen=True)
class MixedStyle:
    """Per-layer style statistics produced by mixing archetypes."""

    stats: tuple[LayerStats, ...]
    code: SimplexVector


@dataclass(frozen=True)
class ArchetypeModel:
    """Fitted archetypes plus everything needed to reuse them.

    Core solver outputs are always present: ``archetypes`` (r x k),
    ``codes`` (n x k, row i is the simplex decomposition of image i),
    ``loadings`` (k x n, row j builds archetype j from corpus points), and
    the reduced corpus X (r x n) the loadings refer to.

    The descriptor-space context (reducer, per-archetype raw stats, layer
    schema, image ids, codec spec) is attached by the corpus pipeline;
    operations that need it raise when it is missing.
    """

    archetypes: np.ndarray
    codes: np.ndarray
    loadings: np.ndarray
    reduced_corpus: np.ndarray
    telemetry: FitTelemetry
    reducer: Reducer | None = None
    archetype_stats_raw: np.ndarray | None = None
    channel_counts: tuple[int, ...] | None = None
    image_ids: tuple[str, ...] | None = None
    codec_spec: dict | None = field(default=None)
    schema_hash: str | None = None
    resize_policy: str | None = None

    def __post_init__(self):
        z = np.asarray(self.archetypes, dtype=np.float64)
        codes = np.asarray(self.codes, dtype=np.float64)
        loadings = np.asarray(self.loadings, dtype=np.float64)
        x = np.asarray(self.reduced_corpus, dtype=np.float64)
        r, k = z.shape
        n = x.shape[1]
        if codes.shape != (n, k):
            raise ValueError(f"codes shape {codes.shape}, expected {(n, k)}")
        if loadings.shape != (k, n):
            raise ValueError(f"loadings shape {loadings.shape}, expected {(k, n)}")
        if x.shape[0] != r:
            raise ValueError("reduced corpus dimension does not match archetypes")
        object.__setattr__(self, "archetypes", z)
        object.__setattr__(self, "codes", codes)
        object.__setattr__(self, "loadings", loadings)
        object.__setattr__(self, "reduced_corpus", x)

    @property
    def k(self) -> int:
        return int(self.archetypes.shape[1])

    @property
    def n(self) -> int:
        return int(self.reduced_corpus.shape[1])

    @property
    def reduced_dim(self) -> int:
        return int(self.archetypes.shape[0])

    def image_code(self, i: int) -> SimplexVector:
        return SimplexVector(self.codes[i])

    def archetype_code(self, j: int) -> SimplexVector:
        return SimplexVector(self.loadings[j])

    def with_context(self, **fields) -> "ArchetypeModel":
        return replace(self, **fields)


def furthest_sum(x: np.ndarray, k: int) -> list[int]:
    """Greedy spread-out initialization indices over the columns of x.

    Starts from the point farthest from the corpus mean, then repeatedly adds
    the point maximizing the summed Euclidean distance to those already
    chosen. Ties break toward the lowest index.
    """
    n = x.shape[1]
    mean = x.mean(axis=1, keepdims=True)
    start = int(np.argmax(np.linalg.norm(x - mean, axis=0)))
    chosen = [start]
    total = np.linalg.norm(x - x[:, [start]], axis=0)
    total[start] = -np.inf
    for _ in range(k - 1):
        nxt = int(np.argmax(total))
        chosen.append(nxt)
        total += np.linalg.norm(x - x[:, [nxt]], axis=0)
        total[nxt] = -np.inf
    return chosen


def fit_archetypes(
    x,
    k: int,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-6,
) -> ArchetypeModel:
    """Fit k archetypes to the columns of the reduced corpus matrix x (r x n).

    Alternating minimization with exact block updates: the code step solves
    one simplex least-squares problem per image against the current
    archetypes; the loading step rebuilds each archetype from its residual
    target, updating archetypes in place (Gauss-Seidel) so every solve sees
    the freshest dictionary. Both steps are warm-started, which makes the
    objective (1/n) sum_i ||x_i - Z a_i||^2 non-increasing across iterations.

    Stops when the relative objective decrease falls below ``tol`` or after
    ``max_iter`` outer iterations. Deterministic for a given seed.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] == 0:
        raise ValueError(f"corpus must be a non-empty r x n matrix, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("corpus contains non-finite values")
    n = x.shape[1]
    if not 1 <= k <= n:
        raise ValueError(f"k must be in [1, {n}], got {k}")

    # loading rows start as vertices at spread-out corpus points
    loadings = np.zeros((k, n))
    for j, idx in enumerate(furthest_sum(x, k)):
        loadings[j, idx] = 1.0
    z = x @ loadings.T

    codes = np.empty((n, k))
    for i in range(n):
        codes[i] = simplex_lsq(z, x[:, i]).weights

    residual = x - z @ codes.T
    curve = [float(np.sum(residual * residual)) / n]
    converged = False
    iterations = 0

    for _ in range(max_iter):
        iterations += 1
        # loading step: rebuild each archetype from its residual target
        for j in range(k):
            a_j = codes[:, j]
            weight = float(a_j @ a_j)
            if weight <= 0.0:
                continue  # archetype currently unused; leave it in place
            target = z[:, j] + residual @ (a_j / weight)
            beta = simplex_lsq(x, target, warm=loadings[j]).weights
            z_new = x @ beta
            residual -= np.outer(z_new - z[:, j], a_j)
            z[:, j] = z_new
            loadings[j] = beta

        # code step against the updated dictionary
        for i in range(n):
            codes[i] = simplex_lsq(z, x[:, i], warm=codes[i]).weights

        residual = x - z @ codes.T
        obj = float(np.sum(residual * residual)) / n
        curve.append(obj)
        prev = curve[-2]
        if prev - obj <= tol * max(prev, 1e-30):
            converged = True
            break

    telemetry = FitTelemetry(
        objective_curve=tuple(curve),
        iterations=iterations,
        converged=converged,
        seed=int(seed),
    )
    return ArchetypeModel(
        archetypes=z,
        codes=codes,
        loadings=loadings,
        reduced_corpus=x,
        telemetry=telemetry,
    )


def encode_style(model: ArchetypeModel, target) -> SimplexVector:
    """Decompose a style into archetype weights (simplex least squares).

    ``target`` is either a :class:`StyleDescriptor` (reduced through the
    model's reducer, which must be attached) or an already-reduced vector.
    """
    v = _reduced_vector(model, target)
    return simplex_lsq(model.archetypes, v)


def decomposition_residual(model: ArchetypeModel, target, code: SimplexVector) -> float:
    """Relative reconstruction gap ||v - Z a|| / max(||v||, tiny)."""
    v = _reduced_vector(model, target)
    gap = v - model.archetypes @ code.weights
    return float(np.linalg.norm(gap) / max(np.linalg.norm(v), 1e-30))


def _reduced_vector(model: ArchetypeModel, target) -> np.ndarray:
    if isinstance(target, StyleDescriptor):
        if model.reducer is None:
            raise ValueError("model has no reducer attached; corpus store required")
        if model.channel_counts is not None and target.channel_counts != model.channel_counts:
            raise ValueError(
                f"descriptor schema {target.channel_counts} does not match "
                f"model schema {model.channel_counts}"
            )
        return model.reducer.reduce(target.vector)
    v = np.asarray(target, dtype=np.float64)
    if v.ndim != 1 or v.size != model.reduced_dim:
        raise ValueError(
            f"expected a reduced vector of dimension {model.reduced_dim}, "
            f"got shape {v.shape}"
        )
    return v


def _require_stats(model: ArchetypeModel):
    if model.archetype_stats_raw is None or model.channel_counts is None:
        raise ValueError(
            "model carries no archetype statistics; corpus store required"
        )


def archetype_stats(model: ArchetypeModel, j: int) -> tuple[LayerStats, ...]:
    """Per-layer stats of archetype j (loading-weighted corpus stats)."""
    _require_stats(model)
    if not 0 <= j < model.k:
        raise ValueError(f"archetype index {j} out of range [0, {model.k})")
    return tuple(unflatten_stats(model.archetype_stats_raw[j], model.channel_counts))


def compute_archetype_stats_raw(
    loadings: np.ndarray, image_stats_raw: np.ndarray
) -> np.ndarray:
    """Loading-weighted combinations of per-image raw stats vectors.

    ``image_stats_raw`` is n x D_raw in :func:`flatten_stats` layout; the
    result is k x D_raw. Convexity of the weights preserves PSD covariances.
    """
    return np.asarray(loadings, dtype=np.float64) @ np.asarray(
        image_stats_raw, dtype=np.float64
    )


def mix_style(model: ArchetypeModel, weights) -> MixedStyle:
    """Blend archetype statistics with simplex weights.

    ``weights`` may be a :class:`SimplexVector` or a raw vector; raw vectors
    must satisfy the simplex constraints within 1e-6 (they are renormalized
    exactly, never silently fixed beyond that).
    """
    _require_stats(model)
    code = _coerce_code(weights, model.k)
    mixed_raw = code.weights @ model.archetype_stats_raw
    stats = tuple(unflatten_stats(mixed_raw, model.channel_counts))
    return MixedStyle(stats=stats, code=code)


def _coerce_code(weights, k: int) -> SimplexVector:
    if isinstance(weights, SimplexVector):
        if weights.dim != k:
            raise ValueError(f"weights have dimension {weights.dim}, expected {k}")
        return weights
    w = np.asarray(weights, dtype=np.float64)
    if w.shape != (k,):
        raise ValueError(f"weights have shape {w.shape}, expected ({k},)")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights contain non-finite entries")
    if w.min() < -1e-6 or abs(float(w.sum()) - 1.0) > 1e-6:
        raise ValueError(
            "weights violate the simplex constraints beyond 1e-6; "
            "renormalize explicitly before mixing"
        )
    return project_simplex(w)


def enhance_code(code: SimplexVector, target: int, strength: float) -> SimplexVector:
    """Pull a decomposition toward one archetype: (1-w) * code + w * e_target."""
    if not 0 <= target < code.dim:
        raise ValueError(f"archetype index {target} out of range [0, {code.dim})")
    if not 0.0 <= strength <= 1.0:
        raise ValueError(f"strength must be in [0, 1], got {strength}")
    w = code.weights * (1.0 - strength)
    w[target] += strength
    return SimplexVector(w / w.sum())
