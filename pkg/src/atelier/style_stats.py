"""Per-layer feature statistics, flattened style descriptors, and SVD reduction.

A style descriptor concatenates, over the codec layers, each layer's feature
mean and covariance. Covariances are stored as their upper triangle with
off-diagonal entries scaled by sqrt(2), so the Euclidean norm of the
flattened vector equals the Frobenius norm of the symmetric matrix. Each
layer's block is divided by p_l * (p_l + 1) so wide layers do not drown out
narrow ones.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from atelier.numerics import truncated_svd

__all__ = [
    "FeatureMap",
    "LayerStats",
    "StyleDescriptor",
    "Reducer",
    "compute_layer_stats",
    "assemble_descriptor",
    "descriptor_dim",
    "stats_block_dim",
    "flatten_stats",
    "unflatten_stats",
    "fit_reducer",
]


@dataclass(frozen=True)
class FeatureMap:
    """Activations of one codec layer: ``channels x positions`` plus geometry.

    ``grid`` is the (rows, cols) spatial arrangement of the positions and
    ``image_size`` the height/width of the image the map was encoded from
    (before any padding).
    """

    layer: int
    activations: np.ndarray
    grid: tuple[int, int]
    image_size: tuple[int, int]

    def __post_init__(self):
        act = np.asarray(self.activations, dtype=np.float64)
        if act.ndim != 2:
            raise ValueError(f"activations must be 2-d, got shape {act.shape}")
        rows, cols = self.grid
        if rows * cols != act.shape[1]:
            raise ValueError(
                f"grid {self.grid} implies {rows * cols} positions, "
                f"activations have {act.shape[1]}"
            )
        object.__setattr__(self, "activations", act)
        object.__setattr__(self, "grid", (int(rows), int(cols)))
        object.__setattr__(self, "image_size", tuple(int(v) for v in self.image_size))

    @property
    def channels(self) -> int:
        return int(self.activations.shape[0])

    @property
    def positions(self) -> int:
        return int(self.activations.shape[1])


@dataclass(frozen=True)
class LayerStats:
    """Mean vector and covariance matrix of one layer's activations."""

    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.covariance, dtype=np.float64)
        if mean.ndim != 1:
            raise ValueError(f"mean must be 1-d, got shape {mean.shape}")
        if cov.shape != (mean.size, mean.size):
            raise ValueError(
                f"covariance shape {cov.shape} does not match mean size {mean.size}"
            )
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "covariance", cov)

    @property
    def channels(self) -> int:
        return int(self.mean.size)


def compute_layer_stats(feature_map: FeatureMap) -> LayerStats:
    """Population mean and covariance (1/m normalization) of a feature map."""
    f = feature_map.activations
    if f.shape[1] < 1:
        raise ValueError("feature map has no positions")
    mean = f.mean(axis=1)
    centered = f - mean[:, None]
    cov = (centered @ centered.T) / f.shape[1]
    cov = (cov + cov.T) / 2.0  # exact symmetry despite BLAS roundoff
    return LayerStats(mean=mean, covariance=cov)


@lru_cache(maxsize=64)
def _triu_indices(p: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(p)


@lru_cache(maxsize=64)
def _offdiag_scale(p: int) -> np.ndarray:
    rows, cols = _triu_indices(p)
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    scale.setflags(write=False)
    return scale


def stats_block_dim(channels: int) -> int:
    """Flattened size of one layer's stats: mean plus upper triangle."""
    return channels + channels * (channels + 1) // 2


def descriptor_dim(channel_counts: Sequence[int]) -> int:
    return int(sum(stats_block_dim(p) for p in channel_counts))


def flatten_stats(stats: Sequence[LayerStats]) -> np.ndarray:
    """Concatenate raw per-layer stats: [mean_l, triu(cov_l) x sqrt2-offdiag].

    No per-layer normalization is applied; this is the storage layout for raw
    stats. The sqrt(2) off-diagonal scaling keeps the vector's Euclidean norm
    equal to sqrt(|mean|^2 + |cov|_F^2) per layer.
    """
    parts = []
    for s in stats:
        p = s.channels
        rows, cols = _triu_indices(p)
        parts.append(s.mean)
        parts.append(s.covariance[rows, cols] * _offdiag_scale(p))
    return np.concatenate(parts)


def unflatten_stats(vector: np.ndarray, channel_counts: Sequence[int]) -> list[LayerStats]:
    """Inverse of :func:`flatten_stats` for the given layer channel counts."""
    vector = np.asarray(vector, dtype=np.float64)
    expected = descriptor_dim(channel_counts)
    if vector.shape != (expected,):
        raise ValueError(
            f"vector has shape {vector.shape}, schema implies ({expected},)"
        )
    out = []
    at = 0
    for p in channel_counts:
        mean = vector[at : at + p]
        at += p
        tri = p * (p + 1) // 2
        packed = vector[at : at + tri] / _offdiag_scale(p)
        at += tri
        cov = np.zeros((p, p))
        rows, cols = _triu_indices(p)
        cov[rows, cols] = packed
        cov[cols, rows] = packed
        out.append(LayerStats(mean=mean.copy(), covariance=cov))
    return out


@dataclass(frozen=True)
class StyleDescriptor:
    """Flattened, layer-normalized style statistics of one image."""

    vector: np.ndarray
    channel_counts: tuple[int, ...]

    def __post_init__(self):
        vec = np.asarray(self.vector, dtype=np.float64)
        counts = tuple(int(c) for c in self.channel_counts)
        if vec.shape != (descriptor_dim(counts),):
            raise ValueError(
                f"descriptor length {vec.size} does not match schema {counts}"
            )
        object.__setattr__(self, "vector", vec)
        object.__setattr__(self, "channel_counts", counts)

    @property
    def dim(self) -> int:
        return int(self.vector.size)


def _layer_norms(channel_counts: Sequence[int]) -> np.ndarray:
    """Per-entry normalizer: p_l * (p_l + 1) repeated over each layer block."""
    parts = [
        np.full(stats_block_dim(p), float(p) * (p + 1)) for p in channel_counts
    ]
    return np.concatenate(parts)


def assemble_descriptor(
    stats: Sequence[LayerStats],
    channel_counts: Sequence[int] | None = None,
) -> StyleDescriptor:
    """Build the normalized descriptor from per-layer stats.

    When ``channel_counts`` is given the stats must match it exactly; a
    mismatch is a schema error, not something to coerce.
    """
    if len(stats) == 0:
        raise ValueError("no layer stats given")
    counts = tuple(s.channels for s in stats)
    if channel_counts is not None and counts != tuple(int(c) for c in channel_counts):
        raise ValueError(
            f"layer channels {counts} do not match schema {tuple(channel_counts)}"
        )
    raw = flatten_stats(stats)
    return StyleDescriptor(vector=raw / _layer_norms(counts), channel_counts=counts)


def descriptor_to_stats(descriptor: StyleDescriptor) -> list[LayerStats]:
    """Recover per-layer stats from a normalized descriptor."""
    raw = descriptor.vector * _layer_norms(descriptor.channel_counts)
    return unflatten_stats(raw, descriptor.channel_counts)


@dataclass(frozen=True)
class Reducer:
    """Linear descriptor compressor: centered projection onto an SVD basis."""

    mean: np.ndarray
    basis: np.ndarray
    singular_values: np.ndarray
    explained_variance: float

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        basis = np.asarray(self.basis, dtype=np.float64)
        sv = np.asarray(self.singular_values, dtype=np.float64)
        if basis.ndim != 2 or basis.shape[0] != mean.size:
            raise ValueError(
                f"basis shape {basis.shape} does not match mean size {mean.size}"
            )
        if sv.shape != (basis.shape[1],):
            raise ValueError("one singular value per basis column required")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "singular_values", sv)
        object.__setattr__(self, "explained_variance", float(self.explained_variance))

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])

    @property
    def input_dim(self) -> int:
        return int(self.basis.shape[0])

    def reduce(self, vectors: np.ndarray) -> np.ndarray:
        """Project descriptor vector(s) into the reduced space."""
        arr = np.asarray(vectors, dtype=np.float64)
        if arr.shape[-1] != self.input_dim:
            raise ValueError(
                f"expected last dimension {self.input_dim}, got {arr.shape}"
            )
        return (arr - self.mean) @ self.basis

    def expand(self, reduced: np.ndarray) -> np.ndarray:
        """Map reduced vector(s) back to descriptor space (basis range + mean)."""
        arr = np.asarray(reduced, dtype=np.float64)
        if arr.shape[-1] != self.rank:
            raise ValueError(f"expected last dimension {self.rank}, got {arr.shape}")
        return arr @ self.basis.T + self.mean


def fit_reducer(
    descriptors: np.ndarray,
    rank: int | None = None,
    seed: int = 0,
) -> Reducer:
    """Fit the SVD reducer on an ``n x D`` matrix of descriptor vectors.

    Descriptors are centered by their mean; ``rank`` defaults to
    min(4096, n - 1, D). Explained variance is the captured share of the
    total centered energy, reported as 1.0 when there is no variance at all.
    """
    x = np.asarray(descriptors, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"descriptor matrix must be 2-d, got shape {x.shape}")
    n, dim = x.shape
    if n < 2:
        raise ValueError("need at least 2 descriptors to fit a reducer")
    max_rank = min(n - 1, dim)
    if rank is None:
        rank = min(4096, max_rank)
    elif rank > max_rank:
        raise ValueError(f"rank {rank} exceeds the maximum usable rank {max_rank}")
    elif rank < 1:
        raise ValueError("rank must be at least 1")

    mean = x.mean(axis=0)
    centered = x - mean
    total = float(np.sum(centered * centered))
    _, sv, v = truncated_svd(centered, rank=rank, seed=seed)
    captured = float(np.sum(sv * sv))
    explained = 1.0 if total <= 1e-24 else min(captured / total, 1.0)
    return Reducer(
        mean=mean,
        basis=v,
        singular_values=sv,
        explained_variance=explained,
    )
