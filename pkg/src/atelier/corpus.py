"""Corpus ingestion, persistent stat stores, and fitted model artifacts.

A store holds, per image, the raw per-layer statistics (float32) and the
normalized descriptor vector computed from those rounded stats, so a reload
can verify descriptors bit-for-bit by recomputation. A model artifact is
self-contained: reducer, archetypes, codes, loadings, per-archetype stats,
and the codec spec travel together, so stylization needs no corpus access.

Persistence is a JSON manifest next to a little-endian binary blob with a
section table and a SHA-256 checksum. Version fields gate format changes.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from atelier.archetypal import (
    ArchetypeModel,
    FitTelemetry,
    compute_archetype_stats_raw,
    fit_archetypes,
)
from atelier.codecs import CodecStack
from atelier.style_stats import (
    LayerStats,
    Reducer,
    StyleDescriptor,
    assemble_descriptor,
    compute_layer_stats,
    descriptor_dim,
    fit_reducer,
    unflatten_stats,
)

__all__ = [
    "STORE_FORMAT_VERSION",
    "MODEL_FORMAT_VERSION",
    "DEFAULT_RESIZE_POLICY",
    "StoreVersionError",
    "StoreIntegrityError",
    "CorpusRecord",
    "StyleStore",
    "load_image",
    "resize_shortest",
    "save_image",
    "image_to_bytes",
    "schema_hash",
    "describe_image",
    "ingest",
    "save_store",
    "load_store",
    "build_model",
    "save_model",
    "load_model",
]

logger = logging.getLogger("atelier.corpus")

STORE_FORMAT_VERSION = 1
MODEL_FORMAT_VERSION = 1
DEFAULT_RESIZE_POLICY = "shortest:512"

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".tif", ".tiff", ".webp"}


class StoreVersionError(ValueError):
    """The on-disk format version is not supported by this build."""


class StoreIntegrityError(ValueError):
    """Checksums or internal consistency checks failed on load."""


# ---------------------------------------------------------------------------
# image IO


def _parse_resize_policy(policy: str) -> int | None:
    if policy == "none":
        return None
    if policy.startswith("shortest:"):
        try:
            side = int(policy.split(":", 1)[1])
        except ValueError:
            side = 0
        if side >= 1:
            return side
    raise ValueError(
        f"unknown resize policy {policy!r}; expected 'none' or 'shortest:<pixels>'"
    )


def resize_shortest(img: PILImage.Image, side: int) -> PILImage.Image:
    """Scale so the shorter side becomes ``side`` pixels; never upscales."""
    w, h = img.size
    short = min(w, h)
    if short <= side:
        return img
    scale = side / short
    return img.resize(
        (max(1, round(w * scale)), max(1, round(h * scale))),
        PILImage.Resampling.LANCZOS,
    )


def load_image(path, resize_policy: str = "none") -> np.ndarray:
    """Load an image as an HxWx3 float array in [0, 1], optionally resized.

    'shortest:<N>' scales so the shorter side becomes N pixels (never
    upscales); 'none' keeps the stored size.
    """
    side = _parse_resize_policy(resize_policy)
    with PILImage.open(path) as img:
        img = img.convert("RGB")
        if side is not None:
            img = resize_shortest(img, side)
        arr = np.asarray(img, dtype=np.float64) / 255.0
    return np.clip(arr, 0.0, 1.0)


def image_to_bytes(array: np.ndarray) -> np.ndarray:
    """Clamp to [0, 1] and quantize to uint8 (round half to even)."""
    clamped = np.clip(np.asarray(array, dtype=np.float64), 0.0, 1.0)
    return np.rint(clamped * 255.0).astype(np.uint8)


def save_image(array: np.ndarray, path) -> None:
    """Write an image array to disk (format from the file suffix)."""
    data = image_to_bytes(array)
    if data.ndim != 3 or data.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {data.shape}")
    PILImage.fromarray(data, mode="RGB").save(path)


# ---------------------------------------------------------------------------
# store


@dataclass(frozen=True)
class CorpusRecord:
    """One ingested image: stable id, source path, stored pixel size."""

    image_id: str
    source: str
    width: int
    height: int


def schema_hash(channel_counts, codec_kind: str, resize_policy: str) -> str:
    """Fingerprint of everything that must match for stats to be comparable."""
    payload = json.dumps(
        {
            "channels": [int(c) for c in channel_counts],
            "codec": codec_kind,
            "resize": resize_policy,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(eq=False)
class StyleStore:
    """Per-image raw stats and descriptors for one corpus under one codec."""

    codec_spec: dict
    channel_counts: tuple[int, ...]
    resize_policy: str
    records: tuple[CorpusRecord, ...]
    raw_stats: np.ndarray
    descriptors: np.ndarray
    created_at: str
    version: int = STORE_FORMAT_VERSION

    def __post_init__(self):
        self.channel_counts = tuple(int(c) for c in self.channel_counts)
        n = len(self.records)
        if self.raw_stats.shape[0] != n or self.descriptors.shape[0] != n:
            raise ValueError("stats row count does not match record count")
        if self.descriptors.shape[1] != descriptor_dim(self.channel_counts):
            raise ValueError("descriptor width does not match the layer schema")

    @property
    def n(self) -> int:
        return len(self.records)

    @property
    def schema(self) -> str:
        return schema_hash(
            self.channel_counts, self.codec_spec.get("kind", "?"), self.resize_policy
        )

    def index_of(self, image_id: str) -> int:
        for i, rec in enumerate(self.records):
            if rec.image_id == image_id:
                return i
        raise KeyError(f"image id {image_id!r} not in store")

    def image_stats(self, i: int) -> list[LayerStats]:
        """Raw per-layer stats of image i (float32 storage upcast to float64)."""
        return unflatten_stats(
            self.raw_stats[i].astype(np.float64), self.channel_counts
        )

    def image_descriptor(self, i: int) -> StyleDescriptor:
        return StyleDescriptor(
            vector=self.descriptors[i].astype(np.float64),
            channel_counts=self.channel_counts,
        )


def _descriptor_from_raw32(raw32: np.ndarray, channel_counts) -> np.ndarray:
    """Normalized float32 descriptor recomputed from float32 raw stats.

    Single code path shared by ingest and the load-time consistency check, so
    equality can be asserted bit-for-bit.
    """
    stats = unflatten_stats(raw32.astype(np.float64), channel_counts)
    return assemble_descriptor(stats, channel_counts).vector.astype(np.float32)


def describe_image(image: np.ndarray, codec: CodecStack) -> StyleDescriptor:
    """Per-layer stats of one image, assembled into a descriptor."""
    stats = [compute_layer_stats(fm) for fm in codec.encode_all(image)]
    return assemble_descriptor(stats, codec.channel_counts)


def _ingest_one(image: np.ndarray, codec: CodecStack) -> tuple[np.ndarray, np.ndarray]:
    from atelier.style_stats import flatten_stats

    stats = [compute_layer_stats(fm) for fm in codec.encode_all(image)]
    raw32 = flatten_stats(stats).astype(np.float32)
    return raw32, _descriptor_from_raw32(raw32, codec.channel_counts)


def ingest(
    source_dir,
    codec: CodecStack,
    resize_policy: str = DEFAULT_RESIZE_POLICY,
) -> StyleStore:
    """Scan a directory tree for images and build a style store.

    Files are identified by their path relative to ``source_dir`` and
    processed in sorted id order. Unreadable or non-image files are skipped
    with a logged warning; an ingest that yields no images is an error.
    """
    _parse_resize_policy(resize_policy)
    root = Path(source_dir)
    if not root.is_dir():
        raise ValueError(f"{source_dir} is not a directory")

    candidates = sorted(
        (
            p.relative_to(root).as_posix()
            for p in root.rglob("*")
            if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
        ),
    )
    records: list[CorpusRecord] = []
    raw_rows: list[np.ndarray] = []
    desc_rows: list[np.ndarray] = []
    for rel in candidates:
        path = root / rel
        try:
            image = load_image(path, resize_policy)
        except (OSError, UnidentifiedImageError, ValueError) as exc:
            logger.warning("skipping %s: %s", path, exc)
            continue
        raw32, desc32 = _ingest_one(image, codec)
        records.append(
            CorpusRecord(
                image_id=rel,
                source=str(path),
                width=image.shape[1],
                height=image.shape[0],
            )
        )
        raw_rows.append(raw32)
        desc_rows.append(desc32)

    if not records:
        raise ValueError(f"no readable images found under {source_dir}")

    return StyleStore(
        codec_spec=codec.spec(),
        channel_counts=codec.channel_counts,
        resize_policy=resize_policy,
        records=tuple(records),
        raw_stats=np.stack(raw_rows),
        descriptors=np.stack(desc_rows),
        created_at=datetime.now(timezone.utc).isoformat(),
    )


# ---------------------------------------------------------------------------
# binary blob helpers


def _write_blob(path: Path, sections: dict[str, np.ndarray]) -> dict:
    """Write arrays little-endian into one blob; return the section table."""
    table = {}
    digest = hashlib.sha256()
    offset = 0
    with open(path, "wb") as f:
        for name, arr in sections.items():
            dtype = "<f4" if arr.dtype == np.float32 else "<f8"
            data = np.ascontiguousarray(arr, dtype=dtype).tobytes()
            f.write(data)
            digest.update(data)
            table[name] = {
                "dtype": dtype,
                "shape": list(arr.shape),
                "offset": offset,
                "nbytes": len(data),
            }
            offset += len(data)
    return {"sections": table, "sha256": digest.hexdigest(), "nbytes": offset}


def _read_blob(path: Path, layout: dict) -> dict[str, np.ndarray]:
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise StoreIntegrityError(f"cannot read blob {path}: {exc}") from exc
    if len(data) != layout["nbytes"]:
        raise StoreIntegrityError(
            f"blob {path} has {len(data)} bytes, manifest says {layout['nbytes']}"
        )
    if hashlib.sha256(data).hexdigest() != layout["sha256"]:
        raise StoreIntegrityError(f"blob {path} fails its checksum")
    out = {}
    for name, sec in layout["sections"].items():
        start = sec["offset"]
        end = start + sec["nbytes"]
        arr = np.frombuffer(data[start:end], dtype=sec["dtype"]).reshape(sec["shape"])
        out[name] = arr.copy()
    return out


def _manifest_path(path: Path, kind: str) -> tuple[Path, Path]:
    """Resolve (manifest, blob) file paths for a store/model directory."""
    path = Path(path)
    return path / f"{kind}.json", path / f"{kind}.blob"


# ---------------------------------------------------------------------------
# store persistence


def save_store(store: StyleStore, path) -> Path:
    """Write a store as <path>/store.json + <path>/store.blob."""
    target = Path(path)
    target.mkdir(parents=True, exist_ok=True)
    manifest_path, blob_path = _manifest_path(target, "store")
    layout = _write_blob(
        blob_path,
        {"raw_stats": store.raw_stats, "descriptors": store.descriptors},
    )
    manifest = {
        "format": "atelier-store",
        "version": store.version,
        "codec_spec": store.codec_spec,
        "channel_counts": list(store.channel_counts),
        "resize_policy": store.resize_policy,
        "schema_hash": store.schema,
        "created_at": store.created_at,
        "records": [
            {
                "image_id": r.image_id,
                "source": r.source,
                "width": r.width,
                "height": r.height,
            }
            for r in store.records
        ],
        "blob": layout,
    }
    manifest_path.write_text(json.dumps(manifest, indent=1))
    return target


def load_store(path, check: bool = True) -> StyleStore:
    """Load a store directory; verifies checksums and stat/descriptor consistency."""
    manifest_path, blob_path = _manifest_path(Path(path), "store")
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise StoreIntegrityError(f"cannot read {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StoreIntegrityError(f"{manifest_path} is not valid JSON: {exc}") from exc

    if manifest.get("format") != "atelier-store":
        raise StoreIntegrityError(f"{manifest_path} is not a store manifest")
    version = manifest.get("version")
    if version != STORE_FORMAT_VERSION:
        raise StoreVersionError(
            f"store format version {version!r} is not supported "
            f"(this build reads version {STORE_FORMAT_VERSION})"
        )

    arrays = _read_blob(blob_path, manifest["blob"])
    store = StyleStore(
        codec_spec=manifest["codec_spec"],
        channel_counts=tuple(manifest["channel_counts"]),
        resize_policy=manifest["resize_policy"],
        records=tuple(CorpusRecord(**r) for r in manifest["records"]),
        raw_stats=arrays["raw_stats"],
        descriptors=arrays["descriptors"],
        created_at=manifest["created_at"],
        version=version,
    )
    if manifest.get("schema_hash") != store.schema:
        raise StoreIntegrityError("stored schema hash does not match the manifest")
    if check:
        for i in range(store.n):
            expected = _descriptor_from_raw32(store.raw_stats[i], store.channel_counts)
            if not np.array_equal(expected, store.descriptors[i]):
                raise StoreIntegrityError(
                    f"descriptor of image {store.records[i].image_id!r} does not "
                    "match its stored raw stats"
                )
    return store


# ---------------------------------------------------------------------------
# model build + persistence


def build_model(
    store: StyleStore,
    k: int,
    seed: int = 0,
    max_iter: int = 200,
    tol: float = 1e-6,
    rank: int | None = None,
) -> ArchetypeModel:
    """Reduce a store's descriptors and fit k archetypes on them.

    The returned model is self-contained: it carries the reducer, the reduced
    corpus, per-archetype raw stats, the layer schema, and the codec spec.
    """
    if store.n < 2:
        raise ValueError("need at least 2 images to fit a model")
    if not 1 <= k <= store.n:
        raise ValueError(f"k must be in [1, {store.n}], got {k}")

    descriptors = store.descriptors.astype(np.float64)
    reducer = fit_reducer(descriptors, rank=rank, seed=seed)
    reduced = reducer.reduce(descriptors).T  # r x n

    model = fit_archetypes(reduced, k=k, seed=seed, max_iter=max_iter, tol=tol)
    arch_raw = compute_archetype_stats_raw(
        model.loadings, store.raw_stats.astype(np.float64)
    )
    return model.with_context(
        reducer=reducer,
        archetype_stats_raw=arch_raw,
        channel_counts=store.channel_counts,
        image_ids=tuple(r.image_id for r in store.records),
        codec_spec=store.codec_spec,
        schema_hash=store.schema,
        resize_policy=store.resize_policy,
    )


def save_model(model: ArchetypeModel, path) -> Path:
    """Write a model as <path>/model.json + <path>/model.blob."""
    if model.reducer is None or model.archetype_stats_raw is None:
        raise ValueError("only models with attached corpus context can be saved")
    target = Path(path)
    target.mkdir(parents=True, exist_ok=True)
    manifest_path, blob_path = _manifest_path(target, "model")
    layout = _write_blob(
        blob_path,
        {
            "reducer_mean": model.reducer.mean,
            "reducer_basis": model.reducer.basis,
            "reducer_singular_values": model.reducer.singular_values,
            "archetypes": model.archetypes,
            "codes": model.codes,
            "loadings": model.loadings,
            "reduced_corpus": model.reduced_corpus,
            "archetype_stats_raw": model.archetype_stats_raw,
        },
    )
    manifest = {
        "format": "atelier-model",
        "version": MODEL_FORMAT_VERSION,
        "k": model.k,
        "n": model.n,
        "reduced_dim": model.reduced_dim,
        "channel_counts": list(model.channel_counts),
        "image_ids": list(model.image_ids),
        "codec_spec": model.codec_spec,
        "schema_hash": model.schema_hash,
        "resize_policy": model.resize_policy,
        "explained_variance": model.reducer.explained_variance,
        "telemetry": {
            "objective_curve": list(model.telemetry.objective_curve),
            "iterations": model.telemetry.iterations,
            "converged": model.telemetry.converged,
            "seed": model.telemetry.seed,
        },
        "created_at": datetime.now(timezone.utc).isoformat(),
        "blob": layout,
    }
    manifest_path.write_text(json.dumps(manifest, indent=1))
    return target


def load_model(path, check: bool = True) -> ArchetypeModel:
    """Load a model directory; verifies checksums and model invariants."""
    manifest_path, blob_path = _manifest_path(Path(path), "model")
    try:
        manifest = json.loads(manifest_path.read_text())
    except OSError as exc:
        raise StoreIntegrityError(f"cannot read {manifest_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StoreIntegrityError(f"{manifest_path} is not valid JSON: {exc}") from exc

    if manifest.get("format") != "atelier-model":
        raise StoreIntegrityError(f"{manifest_path} is not a model manifest")
    version = manifest.get("version")
    if version != MODEL_FORMAT_VERSION:
        raise StoreVersionError(
            f"model format version {version!r} is not supported "
            f"(this build reads version {MODEL_FORMAT_VERSION})"
        )

    arrays = _read_blob(blob_path, manifest["blob"])
    reducer = Reducer(
        mean=arrays["reducer_mean"],
        basis=arrays["reducer_basis"],
        singular_values=arrays["reducer_singular_values"],
        explained_variance=manifest["explained_variance"],
    )
    tele = manifest["telemetry"]
    telemetry = FitTelemetry(
        objective_curve=tuple(tele["objective_curve"]),
        iterations=tele["iterations"],
        converged=tele["converged"],
        seed=tele["seed"],
    )
    model = ArchetypeModel(
        archetypes=arrays["archetypes"],
        codes=arrays["codes"],
        loadings=arrays["loadings"],
        reduced_corpus=arrays["reduced_corpus"],
        telemetry=telemetry,
        reducer=reducer,
        archetype_stats_raw=arrays["archetype_stats_raw"],
        channel_counts=tuple(manifest["channel_counts"]),
        image_ids=tuple(manifest["image_ids"]),
        codec_spec=manifest["codec_spec"],
        schema_hash=manifest["schema_hash"],
        resize_policy=manifest["resize_policy"],
    )
    if check:
        _check_model_invariants(model)
    return model


def _check_model_invariants(model: ArchetypeModel) -> None:
    x = model.reduced_corpus
    scale = max(1.0, float(np.abs(x).max()))
    rebuilt = x @ model.loadings.T
    if float(np.abs(rebuilt - model.archetypes).max()) > 1e-8 * scale:
        raise StoreIntegrityError(
            "archetypes do not equal the loading-weighted reduced corpus"
        )
    for name, mat in (("codes", model.codes), ("loadings", model.loadings)):
        if mat.min(initial=0.0) < 0.0 or np.abs(mat.sum(axis=1) - 1.0).max() > 1e-9:
            raise StoreIntegrityError(f"{name} rows are not simplex vectors")
    basis = model.reducer.basis
    gram = basis.T @ basis
    if float(np.abs(gram - np.eye(basis.shape[1])).max()) > 1e-8:
        raise StoreIntegrityError("reducer basis is not orthonormal")
