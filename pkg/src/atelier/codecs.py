"""Multi-layer image codecs: paired per-layer encoders and decoders.

Two implementations share one interface. The toy codec is an exact,
seed-reproducible patch transform used everywhere tests need bit-level
guarantees. The pretrained codec executes externally trained encoder/decoder
graphs shipped as a TorchScript archive and is approximate by nature.

Both pad images by reflection to the next multiple of a layer's downsampling
factor before encoding; decoding crops back, so decode(encode(img)) keeps the
original geometry. Codecs never clamp values: intermediate images in the
stylization loop are allowed to leave [0, 1].
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from dataclasses import dataclass

import numpy as np

from atelier.style_stats import FeatureMap

__all__ = [
    "LayerSchema",
    "CodecStack",
    "ToyCodec",
    "PretrainedCodec",
    "CodecLoadError",
    "check_image",
    "toy_codec",
    "load_pretrained_codec",
    "codec_from_spec",
    "TOY_PATCH_SIZES",
    "PRETRAINED_MANIFEST_VERSION",
]

# Dyadic patch sizes of the toy codec's five layers.
TOY_PATCH_SIZES = (1, 2, 4, 8, 16)

PRETRAINED_MANIFEST_VERSION = 1


class CodecLoadError(ValueError):
    """A codec archive could not be loaded or failed validation."""


@dataclass(frozen=True)
class LayerSchema:
    """Shape contract of one codec layer."""

    channels: int
    downsample: int


def check_image(image) -> np.ndarray:
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image array, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image has an empty dimension")
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    return arr


def _pad_to_multiple(arr: np.ndarray, factor: int) -> np.ndarray:
    h, w = arr.shape[:2]
    pad_h = (-h) % factor
    pad_w = (-w) % factor
    if pad_h == 0 and pad_w == 0:
        return arr
    # reflect needs at least 2 samples along the axis; fall back for 1-pixel dims
    mode = "reflect" if min(h, w) > 1 else "edge"
    return np.pad(arr, ((0, pad_h), (0, pad_w), (0, 0)), mode=mode)


class CodecStack:
    """Base interface: a fixed stack of paired encoders/decoders."""

    kind: str = "abstract"
    reconstruction: str = "abstract"

    def __init__(self, layers: tuple[LayerSchema, ...]):
        self._layers = tuple(layers)

    @property
    def layers(self) -> tuple[LayerSchema, ...]:
        return self._layers

    @property
    def num_layers(self) -> int:
        return len(self._layers)

    @property
    def channel_counts(self) -> tuple[int, ...]:
        return tuple(l.channels for l in self._layers)

    def _check_layer(self, layer: int) -> LayerSchema:
        if not 0 <= layer < self.num_layers:
            raise ValueError(f"layer {layer} out of range [0, {self.num_layers})")
        return self._layers[layer]

    def encode(self, image, layer: int) -> FeatureMap:
        raise NotImplementedError

    def decode(self, feature_map: FeatureMap) -> np.ndarray:
        raise NotImplementedError

    def encode_all(self, image) -> list[FeatureMap]:
        return [self.encode(image, l) for l in range(self.num_layers)]

    def spec(self) -> dict:
        """JSON-ready description sufficient to reconstruct this codec."""
        raise NotImplementedError

    def _check_feature_map(self, fm: FeatureMap) -> LayerSchema:
        schema = self._check_layer(fm.layer)
        if fm.channels != schema.channels:
            raise ValueError(
                f"feature map has {fm.channels} channels, layer {fm.layer} "
                f"expects {schema.channels}"
            )
        return schema


def _orthonormal_basis(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Seeded random orthonormal matrix with a fixed sign convention."""
    gauss = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(gauss)
    # make the factorization unique: force positive diagonal of R
    q = q * np.sign(np.diag(r))
    return q


class ToyCodec(CodecStack):
    """Exact patch-basis codec: non-overlapping patches in a fixed orthonormal basis.

    Layer l partitions the image into s_l x s_l patches (reflect-padding to a
    multiple of s_l), flattens each patch across channels, and applies a
    seeded random orthonormal matrix. channels = 3 * s_l**2; decode inverts
    exactly and crops padding away.
    """

    kind = "toy"
    reconstruction = "exact"

    def __init__(self, seed: int = 0, patch_sizes: tuple[int, ...] = TOY_PATCH_SIZES):
        self.seed = int(seed)
        self.patch_sizes = tuple(int(s) for s in patch_sizes)
        if any(s < 1 for s in self.patch_sizes):
            raise ValueError("patch sizes must be positive")
        super().__init__(
            tuple(LayerSchema(channels=3 * s * s, downsample=s) for s in self.patch_sizes)
        )
        rng = np.random.default_rng(self.seed)
        self._bases = tuple(_orthonormal_basis(3 * s * s, rng) for s in self.patch_sizes)

    def encode(self, image, layer: int) -> FeatureMap:
        schema = self._check_layer(layer)
        arr = check_image(image)
        h_img, w_img = arr.shape[:2]
        s = schema.downsample
        padded = _pad_to_multiple(arr, s)
        rows = padded.shape[0] // s
        cols = padded.shape[1] // s
        patches = (
            padded.reshape(rows, s, cols, s, 3)
            .transpose(0, 2, 1, 3, 4)
            .reshape(rows * cols, 3 * s * s)
        )
        activations = self._bases[layer] @ patches.T
        return FeatureMap(
            layer=layer,
            activations=activations,
            grid=(rows, cols),
            image_size=(h_img, w_img),
        )

    def decode(self, feature_map: FeatureMap) -> np.ndarray:
        schema = self._check_feature_map(feature_map)
        s = schema.downsample
        rows, cols = feature_map.grid
        patches = (self._bases[feature_map.layer].T @ feature_map.activations).T
        padded = (
            patches.reshape(rows, cols, s, s, 3)
            .transpose(0, 2, 1, 3, 4)
            .reshape(rows * s, cols * s, 3)
        )
        h_img, w_img = feature_map.image_size
        return np.ascontiguousarray(padded[:h_img, :w_img])

    def spec(self) -> dict:
        return {"kind": "toy", "seed": self.seed, "patch_sizes": list(self.patch_sizes)}


def toy_codec(seed: int = 0) -> ToyCodec:
    """The default exact codec (five dyadic patch scales)."""
    return ToyCodec(seed=seed)


def _file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _validation_image(size: int = 64) -> np.ndarray:
    """Deterministic noise image used to measure round-trip PSNR at load."""
    return np.random.default_rng(1234).random((size, size, 3))


class PretrainedCodec(CodecStack):
    """Codec backed by externally trained TorchScript encoder/decoder graphs.

    The archive is a zip holding ``manifest.json`` plus one TorchScript
    program per layer and direction (``enc1.pt`` .. ``dec5.pt``). The adapter
    applies the manifest's channel normalization around the graphs and the
    same reflect-pad/crop policy as the toy codec. Reconstruction is
    approximate; round-trip PSNR per layer is measured once at load time.
    """

    kind = "pretrained"
    reconstruction = "approximate"

    def __init__(self, layers, encoders, decoders, normalization, path, sha256,
                 validation_psnr):
        super().__init__(tuple(layers))
        self._encoders = tuple(encoders)
        self._decoders = tuple(decoders)
        self._mean = np.asarray(normalization["mean"], dtype=np.float64).reshape(1, 3, 1, 1)
        self._std = np.asarray(normalization["std"], dtype=np.float64).reshape(1, 3, 1, 1)
        self.path = str(path)
        self.sha256 = sha256
        self.validation_psnr = tuple(validation_psnr)

    def _run_graph(self, graph, array: np.ndarray) -> np.ndarray:
        import torch

        with torch.no_grad():
            out = graph(torch.from_numpy(np.ascontiguousarray(array)))
        return out.numpy()

    def encode(self, image, layer: int) -> FeatureMap:
        schema = self._check_layer(layer)
        arr = check_image(image)
        h_img, w_img = arr.shape[:2]
        padded = _pad_to_multiple(arr, schema.downsample)
        batch = padded.transpose(2, 0, 1)[None]  # 1 x 3 x H x W
        batch = (batch - self._mean) / self._std
        out = self._run_graph(self._encoders[layer], batch)
        _, channels, rows, cols = out.shape
        if channels != schema.channels:
            raise CodecLoadError(
                f"encoder {layer} produced {channels} channels, manifest "
                f"declares {schema.channels}"
            )
        return FeatureMap(
            layer=layer,
            activations=out[0].reshape(channels, rows * cols),
            grid=(rows, cols),
            image_size=(h_img, w_img),
        )

    def decode(self, feature_map: FeatureMap) -> np.ndarray:
        schema = self._check_feature_map(feature_map)
        rows, cols = feature_map.grid
        batch = feature_map.activations.reshape(1, schema.channels, rows, cols)
        out = self._run_graph(self._decoders[feature_map.layer], batch)
        out = out * self._std + self._mean
        h_img, w_img = feature_map.image_size
        return np.ascontiguousarray(out[0].transpose(1, 2, 0)[:h_img, :w_img])

    def spec(self) -> dict:
        return {
            "kind": "pretrained",
            "path": self.path,
            "sha256": self.sha256,
            "validation_psnr": list(self.validation_psnr),
        }


def _psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return -10.0 * np.log10(mse)


def load_pretrained_codec(path) -> PretrainedCodec:
    """Load and validate a pretrained codec archive.

    Validates the manifest against the packaged graphs by probing every
    encoder/decoder pair with a test image: channel counts, downsampling
    factors, and round-trip geometry must match the declared schema. Raises
    :class:`CodecLoadError` with the underlying cause on any failure; no
    partially initialized codec is ever returned.
    """
    try:
        import torch
    except ImportError as exc:  # pragma: no cover - torch present in CI
        raise CodecLoadError(
            "pretrained codecs require the optional 'torch' dependency "
            "(pip install atelier[pretrained])"
        ) from exc

    try:
        archive = zipfile.ZipFile(path)
    except (OSError, zipfile.BadZipFile) as exc:
        raise CodecLoadError(f"cannot open codec archive {path}: {exc}") from exc

    with archive:
        try:
            manifest = json.loads(archive.read("manifest.json"))
        except KeyError as exc:
            raise CodecLoadError("archive has no manifest.json") from exc
        except json.JSONDecodeError as exc:
            raise CodecLoadError(f"manifest.json is not valid JSON: {exc}") from exc

        version = manifest.get("version")
        if version != PRETRAINED_MANIFEST_VERSION:
            raise CodecLoadError(
                f"unsupported codec manifest version {version!r} "
                f"(supported: {PRETRAINED_MANIFEST_VERSION})"
            )
        layer_specs = manifest.get("layers")
        if not isinstance(layer_specs, list) or not layer_specs:
            raise CodecLoadError("manifest declares no layers")
        try:
            layers = tuple(
                LayerSchema(channels=int(l["channels"]), downsample=int(l["downsample"]))
                for l in layer_specs
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CodecLoadError(f"malformed layer schema in manifest: {exc}") from exc
        norm = manifest.get("normalization", {"mean": [0.0] * 3, "std": [1.0] * 3})
        if len(norm.get("mean", [])) != 3 or len(norm.get("std", [])) != 3:
            raise CodecLoadError("normalization constants must have 3 channels")
        if any(s == 0 for s in norm["std"]):
            raise CodecLoadError("normalization std must be non-zero")

        encoders = []
        decoders = []
        for direction, bucket in (("enc", encoders), ("dec", decoders)):
            for idx in range(len(layers)):
                name = f"{direction}{idx + 1}.pt"
                try:
                    blob = archive.read(name)
                except KeyError as exc:
                    raise CodecLoadError(f"archive is missing graph {name}") from exc
                try:
                    graph = torch.jit.load(io.BytesIO(blob), map_location="cpu")
                except Exception as exc:
                    raise CodecLoadError(
                        f"failed to load TorchScript graph {name}: {exc}"
                    ) from exc
                graph.eval()
                bucket.append(graph)

    stack = PretrainedCodec(
        layers=layers,
        encoders=encoders,
        decoders=decoders,
        normalization=norm,
        path=path,
        sha256=_file_sha256(path),
        validation_psnr=[0.0] * len(layers),
    )

    # probe every layer with a real image: schema and geometry must hold
    probe = _validation_image()
    psnr = []
    for l, schema in enumerate(layers):
        try:
            fm = stack.encode(probe, l)
            recon = stack.decode(fm)
        except CodecLoadError:
            raise
        except Exception as exc:
            raise CodecLoadError(f"probing layer {l} failed: {exc}") from exc
        if recon.shape != probe.shape:
            raise CodecLoadError(
                f"layer {l} round-trip changed image shape "
                f"{probe.shape} -> {recon.shape}"
            )
        expected_grid = -(-probe.shape[0] // schema.downsample)
        if fm.grid[0] != expected_grid:
            raise CodecLoadError(
                f"layer {l} downsampling disagrees with manifest "
                f"(grid {fm.grid} for factor {schema.downsample})"
            )
        psnr.append(_psnr(probe, recon))

    stack.validation_psnr = tuple(psnr)
    return stack


def codec_from_spec(spec: dict) -> CodecStack:
    """Reconstruct a codec from the JSON spec stored in a manifest."""
    kind = spec.get("kind")
    if kind == "toy":
        return ToyCodec(
            seed=int(spec.get("seed", 0)),
            patch_sizes=tuple(spec.get("patch_sizes", TOY_PATCH_SIZES)),
        )
    if kind == "pretrained":
        path = spec.get("path")
        if not path:
            raise CodecLoadError("pretrained codec spec has no path")
        stack = load_pretrained_codec(path)
        expected = spec.get("sha256")
        if expected and stack.sha256 != expected:
            raise CodecLoadError(
                f"codec archive {path} does not match the recorded fingerprint"
            )
        return stack
    raise CodecLoadError(f"unknown codec kind {kind!r}")
