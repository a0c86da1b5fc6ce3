"""HTTP service exposing a fitted model: decomposition, mixing, stylization.

The service is read-only with respect to the model: one model artifact is
loaded at startup and every endpoint works against it. Content images are
expensive to encode, so encodings are cached in a bounded LRU keyed by the
upload's content hash; stylization results are computed per request. Outputs
are byte-identical to the CLI given the same inputs.
"""

from __future__ import annotations

import hashlib
import io
import json
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
from fastapi import FastAPI, File, Form, HTTPException, Response, UploadFile
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from atelier.archetypal import (
    ArchetypeModel,
    decomposition_residual,
    encode_style,
    mix_style,
)
from atelier.codecs import CodecStack, codec_from_spec
from atelier.corpus import describe_image, image_to_bytes, load_model, resize_shortest
from atelier.numerics import SimplexVector
from atelier.transfer import (
    ContentEncoding,
    StylizationParams,
    encode_content,
    stylize,
    stylize_baseline,
    synthesize_texture,
)

__all__ = [
    "MAX_UPLOAD_BYTES",
    "ENCODING_CACHE_SIZE",
    "DISPLAY_WEIGHT_THRESHOLD",
    "ServiceState",
    "create_app",
    "parse_weights",
]

MAX_UPLOAD_BYTES = 20 * 1024 * 1024
ENCODING_CACHE_SIZE = 32
DISPLAY_WEIGHT_THRESHOLD = 0.01
_WHITEN_EPS = 1e-8


def parse_weights(raw, k: int) -> SimplexVector:
    """Validate request weights: length k, finite, nonnegative, near-unit sum.

    Sums in [0.5, 2] are renormalized; anything else is rejected. Raises
    ``ValueError`` with a message naming the offending aspect.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1 or arr.size != k:
        raise ValueError(f"weights must be a flat array of length {k}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("weights contain non-finite values")
    if arr.min() < 0.0:
        raise ValueError(f"weights[{int(arr.argmin())}] is negative")
    total = float(arr.sum())
    if not 0.5 <= total <= 2.0:
        raise ValueError(
            f"weights sum to {total:.6g}; expected within [0.5, 2] "
            "(values are renormalized to sum to 1)"
        )
    return SimplexVector(arr / total)


@dataclass
class ServiceState:
    """Loaded model, its codec, and the content-encoding cache."""

    model: ArchetypeModel
    codec: CodecStack
    cache: OrderedDict = field(default_factory=OrderedDict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def cached_encoding(self, digest: str):
        with self.lock:
            hit = self.cache.get(digest)
            if hit is not None:
                self.cache.move_to_end(digest)
            return hit

    def store_encoding(self, digest: str, image: np.ndarray, enc: ContentEncoding):
        with self.lock:
            self.cache[digest] = (image, enc)
            self.cache.move_to_end(digest)
            while len(self.cache) > ENCODING_CACHE_SIZE:
                self.cache.popitem(last=False)


def _decode_upload(data: bytes, shortest_side: int | None = None) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(data)) as img:
            img = img.convert("RGB")
            if shortest_side is not None:
                img = resize_shortest(img, shortest_side)
            arr = np.asarray(img, dtype=np.float64) / 255.0
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise HTTPException(status_code=400, detail={
            "field": "image", "message": f"cannot decode image: {exc}",
        }) from exc
    return np.clip(arr, 0.0, 1.0)


def _png_response(image: np.ndarray, headers: dict | None = None) -> Response:
    buf = io.BytesIO()
    PILImage.fromarray(image_to_bytes(image), mode="RGB").save(buf, format="PNG")
    return Response(content=buf.getvalue(), media_type="image/png", headers=headers)


def _read_upload(upload: UploadFile) -> bytes:
    data = upload.file.read(MAX_UPLOAD_BYTES + 1)
    if len(data) > MAX_UPLOAD_BYTES:
        raise HTTPException(
            status_code=413,
            detail={"field": "image", "message": "upload exceeds 20 MiB"},
        )
    if not data:
        raise HTTPException(
            status_code=400,
            detail={"field": "image", "message": "empty upload"},
        )
    return data


def _weights_or_400(raw_json: str, k: int) -> SimplexVector:
    try:
        parsed = json.loads(raw_json)
    except json.JSONDecodeError as exc:
        raise HTTPException(status_code=400, detail={
            "field": "weights", "message": f"not valid JSON: {exc}",
        }) from exc
    try:
        return parse_weights(parsed, k)
    except ValueError as exc:
        raise HTTPException(
            status_code=400, detail={"field": "weights", "message": str(exc)}
        ) from exc


def _param_or_400(name: str, value: float, low: float, high: float) -> float:
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise HTTPException(status_code=400, detail={
            "field": name, "message": "must be a number",
        }) from exc
    if not low <= out <= high:
        raise HTTPException(status_code=400, detail={
            "field": name, "message": f"must be within [{low}, {high}]",
        })
    return out


def create_app(model_path=None, state: ServiceState | None = None) -> FastAPI:
    """Build the FastAPI app around one loaded model artifact."""
    if state is None:
        if model_path is None:
            raise ValueError("either a model path or a prepared state is required")
        model = load_model(model_path)
        codec = codec_from_spec(model.codec_spec)
        state = ServiceState(model=model, codec=codec)

    app = FastAPI(title="atelier", version="0.1.0")
    app.state.service = state
    model = state.model
    codec = state.codec

    @app.get("/api/model")
    def model_card():
        top = []
        for j in range(model.k):
            order = np.argsort(model.loadings[j])[::-1][:5]
            top.append(
                {
                    "index": j,
                    "top_contributions": [
                        {
                            "image_id": model.image_ids[i],
                            "weight": float(model.loadings[j, i]),
                        }
                        for i in order
                        if model.loadings[j, i] > 0
                    ],
                }
            )
        tele = model.telemetry
        return {
            "k": model.k,
            "n": model.n,
            "schema": {
                "channel_counts": list(model.channel_counts),
                "codec": model.codec_spec,
                "resize_policy": model.resize_policy,
                "schema_hash": model.schema_hash,
            },
            "explained_variance": model.reducer.explained_variance,
            "telemetry": {
                "final_objective": tele.final_objective,
                "iterations": tele.iterations,
                "converged": tele.converged,
                "seed": tele.seed,
            },
            "archetypes": top,
        }

    @app.get("/api/archetypes/{index}/texture")
    def archetype_texture(index: int, seed: int = 0, size: int = 512,
                          iterations: int = 3):
        if not 0 <= index < model.k:
            raise HTTPException(
                status_code=404, detail=f"archetype {index} does not exist"
            )
        if not 1 <= size <= 2048:
            raise HTTPException(status_code=400, detail={
                "field": "size", "message": "size must be within [1, 2048]",
            })
        if not 0 <= iterations <= 16:
            raise HTTPException(status_code=400, detail={
                "field": "iterations",
                "message": "iterations must be within [0, 16]",
            })
        mixed = mix_style(model, SimplexVector.unit(model.k, index))
        image = synthesize_texture(
            mixed, codec, seed=seed, size=size, iterations=iterations
        )
        return _png_response(image)

    policy = model.resize_policy or "none"
    resize_side = int(policy.split(":", 1)[1]) if policy.startswith("shortest:") else None

    @app.post("/api/decompose")
    def decompose(image: UploadFile = File(...)):
        data = _read_upload(image)
        arr = _decode_upload(data, shortest_side=resize_side)
        desc = describe_image(arr, codec)
        alpha = encode_style(model, desc)
        residual = decomposition_residual(model, desc, alpha)
        order = np.argsort(alpha.weights)[::-1]
        return {
            "weights": [float(w) for w in alpha.weights],
            "pairs": [
                {"index": int(j), "weight": float(alpha.weights[j])}
                for j in order
                if alpha.weights[j] >= DISPLAY_WEIGHT_THRESHOLD
            ],
            "residual": residual,
        }

    @app.post("/api/stylize")
    def stylize_endpoint(
        image: UploadFile = File(...),
        weights: str = Form(...),
        gamma: float = Form(0.6),
        delta: float | None = Form(None),
        baseline: bool = Form(False),
    ):
        data = _read_upload(image)
        alpha = _weights_or_400(weights, model.k)
        gamma_v = _param_or_400("gamma", gamma, 0.0, 1.0)
        delta_v = None if delta is None else _param_or_400("delta", delta, 0.0, 1.0)

        digest = hashlib.sha256(data).hexdigest()
        hit = state.cached_encoding(digest)
        if hit is None:
            arr = _decode_upload(data)
            enc = encode_content(arr, codec, _WHITEN_EPS)
            state.store_encoding(digest, arr, enc)
        else:
            arr, enc = hit

        mixed = mix_style(model, alpha)
        if baseline:
            out = stylize_baseline(arr, mixed, codec, gamma=gamma_v, eps=_WHITEN_EPS)
        else:
            params = StylizationParams(gamma=gamma_v, delta=delta_v, eps=_WHITEN_EPS)
            out = stylize(arr, mixed, codec, params, content_encoding=enc)
        return _png_response(out, headers={"X-Content-Hash": digest})

    return app


def run(model_path, host: str = "127.0.0.1", port: int = 8080):
    """Serve the model over HTTP (blocking)."""
    import uvicorn

    uvicorn.run(create_app(model_path), host=host, port=port)
