"""Command line entry points: ingest, fit, encode, stylize, synthesize, serve.

Domain failures (bad inputs, corrupt artifacts, schema mismatches) exit with
status 2 and a one-line message on stderr; tracebacks are reserved for bugs.
"""

from __future__ import annotations

import functools
import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from atelier.archetypal import (
    decomposition_residual,
    encode_style,
    enhance_code,
    mix_style,
)
from atelier.codecs import codec_from_spec, load_pretrained_codec, toy_codec
from atelier.corpus import (
    DEFAULT_RESIZE_POLICY,
    build_model,
    describe_image,
    ingest as ingest_corpus,
    load_image,
    load_model,
    load_store,
    save_image,
    save_model,
    save_store,
)
from atelier.numerics import SimplexVector
from atelier.service import DISPLAY_WEIGHT_THRESHOLD, parse_weights
from atelier.transfer import (
    StylizationParams,
    stylize as stylize_image,
    stylize_baseline,
    synthesize_texture,
)

EXIT_DOMAIN_ERROR = 2


def _fail(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_DOMAIN_ERROR)


def _domain_guard(fn):
    """Convert domain exceptions into exit code 2 with a clean message."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ValueError, OSError) as exc:
            _fail(str(exc))

    return wrapper


def _resolve_codec(codec_arg: str):
    if codec_arg == "toy":
        return toy_codec()
    return load_pretrained_codec(codec_arg)


def _load_model_and_codec(model_path):
    model = load_model(model_path)
    return model, codec_from_spec(model.codec_spec)


def _parse_alpha(text: str, k: int) -> SimplexVector:
    """Accept a JSON array or comma-separated floats; validate against k."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError:
        try:
            raw = [float(part) for part in text.split(",") if part.strip()]
        except ValueError:
            raise ValueError(f"cannot parse weights from {text!r}")
    return parse_weights(raw, k)


def _echo_decomposition(weights: np.ndarray, residual: float):
    order = np.argsort(weights)[::-1]
    shown = False
    for j in order:
        if weights[j] < DISPLAY_WEIGHT_THRESHOLD:
            break
        click.echo(f"archetype {int(j):3d}  {weights[j] * 100:6.1f}%")
        shown = True
    if not shown:
        click.echo("(no archetype above the 1% display threshold)")
    click.echo(f"residual: {residual:.6f}")


@click.group()
@click.version_option(package_name="atelier")
def main():
    """Learn archetypal styles from image corpora and reuse them."""


@main.command()
@click.argument("source_dir", type=click.Path(exists=True, file_okay=False))
@click.argument("store_path", type=click.Path())
@click.option("--codec", default="toy", show_default=True,
              help="'toy' or path to a pretrained codec archive.")
@click.option("--resize", default=DEFAULT_RESIZE_POLICY, show_default=True,
              help="'none' or 'shortest:<pixels>'.")
@_domain_guard
def ingest(source_dir, store_path, codec, resize):
    """Scan SOURCE_DIR for images and write a style store to STORE_PATH."""
    stack = _resolve_codec(codec)
    store = ingest_corpus(source_dir, stack, resize_policy=resize)
    save_store(store, store_path)
    click.echo(f"ingested {store.n} images -> {store_path}")
    click.echo(f"schema: {store.schema}")


@main.command()
@click.argument("store_path", type=click.Path(exists=True))
@click.argument("model_path", type=click.Path())
@click.option("--k", required=True, type=click.IntRange(min=1),
              help="Number of archetypes.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--max-iter", default=200, show_default=True,
              type=click.IntRange(min=1))
@click.option("--tol", default=1e-6, show_default=True, type=float)
@click.option("--rank", default=None, type=click.IntRange(min=1),
              help="Reducer rank (default: min(4096, n-1, D)).")
@click.option("--report", "report_path", default=None, type=click.Path(),
              help="Where to write the fit report JSON "
                   "(default: MODEL_PATH/report.json).")
@_domain_guard
def fit(store_path, model_path, k, seed, max_iter, tol, rank, report_path):
    """Fit K archetypes on a style store and write the model + a fit report."""
    store = load_store(store_path)
    model = build_model(store, k, seed=seed, max_iter=max_iter, tol=tol, rank=rank)
    save_model(model, model_path)

    tele = model.telemetry
    report = {
        "k": model.k,
        "n": model.n,
        "seed": seed,
        "rank": model.reduced_dim,
        "explained_variance": model.reducer.explained_variance,
        "iterations": tele.iterations,
        "converged": tele.converged,
        "final_objective": tele.final_objective,
        "objective_curve": list(tele.objective_curve),
        "schema_hash": model.schema_hash,
    }
    report_file = (
        Path(report_path) if report_path else Path(model_path) / "report.json"
    )
    report_file.parent.mkdir(parents=True, exist_ok=True)
    report_file.write_text(json.dumps(report, indent=2))

    click.echo(f"fit k={model.k} on n={model.n}: "
               f"objective {tele.final_objective:.6e} "
               f"after {tele.iterations} iterations "
               f"({'converged' if tele.converged else 'iteration cap'})")
    click.echo(f"explained variance: {model.reducer.explained_variance:.4f}")
    click.echo(f"report: {report_file}")


@main.command()
@click.argument("model_path", type=click.Path(exists=True))
@click.argument("image_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "json_path", default=None, type=click.Path(),
              help="Also write the full weight vector as JSON.")
@_domain_guard
def encode(model_path, image_path, json_path):
    """Decompose IMAGE_PATH onto the model's archetypes."""
    model, codec = _load_model_and_codec(model_path)
    image = load_image(image_path, model.resize_policy)
    desc = describe_image(image, codec)
    alpha = encode_style(model, desc)
    residual = decomposition_residual(model, desc, alpha)
    _echo_decomposition(alpha.weights, residual)
    if json_path:
        payload = {
            "weights": [float(w) for w in alpha.weights],
            "residual": residual,
        }
        Path(json_path).write_text(json.dumps(payload, indent=2))


@main.command()
@click.argument("model_path", type=click.Path(exists=True))
@click.argument("content_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("output_path", type=click.Path())
@click.option("--alpha", default=None,
              help="Mixing weights: JSON array or comma-separated floats.")
@click.option("--enhance", default=None, type=int, metavar="J",
              help="Pull the content's own decomposition toward archetype J.")
@click.option("--strength", default=0.5, show_default=True,
              type=click.FloatRange(0.0, 1.0),
              help="Enhancement strength (with --enhance).")
@click.option("--gamma", default=0.6, show_default=True,
              type=click.FloatRange(0.0, 1.0))
@click.option("--delta", default=None, type=click.FloatRange(0.0, 1.0),
              help="Chained-term share (default: same as gamma).")
@click.option("--baseline", is_flag=True,
              help="Use the single-pass chained formulation.")
@_domain_guard
def stylize(model_path, content_path, output_path, alpha, enhance, strength,
            gamma, delta, baseline):
    """Re-render CONTENT_PATH in a mixed archetypal style."""
    if (alpha is None) == (enhance is None):
        raise ValueError("exactly one of --alpha or --enhance is required")
    model, codec = _load_model_and_codec(model_path)

    if alpha is not None:
        code = _parse_alpha(alpha, model.k)
    else:
        if not 0 <= enhance < model.k:
            raise ValueError(
                f"archetype {enhance} does not exist (model has k={model.k})"
            )
        stats_view = load_image(content_path, model.resize_policy)
        own = encode_style(model, describe_image(stats_view, codec))
        code = enhance_code(own, enhance, strength)
        top = int(np.argmax(code.weights))
        click.echo(
            f"enhanced toward archetype {enhance} "
            f"(strength {strength:.2f}, top weight now "
            f"{code.weights[top] * 100:.1f}% on archetype {top})"
        )

    mixed = mix_style(model, code)
    content = load_image(content_path, "none")
    if baseline:
        out = stylize_baseline(content, mixed, codec, gamma=gamma)
    else:
        params = StylizationParams(gamma=gamma, delta=delta)
        out = stylize_image(content, mixed, codec, params)
    save_image(out, output_path)
    click.echo(f"wrote {output_path}")


@main.command()
@click.argument("model_path", type=click.Path(exists=True))
@click.argument("output_dir", type=click.Path(file_okay=False))
@click.option("--archetype", default=None, type=int, metavar="J",
              help="Synthesize one archetype (default: all).")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--size", default=512, show_default=True,
              type=click.IntRange(min=1))
@click.option("--iterations", default=3, show_default=True,
              type=click.IntRange(min=0))
@_domain_guard
def synthesize(model_path, output_dir, archetype, seed, size, iterations):
    """Render archetype textures from seeded noise into OUTPUT_DIR."""
    model, codec = _load_model_and_codec(model_path)
    if archetype is not None and not 0 <= archetype < model.k:
        raise ValueError(
            f"archetype {archetype} does not exist (model has k={model.k})"
        )
    indices = range(model.k) if archetype is None else [archetype]
    out_dir = Path(output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for j in indices:
        mixed = mix_style(model, SimplexVector.unit(model.k, j))
        texture = synthesize_texture(
            mixed, codec, seed=seed, size=size, iterations=iterations
        )
        target = out_dir / f"archetype_{j:02d}_seed{seed}.png"
        save_image(texture, target)
        click.echo(f"wrote {target}")


@main.command()
@click.argument("model_path", required=False, type=click.Path(exists=True))
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8080, show_default=True, type=int)
@_domain_guard
def serve(model_path, host, port):
    """Serve the model over HTTP (MODEL_PATH or $ATELIER_MODEL)."""
    path = model_path or os.environ.get("ATELIER_MODEL")
    if not path:
        raise ValueError("pass MODEL_PATH or set ATELIER_MODEL")
    from atelier.service import run

    run(path, host=host, port=port)


if __name__ == "__main__":
    main()
