"""Archetypal style analysis, mixing, and transfer for image collections."""

from atelier.numerics import (
    SimplexVector,
    project_simplex,
    simplex_lsq,
    sym_eig,
    sym_matrix_power,
    truncated_svd,
)
from atelier.style_stats import (
    FeatureMap,
    LayerStats,
    StyleDescriptor,
    Reducer,
    assemble_descriptor,
    compute_layer_stats,
    fit_reducer,
)
from atelier.codecs import CodecStack, load_pretrained_codec, toy_codec
from atelier.archetypal import (
    ArchetypeModel,
    MixedStyle,
    archetype_stats,
    encode_style,
    enhance_code,
    fit_archetypes,
    mix_style,
)
from atelier.transfer import (
    StylizationParams,
    ColoringOp,
    color_transform,
    stylize,
    stylize_baseline,
    synthesize_texture,
)

__version__ = "0.1.0"

__all__ = [
    "SimplexVector",
    "project_simplex",
    "simplex_lsq",
    "sym_eig",
    "sym_matrix_power",
    "truncated_svd",
    "FeatureMap",
    "LayerStats",
    "StyleDescriptor",
    "Reducer",
    "assemble_descriptor",
    "compute_layer_stats",
    "fit_reducer",
    "CodecStack",
    "toy_codec",
    "load_pretrained_codec",
    "ArchetypeModel",
    "MixedStyle",
    "fit_archetypes",
    "encode_style",
    "archetype_stats",
    "mix_style",
    "enhance_code",
    "StylizationParams",
    "ColoringOp",
    "color_transform",
    "stylize",
    "stylize_baseline",
    "synthesize_texture",
    "__version__",
]
