"""Carton dataset synthesis by foreground texture replacement.

Labeled carton instances are split into their visible faces, occluded faces
are completed to parallelograms, and each face is re-textured with a
perspective-warped patch blended in with a Gaussian-feathered mask.
"""

from .annotations import (
    LabeledInstance,
    Occlusion,
    Point2D,
    SkeletonRecord,
    parse_skeleton_annotations,
    serialize_skeleton_annotations,
)
from .errors import CartonSynthError
from .pipeline import SynthesisConfig, render_overlays, run_generation, synthesize_image
from .reconstruction import reconstruct_multi, reconstruct_single
from .segmentation import cluster_faceted_points, extract_surfaces, segment_instance
from .textures import TextureLibrary, load_texture_manifest, sample_patch
from .validation import validate_instance
from .warp import compose, gaussian_alpha, rasterize_quad_mask, solve_homography, warp_texture

__version__ = "0.1.0"

__all__ = [
    "CartonSynthError",
    "LabeledInstance",
    "Occlusion",
    "Point2D",
    "SkeletonRecord",
    "SynthesisConfig",
    "TextureLibrary",
    "cluster_faceted_points",
    "compose",
    "extract_surfaces",
    "gaussian_alpha",
    "load_texture_manifest",
    "parse_skeleton_annotations",
    "rasterize_quad_mask",
    "reconstruct_multi",
    "reconstruct_single",
    "render_overlays",
    "run_generation",
    "sample_patch",
    "segment_instance",
    "serialize_skeleton_annotations",
    "solve_homography",
    "synthesize_image",
    "validate_instance",
    "warp_texture",
]
