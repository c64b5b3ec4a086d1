"""Multi-scale anisotropic blob detection toolkit.

Detects elliptical blobs with a bank of second-order anisotropic Gaussian
directional derivative filters, selects candidates as scale-space extrema
of a normalized directional response measure, and describes each blob by
its short/long axis and orientation.  Ships with Hessian-determinant and
difference-of-Gaussians baselines, a synthetic-scene evaluation harness,
a patch-descriptor matcher, and a command line front end.
"""

from .image import (
    GrayImage,
    Pyramid,
    ImageFormatError,
    load_gray,
    save_pgm,
    save_ppm,
    pyramid_depth,
    build_pyramid,
)
from .filters import (
    FilterParams,
    FilterBank,
    KernelGrid,
    ResponseStack,
    default_bank,
    aniso_gaussian_kernel,
    foagdd_kernel,
    soagdd_kernel,
    convolve,
    soagdd_response_stack,
    format_kernel_dump,
)
from .detector import (
    DetectorParams,
    MeasureStack,
    BlobCandidate,
    Blob,
    ShapeEstimate,
    blob_measure,
    scale_space_extrema,
    estimate_shape,
    detect_blobs,
    blobs_to_jsonl,
    blobs_from_jsonl,
    blobs_to_csv,
    blobs_from_csv,
)
from .baselines import hessian_det_detect, dog_detect, dog_detect_pyramid, DoGStack, HessianResponse
from .synth import (
    TruthBlob,
    SceneSpec,
    EvalReport,
    render_blob_scene,
    evaluate_detections,
    project_points,
    warp_image,
    repeatability,
    scene_to_json,
    scene_from_json,
    truth_to_json,
    truth_from_json,
    report_to_json,
    report_table,
)
from .matching import MatchPair, describe, match_descriptors

__version__ = "0.1.0"

__all__ = [
    "GrayImage", "Pyramid", "ImageFormatError", "load_gray", "save_pgm",
    "save_ppm", "pyramid_depth", "build_pyramid",
    "FilterParams", "FilterBank", "KernelGrid", "ResponseStack",
    "default_bank", "aniso_gaussian_kernel", "foagdd_kernel", "soagdd_kernel",
    "convolve", "soagdd_response_stack", "format_kernel_dump",
    "DetectorParams", "MeasureStack", "BlobCandidate", "Blob", "ShapeEstimate",
    "blob_measure", "scale_space_extrema", "estimate_shape", "detect_blobs",
    "blobs_to_jsonl", "blobs_from_jsonl", "blobs_to_csv", "blobs_from_csv",
    "hessian_det_detect", "dog_detect", "dog_detect_pyramid", "DoGStack",
    "HessianResponse",
    "TruthBlob", "SceneSpec", "EvalReport", "render_blob_scene",
    "evaluate_detections", "project_points", "warp_image", "repeatability",
    "scene_to_json", "scene_from_json", "truth_to_json", "truth_from_json",
    "report_to_json", "report_table",
    "MatchPair", "describe", "match_descriptors",
]
