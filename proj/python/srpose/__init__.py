"""Super-resolution routing for human pose estimation."""

import json as _json

from . import _srpose
from ._srpose import (
    BackendError,
    DimensionError,
    GeometryError,
    ParseError,
    ValidationError,
    crowd_overlap,
    cubic_weights,
    heatmap_decode,
    heatmap_encode,
    heatmap_l2,
    iou,
    oks,
    percent_change,
    polygon_area,
    psnr,
    resample,
    rle_area,
    route,
    scaled_dimension,
    subgroup_of,
)


def evaluate(annotations, results, mode="keypoints"):
    """Score a COCO results file; returns the report as a dict."""
    return _json.loads(_srpose.evaluate_files(str(annotations), str(results), mode))


__all__ = [name for name in dir() if not name.startswith("_")]
