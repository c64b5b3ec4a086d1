"""Classical comparators: Hessian-determinant and difference-of-Gaussian blobs.

Both detectors report circles (short axis = long axis, orientation 0); they
localize and scale-select but carry no shape estimate, which is the contrast
the anisotropic detector is measured against.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .detector import Blob, dedupe_blobs, sort_blobs
from .image import GrayImage, as_pixels, build_pyramid

DEFAULT_VARSIGMA = 6.0
DEFAULT_DOG_K = 2.0 ** (1.0 / 3.0)

# curvature stencil: d2/dxdy by central differences, quarter weights
_XY_STENCIL = np.array([[0.25, 0.0, -0.25],
                        [0.0, 0.0, 0.0],
                        [-0.25, 0.0, 0.25]])


@dataclass(frozen=True)
class HessianResponse:
    """Scale-normalized Hessian determinant sigma^4*(hxx*hyy - hxy^2)."""

    det: np.ndarray
    sigma: float


@dataclass(frozen=True)
class DoGStack:
    """Difference-of-Gaussian levels; level i = G(k^(i+1)*sigma0) - G(k^i*sigma0)."""

    levels: tuple
    sigma0: float
    k: float
    varsigma: float

    def __post_init__(self):
        if len(self.levels) < 3:
            raise ValueError("need at least 3 DoG levels")
        if self.sigma0 <= 0 or self.k <= 1.0 or self.varsigma <= 1.0:
            raise ValueError("require sigma0 > 0, k > 1, varsigma > 1")


def _smooth(pixels: np.ndarray, sigma: float) -> np.ndarray:
    return ndimage.gaussian_filter(pixels, sigma, mode="reflect")


def hessian_response(img, sigma: float) -> HessianResponse:
    """Smooth, differentiate with central stencils, normalize by sigma^4."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    sm = _smooth(as_pixels(img), sigma)
    hxx = ndimage.correlate1d(sm, [1.0, -2.0, 1.0], axis=1, mode="reflect")
    hyy = ndimage.correlate1d(sm, [1.0, -2.0, 1.0], axis=0, mode="reflect")
    hxy = ndimage.correlate(sm, _XY_STENCIL, mode="reflect")
    det = sigma ** 4 * (hxx * hyy - hxy * hxy)
    return HessianResponse(det=det, sigma=float(sigma))


def _unique_spatial_max(a: np.ndarray) -> np.ndarray:
    # strict unique maximum over the 3x3 window; 1 px border excluded
    others = np.ones((3, 3), dtype=bool)
    others[1, 1] = False
    ok = a > ndimage.maximum_filter(a, footprint=others, mode="constant", cval=-np.inf)
    ok[:1] = False
    ok[-1:] = False
    ok[:, :1] = False
    ok[:, -1:] = False
    return ok


def hessian_det_detect(img, sigmas, threshold: float) -> list:
    """Unique 3x3 maxima of |normalized det(H)| above threshold, per scale.

    Scales are treated independently; each detection is a circle of radius
    sigma.  Result sorted by descending response.
    """
    sig = [float(s) for s in sigmas]
    if not sig:
        raise ValueError("scale list must be non-empty")
    if any(b <= a for a, b in zip(sig, sig[1:])):
        raise ValueError("scales must be strictly increasing")
    blobs = []
    for s in sig:
        mag = np.abs(hessian_response(img, s).det)
        ok = _unique_spatial_max(mag) & (mag > threshold)
        for y, x in np.argwhere(ok):
            blobs.append(Blob(cx=float(x), cy=float(y), short_axis=s, long_axis=s,
                              orientation=0.0, response=float(mag[y, x]), layer=0))
    return sort_blobs(blobs)


def dog_stack(img, sigma0: float, k: float, levels: int, varsigma: float) -> DoGStack:
    pixels = as_pixels(img)
    diffs = []
    lo = _smooth(pixels, sigma0)
    for i in range(levels):
        hi = _smooth(pixels, k ** (i + 1) * sigma0)
        diffs.append(hi - lo)
        lo = hi
    return DoGStack(levels=tuple(diffs), sigma0=float(sigma0), k=float(k),
                    varsigma=float(varsigma))


def _edge_like(d: np.ndarray, y: int, x: int, varsigma: float) -> bool:
    dxx = d[y, x + 1] - 2.0 * d[y, x] + d[y, x - 1]
    dyy = d[y + 1, x] - 2.0 * d[y, x] + d[y - 1, x]
    dxy = 0.25 * (d[y + 1, x + 1] - d[y + 1, x - 1] - d[y - 1, x + 1] + d[y - 1, x - 1])
    tr = dxx + dyy
    det = dxx * dyy - dxy * dxy
    # trace^2/det >= (v+1)^2/v iff the curvature ratio exceeds v; det <= 0 is a saddle
    return det <= 0.0 or tr * tr * varsigma >= det * (varsigma + 1.0) ** 2


def dog_detect(img, sigma0: float = 1.6, k: float = DEFAULT_DOG_K, levels: int = 3,
               varsigma: float = DEFAULT_VARSIGMA, threshold: float = 2.0) -> list:
    """Unique 3x3x3 extrema of |D| above threshold, minus edge-like points.

    Only interior levels carry a full scale neighborhood and can produce
    detections; each detection is a circle at the level's lower scale
    k^i*sigma0.
    """
    if levels < 3:
        raise ValueError("need at least 3 DoG levels")
    stack = dog_stack(img, sigma0, k, levels, varsigma)
    mag = np.abs(np.stack(stack.levels))
    others = np.ones((3, 3, 3), dtype=bool)
    others[1, 1, 1] = False
    unique = mag > ndimage.maximum_filter(mag, footprint=others, mode="constant", cval=-np.inf)
    blobs = []
    for i in range(1, levels - 1):
        ok = unique[i] & (mag[i] > threshold)
        ok[:1] = False
        ok[-1:] = False
        ok[:, :1] = False
        ok[:, -1:] = False
        d = stack.levels[i]
        scale = k ** i * sigma0
        for y, x in np.argwhere(ok):
            if _edge_like(d, int(y), int(x), varsigma):
                continue
            blobs.append(Blob(cx=float(x), cy=float(y), short_axis=scale, long_axis=scale,
                              orientation=0.0, response=float(mag[i, y, x]), layer=0))
    return sort_blobs(blobs)


def dog_detect_pyramid(img, t: int = 2, sigma0: float = 1.6, k: float = DEFAULT_DOG_K,
                       levels: int = 3, varsigma: float = DEFAULT_VARSIGMA,
                       threshold: float = 2.0) -> list:
    """dog_detect per pyramid layer, mapped to base coordinates and deduplicated.

    One DoG octave per layer; the same cross-layer duplicate rule as the main
    detector keeps the stronger of two re-detections.
    """
    pyr = build_pyramid(img, t)
    blobs = []
    for li, layer in enumerate(pyr.layers):
        factor = float(2 ** li)
        for b in dog_detect(layer, sigma0, k, levels, varsigma, threshold):
            blobs.append(Blob(cx=b.cx * factor, cy=b.cy * factor,
                              short_axis=b.short_axis * factor,
                              long_axis=b.long_axis * factor,
                              orientation=b.orientation, response=b.response, layer=li))
    return dedupe_blobs(sort_blobs(blobs))
