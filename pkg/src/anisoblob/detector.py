"""Multi-scale blob detection from directional second-derivative responses.

Pipeline: build an image pyramid, filter each layer with the full
(scale, anisotropy, orientation) kernel bank, accumulate the orientation sum
into a scale-normalized blob measure

    eta[s, a](y, x) = | sigma_s^2 * sum_k L[s, a, k](y, x) |,

pick scale-space maxima of the measure over 7x7 spatial windows and the two
neighboring scales, threshold, estimate an elliptical shape from the
per-orientation responses at the winning anisotropy, map everything back to
base-image coordinates, and deduplicate across pyramid layers.

Candidate selection runs on the isotropic (smallest-rho) measure channel; the
elongated channels under-normalize across scales and drag the scale estimate
upward for round structures.  The anisotropy index is still chosen by argmax
over the full rho grid at each accepted candidate, which is what the shape
step consumes.
"""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .filters import FilterBank, ResponseStack, bank_kernels, convolve_batch, default_bank, thread_count, _run_slices
from .image import GrayImage, as_pixels, build_pyramid

DEFAULT_THRESHOLD = 223.0
NEIGHBORHOOD_RADIUS = 3  # 7x7 spatial window, offsets in {0, +-1, +-2, +-3}
SQRT2 = math.sqrt(2.0)
# An orientation profile this flat carries no direction information; the
# guard catches near-exact ties, not noise-level variation (circular blobs
# under mild noise still spread a few percent and keep their channel's shape).
ISO_PROFILE_TOL = 0.01

BLOB_FIELDS = ("cx", "cy", "short_axis", "long_axis", "orientation", "response", "layer")


@dataclass(frozen=True)
class DetectorParams:
    """Detection settings: kernel bank, pyramid exponent, response threshold.

    The spatial candidate neighborhood is the fixed 7x7 window (offsets
    0, +-1, +-2, +-3 in both axes).
    """

    bank: FilterBank = field(default_factory=default_bank)
    t: int = 2
    threshold: float = DEFAULT_THRESHOLD

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("pyramid exponent t must be >= 0")
        if not (math.isfinite(self.threshold) and self.threshold >= 0):
            raise ValueError("threshold must be finite and >= 0")


@dataclass(frozen=True)
class MeasureStack:
    """Blob measure per (scale, anisotropy, pixel) plus its anisotropy reduction.

    eta_max[s] = max over a of eta[s, a]; a_star holds the argmax index, ties
    broken toward the smaller index.
    """

    eta: np.ndarray
    eta_max: np.ndarray
    a_star: np.ndarray

    def __post_init__(self):
        if self.eta.ndim != 4:
            raise ValueError("eta must be indexed (scale, anisotropy, y, x)")
        expect = self.eta.shape[:1] + self.eta.shape[2:]
        if self.eta_max.shape != expect or self.a_star.shape != expect:
            raise ValueError("eta_max/a_star shapes inconsistent with eta")


@dataclass(frozen=True)
class BlobCandidate:
    """Scale-space maximum prior to thresholding and shape estimation."""

    layer: int
    x: int
    y: int
    s: int
    a: int
    eta: float

    def __post_init__(self):
        if min(self.layer, self.x, self.y, self.s, self.a) < 0:
            raise ValueError("candidate indices must be non-negative")
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise ValueError("eta must be finite and >= 0")


@dataclass(frozen=True)
class Blob:
    """Detected blob in base-image coordinates.

    short_axis/long_axis are the ellipse's minor/major axes (pixels);
    orientation is the short-axis direction in [0, pi).
    """

    cx: float
    cy: float
    short_axis: float
    long_axis: float
    orientation: float
    response: float
    layer: int

    def __post_init__(self):
        vals = (self.cx, self.cy, self.short_axis, self.long_axis, self.orientation, self.response)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("blob fields must be finite")
        if self.short_axis <= 0 or self.long_axis < self.short_axis:
            raise ValueError("axes must satisfy 0 < short_axis <= long_axis")
        if not 0.0 <= self.orientation < math.pi:
            raise ValueError("orientation must lie in [0, pi)")
        if self.layer < 0:
            raise ValueError("layer must be >= 0")

    @property
    def axis_ratio(self) -> float:
        return self.long_axis / self.short_axis


@dataclass(frozen=True)
class ShapeEstimate:
    """Elliptical shape from the per-orientation response profile."""

    orientation: float
    short_axis: float
    long_axis: float
    isotropic: bool


def _measure_from_eta(eta: np.ndarray) -> MeasureStack:
    return MeasureStack(eta=eta, eta_max=eta.max(axis=1), a_star=eta.argmax(axis=1))


def blob_measure(stack: ResponseStack, bank: FilterBank) -> MeasureStack:
    """Scale-normalized orientation-sum measure |sigma^2 * sum_k L_k| per (s, a)."""
    resp = stack.responses
    S, A, K = len(bank.sigmas), len(bank.rhos), bank.orientations
    if resp.shape[:3] != (S, A, K):
        raise ValueError(f"stack shape {resp.shape[:3]} does not match bank ({S}, {A}, {K})")
    eta = np.empty((S, A) + resp.shape[3:], dtype=np.float64)
    for si in range(S):
        s2 = bank.sigmas[si] ** 2
        for ai in range(A):
            acc = resp[si, ai, 0].copy()
            for ki in range(1, K):
                acc += resp[si, ai, ki]
            np.abs(s2 * acc, out=eta[si, ai])
    return _measure_from_eta(eta)


def scale_space_extrema(m: MeasureStack, p: DetectorParams, layer: int = 0) -> list:
    """Candidates where eta_max is the unique 7x7 spatial maximum at its scale
    and strictly exceeds the full 7x7 window maxima at both neighboring scales
    (only the existing neighbor at the first and last scale).

    Exact ties reject every tied pixel.  Pixels within 3 of the border are
    excluded so the full window always exists.  The threshold is not applied
    here.
    """
    e = m.eta_max
    S = e.shape[0]
    if S < 2:
        raise ValueError("need at least 2 scales for scale-space comparison")
    r = NEIGHBORHOOD_RADIUS
    side = 2 * r + 1
    others = np.ones((side, side), dtype=bool)
    others[r, r] = False
    full = np.stack([
        ndimage.maximum_filter(e[s], size=side, mode="constant", cval=-np.inf)
        for s in range(S)
    ])
    out = []
    for s in range(S):
        ok = e[s] > ndimage.maximum_filter(e[s], footprint=others, mode="constant", cval=-np.inf)
        if s > 0:
            ok &= e[s] > full[s - 1]
        if s < S - 1:
            ok &= e[s] > full[s + 1]
        ok[:r] = False
        ok[-r:] = False
        ok[:, :r] = False
        ok[:, -r:] = False
        for y, x in np.argwhere(ok):
            out.append(BlobCandidate(layer=layer, x=int(x), y=int(y), s=s,
                                     a=int(m.a_star[s, y, x]), eta=float(e[s, y, x])))
    return out


def _shape_from_profile(abs_l: np.ndarray, sigma: float, rho: float, thetas) -> ShapeEstimate:
    k_star = int(np.argmax(abs_l))
    mx = float(abs_l[k_star])
    mn = float(abs_l.min())
    iso = (mx - mn) <= ISO_PROFILE_TOL * mx
    long_axis = sigma if iso else rho * sigma
    return ShapeEstimate(orientation=thetas[k_star], short_axis=sigma,
                         long_axis=long_axis, isotropic=iso)


def estimate_shape(stack: ResponseStack, c: BlobCandidate, bank: FilterBank) -> ShapeEstimate:
    """Ellipse at a candidate: orientation = direction of the strongest
    absolute response; short axis sigma_s, long axis rho_a*sigma_s.

    If the largest and smallest |L| over orientations differ by at most
    ISO_PROFILE_TOL relative, the blob is flagged isotropic and the long
    axis collapses to sigma_s.
    """
    resp = stack.responses
    S, A, K = len(bank.sigmas), len(bank.rhos), bank.orientations
    if not (c.s < S and c.a < A and c.y < resp.shape[3] and c.x < resp.shape[4]):
        raise ValueError("candidate indices out of range for this stack")
    abs_l = np.abs(resp[c.s, c.a, :, c.y, c.x])
    return _shape_from_profile(abs_l, bank.sigmas[c.s], bank.rhos[c.a], bank.thetas)


def _layer_eta0(pixels: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Isotropic-channel measure for one pyramid layer, (S, H, W).

    Only the smallest-rho channel is needed across the whole frame (candidate
    selection); the remaining anisotropy channels are evaluated lazily at
    accepted candidates.  Scales are independent and each is written by
    exactly one worker, so the result does not depend on the worker count.
    """
    kernels = bank_kernels(bank)
    S, K = len(bank.sigmas), bank.orientations
    eta = np.empty((S,) + pixels.shape, dtype=np.float64)

    def scale_job(si):
        def run():
            resp = convolve_batch(pixels, kernels[si][0])
            acc = resp[0]
            for ki in range(1, K):
                acc += resp[ki]
            np.abs(bank.sigmas[si] ** 2 * acc, out=eta[si])
        return run

    _run_slices([scale_job(si) for si in range(S)], thread_count())
    return eta


def _point_responses(pads: dict, pixels: np.ndarray, y: int, x: int, kernels) -> np.ndarray:
    """L_k(y, x) for one (s, a) kernel row, matching convolve's boundary.

    Evaluates the convolution at a single pixel: window dot product against
    the flipped kernel on a mirror-padded image.  Padded images are cached per
    radius in `pads`.
    """
    r = kernels[0].radius
    pad = pads.get(r)
    if pad is None:
        pad = np.pad(pixels, r, mode="symmetric")
        pads[r] = pad
    win = pad[y:y + 2 * r + 1, x:x + 2 * r + 1]
    return np.array([float(np.sum(win * k.weights[::-1, ::-1])) for k in kernels])


def _is_duplicate(b: Blob, kept: Blob) -> bool:
    if b.layer == kept.layer:
        return False
    limit = 2.0 * 2 ** max(b.layer, kept.layer)
    if math.hypot(b.cx - kept.cx, b.cy - kept.cy) > limit:
        return False
    lo, hi = sorted((b.short_axis, kept.short_axis))
    return hi <= SQRT2 * (1.0 + 1e-9) * lo


def dedupe_blobs(blobs: list) -> list:
    """Drop cross-layer re-detections of one structure, keeping the stronger.

    Input must already be sorted by descending response.  Two blobs from
    different layers are duplicates when their centers are within
    2*2^max(layer) px (the coarser layer's quantization) and their short axes
    agree within a factor sqrt(2).
    """
    kept = []
    for b in blobs:
        if not any(_is_duplicate(b, k) for k in kept):
            kept.append(b)
    return kept


def sort_blobs(blobs: list) -> list:
    return sorted(blobs, key=lambda b: (-b.response, b.cy, b.cx))


def detect_blobs(img: GrayImage, p: DetectorParams = None) -> list:
    """Run the full pipeline on an image; blobs in base coordinates, sorted
    by descending response (ties by (cy, cx)).

    Pyramid layers too small to hold the largest bank kernel are skipped
    (processing stops at the first such layer).  Candidate centers, axes are
    mapped to the base image by the layer's power-of-two factor; responses are
    raw per-layer measure values and the threshold applies to them directly.
    """
    if p is None:
        p = DetectorParams()
    bank = p.bank
    kernels = bank_kernels(bank)
    A = len(bank.rhos)
    max_side = 2 * bank.max_radius + 1
    pyr = build_pyramid(img, p.t)
    blobs = []
    for li, layer in enumerate(pyr.layers):
        pixels = layer.pixels
        if max_side > 2 * min(pixels.shape):
            break
        eta0 = _layer_eta0(pixels, bank)
        selection = _measure_from_eta(eta0[:, None])
        factor = float(2 ** li)
        pads = {}
        for c in scale_space_extrema(selection, p, layer=li):
            if not c.eta > p.threshold:
                continue
            sigma = bank.sigmas[c.s]
            profiles = [_point_responses(pads, pixels, c.y, c.x, kernels[c.s][a])
                        for a in range(A)]
            etas = np.array([abs(sigma ** 2 * pr.sum()) for pr in profiles])
            a_full = int(np.argmax(etas))
            shape = _shape_from_profile(np.abs(profiles[a_full]), sigma,
                                        bank.rhos[a_full], bank.thetas)
            blobs.append(Blob(cx=c.x * factor, cy=c.y * factor,
                              short_axis=shape.short_axis * factor,
                              long_axis=shape.long_axis * factor,
                              orientation=shape.orientation,
                              response=c.eta, layer=li))
    return dedupe_blobs(sort_blobs(blobs))


def _blob_line(b: Blob) -> tuple:
    return (b.cx, b.cy, b.short_axis, b.long_axis, b.orientation, b.response, b.layer)


def blobs_to_jsonl(blobs: list) -> str:
    """One JSON object per line; float fields with 6 decimals, layer integer."""
    fmt = ('{{"cx": {:.6f}, "cy": {:.6f}, "short_axis": {:.6f}, "long_axis": {:.6f}, '
           '"orientation": {:.6f}, "response": {:.6f}, "layer": {:d}}}\n')
    return "".join(fmt.format(*_blob_line(b)) for b in blobs)


def blobs_from_jsonl(text: str) -> list:
    blobs = []
    for line in text.splitlines():
        if not line.strip():
            continue
        d = json.loads(line)
        blobs.append(Blob(cx=d["cx"], cy=d["cy"], short_axis=d["short_axis"],
                          long_axis=d["long_axis"], orientation=d["orientation"],
                          response=d["response"], layer=int(d["layer"])))
    return blobs


def blobs_to_csv(blobs: list) -> str:
    lines = [",".join(BLOB_FIELDS)]
    fmt = "{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:.6f},{:d}"
    lines.extend(fmt.format(*_blob_line(b)) for b in blobs)
    return "\n".join(lines) + "\n"


def blobs_from_csv(text: str) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != BLOB_FIELDS:
        raise ValueError("missing or malformed blob CSV header")
    blobs = []
    for row in rows[1:]:
        if not row:
            continue
        vals = [float(v) for v in row[:6]]
        blobs.append(Blob(cx=vals[0], cy=vals[1], short_axis=vals[2], long_axis=vals[3],
                          orientation=vals[4], response=vals[5], layer=int(row[6])))
    return blobs
