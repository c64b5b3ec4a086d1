"""Synthetic blob scenes with exact ground truth, plus detector scoring.

Scenes are sums of rotated anisotropic Gaussian bumps on a constant
background with seeded additive Gaussian noise, clamped to [0, 255]; blob
centers are kept far enough apart that truth-to-detection matching is
unambiguous.  Scoring covers localization, shape (orientation and axis
ratio), and repeatability under a known homography.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .image import GrayImage, as_pixels

DEFAULT_NOISE_STD = 2.0
SEPARATION_FACTOR = 3.0


@dataclass(frozen=True)
class TruthBlob:
    """Ground-truth bump: center, axis stds, minor-axis direction, amplitude."""

    cx: float
    cy: float
    sigma_minor: float
    sigma_major: float
    orientation: float
    amplitude: float

    def __post_init__(self):
        if not 0.0 < self.sigma_minor <= self.sigma_major:
            raise ValueError("require 0 < sigma_minor <= sigma_major")
        if self.amplitude == 0.0:
            raise ValueError("amplitude must be nonzero")

    @property
    def axis_ratio(self) -> float:
        return self.sigma_major / self.sigma_minor


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    background: float = 20.0
    noise_std: float = DEFAULT_NOISE_STD
    seed: int = 0
    blobs: tuple = ()

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("scene dimensions must be positive")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")
        blobs = tuple(self.blobs)
        for i, a in enumerate(blobs):
            for b in blobs[i + 1:]:
                d = math.hypot(a.cx - b.cx, a.cy - b.cy)
                if d < SEPARATION_FACTOR * (a.sigma_major + b.sigma_major):
                    raise ValueError("blobs too close: separation must be >= "
                                     "3*(sum of their sigma_major)")
        object.__setattr__(self, "blobs", blobs)


@dataclass(frozen=True)
class EvalReport:
    matched_count: int
    miss_count: int
    false_count: int
    mean_center_error: float
    mean_orientation_error: float
    mean_axis_ratio_error: float
    repeatability: float


def render_blob_scene(spec: SceneSpec):
    """Render the scene; returns (image, truth list).  Deterministic per seed."""
    yy, xx = np.mgrid[0:spec.height, 0:spec.width].astype(np.float64)
    img = np.full((spec.height, spec.width), float(spec.background))
    for b in spec.blobs:
        dx = xx - b.cx
        dy = yy - b.cy
        u = dx * math.cos(b.orientation) + dy * math.sin(b.orientation)
        v = -dx * math.sin(b.orientation) + dy * math.cos(b.orientation)
        img += b.amplitude * np.exp(-u ** 2 / (2.0 * b.sigma_minor ** 2)
                                    - v ** 2 / (2.0 * b.sigma_major ** 2))
    if spec.noise_std > 0:
        img += np.random.default_rng(spec.seed).normal(0.0, spec.noise_std, img.shape)
    np.clip(img, 0.0, 255.0, out=img)
    return GrayImage(img), list(spec.blobs)


def _axial_error(a: float, b: float) -> float:
    d = abs(a - b) % math.pi
    return min(d, math.pi - d)


def evaluate_detections(dets, truth, tol_px: float) -> EvalReport:
    """Greedy one-to-one nearest-center matching within tol_px.

    Candidate pairs are sorted by (distance, det index, truth index) so the
    matching does not depend on input ordering beyond actual distances.  Error
    means cover matched pairs only; orientation error is taken mod pi and
    folded, axis-ratio error is relative to the truth ratio.
    """
    if tol_px <= 0:
        raise ValueError("tol_px must be positive")
    pairs = []
    for di, d in enumerate(dets):
        for ti, t in enumerate(truth):
            dist = math.hypot(d.cx - t.cx, d.cy - t.cy)
            if dist <= tol_px:
                pairs.append((dist, di, ti))
    pairs.sort()
    used_d, used_t, matches = set(), set(), []
    for dist, di, ti in pairs:
        if di in used_d or ti in used_t:
            continue
        used_d.add(di)
        used_t.add(ti)
        matches.append((dist, dets[di], truth[ti]))
    n = len(matches)
    if n:
        center = sum(m[0] for m in matches) / n
        orient = sum(_axial_error(d.orientation, t.orientation) for _, d, t in matches) / n
        ratio = sum(abs(d.axis_ratio - t.axis_ratio) / t.axis_ratio for _, d, t in matches) / n
    else:
        center = orient = ratio = 0.0
    rep = n / len(truth) if truth else 0.0
    return EvalReport(matched_count=n, miss_count=len(truth) - n,
                      false_count=len(dets) - n, mean_center_error=center,
                      mean_orientation_error=orient, mean_axis_ratio_error=ratio,
                      repeatability=rep)


def _check_homography(h) -> np.ndarray:
    m = np.asarray(h, dtype=np.float64)
    if m.shape != (3, 3) or not np.isfinite(m).all():
        raise ValueError("homography must be a finite 3x3 matrix")
    if abs(np.linalg.det(m)) < 1e-12:
        raise ValueError("homography is singular")
    return m


def project_points(h, xs, ys):
    """Apply a homography to point arrays; returns (x', y')."""
    m = np.asarray(h, dtype=np.float64)
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    w = m[2, 0] * xs + m[2, 1] * ys + m[2, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        px = (m[0, 0] * xs + m[0, 1] * ys + m[0, 2]) / w
        py = (m[1, 0] * xs + m[1, 1] * ys + m[1, 2]) / w
    return px, py


def warp_image(img, h) -> GrayImage:
    """Warp by a homography mapping source to destination coordinates.

    Inverse mapping with bilinear sampling; destination pixels that land
    outside the source take the source's median intensity.
    """
    m = _check_homography(h)
    pixels = as_pixels(img)
    hh, ww = pixels.shape
    inv = np.linalg.inv(m)
    yy, xx = np.mgrid[0:hh, 0:ww].astype(np.float64)
    qx, qy = project_points(inv, xx.ravel(), yy.ravel())
    inside = (np.isfinite(qx) & np.isfinite(qy)
              & (qx >= 0) & (qx <= ww - 1) & (qy >= 0) & (qy <= hh - 1))
    out = np.full(hh * ww, float(np.median(pixels)))
    qx, qy = qx[inside], qy[inside]
    x0 = np.minimum(np.floor(qx).astype(np.intp), ww - 2)
    y0 = np.minimum(np.floor(qy).astype(np.intp), hh - 2)
    fx = qx - x0
    fy = qy - y0
    top = (1.0 - fx) * pixels[y0, x0] + fx * pixels[y0, x0 + 1]
    bot = (1.0 - fx) * pixels[y0 + 1, x0] + fx * pixels[y0 + 1, x0 + 1]
    out[inside] = (1.0 - fy) * top + fy * bot
    return GrayImage(np.clip(out.reshape(hh, ww), 0.0, 255.0))


def repeatability(dets_a, dets_b, h, eps_px: float, frame=None) -> float:
    """Fraction of A's detections re-found in B after mapping centers by h.

    The denominator is min(|A|, |A projected inside B's frame|); pass
    frame=(width, height) to enable the inside test, otherwise every finite
    projection counts as inside.  Empty inputs give 0.
    """
    if eps_px <= 0:
        raise ValueError("eps_px must be positive")
    m = _check_homography(h)
    if not dets_a:
        return 0.0
    px, py = project_points(m, [b.cx for b in dets_a], [b.cy for b in dets_a])
    inside = np.isfinite(px) & np.isfinite(py)
    if frame is not None:
        fw, fh = frame
        inside &= (px >= 0) & (px <= fw - 1) & (py >= 0) & (py <= fh - 1)
    denom = min(len(dets_a), int(inside.sum()))
    if denom == 0 or not dets_b:
        return 0.0
    bx = np.array([b.cx for b in dets_b])
    by = np.array([b.cy for b in dets_b])
    hits = 0
    for x, y, ok in zip(px, py, inside):
        if ok and np.min(np.hypot(bx - x, by - y)) <= eps_px:
            hits += 1
    return hits / denom


# ---------------------------------------------------------------------------
# JSON plumbing


def _blob_dict(b: TruthBlob) -> dict:
    return {"cx": b.cx, "cy": b.cy, "sigmaMinor": b.sigma_minor,
            "sigmaMajor": b.sigma_major, "orientation": b.orientation,
            "amplitude": b.amplitude}


def _blob_from_dict(d: dict) -> TruthBlob:
    return TruthBlob(cx=float(d["cx"]), cy=float(d["cy"]),
                     sigma_minor=float(d["sigmaMinor"]),
                     sigma_major=float(d["sigmaMajor"]),
                     orientation=float(d.get("orientation", 0.0)),
                     amplitude=float(d["amplitude"]))


def scene_to_json(spec: SceneSpec) -> str:
    doc = {"width": spec.width, "height": spec.height,
           "background": spec.background, "noiseStd": spec.noise_std,
           "seed": spec.seed, "blobs": [_blob_dict(b) for b in spec.blobs]}
    return json.dumps(doc, indent=2) + "\n"


def scene_from_json(text: str) -> SceneSpec:
    d = json.loads(text)
    return SceneSpec(width=int(d["width"]), height=int(d["height"]),
                     background=float(d.get("background", 20.0)),
                     noise_std=float(d.get("noiseStd", DEFAULT_NOISE_STD)),
                     seed=int(d.get("seed", 0)),
                     blobs=tuple(_blob_from_dict(b) for b in d.get("blobs", [])))


def truth_to_json(blobs) -> str:
    return json.dumps([_blob_dict(b) for b in blobs], indent=2) + "\n"


def truth_from_json(text: str) -> list:
    return [_blob_from_dict(d) for d in json.loads(text)]


def report_to_json(r: EvalReport) -> str:
    doc = {"matchedCount": r.matched_count, "missCount": r.miss_count,
           "falseCount": r.false_count,
           "meanCenterError": round(r.mean_center_error, 6),
           "meanOrientationError": round(r.mean_orientation_error, 6),
           "meanAxisRatioError": round(r.mean_axis_ratio_error, 6),
           "repeatability": round(r.repeatability, 6)}
    return json.dumps(doc, indent=2) + "\n"


def report_table(named_reports) -> str:
    """Fixed-width text table: one metric per row, one report per column."""
    rows = [("matched", "{:d}", "matched_count"),
            ("miss", "{:d}", "miss_count"),
            ("false", "{:d}", "false_count"),
            ("center_err", "{:.4f}", "mean_center_error"),
            ("orient_err", "{:.4f}", "mean_orientation_error"),
            ("ratio_err", "{:.4f}", "mean_axis_ratio_error"),
            ("repeat", "{:.4f}", "repeatability")]
    names = [name for name, _ in named_reports]
    lines = ["{:<12}".format("metric") + "".join(f"{n:>14}" for n in names)]
    for label, fmt, attr in rows:
        cells = "".join(f"{fmt.format(getattr(r, attr)):>14}" for _, r in named_reports)
        lines.append(f"{label:<12}" + cells)
    return "\n".join(lines) + "\n"
