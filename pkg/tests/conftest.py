"""Shared oracles and scene builders for the test suite.

The oracles here are deliberately naive (double loops, brute-force window
scans) so they can be checked by eye; production code must agree with them.
"""

import math

import numpy as np
import pytest

import anisoblob as ab


def naive_convolve(image: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Direct convolution with reflected borders, written as plain loops.

    Border reflection mirrors without repeating the edge sample, matching
    scipy.ndimage's 'reflect' (half-sample symmetric) convention for a single
    reflection: index -1 maps to 0, index n maps to n-1.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    side = weights.shape[0]
    r = side // 2
    out = np.zeros((h, w))

    def fetch(y: int, x: int) -> float:
        if y < 0:
            y = -1 - y
        elif y >= h:
            y = 2 * h - 1 - y
        if x < 0:
            x = -1 - x
        elif x >= w:
            x = 2 * w - 1 - x
        return img[y, x]

    for y in range(h):
        for x in range(w):
            acc = 0.0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    # convolution flips the kernel relative to the image
                    acc += weights[r + dy, r + dx] * fetch(y - dy, x - dx)
            out[y, x] = acc
    return out


def brute_force_extrema(eta_max: np.ndarray, border: int = 3) -> set:
    """Reference predicate for scale-space candidate selection.

    A site (s, y, x) qualifies when it is the unique maximum of its own
    scale's 7x7 spatial window and strictly exceeds every value in the full
    7x7 windows of the adjacent scales (only the existing neighbor at the
    ends of the scale axis).  Sites within `border` pixels of the image edge
    never qualify.
    """
    ns, h, w = eta_max.shape
    found = set()
    for s in range(ns):
        for y in range(border, h - border):
            for x in range(border, w - border):
                v = eta_max[s, y, x]
                ok = True
                for dy in range(-3, 4):
                    for dx in range(-3, 4):
                        if dy == 0 and dx == 0:
                            continue
                        if not (v > eta_max[s, y + dy, x + dx]):
                            ok = False
                            break
                    if not ok:
                        break
                if not ok:
                    continue
                for ds in (-1, 1):
                    if not ok:
                        break
                    s2 = s + ds
                    if s2 < 0 or s2 >= ns:
                        continue
                    for dy in range(-3, 4):
                        for dx in range(-3, 4):
                            if not (v > eta_max[s2, y + dy, x + dx]):
                                ok = False
                                break
                        if not ok:
                            break
                if ok:
                    found.add((s, y, x))
    return found


def blob_measure_oracle(responses: np.ndarray, sigmas) -> np.ndarray:
    """eta from first principles: magnitude of the orientation sum, scaled."""
    ns, na, nk, h, w = responses.shape
    eta = np.zeros((ns, na, h, w))
    for s in range(ns):
        for a in range(na):
            acc = np.zeros((h, w))
            for k in range(nk):
                acc = acc + responses[s, a, k]
            eta[s, a] = np.abs(sigmas[s] ** 2 * acc)
    return eta


def make_iso_scene(taus=(2.0, 3.0, 4.0), amplitude=200.0, background=20.0,
                   noise_std=2.0, seed=5) -> ab.SceneSpec:
    centers = ((32.0, 32.0), (90.0, 40.0), (48.0, 96.0))
    blobs = tuple(
        ab.TruthBlob(cx=cx, cy=cy, sigma_minor=t, sigma_major=t,
                     orientation=0.0, amplitude=amplitude)
        for (cx, cy), t in zip(centers, taus)
    )
    return ab.SceneSpec(width=128, height=128, background=background,
                        noise_std=noise_std, seed=seed, blobs=blobs)


def make_aniso_scene(orientations=(0.0, math.pi / 4, math.pi / 2)) -> ab.SceneSpec:
    centers = ((32.0, 32.0), (96.0, 32.0), (64.0, 96.0))
    blobs = tuple(
        ab.TruthBlob(cx=cx, cy=cy, sigma_minor=3.0, sigma_major=6.0,
                     orientation=o, amplitude=200.0)
        for (cx, cy), o in zip(centers, orientations)
    )
    return ab.SceneSpec(width=128, height=128, background=20.0,
                        noise_std=0.0, seed=0, blobs=blobs)


def make_match_scene(noise_std=2.0, seed=42) -> ab.SceneSpec:
    """Eight well-separated blobs with mixed polarity, clipping, and shape."""
    blobs = (
        ab.TruthBlob(cx=44, cy=46, sigma_minor=2.0, sigma_major=2.0,
                     orientation=0.0, amplitude=240),
        ab.TruthBlob(cx=80, cy=40, sigma_minor=2.5, sigma_major=4.0,
                     orientation=0.6, amplitude=135),
        ab.TruthBlob(cx=118, cy=44, sigma_minor=3.0, sigma_major=3.0,
                     orientation=0.0, amplitude=-140),
        ab.TruthBlob(cx=42, cy=84, sigma_minor=2.0, sigma_major=3.5,
                     orientation=1.2, amplitude=250),
        ab.TruthBlob(cx=82, cy=82, sigma_minor=3.0, sigma_major=4.5,
                     orientation=2.4, amplitude=130),
        ab.TruthBlob(cx=120, cy=86, sigma_minor=2.0, sigma_major=2.0,
                     orientation=0.0, amplitude=-235),
        ab.TruthBlob(cx=46, cy=120, sigma_minor=3.5, sigma_major=3.5,
                     orientation=0.0, amplitude=155),
        ab.TruthBlob(cx=116, cy=120, sigma_minor=2.5, sigma_major=4.0,
                     orientation=0.3, amplitude=-150),
    )
    return ab.SceneSpec(width=160, height=160, background=128,
                        noise_std=noise_std, seed=seed, blobs=blobs)


def rotation_scale_homography(angle_deg: float, scale: float, cx: float, cy: float) -> np.ndarray:
    a = math.radians(angle_deg)
    ca, sa = scale * math.cos(a), scale * math.sin(a)
    return np.array([
        [ca, -sa, cx - ca * cx + sa * cy],
        [sa, ca, cy - sa * cx - ca * cy],
        [0.0, 0.0, 1.0],
    ])


@pytest.fixture(scope="session")
def iso_scene_image():
    img, truth = ab.render_blob_scene(make_iso_scene())
    return img, truth


@pytest.fixture(scope="session")
def aniso_scene_image():
    img, truth = ab.render_blob_scene(make_aniso_scene())
    return img, truth
