"""Overlay rendering: blob ellipses and match lines on RGB canvases.

Ellipses are rasterized parametrically with sub-pixel arc steps, which keeps
the outline 1 px thick and correct for rotated axes; lines use integer
Bresenham stepping.
"""

import math

import numpy as np

from .image import as_pixels

RED = (255, 0, 0)
MAX_ARC_STEP = 0.5  # px


def to_rgb(img) -> np.ndarray:
    """Grayscale image promoted to an RGB uint8 canvas."""
    p = as_pixels(img)
    g = np.clip(np.floor(p + 0.5), 0, 255).astype(np.uint8)
    return np.repeat(g[:, :, None], 3, axis=2)


def _paint(canvas: np.ndarray, xs: np.ndarray, ys: np.ndarray, color) -> None:
    h, w = canvas.shape[:2]
    keep = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    canvas[ys[keep], xs[keep]] = color


def draw_ellipse(canvas: np.ndarray, cx: float, cy: float, short_axis: float,
                 long_axis: float, orientation: float, color=RED) -> None:
    """1 px outline with semi-axes (short_axis, long_axis); the short axis
    points along `orientation`."""
    steps = max(16, int(math.ceil(2.0 * math.pi * max(short_axis, long_axis) / MAX_ARC_STEP)))
    t = np.linspace(0.0, 2.0 * math.pi, steps, endpoint=False)
    cos_o, sin_o = math.cos(orientation), math.sin(orientation)
    pu = short_axis * np.cos(t)
    pv = long_axis * np.sin(t)
    xs = np.rint(cx + pu * cos_o - pv * sin_o).astype(int)
    ys = np.rint(cy + pu * sin_o + pv * cos_o).astype(int)
    _paint(canvas, xs, ys, color)


def draw_line(canvas: np.ndarray, x0: int, y0: int, x1: int, y1: int, color=RED) -> None:
    dx = abs(x1 - x0)
    dy = -abs(y1 - y0)
    sx = 1 if x0 < x1 else -1
    sy = 1 if y0 < y1 else -1
    err = dx + dy
    h, w = canvas.shape[:2]
    while True:
        if 0 <= x0 < w and 0 <= y0 < h:
            canvas[y0, x0] = color
        if x0 == x1 and y0 == y1:
            return
        e2 = 2 * err
        if e2 >= dy:
            err += dy
            x0 += sx
        if e2 <= dx:
            err += dx
            y0 += sy


def blob_overlay(img, blobs) -> np.ndarray:
    """RGB canvas with every blob's ellipse drawn in red."""
    canvas = to_rgb(img)
    for b in blobs:
        draw_ellipse(canvas, b.cx, b.cy, b.short_axis, b.long_axis, b.orientation)
    return canvas


def match_canvas(img_a, img_b, blobs_a, blobs_b, pairs) -> np.ndarray:
    """Side-by-side RGB canvas with ellipses and lines joining matched centers."""
    a = to_rgb(img_a)
    b = to_rgb(img_b)
    h = max(a.shape[0], b.shape[0])
    canvas = np.zeros((h, a.shape[1] + b.shape[1], 3), dtype=np.uint8)
    canvas[:a.shape[0], :a.shape[1]] = a
    canvas[:b.shape[0], a.shape[1]:] = b
    off = a.shape[1]
    for blob in blobs_a:
        draw_ellipse(canvas, blob.cx, blob.cy, blob.short_axis, blob.long_axis, blob.orientation)
    for blob in blobs_b:
        draw_ellipse(canvas, blob.cx + off, blob.cy, blob.short_axis, blob.long_axis, blob.orientation)
    for p in pairs:
        pa = blobs_a[p.index_a]
        pb = blobs_b[p.index_b]
        draw_line(canvas, int(round(pa.cx)), int(round(pa.cy)),
                  int(round(pb.cx)) + off, int(round(pb.cy)))
    return canvas
