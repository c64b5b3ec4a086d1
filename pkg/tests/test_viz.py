"""Overlay rendering tests."""

import numpy as np

from anisoblob.detector import Blob
from anisoblob.matching import MatchPair
from anisoblob.viz import RED, blob_overlay, draw_ellipse, draw_line, match_canvas, to_rgb


def test_to_rgb_rounds_and_promotes():
    img = np.array([[0.4, 0.6], [254.5, 255.0], [10.0, 20.0], [1.0, 2.0]])
    rgb = to_rgb(img)
    assert rgb.shape == (4, 2, 3) and rgb.dtype == np.uint8
    assert tuple(rgb[0, 0]) == (0, 0, 0)
    assert tuple(rgb[0, 1]) == (1, 1, 1)
    assert tuple(rgb[1, 0]) == (255, 255, 255)


def test_draw_ellipse_circle_extremes():
    canvas = np.zeros((32, 32, 3), dtype=np.uint8)
    draw_ellipse(canvas, 16.0, 16.0, 5.0, 5.0, 0.0)
    for x, y in ((21, 16), (11, 16), (16, 21), (16, 11)):
        assert tuple(canvas[y, x]) == RED
    assert tuple(canvas[16, 16]) == (0, 0, 0)  # outline only


def test_draw_ellipse_orientation_places_long_axis():
    canvas = np.zeros((64, 64, 3), dtype=np.uint8)
    # short axis along x (orientation 0): long axis extent shows up in y
    draw_ellipse(canvas, 32.0, 32.0, 3.0, 10.0, 0.0)
    assert tuple(canvas[42, 32]) == RED
    assert tuple(canvas[32, 35]) == RED
    assert tuple(canvas[32, 42]) == (0, 0, 0)


def test_draw_ellipse_clips_out_of_frame():
    canvas = np.zeros((16, 16, 3), dtype=np.uint8)
    draw_ellipse(canvas, 0.0, 0.0, 6.0, 6.0, 0.0)  # partly outside: no crash
    assert canvas.any()


def test_draw_line_endpoints_and_path():
    canvas = np.zeros((16, 16, 3), dtype=np.uint8)
    draw_line(canvas, 2, 3, 9, 12)
    assert tuple(canvas[3, 2]) == RED
    assert tuple(canvas[12, 9]) == RED
    assert (canvas[..., 0] == 255).sum() >= 8


def test_blob_overlay_marks_blobs():
    img = np.full((48, 48), 30.0)
    blob = Blob(cx=24.0, cy=24.0, short_axis=3.0, long_axis=6.0,
                orientation=0.0, response=300.0, layer=0)
    rgb = blob_overlay(img, [blob])
    assert rgb.shape == (48, 48, 3)
    assert tuple(rgb[30, 24]) == RED  # long-axis extreme
    assert tuple(rgb[0, 0]) == (30, 30, 30)


def test_match_canvas_side_by_side_geometry():
    a = np.full((32, 40), 10.0)
    b = np.full((28, 36), 50.0)
    ba = [Blob(cx=10.0, cy=10.0, short_axis=2.0, long_axis=2.0,
               orientation=0.0, response=250.0, layer=0)]
    bb = [Blob(cx=20.0, cy=12.0, short_axis=2.0, long_axis=2.0,
               orientation=0.0, response=250.0, layer=0)]
    pairs = [MatchPair(index_a=0, index_b=0, distance=0.1, ratio=0.5)]
    canvas = match_canvas(a, b, ba, bb, pairs)
    assert canvas.shape == (32, 76, 3)
    assert tuple(canvas[5, 5]) == (10, 10, 10)
    assert tuple(canvas[5, 45]) == (50, 50, 50)
    assert tuple(canvas[31, 50]) == (0, 0, 0)  # below B's height: padding
    assert tuple(canvas[10, 10]) == RED  # line start at A's center
    assert tuple(canvas[12, 60]) == RED  # line end at B's center + offset
