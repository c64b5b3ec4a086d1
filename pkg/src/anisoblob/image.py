"""Grayscale image container, PGM/PNG/PPM file I/O, and the box-average pyramid.

Images are stored as immutable float64 rasters with intensities in [0, 255].
The intensity range is kept at 8-bit scale (not normalized to [0, 1]) so that
response thresholds expressed in intensity units keep their published meaning.
"""

import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

MIN_SIDE = 4

# Rec. 601 luma weights used for color-to-gray conversion.
LUMA_R = 0.299
LUMA_G = 0.587
LUMA_B = 0.114

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Raised for image files this toolkit cannot decode."""


@dataclass(frozen=True)
class GrayImage:
    """Row-major float intensity raster in [0, 255], at least 4x4."""

    pixels: np.ndarray

    def __post_init__(self):
        p = np.array(self.pixels, dtype=np.float64, copy=True)
        if p.ndim != 2:
            raise ValueError("pixels must be a 2D array")
        h, w = p.shape
        if h < MIN_SIDE or w < MIN_SIDE:
            raise ValueError(f"image must be at least {MIN_SIDE}x{MIN_SIDE}, got {w}x{h}")
        if not np.isfinite(p).all():
            raise ValueError("image intensities must be finite")
        if p.min() < 0.0 or p.max() > 255.0:
            raise ValueError("image intensities must lie in [0, 255]")
        p.setflags(write=False)
        object.__setattr__(self, "pixels", p)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Pyramid:
    """Downsampling pyramid; layers[0] is the original image."""

    layers: tuple
    t: int


def as_pixels(img) -> np.ndarray:
    """Accept a GrayImage or a bare 2D array and return the float64 raster."""
    if isinstance(img, GrayImage):
        return img.pixels
    return np.asarray(img, dtype=np.float64)


# ---------------------------------------------------------------------------
# file I/O

def atomic_write_bytes(path, data: bytes):
    """Write a file atomically: temp file in the target directory + rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str):
    atomic_write_bytes(path, text.encode("utf-8"))


def _pgm_tokens(blob: bytes):
    """Yield whitespace-separated header tokens, skipping '#' comments.

    Returns (tokens, offset) where offset is the index of the byte just after
    the single whitespace character that terminates the last token consumed.
    """
    tokens = []
    i = 0
    n = len(blob)
    while len(tokens) < 4 and i < n:
        c = blob[i:i + 1]
        if c == b"#":
            while i < n and blob[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < n and not blob[j:j + 1].isspace() and blob[j:j + 1] != b"#":
                j += 1
            tokens.append(blob[i:j])
            i = j
    if len(tokens) < 4:
        raise ImageFormatError("truncated PGM header")
    # exactly one whitespace byte separates the maxval from the raster
    return tokens, i + 1


def _load_pgm(blob: bytes) -> GrayImage:
    tokens, offset = _pgm_tokens(blob)
    magic = tokens[0]
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ImageFormatError("non-numeric PGM header field") from None
    if width <= 0 or height <= 0:
        raise ImageFormatError("non-positive PGM dimensions")
    if maxval != 255:
        raise ImageFormatError(f"unsupported PGM maxval {maxval} (only 255)")
    count = width * height
    if magic == b"P5":
        raster = blob[offset:offset + count]
        if len(raster) < count:
            raise ImageFormatError("truncated P5 raster")
        data = np.frombuffer(raster, dtype=np.uint8, count=count)
    else:  # P2
        try:
            values = blob[offset - 1:].split()
            data = np.array([int(v) for v in values[:count]], dtype=np.int64)
        except ValueError:
            raise ImageFormatError("non-numeric P2 raster value") from None
        if data.size < count:
            raise ImageFormatError("truncated P2 raster")
        if data.min() < 0 or data.max() > 255:
            raise ImageFormatError("P2 value outside [0, 255]")
    return GrayImage(data.reshape(height, width).astype(np.float64))


def _load_png(path) -> GrayImage:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64)
        elif im.mode == "RGB":
            rgb = np.asarray(im, dtype=np.float64)
            arr = LUMA_R * rgb[..., 0] + LUMA_G * rgb[..., 1] + LUMA_B * rgb[..., 2]
        else:
            raise ImageFormatError(f"unsupported PNG mode {im.mode!r} (need 8-bit gray or RGB)")
    return GrayImage(arr)


def load_gray(path) -> GrayImage:
    """Load a PGM (P2/P5, maxval 255) or PNG (8-bit gray/RGB) as a GrayImage.

    Color inputs are collapsed with the 0.299/0.587/0.114 luma weights.
    """
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head[:2] in (b"P2", b"P5"):
        with open(path, "rb") as fh:
            return _load_pgm(fh.read())
    if head == _PNG_MAGIC:
        return _load_png(path)
    raise ImageFormatError(f"unsupported image format in {path}")


def save_pgm(img, path, binary: bool = True):
    """Write a PGM (P5 by default, P2 if binary=False), maxval 255.

    Float intensities are rounded half away from zero and clamped to [0, 255].
    The write is atomic (temp file + rename).
    """
    p = as_pixels(img)
    q = np.clip(np.floor(p + 0.5), 0.0, 255.0).astype(np.uint8)
    h, w = q.shape
    if binary:
        payload = f"P5\n{w} {h}\n255\n".encode("ascii") + q.tobytes()
    else:
        rows = "\n".join(" ".join(str(v) for v in row) for row in q)
        payload = f"P2\n{w} {h}\n255\n{rows}\n".encode("ascii")
    atomic_write_bytes(path, payload)


def save_ppm(rgb: np.ndarray, path):
    """Write an (H, W, 3) uint8 array as binary PPM (P6), atomically."""
    arr = np.asarray(rgb)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError("save_ppm expects an (H, W, 3) uint8 array")
    h, w = arr.shape[:2]
    atomic_write_bytes(path, f"P6\n{w} {h}\n255\n".encode("ascii") + arr.tobytes())


# ---------------------------------------------------------------------------
# pyramid

def pyramid_depth(rows: int, cols: int, t: int) -> int:
    """Number of pyramid layers: floor(log2(min(rows, cols))) - t.

    Requires min(rows, cols) >= 2^t and a result of at least one layer.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    m = min(rows, cols)
    if m < 2 ** t:
        raise ValueError(f"image min dimension {m} smaller than 2^t = {2 ** t}")
    n = int(math.floor(math.log2(m))) - t
    if n < 1:
        raise ValueError(f"t = {t} too large for a {cols}x{rows} image (no layers)")
    return n


def _halve(a: np.ndarray) -> np.ndarray:
    # 2x2 box average; odd edges replicate the last row/column (ceil-sized output)
    if a.shape[0] % 2:
        a = np.vstack([a, a[-1:]])
    if a.shape[1] % 2:
        a = np.hstack([a, a[:, -1:]])
    return (a[0::2, 0::2] + a[0::2, 1::2] + a[1::2, 0::2] + a[1::2, 1::2]) / 4.0


def build_pyramid(img, t: int = 2) -> Pyramid:
    """Repeated 2x downsampling by 2x2 box averaging; layer 0 is the input."""
    base = img if isinstance(img, GrayImage) else GrayImage(as_pixels(img))
    n = pyramid_depth(base.height, base.width, t)
    h, w = base.height, base.width
    for _ in range(n - 1):
        h, w = (h + 1) // 2, (w + 1) // 2
    if min(h, w) < MIN_SIDE:
        raise ValueError(f"t = {t} makes the top layer {w}x{h}, below the {MIN_SIDE}px image minimum")
    layers = [base]
    a = base.pixels
    for _ in range(n - 1):
        a = _halve(a)
        layers.append(GrayImage(a))
    return Pyramid(layers=tuple(layers), t=t)
