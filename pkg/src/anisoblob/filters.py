"""Anisotropic Gaussian derivative kernels and direct spatial convolution.

The kernels live in a rotated frame

    u = x*cos(theta) + y*sin(theta)      (the derivative direction)
    v = -x*sin(theta) + y*cos(theta)

and the anisotropic Gaussian

    g(x, y) = 1/(2*pi*sigma^2) * exp(-(rho^2*u^2 + v^2/rho^2) / (2*sigma^2))

has unit mass, std sigma/rho along u and sigma*rho along v: the support is
compressed along the derivative direction and stretched orthogonally to it.
The first and second directional derivatives along u are

    phi = -(rho^2*u/sigma^2) * g
    psi = (rho^2/sigma^2) * ((rho^2/sigma^2)*u^2 - 1) * g

Kernels are point-sampled at integer offsets on a square support of radius
ceil(4*sigma*rho) and are not renormalized; second-derivative kernels are
DC-corrected (mean subtracted) so constant regions give exactly zero response.

Convolution is true convolution (kernel flipped), computed directly in the
spatial domain with mirror-reflect boundary handling; there is no
frequency-domain path.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import ndimage

from .image import GrayImage, as_pixels

TWO_PI = 2.0 * math.pi

DEFAULT_SIGMA2 = tuple(range(2, 17))
DEFAULT_RHO2 = tuple(range(1, 6))
DEFAULT_ORIENTATIONS = 8


def thread_count() -> int:
    """Worker count for response-stack evaluation, from SOAGDD_THREADS.

    0 or unset means one worker per CPU.  Results never depend on the value;
    it only caps parallelism.
    """
    raw = os.environ.get("SOAGDD_THREADS", "0").strip()
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SOAGDD_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("SOAGDD_THREADS must be >= 0")
    if n == 0:
        n = os.cpu_count() or 1
    return n


@dataclass(frozen=True)
class FilterParams:
    """One (sigma, rho, theta) filter configuration.

    sigma > 0 is the scale in pixels, rho >= 1 the anisotropy factor, theta
    the orientation in radians.  Orientations are pi-periodic; the canonical
    range is [0, pi).
    """

    sigma: float
    rho: float
    theta: float

    def __post_init__(self):
        if not (math.isfinite(self.sigma) and math.isfinite(self.rho) and math.isfinite(self.theta)):
            raise ValueError("filter parameters must be finite")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.rho < 1.0:
            raise ValueError("rho must be >= 1")


@dataclass(frozen=True)
class FilterBank:
    """Scale/anisotropy/orientation grid; orientations are theta_k = k*pi/K."""

    sigmas: tuple = field(default_factory=lambda: tuple(math.sqrt(m) for m in DEFAULT_SIGMA2))
    rhos: tuple = field(default_factory=lambda: tuple(math.sqrt(q) for q in DEFAULT_RHO2))
    orientations: int = DEFAULT_ORIENTATIONS

    def __post_init__(self):
        sigmas = tuple(float(s) for s in self.sigmas)
        rhos = tuple(float(r) for r in self.rhos)
        if not sigmas or any(s <= 0 or not math.isfinite(s) for s in sigmas):
            raise ValueError("sigmas must be positive and finite")
        if any(b <= a for a, b in zip(sigmas, sigmas[1:])):
            raise ValueError("sigmas must be strictly increasing")
        if not rhos or any(r < 1.0 or not math.isfinite(r) for r in rhos):
            raise ValueError("rhos must be >= 1 and finite")
        if any(b <= a for a, b in zip(rhos, rhos[1:])):
            raise ValueError("rhos must be strictly increasing")
        if self.orientations < 2:
            raise ValueError("need at least 2 orientations")
        object.__setattr__(self, "sigmas", sigmas)
        object.__setattr__(self, "rhos", rhos)

    @property
    def thetas(self) -> tuple:
        k = self.orientations
        return tuple(i * math.pi / k for i in range(k))

    @property
    def max_radius(self) -> int:
        return kernel_radius(self.sigmas[-1], self.rhos[-1])


def default_bank() -> FilterBank:
    return FilterBank()


@dataclass(frozen=True)
class KernelGrid:
    """Square filter support of odd side 2*radius+1, centered at (0, 0)."""

    radius: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        side = 2 * self.radius + 1
        if w.shape != (side, side):
            raise ValueError(f"weights must be {side}x{side} for radius {self.radius}")
        if not np.isfinite(w).all():
            raise ValueError("kernel weights must be finite")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def center(self) -> float:
        return float(self.weights[self.radius, self.radius])


@dataclass(frozen=True)
class ResponseStack:
    """Filter responses indexed (scale s, anisotropy a, orientation k, y, x)."""

    responses: np.ndarray

    def value(self, s: int, a: int, k: int, y: int, x: int) -> float:
        return float(self.responses[s, a, k, y, x])


def kernel_radius(sigma: float, rho: float) -> int:
    """Support half-width ceil(4*sigma*rho): 4 stds of the widest axis."""
    return int(math.ceil(4.0 * sigma * rho))


def _rotated_grid(radius: int, theta: float):
    yy, xx = np.mgrid[-radius:radius + 1, -radius:radius + 1].astype(np.float64)
    u = xx * math.cos(theta) + yy * math.sin(theta)
    v = -xx * math.sin(theta) + yy * math.cos(theta)
    return u, v


def _gaussian_weights(sigma, rho, theta, radius):
    u, v = _rotated_grid(radius, theta)
    q = (rho ** 2 * u ** 2 + v ** 2 / rho ** 2) / (2.0 * sigma ** 2)
    return np.exp(-q) / (TWO_PI * sigma ** 2), u


def aniso_gaussian_kernel(p: FilterParams) -> KernelGrid:
    """Point-sampled anisotropic Gaussian; unit mass up to truncation."""
    r = kernel_radius(p.sigma, p.rho)
    g, _ = _gaussian_weights(p.sigma, p.rho, p.theta, r)
    return KernelGrid(radius=r, weights=g)


def foagdd_kernel(p: FilterParams) -> KernelGrid:
    """First directional derivative of the anisotropic Gaussian along theta."""
    r = kernel_radius(p.sigma, p.rho)
    g, u = _gaussian_weights(p.sigma, p.rho, p.theta, r)
    return KernelGrid(radius=r, weights=-(p.rho ** 2 * u / p.sigma ** 2) * g)


def soagdd_kernel(p: FilterParams, dc_correct: bool = True) -> KernelGrid:
    """Second directional derivative of the anisotropic Gaussian along theta.

    With dc_correct (the default) the mean weight is subtracted so the kernel
    sums to zero and constant image regions give exactly zero response.
    """
    r = kernel_radius(p.sigma, p.rho)
    g, u = _gaussian_weights(p.sigma, p.rho, p.theta, r)
    c = p.rho ** 2 / p.sigma ** 2
    w = c * (c * u ** 2 - 1.0) * g
    if dc_correct:
        w = w - w.mean()
    return KernelGrid(radius=r, weights=w)


def convolve(img, k: KernelGrid) -> np.ndarray:
    """True convolution (kernel flipped), mirror-reflect boundary.

    Direct spatial-domain evaluation; returns a float response image of the
    input size.  The kernel side must not exceed twice the smaller image
    dimension.
    """
    a = as_pixels(img)
    h, w = a.shape
    if k.side > 2 * min(h, w):
        raise ValueError(f"kernel side {k.side} too large for a {w}x{h} image")
    return ndimage.convolve(a, k.weights, mode="reflect")


# im2col row blocks are capped around this many bytes
_BATCH_BLOCK_BYTES = 8e7


def convolve_batch(img, kernels) -> np.ndarray:
    """Convolve one image with several same-radius kernels at once.

    Same definition and boundary handling as convolve, evaluated as blocked
    window/weight dot products so the inner loop is a matrix product instead
    of per-tap traversal.  Returns an array of shape (len(kernels), h, w).
    """
    a = as_pixels(img)
    h, w = a.shape
    r = kernels[0].radius
    side = 2 * r + 1
    if any(k.radius != r for k in kernels):
        raise ValueError("convolve_batch requires kernels of equal radius")
    if side > 2 * min(h, w):
        raise ValueError(f"kernel side {side} too large for a {w}x{h} image")
    pad = np.pad(a, r, mode="symmetric")
    windows = sliding_window_view(pad, (side, side))
    # flipped kernels as columns: out[y, x] = sum_o I(y+o, x+o') * k(r-o, r-o')
    wmat = np.stack([k.weights[::-1, ::-1].ravel() for k in kernels], axis=1)
    out = np.empty((len(kernels), h, w), dtype=np.float64)
    block = max(1, int(_BATCH_BLOCK_BYTES // (w * side * side * 8)))
    for y0 in range(0, h, block):
        y1 = min(h, y0 + block)
        chunk = windows[y0:y1].reshape((y1 - y0) * w, side * side)
        out[:, y0:y1, :] = (chunk @ wmat).T.reshape(len(kernels), y1 - y0, w)
    return out


@lru_cache(maxsize=4)
def bank_kernels(bank: FilterBank) -> tuple:
    """DC-corrected second-derivative kernels for every (s, a, k) of the bank."""
    return tuple(
        tuple(
            tuple(soagdd_kernel(FilterParams(s, r, th)) for th in bank.thetas)
            for r in bank.rhos
        )
        for s in bank.sigmas
    )


def _run_slices(jobs, workers: int):
    if workers <= 1:
        for job in jobs:
            job()
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for f in [pool.submit(job) for job in jobs]:
                f.result()


def soagdd_response_stack(img, bank: FilterBank) -> ResponseStack:
    """Convolve the image with every (s, a, k) kernel of the bank.

    Slices are independent and may be evaluated concurrently (SOAGDD_THREADS);
    each slice is written by exactly one worker, so the result is bit-identical
    regardless of worker count or scheduling.
    """
    a = as_pixels(img)
    kernels = bank_kernels(bank)
    S, A, K = len(bank.sigmas), len(bank.rhos), bank.orientations
    out = np.empty((S, A, K) + a.shape, dtype=np.float64)

    def cell_job(si, ai):
        def run():
            out[si, ai] = convolve_batch(a, kernels[si][ai])
        return run

    jobs = [cell_job(si, ai) for si in range(S) for ai in range(A)]
    _run_slices(jobs, thread_count())
    return ResponseStack(responses=out)


def format_kernel_dump(k: KernelGrid, p: FilterParams) -> str:
    """Plain-text kernel dump: header line, then one row of weights per line.

    All numbers carry 9 significant digits.
    """
    lines = [f"radius {k.radius} sigma {p.sigma:.9g} rho {p.rho:.9g} theta {p.theta:.9g}"]
    for row in k.weights:
        lines.append(" ".join(f"{w:.9g}" for w in row))
    return "\n".join(lines) + "\n"
