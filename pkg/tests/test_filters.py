"""Kernel construction, convolution, and response-stack tests."""

import math

import numpy as np
import pytest

from anisoblob import filters
from anisoblob.filters import (
    FilterBank,
    FilterParams,
    KernelGrid,
    aniso_gaussian_kernel,
    convolve,
    convolve_batch,
    default_bank,
    foagdd_kernel,
    format_kernel_dump,
    kernel_radius,
    soagdd_kernel,
    soagdd_response_stack,
)

from conftest import naive_convolve


def test_kernel_radius_is_four_stds_of_wide_axis():
    assert kernel_radius(math.sqrt(2.0), 1.0) == 6          # ceil(5.656)
    assert kernel_radius(math.sqrt(2.0), math.sqrt(5.0)) == 13
    assert kernel_radius(4.0, 1.0) == 16
    assert kernel_radius(1.0, 1.0) == 4


def test_filter_params_validation():
    FilterParams(sigma=1.0, rho=1.0, theta=-7.0)  # theta unrestricted
    with pytest.raises(ValueError):
        FilterParams(sigma=0.0, rho=1.0, theta=0.0)
    with pytest.raises(ValueError):
        FilterParams(sigma=1.0, rho=0.5, theta=0.0)
    with pytest.raises(ValueError):
        FilterParams(sigma=math.nan, rho=1.0, theta=0.0)


def test_filter_bank_validation():
    with pytest.raises(ValueError):
        FilterBank(sigmas=(2.0, 1.0), rhos=(1.0,), orientations=8)
    with pytest.raises(ValueError):
        FilterBank(sigmas=(1.0,), rhos=(0.9,), orientations=8)
    with pytest.raises(ValueError):
        FilterBank(sigmas=(1.0,), rhos=(1.0,), orientations=1)
    bank = default_bank()
    assert len(bank.sigmas) == 15 and len(bank.rhos) == 5
    assert bank.thetas == tuple(k * math.pi / 8 for k in range(8))
    assert bank.max_radius == kernel_radius(4.0, math.sqrt(5.0))


def test_kernel_grid_validation():
    with pytest.raises(ValueError):
        KernelGrid(radius=2, weights=np.zeros((3, 3)))
    with pytest.raises(ValueError):
        KernelGrid(radius=1, weights=np.full((3, 3), np.inf))
    k = KernelGrid(radius=1, weights=np.eye(3))
    assert k.side == 3
    with pytest.raises(ValueError):
        k.weights[0, 0] = 5.0  # read-only


def test_gaussian_center_closed_form():
    # peak of the continuous density: 1/(2*pi*sigma^2), independent of rho
    p = FilterParams(sigma=math.sqrt(2.0), rho=1.0, theta=0.0)
    assert aniso_gaussian_kernel(p).center == pytest.approx(1.0 / (4.0 * math.pi), abs=1e-15)
    p = FilterParams(sigma=math.sqrt(2.0), rho=math.sqrt(5.0), theta=0.3)
    assert aniso_gaussian_kernel(p).center == pytest.approx(1.0 / (4.0 * math.pi), abs=1e-15)


def test_gaussian_mass_near_unity():
    p = FilterParams(sigma=2.0, rho=math.sqrt(2.0), theta=0.7)
    total = aniso_gaussian_kernel(p).weights.sum()
    assert total == pytest.approx(1.0, abs=1e-3)


def test_soagdd_center_closed_form():
    # raw second-derivative weight at the origin: -rho^2 / (2*pi*sigma^4)
    for s2, r2 in ((2.0, 1.0), (2.0, 5.0), (16.0, 1.0), (9.0, 3.0)):
        p = FilterParams(sigma=math.sqrt(s2), rho=math.sqrt(r2), theta=0.0)
        raw = soagdd_kernel(p, dc_correct=False)
        expect = -r2 / (2.0 * math.pi * s2 ** 2)
        assert raw.center == pytest.approx(expect, abs=1e-12)
    p = FilterParams(sigma=math.sqrt(2.0), rho=1.0, theta=0.0)
    assert soagdd_kernel(p, dc_correct=False).center == pytest.approx(-1.0 / (8.0 * math.pi), abs=1e-12)


def test_soagdd_dc_correction_sums_to_zero():
    for s2, r2, th in ((2.0, 1.0, 0.0), (5.0, 3.0, 1.1), (16.0, 5.0, 2.9)):
        p = FilterParams(sigma=math.sqrt(s2), rho=math.sqrt(r2), theta=th)
        k = soagdd_kernel(p)
        assert abs(k.weights.sum()) <= 1e-12 * np.abs(k.weights).max()


def test_foagdd_is_antisymmetric_and_zero_sum():
    p = FilterParams(sigma=1.5, rho=math.sqrt(2.0), theta=0.6)
    w = foagdd_kernel(p).weights
    np.testing.assert_allclose(w, -w[::-1, ::-1], atol=1e-15)
    assert abs(w.sum()) < 1e-12


def test_orientation_pi_periodicity():
    base = FilterParams(sigma=1.7, rho=math.sqrt(3.0), theta=0.4)
    flip = FilterParams(sigma=1.7, rho=math.sqrt(3.0), theta=0.4 + math.pi)
    np.testing.assert_allclose(soagdd_kernel(base).weights, soagdd_kernel(flip).weights, atol=1e-12)
    np.testing.assert_allclose(foagdd_kernel(base).weights, -foagdd_kernel(flip).weights, atol=1e-12)


def test_kernel_rotation_consistency():
    # theta = pi/2 swaps the roles of x and y in the quadratic form
    p0 = FilterParams(sigma=1.5, rho=math.sqrt(2.0), theta=0.0)
    p90 = FilterParams(sigma=1.5, rho=math.sqrt(2.0), theta=math.pi / 2)
    w0 = soagdd_kernel(p0).weights
    w90 = soagdd_kernel(p90).weights
    np.testing.assert_allclose(w90, w0.T[:, ::-1], atol=1e-12)


def test_convolve_identity_kernel():
    rng = np.random.default_rng(0)
    img = rng.uniform(0.0, 255.0, (16, 20))
    ident = np.zeros((3, 3))
    ident[1, 1] = 1.0
    out = convolve(img, KernelGrid(radius=1, weights=ident))
    np.testing.assert_allclose(out, img, atol=1e-12)


def test_convolve_constant_image_zero_for_dc_free_kernel():
    img = np.full((20, 20), 113.0)
    p = FilterParams(sigma=1.2, rho=math.sqrt(2.0), theta=0.9)
    out = convolve(img, soagdd_kernel(p))
    assert np.abs(out).max() < 1e-9


def test_convolve_matches_naive_oracle():
    rng = np.random.default_rng(7)
    img = rng.uniform(0.0, 255.0, (12, 15))
    weights = rng.standard_normal((5, 5))
    got = convolve(img, KernelGrid(radius=2, weights=weights))
    want = naive_convolve(img, weights)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-9)


def test_convolve_batch_matches_convolve():
    rng = np.random.default_rng(11)
    img = rng.uniform(0.0, 255.0, (24, 17))
    ks = [
        soagdd_kernel(FilterParams(sigma=1.3, rho=math.sqrt(2.0), theta=t))
        for t in (0.0, 0.5, 1.1, 2.2)
    ]
    batch = convolve_batch(img, ks)
    for i, k in enumerate(ks):
        np.testing.assert_allclose(batch[i], convolve(img, k), rtol=1e-10, atol=1e-12)


def test_convolve_rejects_oversized_kernel():
    img = np.zeros((8, 8))
    k = soagdd_kernel(FilterParams(sigma=4.0, rho=1.0, theta=0.0))  # side 33
    with pytest.raises(ValueError):
        convolve(img, k)
    with pytest.raises(ValueError):
        convolve_batch(img, [k])


def test_convolve_batch_rejects_mixed_radii():
    img = np.zeros((32, 32))
    a = soagdd_kernel(FilterParams(sigma=1.0, rho=1.0, theta=0.0))
    b = soagdd_kernel(FilterParams(sigma=2.0, rho=1.0, theta=0.0))
    with pytest.raises(ValueError):
        convolve_batch(img, [a, b])


def test_response_stack_slices_match_single_convolutions():
    rng = np.random.default_rng(3)
    img = rng.uniform(0.0, 255.0, (40, 40))
    bank = FilterBank(sigmas=(1.0, math.sqrt(2.0)), rhos=(1.0, math.sqrt(2.0)), orientations=4)
    stack = soagdd_response_stack(img, bank)
    assert stack.responses.shape == (2, 2, 4, 40, 40)
    for si, s in enumerate(bank.sigmas):
        for ai, r in enumerate(bank.rhos):
            for ki, th in enumerate(bank.thetas):
                k = soagdd_kernel(FilterParams(s, r, th))
                np.testing.assert_allclose(
                    stack.responses[si, ai, ki], convolve(img, k), rtol=1e-10, atol=1e-12)
    assert stack.value(1, 0, 2, 5, 7) == stack.responses[1, 0, 2, 5, 7]


def test_response_stack_thread_count_invariance(monkeypatch):
    rng = np.random.default_rng(5)
    img = rng.uniform(0.0, 255.0, (32, 32))
    bank = FilterBank(sigmas=(1.0, 1.5), rhos=(1.0, 2.0), orientations=4)
    monkeypatch.setenv("SOAGDD_THREADS", "1")
    seq = soagdd_response_stack(img, bank).responses
    monkeypatch.setenv("SOAGDD_THREADS", "3")
    par = soagdd_response_stack(img, bank).responses
    assert np.array_equal(seq, par)


def test_thread_count_parsing(monkeypatch):
    monkeypatch.setenv("SOAGDD_THREADS", "2")
    assert filters.thread_count() == 2
    monkeypatch.setenv("SOAGDD_THREADS", "0")
    assert filters.thread_count() >= 1
    monkeypatch.delenv("SOAGDD_THREADS", raising=False)
    assert filters.thread_count() >= 1
    monkeypatch.setenv("SOAGDD_THREADS", "banana")
    with pytest.raises(ValueError):
        filters.thread_count()
    monkeypatch.setenv("SOAGDD_THREADS", "-1")
    with pytest.raises(ValueError):
        filters.thread_count()


def test_format_kernel_dump_layout():
    p = FilterParams(sigma=1.0, rho=1.0, theta=0.0)
    text = format_kernel_dump(soagdd_kernel(p), p)
    lines = text.splitlines()
    assert lines[0] == "radius 4 sigma 1 rho 1 theta 0"
    assert len(lines) == 1 + 9
    assert all(len(line.split()) == 9 for line in lines[1:])
    assert text.endswith("\n")
