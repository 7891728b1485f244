import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsteer.errors import NonZeroMean, UnsupportedOrder
from tsteer.spectral import (
    ScalarField,
    VectorField2,
    biot_savart,
    curl,
    divergence,
    grid_of,
    interpolate,
    resample,
    sobolev_norm,
    solve_poisson,
    to_physical,
    to_spectral,
    translate,
)

AREA = 4 * math.pi**2


@pytest.fixture(scope="module")
def g64():
    return grid_of(64)


def test_grid_rejects_bad_sizes():
    for n in (16, 48, 100):
        with pytest.raises(ValueError):
            grid_of(n)


def test_nodes_layout(g64):
    x1, x2 = g64.nodes
    assert x1[3, 5] == pytest.approx(2 * math.pi * 3 / 64)
    assert x2[3, 5] == pytest.approx(2 * math.pi * 5 / 64)


def test_transform_round_trip(g64):
    rng = np.random.default_rng(0)
    vals = rng.standard_normal((64, 64))
    back = to_physical(to_spectral(vals), 64)
    assert np.max(np.abs(back - vals)) <= 1e-12 * np.max(np.abs(vals))


def test_average_free_flag_removes_mean(g64):
    f = ScalarField.from_function(g64, lambda a, b: 3.0 + np.cos(a), average_free=True)
    assert abs(f.spectrum[0, 0]) < 1e-12


def test_poisson_zero_and_eigenfunctions(g64):
    x1, x2 = g64.nodes
    assert np.all(solve_poisson(ScalarField.zeros(g64)).values == 0)
    phi = solve_poisson(ScalarField(g64, np.cos(x1)))
    assert np.max(np.abs(phi.values - np.cos(x1))) < 1e-13
    z = np.cos(2 * x1 + x2)
    phi = solve_poisson(ScalarField(g64, z))
    assert np.max(np.abs(phi.values - z / 5)) < 1e-13
    # applying the spectral Laplacian gives back z
    lap = to_physical(-g64.ksq * to_spectral(phi.values), 64)
    assert np.max(np.abs(-lap - z)) < 1e-12


def test_poisson_rejects_mean(g64):
    with pytest.raises(NonZeroMean):
        solve_poisson(ScalarField(g64, np.ones((64, 64))))


def test_biot_savart_examples(g64):
    x1, x2 = g64.nodes
    u = biot_savart(ScalarField.zeros(g64), (AREA, 0.0))
    assert np.allclose(u.u1.values, 1.0, atol=1e-14) and np.allclose(u.u2.values, 0.0, atol=1e-14)
    u = biot_savart(ScalarField(g64, np.cos(x1)))
    assert np.max(np.abs(u.u1.values)) < 1e-13
    assert np.max(np.abs(u.u2.values - np.sin(x1))) < 1e-13
    u = biot_savart(ScalarField(g64, np.sin(x2)), (AREA, 0.0))
    assert np.max(np.abs(u.u1.values - (np.cos(x2) + 1))) < 1e-13
    assert np.max(np.abs(curl(u).values - np.sin(x2))) < 1e-12
    assert np.max(np.abs(divergence(u).values)) < 1e-12
    assert np.allclose(u.integral(), (AREA, 0.0), atol=1e-11)


def test_curl_and_divergence_examples(g64):
    x1, x2 = g64.nodes
    u = VectorField2.from_functions(g64, lambda a, b: 0 * a, lambda a, b: np.sin(a))
    assert np.max(np.abs(curl(u).values - np.cos(x1))) < 1e-13
    u = VectorField2.from_functions(g64, lambda a, b: 1 + 0 * a, lambda a, b: 1 + 0 * a)
    assert np.max(np.abs(curl(u).values)) < 1e-14
    assert np.max(np.abs(divergence(u).values)) < 1e-14
    u = VectorField2.from_functions(g64, lambda a, b: np.sin(b), lambda a, b: 0 * a)
    assert np.max(np.abs(curl(u).values + np.cos(x2))) < 1e-13


def test_divergence_free_flag_is_checked(g64):
    sin_x1 = ScalarField.from_function(g64, lambda a, b: np.sin(a))
    with pytest.raises(ValueError):
        VectorField2(sin_x1, ScalarField.zeros(g64), divergence_free=True)


def test_sobolev_norm_examples(g64):
    x1, _ = g64.nodes
    assert sobolev_norm(ScalarField.zeros(g64), 3) == 0.0
    s = ScalarField(g64, np.sin(x1))
    assert sobolev_norm(s, 0) == pytest.approx(math.pi * math.sqrt(2), rel=1e-13)
    assert sobolev_norm(s, 1) == pytest.approx(2 * math.pi, rel=1e-13)
    # quadrature oracle for m = 1
    quad = np.sum(np.sin(x1) ** 2 + np.cos(x1) ** 2) * g64.cell_area
    assert sobolev_norm(s, 1) == pytest.approx(math.sqrt(quad), rel=1e-13)
    with pytest.raises(UnsupportedOrder):
        sobolev_norm(s, 5)


def test_translate_interpolate_resample(g64):
    x1, x2 = g64.nodes
    f = np.cos(x1 + 2 * x2) + np.sin(3 * x1)
    shifted = translate(f, (0.3, -0.2))
    exact = np.cos(x1 + 0.3 + 2 * (x2 - 0.2)) + np.sin(3 * (x1 + 0.3))
    assert np.max(np.abs(shifted - exact)) < 1e-12
    pts = np.random.default_rng(1).uniform(0, 2 * math.pi, (50, 2))
    ref = np.cos(pts[:, 0] + 2 * pts[:, 1]) + np.sin(3 * pts[:, 0])
    assert np.max(np.abs(interpolate(f, pts) - ref)) < 1e-12
    fine = resample(f, 128)
    y1, y2 = grid_of(128).nodes
    assert np.max(np.abs(fine - (np.cos(y1 + 2 * y2) + np.sin(3 * y1)))) < 1e-12


band_coeffs = st.lists(st.floats(-1, 1, allow_nan=False), min_size=8, max_size=8)


@settings(max_examples=30, deadline=None)
@given(band_coeffs, st.floats(-5, 5), st.floats(-5, 5))
def test_biot_savart_inverts_curl(coeffs, a1, a2):
    g = grid_of(32)
    x1, x2 = g.nodes
    modes = [(1, 0), (0, 1), (1, 1), (2, -1)]
    z = sum(c * np.sin(k * x1 + l * x2) + d * np.cos(k * x1 + l * x2)
            for (k, l), c, d in zip(modes, coeffs[:4], coeffs[4:]))
    u = biot_savart(ScalarField(g, z), (a1, a2))
    scale = max(1.0, np.max(np.abs(z)))
    assert np.max(np.abs(curl(u).values - z)) <= 1e-10 * scale
    assert np.max(np.abs(divergence(u).values)) <= 1e-10 * scale
    assert np.allclose(u.integral(), (a1, a2), atol=1e-10 * max(1.0, abs(a1), abs(a2)))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 3), st.floats(0.1, 3), st.integers(-4, 4), st.integers(-4, 4))
def test_sobolev_norm_is_homogeneous_and_monotone(m, scale, k, l):
    g = grid_of(32)
    x1, x2 = g.nodes
    f = np.cos(k * x1 + l * x2) + 0.5 * np.sin(x1)
    assert sobolev_norm(scale * f, m) == pytest.approx(scale * sobolev_norm(f, m), rel=1e-12)
    assert sobolev_norm(f, m) <= sobolev_norm(f, m + 1) * (1 + 1e-14)
