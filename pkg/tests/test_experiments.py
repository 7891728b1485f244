import math

import numpy as np
import pytest

from tsteer.config import preset_config
from tsteer.experiments import (
    build_context,
    empirical_c0,
    lift_sample_times,
    parse_cut,
    relative_error,
    return_flow_check,
    run_delta_convergence,
    vector_norm,
)
from tsteer.spectral import ScalarField, biot_savart, grid_of, sobolev_norm


@pytest.fixture(scope="module")
def small_context():
    return build_context(preset_config("low-mode", n=64, M_t=16))


def test_empirical_c0_frozen():
    # largest ratio comes from the constant part and the unit modes
    assert empirical_c0(64, 0) == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert empirical_c0(64, 1) >= empirical_c0(64, 0) - 1e-12


def test_c0_bounds_random_fields():
    grid = grid_of(64)
    rng = np.random.default_rng(3)
    c0 = empirical_c0(64, 0)
    coeffs = np.zeros((64, 33), dtype=complex)
    coeffs[1:8, 1:8] = rng.normal(size=(7, 7)) + 1j * rng.normal(size=(7, 7))
    z = ScalarField(grid, np.fft.irfft2(coeffs, s=(64, 64)), average_free=True)
    mean = np.array([0.3, -0.4])
    u = biot_savart(z, mean)
    assert vector_norm(u, 1) <= c0 * (sobolev_norm(z, 0) + np.linalg.norm(mean)) * (1 + 1e-12)


def test_relative_error_examples():
    grid = grid_of(32)
    x1, _ = grid.nodes
    target = ScalarField(grid, np.sin(x1))
    assert relative_error(ScalarField(grid, 0.5 * np.sin(x1)), target, 0) == pytest.approx(0.5)
    zero = ScalarField.zeros(grid)
    assert relative_error(zero, zero, 0) == 0.0


def test_parse_cut():
    cut = parse_cut("straight:2:1.5", 0.4)
    assert cut.width == 0.4 and len(cut.sections) == 1
    assert cut.sections[0].axis == 2


def test_lift_sample_times_use_distinct_windows(lowmode_control):
    times = lift_sample_times(lowmode_control, 10, seed=0)
    sched = lowmode_control.schedule
    windows = {int(np.argmax([sched.t_a(j) <= t <= sched.t_b(j) for j in range(1, sched.K + 1)])) for t in times}
    assert len(times) == 10 and len(windows) == 10


def test_zero_control_convergence_from_rest(small_context):
    cfg = preset_config("low-mode", n=64, M_t=16, w1="zero")
    rows = run_delta_convergence(cfg, ctx=small_context, deltas=[0.4, 0.2], zero_control=True)
    assert [r.delta for r in rows] == [0.4, 0.2]
    assert all(r.error == 0.0 for r in rows)


def test_flow_check_other_covering():
    res = return_flow_check(K=49, points=500, samples_per_window=5)
    assert res.passed()
