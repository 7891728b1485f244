import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsteer import _kernels_py, kernels
from tsteer.cutoffs import wrap
from tsteer.errors import InactiveTime, StepTooLarge
from tsteer.flows import (
    ObservableSpec,
    build_backward_cache,
    build_observable_field,
    flow_map_Xi,
    flow_U,
    flow_Y,
    trace_observable,
)
from tsteer.saturation import GeneratorSet
from tsteer.spectral import ScalarField, divergence, grid_of, VectorField2


def periodic_gap(a, b):
    return np.abs(wrap(a - b + math.pi) - math.pi)


def test_schedule_chain(flow):
    _, sched = flow
    T = sched.phase
    assert T == pytest.approx(1 / 110)
    for l in range(1, sched.K + 1):
        prev_c = T if l == 1 else sched.t_c(l - 1)
        assert sched.t_a(l) - prev_c == pytest.approx(T)
        assert sched.t_b(l) - sched.t_a(l) == pytest.approx(T)
        assert sched.t_c(l) - sched.t_b(l) == pytest.approx(T)
    assert sched.t_c(sched.K) == pytest.approx(sched.t_final)


def test_profile_rest_and_zero_mean(flow):
    profile, sched = flow
    t = np.linspace(0, sched.phase, 101)
    assert np.all(profile.velocity(t) == 0.0)
    assert np.max(np.abs(profile.displacement_by_quadrature(0.0, 1.0))) < 1e-12
    assert np.max(np.abs(profile.displacement(1.0))) == 0.0


def test_first_block_horizontal_shift(flow, covering):
    profile, sched = flow
    start = sched.block_start(1)
    moved = profile.displacement_by_quadrature(start, start + 0.5 * sched.phase)
    want = covering.reference_corner[0] - covering.corners[0][0]
    assert periodic_gap(moved[0], want) < 1e-12
    assert abs(moved[1]) < 1e-14


def test_closed_form_matches_quadrature(flow):
    profile, _ = flow
    for t in np.random.default_rng(0).uniform(0, 1, 20):
        assert np.max(np.abs(profile.displacement(t) - profile.displacement_by_quadrature(0.0, t))) < 1e-12


def test_flow_Y_properties(flow, covering):
    profile, sched = flow
    x = np.random.default_rng(1).uniform(0, 2 * math.pi, (200, 2))
    assert np.max(periodic_gap(flow_Y(profile, x, 0.0, 1.0), x)) < 1e-12
    assert np.max(periodic_gap(flow_Y(profile, x, 0.3, 0.3), x)) == 0.0
    p = covering.reference_corner
    rel = np.array([0.2, 0.7])
    for l in (1, 8, 36):
        for t in np.linspace(sched.t_a(l), sched.t_b(l), 5):
            corner = covering.corners[l - 1]
            assert np.max(periodic_gap(flow_Y(profile, corner, 0.0, t), p)) < 1e-12
            assert np.max(periodic_gap(flow_Y(profile, p + rel, t, 0.0), corner + rel)) < 1e-12


def test_observable_field(flow, observable):
    profile, sched = flow
    ystar, ubar = build_observable_field(observable, profile)
    g = grid_of(32)
    pts = g.points
    assert np.all(ystar(pts, 0.0) == 0.0)
    t = 0.37 * sched.phase
    v = ystar(pts, t)
    u = VectorField2(ScalarField(g, v[:, 0].reshape(32, 32)), ScalarField(g, v[:, 1].reshape(32, 32)))
    assert np.max(np.abs(divergence(u).values)) < 1e-12 * max(1.0, np.max(np.abs(v)))
    for s in (0.1, 0.5, sched.t_final - 1e-9):
        assert np.allclose(ubar(pts[:5], s), profile.velocity(s))


def test_flow_U_properties(flow, observable):
    profile, sched = flow
    x = np.random.default_rng(2).uniform(0, 2 * math.pi, (300, 2))
    assert np.max(periodic_gap(flow_U(profile, observable, x, 0.4, 0.4), x)) == 0.0
    ref = flow_Y(profile, x, 0.1, 0.5)
    assert np.max(periodic_gap(flow_U(profile, observable, x, 0.1, 0.5), ref)) < 1e-8
    y = flow_U(profile, observable, x, 0.0, 1.0)
    back = flow_U(profile, observable, y, 1.0, 0.0)
    assert np.max(periodic_gap(back, x)) < 1e-6
    with pytest.raises(StepTooLarge):
        flow_U(profile, observable, x, 0.0, 1.0, h_flow=sched.phase / 10)


def test_tau(flow):
    _, sched = flow
    assert sched.tau(sched.t_a(4)) == (pytest.approx(sched.t_final), 4)
    tau, l = sched.tau(sched.t_b(4))
    assert l == 4 and tau == pytest.approx(1.0)
    assert sched.tau(0.5 * (sched.t_b(4) + sched.t_c(4))) == (0.0, None)


def test_flow_map_Xi(flow, observable, covering):
    profile, sched = flow
    x = np.random.default_rng(3).uniform(0, 2 * math.pi, (50, 2))
    t = sched.t_b(5)
    assert np.max(periodic_gap(flow_map_Xi(profile, observable, x, t), flow_Y(profile, x, t, 0.0))) < 1e-12
    with pytest.raises(InactiveTime):
        flow_map_Xi(profile, observable, x, 0.5 * (sched.t_b(5) + sched.t_c(5)))


def test_flow_map_Xi_preserves_area(flow, observable):
    profile, sched = flow
    t = sched.t_a(7) + 0.4 * sched.phase
    x = np.random.default_rng(4).uniform(0, 2 * math.pi, (40, 2))
    h = 1e-5
    cols = []
    for e in (np.array([h, 0.0]), np.array([0.0, h])):
        plus = flow_map_Xi(profile, observable, x + e, t)
        minus = flow_map_Xi(profile, observable, x - e, t)
        cols.append((wrap(plus - minus + math.pi) - math.pi) / (2 * h))
    jac = cols[0][:, 0] * cols[1][:, 1] - cols[0][:, 1] * cols[1][:, 0]
    assert np.max(np.abs(jac - 1)) < 1e-4


def test_observable_boundary_values_and_disjoint_jumps(observable):
    T = observable.phase
    c = observable.coefficients(np.array([0.0, T]))
    assert np.all(c == 0.0)
    edges = observable._tables[0][:, 1:-1]
    assert len(np.unique(edges)) == edges.size


def test_rk4_tracing_is_fourth_order(observable):
    T = observable.phase
    pts = np.random.default_rng(5).uniform(0, 2 * math.pi, (200, 2))
    ref = trace_observable(observable, pts, T, 0.0, T / 3200)[-1]
    # coarser steps are already capped by the kink grid
    errs = [np.max(np.abs(trace_observable(observable, pts, T, 0.0, T / d)[-1] - ref)) for d in (200, 400)]
    assert errs[0] / errs[1] > 6


def test_backward_cache_matches_tracing(observable):
    cache = build_backward_cache(observable, 32, 16)
    T = observable.phase
    start = cache.at(T).reshape(-1, 2)
    r = cache.times[5]
    traced = trace_observable(observable, start[:20], T, r, cache.step)[-1]
    assert np.max(np.abs(traced - cache.at(r).reshape(-1, 2)[:20])) < 1e-12
    off = 0.5 * (cache.times[5] + cache.times[6])
    traced = trace_observable(observable, start[:20], T, off, cache.step)[-1]
    assert np.max(np.abs(traced - cache.at(off).reshape(-1, 2)[:20])) < 1e-10


def test_kernel_backends_agree(observable):
    from tsteer.flows import _observable_nodes

    T = observable.phase
    pts = np.random.default_rng(6).uniform(0, 2 * math.pi, (100, 2))
    nodes, rec = _observable_nodes(observable, [T, 0.3 * T, 0.0], T / 200)
    times = np.stack([nodes[:-1], 0.5 * (nodes[:-1] + nodes[1:]), nodes[1:]], 1)
    table = observable.coefficients(times)
    a = kernels.rk4_trig_flow(pts, observable.modes, table, np.diff(nodes), rec)
    b = _kernels_py.rk4_trig_flow(pts, observable.modes, table, np.diff(nodes), rec)
    assert np.max(np.abs(a - b)) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi))
def test_flow_Y_group_property(s, t, a, b):
    cov_profile = _PROFILE
    x = np.array([[a, b]])
    there = flow_Y(cov_profile, x, s, t)
    assert np.max(periodic_gap(flow_Y(cov_profile, there, t, s), x)) < 1e-12
    mid = 0.5 * (s + t)
    two_step = flow_Y(cov_profile, flow_Y(cov_profile, x, s, mid), mid, t)
    assert np.max(periodic_gap(two_step, there)) < 1e-12


def _make_profile():
    from tsteer.cutoffs import build_covering
    from tsteer.flows import build_return_profile

    return build_return_profile(build_covering((0.5, 4.7, 0.5, 4.7), 36))[0]


_PROFILE = _make_profile()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.sampled_from([0.25, 1.0, 2.0]))
def test_observable_drift_is_divergence_free(seed, strength):
    spec = ObservableSpec(GeneratorSet(((1, 0), (0, 1), (1, 1))), 0.01, strength=strength, seed=seed % 50)
    g = grid_of(32)
    t = 0.01 * (seed % 97) / 97
    v = spec.velocity(g.points, t)
    u = VectorField2(ScalarField(g, v[:, 0].reshape(32, 32)), ScalarField(g, v[:, 1].reshape(32, 32)))
    assert np.max(np.abs(divergence(u).values)) < 1e-10 * max(1.0, np.max(np.abs(v)))
