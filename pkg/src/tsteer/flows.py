"""Return profile, observable drift and the flow maps built from them.

Reference time runs over ``[0, 1]``.  The schedule splits it into an
initial rest phase of length ``T*``, ``K`` blocks of length ``3 T*`` and a
final phase ``[T_b, 1]`` of length ``T*`` on which the observable drift acts.
During block ``l`` the whole torus is translated so that covering square
``l`` rests on the reference square for the window ``[t_a^l, t_b^l]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .cutoffs import CoveringSpec, smooth_step, smooth_step_derivative, wrap
from .errors import InactiveTime, StepTooLarge
from .saturation import GeneratorSet

_WINDOW_TOL = 1e-12


@dataclass(frozen=True)
class FlowSchedule:
    """Time partition of the reference interval."""

    covering: CoveringSpec

    @property
    def K(self) -> int:
        return self.covering.K

    @property
    def phase(self) -> float:
        """Phase length ``T* = 1/(3K+2)``."""
        return 1.0 / (3 * self.K + 2)

    @property
    def t_rest_end(self) -> float:
        return self.phase

    @property
    def t_final(self) -> float:
        """Start ``T_b = 1 - T*`` of the observable phase."""
        return 1.0 - self.phase

    def block_start(self, l: int) -> float:
        """``t_c^{l-1}``, the start of block ``l`` (1-based)."""
        return self.phase * (3 * l - 2)

    def t_a(self, l: int) -> float:
        return self.phase * (3 * l - 1)

    def t_b(self, l: int) -> float:
        return self.phase * 3 * l

    def t_c(self, l: int) -> float:
        return self.phase * (3 * l + 1)

    @cached_property
    def windows(self) -> np.ndarray:
        """``(K, 2)`` array of window endpoints ``[t_a^l, t_b^l]``."""
        l = np.arange(1, self.K + 1)
        return np.stack([self.phase * (3 * l - 1), self.phase * 3 * l], axis=1)

    def active_window(self, t: float) -> Optional[int]:
        """1-based index of the window containing ``t`` (closed), else ``None``."""
        T = self.phase
        l = int(round((t / T + 1.0) / 3.0))
        if 1 <= l <= self.K:
            a, b = self.t_a(l), self.t_b(l)
            tol = _WINDOW_TOL * max(1.0, abs(t))
            if a - tol <= t <= b + tol:
                return l
        return None

    def tau(self, t: float) -> tuple[float, Optional[int]]:
        """Reparametrized time ``T_b + t - t_a^l`` in window ``l``; ``(0, None)`` outside."""
        l = self.active_window(t)
        if l is None:
            return 0.0, None
        r = min(max(t - self.t_a(l), 0.0), self.phase)
        return self.t_final + r, l

    def breakpoints(self) -> np.ndarray:
        """All schedule nodes where the profile changes its formula."""
        T = self.phase
        pts = [0.0, T]
        for l in range(1, self.K + 1):
            s = self.block_start(l)
            pts += [s + 0.5 * T, s + T, s + 2 * T, s + 2.5 * T, s + 3 * T]
        pts.append(1.0)
        return np.unique(np.array(pts))


@dataclass(frozen=True, eq=False)
class ReturnProfile:
    """Spatially constant drift that carries every covering square onto the reference square.

    Each block moves horizontally then vertically (each move lasting ``T*/2``
    with a smooth unit-mass speed bump), pauses for ``T*`` and undoes the
    motion in the same order.  The displacement is available in closed form
    through the antiderivative of the bump, so the flow is exact to round-off.
    """

    schedule: FlowSchedule

    @property
    def shifts(self) -> np.ndarray:
        return self.schedule.covering.shifts

    def _locate(self, t):
        t = np.asarray(t, dtype=float)
        T = self.schedule.phase
        blk = np.floor((t - T) / (3 * T)).astype(int) + 1
        inside = (t > T) & (t < self.schedule.t_final) & (blk >= 1) & (blk <= self.schedule.K)
        blk = np.clip(blk, 1, self.schedule.K)
        local = t - T * (3 * blk - 2)
        return blk, local, inside

    def velocity(self, t) -> np.ndarray:
        """``ybar(t)`` as an array of shape ``t.shape + (2,)``."""
        blk, r, inside = self._locate(t)
        w = 0.5 * self.schedule.phase
        delta = self.shifts[blk - 1]
        out = np.zeros(np.shape(r) + (2,))
        bump_h = smooth_step_derivative(r / w) / w
        bump_v = smooth_step_derivative((r - w) / w) / w
        back_h = smooth_step_derivative((r - 4 * w) / w) / w
        back_v = smooth_step_derivative((r - 5 * w) / w) / w
        out[..., 0] = delta[..., 0] * (bump_h - back_h)
        out[..., 1] = delta[..., 1] * (bump_v - back_v)
        return np.where(inside[..., None], out, 0.0)

    def displacement(self, t) -> np.ndarray:
        """``Y(t) = int_0^t ybar``, unwrapped, in closed form."""
        blk, r, inside = self._locate(t)
        w = 0.5 * self.schedule.phase
        delta = self.shifts[blk - 1]
        out = np.zeros(np.shape(r) + (2,))
        out[..., 0] = delta[..., 0] * (smooth_step(r / w) - smooth_step((r - 4 * w) / w))
        out[..., 1] = delta[..., 1] * (smooth_step((r - w) / w) - smooth_step((r - 5 * w) / w))
        return np.where(inside[..., None], out, 0.0)

    def displacement_by_quadrature(self, s: float, t: float, order: int = 80) -> np.ndarray:
        """``int_s^t ybar`` by Gauss-Legendre quadrature on each smooth piece."""
        sign = 1.0
        if t < s:
            s, t, sign = t, s, -1.0
        pts = self.schedule.breakpoints()
        pts = np.concatenate([[s], pts[(pts > s) & (pts < t)], [t]])
        nodes, weights = np.polynomial.legendre.leggauss(order)
        total = np.zeros(2)
        for a, b in zip(pts[:-1], pts[1:]):
            if b <= a:
                continue
            x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            total += 0.5 * (b - a) * np.sum(weights[:, None] * self.velocity(x), axis=0)
        return sign * total


def build_return_profile(cov: CoveringSpec) -> tuple[ReturnProfile, FlowSchedule]:
    schedule = FlowSchedule(cov)
    return ReturnProfile(schedule), schedule


def flow_Y(profile: ReturnProfile, x, s: float, t: float) -> np.ndarray:
    """Position at time ``t`` of the particle that sits at ``x`` at time ``s``."""
    shift = profile.displacement(t) - profile.displacement(s)
    return wrap(np.asarray(x, dtype=float) + shift)


@dataclass(frozen=True, eq=False)
class ObservableSpec:
    """Finite surrogate of an observable family and the drift it generates.

    ``psi_l(t) = A * phi(t) * int_0^t phi_l`` with ``phi(t) = T* - t`` and
    ``phi_l`` piecewise constant with values in ``{-1, 1}``.  Each channel
    jumps on its own grid ``(J + 0.5) T*/m_jump`` shifted by a channel offset,
    so the jump sets are pairwise disjoint.  ``A`` is chosen so that the
    largest coefficient equals ``strength / T*``, which makes ``strength`` the
    typical particle displacement over the observable phase.

    Args:
        generator: control modes.
        phase: the phase length ``T*``.
        strength: displacement scale of the drift (0 switches it off).
        m_jump: number of jumps per channel.
        seed: seed for the sign pattern.
    """

    generator: GeneratorSet
    phase: float
    strength: float = 1.0
    m_jump: int = 64
    seed: int = 7

    @cached_property
    def modes(self) -> np.ndarray:
        return np.array(self.generator.modes, dtype=float)

    @cached_property
    def _tables(self):
        T, M = self.phase, self.m_jump
        channels = self.generator.channels
        rng = np.random.default_rng(self.seed)
        breaks, cums, signs = [], [], []
        for c in range(channels):
            offset = (c + 1) * T / (M * (channels + 1)) - 0.5 * T / M
            jumps = (np.arange(M) + 0.5) * T / M + offset
            edges = np.concatenate([[0.0], jumps, [T]])
            sgn = rng.choice([-1.0, 1.0], size=M + 1)
            cum = np.concatenate([[0.0], np.cumsum(sgn * np.diff(edges))])
            breaks.append(edges)
            cums.append(cum)
            signs.append(sgn)
        return np.array(breaks), np.array(cums), np.array(signs)

    def switching(self, t) -> np.ndarray:
        """Values of the channel functions ``phi_l`` at times ``t``; shape ``t.shape + (channels,)``."""
        edges, _, signs = self._tables
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.phase)
        out = []
        for c in range(edges.shape[0]):
            idx = np.clip(np.searchsorted(edges[c], t, side="right") - 1, 0, signs.shape[1] - 1)
            out.append(signs[c][idx])
        return np.stack(out, axis=-1)

    def _raw_psi(self, t) -> np.ndarray:
        edges, cums, signs = self._tables
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.phase)
        out = []
        for c in range(edges.shape[0]):
            idx = np.clip(np.searchsorted(edges[c], t, side="right") - 1, 0, signs.shape[1] - 1)
            integral = cums[c][idx] + signs[c][idx] * (t - edges[c][idx])
            out.append((self.phase - t) * integral)
        return np.stack(out, axis=-1)

    @cached_property
    def kinks(self) -> np.ndarray:
        """Interior observable times where some ``psi`` has a kink (jumps of ``phi_l``)."""
        edges = self._tables[0][:, 1:-1].ravel()
        return np.unique(edges[(edges > 0.0) & (edges < self.phase)])

    @cached_property
    def amplitude(self) -> float:
        if self.strength == 0.0:
            return 0.0
        probe = np.linspace(0.0, self.phase, 4097)
        peak = float(np.abs(self._raw_psi(probe)).max())
        return self.strength / (self.phase * peak)

    def coefficients(self, t) -> np.ndarray:
        """``psi`` at times ``t`` shaped ``t.shape + (modes, 2)``; last axis is (sine, cosine).

        Channels are ordered mode by mode, sine before cosine.
        """
        psi = self.amplitude * self._raw_psi(t)
        return psi.reshape(psi.shape[:-1] + (len(self.generator), 2))

    def velocity(self, x, t: float) -> np.ndarray:
        """Observable drift ``ybar*(x, t)`` for ``t`` in ``[0, T*]``; zero outside."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if t < 0.0 or t > self.phase:
            return np.zeros_like(x)
        return kernels.trig_velocity(x, self.modes, self.coefficients(t))


def build_observable_field(spec: ObservableSpec, profile: ReturnProfile):
    """Return evaluators for ``ybar*`` and for the composite drift ``ubar``."""
    t_final = profile.schedule.t_final

    def ystar(x, t):
        return spec.velocity(x, t)

    def ubar(x, t):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.broadcast_to(profile.velocity(t), x.shape).copy()
        if t >= t_final:
            out += spec.velocity(x, t - t_final)
        return out

    return ystar, ubar


def _observable_nodes(spec: ObservableSpec, marks: Sequence[float], h_flow: float):
    """RK4 time nodes visiting ``marks`` in order, with every ``psi`` kink as a node.

    Between consecutive breaks the interval is split uniformly into steps no
    longer than ``h_flow``, so the coefficients are smooth on every step.

    Returns:
        ``(nodes, record)`` where ``nodes[record[i]] == marks[i]``.
    """
    tol = 1e-12 * spec.phase
    nodes = [float(marks[0])]
    record = [0]
    for mark in marks[1:]:
        a, b = nodes[-1], float(mark)
        if abs(b - a) > tol:
            lo, hi = min(a, b), max(a, b)
            inner = spec.kinks[(spec.kinks > lo + tol) & (spec.kinks < hi - tol)]
            breaks = np.concatenate([[a], inner if b > a else inner[::-1], [b]])
            for u, v in zip(breaks[:-1], breaks[1:]):
                count = max(1, int(math.ceil(abs(v - u) / h_flow - 1e-9)))
                nodes.extend((u + (v - u) * np.arange(1, count) / count).tolist())
                nodes.append(float(v))
        record.append(len(nodes) - 1)
    return np.array(nodes), np.array(record, dtype=np.int64)


def _run_nodes(spec: ObservableSpec, points: np.ndarray, nodes: np.ndarray,
               record: np.ndarray) -> np.ndarray:
    """Integrate through the given node sequence and return positions at ``record``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if len(nodes) < 2 or spec.strength == 0.0:
        return np.broadcast_to(pts, (len(record),) + pts.shape).copy()
    times = np.stack([nodes[:-1], 0.5 * (nodes[:-1] + nodes[1:]), nodes[1:]], axis=1)
    table = np.ascontiguousarray(spec.coefficients(times))
    return kernels.rk4_trig_flow(pts, spec.modes, table, np.diff(nodes), record)


def trace_observable(spec: ObservableSpec, points, start: float, stop: float,
                     h_flow: float, record: Sequence[float] | None = None) -> np.ndarray:
    """RK4 trajectories of ``ybar*`` from observable time ``start`` to ``stop``.

    Steps never straddle a kink of the coefficient functions, which keeps the
    scheme fourth order although ``phi_l`` jumps.

    Args:
        points: ``(P, 2)`` positions at ``start``.
        record: times (between ``start`` and ``stop``, ordered from ``start``)
            at which positions are returned; defaults to ``[stop]``.
        h_flow: maximal step.

    Returns:
        ``(len(record), P, 2)`` unwrapped positions.
    """
    if h_flow > spec.phase / 50.0:
        raise StepTooLarge(f"h_flow = {h_flow:.3e} exceeds T*/50 = {spec.phase / 50:.3e}")
    marks = [stop] if record is None else list(record)
    nodes, idx = _observable_nodes(spec, [start] + marks, h_flow)
    return _run_nodes(spec, points, nodes, idx[1:])


def flow_U(profile: ReturnProfile, spec: ObservableSpec, x, s: float, t: float,
           h_flow: Optional[float] = None) -> np.ndarray:
    """Flow of the composite drift ``ubar`` from time ``s`` to ``t`` by RK4.

    The step never exceeds ``h_flow`` (default ``T*/200``) and the step grid
    is aligned with the schedule breakpoints so the smooth pieces of the
    return profile are integrated separately.

    Raises:
        StepTooLarge: if ``h_flow > T*/50``.
    """
    schedule = profile.schedule
    T = schedule.phase
    h_flow = T / 200.0 if h_flow is None else h_flow
    if h_flow > T / 50.0:
        raise StepTooLarge(f"h_flow = {h_flow:.3e} exceeds T*/50 = {T / 50:.3e}")
    pos = np.atleast_2d(np.asarray(x, dtype=float)).copy()
    if s == t:
        return wrap(pos)
    lo, hi = min(s, t), max(s, t)
    marks = schedule.breakpoints()
    marks = np.concatenate([[lo], marks[(marks > lo) & (marks < hi)], [hi]])
    if t < s:
        marks = marks[::-1]
    t_final = schedule.t_final
    for a, b in zip(marks[:-1], marks[1:]):
        if min(a, b) >= t_final - 1e-15:
            pos = trace_observable(spec, pos, a - t_final, b - t_final, h_flow)[-1]
            continue
        # RK4 on a spatially constant drift reduces to composite Simpson sums.
        steps = max(1, int(math.ceil(abs(b - a) / h_flow - 1e-9)))
        h = (b - a) / steps
        nodes = a + 0.5 * h * np.arange(2 * steps + 1)
        weights = np.full(2 * steps + 1, 2.0)
        weights[1::2] = 4.0
        weights[0] = weights[-1] = 1.0
        pos = pos + (h / 6.0) * (weights @ profile.velocity(nodes))
    return wrap(pos)


def flow_map_Xi(profile: ReturnProfile, spec: ObservableSpec, x, t: float,
                h_flow: Optional[float] = None) -> np.ndarray:
    """``Xi(x, t) = U(Y(x, t, 0), 1, tau(t))`` inside a window.

    Raises:
        InactiveTime: if ``t`` lies outside every window.
    """
    tau, window = profile.schedule.tau(t)
    if window is None:
        raise InactiveTime(f"t = {t} lies outside every control window")
    start = flow_Y(profile, x, t, 0.0)
    h_flow = profile.schedule.phase / 200.0 if h_flow is None else h_flow
    obs_tau = tau - profile.schedule.t_final
    end = trace_observable(spec, start, spec.phase, obs_tau, h_flow)[-1]
    return wrap(end)


@dataclass(frozen=True, eq=False)
class BackwardFlowCache:
    """Backward observable flow of all grid nodes recorded on a uniform time grid.

    ``positions[k]`` holds, for every node ``y``, the observable-time-``r_k``
    position of the trajectory that reaches ``y`` at ``T*``, with
    ``r_k = k * T* / intervals``.  The RK4 nodes (``nodes``, descending from
    ``T*``) include every record time and every kink of the coefficients;
    :meth:`trace_points` and off-node lookups follow the same node sequence.
    """

    spec: ObservableSpec
    n: int
    times: np.ndarray
    positions: np.ndarray
    nodes: np.ndarray
    step: float

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0])

    def node(self, r: float) -> Optional[int]:
        """Index of the cached time equal to ``r`` (up to round-off), else ``None``."""
        k = int(round(r / self.spacing))
        if 0 <= k < len(self.times) and abs(self.times[k] - r) <= 1e-9 * self.spacing:
            return k
        return None

    def index(self, r: float) -> int:
        k = self.node(r)
        if k is None:
            raise KeyError(f"observable time {r} is not a cached node")
        return k

    def at(self, r: float) -> np.ndarray:
        """``(n, n, 2)`` positions at observable time ``r``; off-node times are traced on demand."""
        k = self.node(r)
        if k is not None:
            return self.positions[k].reshape(self.n, self.n, 2)
        k_hi = min(int(math.ceil(r / self.spacing)), len(self.times) - 1)
        traced = self._continue(self.positions[k_hi], self.times[k_hi], r)
        return traced.reshape(self.n, self.n, 2)

    def _continue(self, points, r_from: float, r_to: float) -> np.ndarray:
        """Trace backward from the cached time ``r_from`` to ``r_to <= r_from``."""
        if self.spec.strength == 0.0 or r_from == r_to:
            return np.array(points, dtype=float)
        tol = 1e-12 * self.spec.phase
        inner = self.nodes[(self.nodes < r_from - tol) & (self.nodes > r_to + tol)]
        path = np.concatenate([[r_from], inner, [r_to]])
        return _run_nodes(self.spec, points, path, np.array([len(path) - 1]))[0]

    def trace_points(self, points, r: float) -> np.ndarray:
        """Unwrapped observable-time-``r`` positions of trajectories ending at ``points`` at ``T*``."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self._continue(pts, self.spec.phase, r)


def build_backward_cache(spec: ObservableSpec, n: int, intervals: int,
                         h_flow: Optional[float] = None) -> BackwardFlowCache:
    """Trace every grid node backward from ``T*`` to 0, recording ``intervals + 1`` times."""
    from .spectral import grid_of

    T = spec.phase
    h_flow = T / 200.0 if h_flow is None else h_flow
    if h_flow > T / 50.0:
        raise StepTooLarge(f"h_flow = {h_flow:.3e} exceeds T*/50 = {T / 50:.3e}")
    times = T * np.arange(intervals + 1) / intervals
    nodes, record = _observable_nodes(spec, times[::-1], h_flow)
    pts = grid_of(n).points
    traced = _run_nodes(spec, pts, nodes, record)[::-1]
    return BackwardFlowCache(spec, n, times, np.ascontiguousarray(traced), nodes, h_flow)
