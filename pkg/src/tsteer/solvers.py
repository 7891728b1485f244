"""Pseudo-spectral vorticity solver and linear transport solvers.

Every solver advances in a frame that moves with the spatially uniform part
of the drift.  For the vorticity equation this uniform part is the prescribed
mean velocity ``aleph(t) / (4 pi^2)``; for transport problems it is the return
profile.  Working in the moving frame makes the (possibly huge) uniform
translation exact and leaves only the genuinely spatial dynamics to the time
stepper.  Forcing terms are therefore sampled at ``x + offset(t)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .cutoffs import wrap
from .errors import BlowupDetected, CflViolation, NonZeroMean
from .flows import ObservableSpec, ReturnProfile, trace_observable
from .spectral import (
    AREA,
    GridSpec,
    ScalarField,
    evaluate_displaced,
    grid_of,
    interpolate,
    sobolev_norm,
    to_physical,
    to_spectral,
    translate,
    velocity_arrays,
)

MIN_STEP = 1e-9
BLOWUP_NORM = 1e6


# ---------------------------------------------------------------------------
# forcing terms


class Forcing:
    """Space-time source term.

    Subclasses implement :meth:`evaluate`.  ``within`` is the time step that
    the solver is currently taking; piecewise-in-time forcings use it to pick
    the one-sided limit at a breakpoint.
    """

    def evaluate(self, points: np.ndarray, t: float, within=None) -> np.ndarray:
        raise NotImplementedError

    def sample(self, grid: GridSpec, t: float, offset=(0.0, 0.0), within=None) -> np.ndarray:
        """Values ``f(x + offset, t)`` on the grid nodes."""
        pts = grid.points + np.asarray(offset, dtype=float)
        return self.evaluate(pts, t, within).reshape(grid.n, grid.n)

    def breakpoints(self) -> np.ndarray:
        return np.empty(0)

    def step_limit(self, t: float) -> float:
        """Largest admissible step starting at ``t`` (``inf`` if unconstrained)."""
        return math.inf

    def is_zero(self) -> bool:
        return False


class ZeroForcing(Forcing):
    def evaluate(self, points, t, within=None):
        return np.zeros(len(np.atleast_2d(points)))

    def sample(self, grid, t, offset=(0.0, 0.0), within=None):
        return np.zeros((grid.n, grid.n))

    def is_zero(self) -> bool:
        return True


class FunctionForcing(Forcing):
    """Forcing given by a vectorized ``func(x1, x2, t)``."""

    def __init__(self, func: Callable, breaks: Sequence[float] = ()):
        self.func = func
        self._breaks = np.asarray(sorted(breaks), dtype=float)

    def evaluate(self, points, t, within=None):
        pts = np.atleast_2d(points)
        return np.broadcast_to(self.func(pts[:, 0], pts[:, 1], t), (len(pts),)).astype(float)

    def breakpoints(self):
        return self._breaks


class FieldForcing(Forcing):
    """Time-independent forcing given by grid samples."""

    def __init__(self, field: ScalarField):
        self.values = np.asarray(field.values, dtype=float)

    def evaluate(self, points, t, within=None):
        return interpolate(self.values, np.atleast_2d(points))

    def sample(self, grid, t, offset=(0.0, 0.0), within=None):
        if grid.n != self.values.shape[0]:
            return super().sample(grid, t, offset, within)
        return translate(self.values, offset)

    def is_zero(self):
        return not np.any(self.values)


class SumForcing(Forcing):
    def __init__(self, parts: Sequence[Forcing]):
        self.parts = [p for p in parts if p is not None and not p.is_zero()]

    def evaluate(self, points, t, within=None):
        total = np.zeros(len(np.atleast_2d(points)))
        for part in self.parts:
            total = total + part.evaluate(points, t, within)
        return total

    def sample(self, grid, t, offset=(0.0, 0.0), within=None):
        total = np.zeros((grid.n, grid.n))
        for part in self.parts:
            total = total + part.sample(grid, t, offset, within)
        return total

    def breakpoints(self):
        if not self.parts:
            return np.empty(0)
        return np.unique(np.concatenate([p.breakpoints() for p in self.parts]))

    def step_limit(self, t):
        return min([p.step_limit(t) for p in self.parts], default=math.inf)

    def is_zero(self):
        return not self.parts


class RescaledForcing(Forcing):
    """``amplitude * base(x, rate * (t - start))`` on ``[start, start + 1/rate]``, zero elsewhere.

    This is the time compression used for control bursts: a reference force on
    ``[0, 1]`` squeezed into an interval of length ``1/rate``.
    """

    def __init__(self, base: Forcing, start: float, rate: float, amplitude: float):
        self.base = base
        self.start = float(start)
        self.rate = float(rate)
        self.amplitude = float(amplitude)

    @property
    def stop(self) -> float:
        return self.start + 1.0 / self.rate

    def _inner(self, t, within):
        s = self.rate * (t - self.start)
        inner_within = None
        if within is not None:
            inner_within = (self.rate * (within[0] - self.start), self.rate * (within[1] - self.start))
        return s, inner_within

    def _active(self, t, within) -> bool:
        if within is not None:
            mid = 0.5 * (within[0] + within[1])
            return self.start <= mid <= self.stop
        return self.start <= t <= self.stop

    def evaluate(self, points, t, within=None):
        if not self._active(t, within):
            return np.zeros(len(np.atleast_2d(points)))
        s, w = self._inner(t, within)
        return self.amplitude * self.base.evaluate(points, min(max(s, 0.0), 1.0), w)

    def sample(self, grid, t, offset=(0.0, 0.0), within=None):
        if not self._active(t, within):
            return np.zeros((grid.n, grid.n))
        s, w = self._inner(t, within)
        return self.amplitude * self.base.sample(grid, min(max(s, 0.0), 1.0), offset, w)

    def breakpoints(self):
        inner = self.base.breakpoints()
        inner = inner[(inner >= 0.0) & (inner <= 1.0)]
        return np.unique(np.concatenate([[self.start, self.stop], self.start + inner / self.rate]))

    def step_limit(self, t):
        if self.start - 1e-15 <= t < self.stop:
            return self.base.step_limit(self.rate * (t - self.start)) / self.rate
        return math.inf

    def is_zero(self):
        return self.base.is_zero()


# ---------------------------------------------------------------------------
# prescribed velocity averages


class AverageProgram:
    """Prescribed spatial integral ``aleph(t)`` of the velocity.

    ``frame_offset(t)`` is the displacement ``int_0^t aleph / (4 pi^2)`` of the
    uniform part of the flow.
    """

    def velocity(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def frame_offset(self, t: float) -> np.ndarray:
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        return np.empty(0)


class ConstantAverage(AverageProgram):
    def __init__(self, total=(0.0, 0.0)):
        self.total = np.asarray(total, dtype=float)

    def velocity(self, t):
        return self.total.copy()

    def frame_offset(self, t):
        return self.total * (t / AREA)


class CallableAverage(AverageProgram):
    """Average given by a function of time, integrated piecewise by Gauss-Legendre."""

    def __init__(self, func: Callable[[float], Sequence[float]], breaks: Sequence[float] = (),
                 order: int = 12):
        self.func = func
        self._breaks = np.unique(np.asarray(breaks, dtype=float))
        self._nodes, self._weights = np.polynomial.legendre.leggauss(order)

    def velocity(self, t):
        return np.asarray(self.func(t), dtype=float)

    def breakpoints(self):
        return self._breaks

    def frame_offset(self, t):
        pts = np.concatenate([[0.0], self._breaks[(self._breaks > 0) & (self._breaks < t)], [t]])
        total = np.zeros(2)
        for a, b in zip(pts[:-1], pts[1:]):
            if b <= a:
                continue
            for x, w in zip(0.5 * (b - a) * self._nodes + 0.5 * (a + b), self._weights):
                total += 0.5 * (b - a) * w * self.velocity(x)
        return total / AREA


class BurstAverage(AverageProgram):
    """``before`` up to ``start``, then ``4 pi^2 rate * ybar(rate (t - start))`` plus a blend.

    ``blend`` (optional) is an :class:`AverageProgram` in reference time ``[0, 1]``
    that is added during the burst, unscaled in amplitude.
    """

    def __init__(self, profile: ReturnProfile, start: float, rate: float,
                 before=(0.0, 0.0), blend: Optional[AverageProgram] = None):
        self.profile = profile
        self.start = float(start)
        self.rate = float(rate)
        self.before = np.asarray(before, dtype=float)
        self.blend = blend

    def velocity(self, t):
        if t < self.start:
            return self.before.copy()
        s = min(self.rate * (t - self.start), 1.0)
        out = AREA * self.rate * self.profile.velocity(s)
        if self.blend is not None:
            out = out + self.blend.velocity(s)
        else:
            out = out + self.before
        return out

    def frame_offset(self, t):
        base = self.before * (min(t, self.start) / AREA)
        if t <= self.start:
            return base
        s = min(self.rate * (t - self.start), 1.0)
        out = base + self.profile.displacement(s)
        if self.blend is not None:
            out = out + self.blend.frame_offset(s) / self.rate
        else:
            out = out + self.before * ((t - self.start) / AREA)
        return out

    def breakpoints(self):
        inner = self.profile.schedule.breakpoints()
        return self.start + inner / self.rate


def as_average(aleph) -> AverageProgram:
    if aleph is None:
        return ConstantAverage()
    if isinstance(aleph, AverageProgram):
        return aleph
    if callable(aleph):
        return CallableAverage(aleph)
    return ConstantAverage(aleph)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class TrajectoryRecord:
    """Snapshots and diagnostics of one run."""

    times: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    norm0: list = field(default_factory=list)
    norm1: list = field(default_factory=list)
    means: list = field(default_factory=list)
    steps: int = 0

    def append(self, t: float, values: np.ndarray) -> None:
        grid = grid_of(values.shape[0])
        self.times.append(float(t))
        self.snapshots.append(ScalarField(grid, values))
        self.norm0.append(sobolev_norm(values, 0))
        self.norm1.append(sobolev_norm(values, 1))
        self.means.append(float(np.mean(values)))

    @property
    def final(self) -> ScalarField:
        return self.snapshots[-1]

    def diagnostics_rows(self):
        """Rows ``(time, |w|_0, |w|_1, mean)`` for CSV export."""
        return list(zip(self.times, self.norm0, self.norm1, self.means))


def _segments(t0: float, t1: float, breaks: np.ndarray) -> np.ndarray:
    inner = breaks[(breaks > t0 + 1e-14) & (breaks < t1 - 1e-14)]
    return np.concatenate([[t0], inner, [t1]])


def _record_marks(t0, t1, record_times, record_every):
    marks = set()
    if record_times is not None:
        marks.update(float(t) for t in record_times if t0 < t < t1)
    if record_every:
        k = 1
        while t0 + k * record_every < t1 - 1e-14:
            marks.add(t0 + k * record_every)
            k += 1
    return np.array(sorted(marks))


# ---------------------------------------------------------------------------
# vorticity


class _VorticityRhs:
    def __init__(self, grid, forcing, average, frame):
        self.grid = grid
        self.forcing = forcing
        self.average = average
        self.frame = frame
        self.d1, self.d2 = grid.derivative_multipliers
        self.mask = grid.dealias_mask
        self.last_speed = 0.0

    def offset(self, t):
        return self.average.frame_offset(t) if self.frame else np.zeros(2)

    def __call__(self, w_hat, t, within):
        grid = self.grid
        n = grid.n
        mean = self.average.velocity(t) / AREA if not self.frame else (0.0, 0.0)
        u1, u2 = velocity_arrays(grid, w_hat, mean)
        self.last_speed = float(np.sqrt(u1 * u1 + u2 * u2).max())
        w1 = to_physical(self.d1 * w_hat, n)
        w2 = to_physical(self.d2 * w_hat, n)
        out = -to_spectral(u1 * w1 + u2 * w2) * self.mask
        if self.forcing is not None:
            f_hat = to_spectral(self.forcing.sample(grid, t, self.offset(t), within)) * grid.nyquist_free
            out = out + f_hat
        out[0, 0] = 0.0
        return out


def solve_vorticity(w0: ScalarField, forcing: Optional[Forcing] = None, aleph=None,
                    extra_force: Optional[Forcing] = None, nu: float = 1e-2, T: float = 1.0,
                    *, t0: float = 0.0, cfl: float = 0.5, dt_max: float = 1e-2,
                    record_times: Optional[Sequence[float]] = None,
                    record_every: Optional[float] = None,
                    mean_advection: str = "frame") -> TrajectoryRecord:
    """Advance the forced 2-D vorticity equation with prescribed velocity average.

    Solves ``w_t - nu Lap w + (Upsilon(w, aleph(t)) . grad) w = forcing + extra_force``
    from ``t0`` to ``T`` with an integrating-factor (Lawson) RK4 scheme, 2/3
    dealiasing of the advection term and removal of the forcing mean.

    Args:
        w0: average-free initial vorticity.
        forcing, extra_force: optional :class:`Forcing` terms.
        aleph: prescribed velocity integral, a constant 2-vector, a callable
            of time or an :class:`AverageProgram`.
        mean_advection: ``"frame"`` removes the uniform velocity exactly by
            working in the co-moving frame; ``"explicit"`` keeps it inside the
            explicit advection term.
        dt_max: step ceiling; the actual step also obeys the CFL condition on
            the stream velocity and any limit imposed by the forcing.

    Raises:
        NonZeroMean: if ``w0`` has a mean.
        CflViolation: if the adaptive step falls below ``1e-9``.
        BlowupDetected: if the L2 norm exceeds ``1e6``.
    """
    if nu <= 0:
        raise ValueError("viscosity must be positive")
    if mean_advection not in ("frame", "explicit"):
        raise ValueError("mean_advection must be 'frame' or 'explicit'")
    grid = w0.grid
    values = np.asarray(w0.values, dtype=float)
    if abs(values.mean()) > 1e-12 * max(np.sqrt(np.mean(values**2)), np.finfo(float).tiny):
        raise NonZeroMean("initial vorticity must be average-free")
    average = as_average(aleph)
    force = SumForcing([f for f in (forcing, extra_force) if f is not None])
    frame = mean_advection == "frame"
    rhs = _VorticityRhs(grid, None if force.is_zero() else force, average, frame)

    record = TrajectoryRecord()
    record.append(t0, values)
    if T <= t0:
        return record
    marks = _record_marks(t0, T, record_times, record_every)
    breaks = np.concatenate([force.breakpoints(), average.breakpoints(), marks])
    segments = _segments(t0, T, np.unique(breaks))
    mark_set = set(marks.tolist())

    w_hat = to_spectral(values)
    w_hat[0, 0] = 0.0
    decay_rate = nu * grid.ksq
    dx = grid.spacing
    rhs(w_hat, t0, (t0, t0))
    for a, b in zip(segments[:-1], segments[1:]):
        t = a
        while t < b - 1e-15 * max(1.0, abs(b)):
            limit = min(dt_max, force.step_limit(t))
            if rhs.last_speed > 0:
                limit = min(limit, cfl * dx / rhs.last_speed)
            if limit < MIN_STEP:
                raise CflViolation(f"time step {limit:.2e} underflows at t = {t:.6f}")
            # uniform steps filling the rest of the segment
            count = max(1, int(math.ceil((b - t) / limit - 1e-9)))
            dt = (b - t) / count
            within = (t, t + dt)
            half = np.exp(-0.5 * dt * decay_rate)
            full = half * half
            k1 = rhs(w_hat, t, within)
            k2 = rhs(half * (w_hat + 0.5 * dt * k1), t + 0.5 * dt, within)
            k3 = rhs(half * w_hat + 0.5 * dt * k2, t + 0.5 * dt, within)
            k4 = rhs(full * w_hat + dt * half * k3, t + dt, within)
            w_hat = full * w_hat + (dt / 6.0) * (full * k1 + 2.0 * half * (k2 + k3) + k4)
            w_hat[0, 0] = 0.0
            t = t + dt if count > 1 else b
            record.steps += 1
            if not np.all(np.isfinite(w_hat)):
                raise BlowupDetected(f"non-finite vorticity at t = {t:.6f}")
            norm = math.sqrt(AREA * np.sum(grid.half_plane_weights * np.abs(w_hat / grid.n**2) ** 2))
            if norm > BLOWUP_NORM:
                raise BlowupDetected(f"|w|_0 = {norm:.3e} exceeds {BLOWUP_NORM:.0e} at t = {t:.6f}")
        if b in mark_set or b == segments[-1]:
            lab = to_physical(w_hat, grid.n)
            if frame:
                lab = translate(lab, -rhs.offset(b))
            record.append(b, lab)
    return record


# ---------------------------------------------------------------------------
# transport


class Drift:
    """Divergence-free drift for transport problems."""

    uniform = False

    def velocity(self, points, t) -> np.ndarray:
        raise NotImplementedError

    def trace(self, points, t_from, t_to, h_flow, record=None) -> np.ndarray:
        """Unwrapped positions at ``record`` times (default ``[t_to]``)."""
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        return np.empty(0)


class UniformDrift(Drift):
    """The spatially constant return profile."""

    uniform = True

    def __init__(self, profile: ReturnProfile):
        self.profile = profile

    def velocity(self, points, t):
        pts = np.atleast_2d(points)
        return np.broadcast_to(self.profile.velocity(t), pts.shape).copy()

    def displacement(self, t) -> np.ndarray:
        return self.profile.displacement(t)

    def trace(self, points, t_from, t_to, h_flow=None, record=None):
        marks = [t_to] if record is None else list(record)
        base = self.profile.displacement(t_from)
        pts = np.atleast_2d(points)
        return np.stack([pts + (self.profile.displacement(m) - base) for m in marks])

    def breakpoints(self):
        return self.profile.schedule.breakpoints()


class ConstantVelocityDrift(Drift):
    uniform = True

    def __init__(self, velocity):
        self.speed = np.asarray(velocity, dtype=float)

    def velocity(self, points, t):
        pts = np.atleast_2d(points)
        return np.broadcast_to(self.speed, pts.shape).copy()

    def displacement(self, t):
        return self.speed * t

    def trace(self, points, t_from, t_to, h_flow=None, record=None):
        marks = [t_to] if record is None else list(record)
        pts = np.atleast_2d(points)
        return np.stack([pts + self.speed * (m - t_from) for m in marks])


class ObservableDrift(Drift):
    """``ybar*(x, t - start)`` on ``[start, start + T*]``, zero elsewhere."""

    def __init__(self, spec: ObservableSpec, start: float = 0.0):
        self.spec = spec
        self.start = float(start)

    def velocity(self, points, t):
        return self.spec.velocity(points, t - self.start)

    def _clip(self, t):
        return min(max(t - self.start, 0.0), self.spec.phase)

    def trace(self, points, t_from, t_to, h_flow, record=None):
        marks = [t_to] if record is None else list(record)
        if self.spec.strength == 0.0:
            return np.stack([np.atleast_2d(points).astype(float)] * len(marks))
        inner = [self._clip(m) for m in marks]
        step = min(h_flow, self.spec.phase / 200.0)
        return trace_observable(self.spec, points, self._clip(t_from), inner[-1], step, inner)

    def breakpoints(self):
        return np.array([self.start, self.start + self.spec.phase])


class CompositeDrift(Drift):
    """The return profile followed by the observable drift on ``[T_b, 1]``."""

    def __init__(self, profile: ReturnProfile, spec: ObservableSpec):
        self.profile = profile
        self.spec = spec
        self._uniform = UniformDrift(profile)
        self._observable = ObservableDrift(spec, profile.schedule.t_final)

    def velocity(self, points, t):
        return self._uniform.velocity(points, t) + self._observable.velocity(points, t)

    def trace(self, points, t_from, t_to, h_flow, record=None):
        marks = [t_to] if record is None else list(record)
        split = self.profile.schedule.t_final
        out = []
        pos, t = np.atleast_2d(points).astype(float), t_from
        for m in marks:
            # walk from t to m, splitting at T_b where the drift changes type
            for seg_end in ([split, m] if min(t, m) < split < max(t, m) else [m]):
                if max(t, seg_end) <= split + 1e-15:
                    pos = self._uniform.trace(pos, t, seg_end)[-1]
                else:
                    pos = self._observable.trace(pos, t, seg_end, h_flow)[-1]
                t = seg_end
            out.append(pos)
        return np.stack(out)

    def breakpoints(self):
        return np.concatenate([self.profile.schedule.breakpoints(), self._observable.breakpoints()])


def solve_transport(v0: ScalarField, drift: Drift, forcing: Optional[Forcing] = None,
                    T: float = 1.0, *, t0: float = 0.0, dt: float = 1e-3,
                    h_flow: Optional[float] = None,
                    record_times: Optional[Sequence[float]] = None) -> TrajectoryRecord:
    """Solve ``v_t + (drift . grad) v = forcing`` from ``t0`` to ``T``.

    A uniform drift is handled in the co-moving frame: the forcing is
    integrated along the exact translation by composite Simpson quadrature and
    the result is shifted back spectrally.  A general drift is handled by
    backward semi-Lagrangian steps: each grid node is traced back over one step
    with RK4, the previous solution is evaluated at the foot by a spectral
    Taylor expansion, and the forcing is integrated along the characteristic
    with Simpson's rule.

    Args:
        dt: maximal time step; step boundaries are aligned with the forcing
            and drift breakpoints.
        h_flow: maximal RK4 step for tracing (defaults to ``dt``).

    Raises:
        CflViolation: if ``dt`` is below ``1e-9``.
    """
    if dt < MIN_STEP:
        raise CflViolation(f"time step {dt:.2e} underflows")
    grid = v0.grid
    n = grid.n
    force = forcing if forcing is not None else ZeroForcing()
    h_flow = dt if h_flow is None else h_flow
    record = TrajectoryRecord()
    values = np.array(v0.values, dtype=float)
    record.append(t0, values)
    if T <= t0:
        return record
    marks = _record_marks(t0, T, record_times, None)
    breaks = np.unique(np.concatenate([force.breakpoints(), drift.breakpoints(), marks]))
    segments = _segments(t0, T, breaks)
    mark_set = set(marks.tolist())

    if drift.uniform:
        base_offset = drift.displacement(t0)
        moving = values.copy()
        for a, b in zip(segments[:-1], segments[1:]):
            count = max(1, int(math.ceil((b - a) / min(dt, force.step_limit(a)) - 1e-9)))
            h = (b - a) / count
            if not force.is_zero():
                for k in range(count):
                    s0 = a + k * h
                    s1 = b if k == count - 1 else s0 + h
                    within = (s0, s1)
                    acc = force.sample(grid, s0, drift.displacement(s0) - base_offset, within)
                    acc += 4.0 * force.sample(grid, 0.5 * (s0 + s1),
                                              drift.displacement(0.5 * (s0 + s1)) - base_offset, within)
                    acc += force.sample(grid, s1, drift.displacement(s1) - base_offset, within)
                    moving += (s1 - s0) / 6.0 * acc
            record.steps += count
            if b in mark_set or b == segments[-1]:
                shift = drift.displacement(b) - base_offset
                record.append(b, translate(moving, -shift))
        return record

    points = grid.points
    for a, b in zip(segments[:-1], segments[1:]):
        count = max(1, int(math.ceil((b - a) / min(dt, force.step_limit(a)) - 1e-9)))
        h = (b - a) / count
        for k in range(count):
            s0 = a + k * h
            s1 = b if k == count - 1 else s0 + h
            mid = 0.5 * (s0 + s1)
            traced = drift.trace(points, s1, s0, min(h_flow, s1 - s0), record=[mid, s0])
            foot = traced[1]
            disp = foot - points
            values = evaluate_displaced(values, disp[:, 0].reshape(n, n), disp[:, 1].reshape(n, n))
            if not force.is_zero():
                within = (s0, s1)
                acc = force.evaluate(points, s1, within)
                acc += 4.0 * force.evaluate(wrap(traced[0]), mid, within)
                acc += force.evaluate(wrap(foot), s0, within)
                values = values + (s1 - s0) / 6.0 * acc.reshape(n, n)
            record.steps += 1
        if b in mark_set or b == segments[-1]:
            record.append(b, values)
    return record


def solve_transport_characteristics(x, forcing: Forcing, drift: UniformDrift,
                                    v0: Optional[Callable] = None, T: float = 1.0,
                                    dt: float = 1e-3) -> np.ndarray:
    """Pointwise ``v(x, T) = v0(x - Y(T)) + int_0^T forcing(x - Y(T) + Y(s), s) ds``.

    Quadrature is composite Simpson on steps no longer than ``dt``, aligned
    with the forcing and drift breakpoints.  Serves as an oracle for
    :func:`solve_transport` under the uniform return drift.
    """
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    start = pts - drift.displacement(T) + drift.displacement(0.0)
    total = np.zeros(len(pts)) if v0 is None else np.asarray(v0(wrap(start)), dtype=float).copy()
    if forcing is None or forcing.is_zero():
        return total
    breaks = np.unique(np.concatenate([forcing.breakpoints(), drift.breakpoints()]))
    segments = _segments(0.0, T, breaks)
    base = drift.displacement(0.0)
    for a, b in zip(segments[:-1], segments[1:]):
        count = max(1, int(math.ceil((b - a) / min(dt, forcing.step_limit(a)) - 1e-9)))
        h = (b - a) / count
        for k in range(count):
            s0 = a + k * h
            s1 = b if k == count - 1 else s0 + h
            within = (s0, s1)
            acc = np.zeros(len(pts))
            for s, weight in ((s0, 1.0), (0.5 * (s0 + s1), 4.0), (s1, 1.0)):
                pos = wrap(start + drift.displacement(s) - base)
                acc += weight * forcing.evaluate(pos, s, within)
            total += (s1 - s0) / 6.0 * acc
    return total
