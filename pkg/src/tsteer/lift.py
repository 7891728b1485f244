"""From vorticity controls to velocity forces.

A zero-average vorticity control ``eta`` supported in a square ``O`` is
integrated into a velocity force ``xi`` with ``curl xi = eta`` and support
next to ``O``.  The spatial averages of the velocity, which vorticity cannot
see, are steered separately through two curl-free fields ``Lambda`` and
``Sigma`` concentrated near closed cut curves.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .cutoffs import CutoffBundle, smooth_step, smooth_step_derivative, wrap
from .errors import DependentAverages, SigmaTooSmall, SupportViolation
from .flows import ReturnProfile
from .solvers import AverageProgram, BurstAverage, CallableAverage
from .spectral import TWO_PI, GridSpec, ScalarField, VectorField2, curl, grid_of

SUPPORT_TOL = 1e-12
DET_FLOOR = 0.1
PERTURB_ATTEMPTS = 8


def _periodic_antiderivative(values: np.ndarray, axis: int) -> np.ndarray:
    """Spectral antiderivative along ``axis`` of data with zero mean along it."""
    n = values.shape[axis]
    k = np.fft.fftfreq(n, 1.0 / n)
    shape = [1] * values.ndim
    shape[axis] = n
    k = k.reshape(shape)
    coeffs = np.fft.fft(values, axis=axis)
    keep = (k != 0) & (np.abs(k) != n // 2)
    safe = np.where(keep, k, 1.0)
    out = np.where(keep, coeffs / (1j * safe), 0.0)
    return np.real(np.fft.ifft(out, axis=axis))


# ---------------------------------------------------------------------------
# lift of the vorticity control


@dataclass(frozen=True)
class LiftSpec:
    """Geometry of the lift.

    ``corner`` and ``side`` describe the square ``O = corner + [0, side]^2``
    holding the vorticity control, ``margin`` is half the distance from ``O``
    to the boundary of ``omega``.
    """

    corner: np.ndarray
    side: float
    margin: float
    omega: tuple[float, float, float, float]

    def _local(self, x, axis: int):
        return wrap(np.asarray(x, dtype=float) - self.corner[axis])

    def rho(self, x1):
        """Cutoff rising over the square, flat on a margin, then falling back."""
        u = self._local(x1, 0)
        L, d = self.side, self.margin
        rise = smooth_step(u / L)
        fall = 1.0 - smooth_step((u - L - 0.5 * d) / (0.5 * d))
        return np.where(u <= L + 0.5 * d, rise, fall)

    def rho_prime(self, x1):
        u = self._local(x1, 0)
        L, d = self.side, self.margin
        rise = smooth_step_derivative(u / L) / L
        fall = -smooth_step_derivative((u - L - 0.5 * d) / (0.5 * d)) / (0.5 * d)
        return np.where(u <= L + 0.5 * d, rise, fall)

    def _plateau_1d(self, x, axis: int):
        u = wrap(np.asarray(x, dtype=float) - self.corner[axis] + 0.5 * self.margin)
        h = 0.5 * self.margin
        top = self.side + self.margin
        return smooth_step(u / h) * (1.0 - smooth_step((u - top) / h))

    def chi_bar(self, x1, x2):
        """Phantom cutoff: one on ``corner + [0, side + margin/2]^2``, zero outside ``omega``."""
        return self._plateau_1d(x1, 0) * self._plateau_1d(x2, 1)

    def in_square(self, x1, x2, slack: float = 0.0):
        L = self.side + slack
        return (self._local(x1, 0) <= L) & (self._local(x2, 1) <= L)

    def in_omega(self, x1, x2):
        a1, a2, b1, b2 = self.omega
        u1 = wrap(np.asarray(x1, dtype=float) - a1)
        u2 = wrap(np.asarray(x2, dtype=float) - b1)
        return (u1 <= a2 - a1) & (u2 <= b2 - b1)


def build_lift_spec(bundle: CutoffBundle, omega_rect: Sequence[float]) -> LiftSpec:
    """Lift geometry from the support hull of the localized control.

    Raises:
        SupportViolation: if the hull does not sit strictly inside ``omega``.
    """
    corner, side = bundle.support_hull()
    L1, L2, H1, H2 = (float(v) for v in omega_rect)
    gaps = (corner[0] - L1, L2 - corner[0] - side, corner[1] - H1, H2 - corner[1] - side)
    distance = min(gaps)
    if distance <= 0.0:
        raise SupportViolation(f"control square reaches the boundary of omega (gap {distance:.3e})")
    return LiftSpec(np.asarray(corner, dtype=float), float(side), 0.5 * distance, (L1, L2, H1, H2))


@dataclass(frozen=True, eq=False)
class LiftResult:
    """Lifted force together with diagnostics of the discrete construction.

    ``seam`` is the largest value of the x1-antiderivative beyond the flat
    margin before truncation, relative to its peak.  It measures how far the
    grid data are from the exact identity that makes the antiderivative vanish
    there.
    """

    xi: VectorField2
    seam: float


def _rise_profile(spec: LiftSpec, grid: GridSpec) -> np.ndarray:
    g = spec.rho_prime(grid.axis)
    g = np.where(spec._local(grid.axis, 0) <= spec.side, g, 0.0)
    return g / (math.fsum(g) * grid.spacing)


def lift_vorticity_control(eta, spec: LiftSpec) -> LiftResult:
    """Velocity force ``xi`` with ``curl xi = eta`` supported near ``O``.

    ``a`` is the x1-antiderivative of ``eta`` from the left edge of ``O``,
    ``q = a(p1 + L, .)`` the row integral, ``b`` the x2-antiderivative of
    ``q`` and ``c = a - rho q``.  Then ``xi = chi_bar (-rho' b, c)``.  The
    antiderivatives are spectral: ``c`` is the periodic antiderivative of
    ``eta - rho' q``, which has zero row integrals.

    Raises:
        SupportViolation: if ``eta`` exceeds ``1e-12`` outside ``O``.
    """
    values = eta.values if isinstance(eta, ScalarField) else np.asarray(eta, dtype=float)
    n = values.shape[0]
    grid = grid_of(n)
    x1, x2 = grid.nodes
    outside = ~spec.in_square(x1, x2)
    leak = float(np.max(np.abs(values[outside]), initial=0.0))
    if leak > SUPPORT_TOL:
        raise SupportViolation(f"vorticity control is {leak:.3e} outside the control square")
    h = grid.spacing
    u1 = spec._local(grid.axis, 0)
    u2 = spec._local(grid.axis, 1)
    g = _rise_profile(spec, grid)
    q = values.sum(axis=0) * h
    c = _periodic_antiderivative(values - g[:, None] * q[None, :], 0)
    before = (u1 > spec.side + 0.5 * spec.margin) & (u1 < TWO_PI - 0.25 * spec.margin)
    c -= c[before].mean(axis=0)[None, :] if np.any(before) else 0.0
    b = _periodic_antiderivative(q - q.mean(), 0)
    b -= b[np.argmin(u2)]
    keep = u1 <= spec.side + 0.25 * spec.margin
    scale = max(float(np.max(np.abs(c))), np.finfo(float).tiny)
    seam = float(np.max(np.abs(c[~keep]), initial=0.0)) / scale
    cbar = spec.chi_bar(x1, x2)
    xi1 = -cbar * g[:, None] * b[None, :]
    xi2 = cbar * c
    xi = VectorField2(ScalarField(grid, xi1), ScalarField(grid, xi2))
    return LiftResult(xi, seam)


@dataclass(frozen=True)
class LiftAuditRow:
    t: float
    curl_error: float
    outside_omega: float
    seam: float


def audit_lift(eta_at: Callable[[float, int], np.ndarray], spec: LiftSpec,
               times: Sequence[float], n_audit: int = 2048) -> list[LiftAuditRow]:
    """Check ``curl xi = eta`` and the support of ``xi`` on a fine grid.

    ``eta_at(t, n)`` returns the vorticity control at ``t`` on the ``n``-grid.
    The curl error is relative to ``max |eta|``.
    """
    rows = []
    for t in times:
        values = eta_at(t, n_audit)
        lifted = lift_vorticity_control(values, spec)
        residual = curl(lifted.xi).values - values
        scale = max(float(np.max(np.abs(values))), np.finfo(float).tiny)
        grid = lifted.xi.grid
        x1, x2 = grid.nodes
        out = ~spec.in_omega(x1, x2)
        outside = max(float(np.max(np.abs(lifted.xi.u1.values[out]), initial=0.0)),
                      float(np.max(np.abs(lifted.xi.u2.values[out]), initial=0.0)))
        err = float(np.max(np.abs(residual))) / scale if np.any(values) else float(np.max(np.abs(residual)))
        rows.append(LiftAuditRow(float(t), err, outside, lifted.seam))
    return rows


# ---------------------------------------------------------------------------
# cut fields


def cut_bump(s, width: float):
    """Unit-mass bump supported in ``(-width/2, width/2)``."""
    return smooth_step_derivative(np.asarray(s, dtype=float) / width + 0.5) / width


@dataclass(frozen=True, eq=False)
class GraphSection:
    """One section of a cut curve.

    ``axis == 2``: the curve is ``x1 = -upsilon(x2)`` for ``x2`` in
    ``[start, stop]``.  ``axis == 1``: the curve is ``x2 = -upsilon(x1)``.
    ``sign`` selects the orientation of the block field.
    """

    axis: int
    upsilon: Callable
    derivative: Callable
    start: float
    stop: float
    sign: int = 1

    def __post_init__(self):
        if self.axis not in (1, 2):
            raise ValueError("section axis must be 1 or 2")
        if self.sign not in (1, -1):
            raise ValueError("section sign must be +1 or -1")
        if not 0.0 < self.stop - self.start <= TWO_PI + 1e-12:
            raise ValueError("section interval must have length in (0, 2 pi]")

    @property
    def full(self) -> bool:
        return self.stop - self.start >= TWO_PI - 1e-12

    def coordinates(self, points: np.ndarray):
        """``(param, other)`` coordinate columns of ``points``."""
        if self.axis == 2:
            return points[:, 1], points[:, 0]
        return points[:, 0], points[:, 1]

    def point(self, s: float) -> np.ndarray:
        v = -float(self.upsilon(np.asarray(s)))
        return np.array([v, s]) if self.axis == 2 else np.array([s, v])

    def slope(self, s: float) -> float:
        """``dx2/dx1`` of the curve at parameter ``s``."""
        d = -float(self.derivative(np.asarray(s)))
        if self.axis == 1:
            return d
        return math.inf if d == 0.0 else 1.0 / d

    def block(self, points: np.ndarray, width: float):
        """The block field and the signed tube coordinate at ``points``."""
        param, other = self.coordinates(points)
        offset = wrap(param - self.start)
        s = self.start + offset
        arg = wrap(other + self.upsilon(s) + np.pi) - np.pi
        amp = self.sign * cut_bump(self.sign * arg, width)
        slope_part = amp * self.derivative(s)
        if self.axis == 2:
            return np.stack([amp, slope_part], axis=-1), arg, offset
        return np.stack([slope_part, amp], axis=-1), arg, offset


@dataclass(frozen=True, eq=False)
class CutCurveSpec:
    """A closed cut curve made of axis-graph sections and its bump width."""

    sections: tuple[GraphSection, ...]
    width: float

    def __post_init__(self):
        count = len(self.sections)
        if count == 0 or (count > 1 and count % 2):
            raise ValueError("a cut needs one section or an even number of sections")
        if count == 1 and not self.sections[0].full:
            raise ValueError("a single-section cut must span a full period")
        for a, b in zip(self.sections, self.sections[1:] + self.sections[:1]):
            if count > 1 and a.axis == b.axis:
                raise ValueError("adjacent sections must alternate axes")
        if not 0.0 < self.width < np.pi:
            raise ValueError("bump width must lie in (0, pi)")


    def _junction(self, k: int):
        """Shared endpoint of sections ``k`` and ``k + 1`` and which ends meet."""
        a = self.sections[k]
        b = self.sections[(k + 1) % len(self.sections)]
        best = None
        for ea in (a.start, a.stop):
            for eb in (b.start, b.stop):
                gap = float(np.max(np.abs(wrap(a.point(ea) - b.point(eb) + np.pi) - np.pi)))
                if best is None or gap < best[0]:
                    best = (gap, ea, eb)
        gap, ea, eb = best
        if gap > 1e-6:
            raise ValueError(f"sections {k} and {k + 1} do not meet (gap {gap:.3e})")
        if not np.isclose(abs(a.slope(ea)), 1.0, atol=1e-6) or not np.isclose(abs(b.slope(eb)), 1.0, atol=1e-6):
            raise ValueError(f"junction after section {k} does not have slope +-1")
        return a.point(ea), ea, eb

    def junctions(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """Junction points and the normal of the dividing diagonal.

        Points ``P`` near the junction ``J`` with ``(P - J) . normal > 0``
        belong to the earlier section.
        """
        out = []
        if len(self.sections) == 1:
            return out
        step = 0.25 * self.width
        for k, a in enumerate(self.sections):
            b = self.sections[(k + 1) % len(self.sections)]
            point, ea, eb = self._junction(k)
            inner_a = a.point(ea + (step if ea == a.start else -step))
            inner_b = b.point(eb + (step if eb == b.start else -step))
            da = wrap(inner_a - point + np.pi) - np.pi
            db = wrap(inner_b - point + np.pi) - np.pi
            out.append((point, da / np.linalg.norm(da) - db / np.linalg.norm(db)))
        return out

    def field(self, points) -> np.ndarray:
        """Glued block field at ``points`` (shape ``(P, 2)``)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.zeros_like(pts)
        owner = np.full(len(pts), -1)
        count = len(self.sections)
        for k, (point, normal) in enumerate(self.junctions()):
            rel = wrap(pts - point + np.pi) - np.pi
            box = (np.max(np.abs(rel), axis=1) < self.width) & (owner < 0)
            side = rel @ normal > 0
            owner[box & side] = k
            owner[box & ~side] = (k + 1) % count
        for k, sec in enumerate(self.sections):
            block, arg, offset = sec.block(pts, self.width)
            free = owner < 0
            if not sec.full:
                free &= offset <= sec.stop - sec.start
            owner[free & (np.abs(arg) < 0.5 * self.width)] = k
        for k, sec in enumerate(self.sections):
            mine = owner == k
            if np.any(mine):
                block, _, _ = sec.block(pts[mine], self.width)
                out[mine] = block
        return out

    def junction_mismatch(self, samples: int = 33) -> float:
        """Largest disagreement of neighbouring blocks inside the junction boxes."""
        worst = 0.0
        for k, (point, _) in enumerate(self.junctions()):
            s = np.linspace(-self.width, self.width, samples)
            box = point + np.stack(np.meshgrid(s, s, indexing="ij"), axis=-1).reshape(-1, 2)
            a = self.sections[k].block(box, self.width)[0]
            b = self.sections[(k + 1) % len(self.sections)].block(box, self.width)[0]
            worst = max(worst, float(np.max(np.abs(a - b))))
        return worst

    def perturbed(self, amplitude: float) -> "CutCurveSpec":
        """Cut moved by a smooth bump of height ``amplitude`` in the middle third of section one."""
        first = self.sections[0]
        a = first.start + (first.stop - first.start) / 3.0
        w = (first.stop - first.start) / 3.0
        base_u, base_d = first.upsilon, first.derivative

        def shifted(s):
            return base_u(s) + amplitude * _window(wrap(np.asarray(s, dtype=float) - a) / w)

        def shifted_prime(s):
            return base_d(s) + amplitude * _window_prime(wrap(np.asarray(s, dtype=float) - a) / w) / w

        moved = GraphSection(first.axis, shifted, shifted_prime, first.start, first.stop, first.sign)
        return CutCurveSpec((moved,) + self.sections[1:], self.width)


def _window(u):
    """C-infinity bump on ``(0, 1)`` with peak one."""
    u = np.asarray(u, dtype=float)
    return np.where((u > 0) & (u < 1), smooth_step(2 * u) * smooth_step(2 - 2 * u), 0.0)


def _window_prime(u):
    u = np.asarray(u, dtype=float)
    val = 2 * smooth_step_derivative(2 * u) * smooth_step(2 - 2 * u) \
        - 2 * smooth_step(2 * u) * smooth_step_derivative(2 - 2 * u)
    return np.where((u > 0) & (u < 1), val, 0.0)


def straight_cut(axis: int, position: float, width: float) -> CutCurveSpec:
    """Straight cut ``x1 = position`` (``axis == 2``) or ``x2 = position`` (``axis == 1``)."""
    level = -float(position)
    section = GraphSection(axis, lambda s: np.full_like(np.asarray(s, dtype=float), level),
                           lambda s: np.zeros_like(np.asarray(s, dtype=float)), 0.0, TWO_PI)
    return CutCurveSpec((section,), float(width))


def _trig_interpolant(samples: np.ndarray):
    """Trigonometric interpolant of uniform samples on ``[0, 2 pi)`` and its derivative."""
    n = len(samples)
    coeffs = np.fft.rfft(samples) / n
    k = np.arange(len(coeffs))
    nyquist = (n % 2 == 0) & (k == n // 2)
    weight = np.where((k == 0) | nyquist, 1.0, 2.0)

    def value(s):
        s = np.asarray(s, dtype=float)
        phase = np.exp(1j * np.multiply.outer(s, k))
        return np.real(phase @ (weight * coeffs))

    def derivative(s):
        s = np.asarray(s, dtype=float)
        phase = np.exp(1j * np.multiply.outer(s, k))
        return np.real(phase @ np.where(nyquist, 0.0, weight * coeffs * 1j * k))

    return value, derivative


def _orient(sections: list[GraphSection], width: float) -> list[GraphSection]:
    """Choose section signs so that neighbouring blocks agree at every junction."""
    out = [sections[0]]
    for sec in sections[1:]:
        trial = CutCurveSpec.__new__(CutCurveSpec)
        object.__setattr__(trial, "sections", (out[-1], sec))
        object.__setattr__(trial, "width", width)
        point, _ = trial.junctions()[0]
        probe = point[None] + np.array([[0.1 * width, -0.1 * width], [-0.1 * width, 0.1 * width]])
        a = out[-1].block(probe, width)[0]
        b = sec.block(probe, width)[0]
        flip = np.sum(a * b) < 0
        out.append(GraphSection(sec.axis, sec.upsilon, sec.derivative, sec.start, sec.stop,
                                -sec.sign if flip else sec.sign))
    return out


def read_cut_csv(path, width: float, degree: int = 24) -> CutCurveSpec:
    """Cut from a table with columns ``axis, parameter, value``.

    Each run of rows with the same axis is one section and ``value`` samples
    ``upsilon``.  A single run must sample a full period uniformly and is
    interpolated trigonometrically; shorter runs are fitted by Chebyshev
    series on their parameter range.
    """
    runs: list[tuple[int, list[float], list[float]]] = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            axis = int(row["axis"])
            if not runs or runs[-1][0] != axis:
                runs.append((axis, [], []))
            runs[-1][1].append(float(row["parameter"]))
            runs[-1][2].append(float(row["value"]))
    if len(runs) > 1 and runs[0][0] == runs[-1][0]:
        raise ValueError("first and last sections of a closed cut must use different axes")
    sections = []
    for axis, params, values in runs:
        params = np.asarray(params)
        values = np.asarray(values)
        if len(runs) == 1:
            value, deriv = _trig_interpolant(values)
            start = float(params[0])
            sections.append(GraphSection(axis, lambda s, f=value, s0=start: f(np.asarray(s) - s0),
                                         lambda s, f=deriv, s0=start: f(np.asarray(s) - s0),
                                         start, start + TWO_PI))
            continue
        fit = np.polynomial.Chebyshev.fit(params, values, min(degree, len(params) - 1))
        sections.append(GraphSection(axis, fit, fit.deriv(), float(params[0]), float(params[-1])))
    return CutCurveSpec(tuple(_orient(sections, width)), float(width))


@dataclass(frozen=True, eq=False)
class CutFields:
    """The curl-free fields ``Lambda``, ``Sigma`` on a grid and their integrals."""

    Lambda: VectorField2
    Sigma: VectorField2
    cut1: CutCurveSpec
    cut2: CutCurveSpec
    attempts: int

    @property
    def averages(self) -> np.ndarray:
        """Columns ``int Lambda`` and ``int Sigma``."""
        return np.column_stack([self.Lambda.integral(), self.Sigma.integral()])

    def determinant_ratio(self) -> float:
        return _det_ratio(self.averages)

    def curl_residual(self) -> float:
        """Largest spectral curl of either field relative to its peak."""
        worst = 0.0
        for f in (self.Lambda, self.Sigma):
            scale = max(np.max(np.abs(f.u1.values)), np.max(np.abs(f.u2.values)), np.finfo(float).tiny)
            worst = max(worst, float(np.max(np.abs(curl(f).values))) / scale)
        return worst


def _det_ratio(m: np.ndarray) -> float:
    norms = np.linalg.norm(m[:, 0]) * np.linalg.norm(m[:, 1])
    return 0.0 if norms == 0.0 else abs(float(np.linalg.det(m))) / norms


def _sample_cut(cut: CutCurveSpec, grid: GridSpec) -> VectorField2:
    vals = cut.field(grid.points).reshape(grid.n, grid.n, 2)
    return VectorField2(ScalarField(grid, vals[..., 0]), ScalarField(grid, vals[..., 1]))


def build_cut_fields(cut1: CutCurveSpec, cut2: CutCurveSpec, grid: GridSpec,
                     omega_big: Optional[Sequence[float]] = None,
                     junction_tol: float = 1e-10) -> CutFields:
    """Sample ``Lambda`` and ``Sigma`` and enforce independent averages.

    If ``|det[int Lambda, int Sigma]|`` is below ``0.1 |int Lambda| |int Sigma|``
    the first cut is moved by a growing bump in the middle third of its first
    section, up to eight times.

    Raises:
        ValueError: if neighbouring blocks disagree at a junction.
        SupportViolation: if a field is nonzero outside ``omega_big``.
        DependentAverages: if the determinant floor is never met.
    """
    for cut in (cut1, cut2):
        mismatch = cut.junction_mismatch()
        if mismatch > junction_tol:
            raise ValueError(f"cut blocks disagree by {mismatch:.3e} at a junction")
    Sigma = _sample_cut(cut2, grid)
    current = cut1
    for attempt in range(PERTURB_ATTEMPTS + 1):
        Lambda = _sample_cut(current, grid)
        fields = CutFields(Lambda, Sigma, current, cut2, attempt)
        if fields.determinant_ratio() >= DET_FLOOR:
            break
        current = cut1.perturbed(0.05 * current.width * (attempt + 1))
    else:
        raise DependentAverages(
            f"averages of the cut fields stay dependent (ratio {fields.determinant_ratio():.3e})")
    if omega_big is not None:
        a1, a2, b1, b2 = omega_big
        x1, x2 = grid.nodes
        out = ~((wrap(x1 - a1) <= a2 - a1) & (wrap(x2 - b1) <= b2 - b1))
        for f in (fields.Lambda, fields.Sigma):
            leak = max(np.max(np.abs(f.u1.values[out]), initial=0.0), np.max(np.abs(f.u2.values[out]), initial=0.0))
            if leak > SUPPORT_TOL:
                raise SupportViolation(f"cut field is {leak:.3e} outside its region")
    return fields


# ---------------------------------------------------------------------------
# velocity averages and the mean-force controls


def mean_blend(u0_mean, u1_mean) -> CallableAverage:
    """Smooth monotone blend from ``u0_mean`` on ``[0, 1/4]`` to ``u1_mean`` on ``[3/4, 1]``."""
    a = np.asarray(u0_mean, dtype=float)
    b = np.asarray(u1_mean, dtype=float)

    def blend(s):
        return a + (b - a) * float(smooth_step((s - 0.25) / 0.5))

    return CallableAverage(blend, breaks=(0.25, 0.75))


def average_program(u0_mean, u1_mean, sigma: float, profile: ReturnProfile,
                    T_ctrl: float = 1.0) -> tuple[BurstAverage, CallableAverage]:
    """Prescribed velocity integral ``aleph_sigma`` and the reference blend ``U``.

    ``aleph_sigma`` equals ``int u0`` up to ``T_sigma = T_ctrl - 1/sigma`` and
    then ``4 pi^2 sigma ybar + U`` in the compressed reference time, so that
    the uniform drift is ``sigma ybar`` plus the blended mean.

    Raises:
        SigmaTooSmall: if ``sigma * T_ctrl < 1``.
    """
    if sigma * T_ctrl < 1.0 - 1e-12:
        raise SigmaTooSmall(f"sigma * T_ctrl = {sigma * T_ctrl:.4f} must be at least 1")
    blend = mean_blend(u0_mean, u1_mean)
    start = T_ctrl - 1.0 / sigma
    return BurstAverage(profile, start, sigma, before=u0_mean, blend=blend), blend


def series_grid(aleph: AverageProgram, T_ctrl: float, per_piece: int = 32,
                windows: Sequence[tuple[float, float, int]] = ()) -> np.ndarray:
    """Time nodes for the mean-force series.

    Every smooth piece of ``aleph`` gets ``per_piece`` uniform intervals.  Inside
    each ``(start, stop, count)`` window the nodes are instead the points
    ``start + k (stop - start) / count``, so that the midpoints used for the
    coefficients can be chosen to coincide with cached control times.
    """
    edges = [0.0, T_ctrl, *aleph.breakpoints()]
    for a, b, _ in windows:
        edges += [a, b]
    breaks = np.unique(np.clip(np.asarray(edges, dtype=float), 0.0, T_ctrl))
    nodes = [np.asarray([T_ctrl])]
    for a, b in zip(breaks[:-1], breaks[1:]):
        if b <= a:
            continue
        inside = [w for w in windows if w[0] <= a + 1e-15 and b <= w[1] + 1e-15]
        if inside:
            start, stop, count = inside[0]
            h = (stop - start) / count
            k = np.arange(math.ceil((a - start) / h - 1e-9), math.floor((b - start) / h + 1e-9) + 1)
            nodes.append(start + h * k)
        else:
            nodes.append(np.linspace(a, b, per_piece + 1))
    times = np.unique(np.concatenate(nodes))
    keep = np.concatenate([[True], np.diff(times) > 1e-13])
    return times[keep]


@dataclass(frozen=True, eq=False)
class MeanForceSeries:
    """Mean-force coefficients on a staggered time grid.

    ``A`` holds the coordinates of ``aleph`` at the nodes ``times`` in the
    basis of the cut-field averages.  ``B`` (coordinates of ``int (xi + f)``)
    and ``gamma`` live at the interval midpoints, where ``(A[i+1] - A[i]) / dt``
    is a centred difference.  The force is held at its midpoint value on each
    interval.
    """

    times: np.ndarray
    A: np.ndarray
    B: np.ndarray
    gamma: np.ndarray
    averages: np.ndarray
    forcing_mean: np.ndarray

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.times[1:] + self.times[:-1])

    @property
    def gamma_lambda(self) -> np.ndarray:
        return self.gamma[:, 0]

    @property
    def gamma_sigma(self) -> np.ndarray:
        return self.gamma[:, 1]

    def total_mean_force(self) -> np.ndarray:
        """``int (xi + f + gamma_lambda Lambda + gamma_sigma Sigma)`` at every midpoint."""
        return self.forcing_mean + self.gamma @ self.averages.T

    def mean_history(self, u0_mean) -> np.ndarray:
        """``int u0 + int_0^t int (total force)`` at the nodes."""
        steps = np.diff(self.times)[:, None] * self.total_mean_force()
        start = np.asarray(u0_mean, dtype=float)[None]
        return np.vstack([start, start + np.cumsum(steps, axis=0)])

    def balance_error(self, u0_mean, aleph: AverageProgram) -> float:
        """Largest deviation of the mean history from ``aleph``, relative to ``max(1, max |aleph|)``."""
        target = np.array([aleph.velocity(t) for t in self.times])
        scale = max(float(np.max(np.abs(target))), 1.0)
        return float(np.max(np.abs(self.mean_history(u0_mean) - target))) / scale


def mean_force_controls(times: Sequence[float], xi_mean: Callable[[float], Sequence[float]],
                        forcing_mean: Callable[[float], Sequence[float]], cuts: CutFields,
                        aleph: AverageProgram) -> MeanForceSeries:
    """Coefficients of ``Lambda`` and ``Sigma`` that realise ``d/dt aleph`` in the mean.

    ``aleph = A1 int Lambda + A2 int Sigma`` at the nodes and
    ``int (xi + f) = B1 int Lambda + B2 int Sigma`` at the midpoints; the
    coefficients are ``dA/dt - B`` with ``dA/dt`` the centred difference
    over each interval.

    Raises:
        DependentAverages: if the averages matrix has condition number above ``1e8``.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or len(t) < 2 or np.any(np.diff(t) <= 0):
        raise ValueError("times must be increasing with at least two nodes")
    m = cuts.averages if isinstance(cuts, CutFields) else np.asarray(cuts, dtype=float)
    cond = np.linalg.cond(m)
    if not np.isfinite(cond) or cond > 1e8:
        raise DependentAverages(f"cut-field averages are dependent (condition {cond:.3e})")
    mid = 0.5 * (t[1:] + t[:-1])
    target = np.array([aleph.velocity(s) for s in t])
    source = np.array([np.asarray(xi_mean(s), dtype=float) + np.asarray(forcing_mean(s), dtype=float)
                       for s in mid])
    A = np.linalg.solve(m, target.T).T
    B = np.linalg.solve(m, source.T).T
    dA = np.diff(A, axis=0) / np.diff(t)[:, None]
    return MeanForceSeries(t, A, B, dA - B, m, source)
