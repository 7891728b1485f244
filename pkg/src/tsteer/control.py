"""Finite-dimensional control synthesis and its localization into the control region.

The global problem is linear: a piecewise-constant coefficient series
``zeta`` on ``[0, T*]`` drives ``v_t + (ybar* . grad) v = sum zeta_l basis_l``
from rest, and we look for ``zeta`` with ``v(T*)`` close to a target.  The
control-to-state matrix is built from the backward flow cache: along the
characteristic through ``x`` the solution is ``int basis(G(x, r)) dr``.

The localized force lives in the reference square.  During window ``j`` the
return flow parks covering square ``j`` on the reference square, and the force
there is ``chi(z) * F_r(Xi(z, t))`` with ``F_r = sum zeta_l(r) basis_l``.  The
zero-average version subtracts the running spatial means ``m_j`` through the
mass-one bumps.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cutoffs import CutoffBundle, wrap
from .errors import BudgetExceeded, NonZeroMean, SigmaTooSmall, TargetUnreachable
from .flows import BackwardFlowCache, ObservableSpec, ReturnProfile, build_backward_cache
from .saturation import GeneratorSet
from .solvers import Forcing, ObservableDrift, solve_transport
from .spectral import GridSpec, ScalarField, grid_integral, to_spectral

MAX_COLUMNS = 4096


def basis_values(points: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """``(P, M, 2)`` array of ``sin(l.x)`` and ``cos(l.x)`` at ``points``."""
    phase = np.atleast_2d(points) @ np.asarray(modes, dtype=float).T
    return np.stack([np.sin(phase), np.cos(phase)], axis=-1)


@dataclass(frozen=True)
class TimeBins:
    """Uniform bins of ``[0, T*]`` and the finer node grid used for quadrature.

    Each bin is split into ``substeps`` Simpson panels, so nodes sit at the
    bin edges and at the quarter/half points of the panels.
    """

    phase: float
    count: int
    substeps: int = 1

    @property
    def width(self) -> float:
        return self.phase / self.count

    @property
    def node_spacing(self) -> float:
        return self.width / (2 * self.substeps)

    @property
    def intervals(self) -> int:
        return 2 * self.count * self.substeps

    def bin_of(self, r: float, within: Optional[tuple[float, float]] = None) -> int:
        """Bin containing ``r``; with ``within`` the bin of the step midpoint wins."""
        probe = r if within is None else 0.5 * (within[0] + within[1])
        return int(min(max(math.floor(probe / self.width), 0), self.count - 1))

    def simpson_weights(self) -> np.ndarray:
        """Composite Simpson weights of the nodes of one bin."""
        per_bin = 2 * self.substeps
        w = np.ones(per_bin + 1)
        w[1:-1:2] = 4.0
        w[2:-1:2] = 2.0
        return w * self.node_spacing / 3.0


@dataclass(frozen=True, eq=False)
class ControlToState:
    """Dense control-to-state matrix with its flow cache.

    Column ``(mode m, parity p, bin b)`` sits at index ``(2m + p) * bins + b``;
    parity 0 is the sine, 1 the cosine.
    """

    grid: GridSpec
    spec: ObservableSpec
    bins: TimeBins
    cache: BackwardFlowCache
    matrix: np.ndarray

    @property
    def columns(self) -> int:
        return self.matrix.shape[1]

    def column_index(self, mode: int, parity: int, b: int) -> int:
        return (2 * mode + parity) * self.bins.count + b

    def apply(self, zeta: np.ndarray) -> np.ndarray:
        """Terminal state on the grid for coefficients shaped ``(modes, 2, bins)`` or flat."""
        flat = np.asarray(zeta, dtype=float).reshape(-1)
        return (self.matrix @ flat).reshape(self.grid.n, self.grid.n)


def assemble_control_to_state(grid: GridSpec, spec: ObservableSpec, bins: int = 64, *,
                              substeps: int = 1, h_flow: Optional[float] = None,
                              method: str = "characteristics") -> ControlToState:
    """Matrix mapping ``N * bins`` coefficients to the transport state at ``T*``.

    Args:
        bins: number of piecewise-constant bins ``M_t``.
        substeps: Simpson panels per bin.
        h_flow: RK4 step for the backward flow.
        method: ``"characteristics"`` integrates each basis function along the
            cached backward trajectories; ``"transport"`` runs the
            semi-Lagrangian solver once per column (slow, for cross-checks).

    Raises:
        BudgetExceeded: if ``N * bins > 4096``.
    """
    columns = spec.generator.channels * bins
    if columns > MAX_COLUMNS:
        raise BudgetExceeded(f"{columns} control columns exceed the cap of {MAX_COLUMNS}")
    tb = TimeBins(spec.phase, bins, substeps)
    cache = build_backward_cache(spec, grid.n, tb.intervals, h_flow)
    modes = spec.modes
    P = grid.n * grid.n
    M = len(modes)
    if method == "characteristics":
        weights = tb.simpson_weights()
        per_bin = 2 * substeps
        acc = np.zeros((P, M, 2, bins))
        for b in range(bins):
            for i, w in enumerate(weights):
                acc[:, :, :, b] += w * basis_values(cache.positions[b * per_bin + i], modes)
        matrix = acc.reshape(P, M * 2 * bins)
    elif method == "transport":
        matrix = np.zeros((P, columns))
        drift = ObservableDrift(spec)
        step = tb.width / substeps
        zero = ScalarField.zeros(grid)
        for m in range(M):
            for p in range(2):
                for b in range(bins):
                    forcing = _SingleChannelForcing(modes[m], p, tb, b)
                    rec = solve_transport(zero, drift, forcing, T=spec.phase, dt=step,
                                          h_flow=cache.step)
                    matrix[:, (2 * m + p) * bins + b] = rec.final.values.ravel()
    else:
        raise ValueError(f"unknown assembly method {method!r}")
    return ControlToState(grid, spec, tb, cache, np.ascontiguousarray(matrix))


class _SingleChannelForcing(Forcing):
    def __init__(self, mode, parity, tb: TimeBins, b: int):
        self.mode = np.asarray(mode, dtype=float)
        self.parity = parity
        self.tb = tb
        self.b = b

    def evaluate(self, points, t, within=None):
        if self.tb.bin_of(t, within) != self.b:
            return np.zeros(len(np.atleast_2d(points)))
        phase = np.atleast_2d(points) @ self.mode
        return np.sin(phase) if self.parity == 0 else np.cos(phase)

    def breakpoints(self):
        return self.tb.width * np.arange(self.tb.count + 1)


@dataclass(frozen=True, eq=False)
class ControlSolution:
    """Coefficients ``zeta`` shaped ``(modes, 2, bins)`` on ``[0, T*]``.

    ``residual`` is the relative linear residual ``|A zeta - v1|_0 / |v1|_0``.
    """

    generator: GeneratorSet
    bins: TimeBins
    zeta: np.ndarray
    regularization: float
    residual: float

    @property
    def channels(self) -> int:
        return self.generator.channels

    def at(self, r: float, within=None) -> np.ndarray:
        """``(modes, 2)`` coefficients at observable time ``r``."""
        return self.zeta[:, :, self.bins.bin_of(r, within)]

    def scaled(self, factor: float) -> "ControlSolution":
        return ControlSolution(self.generator, self.bins, self.zeta * factor,
                               self.regularization, self.residual)

    @classmethod
    def zero(cls, generator: GeneratorSet, bins: TimeBins) -> "ControlSolution":
        return cls(generator, bins, np.zeros((len(generator), 2, bins.count)), 0.0, 0.0)


def _check_average_free(values: np.ndarray) -> None:
    rms = float(np.sqrt(np.mean(values**2)))
    if abs(float(values.mean())) > 1e-10 * max(rms, np.finfo(float).tiny):
        raise NonZeroMean("the linear target must be average-free")


def ridge_path(lam_max: float = 1e-2, lam_min: float = 1e-10, factor: float = 10.0) -> np.ndarray:
    count = int(round(math.log(lam_max / lam_min) / math.log(factor))) + 1
    return lam_max / factor ** np.arange(count)


def solve_global_control(v1, eps: float, operator: ControlToState,
                         lambdas: Optional[Sequence[float]] = None) -> ControlSolution:
    """Ridge-regularized least squares for the coefficient series.

    Minimizes ``|A zeta - v1|_0^2 + lam |zeta|^2`` for ``lam`` running down a
    geometric path (relative to the largest squared singular value of ``A``)
    and returns the first solution whose relative residual is at most ``eps``.

    Raises:
        NonZeroMean: if ``v1`` has a mean.
        TargetUnreachable: if no ``lam`` on the path reaches ``eps``; carries the best residual.
    """
    values = v1.values if isinstance(v1, ScalarField) else np.asarray(v1, dtype=float)
    _check_average_free(values)
    grid = operator.grid
    weight = math.sqrt(grid.cell_area)
    rhs = values.ravel() * weight
    target = float(np.linalg.norm(rhs))
    shape = (len(operator.spec.generator), 2, operator.bins.count)
    if target == 0.0:
        return ControlSolution(operator.spec.generator, operator.bins, np.zeros(shape), 0.0, 0.0)
    weighted = operator.matrix * weight
    u, s, vt = np.linalg.svd(weighted, full_matrices=False)
    proj = u.T @ rhs
    scale = float(s[0] ** 2) if len(s) else 1.0
    best = (math.inf, None, None)
    for lam in (ridge_path() if lambdas is None else lambdas):
        filt = s / (s**2 + lam * scale)
        zeta = vt.T @ (filt * proj)
        # direct residual: the projected form cancels catastrophically near zero
        residual = float(np.linalg.norm(weighted @ zeta - rhs)) / target
        if residual < best[0]:
            best = (residual, zeta, lam)
        if residual <= eps:
            return ControlSolution(operator.spec.generator, operator.bins, zeta.reshape(shape),
                                   float(lam), residual)
    raise TargetUnreachable(
        f"best relative residual {best[0]:.4f} exceeds eps = {eps}", best_residual=best[0]
    )


class LocalizedControl:
    """The physically localized force and its zero-average version.

    Lab-frame grid values of the force in window ``j`` are
    ``chi(z) * F(z - Delta_j)`` where ``F`` is the trigonometric interpolant of
    ``F_r(G(., r))`` on the grid; the window means ``m_j(r)`` are computed
    from exactly this field, so the lab-frame grid integral of the
    zero-average force vanishes to round-off.
    """

    def __init__(self, solution: ControlSolution, operator: ControlToState,
                 bundle: CutoffBundle, profile: ReturnProfile):
        self.solution = solution
        self.operator = operator
        self.bundle = bundle
        self.profile = profile
        self.schedule = profile.schedule
        self.grid = operator.grid
        self.cache = operator.cache
        self.bins = operator.bins
        self.modes = operator.spec.modes
        grid = self.grid
        x1, x2 = grid.nodes
        self.chi_lab = bundle.chi(x1, x2)
        chi_hat = to_spectral(self.chi_lab)
        shifts = self.schedule.covering.shifts
        k1, k2 = grid.wavenumbers
        phases = np.exp(-1j * (k1[None] * shifts[:, 0, None, None] + k2[None] * shifts[:, 1, None, None]))
        # m_j = cell_area / n^2 * sum_half w Re(conj(chi_hat) F_hat e^{-ik.Delta_j})
        self._mean_kernel = (grid.half_plane_weights * grid.nyquist_free * np.conj(chi_hat))[None] * phases
        self._mean_scale = grid.cell_area / grid.n**2
        self._basis: dict = {}
        self._fields: dict = {}
        self._means: dict = {}

    # -- bookkeeping -------------------------------------------------------

    @property
    def K(self) -> int:
        return self.schedule.K

    def locate(self, t: float, within=None):
        """``(window, r, bin)`` for reference time ``t``; window is ``None`` outside."""
        probe = t if within is None else 0.5 * (within[0] + within[1])
        j = self.schedule.active_window(probe)
        if j is None:
            return None, 0.0, 0
        r = min(max(t - self.schedule.t_a(j), 0.0), self.bins.phase)
        inner = None
        if within is not None:
            a = self.schedule.t_a(j)
            inner = (within[0] - a, within[1] - a)
        return j, r, self.bins.bin_of(r, inner)

    def _key(self, r: float):
        k = self.cache.node(r)
        return ("node", k) if k is not None else ("time", float(r))

    def _basis_grid(self, r: float) -> np.ndarray:
        key = self._key(r)
        if key not in self._basis:
            pos = self.cache.at(r).reshape(-1, 2)
            vals = basis_values(pos, self.modes)
            if key[0] == "time":
                return vals
            self._basis[key] = vals
        return self._basis[key]

    def field(self, r: float, b: int) -> np.ndarray:
        """``F_r(G(x, r))`` on the grid, with the coefficients of bin ``b``."""
        key = (self._key(r), b)
        if key not in self._fields:
            coef = self.solution.zeta[:, :, b]
            vals = np.einsum("pmk,mk->p", self._basis_grid(r), coef).reshape(self.grid.n, self.grid.n)
            if key[0][0] == "time":
                return vals
            self._fields[key] = vals
        return self._fields[key]

    def window_means(self, r: float, b: int) -> np.ndarray:
        """``m_j(r)`` for all windows ``j = 1..K`` (array index ``j - 1``)."""
        key = (self._key(r), b)
        if key not in self._means:
            f_hat = to_spectral(self.field(r, b))
            vals = self._mean_scale * np.real(np.sum(self._mean_kernel * f_hat[None], axis=(1, 2)))
            if key[0][0] == "time":
                return vals
            self._means[key] = vals
        return self._means[key]

    def correction_sums(self, j: int, r: float, b: int) -> tuple[float, float]:
        """``(S, P)`` with ``P = sum_{k<j} m_k`` and ``S = m_j + P``."""
        m = self.window_means(r, b)
        past = float(np.sum(m[: j - 1]))
        return float(m[j - 1]) + past, past

    def breakpoints(self) -> np.ndarray:
        edges = self.bins.width * np.arange(self.bins.count + 1)
        return np.unique(np.concatenate([self.schedule.t_a(j) + edges for j in range(1, self.K + 1)]))

    def step_limit(self, t: float) -> float:
        j = self.schedule.active_window(t)
        if j is None or t >= self.schedule.t_b(j) - 1e-15:
            return math.inf
        return self.bins.width / self.bins.substeps

    # -- lab-frame grid values ----------------------------------------------

    def _lab_field(self, j: int, r: float, b: int) -> np.ndarray:
        from .spectral import translate

        return translate(self.field(r, b), -self.schedule.covering.shifts[j - 1])

    def eta_hat_grid(self, t: float, within=None) -> np.ndarray:
        j, r, b = self.locate(t, within)
        if j is None:
            return np.zeros((self.grid.n, self.grid.n))
        return self.chi_lab * self._lab_field(j, r, b)

    def _bump_grid(self, which: str, j: int, offset=(0.0, 0.0)) -> np.ndarray:
        x1, x2 = self.grid.nodes
        y1, y2 = x1 + offset[0], x2 + offset[1]
        if which == "center":
            return self.bundle.chi_tilde(y1, y2)
        return self.bundle.chi_tilde_window(j, y1, y2)

    def eta_tilde_grid(self, t: float, within=None) -> np.ndarray:
        j, r, b = self.locate(t, within)
        if j is None:
            return np.zeros((self.grid.n, self.grid.n))
        _, past = self.correction_sums(j, r, b)
        out = self.chi_lab * self._lab_field(j, r, b)
        # own-window mean from the stored samples themselves, so the grid
        # integral cancels exactly instead of up to FFT round-off
        total = past + grid_integral(out)
        out = out - total * self._bump_grid("window", j) + past * self._bump_grid("center", j)
        return out

    # -- grid values in a translated frame ------------------------------------

    def _moving_field(self, j, r, b, offset):
        from .spectral import translate

        rel = wrap(np.asarray(offset, dtype=float) - self.schedule.covering.shifts[j - 1] + np.pi) - np.pi
        base = self.field(r, b)
        if np.all(np.abs(rel) < 1e-12):
            return base
        return translate(base, rel)

    def eta_hat_sample(self, t, offset=(0.0, 0.0), within=None, tilde=False) -> np.ndarray:
        """Grid values of the force at ``x + offset``.

        When ``offset`` equals the window shift (the co-moving frame of the
        return flow) the cached characteristic values are used directly.
        """
        j, r, b = self.locate(t, within)
        n = self.grid.n
        if j is None:
            return np.zeros((n, n))
        x1, x2 = self.grid.nodes
        off = np.asarray(offset, dtype=float)
        out = self.bundle.chi(x1 + off[0], x2 + off[1]) * self._moving_field(j, r, b, off)
        if tilde:
            total, past = self.correction_sums(j, r, b)
            out = out - total * self._bump_grid("window", j, off) + past * self._bump_grid("center", j, off)
        return out

    # -- pointwise values -----------------------------------------------------

    def _pointwise_field(self, points, j, r, b) -> np.ndarray:
        pre = np.atleast_2d(points) - self.schedule.covering.shifts[j - 1]
        traced = self.cache.trace_points(wrap(pre), r)
        return np.einsum("pmk,mk->p", basis_values(traced, self.modes), self.solution.zeta[:, :, b])

    def eta_hat_points(self, points, t, within=None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        j, r, b = self.locate(t, within)
        if j is None:
            return np.zeros(len(pts))
        return self.bundle.chi(pts[:, 0], pts[:, 1]) * self._pointwise_field(pts, j, r, b)

    def eta_tilde_points(self, points, t, within=None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        j, r, b = self.locate(t, within)
        if j is None:
            return np.zeros(len(pts))
        total, past = self.correction_sums(j, r, b)
        out = self.bundle.chi(pts[:, 0], pts[:, 1]) * self._pointwise_field(pts, j, r, b)
        out -= total * self.bundle.chi_tilde_window(j, pts[:, 0], pts[:, 1])
        out += past * self.bundle.chi_tilde(pts[:, 0], pts[:, 1])
        return out

    def eta_tilde_fine(self, t: float, n: int, within=None) -> np.ndarray:
        """``eta~`` rebuilt on a finer ``n``-grid.

        The co-moving field is upsampled as a trigonometric interpolant, the
        cutoffs are evaluated pointwise and the window means are recomputed on
        the fine grid, so the result has zero integral there as well.
        """
        from .spectral import grid_of, resample, translate

        fine = grid_of(n)
        j, r, b = self.locate(t, within)
        if j is None:
            return np.zeros((n, n))
        x1, x2 = fine.nodes
        base = resample(self.field(r, b), n)
        chi = self.bundle.chi(x1, x2)
        shifts = self.schedule.covering.shifts
        k1, k2 = fine.wavenumbers
        chi_hat = to_spectral(chi)
        base_hat = to_spectral(base)
        weights = fine.half_plane_weights * fine.nyquist_free * np.conj(chi_hat) * base_hat
        means = np.array([
            np.real(np.sum(weights * np.exp(-1j * (k1 * s[0] + k2 * s[1]))))
            for s in shifts[:j]
        ]) * fine.cell_area / n**2
        past = float(np.sum(means[: j - 1]))
        total = past + float(means[j - 1])
        out = chi * translate(base, -shifts[j - 1])
        out -= total * self.bundle.chi_tilde_window(j, x1, x2)
        out += past * self.bundle.chi_tilde(x1, x2)
        return out

    def forcing(self, tilde: bool = True) -> "LocalizedForcing":
        return LocalizedForcing(self, tilde)


class LocalizedForcing(Forcing):
    """Adapter exposing a :class:`LocalizedControl` to the solvers."""

    def __init__(self, control: LocalizedControl, tilde: bool):
        self.control = control
        self.tilde = tilde

    def evaluate(self, points, t, within=None):
        if self.tilde:
            return self.control.eta_tilde_points(points, t, within)
        return self.control.eta_hat_points(points, t, within)

    def sample(self, grid, t, offset=(0.0, 0.0), within=None):
        if grid.n != self.control.grid.n:
            return super().sample(grid, t, offset, within)
        return self.control.eta_hat_sample(t, offset, within, tilde=self.tilde)

    def breakpoints(self):
        return self.control.breakpoints()

    def step_limit(self, t):
        return self.control.step_limit(t)

    def is_zero(self):
        return not np.any(self.control.solution.zeta)


class GlobalForcing(Forcing):
    """``1_[start, start+T*](t) * sum zeta_l(t - start) basis_l(x)``: the unlocalized control."""

    def __init__(self, solution: ControlSolution, modes, start: float = 0.0):
        self.solution = solution
        self.modes = np.asarray(modes, dtype=float)
        self.start = float(start)

    def evaluate(self, points, t, within=None):
        pts = np.atleast_2d(points)
        r = t - self.start
        inner = None if within is None else (within[0] - self.start, within[1] - self.start)
        probe = r if inner is None else 0.5 * (inner[0] + inner[1])
        if probe < 0.0 or probe > self.solution.bins.phase:
            return np.zeros(len(pts))
        coef = self.solution.at(r, inner)
        return np.einsum("pmk,mk->p", basis_values(pts, self.modes), coef)

    def breakpoints(self):
        return self.start + self.solution.bins.width * np.arange(self.solution.bins.count + 1)

    def is_zero(self):
        return not np.any(self.solution.zeta)


# ---------------------------------------------------------------------------
# coefficient series


@dataclass(frozen=True, eq=False)
class LocalizedControlSeries:
    """The ``gamma_l`` series together with the spatial profiles they multiply.

    Channels ``1..N`` follow the modes (sine then cosine per mode).  Channel
    ``N+1`` multiplies the central bump, ``N+2`` the diagonal copy and ``N+3``
    the horizontal copy.
    """

    control: LocalizedControl
    sigma: float
    T_ctrl: float

    @property
    def N(self) -> int:
        return self.control.solution.channels

    @property
    def T_sigma(self) -> float:
        return self.T_ctrl - 1.0 / self.sigma

    def reference(self, l: int, t: float, within=None) -> float:
        """``gamma~_l`` at reference time ``t`` in ``[0, 1]``."""
        c = self.control
        j, r, b = c.locate(t, within)
        if j is None:
            return 0.0
        N = self.N
        if l <= N:
            m, p = divmod(l - 1, 2)
            return float(c.solution.zeta[m, p, b])
        total, past = c.correction_sums(j, r, b)
        diag = c.bundle.uses_diag(j)
        if l == N + 1:
            return past
        if l == N + 2:
            return -total if diag else 0.0
        if l == N + 3:
            return 0.0 if diag else -total
        raise IndexError(f"channel {l} out of range 1..{N + 3}")

    def value(self, l: int, t: float) -> float:
        """``gamma_l(t) = sigma * 1_[T_sigma, T_ctrl](t) * gamma~_l(sigma (t - T_sigma))``."""
        if t < self.T_sigma or t > self.T_ctrl:
            return 0.0
        return self.sigma * self.reference(l, self.sigma * (t - self.T_sigma))

    def profile(self, l: int, points, t_ref: float) -> np.ndarray:
        """Spatial profile ``eta_l(x, t_ref)`` (time-independent for ``l > N``)."""
        c = self.control
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        N = self.N
        if l <= N:
            j = c.schedule.active_window(t_ref)
            if j is None:
                return np.zeros(len(pts))
            r = min(max(t_ref - c.schedule.t_a(j), 0.0), c.bins.phase)
            m, p = divmod(l - 1, 2)
            traced = c.cache.trace_points(wrap(pts - c.schedule.covering.shifts[j - 1]), r)
            vals = basis_values(traced, c.modes[m:m + 1])[:, 0, p]
            return c.bundle.chi(pts[:, 0], pts[:, 1]) * vals
        if l == N + 1:
            return c.bundle.chi_tilde(pts[:, 0], pts[:, 1])
        if l == N + 2:
            return c.bundle.chi_tilde_diag(pts[:, 0], pts[:, 1])
        if l == N + 3:
            return c.bundle.chi_tilde_right(pts[:, 0], pts[:, 1])
        raise IndexError(f"channel {l} out of range 1..{N + 3}")

    def table(self, times: Sequence[float]) -> np.ndarray:
        """``(N + 3, len(times))`` values of ``gamma_l`` at physical times."""
        return np.array([[self.value(l, t) for t in times] for l in range(1, self.N + 4)])


def gamma_series(control: LocalizedControl, sigma: float, T_ctrl: float = 1.0) -> LocalizedControlSeries:
    """Coefficient series of the localized control compressed into ``[T_ctrl - 1/sigma, T_ctrl]``.

    Raises:
        SigmaTooSmall: if ``sigma * T_ctrl < 1``.
    """
    if sigma * T_ctrl < 1.0 - 1e-12:
        raise SigmaTooSmall(f"sigma * T_ctrl = {sigma * T_ctrl:.4f} must be at least 1")
    return LocalizedControlSeries(control, float(sigma), float(T_ctrl))


# ---------------------------------------------------------------------------
# CSV input/output


def write_control_csv(solution: ControlSolution, path) -> None:
    """Rows ``(channel, parity, bin, value)``; channel is the mode index."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["channel", "parity", "bin", "value"])
        M, _, B = solution.zeta.shape
        for m in range(M):
            for p in range(2):
                for b in range(B):
                    writer.writerow([m, "s" if p == 0 else "c", b, repr(float(solution.zeta[m, p, b]))])


def read_control_csv(path, generator: GeneratorSet, bins: TimeBins) -> ControlSolution:
    zeta = np.zeros((len(generator), 2, bins.count))
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            p = 0 if row["parity"] == "s" else 1
            zeta[int(row["channel"]), p, int(row["bin"])] = float(row["value"])
    return ControlSolution(generator, bins, zeta, math.nan, math.nan)


def write_gamma_csv(series: LocalizedControlSeries, times: Sequence[float], path) -> None:
    """Rows ``(l, t, value)`` of the gamma series at the given physical times."""
    table = series.table(times)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["l", "t", "value"])
        for l in range(table.shape[0]):
            for t, v in zip(times, table[l]):
                writer.writerow([l + 1, repr(float(t)), repr(float(v))])
