"""End-to-end steering pipelines, delta sweeps and reporting."""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .config import SteeringConfig
from .control import (
    ControlSolution,
    LocalizedControl,
    assemble_control_to_state,
    gamma_series,
    solve_global_control,
    write_control_csv,
    write_gamma_csv,
)
from .cutoffs import build_covering, build_partition
from .flows import ObservableSpec, build_return_profile
from .lift import (
    CutCurveSpec,
    CutFields,
    LiftAuditRow,
    MeanForceSeries,
    audit_lift,
    average_program,
    build_cut_fields,
    build_lift_spec,
    lift_vorticity_control,
    mean_force_controls,
    read_cut_csv,
    series_grid,
    straight_cut,
)
from .solvers import (
    BurstAverage,
    ConstantAverage,
    FieldForcing,
    RescaledForcing,
    UniformDrift,
    solve_transport,
    solve_vorticity,
)
from .spectral import ScalarField, VectorField2, biot_savart, curl, grid_of, sobolev_norm
from .tsf import write_tsf


@dataclass(eq=False)
class SteeringContext:
    """Geometry, flows and the control-to-state operator shared by all runs of one config."""

    config: SteeringConfig
    grid: object
    covering: object
    profile: object
    schedule: object
    bundle: object
    spec: ObservableSpec
    operator: object

    def localize(self, solution: ControlSolution) -> LocalizedControl:
        return LocalizedControl(solution, self.operator, self.bundle, self.profile)

    def transported(self, w: ScalarField) -> ScalarField:
        """``w`` carried by the return profile over the reference interval ``[0, 1]``."""
        rec = solve_transport(w, UniformDrift(self.profile), None, T=1.0, dt=self.schedule.phase)
        return rec.final


def build_context(config: SteeringConfig) -> SteeringContext:
    grid = grid_of(config.n)
    covering = build_covering(config.omega, config.K)
    profile, schedule = build_return_profile(covering)
    bundle = build_partition(covering, grid)
    spec = ObservableSpec(config.modes, schedule.phase, strength=config.strength)
    operator = assemble_control_to_state(grid, spec, config.M_t, substeps=config.substeps)
    return SteeringContext(config, grid, covering, profile, schedule, bundle, spec, operator)


def relative_error(value: ScalarField, target: ScalarField, m: int) -> float:
    """``|value - target|_m / |target|_m``; absolute when the target vanishes."""
    diff = sobolev_norm(value.values - target.values, m)
    scale = sobolev_norm(target, m)
    return diff / scale if scale > 0 else diff


def vector_norm(u: VectorField2, m: int) -> float:
    return math.hypot(sobolev_norm(u.u1, m), sobolev_norm(u.u2, m))


def empirical_c0(n: int, m: int) -> float:
    """Measured bound ``|Upsilon(z, A)|_{m+1} <= C0 (|z|_m + |A|)`` on the band ``|l|_inf <= n/3``.

    The operator is diagonal in Fourier space, so the norm is the largest
    ratio over one representative mode per shell ``|l|^2`` together with the
    ratio for the constant part.
    """
    grid = grid_of(n)
    x1, x2 = grid.nodes
    band = n // 3
    shells = {}
    for a in range(0, band + 1):
        for b in range(-band, band + 1):
            if (a, b) <= (0, 0):
                continue
            shells.setdefault(a * a + b * b, (a, b))
    worst = 0.0
    for a, b in shells.values():
        z = ScalarField(grid, np.cos(a * x1 + b * x2))
        worst = max(worst, vector_norm(biot_savart(z), m + 1) / sobolev_norm(z, m))
    unit = biot_savart(ScalarField.zeros(grid), (1.0, 0.0))
    return max(worst, vector_norm(unit, m + 1))


# ---------------------------------------------------------------------------
# vorticity steering


@dataclass
class SweepEntry:
    delta: float
    sigma: float
    error: float
    residual: float
    runtime: float
    success: bool


@dataclass(eq=False)
class SteeringReport:
    """Outcome of a steering run.

    Errors are recomputed from the terminal snapshot of the chosen run.
    """

    config: SteeringConfig
    sweep: list[SweepEntry]
    chosen: Optional[SweepEntry]
    solution: Optional[ControlSolution]
    control: Optional[LocalizedControl]
    final: Optional[ScalarField]
    target: ScalarField
    vorticity_error: float
    runtime: float
    success: bool
    velocity: Optional["VelocityAudit"] = None

    @property
    def sigma(self) -> float:
        return self.chosen.sigma if self.chosen else math.nan

    @property
    def delta(self) -> float:
        return self.chosen.delta if self.chosen else math.nan

    def summary(self) -> str:
        lines = [
            f"success: {self.success}",
            f"sigma: {self.sigma:.6g}  delta: {self.delta:.6g}",
            f"relative vorticity error (H^{self.config.norm_order}): {self.vorticity_error:.6e}",
        ]
        if self.solution is not None:
            lines.append(f"linear residual: {self.solution.residual:.6e}  ridge: {self.solution.regularization:.3e}")
        lines.append("delta sweep (delta, sigma, error, residual, seconds):")
        for e in self.sweep:
            lines.append(f"  {e.delta:.6g} {e.sigma:.6g} {e.error:.6e} {e.residual:.6e} {e.runtime:.1f}")
        if self.velocity is not None:
            lines += self.velocity.summary_lines()
        lines.append(f"runtime: {self.runtime:.1f} s")
        return "\n".join(lines)

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        with (out / "sweep.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["delta", "sigma", "error", "residual", "seconds", "success"])
            for e in self.sweep:
                writer.writerow([e.delta, e.sigma, repr(e.error), repr(e.residual), f"{e.runtime:.3f}", int(e.success)])
        if self.solution is not None:
            write_control_csv(self.solution, out / "zeta.csv")
        if self.control is not None and self.chosen is not None:
            series = gamma_series(self.control, self.sigma, self.config.T_ctrl)
            times = np.linspace(series.T_sigma, self.config.T_ctrl, 2001)
            write_gamma_csv(series, times, out / "gamma.csv")
        if self.final is not None:
            write_tsf(out / "w_final.tsf", self.final, self.config.T_ctrl)
        if self.velocity is not None:
            self.velocity.write(out)
        (out / "summary.txt").write_text(self.summary() + "\n")
        return out


def _external_vorticity_forcing(config: SteeringConfig, grid) -> Optional[FieldForcing]:
    f = config.velocity_forcing(grid)
    if f is None:
        return None
    return FieldForcing(curl(f))


def controlled_burst(ctx: SteeringContext, control: LocalizedControl, w_start: ScalarField,
                     t_start: float, delta: float, aleph, forcing=None, nu: Optional[float] = None):
    """Run ``[t_start, t_start + delta]`` with force ``h + delta^-1 eta~(., (t - t_start)/delta)``."""
    cfg = ctx.config
    sigma = 1.0 / delta
    burst = RescaledForcing(control.forcing(tilde=True), t_start, sigma, sigma)
    return solve_vorticity(w_start, forcing, aleph, extra_force=burst, nu=cfg.nu if nu is None else nu,
                           T=t_start + delta, t0=t_start, cfl=cfg.cfl, dt_max=cfg.dt_max)


def _steer_once(ctx: SteeringContext, delta: float, w0: ScalarField, w1: ScalarField, h,
                aleph_factory, zero_control: bool = False):
    cfg = ctx.config
    t_start = cfg.T_ctrl - delta
    # uncontrolled evolution up to the burst
    before = solve_vorticity(w0, h, ConstantAverage(cfg.u0_mean), nu=cfg.nu, T=t_start,
                             cfl=cfg.cfl, dt_max=cfg.dt_max)
    w_start = before.final
    # linear problem from the state actually reached
    goal = ScalarField(ctx.grid, w1.values - ctx.transported(w_start).values, average_free=True)
    if zero_control:
        solution = ControlSolution.zero(cfg.modes, ctx.operator.bins)
    else:
        solution = solve_global_control(goal, cfg.eps, ctx.operator)
    control = ctx.localize(solution)
    aleph = aleph_factory(1.0 / delta)
    burst = controlled_burst(ctx, control, w_start, t_start, delta, aleph, h)
    return solution, control, burst.final


def run_vorticity_steering(config: SteeringConfig, ctx: Optional[SteeringContext] = None, *,
                           stop_at_success: bool = True, zero_control: bool = False,
                           aleph_factory=None) -> SteeringReport:
    """Steer the vorticity from ``w0`` towards ``w1`` with a short controlled burst.

    For each ``delta`` of the sweep: evolve without control on
    ``[0, T_ctrl - delta]``, solve the linear problem for ``w1`` minus the
    transported reached state, apply the compressed localized control over
    the last ``delta`` and measure the terminal error.

    Raises:
        TargetUnreachable: propagated from the linear solve.
    """
    started = time.perf_counter()
    ctx = ctx or build_context(config)
    grid = ctx.grid
    w0 = config.initial_vorticity(grid)
    w1 = config.target_vorticity(grid)
    h = _external_vorticity_forcing(config, grid)
    if aleph_factory is None:
        def aleph_factory(sigma):
            return BurstAverage(ctx.profile, config.T_ctrl - 1.0 / sigma, sigma, before=config.u0_mean)
    entries: list[SweepEntry] = []
    best = None
    for delta in config.sweep:
        t0 = time.perf_counter()
        solution, control, final = _steer_once(ctx, delta, w0, w1, h, aleph_factory, zero_control)
        err = relative_error(final, w1, config.norm_order)
        entry = SweepEntry(delta, 1.0 / delta, err, solution.residual, time.perf_counter() - t0,
                           err <= config.target)
        entries.append(entry)
        if best is None or (entry.success and not best[0].success) or \
                (entry.success == best[0].success and not entry.success and err < best[0].error):
            best = (entry, solution, control, final)
        if entry.success and stop_at_success:
            break
    if best is None:
        return SteeringReport(config, entries, None, None, None, None, w1, math.nan,
                              time.perf_counter() - started, False)
    entry, solution, control, final = best
    return SteeringReport(config, entries, entry, solution, control, final, w1,
                          relative_error(final, w1, config.norm_order),
                          time.perf_counter() - started, entry.success)


# ---------------------------------------------------------------------------
# velocity steering


def parse_cut(text: str, width: float, base_dir: str = ".") -> CutCurveSpec:
    """``straight:<axis>:<position>`` or the path of a cut table."""
    if text.startswith("straight:"):
        _, axis, pos = text.split(":")
        return straight_cut(int(axis), float(pos), width)
    path = Path(text)
    if not path.is_absolute():
        path = Path(base_dir) / path
    return read_cut_csv(path, width)


@dataclass(eq=False)
class VelocityAudit:
    """Velocity-space results and the lift/mean-force audits."""

    velocity_error: float
    velocity_error_abs: float
    vorticity_error_abs: float
    mean_error: float
    terminal_mean: np.ndarray
    c0: float
    lift_rows: list[LiftAuditRow]
    cuts: CutFields
    mean_force: MeanForceSeries
    balance_error: float
    xi_sample: Optional[VectorField2] = None

    @property
    def c0_bound_holds(self) -> bool:
        return self.velocity_error_abs <= self.c0 * (self.vorticity_error_abs + self.mean_error) * (1 + 1e-9) + 1e-14

    @property
    def max_curl_error(self) -> float:
        return max((r.curl_error for r in self.lift_rows), default=0.0)

    @property
    def max_outside(self) -> float:
        return max((r.outside_omega for r in self.lift_rows), default=0.0)

    def summary_lines(self) -> list[str]:
        return [
            f"velocity error (H^m+1, relative): {self.velocity_error:.6e}",
            f"terminal mean: ({self.terminal_mean[0]:.9f}, {self.terminal_mean[1]:.9f})  error {self.mean_error:.3e}",
            f"C0 audit: |u - u1| = {self.velocity_error_abs:.4e} <= C0 (|w - w1| + |mean error|) with C0 = {self.c0:.4f}: {self.c0_bound_holds}",
            f"lift audit: max curl error {self.max_curl_error:.3e}, max |xi| outside omega {self.max_outside:.3e}",
            f"cut fields: curl {self.cuts.curl_residual():.3e}, determinant ratio {self.cuts.determinant_ratio():.4f}",
            f"mean balance error: {self.balance_error:.3e}",
        ]

    def write(self, out: Path) -> None:
        with (out / "lift_audit.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_reference", "curl_error", "outside_omega", "seam"])
            for r in self.lift_rows:
                writer.writerow([repr(r.t), repr(r.curl_error), repr(r.outside_omega), repr(r.seam)])
        with (out / "mean_force.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "gamma_lambda", "gamma_sigma"])
            for t, g in zip(self.mean_force.midpoints, self.mean_force.gamma):
                writer.writerow([repr(float(t)), repr(float(g[0])), repr(float(g[1]))])
        write_tsf(out / "Lambda.tsf", self.cuts.Lambda)
        write_tsf(out / "Sigma.tsf", self.cuts.Sigma)
        if self.xi_sample is not None:
            write_tsf(out / "xi_sample.tsf", self.xi_sample)


def lift_sample_times(control: LocalizedControl, count: int, seed: int) -> np.ndarray:
    """Reference times spread over distinct control windows."""
    rng = np.random.default_rng(seed)
    K = control.K
    windows = rng.choice(np.arange(1, K + 1), size=min(count, K), replace=False)
    while len(windows) < count:
        windows = np.concatenate([windows, rng.choice(np.arange(1, K + 1), size=1)])
    sched = control.schedule
    return np.array([sched.t_a(int(j)) + rng.uniform(0.02, 0.98) * sched.phase for j in windows])


def run_velocity_steering(config: SteeringConfig, ctx: Optional[SteeringContext] = None, *,
                          stop_at_success: bool = True) -> SteeringReport:
    """Velocity steering: vorticity burst, lift, mean-force controls and audits.

    The vorticity runs use the average program that blends ``int u0`` into
    ``int u1``.  The velocity mean is tracked by integrating the mean of the
    total force, and the terminal velocity is rebuilt from the terminal
    vorticity and that mean.

    Raises:
        DependentAverages: if the cut fields have dependent averages.
    """
    ctx = ctx or build_context(config)
    grid = ctx.grid

    def factory(sigma):
        return average_program(config.u0_mean, config.u1_mean, sigma, ctx.profile, config.T_ctrl)[0]

    zero = not np.any(config.target_vorticity(grid).values) and not np.any(config.initial_vorticity(grid).values) \
        and config.forcing == "zero"
    report = run_vorticity_steering(config, ctx, stop_at_success=stop_at_success, zero_control=zero,
                                    aleph_factory=factory)
    if report.chosen is None:
        return report
    started = time.perf_counter()
    sigma = report.sigma
    T = config.T_ctrl
    t_sigma = T - 1.0 / sigma
    aleph = factory(sigma)
    control = report.control

    cuts = build_cut_fields(parse_cut(config.cut1, config.cut_width, config.base_dir),
                            parse_cut(config.cut2, config.cut_width, config.base_dir), grid)
    lift_spec = build_lift_spec(ctx.bundle, config.omega)

    # mean of the lifted force at the coefficient times (cached control nodes)
    def xi_mean(t):
        s = sigma * (t - t_sigma)
        if s < 0.0 or s > 1.0 or control.solution.zeta.size == 0 or not np.any(control.solution.zeta):
            return np.zeros(2)
        eta = control.eta_tilde_grid(s)
        if not np.any(eta):
            return np.zeros(2)
        return sigma * lift_vorticity_control(eta, lift_spec).xi.integral()

    f = config.velocity_forcing(grid)
    f_mean = np.zeros(2) if f is None else f.integral()
    bins = control.bins
    spacing = 2.0 * bins.node_spacing
    windows = [(t_sigma + ctx.schedule.t_a(j) / sigma, t_sigma + ctx.schedule.t_b(j) / sigma,
                int(round(ctx.schedule.phase / spacing))) for j in range(1, ctx.schedule.K + 1)]
    times = series_grid(aleph, T, windows=windows)
    series = mean_force_controls(times, xi_mean, lambda t: f_mean, cuts, aleph)
    balance = series.balance_error(config.u0_mean, aleph)
    terminal_mean = series.mean_history(config.u0_mean)[-1]

    lift_rows = []
    xi_sample = None
    if np.any(control.solution.zeta):
        samples = lift_sample_times(control, config.lift_samples, config.seed)
        lift_rows = audit_lift(control.eta_tilde_fine, lift_spec, samples, config.lift_n)
        xi_sample = lift_vorticity_control(control.eta_tilde_grid(samples[0]), lift_spec).xi

    m = config.norm_order
    u_final = biot_savart(report.final, terminal_mean)
    u_target = biot_savart(report.target, config.u1_mean)
    diff = VectorField2(u_final.u1 - u_target.u1, u_final.u2 - u_target.u2)
    abs_err = vector_norm(diff, m + 1)
    scale = vector_norm(u_target, m + 1)
    audit = VelocityAudit(
        velocity_error=abs_err / scale if scale > 0 else abs_err,
        velocity_error_abs=abs_err,
        vorticity_error_abs=sobolev_norm(report.final.values - report.target.values, m),
        mean_error=float(np.linalg.norm(terminal_mean - np.asarray(config.u1_mean))),
        terminal_mean=terminal_mean,
        c0=empirical_c0(grid.n, m),
        lift_rows=lift_rows,
        cuts=cuts,
        mean_force=series,
        balance_error=balance,
        xi_sample=xi_sample,
    )
    report.velocity = audit
    report.runtime += time.perf_counter() - started
    return report


# ---------------------------------------------------------------------------
# delta convergence


@dataclass
class ConvergenceRow:
    target: str
    delta: float
    error: float
    relative: float
    scale: float


def run_delta_convergence(config: SteeringConfig, targets: Optional[Sequence[str]] = None,
                          ctx: Optional[SteeringContext] = None, *, deltas: Optional[Sequence[float]] = None,
                          w0: Optional[ScalarField] = None, zero_control: bool = False) -> list[ConvergenceRow]:
    """Distance between the scaled nonlinear burst and the linear transport state.

    For each target the linear problem is solved once from ``w0``; ``v(1)`` is
    the terminal state of the transport problem driven by the localized
    control.  For each ``delta`` the nonlinear system runs on ``[0, delta]``
    with force ``h + delta^-1 eta~(., t/delta)`` and the error at ``t = delta``
    is measured in ``H^m``.
    """
    ctx = ctx or build_context(config)
    grid = ctx.grid
    start = config.initial_vorticity(grid) if w0 is None else w0
    h = _external_vorticity_forcing(config, grid)
    names = list(targets) if targets else [config.w1]
    rows = []
    for name in names:
        target = config.scalar_field(name, grid) if isinstance(name, str) else name
        goal = ScalarField(grid, target.values - ctx.transported(start).values, average_free=True)
        if zero_control:
            solution = ControlSolution.zero(config.modes, ctx.operator.bins)
        else:
            solution = solve_global_control(goal, config.eps, ctx.operator)
        control = ctx.localize(solution)
        linear = solve_transport(start, UniformDrift(ctx.profile), control.forcing(tilde=True), T=1.0,
                                 dt=ctx.schedule.phase / 8).final
        scale = sobolev_norm(linear, config.norm_order)
        label = name if isinstance(name, str) else "field"
        for delta in (deltas if deltas is not None else config.sweep):
            sigma = 1.0 / delta
            aleph = BurstAverage(ctx.profile, 0.0, sigma, before=config.u0_mean)
            final = controlled_burst(ctx, control, start, 0.0, delta, aleph, h).final
            err = sobolev_norm(final.values - linear.values, config.norm_order)
            rows.append(ConvergenceRow(label, delta, err, err / scale if scale > 0 else err, scale))
    return rows


def write_convergence_csv(rows: Sequence[ConvergenceRow], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["target", "delta", "error", "relative"])
        for r in rows:
            writer.writerow([r.target, r.delta, repr(r.error), repr(r.relative)])
    return path


# ---------------------------------------------------------------------------
# return-flow check


@dataclass
class FlowCheck:
    rest_speed: float
    return_error: float
    corner_excess: float

    def passed(self, return_tol: float = 1e-8, corner_tol: float = 1e-6) -> bool:
        return self.rest_speed == 0.0 and self.return_error <= return_tol and self.corner_excess <= corner_tol


def return_flow_check(omega=(0.5, 4.7, 0.5, 4.7), K: int = 36, points: int = 10_000,
                      samples_per_window: int = 9, seed: int = 0) -> FlowCheck:
    """Properties of the return profile.

    ``rest_speed`` is the largest drift speed on ``[0, T*]`` and on
    ``[1 - T*, 1]``; ``return_error`` the largest ``|Y(x, 0, 1) - x|`` over
    random points; ``corner_excess`` the largest distance by which a corner
    of a covering square leaves the reference square during its window.
    """
    from .flows import flow_Y

    cov = build_covering(omega, K)
    profile, sched = build_return_profile(cov)
    T = sched.phase
    rest = np.concatenate([np.linspace(0.0, T, 257), np.linspace(1.0 - T, 1.0, 257)])
    rest_speed = float(np.max(np.abs(profile.velocity(rest))))
    x = np.random.default_rng(seed).uniform(0.0, 2 * np.pi, (points, 2))
    moved = flow_Y(profile, x, 0.0, 1.0)
    return_error = float(np.max(np.abs((moved - x + np.pi) % (2 * np.pi) - np.pi)))
    p = cov.reference_corner
    offsets = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]) * cov.side
    excess = 0.0
    for l in range(1, K + 1):
        corners = cov.corners[l - 1] + offsets
        for t in np.linspace(sched.t_a(l), sched.t_b(l), samples_per_window):
            rel = (flow_Y(profile, corners, 0.0, t) - p + np.pi) % (2 * np.pi) - np.pi
            excess = max(excess, float(np.max(np.maximum(-rel, 0.0))),
                         float(np.max(np.maximum(rel - cov.side, 0.0))))
    return FlowCheck(rest_speed, return_error, excess)
