"""Periodic grid, FFT transforms and differential operators on [0, 2*pi)^2.

Arrays are indexed ``values[i, j]`` at the node ``(2*pi*i/n, 2*pi*j/n)``, so
axis 0 carries ``x1`` and axis 1 carries ``x2``.  Spectral data uses the
half-plane layout of :func:`numpy.fft.rfft2`.
"""

from __future__ import annotations

import math

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np

from .errors import NonZeroMean, UnsupportedOrder

TWO_PI = 2.0 * np.pi
AREA = TWO_PI**2
MAX_SOBOLEV_ORDER = 4


@dataclass(frozen=True)
class GridSpec:
    """Uniform ``n x n`` grid on the torus."""

    n: int

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 32 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 32, got {n!r}")

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @property
    def cell_area(self) -> float:
        return self.spacing**2

    @cached_property
    def axis(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n) / self.n

    @cached_property
    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        x1, x2 = np.meshgrid(self.axis, self.axis, indexing="ij")
        x1.flags.writeable = False
        x2.flags.writeable = False
        return x1, x2

    @cached_property
    def points(self) -> np.ndarray:
        """All nodes as an ``(n*n, 2)`` array in row-major order."""
        x1, x2 = self.nodes
        return np.stack([x1.ravel(), x2.ravel()], axis=1)

    @cached_property
    def wavenumbers(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        k1 = np.fft.fftfreq(n, 1.0 / n)[:, None]
        k2 = np.fft.rfftfreq(n, 1.0 / n)[None, :]
        return k1, k2

    @cached_property
    def derivative_multipliers(self) -> tuple[np.ndarray, np.ndarray]:
        """``i*k`` multipliers with the Nyquist modes removed."""
        k1, k2 = self.wavenumbers
        half = self.n // 2
        d1 = 1j * np.where(np.abs(k1) == half, 0.0, k1)
        d2 = 1j * np.where(np.abs(k2) == half, 0.0, k2)
        return d1 * np.ones_like(k2), d2 * np.ones_like(k1)

    @cached_property
    def ksq(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        return k1**2 + k2**2

    @cached_property
    def inverse_laplacian(self) -> np.ndarray:
        """Multiplier of ``(-Delta)^{-1}`` with the zero mode set to 0."""
        ksq = self.ksq.copy()
        ksq[0, 0] = 1.0
        inv = 1.0 / ksq
        inv[0, 0] = 0.0
        return inv

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        cut = self.n / 3.0
        return (np.abs(k1) <= cut) & (np.abs(k2) <= cut)

    @cached_property
    def nyquist_free(self) -> np.ndarray:
        k1, k2 = self.wavenumbers
        half = self.n // 2
        return (np.abs(k1) != half) & (np.abs(k2) != half)

    @cached_property
    def half_plane_weights(self) -> np.ndarray:
        """Multiplicity of each rfft2 coefficient in the full spectrum."""
        w = np.full(self.n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return np.broadcast_to(w[None, :], (self.n, self.n // 2 + 1))


@lru_cache(maxsize=16)
def grid_of(n: int) -> GridSpec:
    """Shared grid instance so cached operator arrays are reused."""
    return GridSpec(int(n))


def to_spectral(values: np.ndarray) -> np.ndarray:
    return np.fft.rfft2(values)


def to_physical(coeffs: np.ndarray, n: int) -> np.ndarray:
    return np.fft.irfft2(coeffs, s=(n, n))


def grid_mean(values: np.ndarray) -> float:
    return float(np.mean(values))


def grid_integral(values: np.ndarray) -> float:
    """Trapezoid integral over T^2 (spectrally exact for band-limited data), summed exactly."""
    n = values.shape[0]
    return math.fsum(np.ravel(values)) * (TWO_PI / n) ** 2


def l2_norm(values: np.ndarray) -> float:
    n = values.shape[0]
    return float(np.sqrt(np.sum(values * values)) * (TWO_PI / n))


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Immutable grid samples of a real periodic function.

    Args:
        grid: the grid the samples live on.
        values: ``(n, n)`` samples; copied and frozen.
        average_free: if set, the zero mode is projected out exactly.
    """

    grid: GridSpec
    values: np.ndarray
    average_free: bool = False

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.shape != (self.grid.n, self.grid.n):
            raise ValueError(f"expected shape {(self.grid.n,) * 2}, got {vals.shape}")
        if self.average_free:
            vals -= vals.mean()
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: GridSpec, func, average_free: bool = False) -> "ScalarField":
        x1, x2 = grid.nodes
        return cls(grid, np.broadcast_to(func(x1, x2), x1.shape), average_free)

    @classmethod
    def zeros(cls, grid: GridSpec) -> "ScalarField":
        return cls(grid, np.zeros((grid.n, grid.n)), True)

    @cached_property
    def spectrum(self) -> np.ndarray:
        coeffs = to_spectral(self.values)
        coeffs.flags.writeable = False
        return coeffs

    def mean(self) -> float:
        return grid_mean(self.values)

    def integral(self) -> float:
        return grid_integral(self.values)

    def __add__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values + other.values)

    def __sub__(self, other: "ScalarField") -> "ScalarField":
        return ScalarField(self.grid, self.values - other.values)

    def __mul__(self, scalar: float) -> "ScalarField":
        return ScalarField(self.grid, self.values * scalar, self.average_free)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField2:
    """Pair of scalar components on a common grid."""

    u1: ScalarField
    u2: ScalarField
    divergence_free: bool = False

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise ValueError("components live on different grids")
        if self.divergence_free:
            div = l2_norm(divergence(self).values)
            scale = max(l2_norm(self.u1.values), l2_norm(self.u2.values), 1e-300)
            if div > 1e-10 * scale:
                raise ValueError(f"field flagged divergence-free has divergence {div:.3e}")

    @property
    def grid(self) -> GridSpec:
        return self.u1.grid

    @classmethod
    def from_functions(cls, grid: GridSpec, f1, f2) -> "VectorField2":
        return cls(ScalarField.from_function(grid, f1), ScalarField.from_function(grid, f2))

    def integral(self) -> np.ndarray:
        return np.array([self.u1.integral(), self.u2.integral()])


def _check_mean(values: np.ndarray) -> None:
    mean = float(np.mean(values))
    rms = float(np.sqrt(np.mean(values * values)))
    if abs(mean) > 1e-12 * max(rms, np.finfo(float).tiny):
        raise NonZeroMean(f"field mean {mean:.3e} is not negligible (rms {rms:.3e})")


def stream_function_coeffs(grid: GridSpec, z_hat: np.ndarray) -> np.ndarray:
    return z_hat * grid.inverse_laplacian


def solve_poisson(z: ScalarField) -> ScalarField:
    """Zero-mean solution ``phi`` of ``-Delta phi = z``.

    Raises:
        NonZeroMean: if ``z`` is not average-free.
    """
    _check_mean(z.values)
    grid = z.grid
    phi_hat = stream_function_coeffs(grid, z.spectrum)
    return ScalarField(grid, to_physical(phi_hat, grid.n), average_free=True)


def velocity_arrays(grid: GridSpec, z_hat: np.ndarray, mean_velocity=(0.0, 0.0)):
    """Stream velocity ``(d2 phi, -d1 phi)`` plus a uniform part, as arrays."""
    d1, d2 = grid.derivative_multipliers
    phi_hat = z_hat * grid.inverse_laplacian
    u1 = to_physical(d2 * phi_hat, grid.n) + mean_velocity[0]
    u2 = to_physical(-d1 * phi_hat, grid.n) + mean_velocity[1]
    return u1, u2


def biot_savart(z: ScalarField, total: Sequence[float] = (0.0, 0.0)) -> VectorField2:
    """Divergence-free velocity with curl ``z`` and spatial integral ``total``.

    Args:
        z: average-free vorticity.
        total: prescribed integral of the velocity over the torus.

    Returns:
        The velocity field ``(d2 phi, -d1 phi) + total / (4 pi^2)``.
    """
    _check_mean(z.values)
    grid = z.grid
    uniform = np.asarray(total, dtype=float) / AREA
    u1, u2 = velocity_arrays(grid, z.spectrum, uniform)
    return VectorField2(ScalarField(grid, u1), ScalarField(grid, u2))


def partial(values: np.ndarray, axis: int) -> np.ndarray:
    n = values.shape[0]
    grid = grid_of(n)
    mult = grid.derivative_multipliers[axis]
    return to_physical(mult * to_spectral(values), n)


def curl(u: VectorField2) -> ScalarField:
    grid = u.grid
    d1, d2 = grid.derivative_multipliers
    w_hat = d1 * u.u2.spectrum - d2 * u.u1.spectrum
    return ScalarField(grid, to_physical(w_hat, grid.n), average_free=True)


def divergence(u: VectorField2) -> ScalarField:
    grid = u.grid
    d1, d2 = grid.derivative_multipliers
    return ScalarField(grid, to_physical(d1 * u.u1.spectrum + d2 * u.u2.spectrum, grid.n))


def sobolev_norm(f: ScalarField | np.ndarray, m: int) -> float:
    """``H^m`` norm with weight ``(1+|l|^2)^m``; ``m = 0`` is the L2 norm.

    Raises:
        UnsupportedOrder: for ``m`` outside ``0..4``.
    """
    if int(m) != m or m < 0 or m > MAX_SOBOLEV_ORDER:
        raise UnsupportedOrder(f"Sobolev order must be an integer in 0..{MAX_SOBOLEV_ORDER}, got {m}")
    values = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    n = values.shape[0]
    grid = grid_of(n)
    coeffs = to_spectral(values) / n**2
    weight = (1.0 + grid.ksq) ** m
    total = np.sum(grid.half_plane_weights * weight * np.abs(coeffs) ** 2)
    return float(np.sqrt(AREA * total))


def translate(values: np.ndarray, offset: Sequence[float]) -> np.ndarray:
    """Samples of ``f(x + offset)`` from samples of ``f`` (Nyquist modes dropped)."""
    a1, a2 = float(offset[0]), float(offset[1])
    if a1 == 0.0 and a2 == 0.0:
        return np.array(values, dtype=float)
    n = values.shape[0]
    grid = grid_of(n)
    k1, k2 = grid.wavenumbers
    phase = np.exp(1j * (k1 * a1 + k2 * a2)) * grid.nyquist_free
    return to_physical(to_spectral(values) * phase, n)


def resample(values: np.ndarray, n_new: int) -> np.ndarray:
    """Band-limited resampling of a periodic field onto an ``n_new`` grid."""
    n = values.shape[0]
    if n_new == n:
        return np.array(values, dtype=float)
    full = np.fft.fft2(values) / n**2
    out = np.zeros((n_new, n_new), dtype=complex)
    keep = min(n, n_new) // 2
    idx = np.r_[0:keep, -keep + 1:0] if keep > 1 else np.r_[0:1]
    out[np.ix_(idx, idx)] = full[np.ix_(idx, idx)]
    return np.real(np.fft.ifft2(out)) * n_new**2


def interpolate(values: np.ndarray, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Evaluate the trigonometric interpolant of grid samples at arbitrary points.

    The Nyquist coefficient is split evenly between ``+n/2`` and ``-n/2`` so the
    interpolant is real and reproduces the samples exactly at the nodes.
    """
    n = values.shape[0]
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    full = np.fft.fft2(values) / n**2
    ks = np.arange(-(n // 2), n // 2 + 1)
    coeffs = full[np.ix_(ks % n, ks % n)].copy()
    coeffs[0, :] *= 0.5
    coeffs[-1, :] *= 0.5
    coeffs[:, 0] *= 0.5
    coeffs[:, -1] *= 0.5
    out = np.empty(len(pts))
    for start in range(0, len(pts), chunk):
        p = pts[start:start + chunk]
        e1 = np.exp(1j * np.outer(p[:, 0], ks))
        e2 = np.exp(1j * np.outer(p[:, 1], ks))
        out[start:start + chunk] = np.real(np.einsum("pk,pk->p", e1 @ coeffs, e2))
    return out


def evaluate_displaced(values: np.ndarray, disp1: np.ndarray, disp2: np.ndarray,
                       tol: float = 1e-14, max_order: int = 60) -> np.ndarray:
    """Samples of ``f(x_ij + d_ij)`` for small per-node displacements ``d``.

    Sums the Taylor series of the trigonometric interpolant around each node,
    with derivatives taken spectrally.  This is exact up to ``tol`` (relative to
    ``max|f|``) and costs a few FFTs per order, far cheaper than direct
    evaluation of the interpolant when ``|d| * k_max`` is moderate.  Falls back
    to :func:`interpolate` if the series has not converged by ``max_order``.
    """
    n = values.shape[0]
    grid = grid_of(n)
    f_hat = to_spectral(values) * grid.nyquist_free
    d1m, d2m = grid.derivative_multipliers
    scale = max(float(np.abs(values).max()), np.finfo(float).tiny)
    out = to_physical(f_hat, n)
    # derivs[a] holds d1^a d2^(m-a) f_hat / (a! (m-a)!) for the current order m
    derivs = [f_hat]
    quiet = 0
    for order in range(1, max_order + 1):
        nxt = [derivs[0] * d2m / order]
        for a in range(1, order + 1):
            nxt.append(derivs[a - 1] * d1m / a)
        derivs = nxt
        term = np.zeros_like(values)
        for a, coeff in enumerate(derivs):
            term += to_physical(coeff, n) * disp1**a * disp2 ** (order - a)
        out += term
        if np.abs(term).max() < tol * scale:
            quiet += 1
            if quiet == 2:
                return out
        else:
            quiet = 0
    x1, x2 = grid.nodes
    pts = np.stack([(x1 + disp1).ravel(), (x2 + disp2).ravel()], axis=1)
    return interpolate(values, pts).reshape(n, n)


def spectral_tail_ratio(values: np.ndarray) -> float:
    """Largest coefficient with ``|l|_inf >= n/3`` relative to the peak."""
    n = values.shape[0]
    grid = grid_of(n)
    mag = np.abs(to_spectral(values))
    peak = mag.max()
    if peak == 0.0:
        return 0.0
    k1, k2 = grid.wavenumbers
    tail = (np.abs(k1) >= n / 3) | (np.abs(k2) >= n / 3)
    return float(mag[tail].max() / peak)
