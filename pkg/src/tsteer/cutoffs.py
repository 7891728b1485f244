"""Overlapping-square covering of the torus and the cutoffs built on it.

The covering consists of ``K`` squares of side ``l_K = 2*pi/(sqrt(K)-1)`` with
lower-left corners on the lattice ``2*pi*(i, l)/sqrt(K)``.  A reference square
of the same size sits in the middle of the control rectangle; every covering
square is moved onto it by the return flow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import LengthConditionViolated, NotASquare
from .spectral import TWO_PI, GridSpec

_TINY_ARG = 1e-300


def smooth_step(u):
    """C-infinity step equal to 0 for ``u <= 0`` and 1 for ``u >= 1``."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    left = np.where(u > 0.0, np.exp(-1.0 / np.maximum(u, _TINY_ARG)), 0.0)
    right = np.where(u < 1.0, np.exp(-1.0 / np.maximum(1.0 - u, _TINY_ARG)), 0.0)
    return left / (left + right)


def smooth_step_derivative(u):
    """Derivative of :func:`smooth_step`; a unit-mass bump on ``(0, 1)``."""
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    v = np.where(inside, u, 0.5)
    left = np.exp(-1.0 / v)
    right = np.exp(-1.0 / (1.0 - v))
    num = left * right * (1.0 / v**2 + 1.0 / (1.0 - v) ** 2)
    return np.where(inside, num / (left + right) ** 2, 0.0)


def wrap(x):
    """Reduce coordinates to ``[0, 2*pi)``."""
    y = np.mod(x, TWO_PI)
    return np.where(y >= TWO_PI, 0.0, y)


def integer_sqrt(k: int) -> int:
    if k <= 1:
        raise NotASquare(f"K must be a square integer > 1, got {k}")
    root = math.isqrt(int(k))
    if root * root != k:
        raise NotASquare(f"K = {k} is not a perfect square")
    return root


@dataclass(frozen=True)
class CoveringSpec:
    """Geometry of the covering and of the reference square.

    Attributes:
        K: number of covering squares.
        omega: control rectangle ``(a1, b1, a2, b2)``.
        margin: distance ``d`` kept between the inner rectangle and the boundary of omega.
    """

    K: int
    omega: tuple[float, float, float, float]
    margin: float

    @property
    def root(self) -> int:
        return math.isqrt(self.K)

    @property
    def side(self) -> float:
        return TWO_PI / (self.root - 1)

    @property
    def lattice_step(self) -> float:
        return TWO_PI / self.root

    @property
    def plateau(self) -> tuple[float, float]:
        """Interval on which the 1-D reference cutoff equals one."""
        return TWO_PI / (self.K - self.root), self.lattice_step

    @property
    def rectangle(self) -> tuple[float, float, float, float]:
        a1, b1, a2, b2 = self.omega
        d = self.margin
        return a1 + d, b1 - d, a2 + d, b2 - d

    @cached_property
    def corners(self) -> np.ndarray:
        """Lower-left corners ``x_1..x_K``; index ``i + sqrt(K)*(l-1)`` runs fastest in ``x1``."""
        r = self.root
        idx = np.arange(self.K)
        return np.stack([self.lattice_step * (idx % r), self.lattice_step * (idx // r)], axis=1)

    @property
    def reference_corner(self) -> np.ndarray:
        l1, l2, h1, h2 = self.rectangle
        return np.array([(l1 + l2 - self.side) / 2.0, (h1 + h2 - self.side) / 2.0])

    @cached_property
    def shifts(self) -> np.ndarray:
        """Displacements moving each covering square onto the reference square, in ``(-pi, pi]``."""
        delta = self.reference_corner[None, :] - self.corners
        return -np.mod(-delta + np.pi, TWO_PI) + np.pi

    def contains(self, points: np.ndarray, index: int) -> np.ndarray:
        """Membership of points (mod 2*pi) in the open square ``x_index + (0, l_K)^2``."""
        rel = wrap(np.asarray(points) - self.corners[index])
        return np.all((rel > 0.0) & (rel < self.side), axis=-1)


def build_covering(omega_rect, K: int, margin: float = 0.1) -> CoveringSpec:
    """Validate the data and return the covering of the torus.

    Args:
        omega_rect: control rectangle ``(a1, b1, a2, b2)`` with sides in ``(0, 2*pi)``.
        K: square number of covering squares.
        margin: inner distance ``d`` between the working rectangle and omega.

    Raises:
        NotASquare: if ``K`` is not a square integer greater than one.
        LengthConditionViolated: if the squares are too large for the rectangle.
    """
    a1, b1, a2, b2 = (float(v) for v in omega_rect)
    if not (0.0 < b1 - a1 < TWO_PI and 0.0 < b2 - a2 < TWO_PI):
        raise ValueError("omega sides must lie in (0, 2*pi)")
    if margin < 0:
        raise ValueError("margin must be non-negative")
    integer_sqrt(int(K))
    cov = CoveringSpec(int(K), (a1, b1, a2, b2), float(margin))
    l1, l2, h1, h2 = cov.rectangle
    shortest = min(l2 - l1, h2 - h1)
    if cov.side >= shortest / 3.0:
        raise LengthConditionViolated(
            f"square side {cov.side:.4f} must be below a third of {shortest:.4f}"
        )
    return cov


@dataclass(frozen=True)
class ReferenceCutoff:
    """The 1-D cutoff whose lattice translates sum to one."""

    rise: float
    plateau_end: float

    @property
    def support_end(self) -> float:
        return self.rise + self.plateau_end

    def __call__(self, s):
        s = wrap(s)
        a, b = self.rise, self.plateau_end
        up = smooth_step(s / a)
        down = 1.0 - smooth_step((s - b) / a)
        return np.where(s <= a, up, np.where(s <= b, 1.0, np.where(s < a + b, down, 0.0)))


def build_reference_cutoff(K: int) -> ReferenceCutoff:
    """Reference cutoff: rises on ``(0, a)``, equals 1 on ``[a, b]``, falls on ``(b, l_K)``.

    Here ``a = 2*pi/(K - sqrt(K))`` and ``b = 2*pi/sqrt(K)``; the falling part is
    the reflection ``1 - rise(s - b)``, so neighbouring translates add up to one.
    """
    root = integer_sqrt(int(K))
    return ReferenceCutoff(TWO_PI / (K - root), TWO_PI / root)


@dataclass(frozen=True, eq=False)
class CutoffBundle:
    """All cutoffs of the construction, evaluable at arbitrary points.

    The mass-one bump ``chi_tilde`` is a product of 1-D profiles.  When a grid
    is supplied, each profile is a smooth bump averaged over one grid cell;
    its trapezoid sums then telescope to exactly one under any translation,
    so ``chi_tilde`` and its lattice copies have unit mass both as functions
    and on the grid.
    """

    covering: CoveringSpec
    profile: ReferenceCutoff
    bump_center: np.ndarray
    bump_radius: float
    masses: tuple[float, float, float]
    grid: Optional[GridSpec] = None

    def _bump_1d(self, offset):
        """Unit-mass profile supported on ``(-radius, radius)`` around zero."""
        r = self.bump_radius
        cell = 0.0 if self.grid is None else self.grid.spacing
        width = 2.0 * r - cell
        u = (wrap(offset + np.pi) - np.pi + r) / width
        if cell == 0.0:
            return smooth_step_derivative(u) / width
        return (smooth_step(u) - smooth_step(u - cell / width)) / cell

    def mu(self, x1, x2):
        return self.profile(x1) * self.profile(x2)

    def mu_l(self, index: int, x1, x2):
        c = self.covering.corners[index]
        return self.mu(x1 - c[0], x2 - c[1])

    def chi(self, x1, x2):
        p = self.covering.reference_corner
        return self.mu(x1 - p[0], x2 - p[1])

    def _raw_bump(self, x1, x2):
        c = self.bump_center
        return self._bump_1d(x1 - c[0]) * self._bump_1d(x2 - c[1])

    def chi_tilde(self, x1, x2):
        return self._raw_bump(x1, x2) / self.masses[0]

    def chi_tilde_right(self, x1, x2):
        step = self.covering.lattice_step
        return self._raw_bump(x1 - step, x2) / self.masses[1]

    def chi_tilde_diag(self, x1, x2):
        step = self.covering.lattice_step
        return self._raw_bump(x1 - step, x2 - step) / self.masses[2]

    def uses_diag(self, window: int) -> bool:
        """Whether window ``window`` (1-based) deposits into the diagonal copy."""
        return window % self.covering.root == 0

    def chi_tilde_window(self, window: int, x1, x2):
        if self.uses_diag(window):
            return self.chi_tilde_diag(x1, x2)
        return self.chi_tilde_right(x1, x2)

    def support_hull(self) -> tuple[np.ndarray, float]:
        """Corner and side of the smallest square containing every cutoff support."""
        p = self.covering.reference_corner
        side = max(self.covering.side, self.bump_center[0] - p[0] + self.bump_radius
                   + self.covering.lattice_step)
        return p.copy(), float(side)

    def sample(self, grid: GridSpec) -> "SampledCutoffs":
        x1, x2 = grid.nodes
        return SampledCutoffs(
            chi=self.chi(x1, x2),
            chi_tilde=self.chi_tilde(x1, x2),
            chi_tilde_right=self.chi_tilde_right(x1, x2),
            chi_tilde_diag=self.chi_tilde_diag(x1, x2),
        )


@dataclass(frozen=True, eq=False)
class SampledCutoffs:
    chi: np.ndarray
    chi_tilde: np.ndarray
    chi_tilde_right: np.ndarray
    chi_tilde_diag: np.ndarray


def build_partition(cov: CoveringSpec, grid: Optional[GridSpec] = None,
                    bump_fill: float = 0.9) -> CutoffBundle:
    """Build the partition of unity and the mass-one bumps.

    Args:
        cov: the covering.
        grid: if given, the bump profiles are cell-averaged so that every
            lattice copy has unit grid integral.
        bump_fill: fraction of the plateau width used by the bump support.
    """
    profile = build_reference_cutoff(cov.K)
    a, b = cov.plateau
    p = cov.reference_corner
    center = p + 0.5 * (a + b)
    radius = 0.5 * bump_fill * (b - a)
    bundle = CutoffBundle(cov, profile, center, radius, (1.0, 1.0, 1.0), grid)
    if grid is None:
        return bundle
    # The profiles have unit grid mass exactly; dividing by the summed mass
    # only removes rounding.
    x1, x2 = grid.nodes
    area = grid.cell_area
    step = cov.lattice_step
    masses = (
        math.fsum(bundle._raw_bump(x1, x2).ravel()) * area,
        math.fsum(bundle._raw_bump(x1 - step, x2).ravel()) * area,
        math.fsum(bundle._raw_bump(x1 - step, x2 - step).ravel()) * area,
    )
    return CutoffBundle(cov, profile, center, radius, masses, grid)
