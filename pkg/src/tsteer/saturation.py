"""Integer generator sets and their saturation by non-parallel sums."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce
from typing import Iterable

from .errors import ParallelModes

Mode = tuple[int, int]


@dataclass(frozen=True)
class GeneratorSet:
    """Finite set of nonzero integer wave vectors driving the control."""

    modes: tuple[Mode, ...]

    def __post_init__(self):
        cleaned = []
        for mode in self.modes:
            a, b = (int(v) for v in mode)
            if (a, b) == (0, 0):
                raise ValueError("the zero vector cannot be a control mode")
            if (a, b) in cleaned:
                raise ValueError(f"duplicate mode {(a, b)}")
            cleaned.append((a, b))
        object.__setattr__(self, "modes", tuple(cleaned))

    @classmethod
    def parse(cls, text: str) -> "GeneratorSet":
        """Parse ``"1,0;0,1"`` (pairs separated by ``;`` or whitespace)."""
        pairs = [p for p in text.replace(" ", ";").split(";") if p.strip()]
        modes = []
        for pair in pairs:
            parts = [v for v in pair.replace("(", "").replace(")", "").split(",") if v.strip()]
            if len(parts) != 2:
                raise ValueError(f"cannot parse mode {pair!r}")
            modes.append((int(parts[0]), int(parts[1])))
        return cls(tuple(modes))

    @property
    def channels(self) -> int:
        """Number of real control channels, two per mode."""
        return 2 * len(self.modes)

    def __iter__(self):
        return iter(self.modes)

    def __len__(self):
        return len(self.modes)


def cross(a: Mode, b: Mode) -> int:
    return a[0] * b[1] - a[1] * b[0]


def is_parallel(a: Mode, b: Mode) -> bool:
    return cross(a, b) == 0


def is_generator(modes: GeneratorSet | Iterable[Mode]) -> bool:
    """True iff the integer span of the modes is all of ``Z^2``.

    The lattice spanned by the columns has index equal to the gcd of all 2x2
    minors (the product of the Smith invariants), so it is ``Z^2`` exactly
    when that gcd is one.
    """
    vecs = list(modes)
    minors = [cross(vecs[i], vecs[j]) for i in range(len(vecs)) for j in range(i + 1, len(vecs))]
    return reduce(math.gcd, minors, 0) == 1


def saturation_sequence(modes: GeneratorSet | Iterable[Mode], j_max: int) -> list[list[Mode]]:
    """Sets ``E_0..E_{j_max}`` grown by adding non-parallel sums with ``E_0``.

    Each set is returned sorted lexicographically.
    """
    if j_max < 0 or j_max > 10:
        raise ValueError("j_max must lie in 0..10")
    base = set()
    for a, b in modes:
        base.add((a, b))
        base.add((-a, -b))
    seq = [sorted(base)]
    current = set(base)
    for _ in range(j_max):
        new = set(current)
        for l1 in current:
            for l2 in base:
                if not is_parallel(l1, l2):
                    new.add((l1[0] + l2[0], l1[1] + l2[1]))
        current = new
        seq.append(sorted(current))
    return seq


@dataclass(frozen=True)
class TrigExpansion:
    """Coefficients of ``s_{l1+l2}`` and ``c_{l1+l2}`` in the products of single modes.

    Keys are ``(first, second)`` with ``"s"``/``"c"`` naming sine or cosine of
    ``l1`` and ``l2`` respectively.
    """

    sine: dict
    cosine: dict


def trig_expand(l1: Mode, l2: Mode) -> TrigExpansion:
    """Angle-addition coefficients for the sum of two non-parallel modes.

    Raises:
        ParallelModes: if the modes are parallel.
    """
    if is_parallel(tuple(l1), tuple(l2)):
        raise ParallelModes(f"{tuple(l1)} and {tuple(l2)} are parallel")
    return TrigExpansion(
        sine={("s", "c"): 1, ("c", "s"): 1},
        cosine={("c", "c"): 1, ("s", "s"): -1},
    )
