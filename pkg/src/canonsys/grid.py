"""Uniform cell-centred grids anchored to the lattice ``h * Z``."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DeltaOffGrid, GridMismatch

LATTICE_TOL = 1e-9


def lattice_index(x: float, h: float, what: str = "value", exc=GridMismatch) -> int:
    """Return ``x / h`` as an integer, raising if ``x`` is off the lattice."""
    q = x / h
    k = int(round(q))
    if abs(q - k) > LATTICE_TOL * max(1.0, abs(q)):
        raise exc(f"{what} {x!r} is not a multiple of the spacing {h!r}")
    return k


@dataclass(frozen=True)
class Grid:
    """Cells ``[L + j h, L + (j+1) h)`` covering ``[left, right]``.

    Samples live at the cell centres; every cell carries weight ``h``.  The
    edges ``left``, ``right`` and every evaluation point ``t`` must be
    lattice points, so that reflections ``x -> a - x`` about lattice
    points ``a`` map centres to centres.
    """

    left: float
    right: float
    spacing: float
    _i0: int = field(init=False, repr=False, compare=False)
    _n: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h = float(self.spacing)
        if not h > 0:
            raise GridMismatch("grid spacing must be positive")
        i0 = lattice_index(self.left, h, "left edge")
        i1 = lattice_index(self.right, h, "right edge")
        if i1 <= i0:
            raise GridMismatch("grid must have positive width")
        object.__setattr__(self, "_i0", i0)
        object.__setattr__(self, "_n", i1 - i0)
        object.__setattr__(self, "left", i0 * h)
        object.__setattr__(self, "right", i1 * h)
        object.__setattr__(self, "spacing", h)

    @property
    def n(self) -> int:
        return self._n

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.left + (np.arange(self._n) + 0.5) * self.spacing

    @cached_property
    def weights(self) -> np.ndarray:
        return np.full(self._n, self.spacing)

    @cached_property
    def edges(self) -> np.ndarray:
        return self.left + np.arange(self._n + 1) * self.spacing

    def cut(self, t: float) -> int:
        """Number of cells lying below the lattice point ``t``."""
        k = lattice_index(t, self.spacing, "t") - self._i0
        if not 0 <= k <= self._n:
            raise GridMismatch(f"t={t} lies outside the grid [{self.left}, {self.right}]")
        return k

    def cell_of_edge(self, a: float, side: str) -> int:
        """Index of the cell just below (``side='below'``) or above a lattice point.

        May return an index outside ``[0, n)`` for points beyond the grid.
        """
        k = lattice_index(a, self.spacing, "delta location", DeltaOffGrid) - self._i0
        return k - 1 if side == "below" else k

    def check_same(self, other: "Grid"):
        if other != self:
            raise GridMismatch("operands live on different grids")

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        """``<f, g> = sum f conj(g) h``."""
        return complex(np.sum(f * np.conj(g)) * self.spacing)

    def norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(np.sum(np.abs(f) ** 2) * self.spacing))
