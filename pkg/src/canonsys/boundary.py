"""Boundary solutions Phi, Psi, the Hamiltonian H(t) and the functions phi+-.

For a cut point ``t`` we solve on the cells below ``t``

    (1 + K[t]) phi = -K[t] 1,        (1 - K[t]) psi = K[t] 1,

and extend to the whole line by ``Phi = 1 - K(phi + P_t 1)`` and
``Psi = 1 + K(psi + P_t 1)``.  The constant part ``K P_t 1`` is evaluated
exactly from the kernel's antiderivative, so the truncation of the grid
only affects the square-integrable corrections ``phi`` and ``psi``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    CanonsysError, DegenerateDiagonal, DeltaAtDiagonal, GridMismatch, K3Violation,
    K7Violation, MethodNotApplicable, ResidualCheckFailed,
)
from .grid import Grid
from .kernel import KernelRep
from .operator import (
    DEFAULT_NORM_MARGIN, CompressedOperator, GridPolicy, solve_pm,
)
from .unimodular import UnimodularFunction

K3_TOL = 1e-10


class Workspace:
    """Discretization shared by every computation on one grid.

    Holds the kernel, the function, the grid and one compression at
    ``t_top``; compressions at ``t <= t_top`` reuse its factorizations.
    """

    def __init__(self, k: KernelRep, u: UnimodularFunction, grid: Grid, t_top: float,
                 margin: float = DEFAULT_NORM_MARGIN):
        self.k = k
        self.u = u
        self.grid = grid
        self.t_top = float(t_top)
        self.margin = margin
        self.base = CompressedOperator(k, grid, t_top)

    @classmethod
    def for_range(cls, k, u, policy: GridPolicy, t_min: float, t_max: float):
        grid = policy.grid_for(k, t_min, t_max)
        # the right edge also has to clear the reflections of t_min
        reach = max([a - t_min for _, a in k.deltas] + [t_max])
        right = max(grid.right, reach + policy.snap(policy.right_margin))
        # and the left edge the reflection of the window, where the kernel
        # has a point mass or a regular part starting at a finite point
        starts = [a for _, a in k.deltas] + ([k.s_min] if math.isfinite(k.s_min) else [])
        left = grid.left
        if starts:
            h = grid.spacing
            left = min(left, math.floor((min(starts) - right) / h) * h)
        grid = Grid(left, right, grid.spacing)
        return cls(k, u, grid, t_max, policy.norm_margin)

    def op(self, t: float) -> CompressedOperator:
        if t <= self.t_top:
            return self.base.leading(t)
        return CompressedOperator(self.k, self.grid, t)

    def solve(self, t: float, rhs: np.ndarray, sign: int) -> np.ndarray:
        return solve_pm(self.op(t), rhs, sign, margin=self.margin)

    def k_pt_one(self, x, t: float, side: str = "right") -> np.ndarray:
        """``(K P_t 1)(x)`` exactly: point masses plus ``Kint(x + t)``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.asarray(self.k.smooth_integral(x + t), dtype=complex)
        h = self.grid.spacing
        for c, a in self.k.deltas:
            y = a - x
            on_edge = np.abs(y - t) < 1e-9 * max(1.0, abs(t), h)
            inside = y < t
            if side == "right":
                inside = inside | on_edge
            else:
                inside = inside & ~on_edge
            out = out + c * inside
        return out.real.astype(complex) if self.k.real_valued else out

    def k_pt_one_cells(self, rows: np.ndarray, t: float) -> np.ndarray:
        """Cell means of ``K P_t 1`` over the cells `rows` (all above the cut)."""
        g = self.grid
        shift = int(round((t - g.left) / g.spacing))
        I = self.k.interval_integrals(g, int(rows.max()) + shift + 1)
        out = (I[rows + shift] / g.spacing).astype(complex)
        # point masses act as full-cell reflections on the aligned grid
        out = out + (self.k_pt_one(g.nodes[rows], t) - self.k.smooth_integral(g.nodes[rows] + t))
        return out.real.astype(complex) if self.k.real_valued else out

    def _memo(self, key, build):
        # one entry per kind: consecutive calls at the same cut are common
        memo = self.__dict__.setdefault("_blocks", {})
        if memo.get(key[0], (None,))[0] != key[1]:
            memo[key[0]] = (key[1], build())
        return memo[key[0]][1]

    def lower_rows_cells(self, n: int) -> np.ndarray:
        """Cell-averaged counterpart of :meth:`lower_rows`."""
        def build():
            N = self.grid.n
            Hc = self.k.cell_hankel(self.grid, N + n)
            r = np.arange(n, N)
            return Hc[r[:, None] + np.arange(n)[None, :]]
        return self._memo(("cells", n), build)

    def lower_rows(self, n: int) -> np.ndarray:
        """Block of the grid operator from cells ``< n`` into cells ``>= n``."""
        return self._memo(("rows", n), lambda: self.k.block(self.grid, slice(n, None), slice(0, n)))

    def extend(self, n: int, vals: np.ndarray) -> np.ndarray:
        out = np.zeros(self.grid.n, dtype=complex)
        out[:n] = vals
        return out


@dataclass(frozen=True)
class BoundarySolution:
    """Samples of ``Phi(t, .)`` and ``Psi(t, .)`` on the whole grid."""

    t: float
    grid: Grid
    phi_vals: np.ndarray = field(repr=False)
    psi_vals: np.ndarray = field(repr=False)
    phi_diag: complex
    psi_diag: complex
    tail_phi: complex
    tail_psi: complex
    u: UnimodularFunction = field(repr=False)
    phi_core: np.ndarray = field(repr=False)
    psi_core: np.ndarray = field(repr=False)
    phi_cells: np.ndarray = field(repr=False, default=None)
    psi_cells: np.ndarray = field(repr=False, default=None)

    @property
    def cut(self) -> int:
        return self.grid.cut(self.t)


@dataclass(frozen=True)
class HamiltonianSample:
    """``H(t) = [[alpha, beta], [beta, gamma]]`` with ``det H = 1``."""

    t: float
    alpha: float
    beta: float
    gamma: float
    definite_sign: int
    re_phipsibar: float = math.nan
    phi_diag: complex = complex("nan")
    psi_diag: complex = complex("nan")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.alpha, self.beta], [self.beta, self.gamma]])

    @property
    def det(self) -> float:
        return self.alpha * self.gamma - self.beta ** 2


@dataclass(frozen=True)
class PhiPmPair:
    """``phi+`` and ``phi-`` at a cut ``t``: cell samples plus point masses."""

    t: float
    grid: Grid
    phi_plus: np.ndarray = field(repr=False)
    phi_minus: np.ndarray = field(repr=False)
    plus_deltas: tuple = ()
    minus_deltas: tuple = ()
    method: str = "direct"


@dataclass(frozen=True)
class ScanFailure:
    """A per-``t`` failure recorded by a scan."""

    t: float
    error: str


# ---------------------------------------------------------------------------


def _diagonals(ws: Workspace, t: float):
    g, k = ws.grid, ws.k
    n = g.cut(t)
    shift = int(round((t - g.left) / g.spacing))
    half = k.kint_lattice(g, True)
    whole = k.kint_lattice(g, False)
    # K P_t 1 at the nodes below t: x_i + t sits on the half lattice
    rhs = half[shift: shift + n] + (ws.k_pt_one(g.nodes[:n], t) - k.smooth_integral(g.nodes[:n] + t)
                                    if k.deltas else 0.0)
    if k.real_valued:
        rhs = np.real(rhs)
    phi = ws.solve(t, -rhs, 1)
    psi = ws.solve(t, rhs, -1)
    # diagonal values are limits from inside the cut, x -> t-
    kp1 = ws.k_pt_one(np.array([t]), t, side="left")[0]
    row = np.diff(whole[shift: shift + n + 1])
    tt = np.array([float(t)])
    k_phi = row @ np.conj(phi) + k.point_masses_at(tt, np.conj(ws.extend(n, phi)), g, "left")[0]
    k_psi = row @ np.conj(psi) + k.point_masses_at(tt, np.conj(ws.extend(n, psi)), g, "left")[0]
    phi_diag = 1.0 - kp1 - k_phi
    psi_diag = 1.0 + kp1 + k_psi
    if ws.k.real_valued:
        phi_diag, psi_diag = phi_diag.real + 0j, psi_diag.real + 0j
    return n, phi, psi, complex(phi_diag), complex(psi_diag)


def _check_k3(t, phi_diag, psi_diag):
    if abs(phi_diag) < K3_TOL or abs(psi_diag) < K3_TOL:
        raise K3Violation(f"vanishing diagonal value at t={t}: Phi={phi_diag}, Psi={psi_diag}")


def boundary_solution(ws: Workspace, t: float) -> BoundarySolution:
    """Phi and Psi at the cut ``t`` using a prepared workspace."""
    n, phi, psi, phi_diag, psi_diag = _diagonals(ws, t)
    _check_k3(t, phi_diag, psi_diag)
    g = ws.grid
    upper = g.nodes[n:]
    kp1 = ws.k_pt_one(upper, t)
    rows = ws.lower_rows(n)
    phi_up = 1.0 - kp1 - rows @ np.conj(phi)
    psi_up = 1.0 + kp1 + rows @ np.conj(psi)
    phi_vals = np.concatenate([1.0 + phi, phi_up])
    psi_vals = np.concatenate([1.0 + psi, psi_up])
    # cell means above the cut; point samples alias once k chirps
    kp1c = ws.k_pt_one_cells(np.arange(n, g.n), t)
    rows_c = ws.lower_rows_cells(n)
    phi_cells = np.concatenate([1.0 + phi, 1.0 - kp1c - rows_c @ np.conj(phi)])
    psi_cells = np.concatenate([1.0 + psi, 1.0 + kp1c + rows_c @ np.conj(psi)])
    if ws.k.real_valued:
        phi_vals, psi_vals = phi_vals.real + 0j, psi_vals.real + 0j
        phi_cells, psi_cells = phi_cells.real + 0j, psi_cells.real + 0j
    u0 = ws.u.u0
    return BoundarySolution(
        t=float(t), grid=g, phi_vals=phi_vals, psi_vals=psi_vals,
        phi_diag=phi_diag, psi_diag=psi_diag, tail_phi=1 - u0, tail_psi=1 + u0,
        u=ws.u, phi_core=phi, psi_core=psi, phi_cells=phi_cells, psi_cells=psi_cells,
    )


def solve_phi_psi(k: KernelRep, u: UnimodularFunction, grid: Grid, t: float,
                  ws: Workspace | None = None) -> BoundarySolution:
    """Solve for ``Phi(t, .)`` and ``Psi(t, .)`` on `grid`.

    Raises
    ------
    NearSingular
        If the norm margin fails at ``t``.
    K3Violation
        If a diagonal value vanishes.
    """
    if ws is None:
        ws = Workspace(k, u, grid, t)
    return boundary_solution(ws, t)


def hamiltonian_from_diag(phi_diag: complex, psi_diag: complex, t: float = math.nan,
                          require_positive: bool = False) -> HamiltonianSample:
    """Solve the two-by-two system for ``alpha, beta, gamma``.

    ``alpha = |Phi|^2 / Re(Phi conj Psi)``, ``gamma = |Psi|^2 / Re(...)``,
    ``beta = Im(Phi conj Psi) / Re(...)``.

    Examples
    --------
    >>> s = hamiltonian_from_diag(1 + 1j, 1)
    >>> (s.alpha, s.beta, s.gamma)
    (2.0, 1.0, 1.0)
    """
    phi, psi = complex(phi_diag), complex(psi_diag)
    prod = phi * np.conj(psi)
    re = float(prod.real)
    if abs(re) <= 1e-300 or abs(re) <= 1e-15 * abs(phi) * abs(psi):
        raise DegenerateDiagonal(f"Re(Phi conj Psi) vanishes at t={t}")
    sign = 1 if re > 0 else -1
    if require_positive and sign < 0:
        raise K7Violation(f"Re(Phi conj Psi) = {re} < 0 at t={t}")
    return HamiltonianSample(
        t=float(t), alpha=(phi.real ** 2 + phi.imag ** 2) / re, beta=float(prod.imag) / re,
        gamma=(psi.real ** 2 + psi.imag ** 2) / re, definite_sign=sign, re_phipsibar=re,
        phi_diag=phi, psi_diag=psi,
    )


def diag_relation_residual(sample: HamiltonianSample) -> float:
    """Residual of ``Psi = -i beta Psi + gamma Phi`` and ``Phi = alpha Psi + i beta Phi``."""
    phi, psi = sample.phi_diag, sample.psi_diag
    r1 = psi - (-1j * sample.beta * psi + sample.gamma * phi)
    r2 = phi - (sample.alpha * psi + 1j * sample.beta * phi)
    return float(max(abs(r1), abs(r2)) / max(abs(phi), abs(psi)))


def scan_hamiltonian(k: KernelRep, u: UnimodularFunction, policy: GridPolicy,
                     t_values: Sequence[float], ws: Workspace | None = None):
    """``H(t)`` for each ``t``; failures are recorded as :class:`ScanFailure`."""
    t_values = [float(t) for t in t_values]
    if not t_values:
        return []
    if ws is None:
        ws = Workspace.for_range(k, u, policy, min(t_values), max(t_values))
    out = []
    for t in t_values:
        try:
            _, _, _, phi_diag, psi_diag = _diagonals(ws, t)
            _check_k3(t, phi_diag, psi_diag)
            out.append(hamiltonian_from_diag(phi_diag, psi_diag, t))
        except CanonsysError as exc:
            out.append(ScanFailure(t, f"{type(exc).__name__}: {exc}"))
    return out


# ---------------------------------------------------------------------------
# phi+-


def solve_phi_pm(k: KernelRep, u: UnimodularFunction, grid: Grid, t: float,
                 method: str = "direct", bs: BoundarySolution | None = None,
                 ws: Workspace | None = None) -> PhiPmPair:
    """Solutions of ``phi+- +- K P_t phi+- = K delta_t``.

    ``method='direct'`` solves the two compressed equations with right-hand
    side ``P_t K delta_t = k(. + t)``.  ``method='derivative'`` builds them
    from x-derivatives of a boundary solution `bs`; it needs a kernel
    without point masses.
    """
    if ws is None:
        ws = Workspace(k, u, grid, t)
    g = ws.grid
    n = g.cut(t)
    if method == "derivative":
        if k.deltas:
            raise MethodNotApplicable("the derivative route needs a kernel without point masses")
        if bs is None:
            bs = boundary_solution(ws, t)
        return _phi_pm_from_derivatives(bs)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    h = g.spacing
    deltas = []
    for c, a in k.deltas:
        loc = a - t
        if abs(loc - t) < 0.5 * h:
            raise DeltaAtDiagonal(f"K delta_t has a point mass at the cut t={t}")
        if loc < t:
            raise DeltaAtDiagonal(f"K delta_t has a point mass at {loc} inside (-inf, t)")
        deltas.append((complex(c), float(loc)))
    x = g.nodes
    rhs = np.asarray(k.smooth(x[:n] + t), dtype=complex)
    if k.real_valued:
        rhs = rhs.real
    rows = ws.lower_rows(n)
    base_up = np.asarray(k.smooth(x[n:] + t), dtype=complex)
    vals = []
    for sign in (1, -1):
        p = ws.solve(t, rhs, sign)
        up = base_up - sign * (rows @ np.conj(p))
        vals.append(np.concatenate([p, up]))
    return PhiPmPair(t=float(t), grid=g, phi_plus=vals[0], phi_minus=vals[1],
                     plus_deltas=tuple(deltas), minus_deltas=tuple(deltas), method="direct")


def _split_gradient(vals: np.ndarray, n: int, h: float) -> np.ndarray:
    # second-order differences, one-sided at x = t and at the window edges
    out = np.empty_like(vals)
    out[:n] = np.gradient(vals[:n], h, edge_order=2) if n >= 3 else 0.0
    out[n:] = np.gradient(vals[n:], h, edge_order=2)
    return out


def _phi_pm_from_derivatives(bs: BoundarySolution) -> PhiPmPair:
    g = bs.grid
    n = bs.cut
    h = g.spacing
    dphi = _split_gradient(bs.phi_vals, n, h)
    dpsi = _split_gradient(bs.psi_vals, n, h)
    P, S = bs.phi_diag, bs.psi_diag
    D = (np.conj(S) * P).real
    plus = (P.real * dpsi - 1j * S.imag * dphi) / D
    minus = (1j * P.imag * dpsi - S.real * dphi) / D
    return PhiPmPair(t=bs.t, grid=g, phi_plus=plus, phi_minus=minus, method="derivative")


def phi_pm_residual(ws: Workspace, pair: PhiPmPair) -> tuple[float, float]:
    """Relative grid-norm residuals of both equations for the regular parts."""
    g = ws.grid
    n = g.cut(pair.t)
    x = g.nodes
    target = np.asarray(ws.k.smooth(x + pair.t), dtype=complex)
    out = []
    for sign, vals in ((1, pair.phi_plus), (-1, pair.phi_minus)):
        kv = ws.k.apply_at(x, ws.extend(n, vals[:n]), g) if g.n <= 4096 else None
        if kv is None:
            rows = ws.k.block(g, slice(None), slice(0, n))
            kv = rows @ np.conj(vals[:n])
        res = vals + sign * kv - target
        out.append(g.norm(res) / max(g.norm(target), 1e-300))
    return out[0], out[1]


def pde_residual(ws: Workspace, t: float, dt: float, x_lo: float, x_hi: float) -> float:
    """Finite-difference residual of the first-order system in ``(t, x)``.

    Checks ``-d/dt [Psi; i Phi] = J H(t) (i d/dx) [Psi; i Phi]`` by a
    centred difference in ``t`` (cuts ``t - dt`` and ``t + dt``) and in
    ``x``, on cells inside ``[x_lo, x_hi]`` that stay clear of the cuts.
    """
    b0 = boundary_solution(ws, t - dt)
    b1 = boundary_solution(ws, t)
    b2 = boundary_solution(ws, t + dt)
    H = hamiltonian_from_diag(b1.phi_diag, b1.psi_diag, t)
    h = ws.grid.spacing
    x = ws.grid.nodes
    sel = (x > x_lo) & (x < x_hi) & (np.abs(x - t) > 2 * dt + 2 * h)
    dpsi_t = (b2.psi_vals - b0.psi_vals) / (2 * dt)
    dphi_t = (b2.phi_vals - b0.phi_vals) / (2 * dt)
    dpsi_x = np.gradient(b1.psi_vals, h)
    dphi_x = np.gradient(b1.phi_vals, h)
    # rows of J H (i d/dx)[Psi; i Phi]
    r1 = -dpsi_t - (-1j * H.beta * dpsi_x + H.gamma * dphi_x)
    r2 = -1j * dphi_t - (1j * H.alpha * dpsi_x - H.beta * dphi_x)
    scale = max(np.max(np.abs(dpsi_t[sel])), np.max(np.abs(dphi_t[sel])), 1e-300)
    return float(max(np.max(np.abs(r1[sel])), np.max(np.abs(r2[sel]))) / scale)
