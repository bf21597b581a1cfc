"""The functions A~(t, z), B~(t, z), their evolution in t, and theta, E.

``A~`` and ``B~`` are half-line Fourier transforms of the boundary
solutions,

    A~(t, z)    = (-iz/2) F[(1 - P_t) Psi](z),
    -i B~(t, z) = (-iz/2) F[(1 - P_t) Phi](z),

and in ``t`` they solve ``-d/dt [A~; B~] = z J H(t) [A~; B~]``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .boundary import BoundarySolution, HamiltonianSample
from .errors import (
    DivisionByZero, OscillationUnderResolved, StepSizeTooCoarse, TailNotDecayed,
)
from .grid import Grid

OSCILLATION_BUDGET = 0.1
TAIL_TOL = 1e-4
ODE_BUDGET = 1e-4


@dataclass(frozen=True)
class ABState:
    t: float
    z: complex
    A_tilde: complex
    B_tilde: complex
    path: str
    err: float = math.nan


@dataclass(frozen=True)
class EntireData:
    t: float
    z: complex
    A: complex
    B: complex
    E: complex
    theta: complex
    M_eval: Callable | None = None


def cell_weights(grid: Grid, z: complex) -> complex:
    """``int`` of ``exp(i z (x - x_j))`` over one cell, i.e. ``h sinc(z h / 2)``."""
    w = 0.5 * z * grid.spacing
    if abs(w) < 1e-8:
        return complex(grid.spacing * (1 - w * w / 6))
    return complex(grid.spacing * cmath.sin(w) / w)


def check_oscillation(grid: Grid, z: complex, budget: float = OSCILLATION_BUDGET):
    if grid.spacing * abs(z) > budget:
        raise OscillationUnderResolved(
            f"h|z| = {grid.spacing * abs(z):.3g} exceeds {budget}; refine the grid")


def fourier_upper(grid: Grid, vals: np.ndarray, t: float, z: complex,
                  carrier: complex = 0.0) -> complex:
    """``int_t^X f(x) exp(izx) dx`` from cell samples `vals`.

    Within a cell ``f`` is modelled as ``f_j exp(i carrier (x - x_j))`` and
    integrated exactly against the exponential; ``carrier = 0`` is the
    cellwise constant model.  Use the carrier of an ``exp(i w x)`` factor in
    ``f`` to keep such integrands exact.
    """
    n = grid.cut(t)
    x = grid.nodes[n:]
    return complex(np.sum(vals[n:] * np.exp(1j * z * x)) * cell_weights(grid, z + carrier))


def fourier_lower(grid: Grid, vals: np.ndarray, t: float, z: complex) -> complex:
    """``int_L^t f(x) exp(izx) dx`` on the cells below `t`."""
    n = grid.cut(t)
    x = grid.nodes[:n]
    return complex(np.sum(vals[:n] * np.exp(1j * z * x)) * cell_weights(grid, z))


def tail_mean(grid: Grid, vals: np.ndarray, tail: complex, width: float = 1.0) -> float:
    """``|mean of (f - tail)|`` over the last `width` of the window.

    Oscillating remainders (chirps) are judged by their local mean, which is
    what enters the Fourier integrals beyond the window.
    """
    sel = grid.nodes > grid.right - width
    return float(abs(np.mean(vals[sel] - tail)))


def tail_defect(grid: Grid, vals: np.ndarray, tail: complex, width: float = 1.0) -> float:
    """:func:`tail_mean` relative to ``max(1, max |f|)`` on the grid."""
    return tail_mean(grid, vals, tail, width) / max(1.0, float(np.max(np.abs(vals))))


def _half_transform(bs: BoundarySolution, vals, tail, z):
    g = bs.grid
    if z == 0:
        return complex(0.5 * tail)
    s = fourier_upper(g, vals, bs.t, z)
    return complex(-0.5j * z * s + 0.5 * tail * cmath.exp(1j * z * g.right))


def ab_direct(bs: BoundarySolution, z: complex, tail_tol: float = TAIL_TOL) -> ABState:
    """``A~(t, z)`` and ``B~(t, z)`` from the half-line transforms.

    The constant limits ``1 +- u(0)`` of ``Psi`` and ``Phi`` beyond the
    window are integrated analytically.

    Raises
    ------
    DomainError
        For ``Im z < 0``.
    OscillationUnderResolved
        If ``h |z| > 0.1``.
    TailNotDecayed
        If the remainder near the right edge has not decayed (local mean
        over the last unit, relative to the size of the solution).
    """
    from .errors import DomainError
    z = complex(z)
    if z.imag < 0:
        raise DomainError("the direct transforms need Im z >= 0")
    check_oscillation(bs.grid, z)
    for name, vals, tail in (("Psi", bs.psi_cells, bs.tail_psi), ("Phi", bs.phi_cells, bs.tail_phi)):
        r = tail_defect(bs.grid, vals, tail)
        if r > tail_tol:
            raise TailNotDecayed(
                f"{name} differs from its limit by {r:.3g} near x={bs.grid.right}; widen the window")
    a = _half_transform(bs, bs.psi_cells, bs.tail_psi, z)
    mib = _half_transform(bs, bs.phi_cells, bs.tail_phi, z)
    return ABState(t=bs.t, z=z, A_tilde=a, B_tilde=1j * mib, path="direct")


class HamiltonianPath:
    """Piecewise linear ``H(t)`` through the samples (exact at sample points)."""

    def __init__(self, samples: Sequence[HamiltonianSample]):
        samples = sorted(samples, key=lambda s: s.t)
        self.t = np.array([s.t for s in samples])
        self.alpha = np.array([s.alpha for s in samples])
        self.beta = np.array([s.beta for s in samples])
        self.gamma = np.array([s.gamma for s in samples])
        if self.t.size == 0:
            raise ValueError("no Hamiltonian samples")
        d = np.diff(self.t)
        self.spacing = float(d.min()) if d.size else math.inf

    def __call__(self, t: float):
        if t < self.t[0] - 1e-12 or t > self.t[-1] + 1e-12:
            raise ValueError(f"t={t} outside the sampled range [{self.t[0]}, {self.t[-1]}]")
        return (np.interp(t, self.t, self.alpha), np.interp(t, self.t, self.beta),
                np.interp(t, self.t, self.gamma))


def _rk4(path: HamiltonianPath, y: np.ndarray, t0: float, t1: float, z: complex, n: int):
    dt = (t1 - t0) / n

    def f(t, y):
        a, b, c = path(t)
        return z * np.array([b * y[0] + c * y[1], -(a * y[0] + b * y[1])])

    t = t0
    for i in range(n):
        t = t0 + i * dt
        k1 = f(t, y)
        k2 = f(t + dt / 2, y + dt / 2 * k1)
        k3 = f(t + dt / 2, y + dt / 2 * k2)
        k4 = f(t + dt, y + dt * k3)
        y = y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def ab_ode(H_samples, init: ABState, t_target: float, z: complex | None = None,
           dt: float | None = None, budget: float = ODE_BUDGET) -> ABState:
    """Integrate the canonical system from `init` to `t_target`.

    Classical RK4.  The default step is twice the sample spacing so that
    the half steps land on samples.  A Richardson estimate against a run
    with twice the step is returned in ``err``.

    Raises
    ------
    StepSizeTooCoarse
        If the error estimate exceeds ``budget`` relative to the result.
    """
    z = init.z if z is None else complex(z)
    path = H_samples if isinstance(H_samples, HamiltonianPath) else HamiltonianPath(H_samples)
    span = float(t_target) - init.t
    if span == 0:
        return init
    if dt is None:
        dt = 2 * path.spacing if math.isfinite(path.spacing) else abs(span)
    n = max(1, int(round(abs(span) / dt)))
    y0 = np.array([init.A_tilde, init.B_tilde], dtype=complex)
    y = _rk4(path, y0, init.t, t_target, z, n)
    err = math.nan
    if n % 2 == 0:
        yc = _rk4(path, y0, init.t, t_target, z, n // 2)
        err = float(np.max(np.abs(y - yc)) / 15 / max(np.max(np.abs(y)), 1e-300))
        if err > budget:
            raise StepSizeTooCoarse(f"estimated relative error {err:.3g} exceeds {budget}")
    return ABState(t=float(t_target), z=z, A_tilde=complex(y[0]), B_tilde=complex(y[1]),
                   path="ode", err=err)


def propagator(H_samples, t0: float, t1: float, z: complex, dt: float | None = None) -> np.ndarray:
    """Two-by-two transfer matrix of the canonical system from `t0` to `t1`."""
    path = H_samples if isinstance(H_samples, HamiltonianPath) else HamiltonianPath(H_samples)
    if t0 == t1:
        return np.eye(2, dtype=complex)
    if dt is None:
        dt = 2 * path.spacing if math.isfinite(path.spacing) else abs(t1 - t0)
    n = max(1, int(round(abs(t1 - t0) / dt)))
    cols = [_rk4(path, np.array(e, dtype=complex), t0, t1, complex(z), n)
            for e in ((1, 0), (0, 1))]
    return np.column_stack(cols)


def amplification(P: np.ndarray, y0: np.ndarray) -> float:
    """``||P|| ||y0|| / ||P y0||``: growth of relative errors along the flow."""
    y0 = np.asarray(y0, dtype=complex)
    return float(np.linalg.norm(P, 2) * np.linalg.norm(y0) / max(np.linalg.norm(P @ y0), 1e-300))


def ab_ode_anchored(H_samples, lower: ABState, upper: ABState, targets: Sequence[float],
                    budget: float = ODE_BUDGET):
    """Evolve to each target from whichever end state is better conditioned.

    The direct values at both ends of the sampled range are given; for each
    target the integration starts at the end whose transfer matrix amplifies
    relative errors least.  Returns ``(states, anchors)``.
    """
    path = H_samples if isinstance(H_samples, HamiltonianPath) else HamiltonianPath(H_samples)
    states, anchors = [], []
    for tt in targets:
        best = None
        for ini in (lower, upper):
            P = propagator(path, ini.t, tt, ini.z)
            c = amplification(P, [ini.A_tilde, ini.B_tilde])
            if best is None or c < best[0]:
                best = (c, ini)
        states.append(ab_ode(path, best[1], tt, budget=budget))
        anchors.append(best[1].t)
    return states, anchors


def theta_and_E(ab: ABState, M_eval: Callable) -> EntireData:
    """``theta = (A~ + iB~)/(A~ - iB~)`` and ``A, B, E`` scaled by ``M``."""
    den = ab.A_tilde - 1j * ab.B_tilde
    if den == 0 or abs(den) < 1e-14 * max(abs(ab.A_tilde), abs(ab.B_tilde)):
        raise DivisionByZero(f"E vanishes at z={ab.z}")
    theta = (ab.A_tilde + 1j * ab.B_tilde) / den
    m = complex(M_eval(ab.z))
    A, B = m * ab.A_tilde, m * ab.B_tilde
    return EntireData(t=ab.t, z=ab.z, A=A, B=B, E=A - 1j * B, theta=theta, M_eval=M_eval)


def functional_equation_residual(bs: BoundarySolution, x_samples: Sequence[float],
                                 tail_tol: float = TAIL_TOL) -> float:
    """``max |A~ - u conj(A~)| + |B~ - u conj(B~)|`` over real samples, normalized."""
    worst = 0.0
    for x in x_samples:
        ab = ab_direct(bs, complex(float(x), 0.0), tail_tol=tail_tol)
        ux = complex(bs.u.eval_real(float(x)))
        r = abs(ab.A_tilde - ux * np.conj(ab.A_tilde)) + abs(ab.B_tilde - ux * np.conj(ab.B_tilde))
        worst = max(worst, r / max(abs(ab.A_tilde), abs(ab.B_tilde), 1e-300))
    return float(worst)
