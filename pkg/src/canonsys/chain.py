"""Reproducing kernels of the chain of subspaces and the identities behind them.

For ``z`` in the upper half-plane the reproducing vector ``Y`` of the
subspace at ``t`` is ``(a + b)/2`` restricted to ``(t, inf)``, with

    a = e_z + K(1-P_t)e_z - K (1 + K[t])^{-1} P_t K (1-P_t) e_z,
    b = e_z - K(1-P_t)e_z - K (1 - K[t])^{-1} P_t K (1-P_t) e_z,

and ``j(t; z, w) = <Y_w, Y_z> / 2 pi``.  The same kernel follows from
``A~, B~`` in closed form, which gives a two-path check.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .boundary import (
    PhiPmPair, Workspace, boundary_solution, hamiltonian_from_diag, solve_phi_pm,
)
from .errors import (
    CanonsysError, DiagonalSingularity, DomainError, GridMismatch, NearSingular,
    TailNotDecayed,
)
from .evolution import ABState, ab_direct, cell_weights, fourier_upper
from .grid import Grid
from .kernel import apply_K
from .operator import GridPolicy, operator_norm

Y_TAIL_TOL = 1e-4


@dataclass(frozen=True)
class YVector:
    """Reproducing vector at ``(t, z)`` with the ``a`` and ``b`` functions.

    ``samples`` holds ``Y`` on the whole grid (zero below the cut);
    ``a_t`` and ``b_t`` are the values of ``a, b`` at ``x = t`` (left limits).
    """

    t: float
    z: complex
    grid: Grid
    samples: np.ndarray = field(repr=False)
    a_vals: np.ndarray = field(repr=False)
    b_vals: np.ndarray = field(repr=False)
    a_t: complex = 0j
    b_t: complex = 0j
    tail_rate: float | None = None


@dataclass(frozen=True)
class KernelSample:
    t: float
    z: complex
    w: complex
    j_formula: complex
    j_gram: complex
    J_value: complex | None = None

    @property
    def rel_diff(self) -> float:
        return abs(self.j_formula - self.j_gram) / max(abs(self.j_formula), 1e-30)


def _tail_rms(grid: Grid, vals: np.ndarray, width: float = 1.0) -> float:
    sel = grid.nodes > grid.right - width
    return float(np.sqrt(np.mean(np.abs(vals[sel]) ** 2)))


def y_vector(k, u, grid: Grid, t: float, z: complex, ws: Workspace | None = None,
             tail_tol: float = Y_TAIL_TOL) -> YVector:
    """Assemble ``a``, ``b`` and ``Y`` at ``(t, z)``.

    Raises
    ------
    DomainError
        If ``Im z <= 0``.
    NearSingular
        If the norm margin fails at ``t``.
    TailNotDecayed
        If the energy of ``Y`` in the last unit of the window exceeds
        ``tail_tol`` times its total energy.
    """
    z = complex(z)
    if z.imag <= 0:
        raise DomainError("reproducing vectors need Im z > 0")
    if ws is None:
        ws = Workspace(k, u, grid, t)
    g = ws.grid
    n = g.cut(t)
    x = g.nodes
    ez = np.exp(1j * z * x)
    upper = np.where(np.arange(g.n) >= n, ez, 0.0)
    kc = apply_K(ws.k, upper, g)
    rhs = kc[:n]
    ga = ws.solve(t, rhs, 1)
    gb = ws.solve(t, rhs, -1)
    op = ws.op(t)
    rows = ws.lower_rows(n)
    kga = np.concatenate([op.apply(ga), rows @ np.conj(ga)])
    kgb = np.concatenate([op.apply(gb), rows @ np.conj(gb)])
    a = ez + kc - kga
    b = ez - kc - kgb
    y = np.where(np.arange(g.n) >= n, 0.5 * (a + b), 0.0)
    tt = [float(t)]
    # point masses act on e_z exactly: (a - t)+ lies above t iff a >= 2t
    kc_t = ws.k.apply_at(tt, upper, g, side="left")[0] - ws.k.point_masses_at(
        np.array(tt), np.conj(upper), g, "left")[0]
    for c, a_loc in ws.k.deltas:
        if a_loc - t >= t - 1e-12:
            kc_t += c * np.exp(-1j * np.conj(z) * (a_loc - t))
    kga_t = ws.k.apply_at(tt, ws.extend(n, ga), g, side="left")[0]
    kgb_t = ws.k.apply_at(tt, ws.extend(n, gb), g, side="left")[0]
    ezt = cmath.exp(1j * z * t)
    a_t = ezt + kc_t - kga_t
    b_t = ezt - kc_t - kgb_t
    energy = float(np.sum(np.abs(y) ** 2)) * g.spacing
    last = _tail_rms(g, y) ** 2
    if energy > 0 and last > tail_tol * energy:
        raise TailNotDecayed(
            f"Y at (t={t}, z={z}) keeps {last / energy:.3g} of its energy in the last unit "
            f"before x={g.right}; widen the window")
    return YVector(t=float(t), z=z, grid=g, samples=y, a_vals=a, b_vals=b,
                   a_t=complex(a_t), b_t=complex(b_t), tail_rate=ws.k.tail_rate)


def j_formula(ab_z: ABState, ab_w: ABState) -> complex:
    """``(conj(A~(z)) B~(w) - A~(w) conj(B~(z))) / (pi (w - conj z))``.

    Examples
    --------
    >>> a = ABState(0.0, 1j, 1.0, 0.5, "direct")
    >>> round(j_formula(a, a).real, 12)
    0.0
    """
    z, w = complex(ab_z.z), complex(ab_w.z)
    d = w - np.conj(z)
    if abs(d) < 1e-12:
        raise DiagonalSingularity("w is too close to conj(z)")
    num = np.conj(ab_z.A_tilde) * ab_w.B_tilde - ab_w.A_tilde * np.conj(ab_z.B_tilde)
    return complex(num / (math.pi * d))


def j_gram(y_z: YVector, y_w: YVector, tail_rate: float | None = None) -> complex:
    """``<Y_w, Y_z> / 2 pi`` on ``(t, X)`` plus an exponential tail beyond ``X``.

    Within a cell the product is modelled as a multiple of
    ``exp(i (w - conj z) x)``, exact for exponential pieces.  The tail is
    added only for a declared decay rate ``rho`` of ``Y``: the product
    decays like ``exp(-2 rho x)`` and its integral beyond ``X`` is
    extrapolated from the last unit of the window.
    """
    if y_z.grid != y_w.grid or y_z.t != y_w.t:
        raise GridMismatch("reproducing vectors on different grids or cuts")
    g = y_z.grid
    n = g.cut(y_z.t)
    prod = y_w.samples[n:] * np.conj(y_z.samples[n:])
    d = complex(y_w.z) - np.conj(complex(y_z.z))
    total = np.sum(prod) * cell_weights(g, d)
    rate = y_z.tail_rate if tail_rate is None else tail_rate
    if rate:
        sel = g.nodes[n:] > g.right - 1.0
        window = np.sum(prod[sel]) * g.spacing
        total += window / math.expm1(2 * rate)
    return complex(total / (2 * math.pi))


def kernel_sample(ws: Workspace, t: float, z: complex, w: complex) -> KernelSample:
    """Both kernel paths plus ``J = conj(M(z)) M(w) j`` at one point."""
    bs = boundary_solution(ws, t)
    ab_z, ab_w = ab_direct(bs, z), ab_direct(bs, w)
    jf = j_formula(ab_z, ab_w)
    yz = y_vector(ws.k, ws.u, ws.grid, t, z, ws=ws)
    yw = yz if w == z else y_vector(ws.k, ws.u, ws.grid, t, w, ws=ws)
    jg = j_gram(yz, yw)
    J = np.conj(complex(ws.u.M_eval(z))) * complex(ws.u.M_eval(w)) * jf
    return KernelSample(t=float(t), z=complex(z), w=complex(w), j_formula=jf, j_gram=jg,
                        J_value=complex(J))


def model_space_kernel(theta_z: complex, theta_w: complex, z: complex, w: complex) -> complex:
    """``(1 - conj(theta(z)) theta(w)) / (2 pi i (conj z - w))``."""
    return complex((1 - np.conj(theta_z) * theta_w) / (2j * math.pi * (np.conj(z) - w)))


# ---------------------------------------------------------------------------
# projections onto the subspace at t


def project_to_subspace(ws: Workspace, t: float, h: np.ndarray) -> np.ndarray:
    """A member ``f`` of the subspace at ``t`` built from grid data `h`.

    ``f = h - u - K v`` with ``u, v`` supported below ``t`` chosen so that
    ``P_t f = 0`` and ``P_t K f = 0``:
    ``(1 - K[t]^2) v = P_t K h - K[t] P_t h`` and ``u = P_t h - K[t] v``.
    """
    g = ws.grid
    n = g.cut(t)
    op = ws.op(t)
    kh = apply_K(ws.k, h, g)
    rhs = kh[:n] - op.apply(h[:n])
    v = ws.solve(t, ws.solve(t, rhs, -1), 1)
    kv = apply_K(ws.k, ws.extend(n, v), g)
    f = h - kv
    f[:n] = 0.0
    return f


def reproducing_residual(ws: Workspace, t: float, z: complex, f: np.ndarray,
                         y: YVector | None = None) -> float:
    """``|<f, conj Y_z> - (F f)(z)| / |(F f)(z)|`` for ``f`` in the subspace."""
    if y is None:
        y = y_vector(ws.k, ws.u, ws.grid, t, z, ws=ws)
    g = ws.grid
    lhs = fourier_upper(g, f * y.samples * np.exp(-1j * z * g.nodes), t, z)
    rhs = fourier_upper(g, f, t, z)
    return float(abs(lhs - rhs) / max(abs(rhs), 1e-300))


# ---------------------------------------------------------------------------
# identities


def _f_pm(pair: PhiPmPair, which: str, w: complex, conj: bool = False) -> complex:
    """``int_t^inf phi(x) e^{iwx} dx`` (or of ``conj(phi)``) including point masses."""
    vals = pair.phi_plus if which == "+" else pair.phi_minus
    deltas = pair.plus_deltas if which == "+" else pair.minus_deltas
    if conj:
        vals = np.conj(vals)
    out = fourier_upper(pair.grid, vals, pair.t, w)
    for c, loc in deltas:
        out += (np.conj(c) if conj else c) * cmath.exp(1j * w * loc)
    return complex(out)


@dataclass(frozen=True)
class IdentityReport:
    t: float
    z: complex
    residuals: dict
    terms: dict = field(default_factory=dict, repr=False)

    @property
    def worst(self) -> float:
        return max(self.residuals.values()) if self.residuals else 0.0


def _rel(lhs: complex, rhs: complex, scale: float) -> float:
    return float(abs(lhs - rhs) / max(scale, 1e-300))


def identity_residuals(ws: Workspace, t: float, z: complex, pair: PhiPmPair | None = None,
                       y: YVector | None = None, bs=None) -> IdentityReport:
    """Residuals of the identities linking ``a, b``, ``phi+-`` and ``A~, B~``.

    Each residual is divided by the size of the ``phi+-`` term it involves,
    so that perturbing ``phi+-`` by a fraction shows up at that fraction.

    * ``derivative``: weak form of ``(d/dx - iz)(a + b) = k_- phi+ - k_+ phi-``
      tested against ``exp(izx)`` on ``(t, inf)``, where
      ``k_-+ = ((a+b)(t) -+ conj((a-b)(t))) / 2``;
    * ``boundary_minus``: ``k_- = e^{izt} - int conj(phi-) e^{izx}``;
    * ``boundary_plus``: ``k_+ = e^{izt} + int conj(phi+) e^{izx}``;
    * ``fourier_plus``: ``(e^{izt} + F phi+)/2 = (Re Phi A~ - Im Psi B~)/D``;
    * ``fourier_minus``: ``(e^{izt} - F phi-)/2 = (-i Im Phi A~ - i Re Psi B~)/D``
      with ``D = Re(conj(Psi) Phi)`` at ``x = t``.
    """
    z = complex(z)
    if pair is None:
        pair = solve_phi_pm(ws.k, ws.u, ws.grid, t, ws=ws)
    if y is None:
        y = y_vector(ws.k, ws.u, ws.grid, t, z, ws=ws)
    if bs is None:
        bs = boundary_solution(ws, t)
    g = ws.grid
    ezt = cmath.exp(1j * z * t)
    apb, amb = y.a_t + y.b_t, y.a_t - y.b_t
    k_minus = 0.5 * (apb - np.conj(amb))
    k_plus = 0.5 * (apb + np.conj(amb))
    w = z
    fp, fm = _f_pm(pair, "+", w), _f_pm(pair, "-", w)
    # Y carries the factor e^{izx}; integrate cells with that carrier
    fy = fourier_upper(g, y.samples, t, w, carrier=z)
    lhs = -apb * cmath.exp(1j * w * t) - 1j * (z + w) * 2 * fy
    t1, t2 = k_minus * fp, k_plus * fm
    res = {"derivative": _rel(lhs, t1 - t2, max(abs(t1), abs(t2)))}
    cm, cp = _f_pm(pair, "-", z, conj=True), _f_pm(pair, "+", z, conj=True)
    res["boundary_minus"] = _rel(k_minus, ezt - cm, abs(cm))
    res["boundary_plus"] = _rel(k_plus, ezt + cp, abs(cp))
    ab = ab_direct(bs, z)
    P, S = bs.phi_diag, bs.psi_diag
    D = (np.conj(S) * P).real
    lhs_p = 0.5 * (ezt + _f_pm(pair, "+", z))
    rhs_p = (P.real / D) * ab.A_tilde - (S.imag / D) * 1j * (-1j * ab.B_tilde)
    lhs_m = 0.5 * (ezt - _f_pm(pair, "-", z))
    rhs_m = -(P.imag / D) * 1j * ab.A_tilde + (S.real / D) * (-1j * ab.B_tilde)
    res["fourier_plus"] = _rel(lhs_p, rhs_p, 0.5 * abs(_f_pm(pair, "+", z)))
    res["fourier_minus"] = _rel(lhs_m, rhs_m, 0.5 * abs(_f_pm(pair, "-", z)))
    terms = dict(k_minus=k_minus, k_plus=k_plus, F_plus=fp, F_minus=fm, lhs_derivative=lhs,
                 lhs_fourier_plus=lhs_p, rhs_fourier_plus=rhs_p)
    return IdentityReport(t=float(t), z=z, residuals=res, terms=terms)


def perturbed(pair: PhiPmPair, factor: float) -> PhiPmPair:
    """``phi+`` scaled by ``1 + factor`` (point masses included)."""
    return PhiPmPair(t=pair.t, grid=pair.grid, phi_plus=pair.phi_plus * (1 + factor),
                     phi_minus=pair.phi_minus,
                     plus_deltas=tuple((c * (1 + factor), a) for c, a in pair.plus_deltas),
                     minus_deltas=pair.minus_deltas, method=pair.method)


def identity_suite(k, u, grid: Grid, t: float, z_samples: Sequence[complex],
                   ws: Workspace | None = None) -> list[IdentityReport]:
    if ws is None:
        ws = Workspace(k, u, grid, t)
    pair = solve_phi_pm(k, u, ws.grid, t, ws=ws)
    bs = boundary_solution(ws, t)
    return [identity_residuals(ws, t, z, pair=pair, bs=bs) for z in z_samples]


# ---------------------------------------------------------------------------
# t0


@dataclass
class T0Report:
    t: list
    norm: list
    j_diag: list
    y_norm: list
    errors: dict
    t0_estimate: float
    decay: str
    reason: str


def t0_diagnostics(k, u, policy: GridPolicy, t_values: Sequence[float], z_probe: complex = 1j,
                   eps_chain: float = 1e-6, ws: Workspace | None = None) -> T0Report:
    """Norm, ``j(t; z, z)`` and ``||Y_z^t||`` along a scan, and an estimate of ``t0``.

    ``t0`` is the first ``t`` with ``j < eps_chain * j(t_first)``; when the
    scan instead runs into ``||K[t]|| = 1`` it is the last regular ``t``
    before that gap; otherwise it is ``+inf``.  The decay condition at
    ``t0`` is reported as satisfied when ``||Y||`` has dropped below
    ``1e-3`` of its initial value there, and as failing otherwise.
    """
    t_values = [float(t) for t in t_values]
    if ws is None:
        ws = Workspace.for_range(k, u, policy, min(t_values), max(t_values))
    norms, jd, yn, errors = [], [], [], {}
    for t in t_values:
        op = ws.op(t)
        nv = operator_norm(op) if op.n else 0.0
        norms.append(nv)
        try:
            if nv > 1 - ws.margin:
                raise NearSingular(f"||K[t]|| = {nv:.6g}")
            bs = boundary_solution(ws, t)
            ab = ab_direct(bs, z_probe)
            jd.append(j_formula(ab, ab).real)
            y = y_vector(k, u, ws.grid, t, z_probe, ws=ws)
            yn.append(math.sqrt(max(2 * math.pi * j_gram(y, y).real, 0.0)))
        except CanonsysError as exc:
            jd.append(math.nan)
            yn.append(math.nan)
            errors[t] = f"{type(exc).__name__}: {exc}"
    valid = [i for i, v in enumerate(jd) if math.isfinite(v)]
    t0, reason = math.inf, "j stays above threshold over the scan"
    if valid:
        j0 = jd[valid[0]]
        small = [i for i in valid if jd[i] < eps_chain * j0]
        if small:
            t0, reason = t_values[small[0]], "j below threshold"
        else:
            last = valid[-1]
            if last + 1 < len(t_values) and all(not math.isfinite(jd[i]) for i in range(last + 1, len(t_values))):
                t0, reason = t_values[last], "compression reaches norm 1 beyond this t"
    if not math.isfinite(t0):
        decay = "t0 beyond scan"
    else:
        i0 = t_values.index(t0)
        y0 = yn[valid[0]]
        decay = "satisfied" if yn[i0] <= 1e-3 * y0 else "fails"
    return T0Report(t=t_values, norm=norms, j_diag=jd, y_norm=yn, errors=errors,
                    t0_estimate=t0, decay=decay, reason=reason)
