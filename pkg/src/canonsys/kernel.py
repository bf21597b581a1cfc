"""The kernel ``k`` of the conjugation ``(Kf)(x) = int k(x+y) conj(f(y)) dy``.

A kernel is stored as finitely many point masses plus a regular part.  On
a cell-centred grid the operator is applied by product integration: each
cell value of ``f`` is integrated exactly against the regular part using
its antiderivative, and point masses act as exact index reflections.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import signal

from .errors import DeltaOffGrid, GridMismatch, NoClosedForm, NotInner, StripTooNarrow
from .grid import Grid, lattice_index
from .unimodular import UnimodularFunction, j0_integral


def _zero(x):
    return np.zeros_like(np.asarray(x, dtype=float))


@dataclass(frozen=True, eq=False)
class KernelRep:
    """Point masses ``sum c_i delta(x - a_i)`` plus a regular part.

    Attributes
    ----------
    deltas : tuple of (complex, float)
        Coefficients and locations of the point masses.
    smooth : callable
        Regular part of the kernel (vectorized).
    smooth_integral : callable
        Antiderivative of `smooth` normalized to vanish at ``-inf``.
    abs_tail : callable
        Upper bound for ``int_{-inf}^x |smooth|``, used to size the
        left truncation of the grid.
    s_min : float
        The regular part vanishes below this point.
    growth : str
        Short description of the behaviour at ``+inf``.
    real_valued : bool
        True when the kernel is real, i.e. ``u`` is symmetric.
    tail_rate : float or None
        Exponential decay rate of reproducing vectors at ``+inf`` when it
        is known for this kernel family.
    """

    deltas: tuple
    smooth: Callable = field(repr=False)
    smooth_integral: Callable = field(repr=False)
    abs_tail: Callable = field(repr=False)
    s_min: float = -math.inf
    growth: str = "bounded"
    real_valued: bool = True
    tail_rate: float | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def dtype(self):
        return float if self.real_valued else complex

    def _clean(self, v):
        v = np.asarray(v)
        return v.real.astype(float) if self.real_valued else v.astype(complex)

    def delta_indices(self, grid: Grid):
        """Hankel offsets ``s = i + j`` at which each point mass acts."""
        out = []
        two_l = 2 * round(grid.left / grid.spacing)
        for c, a in self.deltas:
            ka = lattice_index(a, grid.spacing, "delta location", DeltaOffGrid)
            out.append((c, ka - two_l - 1))
        return out

    def hankel(self, grid: Grid) -> np.ndarray:
        """Array ``H`` with ``(Kf)_i = sum_j H[i+j] conj(f_j)`` on `grid`."""
        key = ("hankel", grid)
        if key not in self._cache:
            n, h = grid.n, grid.spacing
            pts = 2 * grid.left + (np.arange(2 * n) + 0.5) * h
            kint = np.asarray(self.smooth_integral(pts))
            H = self._clean(np.diff(kint)).astype(complex if not self.real_valued else float)
            for c, s in self.delta_indices(grid):
                if 0 <= s < H.size:
                    H[s] += c.real if self.real_valued else c
            H.setflags(write=False)
            self._cache[key] = H
        return self._cache[key]

    def interval_integrals(self, grid: Grid, m_stop: int) -> np.ndarray:
        """``I[m] = int Kint`` over ``[2L + m h, 2L + (m+1) h]`` for ``m < m_stop``.

        Composite 12-node Gauss-Legendre; intervals where halving the
        sub-intervals still changes the value are refined further, which
        keeps chirped antiderivatives resolved.
        """
        key = ("intervals", grid)
        got = self._cache.get(key)
        if got is None or got.size < m_stop:
            h = grid.spacing
            lo = 2 * grid.left + np.arange(m_stop) * h
            got = _composite_integrals(self.smooth_integral, lo, h)
            got = self._clean(got)
            got.setflags(write=False)
            self._cache[key] = got
        return got[:m_stop]

    def cell_hankel(self, grid: Grid, m_stop: int) -> np.ndarray:
        """Cell-averaged counterpart of :meth:`hankel` for offsets ``< m_stop``.

        ``mean over x in cell i of (K f)(x) = sum_j Hc[i+j] conj(f_j)`` for
        cellwise constant ``f``.
        """
        I = self.interval_integrals(grid, m_stop + 1)
        Hc = (np.diff(I) / grid.spacing).astype(complex if not self.real_valued else float)
        for c, s in self.delta_indices(grid):
            if 0 <= s < Hc.size:
                Hc[s] += c.real if self.real_valued else c
        return Hc

    def block(self, grid: Grid, rows: slice | np.ndarray, cols: slice | np.ndarray) -> np.ndarray:
        """Dense sub-block ``M[i, j] = H[i + j]`` of the grid operator."""
        H = self.hankel(grid)
        r = np.arange(grid.n)[rows]
        c = np.arange(grid.n)[cols]
        return H[r[:, None] + c[None, :]]

    def apply_at(self, points, f: np.ndarray, grid: Grid, side: str = "right") -> np.ndarray:
        """Evaluate ``(Kf)(x)`` at arbitrary points.

        For a point mass at ``a`` the value ``f(a - x)`` is read from the
        cell containing ``a - x``; when ``a - x`` is a cell edge the
        one-sided limit in ``x`` selected by `side` decides the cell.
        """
        x = np.atleast_1d(np.asarray(points, dtype=float))
        f = np.asarray(f)
        if f.shape != (grid.n,):
            raise GridMismatch("function samples do not match the grid")
        fc = np.conj(f)
        e = grid.edges
        kint = self.smooth_integral(x[:, None] + e[None, :])
        out = (self._clean(np.diff(kint, axis=1)) @ fc).astype(complex)
        return out + self.point_masses_at(x, fc, grid, side)

    def kint_lattice(self, grid: Grid, half: bool) -> np.ndarray:
        """Cached ``Kint(2L + (m + 1/2 * half) h)`` for ``m = 0 .. 2n``."""
        key = ("kint", grid, bool(half))
        if key not in self._cache:
            pts = 2 * grid.left + (np.arange(2 * grid.n + 1) + 0.5 * half) * grid.spacing
            v = self._clean(self.smooth_integral(pts))
            v.setflags(write=False)
            self._cache[key] = v
        return self._cache[key]

    def point_masses_at(self, x: np.ndarray, fc: np.ndarray, grid: Grid,
                        side: str = "right") -> np.ndarray:
        """Point-mass part of ``(Kf)(x)`` given ``fc = conj(f)`` on the cells."""
        out = np.zeros(x.shape, dtype=complex)
        h = grid.spacing
        for c, a in self.deltas:
            y = (a - x - grid.left) / h
            j = np.floor(y).astype(int)
            on_edge = np.abs(y - np.round(y)) < 1e-9
            if side == "right":
                j = np.where(on_edge, np.round(y).astype(int) - 1, j)
            else:
                j = np.where(on_edge, np.round(y).astype(int), j)
            ok = (j >= 0) & (j < grid.n)
            out[ok] += c * fc[j[ok]]
        return out


_GL_X, _GL_W = np.polynomial.legendre.leggauss(12)


def _gl(fn, lo: np.ndarray, h: float, q: int) -> np.ndarray:
    sub = h / q
    starts = lo[:, None] + sub * np.arange(q)[None, :]
    pts = starts[:, :, None] + 0.5 * sub * (_GL_X + 1)
    vals = np.asarray(fn(pts.ravel())).reshape(pts.shape)
    return 0.5 * sub * (vals @ _GL_W).sum(axis=1)


def _composite_integrals(fn, lo: np.ndarray, h: float, tol: float = 1e-14,
                         max_q: int = 256) -> np.ndarray:
    """Integrals of `fn` over ``[lo, lo + h]`` with per-interval refinement."""
    cur = _gl(fn, lo, h, 1)
    active = np.arange(lo.size)
    q = 2
    while active.size and q <= max_q:
        nxt = _gl(fn, lo[active], h, q)
        scale = tol * max(h, 1.0) * np.maximum(1.0, np.abs(nxt))
        bad = np.abs(nxt - cur[active]) > scale
        cur[active] = nxt
        active = active[bad]
        q *= 2
    return cur


def apply_K(k: KernelRep, f: np.ndarray, grid: Grid) -> np.ndarray:
    """Apply the conjugation to cell samples of `f`, returning cell samples.

    Values of `f` outside the grid are taken to be zero.

    Examples
    --------
    >>> from canonsys.unimodular import make_function
    >>> g = Grid(-1.0, 3.0, 0.25)
    >>> k = kernel_of(make_function("pw", [1.0]))
    >>> f = ((g.nodes > 0) & (g.nodes < 1)).astype(float)
    >>> np.allclose(apply_K(k, f, g), (g.nodes > 1) & (g.nodes < 2))
    True
    """
    f = np.asarray(f)
    if f.shape != (grid.n,):
        raise GridMismatch("function samples do not match the grid")
    H = k.hankel(grid)
    n = grid.n
    idx = np.arange(n)
    # dense Hankel product; rows are assembled in slabs to bound memory
    out = np.empty(n, dtype=complex)
    fc = np.conj(f)
    step = max(1, 4_000_000 // max(n, 1))
    for r0 in range(0, n, step):
        r = idx[r0:r0 + step]
        out[r0:r0 + step] = H[r[:, None] + idx[None, :]] @ fc
    return out


# ---------------------------------------------------------------------------
# closed forms


def _exp_poly_parts(zeros: Sequence[complex]):
    """Partial fractions of ``prod (z - w)/(z - conj w)``.

    Returns the constant term and a list of ``(coef, power, lam)`` with the
    kernel term ``coef * x**power * exp(-lam x)`` on ``x > 0``.
    """
    zeros = np.asarray(zeros, dtype=complex)
    b = np.poly(zeros)
    a = np.poly(np.conj(zeros))
    r, p, kpoly = signal.residue(b, a)
    const = complex(kpoly[0]) if len(kpoly) else 0.0
    terms = []
    m = 0
    for i in range(len(p)):
        m = m + 1 if i > 0 and abs(p[i] - p[i - 1]) < 1e-6 else 1
        # 1/(z - p)^m  <->  -i (-i x)^{m-1}/(m-1)! e^{-ipx} 1_{x>0}
        coef = -1j * r[i] * (-1j) ** (m - 1) / math.factorial(m - 1)
        terms.append((complex(coef), m - 1, complex(1j * p[i])))
    return const, terms


def _exp_poly_funcs(terms, offset: float, scale: complex):
    def smooth(x):
        y = np.asarray(x, dtype=float) - offset
        out = np.zeros(y.shape, dtype=complex)
        pos = y > 0
        yp = y[pos]
        for c, m, lam in terms:
            out[pos] += c * yp ** m * np.exp(-lam * yp)
        return scale * out

    def integral(x):
        y = np.asarray(x, dtype=float) - offset
        out = np.zeros(y.shape, dtype=complex)
        pos = y > 0
        yp = y[pos]
        for c, m, lam in terms:
            ly = lam * yp
            partial = np.zeros_like(ly)
            term = np.ones_like(ly)
            for j in range(m + 1):
                partial = partial + term
                term = term * ly / (j + 1)
            out[pos] += c * math.factorial(m) / lam ** (m + 1) * (1.0 - np.exp(-ly) * partial)
        return scale * out

    bound = sum(abs(c) * math.factorial(m) / lam.real ** (m + 1) for c, m, lam in terms)

    def abs_tail(x):
        y = np.asarray(x, dtype=float) - offset
        return np.where(y > 0, abs(scale) * bound, 0.0)

    return smooth, integral, abs_tail


def kernel_of(u: UnimodularFunction) -> KernelRep:
    """Closed-form kernel of a registry function.

    Raises
    ------
    NoClosedForm
        For products mixing the Gamma ratio with Blaschke factors, or
        carrying more than one Gamma factor.
    """
    fac = u.structure
    offset = 2.0 * fac.shift
    sgn = float(fac.sign)
    real = bool(u.symmetric)
    if fac.gamma_power > 1 or (fac.gamma_power and fac.zeros):
        raise NoClosedForm("no closed-form kernel for this product")
    if fac.gamma_power == 1:
        def smooth(x):
            e = np.exp(0.5 * (np.asarray(x, dtype=float) - offset))
            return sgn * e * _j0(2 * e)

        def integral(x):
            e = np.exp(0.5 * (np.asarray(x, dtype=float) - offset))
            return sgn * j0_integral(2 * e)

        def abs_tail(x):
            return 2.0 * np.exp(0.5 * (np.asarray(x, dtype=float) - offset))

        return KernelRep(
            deltas=(), smooth=smooth, smooth_integral=integral, abs_tail=abs_tail,
            s_min=-math.inf, growth="oscillating, envelope e^{x/4}", real_valued=True,
            tail_rate=0.25,
        )
    if not fac.zeros:
        return KernelRep(
            deltas=((complex(sgn), offset),), smooth=_zero, smooth_integral=_zero,
            abs_tail=_zero, s_min=math.inf, growth="none", real_valued=True,
            tail_rate=None,
        )
    const, terms = _exp_poly_parts(fac.zeros)
    smooth, integral, abs_tail = _exp_poly_funcs(terms, offset, sgn)
    deltas = ((complex(sgn * const), offset),)
    rate = min(lam.real for _, _, lam in terms)
    return KernelRep(
        deltas=deltas, smooth=smooth, smooth_integral=integral, abs_tail=abs_tail,
        s_min=offset, growth="exponential decay", real_valued=real, tail_rate=rate,
    )


def _j0(x):
    from scipy.special import j0
    return j0(x)


# ---------------------------------------------------------------------------
# numerical inverse transform


def numeric_kernel(u: UnimodularFunction, c: float, window, n: int,
                   n_out: int = 401, period: float | None = None, n_fit: int = 4):
    """Regular part of ``k`` by inverse Fourier transform on ``Im z = c``.

    The integral ``(1/2 pi) int u(z) e^{-izx} dz`` is computed by the
    trapezoid rule with `n` samples.  The point masses of `u` and the
    leading terms of its large-``|z|`` expansion around each of them are
    removed first and their transforms added back exactly, so the sampled
    remainder decays fast.

    Parameters
    ----------
    u : UnimodularFunction
        Must be inner.
    c : float
        Height of the integration line, ``c > 0``.
    window : (float, float)
        Interval on which the regular part is returned.
    n : int
        Number of quadrature samples.
    period : float, optional
        Aliasing period ``2 pi / ds``; defaults to ``max(40, 4 * width)``.

    Returns
    -------
    x, values : ndarray
    """
    if not u.inner:
        raise NotInner("numeric_kernel needs an inner function")
    if not c > 0:
        raise StripTooNarrow("the line Im z = c must lie in the upper half-plane")
    lo, hi = float(window[0]), float(window[1])
    k = kernel_of(u)
    P = float(period) if period else max(40.0, 4.0 * (hi - lo))
    ds = 2 * math.pi / P
    s = (np.arange(n) - n // 2) * ds
    z = s + 1j * c
    r = np.asarray(u.eval_cont(z), dtype=complex)
    for coef, a in k.deltas:
        r = r - coef * np.exp(1j * a * z)
    # fit the slowly decaying tail by e^{iaz}/(z + i beta)^m,
    # whose inverse transforms are exponential polynomials on x > a
    beta = 1.0
    locs = [a for _, a in k.deltas] or [0.0]
    basis = []
    for a in locs:
        for m in range(1, n_fit + 1):
            basis.append((a, m, np.exp(1j * a * z) / (z + 1j * beta) ** m))
    far = np.abs(s) >= np.abs(s).max() / 8
    if basis:
        Bm = np.stack([b for *_, b in basis], axis=1)
        coefs, *_ = np.linalg.lstsq(Bm[far], r[far], rcond=None)
        r = r - Bm @ coefs
    x = np.linspace(lo, hi, n_out)
    # trapezoid on the line: (1/2pi) sum r(z) e^{-izx} ds
    phase = np.exp(-1j * np.outer(x, z))
    vals = (phase @ r) * ds / (2 * math.pi)
    for (a, m, _), cf in zip(basis, coefs if basis else []):
        y = x - a
        pos = y > 0
        term = np.zeros_like(vals)
        term[pos] = -1j * (-1j * y[pos]) ** (m - 1) / math.factorial(m - 1) * np.exp(-beta * y[pos])
        vals = vals + cf * term
    if k.real_valued:
        vals = vals.real
    return x, vals
