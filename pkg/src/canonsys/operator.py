"""Compressions ``K[t] = P_t K P_t`` on a truncated grid and their solves.

The equation ``x + s K[t] x = b`` is antilinear; writing ``x = p + iq`` and
``M = R + iI`` it becomes the real symmetric system

    [[1 + sR, sI], [sI, 1 - sR]] [p; q] = [Re b; Im b],

which is positive definite exactly when ``||K[t]|| < 1``.  Unknowns are
ordered cell by cell, so the system for any smaller ``t'`` is a leading
principal block and one Cholesky factor serves a whole scan.  For real
kernels the system splits into ``(1 + sR) p = Re b`` and
``(1 - sR) q = Im b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse.linalg as ssl

from .errors import GridMismatch, NearSingular, ResidualCheckFailed
from .grid import Grid, lattice_index
from .kernel import KernelRep

DEFAULT_SPACING = 2.0 ** -7
DEFAULT_RIGHT_MARGIN = 16.0
MAX_LEFT_MARGIN = 40.0
DEFAULT_TAIL_TOL = 1e-8
DEFAULT_NORM_MARGIN = 1e-3
SOLVE_RESIDUAL_TOL = 1e-10
_DENSE_NORM_SIZE = 600


@dataclass(frozen=True)
class GridPolicy:
    """How grids are sized for a given kernel and range of ``t``.

    Attributes
    ----------
    spacing : float
        Lattice spacing ``h``.
    right_margin : float
        Distance ``X - t_max`` of the right edge.
    left_margin : float or None
        ``t_max - L``; ``None`` picks the smallest margin meeting
        `tail_tol`, capped at ``MAX_LEFT_MARGIN``.
    tail_tol : float
        Bound on the estimated error from truncating at ``L``.
    norm_margin : float
        Solves require ``||K[t]|| <= 1 - norm_margin``.
    """

    spacing: float = DEFAULT_SPACING
    right_margin: float = DEFAULT_RIGHT_MARGIN
    left_margin: float | None = None
    tail_tol: float = DEFAULT_TAIL_TOL
    norm_margin: float = DEFAULT_NORM_MARGIN

    def snap(self, x: float) -> float:
        """Round a length up to the lattice."""
        h = self.spacing
        return math.ceil(x / h - 1e-9) * h

    def auto_left_margin(self, k: KernelRep, t_max: float) -> float:
        """Smallest lattice margin ``m`` with an acceptable truncation at ``t_max - m``.

        The neglected coupling is estimated by the product of the kernel
        mass below ``t + L`` (what the cut removes) and the size of the
        right-hand sides at ``L``, both bounded by ``abs_tail(t + L)``.
        Point masses additionally require ``L <= a - t``.
        """
        h = self.spacing
        need = 1.0
        for _, a in k.deltas:
            need = max(need, t_max - (a - t_max))
        m = self.snap(need)
        while m < MAX_LEFT_MARGIN:
            tail = float(k.abs_tail(np.array([2 * t_max - m]))[0])
            if tail * tail <= self.tail_tol:
                break
            m = self.snap(m + 0.25)
        return min(m, self.snap(MAX_LEFT_MARGIN))

    def grid_for(self, k: KernelRep, t_min: float, t_max: float) -> Grid:
        """Grid covering every ``t`` in ``[t_min, t_max]``."""
        h = self.spacing
        lattice_index(t_min, h, "t")
        lattice_index(t_max, h, "t")
        m = self.left_margin if self.left_margin is not None else self.auto_left_margin(k, t_max)
        left = min(t_max - self.snap(m), t_min - h)
        right = t_max + self.snap(self.right_margin)
        return Grid(left, right, h)


class CompressedOperator:
    """The compression ``K[t]`` as a matrix on the cells below ``t``.

    ``M[i, j]`` is the contribution of ``conj(f_j)`` to ``(Kf)_i``; it
    already contains the cell widths, so it is the matrix of the operator
    in the orthogonal basis of cell indicators.

    Instances built by :meth:`leading` share factorizations with their
    parent.
    """

    def __init__(self, matrix_or_kernel, grid: Grid | None = None, t: float | None = None,
                 _shared: dict | None = None, _n: int | None = None):
        if isinstance(matrix_or_kernel, KernelRep):
            if grid is None or t is None:
                raise GridMismatch("a kernel needs a grid and t")
            self.kernel = matrix_or_kernel
            self.grid = grid
            self.t = float(t)
            self.t_index = grid.cut(t) if _n is None else _n
            self.real = self.kernel.real_valued
        else:
            M = np.asarray(matrix_or_kernel)
            if M.ndim != 2 or M.shape[0] != M.shape[1]:
                raise GridMismatch("matrix must be square")
            self.kernel = None
            self.grid = grid
            self.t = t
            self.t_index = M.shape[0] if _n is None else _n
            self.real = not np.iscomplexobj(M) or not np.any(M.imag)
            if _shared is None:
                _shared = {"M": M.real.astype(float) if self.real else M.astype(complex)}
        if _shared is None:
            _shared = {}
        _shared.setdefault("factors", {})
        _shared.setdefault("norms", {})
        _shared.setdefault("base_n", self.t_index)
        self._shared = _shared
        self.norm_cached: float | None = _shared["norms"].get(self.t_index)

    # -- assembly ----------------------------------------------------------
    @property
    def n(self) -> int:
        return self.t_index

    @property
    def M(self) -> np.ndarray:
        base = self._shared.get("M")
        if base is None:
            nb = self._shared["base_n"]
            base = self.kernel.block(self.grid, slice(0, nb), slice(0, nb))
            self._shared["M"] = base
        return base[: self.n, : self.n]

    def leading(self, t: float) -> "CompressedOperator":
        """The compression at a smaller ``t`` sharing this operator's factors."""
        if self.kernel is None:
            raise GridMismatch("leading blocks need a kernel-backed operator")
        n = self.grid.cut(t)
        if n > self._shared["base_n"]:
            raise GridMismatch("leading block larger than the parent operator")
        return CompressedOperator(self.kernel, self.grid, t, _shared=self._shared, _n=n)

    def apply(self, x: np.ndarray) -> np.ndarray:
        """``K[t] x`` on the cells below ``t``."""
        base = self._shared.get("M") if self.kernel is not None else None
        if base is not None and self.n < base.shape[1]:
            # contiguous leading rows times the zero-padded vector
            pad = np.zeros((base.shape[1],) + np.shape(x)[1:], dtype=np.result_type(x, base))
            pad[: self.n] = np.conj(x)
            return base[: self.n] @ pad
        return self.M @ np.conj(x)

    # -- norm --------------------------------------------------------------
    def _real_block(self) -> np.ndarray:
        M = self.M
        if self.real:
            return M
        R, I = M.real, M.imag
        return np.block([[R, I], [I, -R]])

    def norm(self) -> float:
        if self.norm_cached is None:
            self.norm_cached = operator_norm(self)
        return self.norm_cached

    def norm_bound(self) -> float | None:
        """Smallest cached norm of an operator containing this one."""
        best = None
        for n, v in self._shared["norms"].items():
            if n >= self.n and (best is None or v < best):
                best = v
        return best

    # -- factorizations ----------------------------------------------------
    def _factor(self, eps: int) -> np.ndarray:
        """Lower Cholesky factor for the base size; slice for leading blocks."""
        fac = self._shared["factors"].get(eps)
        if fac is None:
            nb = self._shared["base_n"]
            M = self._shared.get("M")
            if M is None:
                M = self.M if self.n == nb else CompressedOperator(
                    self.kernel, self.grid, None, _shared=self._shared, _n=nb).M
            M = M[:nb, :nb]
            if self.real:
                G = np.eye(nb) + eps * M
            else:
                R, I = M.real, M.imag
                G = np.empty((2 * nb, 2 * nb))
                G[0::2, 0::2] = np.eye(nb) + eps * R
                G[0::2, 1::2] = eps * I
                G[1::2, 0::2] = eps * I
                G[1::2, 1::2] = np.eye(nb) - eps * R
            try:
                fac = sla.cholesky(G, lower=True, check_finite=False)
            except np.linalg.LinAlgError:
                fac = False
            self._shared["factors"][eps] = fac
        return fac

    def _chol_solve(self, eps: int, b: np.ndarray) -> np.ndarray:
        fac = self._factor(eps)
        m = b.shape[0]
        if fac is False:
            return self._small_solve(eps, b)
        full = fac.shape[0]
        if m == full:
            y = sla.solve_triangular(fac, b, lower=True, check_finite=False)
            return sla.solve_triangular(fac, y, lower=True, trans="T", check_finite=False)
        # a leading block of the factor is the factor of the leading block;
        # zero padding avoids copying the strided sub-array
        pad = np.zeros((full,) + b.shape[1:])
        pad[:m] = b
        y = sla.solve_triangular(fac, pad, lower=True, check_finite=False)
        y[m:] = 0.0
        return sla.solve_triangular(fac, y, lower=True, trans="T", check_finite=False)[:m]

    def _small_solve(self, eps: int, b: np.ndarray) -> np.ndarray:
        # the base block is indefinite; factor this block on its own
        n = self.n
        M = self.M
        if self.real:
            G = np.eye(n) + eps * M
        else:
            R, I = M.real, M.imag
            G = np.empty((2 * n, 2 * n))
            G[0::2, 0::2] = np.eye(n) + eps * R
            G[0::2, 1::2] = eps * I
            G[1::2, 0::2] = eps * I
            G[1::2, 1::2] = np.eye(n) - eps * R
        try:
            c = sla.cho_factor(G, lower=True, check_finite=False)
        except np.linalg.LinAlgError:
            raise NearSingular("compression is not a strict contraction") from None
        return sla.cho_solve(c, b, check_finite=False)

    def solve(self, rhs: np.ndarray, sign: int) -> np.ndarray:
        """Solve ``x + sign * K[t] x = rhs`` (no margin check, see :func:`solve_pm`)."""
        n = self.n
        rhs = np.asarray(rhs)
        if rhs.shape[0] != n:
            raise GridMismatch("right-hand side has the wrong length")
        if n == 0:
            return np.zeros(rhs.shape, dtype=complex)
        cplx = np.iscomplexobj(rhs)
        if self.real:
            p = self._chol_solve(sign, rhs.real)
            if not cplx:
                return p.astype(complex)
            q = self._chol_solve(-sign, rhs.imag)
            return p + 1j * q
        b = np.empty((2 * n,) + rhs.shape[1:])
        b[0::2] = rhs.real
        b[1::2] = rhs.imag if cplx else 0.0
        v = self._chol_solve(sign, b)
        return v[0::2] + 1j * v[1::2]


def compress(k: KernelRep, grid: Grid, t: float) -> CompressedOperator:
    """Assemble ``K[t]`` for a lattice point ``t`` of `grid`.

    Examples
    --------
    >>> from canonsys.unimodular import make_function
    >>> from canonsys.kernel import kernel_of
    >>> op = compress(kernel_of(make_function("pw", [1.0])), Grid(-5.0, 5.0, 0.125), 0.5)
    >>> float(abs(op.M).max())
    0.0
    """
    return CompressedOperator(k, grid, t)


def operator_norm(op: CompressedOperator) -> float:
    """Largest singular value of the compression.

    For a complex-symmetric ``M`` the antilinear map ``x -> M conj(x)`` has
    norm ``sigma_max(M)``, which is the largest eigenvalue modulus of the
    real block ``[[R, I], [I, -R]]``.
    """
    if op.n == 0 or not np.any(op.M):
        val = 0.0
    else:
        G = op._real_block()
        m = G.shape[0]
        if m <= _DENSE_NORM_SIZE:
            ev = sla.eigvalsh(G, check_finite=False)
            val = float(max(abs(ev[0]), abs(ev[-1])))
        else:
            v0 = np.cos(0.37 * np.arange(m)) + 1.0
            ev = ssl.eigsh(G, k=1, which="LM", v0=v0, tol=1e-14, return_eigenvectors=False)
            val = float(abs(ev[0]))
    op._shared["norms"][op.n] = val
    op.norm_cached = val
    return val


def solve_pm(op: CompressedOperator, rhs: np.ndarray, sign: int,
             margin: float = DEFAULT_NORM_MARGIN, check_margin: bool = True) -> np.ndarray:
    """Solve ``x + sign * K[t] x = rhs`` with a norm-margin guard.

    Raises
    ------
    NearSingular
        If ``||K[t]|| > 1 - margin`` (unless `check_margin` is false).
    ResidualCheckFailed
        If the reconstructed residual exceeds ``1e-10 ||rhs||``.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if check_margin and op.n:
        bound = op.norm_bound()
        if bound is None or bound > 1 - margin:
            bound = op.norm()
        if bound > 1 - margin:
            raise NearSingular(f"||K[t]|| = {bound:.6g} exceeds 1 - {margin}")
    x = op.solve(rhs, sign)
    if op.n:
        res = x + sign * op.apply(x) - rhs
        scale = np.linalg.norm(rhs)
        if np.linalg.norm(res) > SOLVE_RESIDUAL_TOL * max(scale, 1e-300):
            raise ResidualCheckFailed(
                f"solve residual {np.linalg.norm(res):.3e} exceeds tolerance (|rhs|={scale:.3e})")
    return x


def neumann_solve(op: CompressedOperator, rhs: np.ndarray, sign: int, terms: int = 200) -> np.ndarray:
    """Fixed-point iteration ``x <- rhs - sign K[t] x``, i.e. the Neumann series."""
    x = np.array(rhs, dtype=complex)
    for _ in range(terms):
        x = rhs - sign * op.apply(x)
    return x


def norm_scan(k: KernelRep, t_values: Sequence[float], policy: GridPolicy = GridPolicy(),
              grid: Grid | None = None, slack: float = 1e-8):
    """Norms ``||K[t]||`` for each requested ``t`` (in input order).

    All compressions share one grid sized for the largest ``t``, so the
    sequence is monotone by interlacing; the monotonicity is checked.
    """
    t_values = [float(t) for t in t_values]
    if not t_values:
        return []
    if grid is None:
        grid = policy.grid_for(k, min(t_values), max(t_values))
    base = CompressedOperator(k, grid, max(t_values))
    out = []
    for t in t_values:
        out.append((t, operator_norm(base.leading(t))))
    ordered = sorted(out)
    for (t0, n0), (t1, n1) in zip(ordered, ordered[1:]):
        if n1 < n0 - slack:
            raise ResidualCheckFailed(f"norm decreased from {n0} at t={t0} to {n1} at t={t1}")
    return out
