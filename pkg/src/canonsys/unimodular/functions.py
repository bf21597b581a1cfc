"""Registry of unimodular functions on the real line.

Every entry is written in the factored form

    u(z) = sign * exp(2iaz) * prod_k (z - w_k)/(z - conj(w_k)) * G(z)**g

with ``a >= 0``, zeros ``w_k`` in the upper half-plane and
``G(z) = Gamma(1/2 + iz)/Gamma(1/2 - iz)``, ``g in {0, 1}``.  The same
data define an entire/meromorphic ``M`` with ``u = M# / M``, used to turn
the normalized functions into ``A = M A~`` and ``B = M B~``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..errors import InvalidParams, UnknownId
from .special import gamma_complex

REGISTRY_IDS = ("pw", "mobius", "blaschke", "gamma_ratio", "product")


@dataclass(frozen=True)
class Factorization:
    """Factored description ``sign * e^{2iaz} * Blaschke * G**g``."""

    shift: float = 0.0
    sign: int = 1
    zeros: tuple = ()
    gamma_power: int = 0

    def combine(self, other: "Factorization") -> "Factorization":
        return Factorization(
            shift=self.shift + other.shift,
            sign=self.sign * other.sign,
            zeros=self.zeros + other.zeros,
            gamma_power=self.gamma_power + other.gamma_power,
        )


@dataclass(frozen=True)
class UnimodularFunction:
    """A registry unimodular function with its continuation and flags.

    Attributes
    ----------
    id, params
        Registry identifier and the parameters it was built from.
    eval_real, eval_cont
        Boundary values on the real line and the meromorphic continuation.
        Both accept scalars or arrays.
    u0
        The value ``u(0)``.
    strip_halfwidth
        Half-width of the strip around the real line free of poles.
    symmetric, inner
        ``u#(z) = u(-z)``, and whether ``u`` is inner in the upper half-plane.
    M_eval
        Evaluator of ``M`` with ``u = M#/M``.
    structure
        The underlying :class:`Factorization`.
    """

    id: str
    params: tuple
    eval_real: Callable = field(repr=False)
    eval_cont: Callable = field(repr=False)
    u0: complex
    strip_halfwidth: float
    symmetric: bool
    inner: bool
    M_eval: Callable = field(repr=False)
    structure: Factorization = field(repr=False)

    def sharp(self, z):
        """``u#(z) = conj(u(conj z))``."""
        return np.conj(self.eval_cont(np.conj(z)))


def _gamma_ratio(z):
    z = np.asarray(z, dtype=complex)
    return gamma_complex(0.5 + 1j * z) / gamma_complex(0.5 - 1j * z)


def _build(id_: str, params: tuple, fac: Factorization) -> UnimodularFunction:
    zeros = np.asarray(fac.zeros, dtype=complex)
    a, sgn, g = fac.shift, fac.sign, fac.gamma_power

    def u(z):
        z = np.asarray(z, dtype=complex)
        val = sgn * np.exp(2j * a * z)
        for w in zeros:
            val = val * (z - w) / (z - np.conj(w))
        if g:
            val = val * _gamma_ratio(z) ** g
        return val if val.ndim else complex(val)

    # M with u = M#/M; a sign -1 is produced by the constant factor -i
    m_const = 1.0 if sgn == 1 else -1j

    def M(z):
        z = np.asarray(z, dtype=complex)
        val = m_const * np.exp(-1j * a * z)
        for w in zeros:
            val = val * (z - np.conj(w))
        if g:
            val = val * gamma_complex(0.5 - 1j * z) ** g
        return val if val.ndim else complex(val)

    strip = np.inf
    if len(zeros):
        strip = float(np.min(zeros.imag))
    if g:
        strip = min(strip, 0.5)
    symmetric = _zero_set_symmetric(zeros)
    return UnimodularFunction(
        id=id_, params=params, eval_real=u, eval_cont=u, u0=complex(u(0.0)),
        strip_halfwidth=strip, symmetric=symmetric, inner=(g == 0),
        M_eval=M, structure=fac,
    )


def _zero_set_symmetric(zeros: np.ndarray, tol: float = 1e-12) -> bool:
    # invariance under w -> -conj(w), counted with multiplicity
    left = sorted(zeros, key=lambda w: (round(w.real, 9), round(w.imag, 9)))
    mirrored = sorted(-np.conj(zeros), key=lambda w: (round(w.real, 9), round(w.imag, 9)))
    return all(abs(p - q) <= tol * max(1.0, abs(p)) for p, q in zip(left, mirrored))


def _factorization(id_: str, params: Sequence) -> Factorization:
    if id_ == "pw":
        if len(params) != 1:
            raise InvalidParams("pw takes exactly one parameter a > 0")
        a = params[0]
        if np.iscomplexobj(a) and np.imag(a) != 0:
            raise InvalidParams("pw parameter a must be real")
        a = float(np.real(a))
        if not a > 0:
            raise InvalidParams(f"pw requires a > 0, got {a}")
        return Factorization(shift=a)
    if id_ == "mobius":
        if len(params):
            raise InvalidParams("mobius takes no parameters")
        return Factorization(sign=-1, zeros=(1j,))
    if id_ == "blaschke":
        if not len(params):
            raise InvalidParams("blaschke needs at least one zero")
        zs = tuple(complex(w) for w in params)
        if any(not w.imag > 0 for w in zs):
            raise InvalidParams("blaschke zeros must lie in the open upper half-plane")
        return Factorization(zeros=zs)
    if id_ == "gamma_ratio":
        if len(params):
            raise InvalidParams("gamma_ratio takes no parameters")
        return Factorization(gamma_power=1)
    if id_ == "product":
        if not len(params):
            raise InvalidParams("product needs at least one factor")
        fac = Factorization()
        for item in params:
            try:
                sub_id, sub_params = item
            except (TypeError, ValueError):
                raise InvalidParams("product factors are (id, params) pairs") from None
            if sub_id == "product":
                raise InvalidParams("nested products are not supported")
            fac = fac.combine(_factorization(sub_id, tuple(sub_params)))
        return fac
    raise UnknownId(f"unknown function id {id_!r}; choose from {REGISTRY_IDS}")


def make_function(id_: str, params: Sequence = ()) -> UnimodularFunction:
    """Build a registry function.

    Examples
    --------
    >>> u = make_function("pw", [1.0])
    >>> round(abs(u.eval_cont(1j) - np.exp(-2)), 12)
    0.0
    """
    params = tuple(params) if params is not None else ()
    fac = _factorization(id_, params)
    return _build(id_, params, fac)
