"""Closed-form reference values for the registry examples."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import special as sps

from ..errors import NoOracle, UnknownId
from .functions import REGISTRY_IDS, make_function
from .special import bessel_k_complex_order


@dataclass(frozen=True)
class OracleSet:
    """Closed forms available for one registry function.

    ``A_closed``/``B_closed`` give ``A = M A~`` and ``B = M B~``;
    ``initial`` gives ``(A~(0,z), B~(0,z))`` for inner functions.  Fields
    that have no closed form are ``None``.
    """

    id: str
    A_closed: Optional[Callable] = None
    B_closed: Optional[Callable] = None
    J_closed: Optional[Callable] = None
    Phi_diag: Optional[Callable] = None
    Psi_diag: Optional[Callable] = None
    t0_exact: Optional[float] = None
    H_closed: Optional[Callable] = None
    Phi_closed: Optional[Callable] = None
    Psi_closed: Optional[Callable] = None
    Y_closed: Optional[Callable] = None
    phi_pm_closed: Optional[Callable] = None
    initial: Optional[Callable] = None
    t_max_valid: float = math.inf


def _sinc_ratio(c, d):
    # sin(c d)/d, with the limit c at d = 0
    d = np.asarray(d, dtype=complex)
    small = np.abs(d) < 1e-12
    safe = np.where(small, 1.0, d)
    return np.where(small, c, np.sin(c * safe) / safe)


def _pw(a: float) -> OracleSet:
    def A(t, z):
        return np.cos((a - t) * np.asarray(z, dtype=complex))

    def B(t, z):
        return np.sin((a - t) * np.asarray(z, dtype=complex))

    def J(t, z, w):
        d = np.asarray(w, dtype=complex) - np.conj(z)
        return _sinc_ratio(a - t, d) / np.pi

    def Phi(t, x):
        return 1.0 - (np.asarray(x) >= 2 * a - t).astype(float)

    def Psi(t, x):
        return 1.0 + (np.asarray(x) >= 2 * a - t).astype(float)

    def Y(t, z, x):
        x = np.asarray(x, dtype=float)
        return np.where((x > t) & (x < 2 * a - t), np.exp(1j * z * x), 0.0)

    u = make_function("pw", [a])
    return OracleSet(
        id="pw", A_closed=A, B_closed=B, J_closed=J,
        Phi_diag=lambda t: 1.0, Psi_diag=lambda t: 1.0, t0_exact=a,
        H_closed=lambda t: np.eye(2), Phi_closed=Phi, Psi_closed=Psi,
        Y_closed=Y, initial=_inner_initial(u), t_max_valid=a,
    )


def _mobius() -> OracleSet:
    def A(t, z):
        z = np.asarray(z, dtype=complex)
        return np.cos(t * z) + z * np.sin(t * z)

    def B(t, z):
        z = np.asarray(z, dtype=complex)
        return z * np.cos(t * z) - np.sin(t * z)

    def J(t, z, w):
        w = np.asarray(w, dtype=complex)
        d = w - np.conj(z)
        return np.exp(-1j * t * d) / np.pi - (w + 1j) * (np.conj(z) - 1j) * _sinc_ratio(t, d) / np.pi

    def _bump(t, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > -t, 1.0 - 2.0 * np.exp(-x - t), 0.0)

    def Y(t, z, x):
        x = np.asarray(x, dtype=float)
        tail = 2j / (z + 1j) * np.exp(-1j * t * (z - 1j)) * np.exp(-x) * (x > -t)
        return tail + np.exp(1j * z * x) * ((x > t) & (x < -t))

    u = make_function("mobius")
    return OracleSet(
        id="mobius", A_closed=A, B_closed=B, J_closed=J,
        Phi_diag=lambda t: 1.0, Psi_diag=lambda t: 1.0, t0_exact=0.0,
        H_closed=lambda t: np.eye(2),
        Phi_closed=lambda t, x: 1.0 - _bump(t, x),
        Psi_closed=lambda t, x: 1.0 + _bump(t, x),
        Y_closed=Y, initial=_inner_initial(u), t_max_valid=0.0,
    )


def gamma_phi_pm(t, x):
    """Closed forms of ``phi+`` and ``phi-`` for the Gamma-ratio example.

    ``phi+-(t,x) = sqrt(ab) (1 +- d/db) I0(2 sqrt(a(a-b)))`` with
    ``a = e^t``, ``b = e^x``; both terms are entire in ``q = a(a-b)``.
    """
    x = np.asarray(x, dtype=float)
    a = math.exp(t)
    b = np.exp(x)
    q = a * (a - b)
    r = np.sqrt(np.abs(q))
    pos = q >= 0
    f0 = np.where(pos, sps.i0(2 * r), sps.j0(2 * r))
    # I1(2 sqrt q)/sqrt q, continued to q <= 0 as J1(2 sqrt|q|)/sqrt|q|
    small = r < 1e-8
    rs = np.where(small, 1.0, r)
    f1 = np.where(small, 1.0 + q / 2.0, np.where(pos, sps.i1(2 * rs), sps.j1(2 * rs)) / rs)
    db = -a * f1
    root = np.sqrt(a * b)
    return root * (f0 + db), root * (f0 - db)


def _gamma() -> OracleSet:
    def _kpair(t, z):
        x = 2.0 * math.exp(t)
        z = complex(z)
        return bessel_k_complex_order(0.5 - 1j * z, x), bessel_k_complex_order(0.5 + 1j * z, x)

    def A(t, z):
        km, kp = _kpair(t, z)
        return math.exp(2 * math.exp(t) + t / 2) * (km + kp)

    def B(t, z):
        km, kp = _kpair(t, z)
        # -iB = e^{-2e^t + t/2}(K_- - K_+)
        return 1j * math.exp(-2 * math.exp(t) + t / 2) * (km - kp)

    def H(t):
        g = math.exp(4 * math.exp(t))
        return np.diag([1.0 / g, g])

    return OracleSet(
        id="gamma_ratio", A_closed=A, B_closed=B,
        Phi_diag=lambda t: math.exp(-2 * math.exp(t)),
        Psi_diag=lambda t: math.exp(2 * math.exp(t)),
        t0_exact=math.inf, H_closed=H, phi_pm_closed=gamma_phi_pm,
    )


def _inner_initial(u):
    def initial(z):
        th = u.eval_cont(z)
        # A~ = (1 + theta)/2 and -i B~ = (1 - theta)/2
        return 0.5 * (1 + th), 0.5j * (1 - th)
    return initial


def oracle_for(id_: str, params: Sequence = ()) -> OracleSet:
    """Return the closed forms known for a registry function.

    Blaschke products and inner products only carry the initial condition
    at ``t = 0``; asking for a Gamma-ratio product raises :class:`NoOracle`.
    """
    if id_ not in REGISTRY_IDS:
        raise UnknownId(f"unknown function id {id_!r}")
    if id_ == "pw":
        a = float(np.real(params[0])) if len(params) else 1.0
        return _pw(a)
    if id_ == "mobius":
        return _mobius()
    if id_ == "gamma_ratio":
        return _gamma()
    u = make_function(id_, params)
    if not u.inner:
        raise NoOracle(f"no closed forms for {id_} with a Gamma factor")
    return OracleSet(id=id_, initial=_inner_initial(u), t0_exact=None)
