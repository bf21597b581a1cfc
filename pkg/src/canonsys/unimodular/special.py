"""Special functions used by the registry and its closed-form oracles.

The complex gamma function and the modified Bessel function of complex
order are implemented here; the real-argument Bessel functions and the
Struve functions come from :mod:`scipy.special`.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import special as sps

from ..errors import DomainError, PoleAtNonpositiveInteger

# Lanczos coefficients for g = 7, nine terms
_LANCZOS_G = 7.0
_LANCZOS_P = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)

#: Largest |Im nu| for which :func:`bessel_k_complex_order` is certified.
BESSEL_K_MAX_IMAG_ORDER = 20.0


def _loggamma_right(z: np.ndarray) -> np.ndarray:
    # Lanczos for Re z >= 1/2, returned as a logarithm
    zm = z - 1.0
    acc = np.full_like(zm, _LANCZOS_P[0])
    for k in range(1, len(_LANCZOS_P)):
        acc = acc + _LANCZOS_P[k] / (zm + k)
    tt = zm + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * np.log(tt) - tt + np.log(acc)


def gamma_complex(z):
    """Gamma function of a complex argument.

    Lanczos approximation in the right half-plane and the reflection
    formula for ``Re z < 1/2``.  Accepts scalars or arrays.

    Raises
    ------
    PoleAtNonpositiveInteger
        If any entry of `z` is a non-positive integer.
    """
    scalar = np.ndim(z) == 0
    zz = np.atleast_1d(np.asarray(z, dtype=complex))
    re, im = zz.real, zz.imag
    pole = (im == 0.0) & (re <= 0.0) & (re == np.round(re))
    if np.any(pole):
        raise PoleAtNonpositiveInteger(f"Gamma has a pole at {zz[pole][0]}")
    out = np.empty_like(zz)
    right = re >= 0.5
    if np.any(right):
        out[right] = np.exp(_loggamma_right(zz[right]))
    left = ~right
    if np.any(left):
        zl = zz[left]
        out[left] = np.pi / (np.sin(np.pi * zl) * np.exp(_loggamma_right(1.0 - zl)))
    return complex(out[0]) if scalar else out


def bessel_j0(x):
    """Bessel function J0 of real argument."""
    return sps.j0(x)


def bessel_i0(x):
    """Modified Bessel function I0 of real argument."""
    return sps.i0(x)


def j0_integral(v):
    """Return ``int_0^v J0(s) ds`` for ``v >= 0``.

    Uses the Struve-function identity
    ``v J0 + (pi v / 2)(J1 H0 - J0 H1)``, which stays accurate for large
    arguments.
    """
    v = np.asarray(v, dtype=float)
    j0, j1 = sps.j0(v), sps.j1(v)
    return v * j0 + 0.5 * np.pi * v * (j1 * sps.struve(0, v) - j0 * sps.struve(1, v))


def bessel_k_complex_order(nu: complex, x: float) -> complex:
    """Modified Bessel function of the second kind ``K_nu(x)``, complex order.

    Evaluates ``(1/2) int exp(-x cosh s + nu s) ds`` by the trapezoid rule
    on a horizontal line ``Im s = alpha`` through (or near) the saddle
    point, which removes the cancellation that afflicts the real line
    when ``Im nu`` is large.

    Parameters
    ----------
    nu : complex
        Order, with ``|Im nu| <= BESSEL_K_MAX_IMAG_ORDER``.
    x : float
        Positive argument.
    """
    x = float(x)
    if not x > 0.0:
        raise DomainError("K_nu(x) requires x > 0")
    nu = complex(nu)
    if abs(nu.imag) > BESSEL_K_MAX_IMAG_ORDER:
        raise DomainError(f"|Im nu| exceeds {BESSEL_K_MAX_IMAG_ORDER}")
    # K_{-nu} = K_nu; keep Re nu >= 0 so the larger tail sits at s > 0
    if nu.real < 0.0:
        nu = -nu
    nr, ni = nu.real, nu.imag
    # horizontal line through the saddle x sinh s = nu
    saddle = complex(np.arcsinh(nu / x))
    alpha = math.copysign(min(abs(saddle.imag), 0.5 * math.pi - 0.2), ni)
    ca = math.cos(alpha)
    room = 0.5 * math.pi - abs(alpha)
    ds = min(0.05, room / 6.0)

    def expo(s):
        return -x * ca * np.cosh(s) + nr * s

    # locate the peak of the envelope and cut where it has dropped by e^-45
    s_peak = math.asinh(nr / (x * ca)) if nr > 0 else 0.0
    top = expo(s_peak)
    lo, hi = s_peak, s_peak
    while expo(lo) > top - 45.0:
        lo -= 0.5
    while expo(hi) > top - 45.0:
        hi += 0.5
    n = int(math.ceil((hi - lo) / ds))
    s = lo + ds * np.arange(n + 1)
    w = s + 1j * alpha
    vals = np.exp(-x * np.cosh(w) + nu * w)
    return complex(0.5 * ds * np.sum(vals))
