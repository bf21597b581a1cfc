"""Unimodular functions, their special functions and closed-form oracles."""
from .functions import REGISTRY_IDS, Factorization, UnimodularFunction, make_function
from .oracles import OracleSet, oracle_for
from .special import (
    BESSEL_K_MAX_IMAG_ORDER,
    bessel_i0,
    bessel_j0,
    bessel_k_complex_order,
    gamma_complex,
    j0_integral,
)

__all__ = [
    "REGISTRY_IDS", "Factorization", "UnimodularFunction", "make_function",
    "OracleSet", "oracle_for", "BESSEL_K_MAX_IMAG_ORDER", "bessel_i0",
    "bessel_j0", "bessel_k_complex_order", "gamma_complex", "j0_integral",
]
