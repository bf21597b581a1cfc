import cmath
import math

import numpy as np
import pytest
from scipy import special as sps

from canonsys.errors import (
    DomainError, InvalidParams, NoOracle, PoleAtNonpositiveInteger, UnknownId,
)
from canonsys.unimodular import (
    REGISTRY_IDS, bessel_i0, bessel_j0, bessel_k_complex_order, gamma_complex,
    make_function, oracle_for,
)

ALL = [
    ("pw", [1.0]), ("mobius", []), ("blaschke", [1j]), ("blaschke", [1 + 1j, 2j]),
    ("gamma_ratio", []), ("product", [("pw", [0.5]), ("gamma_ratio", [])]),
]


def test_registry_examples():
    u = make_function("pw", [1.0])
    assert u.u0 == 1 and u.symmetric and u.inner
    assert abs(u.eval_cont(0.3 + 0.2j) - cmath.exp(2j * (0.3 + 0.2j))) < 1e-15
    m = make_function("mobius")
    assert m.symmetric and m.inner and abs(m.u0 - 1) < 1e-15
    z = 0.7 + 0.4j
    assert abs(m.eval_cont(z) - (1 + 1j * z) / (1 - 1j * z)) < 1e-14
    g = make_function("gamma_ratio")
    assert not g.inner and g.symmetric and abs(g.u0 - 1) < 1e-14


def test_invalid_params():
    with pytest.raises(InvalidParams):
        make_function("pw", [0.0])
    with pytest.raises(InvalidParams):
        make_function("blaschke", [1.0])
    with pytest.raises(UnknownId):
        make_function("zeta")


@pytest.mark.parametrize("id_, params", ALL)
def test_unimodular_on_real_line(id_, params):
    u = make_function(id_, params)
    x = np.linspace(-50, 50, 1000)
    assert np.max(np.abs(np.abs(u.eval_real(x)) - 1)) <= 1e-10
    assert abs(abs(u.u0) - 1) <= 1e-12


@pytest.mark.parametrize("id_, params", ALL)
def test_symmetry_flag(id_, params):
    u = make_function(id_, params)
    xs, ys = np.meshgrid(np.linspace(-3, 3, 13), np.linspace(-0.3, 0.3, 5))
    z = (xs + 1j * ys).ravel()
    gap = np.max(np.abs(u.sharp(z) - u.eval_cont(-z)))
    assert (gap <= 1e-9) == u.symmetric


def test_factorization_M():
    for id_, params in ALL:
        u = make_function(id_, params)
        z = np.array([0.3 - 0.2j, 1.1 + 0.1j, -0.7 + 0.3j])
        m_sharp = np.conj(u.M_eval(np.conj(z)))
        assert np.max(np.abs(m_sharp / u.M_eval(z) - u.eval_cont(z))) < 1e-10


def test_gamma_values():
    assert abs(gamma_complex(1.0) - 1) < 1e-15
    assert abs(gamma_complex(0.5) - math.sqrt(math.pi)) < 1e-14
    assert abs(abs(gamma_complex(0.5 + 1j)) - math.sqrt(math.pi / math.cosh(math.pi))) < 1e-13
    with pytest.raises(PoleAtNonpositiveInteger):
        gamma_complex(-2.0)


def test_gamma_accuracy_and_recurrence():
    rng = np.random.default_rng(3)
    z = rng.uniform(-5, 8, 300) + 1j * rng.uniform(-50, 50, 300)
    ref = np.exp(sps.loggamma(z))
    assert np.max(np.abs(gamma_complex(z) / ref - 1)) <= 1e-12
    rec = np.abs(gamma_complex(z + 1) - z * gamma_complex(z)) / np.abs(gamma_complex(z + 1))
    assert np.max(rec) <= 1e-11


def test_bessel_examples():
    assert bessel_j0(0.0) == 1.0 and bessel_i0(0.0) == 1.0
    ref = math.sqrt(math.pi / 4) * math.exp(-2)
    assert abs(bessel_k_complex_order(0.5, 2.0) - ref) / ref < 1e-10
    assert abs(ref - 0.1199377) < 1e-7
    with pytest.raises(DomainError):
        bessel_k_complex_order(0.5, 0.0)


@pytest.mark.parametrize("nu", [0.0, 0.3, 1.0, 2.5, 7.0])
@pytest.mark.parametrize("x", [0.1, 1.0, 2 * math.e, 20.0])
def test_bessel_k_real_order(nu, x):
    ref = sps.kv(nu, x)
    assert abs(bessel_k_complex_order(nu, x) - ref) / ref <= 1e-9


def test_bessel_k_complex_order_symmetry_and_recurrence():
    # K_nu = K_{-nu}, and K_{nu+1} - K_{nu-1} = (2 nu / x) K_nu
    for nu in (0.5 + 1j, 0.5 - 3j, 0.2 + 10j, 1.5 + 20j):
        for x in (0.8, 2.0, 2 * math.e ** 0.5):
            k = bessel_k_complex_order(nu, x)
            assert abs(bessel_k_complex_order(-nu, x) - k) <= 1e-10 * abs(k)
            lhs = bessel_k_complex_order(nu + 1, x) - bessel_k_complex_order(nu - 1, x)
            assert abs(lhs - 2 * nu / x * k) <= 1e-9 * max(abs(lhs), abs(k))


def test_oracle_examples():
    o = oracle_for("pw", [1.0])
    assert o.A_closed(0.0, 0.0) == 1 and o.B_closed(0.0, 0.0) == 0 and o.t0_exact == 1.0
    g = oracle_for("gamma_ratio")
    assert abs(g.Phi_diag(0.0) - 0.135335) < 1e-6 and g.t0_exact == math.inf
    m = oracle_for("mobius")
    assert abs(m.A_closed(-1.0, 1.0) - (math.cos(1) - math.sin(1))) < 1e-15
    assert abs(m.A_closed(-1.0, 1.0) + 0.30117) < 1e-5
    with pytest.raises(NoOracle):
        oracle_for("product", [("pw", [0.5]), ("gamma_ratio", [])])
    assert oracle_for("blaschke", [1j]).initial is not None


def test_pw_kernel_oracle():
    o = oracle_for("pw", [1.0])
    J = o.J_closed(0.0, 1j, 1j)
    assert abs(J - math.sinh(2) / (2 * math.pi)) < 1e-14


def test_gamma_oracle_modulus_identity():
    # u = M#/M with M = Gamma(1/2 - iz); A and -iB are real on the imaginary axis
    g = oracle_for("gamma_ratio")
    A = g.A_closed(0.0, 1j)
    B = g.B_closed(0.0, 1j)
    assert abs(complex(A).imag) < 1e-12 and abs(complex(-1j * B).imag) < 1e-12


def test_registry_ids():
    assert set(REGISTRY_IDS) == {"pw", "mobius", "blaschke", "gamma_ratio", "product"}
