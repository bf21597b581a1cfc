import math

import numpy as np
import pytest

from canonsys.errors import DeltaOffGrid, NotInner, StripTooNarrow
from canonsys.grid import Grid
from canonsys.kernel import apply_K, kernel_of, numeric_kernel
from canonsys.unimodular import make_function


def test_closed_forms(pw, mobius, gamma):
    _, k = pw
    assert k.deltas == ((1 + 0j, 2.0),)
    _, k = mobius
    assert k.deltas == ((-1 + 0j, 0.0),)
    x = np.array([-1.0, 0.5, 2.0])
    assert np.allclose(k.smooth(x), [0.0, 2 * math.exp(-0.5), 2 * math.exp(-2)], atol=1e-15)
    _, k = gamma
    assert not k.deltas
    from scipy.special import j0
    assert abs(k.smooth(np.array([-2.0]))[0] - math.exp(-1) * j0(2 * math.exp(-1))) < 1e-15


def test_blaschke_closed_form():
    k = kernel_of(make_function("blaschke", [1j]))
    assert len(k.deltas) == 1 and abs(k.deltas[0][0] - 1) < 1e-14 and k.deltas[0][1] == 0
    x = np.array([0.3, 1.0, 4.0])
    assert np.max(np.abs(k.smooth(x) + 2 * np.exp(-x))) < 1e-14


def test_real_valued_flag():
    for id_, params in (("pw", [1.0]), ("mobius", []), ("gamma_ratio", []), ("blaschke", [1 + 1j])):
        u = make_function(id_, params)
        k = kernel_of(u)
        assert k.real_valued == u.symmetric
        x = np.linspace(0.01, 5, 50)
        if k.real_valued:
            assert np.max(np.abs(np.imag(k.smooth(x)))) <= 1e-12
            assert all(abs(np.imag(c)) <= 1e-12 for c, _ in k.deltas)


def test_numeric_kernel_mobius():
    u = make_function("mobius")
    x, v = numeric_kernel(u, 2.0, (0.1, 5.0), 2 ** 14)
    assert np.max(np.abs(v - 2 * np.exp(-x))) <= 1e-6


def test_numeric_kernel_pw():
    x, v = numeric_kernel(make_function("pw", [1.0]), 1.0, (0.0, 1.5), 2 ** 14)
    assert np.max(np.abs(v)) <= 1e-8


def test_numeric_kernel_blaschke_matches_closed_form():
    for zeros in ([1j], [1 + 1j, 0.5 + 2j]):
        u = make_function("blaschke", zeros)
        x, v = numeric_kernel(u, 1.5, (0.1, 5.0), 2 ** 14)
        assert np.max(np.abs(v - kernel_of(u).smooth(x))) <= 1e-6


def test_numeric_kernel_inner_support():
    u = make_function("blaschke", [1 + 1j, 2j])
    x, v = numeric_kernel(u, 1.5, (-5.0, -0.01), 2 ** 14)
    assert np.max(np.abs(v)) <= 1e-6


def test_numeric_kernel_errors():
    with pytest.raises(NotInner):
        numeric_kernel(make_function("gamma_ratio"), 0.2, (0, 1), 64)
    with pytest.raises(StripTooNarrow):
        numeric_kernel(make_function("mobius"), -1.0, (0, 1), 64)


def test_apply_pw_reflection(pw):
    _, k = pw
    g = Grid(-4.0, 4.0, 2 ** -6)
    x = g.nodes
    f = ((x > 0) & (x < 1)).astype(complex)
    kf = apply_K(k, f, g)
    assert np.array_equal(kf, ((x > 1) & (x < 2)).astype(complex))
    assert not np.any(apply_K(k, np.zeros(g.n), g))


def test_apply_mobius_example(mobius):
    _, k = mobius
    g = Grid(-4.0, 12.0, 2 ** -7)
    x = g.nodes
    f = np.where(x > 0, np.exp(-x), 0.0)
    kf = apply_K(k, f, g)
    # exact: -f(-x) + 2 e^{-x} int_{max(0,-x)} e^{-2y} dy, i.e. e^{-x} for x > 0 and 0 below
    exact = np.where(x > 0, np.exp(-x), -np.exp(x) + np.exp(x))
    sel = np.abs(x) < 4
    assert np.max(np.abs(kf[sel] - exact[sel])) <= 1e-4
    i = np.argmin(np.abs(x - 1.0))
    assert abs(kf[i] * np.exp(x[i] - 1.0) - math.exp(-1)) <= 1e-4


def test_antilinearity(gamma):
    _, k = gamma
    g = Grid(-6.0, 3.0, 2 ** -5)
    rng = np.random.default_rng(0)
    f = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    q = rng.normal(size=g.n) + 1j * rng.normal(size=g.n)
    a, b = 0.3 - 1.2j, -2 + 0.5j
    lhs = apply_K(k, a * f + b * q, g)
    rhs = np.conj(a) * apply_K(k, f, g) + np.conj(b) * apply_K(k, q, g)
    assert np.linalg.norm(lhs - rhs) <= 1e-12 * np.linalg.norm(rhs)


def _bump(x, c, w, freq):
    return np.where(np.abs(x - c) < w, np.cos(np.pi * (x - c) / (2 * w)) ** 4, 0) * np.exp(1j * freq * x)


def test_isometry_and_involution(mobius, pw):
    g = Grid(-10.0, 10.0, 2 ** -7)
    x = g.nodes
    for _, k in (mobius, pw):
        f = _bump(x, -0.5, 1.2, 2.0)
        q = _bump(x, 0.7, 1.0, -1.0)
        kf, kq = apply_K(k, f, g), apply_K(k, q, g)
        assert abs(g.inner(kf, kq) - g.inner(q, f)) <= 1e-4 * g.norm(f) * g.norm(q)
        assert g.norm(apply_K(k, kf, g) - f) <= 1e-3 * g.norm(f)


def test_delta_off_grid():
    k = kernel_of(make_function("pw", [1.0 / 3.0]))
    with pytest.raises(DeltaOffGrid):
        apply_K(k, np.ones(64), Grid(0.0, 1.0, 1 / 64))
