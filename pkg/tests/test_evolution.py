import cmath
import math

import numpy as np
import pytest

from canonsys import boundary as bd
from canonsys import evolution as ev
from canonsys.errors import (
    DivisionByZero, DomainError, OscillationUnderResolved, StepSizeTooCoarse,
)
from canonsys.kernel import kernel_of
from canonsys.operator import GridPolicy
from canonsys.unimodular import make_function, oracle_for


def _bs(pair, t, h=2 ** -7):
    u, k = pair
    ws = bd.Workspace.for_range(k, u, GridPolicy(spacing=h), t, t)
    return bd.boundary_solution(ws, t)


def _identity_samples(t0, t1, dt):
    ts = np.arange(t0, t1 + dt / 2, dt)
    return [bd.HamiltonianSample(t=float(t), alpha=1.0, beta=0.0, gamma=1.0, definite_sign=1)
            for t in ts]


def test_pw_direct_example(pw):
    ab = ev.ab_direct(_bs(pw, 0.0), 1j)
    assert abs(ab.A_tilde - cmath.cos(1j) / math.e) <= 1e-6
    assert abs(ab.A_tilde - 0.567668) <= 1e-6
    assert ab.path == "direct"


def test_mobius_direct_example(mobius):
    ab = ev.ab_direct(_bs(mobius, -1.0), 1j)
    assert abs(ab.A_tilde - math.e / 2) <= 1e-5
    assert abs(ab.A_tilde - 1.359141) <= 1e-5


def test_direct_at_zero(pw):
    for t in (-0.5, 0.0, 0.5):
        ab = ev.ab_direct(_bs(pw, t), 0)
        assert ab.A_tilde == 1 and ab.B_tilde == 0
        near = ev.ab_direct(_bs(pw, t), 1e-6j)
        assert abs(near.A_tilde - 1) <= 1e-5


def test_direct_against_closed_forms(pw, mobius):
    for name, pair, ts in (("pw", pw, (-0.5, 0.25)), ("mobius", mobius, (-2.0, -0.25))):
        u, _ = pair
        o = oracle_for(name)
        for t in ts:
            bs = _bs(pair, t)
            for z in (1j, 2j, 1 + 1j, -1 + 1j):
                ed = ev.theta_and_E(ev.ab_direct(bs, z), u.M_eval)
                assert abs(ed.A / o.A_closed(t, z) - 1) <= 1e-4
                assert abs(ed.B / o.B_closed(t, z) - 1) <= 1e-4


def test_direct_errors(pw):
    bs = _bs(pw, 0.0)
    with pytest.raises(DomainError):
        ev.ab_direct(bs, 1 - 1j)
    with pytest.raises(OscillationUnderResolved):
        ev.ab_direct(bs, 20 + 1j)


def test_ode_identity_hamiltonian():
    o = oracle_for("pw", [1.0])
    z = 1 + 1j
    t1, t2 = -1.0, 0.5
    init = ev.ABState(t=t1, z=z, A_tilde=complex(o.A_closed(t1, z)),
                      B_tilde=complex(o.B_closed(t1, z)), path="direct")
    out = ev.ab_ode(_identity_samples(t1, t2, 0.005), init, t2)
    assert out.path == "ode"
    assert abs(out.A_tilde / o.A_closed(t2, z) - 1) <= 1e-6
    assert abs(out.B_tilde / o.B_closed(t2, z) - 1) <= 1e-6
    assert out.err <= 1e-6


def test_ode_zero_length():
    init = ev.ABState(t=0.3, z=1j, A_tilde=2 + 1j, B_tilde=-1j, path="direct")
    assert ev.ab_ode(_identity_samples(0.0, 1.0, 0.01), init, 0.3) is init
    P = ev.propagator(_identity_samples(0.0, 1.0, 0.01), 0.3, 0.3, 1j)
    assert np.array_equal(P, np.eye(2))


def test_ode_step_too_coarse():
    init = ev.ABState(t=0.0, z=30j, A_tilde=1, B_tilde=0, path="direct")
    with pytest.raises(StepSizeTooCoarse):
        ev.ab_ode(_identity_samples(0.0, 1.0, 0.25), init, 1.0)


def test_ode_matches_direct_pw(pw):
    u, k = pw
    h = 2 ** -6
    ts = list(np.arange(-1.0, 0.5 + h / 2, h))
    samples = bd.scan_hamiltonian(k, u, GridPolicy(spacing=h), ts)
    for z in (1j, 1 + 1j):
        init = ev.ab_direct(_bs(pw, -1.0, h), z)
        out = ev.ab_ode(samples, init, 0.5)
        ref = ev.ab_direct(_bs(pw, 0.5, h), z)
        assert abs(out.A_tilde - ref.A_tilde) <= 1e-3 * abs(ref.A_tilde)
        assert abs(out.B_tilde - ref.B_tilde) <= 1e-3 * abs(ref.B_tilde)


def test_theta_examples(pw):
    ed = ev.theta_and_E(ev.ab_direct(_bs(pw, 0.0), 1j), pw[0].M_eval)
    assert abs(ed.theta - math.exp(-2)) <= 1e-6
    assert ed.E == ed.A - 1j * ed.B
    u = make_function("blaschke", [1j])
    bs = _bs((u, kernel_of(u)), 0.0)
    ab = ev.ab_direct(bs, 2j)
    ed = ev.theta_and_E(ab, u.M_eval)
    assert abs(ed.theta - 1 / 3) <= 1e-4
    assert abs(ed.theta * (ab.A_tilde - 1j * ab.B_tilde) - (ab.A_tilde + 1j * ab.B_tilde)) <= 1e-10


def test_theta_division_by_zero():
    ab = ev.ABState(t=0.0, z=1j, A_tilde=1.0, B_tilde=-1j, path="direct")
    with pytest.raises(DivisionByZero):
        ev.theta_and_E(ab, lambda z: 1.0)


@pytest.mark.parametrize("name,params,ts", [
    ("pw", [1.0], (-1.0, 0.0, 0.75)),
    ("mobius", [], (-2.0, -0.25)),
    ("blaschke", [1 + 1j], (-0.5, 0.0)),
    ("gamma_ratio", [], (-1.0, 0.5)),
])
def test_theta_bounded(name, params, ts):
    u = make_function(name, params)
    pair = (u, kernel_of(u))
    for t in ts:
        bs = _bs(pair, t)
        for z in (1j, 2j, 1 + 1j, -1 + 1j, 0.5 + 1j, 0.1j):
            assert abs(ev.theta_and_E(ev.ab_direct(bs, z), u.M_eval).theta) <= 1 + 1e-8


def test_inner_initial_condition():
    for name, params in (("pw", [1.0]), ("mobius", []), ("blaschke", [1j])):
        u = make_function(name, params)
        o = oracle_for(name, params)
        bs = _bs((u, kernel_of(u)), 0.0)
        for z in (1j, 2j, 1 + 1j, -1 + 1j):
            ab = ev.ab_direct(bs, z)
            a0, b0 = o.initial(z)
            assert abs(ab.A_tilde - a0) <= 1e-4 and abs(ab.B_tilde - b0) <= 1e-4


def test_functional_equation(pw, mobius, gamma):
    xs = (-2.0, -1.0, 1.0, 2.0)
    assert ev.functional_equation_residual(_bs(pw, 0.0), xs) <= 1e-6
    assert ev.functional_equation_residual(_bs(mobius, -1.0), xs) <= 1e-4
    assert ev.functional_equation_residual(_bs(gamma, 0.0), (-1.0, -0.5, 0.5, 1.0)) <= 1e-3
    with pytest.raises(OscillationUnderResolved):
        ev.functional_equation_residual(_bs(pw, 0.0), (40.0,))


def test_continuity_in_t(gamma):
    u, k = gamma
    ws = bd.Workspace.for_range(k, u, GridPolicy(spacing=2 ** -7), 0.0, 0.25)
    a0 = ev.ab_direct(bd.boundary_solution(ws, 0.0), 1j).A_tilde
    diffs = [abs(ev.ab_direct(bd.boundary_solution(ws, dt), 1j).A_tilde - a0)
             for dt in (0.25, 0.125, 0.0625)]
    assert diffs[0] > diffs[1] > diffs[2]
    assert 1.5 <= diffs[0] / diffs[1] <= 2.5 and 1.5 <= diffs[1] / diffs[2] <= 2.5
