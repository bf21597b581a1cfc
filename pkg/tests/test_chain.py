import math

import numpy as np
import pytest

from canonsys import boundary as bd
from canonsys import chain as ch
from canonsys.errors import DiagonalSingularity, DomainError
from canonsys.evolution import ABState, ab_direct
from canonsys.kernel import kernel_of
from canonsys.operator import GridPolicy
from canonsys.unimodular import make_function, oracle_for
from canonsys.verify import CHAIN_RIGHT_MARGIN

H = 2 ** -7


def _ws(pair, t_min, t_max, h=H, **kw):
    u, k = pair
    return bd.Workspace.for_range(k, u, GridPolicy(spacing=h, **kw), t_min, t_max)


def _y(ws, t, z):
    return ch.y_vector(ws.k, ws.u, ws.grid, t, z, ws=ws)


def _cell_norm(g, v):
    return math.sqrt(float(np.sum(np.abs(v) ** 2)) * g.spacing)


def test_pw_y_closed_form(pw):
    ws = _ws(pw, 0.0, 0.0)
    y = _y(ws, 0.0, 1j)
    x = ws.grid.nodes
    ref = oracle_for("pw", [1.0]).Y_closed(0.0, 1j, x)
    assert np.max(np.abs(y.samples - ref)) <= 1e-12
    assert np.allclose(ref[(x > 0) & (x < 2)], np.exp(-x[(x > 0) & (x < 2)]))


def test_mobius_y_closed_form(mobius):
    ws = _ws(mobius, -1.0, -1.0)
    x = ws.grid.nodes
    o = oracle_for("mobius")
    for z in (1j, 1 + 1j):
        y = _y(ws, -1.0, z)
        assert _cell_norm(ws.grid, y.samples - o.Y_closed(-1.0, z, x)) <= 1e-4


def test_y_domain(pw):
    ws = _ws(pw, 0.0, 0.0)
    with pytest.raises(DomainError):
        _y(ws, 0.0, 1.0)


@pytest.mark.parametrize("name,t", [("pw", 0.0), ("mobius", -1.0), ("gamma_ratio", 0.0)])
def test_reproducing_property(name, t, pw, mobius, gamma):
    pair = {"pw": pw, "mobius": mobius, "gamma_ratio": gamma}[name]
    ws = _ws(pair, t, t, right_margin=CHAIN_RIGHT_MARGIN)
    g = ws.grid
    rng = np.random.default_rng(11)
    for z in (1j, 1 + 1j):
        y = _y(ws, t, z)
        for _ in range(3):
            c = rng.uniform(t + 0.5, t + 1.5)
            h = np.exp(-4 * (g.nodes - c) ** 2) * (rng.normal() + 1j * rng.normal())
            f = ch.project_to_subspace(ws, t, h)
            assert _cell_norm(g, f) > 1e-3
            assert ch.reproducing_residual(ws, t, z, f, y=y) <= 1e-3


def test_j_examples(pw):
    ws = _ws(pw, 0.0, 0.0)
    ks = ch.kernel_sample(ws, 0.0, 1j, 1j)
    ref = (1 - math.exp(-4)) / (4 * math.pi)
    assert abs(ref - 0.078117) <= 1e-5
    assert abs(ks.j_formula - ref) <= 1e-6 and abs(ks.j_gram - ref) <= 1e-6
    assert abs(ks.J_value - math.sinh(2) / (2 * math.pi)) <= 1e-6
    ks = ch.kernel_sample(ws, 0.0, 1j, 2j)
    ref = (1 - math.exp(-6)) / (6 * math.pi)
    assert abs(ks.j_formula - ref) <= 1e-6 and abs(ks.j_gram - ref) <= 1e-6


def test_j_degenerate_and_singular():
    zero = ABState(t=0.0, z=1j, A_tilde=0, B_tilde=0, path="direct")
    assert ch.j_formula(zero, zero) == 0
    a = ABState(t=0.0, z=1 + 1j, A_tilde=1, B_tilde=1, path="direct")
    b = ABState(t=0.0, z=1 - 1j, A_tilde=1, B_tilde=1, path="direct")
    with pytest.raises(DiagonalSingularity):
        ch.j_formula(a, b)


@pytest.mark.parametrize("name,t", [("pw", -0.5), ("mobius", -1.0), ("gamma_ratio", 0.0)])
def test_kernel_axioms(name, t, pw, mobius, gamma):
    pair = {"pw": pw, "mobius": mobius, "gamma_ratio": gamma}[name]
    ws = _ws(pair, t, t, right_margin=CHAIN_RIGHT_MARGIN)
    bs = bd.boundary_solution(ws, t)
    zs = (1j, 2j, 1 + 1j, -1 + 1j, 0.5 + 1j)
    abs_ = [ab_direct(bs, z) for z in zs]
    G = np.array([[ch.j_formula(az, aw) for aw in abs_] for az in abs_])
    assert np.max(np.abs(G - G.conj().T)) <= 1e-10
    ev = np.linalg.eigvalsh(0.5 * (G + G.conj().T))
    assert ev.min() >= -1e-8 * np.trace(G).real
    ys = [_y(ws, t, z) for z in zs[:3]]
    for i, yz in enumerate(ys):
        for yw in ys[i:]:
            ks_f = ch.j_formula(abs_[zs.index(yz.z)], abs_[zs.index(yw.z)])
            ks_g = ch.j_gram(yz, yw)
            assert abs(ks_f - ks_g) <= 1e-3 * abs(ks_f)


def test_nesting(gamma, pw):
    for pair, ts in ((pw, (-1.0, -0.5, 0.0, 0.5)), (gamma, (-1.0, -0.5, 0.0, 0.5))):
        ws = _ws(pair, ts[0], ts[-1])
        js = [ch.j_formula(*(2 * [ab_direct(bd.boundary_solution(ws, t), 1j)])).real for t in ts]
        assert all(b <= a + 1e-8 for a, b in zip(js, js[1:]))


def test_model_space_at_zero():
    for name, params in (("pw", [1.0]), ("blaschke", [1j]), ("blaschke", [1 + 1j, -0.5 + 2j])):
        u = make_function(name, params)
        ws = _ws((u, kernel_of(u)), 0.0, 0.0)
        bs = bd.boundary_solution(ws, 0.0)
        for z, w in ((1j, 1j), (1j, 2j), (1 + 1j, -1 + 1j)):
            j = ch.j_formula(ab_direct(bs, z), ab_direct(bs, w))
            ref = ch.model_space_kernel(u.eval_cont(z), u.eval_cont(w), z, w)
            assert abs(j - ref) <= 1e-4


def test_mobius_J_limit(mobius):
    ws = _ws(mobius, -0.25, 0.0)
    Js = [ch.kernel_sample(ws, t, 1j, 1j).J_value.real for t in (-0.25, -1 / 16, 0.0)]
    gaps = [abs(J - 1 / math.pi) for J in Js]
    assert gaps[0] > gaps[1] > gaps[2] and gaps[2] <= 1e-3


def test_t0_pw(pw):
    u, k = pw
    ts = [i / 8 for i in range(-4, 8)] + [1.0 - H, 1.0, 1.0 + H]
    rep = ch.t0_diagnostics(k, u, GridPolicy(spacing=H), sorted(ts))
    assert abs(rep.t0_estimate - 1.0) <= H and rep.decay == "satisfied"
    yn = [v for v in rep.y_norm if math.isfinite(v)]
    assert all(b <= a + 1e-6 for a, b in zip(yn, yn[1:]))


def test_t0_mobius(mobius):
    u, k = mobius
    rep = ch.t0_diagnostics(k, u, GridPolicy(spacing=H), [-1.0, -0.5, -0.25, 0.0, 0.25])
    assert abs(rep.t0_estimate) <= H and rep.decay == "fails"
    assert rep.y_norm[rep.t.index(0.0)] > 0.1


def test_t0_gamma(gamma):
    u, k = gamma
    ts = [-1.0, -0.5, 0.0, 0.5]
    rep = ch.t0_diagnostics(k, u, GridPolicy(spacing=H, right_margin=CHAIN_RIGHT_MARGIN), ts)
    assert rep.t0_estimate == math.inf and not rep.errors
    assert all(j > 0 for j in rep.j_diag)
    assert all(b <= a + 1e-6 for a, b in zip(rep.y_norm, rep.y_norm[1:]))


def test_identity_suite_pw(pw):
    u, k = pw
    ws = _ws(pw, 0.5, 0.5)
    for rep in ch.identity_suite(k, u, ws.grid, 0.5, (1j, 1 + 1j), ws=ws):
        assert rep.worst <= 1e-6


def test_identity_suite_gamma_and_guard(gamma):
    u, k = gamma
    ws = _ws(gamma, 0.0, 0.0, right_margin=CHAIN_RIGHT_MARGIN)
    reps = ch.identity_suite(k, u, ws.grid, 0.0, (1j, 2j), ws=ws)
    assert max(r.worst for r in reps) <= 1e-3
    pair = bd.solve_phi_pm(k, u, ws.grid, 0.0, ws=ws)
    bad = ch.identity_residuals(ws, 0.0, 1j, pair=ch.perturbed(pair, 0.01))
    assert bad.residuals["fourier_plus"] > 5e-3
