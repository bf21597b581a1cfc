"""Replay of the closed-form examples and structural invariants as pass/fail checks.

Each ``criterion_N`` returns a :class:`CriterionResult` with the measured
quantities and the thresholds they were held to.  ``coarsen`` multiplies
every default spacing (a power of two keeps all lattices valid).
"""
from __future__ import annotations

import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import boundary as bd
from .boundary import Workspace, scan_hamiltonian
from .chain import (
    identity_residuals, kernel_sample, perturbed, t0_diagnostics, y_vector,
)
from .errors import CanonsysError
from .evolution import ab_direct, ab_ode_anchored, functional_equation_residual, theta_and_E
from .grid import Grid
from .kernel import apply_K, kernel_of
from .operator import (
    DEFAULT_SPACING, CompressedOperator, GridPolicy, neumann_solve, norm_scan, operator_norm,
    solve_pm,
)
from .unimodular import make_function, oracle_for

Z_LATTICE = (1j, 2j, 1 + 1j, -1 + 1j, 0.5 + 1j)
T_LATTICE = {
    "pw": (-1.0, -0.5, 0.0, 0.5, 0.75),
    "mobius": (-2.0, -1.0, -0.25),
    "gamma_ratio": (-1.0, 0.0, 0.5),
}
# reproducing vectors of the Gamma ratio carry an e^{-x/4} chirp; wider window
CHAIN_RIGHT_MARGIN = 20.0
FUNCTIONS = {
    "pw": ("pw", [1.0]),
    "mobius": ("mobius", []),
    "gamma_ratio": ("gamma_ratio", []),
}


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0
    error: str | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d}: {self.title} ({self.seconds:.1f}s)"


def _setup(name: str):
    id_, params = FUNCTIONS[name]
    u = make_function(id_, params)
    return u, kernel_of(u)


def _rel(a, b) -> float:
    return float(abs(a - b) / max(abs(b), 1e-300))


def _ws(u, k, t_min, t_max, spacing, **kw):
    return Workspace.for_range(k, u, GridPolicy(spacing=spacing, **kw), t_min, t_max)


# ---------------------------------------------------------------------------
# criteria


def criterion_1(coarsen: int = 1) -> dict:
    """pw(1): H(t) = I on t in [-1, 0.9] with step 0.1."""
    h = coarsen / 160.0
    u, k = _setup("pw")
    ts = [round(-1.0 + 0.1 * i, 10) for i in range(20)]
    samples = scan_hamiltonian(k, u, GridPolicy(spacing=h), ts)
    bad = [s for s in samples if isinstance(s, bd.ScanFailure)]
    dev = max((float(np.max(np.abs(s.matrix - np.eye(2)))) for s in samples
               if not isinstance(s, bd.ScanFailure)), default=math.inf)
    return dict(passed=not bad and dev <= 1e-6, max_dev_from_identity=dev, spacing=h,
                failures=[s.error for s in bad], tol=1e-6)


def criterion_2(coarsen: int = 1) -> dict:
    """pw(1) kernel at (0, i, i) by both paths, and J = sinh(2)/(2 pi)."""
    h = DEFAULT_SPACING * coarsen
    u, k = _setup("pw")
    ws = _ws(u, k, 0.0, 0.0, h)
    ks = kernel_sample(ws, 0.0, 1j, 1j)
    j_ref = (1 - math.exp(-4)) / (4 * math.pi)
    J_ref = math.sinh(2) / (2 * math.pi)
    m = dict(j_formula=ks.j_formula.real, j_gram=ks.j_gram.real, J=ks.J_value.real,
             err_formula=_rel(ks.j_formula, j_ref), err_gram=_rel(ks.j_gram, j_ref),
             err_J=_rel(ks.J_value, J_ref), tol=1e-4)
    m["passed"] = max(m["err_formula"], m["err_gram"], m["err_J"]) <= 1e-4
    return m


def criterion_3(coarsen: int = 1) -> dict:
    """pw(1): t0 = 1 within h, ||Y|| decreasing to 0."""
    h = DEFAULT_SPACING * coarsen
    u, k = _setup("pw")
    ts = sorted(set([i / 16 for i in range(0, 20)] + [1.0 + j * h for j in (-2, -1, 0, 1, 2)]))
    rep = t0_diagnostics(k, u, GridPolicy(spacing=h), ts)
    yn = [v for v in rep.y_norm if math.isfinite(v)]
    mono = all(b <= a + 1e-6 for a, b in zip(yn, yn[1:]))
    ok = abs(rep.t0_estimate - 1.0) <= h + 1e-12 and mono and rep.decay == "satisfied"
    return dict(passed=ok, t0_estimate=rep.t0_estimate, spacing=h, y_norm_monotone=mono,
                y_norm_first=yn[0] if yn else math.nan, y_norm_last=yn[-1] if yn else math.nan,
                decay=rep.decay)


def criterion_4(coarsen: int = 1) -> dict:
    """mobius: A, B closed forms; J(t; i, i) -> 1/pi as t -> 0-, and the decay fails."""
    h = DEFAULT_SPACING * coarsen
    u, k = _setup("mobius")
    o = oracle_for("mobius")
    ws = _ws(u, k, -2.0, 0.0, h)
    worst_A = worst_B = 0.0
    for t in (-2.0, -1.0, -0.25):
        bs = bd.boundary_solution(ws, t)
        for z in (1j, 2j, 1 + 1j):
            ed = theta_and_E(ab_direct(bs, z), u.M_eval)
            worst_A = max(worst_A, _rel(ed.A, o.A_closed(t, z)))
            worst_B = max(worst_B, _rel(ed.B, o.B_closed(t, z)))
    js = []
    for t in (-0.25, -1 / 16, -1 / 128, 0.0):
        js.append((t, kernel_sample(ws, t, 1j, 1j).J_value.real))
    gaps = [abs(J - 1 / math.pi) for _, J in js]
    approach = all(b < a for a, b in zip(gaps, gaps[1:]))
    rep = t0_diagnostics(k, u, GridPolicy(spacing=h), [-1.0, -0.5, -0.25, 0.0, 0.25])
    ok = (max(worst_A, worst_B) <= 1e-4 and gaps[-1] <= 1e-3 and approach
          and rep.decay == "fails" and abs(rep.t0_estimate) <= h)
    return dict(passed=ok, max_rel_err_A=worst_A, max_rel_err_B=worst_B,
                J_path=js, J_limit_gap=gaps[-1], t0_estimate=rep.t0_estimate,
                y_norm_at_t0=rep.y_norm[rep.t.index(rep.t0_estimate)] if math.isfinite(rep.t0_estimate) else math.nan,
                decay=rep.decay)


def criterion_5(coarsen: int = 1) -> dict:
    """Gamma ratio diagonals ``e^{-+2e^t}``."""
    h = DEFAULT_SPACING * coarsen
    u, k = _setup("gamma_ratio")
    o = oracle_for("gamma_ratio")
    samples = scan_hamiltonian(k, u, GridPolicy(spacing=h), [-1.0, 0.0, 0.5])
    errs = {}
    for s in samples:
        if isinstance(s, bd.ScanFailure):
            errs[s.t] = (math.inf, math.inf)
            continue
        errs[s.t] = (_rel(s.phi_diag, o.Phi_diag(s.t)), _rel(s.psi_diag, o.Psi_diag(s.t)))
    worst = max(max(v) for v in errs.values())
    return dict(passed=worst <= 1e-3, rel_err=errs, worst=worst, tol=1e-3)


def criterion_6(coarsen: int = 1) -> dict:
    """Gamma ratio: Re(Phi conj Psi) at x = t stays 1 along the scan."""
    h = DEFAULT_SPACING * coarsen
    u, k = _setup("gamma_ratio")
    ts = [-1.0 + i / 8 for i in range(13)]
    samples = scan_hamiltonian(k, u, GridPolicy(spacing=h), ts)
    vals = [s.re_phipsibar if not isinstance(s, bd.ScanFailure) else math.nan for s in samples]
    dev = max(abs(v - 1) if math.isfinite(v) else math.inf for v in vals)
    return dict(passed=dev <= 1e-3, max_dev=dev, values=list(zip(ts, vals)), tol=1e-3)


def criterion_7(coarsen: int = 1) -> dict:
    """Gamma ratio A(t, z) against the Bessel-K closed form."""
    h = DEFAULT_SPACING * coarsen
    u, k = _setup("gamma_ratio")
    o = oracle_for("gamma_ratio")
    ws = _ws(u, k, -1.0, 0.0, h)
    errs = {}
    for t in (-1.0, 0.0):
        bs = bd.boundary_solution(ws, t)
        for z in (1j, 0.5 + 1j):
            ed = theta_and_E(ab_direct(bs, z), u.M_eval)
            errs[f"t={t}, z={z}"] = _rel(ed.A, o.A_closed(t, z))
    worst = max(errs.values())
    return dict(passed=worst <= 1e-3, rel_err=errs, worst=worst, tol=1e-3)


def criterion_8(coarsen: int = 1) -> dict:
    """Inner functions at t = 0: A~(0, z) = (1 + u(z))/2."""
    h = DEFAULT_SPACING * coarsen
    out = {}
    for id_, params in (("pw", [1.0]), ("mobius", []), ("blaschke", [1j])):
        u = make_function(id_, params)
        k = kernel_of(u)
        bs = bd.boundary_solution(Workspace.for_range(k, u, GridPolicy(spacing=h), 0.0, 0.0), 0.0)
        out[id_] = max(abs(ab_direct(bs, z).A_tilde - 0.5 * (1 + u.eval_cont(z))) for z in Z_LATTICE)
    worst = max(out.values())
    return dict(passed=worst <= 1e-4, max_abs_err=out, worst=worst, tol=1e-4)


STRUCTURAL_CASES = (
    ("pw", [1.0], (-1.0, -0.5, 0.0, 0.5, 0.75)),
    ("mobius", [], (-2.0, -1.0, -0.25)),
    ("blaschke", [1j], (-1.0, -0.5, 0.0)),
    ("blaschke", [1 + 1j, -0.5 + 2j], (-1.0, -0.5, 0.0)),
    ("gamma_ratio", [], (-1.0, 0.0, 0.5)),
    ("product", [("pw", [0.25]), ("gamma_ratio", [])], (-1.0, 0.0, 0.5)),
    ("product", [("pw", [0.5]), ("mobius", [])], (-1.0, 0.0, 0.5)),
)


def diag_relation_check(n: int = 200, seed: int = 0, flip_beta: bool = False) -> float:
    """Worst residual of the two-by-two system on random ``(Phi, Psi)`` pairs."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < n:
        phi, psi = rng.normal(size=2) + 1j * rng.normal(size=2)
        try:
            s = bd.hamiltonian_from_diag(phi, psi)
        except CanonsysError:
            continue
        if flip_beta:
            s = bd.HamiltonianSample(s.t, s.alpha, -s.beta, s.gamma, s.definite_sign,
                                     s.re_phipsibar, s.phi_diag, s.psi_diag)
        worst = max(worst, bd.diag_relation_residual(s))
        done += 1
    return worst


def criterion_9(coarsen: int = 1, flip_beta: bool = False) -> dict:
    """det H = 1, beta = 0 when symmetric, |theta| <= 1, boundary functional equation."""
    h = DEFAULT_SPACING * coarsen
    det_dev = beta_dev = theta_max = fe_max = 0.0
    per = {}
    for id_, params, ts in STRUCTURAL_CASES:
        u = make_function(id_, params)
        k = kernel_of(u)
        ws = Workspace.for_range(k, u, GridPolicy(spacing=h), min(ts), max(ts))
        samples = scan_hamiltonian(k, u, GridPolicy(spacing=h), ts, ws=ws)
        fails = [s.error for s in samples if isinstance(s, bd.ScanFailure)]
        d = b = th = fe = 0.0
        for s in samples:
            if isinstance(s, bd.ScanFailure):
                continue
            beta = -s.beta if flip_beta else s.beta
            d = max(d, abs(s.alpha * s.gamma - beta ** 2 - 1))
            if u.symmetric:
                b = max(b, abs(beta))
            bs = bd.boundary_solution(ws, s.t)
            for z in Z_LATTICE:
                th = max(th, abs(theta_and_E(ab_direct(bs, z), u.M_eval).theta))
            fe = max(fe, functional_equation_residual(bs, [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0]))
        name = f"{id_}{params}"
        per[name] = dict(det_dev=d, beta_dev=b, theta_max=th, fe=fe, failures=fails)
        det_dev, beta_dev = max(det_dev, d), max(beta_dev, b)
        theta_max, fe_max = max(theta_max, th), max(fe_max, fe)
        if fails:
            det_dev = math.inf
    relation = diag_relation_check(flip_beta=flip_beta)
    ok = (det_dev <= 1e-9 and beta_dev <= 1e-9 and theta_max <= 1 + 1e-8 and fe_max <= 1e-3
          and relation <= 1e-12)
    return dict(passed=ok, det_dev=det_dev, beta_dev=beta_dev, theta_max=theta_max,
                functional_equation=fe_max, diag_relation_residual=relation, cases=per)


def _path_agreement(name: str, h: float, budget: float):
    u, k = _setup(name)
    ts = T_LATTICE[name]
    lo, hi = min(ts), max(ts)
    ws = _ws(u, k, lo, hi, h)
    n = int(round((hi - lo) / h))
    grid_t = [lo + i * h for i in range(n + 1)]
    samples = scan_hamiltonian(k, u, GridPolicy(spacing=h), grid_t, ws=ws)
    fails = [s for s in samples if isinstance(s, bd.ScanFailure)]
    if fails:
        raise CanonsysError(f"Hamiltonian scan failed: {fails[0].error}")
    bss = {t: bd.boundary_solution(ws, t) for t in ts}
    worst = 0.0
    for z in Z_LATTICE:
        direct = {t: ab_direct(bss[t], z) for t in ts}
        states, _ = ab_ode_anchored(samples, direct[lo], direct[hi], ts, budget=budget)
        for t, s in zip(ts, states):
            d = direct[t]
            scale = max(abs(d.A_tilde), abs(d.B_tilde))
            worst = max(worst, abs(s.A_tilde - d.A_tilde) / scale, abs(s.B_tilde - d.B_tilde) / scale)
    return worst


def criterion_10(coarsen: int = 1) -> dict:
    """ODE and direct paths agree; the gap shrinks under refinement of h and dt."""
    base = DEFAULT_SPACING * coarsen
    levels = [4 * base, 2 * base, base]
    out = {}
    ok = True
    for name in FUNCTIONS:
        # the step guard is waived on the coarse levels of the refinement study
        res = [_path_agreement(name, h, math.inf if h > base else 1e-4) for h in levels]
        ratios = [a / b if b > 0 else math.inf for a, b in zip(res, res[1:])]
        good = res[-1] <= 1e-3 and all(r >= 1.5 for r in ratios)
        out[name] = dict(spacings=levels, max_rel_diff=res, ratios=ratios, passed=good)
        ok = ok and good
    return dict(passed=ok, **out)


def _random_compact(rng, x, lo, hi):
    c = rng.uniform(lo + 1, hi - 1)
    w = rng.uniform(0.3, 0.8)
    bump = np.exp(-((x - c) / w) ** 2) * (np.abs(x - c) < 1)
    return bump * np.exp(1j * rng.uniform(-3, 3) * x) * (rng.normal() + 1j * rng.normal())


def criterion_11(coarsen: int = 1, seed: int = 0) -> dict:
    """Isometry and involution of K, the pw norm jump, Neumann-series solves."""
    h = DEFAULT_SPACING * coarsen
    rng = np.random.default_rng(seed)
    u, k = _setup("mobius")
    g = Grid(-10.0, 10.0, h)
    x = g.nodes
    iso = inv = 0.0
    for _ in range(3):
        f = _random_compact(rng, x, -2, 2)
        q = _random_compact(rng, x, -2, 2)
        kf, kq = apply_K(k, f, g), apply_K(k, q, g)
        nf, nq = np.sqrt(np.sum(abs(f) ** 2) * h), np.sqrt(np.sum(abs(q) ** 2) * h)
        lhs = np.sum(kf * np.conj(kq)) * h
        rhs = np.sum(q * np.conj(f)) * h
        iso = max(iso, abs(lhs - rhs) / (nf * nq))
        inv = max(inv, np.sqrt(np.sum(abs(apply_K(k, kf, g) - f) ** 2) * h) / nf)
    pu, pk = _setup("pw")
    ts = [1.0 + j * h for j in range(-3, 4)]
    norms = norm_scan(pk, ts, GridPolicy(spacing=h))
    below = [n for t, n in norms if t <= 1.0]
    above = [n for t, n in norms if t > 1.0]
    first_one = min(t for t, n in norms if n > 0.5)
    jump = max(below) <= 1e-6 and min(above) >= 1 - 1e-6 and abs(first_one - 1.0) <= h + 1e-12
    gu, gk = _setup("gamma_ratio")
    neumann = 0.0
    used = 0
    for trial in range(40):
        if used >= 6:
            break
        hh = 2.0 ** -int(rng.integers(2, 5))
        t = -float(rng.integers(1, 4))
        n = int(rng.integers(2, 9))
        grid = Grid(t - n * hh, t + 4.0, hh)
        op = CompressedOperator(gk, grid, t)
        if op.n > 8 or operator_norm(op) > 0.5:
            continue
        used += 1
        rhs = rng.normal(size=op.n) + 1j * rng.normal(size=op.n)
        for sign in (1, -1):
            a = solve_pm(op, rhs, sign)
            b = neumann_solve(op, rhs, sign)
            neumann = max(neumann, float(np.max(np.abs(a - b)) / np.max(np.abs(b))))
    ok = iso <= 1e-4 and inv <= 1e-3 and jump and neumann <= 1e-8 and used > 0
    return dict(passed=ok, isometry=iso, involution=inv, pw_norms=norms, pw_jump_ok=jump,
                neumann_max_diff=neumann, neumann_instances=used)


def criterion_12(coarsen: int = 1) -> dict:
    """Identity residuals: closed-form regime for pw and pipeline consistency for Gamma."""
    h = DEFAULT_SPACING * coarsen
    out = {}
    u, k = _setup("pw")
    pw_worst = 0.0
    for t in (0.5, 0.0):
        ws = _ws(u, k, t, t, h)
        pair = bd.solve_phi_pm(k, u, ws.grid, t, ws=ws)
        r = identity_residuals(ws, t, 1j, pair=pair)
        pw_worst = max(pw_worst, r.worst)
        out[f"pw t={t}"] = r.residuals
    u, k = _setup("gamma_ratio")
    ws = _ws(u, k, 0.0, 0.0, h, right_margin=CHAIN_RIGHT_MARGIN)
    pair = bd.solve_phi_pm(k, u, ws.grid, 0.0, ws=ws)
    bs = bd.boundary_solution(ws, 0.0)
    g_worst = 0.0
    guard = math.inf
    for z in (1j, 2j):
        y = y_vector(k, u, ws.grid, 0.0, z, ws=ws)
        r = identity_residuals(ws, 0.0, z, pair=pair, y=y, bs=bs)
        g_worst = max(g_worst, r.worst)
        out[f"gamma t=0 z={z}"] = r.residuals
        bad = identity_residuals(ws, 0.0, z, pair=perturbed(pair, 0.01), y=y, bs=bs)
        guard = min(guard, bad.residuals["fourier_plus"])
    ok = pw_worst <= 1e-6 and g_worst <= 1e-3 and guard > 5e-3
    return dict(passed=ok, pw_worst=pw_worst, gamma_worst=g_worst,
                perturbed_fourier_plus=guard, residuals=out)


CRITERIA: dict[int, tuple[str, Callable]] = {
    1: ("Paley-Wiener Hamiltonian is the identity", criterion_1),
    2: ("Paley-Wiener kernel by formula and Gram integral", criterion_2),
    3: ("Paley-Wiener chain endpoint and decay", criterion_3),
    4: ("Mobius A, B and the kernel limit at t = 0", criterion_4),
    5: ("Gamma-ratio diagonal values", criterion_5),
    6: ("Gamma-ratio Re(Phi conj Psi) constant", criterion_6),
    7: ("Gamma-ratio A-function", criterion_7),
    8: ("Inner-function initial condition", criterion_8),
    9: ("Structural invariants", criterion_9),
    10: ("ODE/direct path agreement and convergence", criterion_10),
    11: ("Operator-layer properties", criterion_11),
    12: ("Kernel identity residuals", criterion_12),
}


def _to_builtin(obj):
    if isinstance(obj, dict):
        return {str(k): _to_builtin(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_to_builtin(v) for v in obj]
    if isinstance(obj, (complex, np.complexfloating)):
        c = complex(obj)
        return [c.real, c.imag] if c.imag else c.real
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def run_criterion(number: int, coarsen: int = 1, **kw) -> CriterionResult:
    title, fn = CRITERIA[number]
    start = time.perf_counter()
    try:
        m = fn(coarsen=coarsen, **kw)
        passed = bool(m.pop("passed"))
        err = None
    except Exception as exc:  # reported, never swallowed silently
        m, passed = {}, False
        err = f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"
    return CriterionResult(number, title, passed, _to_builtin(m), time.perf_counter() - start, err)


def run_all(numbers=None, coarsen: int = 1, jobs: int = 1) -> list[CriterionResult]:
    """Run the selected criteria; results come back in criterion order."""
    numbers = sorted(CRITERIA) if numbers is None else list(numbers)
    if jobs <= 1:
        return [run_criterion(n, coarsen) for n in numbers]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run_criterion, numbers, [coarsen] * len(numbers)))


def report(results: list[CriterionResult]) -> dict:
    return dict(passed=all(r.passed for r in results), criteria=[asdict(r) for r in results])
