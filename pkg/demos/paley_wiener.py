"""Paley-Wiener example u(x) = exp(2ix): a flat Hamiltonian and a finite t0.

The conjugation is a reflection about x = 1, the boundary solutions are
step functions and H(t) is the identity until the chain ends at t0 = 1.
"""
import math

import numpy as np

from canonsys import (
    GridPolicy, Workspace, ab_direct, boundary_solution, kernel_of, kernel_sample, make_function,
    scan_hamiltonian, t0_diagnostics,
)

h = 2 ** -7
u = make_function("pw", [1.0])
k = kernel_of(u)

ts = [-1.0, -0.5, 0.0, 0.5, 0.75]
for s in scan_hamiltonian(k, u, GridPolicy(spacing=h), ts):
    print(f"t={s.t:+.2f}  H =", np.round(s.matrix, 12).tolist())

ws = Workspace.for_range(k, u, GridPolicy(spacing=h), 0.0, 0.0)
bs = boundary_solution(ws, 0.0)
ab = ab_direct(bs, 1j)
print(f"A~(0, i) = {ab.A_tilde.real:.9f}   cosh(1)/e = {math.cosh(1) / math.e:.9f}")

ks = kernel_sample(ws, 0.0, 1j, 1j)
print(f"j(0; i, i): formula {ks.j_formula.real:.12f}  gram {ks.j_gram.real:.12f}  "
      f"exact {(1 - math.exp(-4)) / (4 * math.pi):.12f}")

rep = t0_diagnostics(k, u, GridPolicy(spacing=h), [i / 8 for i in range(0, 10)])
for t, j, y in zip(rep.t, rep.j_diag, rep.y_norm):
    print(f"t={t:.3f}  j(t; i, i)={j:.3e}  ||Y||={y:.4f}")
print("t0 estimate:", rep.t0_estimate, "| decay at t0:", rep.decay)
