"""Gamma-ratio example: a diagonal Hamiltonian that never degenerates.

The boundary diagonals follow exp(-+2e^t), so H(t) = diag(e^{-4e^t}, e^{4e^t}),
and A(t, z) matches a combination of modified Bessel functions of complex
order.  The ODE path is compared with the direct transforms.
"""
import math

import numpy as np

from canonsys import (
    GridPolicy, Workspace, ab_direct, boundary_solution, kernel_of, make_function, oracle_for,
    scan_hamiltonian, theta_and_E,
)
from canonsys.evolution import ab_ode_anchored

h = 2 ** -7
u = make_function("gamma_ratio")
k = kernel_of(u)
o = oracle_for("gamma_ratio")

for s in scan_hamiltonian(k, u, GridPolicy(spacing=h), [-1.0, 0.0, 0.5]):
    print(f"t={s.t:+.1f}  alpha={s.alpha:.6e} (exact {math.exp(-4 * math.exp(s.t)):.6e})  "
          f"beta={s.beta:+.1e}  gamma={s.gamma:.6e}")

ws = Workspace.for_range(k, u, GridPolicy(spacing=h), -1.0, 0.5)
for t in (-1.0, 0.0):
    bs = boundary_solution(ws, t)
    for z in (1j, 0.5 + 1j):
        ed = theta_and_E(ab_direct(bs, z), u.M_eval)
        ref = o.A_closed(t, z)
        print(f"A({t:+.1f}, {z}) = {ed.A:.8f}  closed form {complex(ref):.8f}  "
              f"rel err {abs(ed.A - ref) / abs(ref):.1e}  |theta| = {abs(ed.theta):.4f}")

ts = list(np.arange(-1.0, 0.5 + h / 2, h))
samples = scan_hamiltonian(k, u, GridPolicy(spacing=h), ts)
z = 1j
lower = ab_direct(boundary_solution(ws, -1.0), z)
upper = ab_direct(boundary_solution(ws, 0.5), z)
states, anchors = ab_ode_anchored(samples, lower, upper, [-0.5, 0.0])
for st, a in zip(states, anchors):
    d = ab_direct(boundary_solution(ws, st.t), z)
    print(f"t={st.t:+.1f}  ODE from t={a:+.1f}: A~={st.A_tilde:.8f}  direct {d.A_tilde:.8f}")
