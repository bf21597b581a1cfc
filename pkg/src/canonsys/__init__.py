"""Hamiltonians of canonical systems built from unimodular functions.

The conjugation ``(Kf)(x) = int k(x + y) conj(f(y)) dy`` with kernel
``k = F^{-1} u`` is discretized on a uniform grid; its compressions to
half-lines give the boundary solutions ``Phi, Psi``, the Hamiltonian
``H(t)``, the functions ``A~, B~`` and the reproducing kernels of the
chain of subspaces.
"""
from .errors import CanonsysError
from .grid import Grid
from .unimodular import UnimodularFunction, make_function, oracle_for
from .kernel import KernelRep, apply_K, kernel_of, numeric_kernel
from .operator import CompressedOperator, GridPolicy, compress, norm_scan, operator_norm, solve_pm
from .boundary import (
    BoundarySolution, HamiltonianSample, PhiPmPair, Workspace, boundary_solution, hamiltonian_from_diag,
    scan_hamiltonian, solve_phi_pm, solve_phi_psi,
)
from .evolution import ABState, EntireData, ab_direct, ab_ode, functional_equation_residual, theta_and_E
from .chain import (
    KernelSample, YVector, identity_suite, j_formula, j_gram, kernel_sample, t0_diagnostics,
    y_vector,
)

__version__ = "0.1.0"
__all__ = [
    "CanonsysError", "Grid", "UnimodularFunction", "make_function", "oracle_for",
    "KernelRep", "apply_K", "kernel_of", "numeric_kernel", "CompressedOperator", "GridPolicy",
    "compress", "norm_scan", "operator_norm", "solve_pm", "BoundarySolution",
    "HamiltonianSample", "PhiPmPair", "Workspace", "boundary_solution", "hamiltonian_from_diag",
    "scan_hamiltonian", "solve_phi_pm", "solve_phi_psi", "ABState", "EntireData",
    "ab_direct", "ab_ode", "functional_equation_residual", "theta_and_E", "KernelSample",
    "YVector", "identity_suite", "j_formula", "j_gram", "kernel_sample", "t0_diagnostics",
    "y_vector",
]
