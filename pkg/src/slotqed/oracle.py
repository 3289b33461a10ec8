"""Exact references for the mean-field dynamics.

``lindblad_steady_state`` solves the full master equation of up to six
stationary atoms on the 2^N Hilbert space, using the same coupling matrices
as the mean-field path. ``single_atom_scattering`` gives the closed-form
weak-probe response of one atom coupled to the guide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply, spsolve

from .errors import DomainError, SteadyStateError
from .greens import CouplingMatrices

MAX_ATOMS = 6

# single-atom basis: index 0 = ground, 1 = excited
_LOWER = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))  # |g><e|
_ID2 = sp.identity(2, dtype=complex, format="csr")


def _site(op, m, n):
    return reduce(lambda a, b: sp.kron(a, b, format="csr"), [op if j == m else _ID2 for j in range(n)])


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    rho: np.ndarray
    n_atoms: int

    def __post_init__(self):
        if self.n_atoms > MAX_ATOMS:
            raise DomainError(f"at most {MAX_ATOMS} atoms")
        if self.rho.shape != (2**self.n_atoms,) * 2:
            raise DomainError("density matrix dimension must be 2^N")

    def check(self, herm_tol=1e-12, trace_tol=1e-12, eig_tol=-1e-10):
        r = self.rho
        if np.max(np.abs(r - r.conj().T)) > herm_tol:
            raise SteadyStateError("density matrix not Hermitian")
        if abs(np.trace(r) - 1) > trace_tol:
            raise SteadyStateError("density matrix trace differs from 1")
        if np.linalg.eigvalsh(0.5 * (r + r.conj().T)).min() < eig_tol:
            raise SteadyStateError("density matrix not positive semidefinite")
        return self

    def expect(self, op) -> complex:
        return complex((op @ self.rho).trace() if sp.issparse(op) else np.trace(op @ self.rho))

    def excited(self, m: int) -> float:
        # <sigma_ee^m> summed over basis states with atom m excited
        n = self.n_atoms
        d = np.real(np.diag(self.rho)).reshape((2,) * n)
        return float(np.moveaxis(d, m, 0)[1].sum())

    def coherence(self, m: int) -> complex:
        """<sigma_ge^m> = tr(rho |g><e|_m)."""
        return self.expect(_site(_LOWER, m, self.n_atoms))

    @property
    def excited_all(self) -> np.ndarray:
        return np.array([self.excited(m) for m in range(self.n_atoms)])


def liouvillian(couplings: CouplingMatrices, drives, detuning: float) -> sp.csr_matrix:
    """Column-stacked superoperator of the master equation.

    H = sum_m [Delta0 s_ee^m - (Omega_m s_eg^m + h.c.)] + sum_{m != n} J_mn s_eg^m s_ge^n,
    D(rho) = sum_mn Gamma_mn / 2 (2 s_ge^m rho s_eg^n - {s_eg^n s_ge^m, rho}).
    ``detuning`` is atom minus laser frequency.
    """
    n = couplings.n
    if n > MAX_ATOMS:
        raise DomainError(f"exact solver limited to {MAX_ATOMS} atoms")
    drives = np.broadcast_to(np.asarray(drives, dtype=complex), (n,))
    lower = [_site(_LOWER, m, n) for m in range(n)]
    raise_ = [op.conj().T.tocsr() for op in lower]
    dim = 2**n
    eye = sp.identity(dim, dtype=complex, format="csr")

    H = sp.csr_matrix((dim, dim), dtype=complex)
    for m in range(n):
        H = H + detuning * (raise_[m] @ lower[m])
        H = H - (drives[m] * raise_[m] + np.conj(drives[m]) * lower[m])
        for k in range(n):
            if k != m and couplings.J[m, k] != 0:
                H = H + couplings.J[m, k] * (raise_[m] @ lower[k])

    L = -1j * (sp.kron(eye, H) - sp.kron(H.T, eye))
    G = couplings.Gamma
    for m in range(n):
        for k in range(n):
            g = G[m, k]
            if g == 0:
                continue
            nm = raise_[k] @ lower[m]
            L = L + 0.5 * g * (2 * sp.kron(raise_[k].T, lower[m]) - sp.kron(eye, nm) - sp.kron(nm.T, eye))
    return L.tocsr()


def _vec(rho):
    return np.asarray(rho).reshape(-1, order="F")


def _unvec(v, dim):
    return v.reshape((dim, dim), order="F")


def _ground(dim):
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1
    return rho


def lindblad_steady_state(couplings: CouplingMatrices, drives, detuning: float, method: str = "solve", gamma0: float | None = None, max_chunks: int = 200) -> DensityMatrix:
    """Stationary state of the N-atom master equation.

    ``method="solve"`` does a sparse solve for the deviation from the ground
    state, with one redundant population equation replaced by the trace
    condition. ``method="evolve"`` propagates from the ground state in steps
    of 50 / Gamma0 until the state has stopped changing.
    """
    n = couplings.n
    dim = 2**n
    L = liouvillian(couplings, drives, detuning)
    rate = float(gamma0 if gamma0 is not None else np.min(couplings.decay))
    if method == "solve":
        v0 = _vec(_ground(dim))
        rhs = -(L @ v0)
        A = L.tolil()
        tr_row = np.zeros(dim * dim, dtype=complex)
        tr_row[:: dim + 1] = 1
        A[0, :] = tr_row
        rhs[0] = 0
        y = spsolve(A.tocsc(), rhs)
        if not np.all(np.isfinite(y)):
            raise SteadyStateError("steady state is not unique")
        v = v0 + y
    elif method == "evolve":
        # subradiant pairs relax slowly, so keep stepping in 50 / Gamma0 chunks
        v = _vec(_ground(dim))
        for _ in range(max_chunks):
            v = expm_multiply(L * (50 / rate), v)
            if np.linalg.norm(L @ v) < 1e-12 * rate:
                break
        else:
            raise SteadyStateError(f"master equation did not settle within {50 * max_chunks} / Gamma0")
    else:
        raise DomainError(f"unknown method {method!r}")
    if np.linalg.norm(L @ v) > 1e-8 * rate * max(1.0, np.linalg.norm(v)):
        raise SteadyStateError("steady-state residual too large; state may not be unique")
    rho = _unvec(v, dim)
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho, n)


def evolve(couplings: CouplingMatrices, drives, detuning: float, rho0, times) -> list[DensityMatrix]:
    """Density matrices at ``times`` starting from ``rho0`` at t = 0."""
    n = couplings.n
    dim = 2**n
    L = liouvillian(couplings, drives, detuning)
    times = np.asarray(times, dtype=float)
    out = expm_multiply(L, _vec(rho0), start=0.0, stop=float(times[-1]), num=times.size, endpoint=True)
    return [DensityMatrix(_unvec(v, dim), n) for v in out]


def single_atom_scattering(delta, g0: float, v_p: float, gamma0: float, gamma1: float | None = None, e0: complex = 1.0):
    """Weak-probe coherence, reflection and transmission of one guided-mode atom.

    ``delta`` is the atom-laser detuning (rad/s); g0 is the vacuum coupling in
    units where 4 pi g0^2 / v_p is the guided decay rate.
    """
    gamma1 = gamma0 if gamma1 is None else gamma1
    gamma_wg = 4 * math.pi * g0**2 / v_p
    total = gamma1 + gamma_wg
    if not total > 0:
        raise DomainError("total decay must be positive")
    delta = np.asarray(delta, dtype=float)
    sigma = 1j * g0 * math.sqrt(2 * math.pi) * e0 / (1j * delta + total / 2)
    scattered = 1j * g0 * math.sqrt(2 * math.pi) / v_p * sigma / e0
    return sigma, scattered, 1 + scattered
