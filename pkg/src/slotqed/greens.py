"""Normalised Green's functions and the pairwise coupling matrices built from them.

Normalisation: G = (I + grad grad / k^2) exp(ikR) / (4 pi k R), for which the
imaginary part at coincidence is 1/(6 pi). Dipoles are x-polarised, so only
the xx component enters the dynamics.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularInputError
from .mode import ModeProfile

SELF_IMAG = 1 / (6 * math.pi)


def _hankel02(u):
    """Spherical Hankel functions h0, h2 of the first kind."""
    u = np.asarray(u, dtype=float)
    s, c = np.sin(u), np.cos(u)
    inv = 1 / u
    y0 = -c * inv
    y2 = (inv - 3 * inv**3) * c - 3 * s * inv**2
    # Taylor series below 0.1 avoids the cancellation in j2
    u2 = u * u
    small = u < 0.1
    with np.errstate(invalid="ignore", over="ignore"):
        j0 = np.where(small, 1 - u2 / 6 * (1 - u2 / 20 * (1 - u2 / 42 * (1 - u2 / 72))), s * inv)
        j2 = np.where(
            small,
            u2 / 15 * (1 - u2 / 14 * (1 - u2 / 36 * (1 - u2 / 66))),
            (3 * inv**3 - inv) * s - 3 * c * inv**2,
        )
    return j0 + 1j * y0, j2 + 1j * y2


def _gxx_from_separation(d, k):
    d = np.asarray(d, dtype=float)
    r = np.sqrt(np.sum(d * d, axis=-1))
    u = k * r
    h0, h2 = _hankel02(u)
    # cos^2 - 1/3 without subtraction, which the 1/u^3 near field would amplify
    aniso = (2 * d[..., 0] ** 2 - d[..., 1] ** 2 - d[..., 2] ** 2) / (3 * r**2)
    return 1j / (4 * math.pi) * (2 / 3 * h0 + aniso * h2)


def greens_free_space_xx(pos_a, pos_b, k: float) -> complex:
    """xx component of the free-space dyadic Green's function."""
    d = np.asarray(pos_a, dtype=float) - np.asarray(pos_b, dtype=float)
    if not np.any(d):
        raise SingularInputError("free-space Green's function is singular at coincident points")
    return complex(_gxx_from_separation(d, k))


def greens_free_space_tensor(pos_a, pos_b, k: float) -> np.ndarray:
    """Full 3x3 dyadic tensor; only the xx entry feeds the dynamics."""
    d = np.asarray(pos_a, dtype=float) - np.asarray(pos_b, dtype=float)
    r = float(np.linalg.norm(d))
    if r == 0:
        raise SingularInputError("free-space Green's function is singular at coincident points")
    h0, h2 = _hankel02(k * r)
    rr = np.outer(d, d) / r**2
    return 1j / (4 * math.pi) * (2 / 3 * h0 * np.eye(3) + h2 * (rr - np.eye(3) / 3))


def gamma_1d(mode: ModeProfile, pos_a, pos_b, strict: bool = True):
    """Pair waveguide rate Gamma_1D^{ab} / Gamma0 = sqrt(Gwg_a Gwg_b) / (6 pi)."""
    a, b = np.asarray(pos_a, dtype=float), np.asarray(pos_b, dtype=float)
    ga = mode.gamma_wg(a[..., 0], a[..., 1], strict)
    gb = mode.gamma_wg(b[..., 0], b[..., 1], strict)
    return np.sqrt(ga * gb) / (6 * math.pi)


def greens_waveguide(pos_a, pos_b, mode: ModeProfile) -> complex:
    """Effective 1D waveguide Green's function i (G1D/G0) exp(i beta0 |dz|)."""
    a, b = np.asarray(pos_a, dtype=float), np.asarray(pos_b, dtype=float)
    g1d = gamma_1d(mode, a, b)
    return complex(1j * g1d * np.exp(1j * mode.beta0 * abs(a[2] - b[2])))


def greens_total(pos_a, pos_b, k: float, mode: ModeProfile) -> complex:
    return greens_free_space_xx(pos_a, pos_b, k) + greens_waveguide(pos_a, pos_b, mode)


def purcell_factor(gamma_1d_self: float, gamma0: float) -> float:
    """PF = 1 + 6 pi Gamma_1D / Gamma0."""
    if gamma_1d_self < 0:
        raise DomainError("Gamma_1D must be non-negative")
    return 1 + 6 * math.pi * gamma_1d_self / gamma0


def waveguide_decay_rate(g0: float, v_p: float) -> float:
    """Gamma_WG = 4 pi g0^2 / v_p (both propagation directions)."""
    return 4 * math.pi * g0**2 / v_p


@dataclass(frozen=True, eq=False)
class CouplingMatrices:
    """Pairwise rates for N atoms, all in rad/s.

    ``J`` has zero diagonal; ``Gamma`` carries the per-atom total decay on its
    diagonal. ``excluded`` marks pairs inside the near-field exclusion radius,
    whose dispersive coupling is set to zero.
    """

    J: np.ndarray
    Gamma: np.ndarray
    decay: np.ndarray
    excluded: np.ndarray

    @property
    def n(self) -> int:
        return self.decay.size

    @property
    def field_kernel(self) -> np.ndarray:
        """Off-diagonal kernel -J + i Gamma / 2 acting on the coherences."""
        m = -self.J + 0.5j * self.Gamma
        np.fill_diagonal(m, 0)
        return m


def pair_greens(positions, k: float, mode: ModeProfile | None, free_space=True, waveguide=True):
    """Total Green's function matrix between distinct atoms (diagonal is zero)."""
    p = np.asarray(positions, dtype=float).reshape(-1, 3)
    n = p.shape[0]
    g = np.zeros((n, n), dtype=complex)
    if n < 2:
        return g, np.zeros((n, n))
    d = p[:, None, :] - p[None, :, :]
    r = np.sqrt(np.sum(d * d, axis=-1))
    off = ~np.eye(n, dtype=bool)
    if np.any(r[off] == 0):
        raise SingularInputError("two atoms share a position")
    if free_space:
        # G_xx is even in the separation, so one triangle suffices
        iu = np.triu_indices(n, 1)
        g[iu] = _gxx_from_separation(d[iu], k)
        g += g.T
    if waveguide and mode is not None and not mode.uniform:
        gwg = mode.gamma_wg(p[:, 0], p[:, 1], strict=False)
        amp = np.sqrt(gwg)
        dz = np.abs(p[:, None, 2] - p[None, :, 2])
        gw = 1j * np.outer(amp, amp) / (6 * math.pi) * np.exp(1j * mode.beta0 * dz)
        g[off] += gw[off]
    return g, r


def coupling_matrices(
    positions,
    k: float,
    mode: ModeProfile | None,
    gamma0: float,
    *,
    r_min: float | None = None,
    gamma1: float | None = None,
    free_space: bool = True,
    waveguide: bool = True,
    check_psd: bool = True,
) -> CouplingMatrices:
    """Build J, Gamma and per-atom decay for atoms at ``positions``.

    Pairs closer than ``r_min`` (default lambda/500) lose their dispersive
    coupling; their dissipative coupling is finite and kept. Per-atom decay is
    Gamma1 + Gamma0 (PF - 1), with Gamma1 defaulting to Gamma0.
    """
    p = np.asarray(positions, dtype=float).reshape(-1, 3)
    n = p.shape[0]
    if n == 0:
        raise DomainError("need at least one atom")
    r_min = (2 * math.pi / k) / 500 if r_min is None else r_min
    gamma1 = gamma0 if gamma1 is None else gamma1

    g, r = pair_greens(p, k, mode, free_space, waveguide)
    excluded = (r < r_min) & ~np.eye(n, dtype=bool)
    J = -3 * math.pi * gamma0 * g.real
    J[excluded] = 0.0
    Gamma = 6 * math.pi * gamma0 * g.imag

    if waveguide and mode is not None and not mode.uniform:
        excess = mode.gamma_wg(p[:, 0], p[:, 1], strict=False)
    else:
        excess = np.zeros(n)
    decay = gamma1 + gamma0 * excess
    Gamma[np.diag_indices(n)] = decay

    if check_psd and n > 1:
        w, v = np.linalg.eigh(Gamma)
        if w.min() < -1e-8 * gamma0:
            raise DomainError(f"dissipative matrix not positive semidefinite (min eigenvalue {w.min():.3e})")
        if w.min() < 0:
            w = np.clip(w, 0, None)
            Gamma = (v * w) @ v.T
            Gamma = 0.5 * (Gamma + Gamma.T)
    return CouplingMatrices(J, Gamma, decay, excluded)
