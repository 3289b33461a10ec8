"""Guided-mode model of the slot waveguide.

The mode is described by its normalised transverse field amplitude |E|(x, y)
on a rectilinear grid. The waveguide decay rate follows from the same field,
Gamma_WG / Gamma0 = (PF_max - 1) * |E|^2, so drive and coupling stay
consistent everywhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .core import PhysicalParams, SlotGeometry
from .errors import DomainError


@dataclass(frozen=True, eq=False)
class ModeProfile:
    x: np.ndarray | None
    y: np.ndarray | None
    amplitude: np.ndarray | None
    pf_max: float
    n_eff: float
    lambda_probe: float

    def __post_init__(self):
        if self.pf_max < 1:
            raise DomainError("pf_max must be >= 1")
        if self.n_eff < 0:
            raise DomainError("n_eff must be non-negative")
        if self.uniform:
            return
        x, y, a = (np.asarray(v, dtype=float) for v in (self.x, self.y, self.amplitude))
        if x.ndim != 1 or y.ndim != 1 or x.size < 2 or y.size < 2:
            raise DomainError("mode grid needs at least two nodes per axis")
        if np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
            raise DomainError("mode grid axes must be strictly increasing")
        if a.shape != (x.size, y.size):
            raise DomainError(f"amplitude shape {a.shape} does not match grid {(x.size, y.size)}")
        if not np.all(np.isfinite(a)) or np.any(a < 0):
            raise DomainError("mode amplitude must be finite and non-negative")
        peak = a.max()
        if peak > 0:
            a = a / peak
        for name, v in (("x", x), ("y", y), ("amplitude", a)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    @classmethod
    def free_space(cls, params: PhysicalParams, propagating: bool = True) -> "ModeProfile":
        """Uniform-amplitude drive with no guided-mode coupling and unbounded domain.

        A propagating drive is a plane wave along +z (index 1). Otherwise the
        drive has the same phase everywhere (index 0), which also removes the
        Doppler shift.
        """
        return cls(None, None, None, 1.0, 1.0 if propagating else 0.0, params.lambda_probe)

    @property
    def uniform(self) -> bool:
        return self.amplitude is None

    @property
    def k(self) -> float:
        return 2 * math.pi / self.lambda_probe

    @property
    def beta0(self) -> float:
        return self.n_eff * self.k

    @property
    def gamma_wg_over_gamma0(self) -> np.ndarray:
        if self.uniform:
            raise DomainError("uniform profile has no grid")
        return (self.pf_max - 1) * self.amplitude**2

    @cached_property
    def a_eff(self) -> float:
        return effective_mode_area(self)

    def in_domain(self, x, y) -> np.ndarray:
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        if self.uniform:
            return np.ones(np.broadcast(x, y).shape, dtype=bool)
        return (x >= self.x[0]) & (x <= self.x[-1]) & (y >= self.y[0]) & (y <= self.y[-1])

    def field(self, x, y, strict: bool = True) -> np.ndarray:
        """Bilinearly interpolated |E|; zero outside the grid unless ``strict``."""
        x, y = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(y, dtype=float))
        if self.uniform:
            return np.ones(x.shape)
        inside = self.in_domain(x, y)
        if strict and not np.all(inside):
            raise DomainError("position outside the mode-profile domain")
        ix = np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, self.x.size - 2)
        iy = np.clip(np.searchsorted(self.y, y, side="right") - 1, 0, self.y.size - 2)
        tx = (x - self.x[ix]) / (self.x[ix + 1] - self.x[ix])
        ty = (y - self.y[iy]) / (self.y[iy + 1] - self.y[iy])
        a = self.amplitude
        val = (
            a[ix, iy] * (1 - tx) * (1 - ty)
            + a[ix + 1, iy] * tx * (1 - ty)
            + a[ix, iy + 1] * (1 - tx) * ty
            + a[ix + 1, iy + 1] * tx * ty
        )
        return np.where(inside, val, 0.0)

    def gamma_wg(self, x, y, strict: bool = True) -> np.ndarray:
        """Gamma_WG / Gamma0 at transverse positions."""
        if self.uniform:
            return np.zeros(np.broadcast(np.asarray(x), np.asarray(y)).shape)
        return (self.pf_max - 1) * self.field(x, y, strict) ** 2

    def purcell(self, x, y, strict: bool = True) -> np.ndarray:
        return 1.0 + self.gamma_wg(x, y, strict)


def analytic_fallback_profile(
    params: PhysicalParams,
    slot: SlotGeometry,
    pf_max: float,
    decay_length: float = 50e-9,
    margin: float | None = None,
    step: float = 2.5e-9,
) -> ModeProfile:
    """Flat-top mode in the gap with exponential tails.

    The Purcell excess is uniform across the gap and falls off as
    exp(-d / decay_length) with the distance d from the gap rectangle, so the
    field amplitude decays with twice that length. The grid covers both ridges
    plus ``margin`` (default 10 decay lengths) on every side.
    """
    if pf_max < 1:
        raise DomainError("pf_max must be >= 1")
    if not decay_length > 0:
        raise DomainError("decay_length must be positive")
    margin = 10 * decay_length if margin is None else margin
    half_x = slot.g / 2 + slot.w + margin
    nx = int(math.ceil(2 * half_x / step)) + 1
    ny = int(math.ceil((slot.h + 2 * margin) / step)) + 1
    x = np.linspace(-half_x, half_x, nx)
    y = np.linspace(-margin, slot.h + margin, ny)
    X, Y = np.meshgrid(x, y, indexing="ij")
    amp = np.exp(-slot.gap_distance(X, Y) / (2 * decay_length))
    if pf_max == 1:
        amp = np.zeros_like(amp)
    return ModeProfile(x, y, amp, pf_max, params.n_eff, params.lambda_probe)


def effective_mode_area(profile: ModeProfile) -> float:
    """A_eff = integral(S dA) / max(S) with S proportional to |E|^2."""
    if profile.uniform:
        raise DomainError("uniform profile has unbounded mode area")
    s = profile.amplitude**2
    peak = s.max()
    if peak <= 0:
        raise DomainError("all-zero mode profile has no effective area")
    return float(np.trapezoid(np.trapezoid(s, profile.y, axis=1), profile.x) / peak)


def local_drive(profile: ModeProfile, position, omega0_peak: float, strict: bool = True):
    """Local Rabi amplitude omega0_peak * |E|(x, y) (propagation phase excluded)."""
    p = np.asarray(position, dtype=float)
    return omega0_peak * profile.field(p[..., 0], p[..., 1], strict)


def load_mode_profile(path) -> ModeProfile:
    from .ingest import read_mode_profile

    return read_mode_profile(path)
