"""Physical parameter bundles, domain value types and elementary conversions.

Everything is SI: lengths in m, rates and detunings in rad/s. Detunings are
converted to units of the natural decay rate only when reported.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import Boltzmann as K_B

from .errors import ConfigError, DomainError

RB85_MASS = 1.409e-25  # kg


@dataclass(frozen=True)
class PhysicalParams:
    lambda_probe: float = 1529e-9
    n_eff: float = 2.53
    gamma0: float = 2 * math.pi * 1.89e6
    i_sat: float = 1.4
    temperature: float = 300.0
    L_interaction: float = 200e-6

    def __post_init__(self):
        for name in ("lambda_probe", "n_eff", "gamma0", "i_sat", "L_interaction"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")
        if self.temperature < 0:
            raise DomainError("temperature must be non-negative")

    @property
    def k(self) -> float:
        return 2 * math.pi / self.lambda_probe

    @property
    def beta0(self) -> float:
        return self.n_eff * self.k


@dataclass(frozen=True)
class SlotGeometry:
    """Two ridges of width ``w`` and height ``h`` separated by a gap ``g``.

    The gap is centred on x = 0, the ridges sit on the substrate at y = 0 and
    the structure is translation invariant along z.
    """

    w: float = 300e-9
    h: float = 250e-9
    g: float = 50e-9

    def ridges(self, z0: float, z1: float) -> list["Cuboid"]:
        half = self.g / 2
        return [
            Cuboid((-half - self.w, 0.0, z0), (-half, self.h, z1)),
            Cuboid((half, 0.0, z0), (half + self.w, self.h, z1)),
        ]

    def gap_distance(self, x, y):
        """Euclidean distance from (x, y) to the gap rectangle (0 inside)."""
        dx = np.maximum(np.abs(x) - self.g / 2, 0.0)
        dy = np.maximum(np.maximum(-np.asarray(y, dtype=float), np.asarray(y) - self.h), 0.0)
        return np.hypot(dx, dy)


@dataclass(frozen=True)
class Cuboid:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def __post_init__(self):
        if not all(h > l for l, h in zip(self.lo, self.hi)):
            raise DomainError(f"degenerate cuboid {self.lo} -> {self.hi}")

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains(self, pos) -> np.ndarray:
        """Strict interior test, vectorised over the leading axis of ``pos``."""
        p = np.asarray(pos, dtype=float)
        return np.all((p > self.lo) & (p < self.hi), axis=-1)


@dataclass(frozen=True)
class SimulationBox:
    extents: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    slot: SlotGeometry = field(default_factory=SlotGeometry)
    dielectrics: tuple[Cuboid, ...] = ()

    def __post_init__(self):
        if len(self.extents) != 3 or not all(e > 0 for e in self.extents):
            raise ConfigError("box extents must be three positive lengths")
        lo, hi = np.array(self.origin), np.array(self.origin) + np.array(self.extents)
        tol = 1e-12 * max(self.extents)
        for d in self.dielectrics:
            if np.any(np.array(d.lo) < lo - tol) or np.any(np.array(d.hi) > hi + tol):
                raise ConfigError(f"dielectric volume {d} extends beyond the box")
        if self.free_volume <= 0:
            raise ConfigError("box has no vapor-accessible volume")

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.origin, dtype=float)

    @property
    def hi(self) -> np.ndarray:
        return self.lo + np.asarray(self.extents, dtype=float)

    @property
    def volume(self) -> float:
        return float(np.prod(self.extents))

    @property
    def free_volume(self) -> float:
        return self.volume - sum(d.volume for d in self.dielectrics)

    def in_dielectric(self, pos) -> np.ndarray:
        p = np.asarray(pos, dtype=float)
        out = np.zeros(p.shape[:-1], dtype=bool)
        for d in self.dielectrics:
            out |= d.contains(p)
        return out

    def inside(self, pos) -> np.ndarray:
        p = np.asarray(pos, dtype=float)
        return np.all((p >= self.lo) & (p <= self.hi), axis=-1)

    @classmethod
    def slot_channel(cls, length: float, slot: SlotGeometry | None = None) -> "SimulationBox":
        """Vapor confined to the gap itself: the ridges and substrate are box walls."""
        slot = slot or SlotGeometry()
        return cls((slot.g, slot.h, length), (-slot.g / 2, 0.0, 0.0), slot)

    @classmethod
    def slot_cell(cls, length: float, margin: float, slot: SlotGeometry | None = None) -> "SimulationBox":
        """Box enclosing both ridges plus ``margin`` of vapor on the sides and top."""
        slot = slot or SlotGeometry()
        half_x = slot.g / 2 + slot.w + margin
        return cls(
            (2 * half_x, slot.h + margin, length),
            (-half_x, 0.0, 0.0),
            slot,
            tuple(slot.ridges(0.0, length)),
        )


@dataclass(frozen=True)
class AtomState:
    position: tuple[float, float, float]
    velocity: tuple[float, float, float] = (0.0, 0.0, 0.0)
    sigma_ge: complex = 0j
    sigma_ee: float = 0.0
    sigma_gg: float = 1.0

    def is_physical(self, tol: float = 1e-9) -> bool:
        ee, gg = self.sigma_ee, self.sigma_gg
        return (
            -tol <= ee <= 1 + tol
            and abs(ee + gg - 1) <= tol
            and abs(self.sigma_ge) ** 2 <= ee * gg + tol
        )


@dataclass(frozen=True)
class LaserDrive:
    """Probe drive; ``detuning`` is atom minus laser frequency (rad/s)."""

    detuning: float
    omega0_peak: float
    intensity: float | None = None

    @classmethod
    def from_intensity(cls, detuning: float, intensity: float, params: PhysicalParams) -> "LaserDrive":
        return cls(detuning, rabi_from_intensity(intensity, params.i_sat, params.gamma0), intensity)


def mean_distance(density: float) -> float:
    """Mean inter-atomic distance r = (4*pi*n/3)**(-1/3)."""
    if not density > 0:
        raise DomainError("density must be positive")
    return (4 * math.pi / 3 * density) ** (-1 / 3)


def normalized_density(density: float, k: float) -> float:
    """(k r)**-3 with r the mean inter-atomic distance."""
    if not k > 0:
        raise DomainError("wavenumber must be positive")
    return (k * mean_distance(density)) ** -3


def density_from_normalized(nd: float, k: float) -> float:
    """Inverse of :func:`normalized_density`."""
    if not nd > 0 or not k > 0:
        raise DomainError("normalized density and k must be positive")
    return 3 * nd * k**3 / (4 * math.pi)


def rabi_from_intensity(intensity: float, i_sat: float, gamma0: float) -> float:
    # Convention: I = 2 I_sat gives Omega0 = gamma0.
    if intensity < 0:
        raise DomainError("intensity must be non-negative")
    return gamma0 * math.sqrt(intensity / (2 * i_sat))


def intensity_from_rabi(omega0: float, i_sat: float, gamma0: float) -> float:
    return 2 * i_sat * (omega0 / gamma0) ** 2


def doppler_shift(v_z, n_eff: float, k: float):
    return n_eff * k * v_z


def thermal_speed(temperature: float, mass: float = RB85_MASS) -> float:
    """One-dimensional velocity standard deviation sqrt(k_B T / m)."""
    return math.sqrt(K_B * temperature / mass)


def doppler_fwhm(temperature: float, n_eff: float, k: float, mass: float = RB85_MASS) -> float:
    """Gaussian FWHM (rad/s) of the Doppler profile along the guide."""
    return 2 * math.sqrt(2 * math.log(2)) * n_eff * k * thermal_speed(temperature, mass)
