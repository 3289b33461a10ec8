"""Kerr coefficient and single-photon phase estimates."""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.constants import c as C_LIGHT
from scipy.constants import hbar

from ..errors import DomainError
from .kramers_kronig import index_slope, kramers_kronig, refractive_index, susceptibility_from_transmission


@dataclass(frozen=True)
class KerrEstimate:
    n2: float
    i_photon: float
    phi: float
    photons_for_pi: int
    slope: float | None = None

    @property
    def n2_i_photon(self) -> float:
        return self.n2 * self.i_photon


def kerr_coefficient(shift: float, intensity: float, slope: float) -> float:
    """n2 = (s / I) |dn/d Delta|; ``shift`` and ``slope`` in reciprocal units."""
    if not intensity > 0:
        raise DomainError("intensity must be positive")
    return shift * abs(slope) / intensity


def photon_intensity(wavelength: float, linewidth_hz: float, a_eff: float) -> float:
    """hbar omega / (T A_eff) with T = 1 / linewidth the photon duration."""
    if not (wavelength > 0 and linewidth_hz > 0 and a_eff > 0):
        raise DomainError("wavelength, linewidth and area must be positive")
    omega = 2 * math.pi * C_LIGHT / wavelength
    return hbar * omega * linewidth_hz / a_eff


def single_photon_phase(wavelength, n_eff, length, n2, linewidth_hz, a_eff, slope=None) -> KerrEstimate:
    """phi = n_eff k L n2 I_photon and the photon number for a pi phase shift."""
    if not (n_eff > 0 and length > 0):
        raise DomainError("n_eff and length must be positive")
    if n2 < 0:
        raise DomainError("n2 must be non-negative")
    ip = photon_intensity(wavelength, linewidth_hz, a_eff)
    phi = n_eff * 2 * math.pi / wavelength * length * n2 * ip
    photons = math.ceil(math.pi / phi) if phi > 0 else 0
    return KerrEstimate(n2, ip, phi, photons, slope)


def kerr_from_transmission(detunings, transmission, *, shift, intensity, n_eff, wavelength, length, a_eff, linewidth_hz, at=0.0):
    """Full chain: T -> Im chi -> Re chi -> n -> slope -> n2 -> phi.

    ``detunings`` and ``shift`` share one frequency unit; the slope comes out
    in its reciprocal.
    """
    k = 2 * math.pi / wavelength
    im = susceptibility_from_transmission(transmission, n_eff, k, length)
    n = refractive_index(kramers_kronig(im, detunings))
    slope = index_slope(detunings, n, at)
    n2 = kerr_coefficient(shift, intensity, slope)
    return single_photon_phase(wavelength, n_eff, length, n2, linewidth_hz, a_eff, slope)
