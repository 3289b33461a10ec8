"""Refractive-index reconstruction from a transmission spectrum.

On a detuning axis the susceptibility is analytic in the upper half plane, so
Re chi(d) = (1/pi) P int Im chi(d') / (d' - d) dd'. The principal value is
evaluated with Maclaurin's rule on the uniform grid (only points at odd
offsets from the evaluation point contribute, which pairs the singular cell
symmetrically), after a cosine taper over the outer 5% on each side.
"""
from __future__ import annotations

import math
import warnings

import numpy as np
from scipy.signal import fftconvolve
from scipy.signal.windows import tukey

from ..errors import DomainError

TAPER_FRACTION = 0.05
EDGE_DECAY = 0.01


def susceptibility_from_transmission(transmission, n_eff: float, k: float, length: float):
    """Im chi from T = exp(-n_eff k L Im chi)."""
    t = np.asarray(transmission, dtype=float)
    if np.any(t <= 0):
        raise DomainError("transmission must be positive")
    if np.any(t > 1):
        warnings.warn("transmission above 1 clipped to 1", stacklevel=2)
        t = np.minimum(t, 1.0)
    return -np.log(t) / (n_eff * k * length)


def _check_grid(d):
    d = np.asarray(d, dtype=float)
    if d.ndim != 1 or d.size < 3:
        raise DomainError("need a 1D grid of at least 3 points")
    h = np.diff(d)
    if np.any(h <= 0) or np.ptp(h) > 1e-6 * abs(h.mean()):
        raise DomainError("Kramers-Kronig quadrature needs a uniform increasing grid")
    return float(h.mean())


def _hilbert(f):
    n = f.size
    m = np.arange(-(n - 1), n)
    kern = np.zeros(m.size)
    odd = m % 2 == 1
    kern[odd] = -2 / (math.pi * m[odd])
    return fftconvolve(f, kern, mode="full")[n - 1 : 2 * n - 1]


def kramers_kronig(values, detunings, inverse: bool = False, taper: bool = True):
    """Re chi from Im chi (or Im chi from Re chi with ``inverse``)."""
    f = np.asarray(values, dtype=float)
    _check_grid(detunings)
    if f.shape != np.shape(detunings):
        raise DomainError("values and detunings differ in shape")
    peak = float(np.max(np.abs(f)))
    if peak > 0:
        edge = max(abs(f[0]), abs(f[-1])) / peak
        if edge > EDGE_DECAY:
            warnings.warn(
                f"spectrum edges at {edge:.1%} of peak; truncation error of order {edge:.1%} of peak",
                stacklevel=2,
            )
    if taper:
        f = f * tukey(f.size, 2 * TAPER_FRACTION)
    out = _hilbert(f)
    return -out if inverse else out


def refractive_index(re_chi):
    r = np.asarray(re_chi, dtype=float)
    if np.any(r <= -1):
        raise DomainError("Re chi <= -1 has no real refractive index")
    return np.sqrt(1 + r)


def index_slope(detunings, index, at: float = 0.0) -> float:
    """dn/d(detuning) at ``at``, from central differences interpolated linearly."""
    d = np.asarray(detunings, dtype=float)
    return float(np.interp(at, d, np.gradient(np.asarray(index, dtype=float), d)))
