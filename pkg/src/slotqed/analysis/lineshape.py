"""Faddeeva-based Fano-Voigt lineshape and its weighted least-squares fit.

Voigt argument convention: x = 2 sqrt(ln2) (delta - s) / omega_D and
y = sqrt(ln2) gamma_L / omega_D, with omega_D and gamma_L both FWHM. The Fano
asymmetry is carried internally as p = 1/q so the symmetric limit q -> inf is
the regular point p = 0.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares
from scipy.special import wofz

from ..errors import DomainError, FitError, SingularInputError

SQRT_LN2 = math.sqrt(math.log(2))


def faddeeva(z):
    """w(z) = exp(-z^2) erfc(-i z)."""
    return wofz(np.asarray(z, dtype=complex))


def _asym(p):
    return 2 * p / (1 - p * p)


def fano_voigt(delta, shift, amplitude, q, omega_d, gamma_l):
    """Voigt profile multiplied into a Fano asymmetry; q = inf is the plain Voigt."""
    if not omega_d > 0:
        raise DomainError("omega_d must be positive")
    if np.isfinite(q) and q * q == 1:
        raise SingularInputError("q^2 = 1 is singular")
    p = 0.0 if not np.isfinite(q) else 1.0 / q
    return _fano_voigt_p(np.asarray(delta, dtype=float), shift, amplitude, p, omega_d, gamma_l)


def _fano_voigt_p(delta, shift, amplitude, p, omega_d, gamma_l):
    x = 2 * SQRT_LN2 * (delta - shift) / omega_d
    y = SQRT_LN2 * gamma_l / omega_d
    w = faddeeva(x + 1j * y)
    pref = 2 * SQRT_LN2 * amplitude / (omega_d * math.sqrt(math.pi))
    return pref * (w.real - _asym(p) * w.imag)


def lorentzian(delta, shift, amplitude, fwhm):
    hw = 0.5 * fwhm
    return amplitude * hw * hw / ((np.asarray(delta) - shift) ** 2 + hw * hw)


@dataclass(frozen=True)
class FitResult:
    shift: float
    amplitude: float
    q: float
    omega_d: float
    gamma_l: float
    covariance: np.ndarray
    residual_norm: float
    converged: bool
    model: str = "fano_voigt"
    message: str = ""

    @property
    def shift_err(self) -> float:
        return float(math.sqrt(max(self.covariance[0, 0], 0.0)))

    @property
    def inverse_q(self) -> float:
        return 0.0 if not np.isfinite(self.q) else 1.0 / self.q

    def as_record(self) -> dict:
        return {
            "model": self.model,
            "shift": self.shift,
            "shift_err": self.shift_err,
            "amplitude": self.amplitude,
            "q": self.q,
            "omega_d": self.omega_d,
            "gamma_l": self.gamma_l,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
        }


def _data(spectrum):
    if hasattr(spectrum, "detunings"):
        x, y, e = spectrum.detunings, spectrum.absorption, spectrum.std_err
    else:
        x, y, *rest = spectrum
        e = rest[0] if rest else None
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 8:
        raise FitError("need at least 8 points to fit a line")
    if np.ptp(y) == 0:
        raise FitError("flat data: nothing to fit")
    if e is None or np.any(np.asarray(e) <= 0):
        w = np.ones_like(y)
        weighted = False
    else:
        w = 1 / np.asarray(e, dtype=float)
        weighted = True
    # residuals are divided by this so the optimizer's tolerances see O(1) numbers
    c = float(np.max(np.abs(y * w)))
    return x, y, w / c, weighted, c


def _covariance(res, n_points, weighted, c):
    jac = res.jac
    dof = max(n_points - jac.shape[1], 1)
    try:
        cov = np.linalg.pinv(jac.T @ jac)
    except np.linalg.LinAlgError:
        cov = np.full((jac.shape[1],) * 2, np.nan)
    if weighted:
        cov = cov / c**2
    else:
        cov = cov * (2 * res.cost / dof)
    return 0.5 * (cov + cov.T)


def fit_lineshape(spectrum, omega_d, init=None, max_iter=500) -> FitResult:
    """Fit shift, amplitude, asymmetry and Lorentzian width at fixed omega_D.

    ``spectrum`` is a Spectrum or a tuple (detunings, values[, errors]).
    Errors, when present and positive, weight the residuals.
    """
    if omega_d is None or not omega_d > 0:
        raise DomainError("omega_d must be positive")
    x, y, w, weighted, c = _data(spectrum)
    scale = float(np.max(np.abs(y)))
    if init is None:
        i0 = int(np.argmax(y))
        half = x[y >= 0.5 * y[i0]]
        width = max(float(half[-1] - half[0]), float(np.min(np.diff(x))))
        gl = max(width - 0.5 * omega_d, 0.05 * width)
        pk = float(_fano_voigt_p(np.array([0.0]), 0.0, 1.0, 0.0, omega_d, gl)[0])
        init = (x[i0], y[i0] / pk, math.inf, gl)
    s0, a0, q0, g0 = init
    p0 = 0.0 if not np.isfinite(q0) else 1.0 / q0
    xs = float(np.max(np.abs(x))) or 1.0

    def unpack(v):
        return v[0] * xs, v[1] * scale * xs, v[2], v[3] * xs

    def resid(v):
        s, a, p, g = unpack(v)
        return (_fano_voigt_p(x, s, a, p, omega_d, g) - y) * w

    v0 = np.array([s0 / xs, a0 / (scale * xs), p0, max(g0, 0.0) / xs])
    lo = np.array([-np.inf, -np.inf, -0.95, 0.0])
    hi = np.array([np.inf, np.inf, 0.95, np.inf])
    v0 = np.clip(v0, lo + 1e-12, hi - 1e-12)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = least_squares(resid, v0, bounds=(lo, hi), method="trf", xtol=1e-12, ftol=1e-14, gtol=1e-14, max_nfev=max_iter)
    s, a, p, g = unpack(res.x)
    cov = _covariance(res, x.size, weighted, c)
    cov = cov * np.outer([xs, scale * xs, 1.0, xs], [xs, scale * xs, 1.0, xs])
    q = math.inf if p == 0 else 1.0 / p
    return FitResult(s, a, q, omega_d, g, cov, float(np.linalg.norm(res.fun)), bool(res.status > 0), "fano_voigt", res.message)


def fit_lorentzian(spectrum, init=None, max_iter=500) -> FitResult:
    """Symmetric Lorentzian fit; ``gamma_l`` holds the FWHM, ``omega_d`` is 0."""
    x, y, w, weighted, c = _data(spectrum)
    scale = float(np.max(np.abs(y)))
    xs = float(np.max(np.abs(x))) or 1.0
    if init is None:
        i0 = int(np.argmax(y))
        half = x[y >= 0.5 * y[i0]]
        init = (x[i0], y[i0], max(float(half[-1] - half[0]), float(np.min(np.diff(x)))))

    def resid(v):
        return (lorentzian(x, v[0] * xs, v[1] * scale, abs(v[2]) * xs) - y) * w

    v0 = np.array([init[0] / xs, init[1] / scale, init[2] / xs])
    res = least_squares(resid, v0, method="lm", xtol=1e-12, ftol=1e-14, gtol=1e-14, max_nfev=max_iter * 4)
    s, a, g = res.x[0] * xs, res.x[1] * scale, abs(res.x[2]) * xs
    cov = _covariance(res, x.size, weighted, c) * np.outer([xs, scale, xs], [xs, scale, xs])
    full = np.zeros((4, 4))
    full[np.ix_([0, 1, 3], [0, 1, 3])] = cov
    return FitResult(s, a, math.inf, 0.0, g, full, float(np.linalg.norm(res.fun)), bool(res.status > 0), "lorentzian", res.message)
