from .kerr import KerrEstimate, kerr_coefficient, kerr_from_transmission, photon_intensity, single_photon_phase
from .kramers_kronig import (
    index_slope,
    kramers_kronig,
    refractive_index,
    susceptibility_from_transmission,
)
from .lineshape import FitResult, faddeeva, fano_voigt, fit_lineshape, fit_lorentzian, lorentzian

__all__ = [
    "FitResult",
    "KerrEstimate",
    "faddeeva",
    "fano_voigt",
    "fit_lineshape",
    "fit_lorentzian",
    "index_slope",
    "kerr_coefficient",
    "kerr_from_transmission",
    "kramers_kronig",
    "lorentzian",
    "photon_intensity",
    "refractive_index",
    "single_photon_phase",
    "susceptibility_from_transmission",
]
