"""Oracle checks run by ``slotqed verify``.

Each check compares the implementation with an independent reference (a
closed form, a committed high-precision table, or a published number) and
reports the measured and expected values with the tolerance used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analysis import fano_voigt, faddeeva, fit_lineshape, kramers_kronig, single_photon_phase
from .core import PhysicalParams, SimulationBox, SlotGeometry
from .dynamics import Scenario, steady_populations
from .ensemble import EnsembleConfig
from .greens import coupling_matrices, gamma_1d, greens_free_space_xx
from .ingest import read_oracle_table
from .mode import ModeProfile, analytic_fallback_profile
from .oracle import lindblad_steady_state, single_atom_scattering


@dataclass(frozen=True)
class Check:
    name: str
    measured: float
    expected: float
    tolerance: str
    passed: bool


def _rel(a, b):
    return abs(a - b) / abs(b)


def check_self_limit(kr=1e-4):
    k = PhysicalParams().k
    im = greens_free_space_xx((0, 0, 0), (0, kr / k, 0), k).imag
    err = _rel(im, 1 / (6 * math.pi))
    return Check(f"Im G_FS self-limit at kR={kr:g}", im, 1 / (6 * math.pi), "rel 1e-6", err <= 1e-6)


def check_purcell_identity(pf_max=35.0):
    p = PhysicalParams()
    slot = SlotGeometry()
    mode = analytic_fallback_profile(p, slot, pf_max)
    xs = np.linspace(-0.2e-6, 0.2e-6, 41)
    ys = np.linspace(-0.1e-6, 0.35e-6, 37)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X.ravel(), Y.ravel(), np.zeros(X.size)], axis=-1)
    g1d = gamma_1d(mode, pts, pts)
    resid = float(np.max(np.abs(mode.purcell(X.ravel(), Y.ravel()) - (1 + 6 * math.pi * g1d))))
    return Check("PF = 1 + 6 pi Gamma_1D / Gamma0 residual", resid, 0.0, "abs 1e-12", resid < 1e-12)


def check_scattering(pf=35.0):
    g0 = 1.0
    v_p = 1.0
    # choose the guided coupling so that Gamma_WG = (PF - 1) Gamma0
    gc = math.sqrt((pf - 1) * g0 * v_p / (4 * math.pi))
    delta = np.linspace(-100, 100, 1001)
    _, r, t = single_atom_scattering(delta, gc, v_p, g0)
    resid = float(np.max(np.abs(1 + r - t)))
    t0 = abs(single_atom_scattering(0.0, gc, v_p, g0)[2])
    return [
        Check("1 + r = t on 1001 points", resid, 0.0, "abs 1e-14", resid <= 1e-14),
        Check(f"|t(0)| at PF={pf:g}", t0, 1 / pf, "rel 1e-2", _rel(t0, 1 / pf) <= 1e-2),
    ]


def two_atom_scenario(omega_over_gamma0: float, kr: float = 0.2) -> Scenario:
    p = PhysicalParams(temperature=0.0)
    d = kr / p.k
    box = SimulationBox((1e-6, 1e-6, 1e-6), (-5e-7, -5e-7, -5e-7))
    return Scenario(
        p, box, ModeProfile.free_space(p), EnsembleConfig(n_atoms=2, density=1.0, temperature=0.0),
        omega_over_gamma0 * p.gamma0, waveguide=False, positions=((0.0, 0.0, 0.0), (0.0, d, 0.0)),
    )


def check_mean_field(omega=0.01):
    sc = two_atom_scenario(omega)
    g0 = sc.params.gamma0
    cm = coupling_matrices(np.array(sc.positions), sc.params.k, sc.mode, g0, waveguide=False)
    ee_mf = steady_populations(sc, sc.positions, [0.0])[1][0]
    ee_ex = lindblad_steady_state(cm, sc.omega0, 0.0, gamma0=g0).excited_all
    gap = float(np.max(np.abs(ee_mf - ee_ex) / ee_ex))
    return Check(f"mean field vs Lindblad, N=2, kR=0.2, Omega={omega:g} Gamma0", gap, 0.0, "rel 5e-2", gap <= 0.05)


def check_faddeeva_table():
    _, _, _, rows = read_oracle_table("faddeeva.txt")
    a = np.array(rows, dtype=float)
    w = faddeeva(a[:, 0] + 1j * a[:, 1])
    ref = a[:, 2] + 1j * a[:, 3]
    err = float(np.max(np.abs(w - ref) / np.abs(ref)))
    return Check(f"Faddeeva vs mpmath grid ({len(rows)} points)", err, 0.0, "rel 1e-6", err <= 1e-6)


def check_greens_table():
    _, _, _, rows = read_oracle_table("greens_xx.txt")
    k = PhysicalParams().k
    err = 0.0
    for r in rows:
        u, n = float(r[1]), np.array(r[2:5], dtype=float)
        ref = complex(float(r[5]), float(r[6]))
        g = greens_free_space_xx((0.0, 0.0, 0.0), n * u / k, k)
        err = max(err, abs(g - ref) / abs(ref))
    return Check(f"G_FS vs symbolic samples ({len(rows)} points)", err, 0.0, "rel 1e-10", err <= 1e-10)


def check_kk_table():
    meta, _, _, rows = read_oracle_table("kk_lorentzian.txt")
    a = np.array(rows, dtype=float)
    d, im, re = a[:, 0], a[:, 1], a[:, 2]
    got = kramers_kronig(im, d)
    interior = np.abs(d) <= 0.5 * np.max(np.abs(d))
    err = float(np.max(np.abs(got - re)[interior]) / np.max(np.abs(re)))
    return Check("KK of Lorentzian pair, interior", err, 0.0, "rel 1e-2", err <= 0.01)


def check_lindblad_table():
    _, _, _, rows = read_oracle_table("lindblad_two_atom.txt")
    p = PhysicalParams()
    g0, k = p.gamma0, p.k
    err = 0.0
    for r in rows:
        u, n = float(r[1]), np.array(r[2:5], dtype=float)
        om, det = float(r[5]), float(r[6])
        pos = np.array([[0.0, 0.0, 0.0], n * u / k])
        cm = coupling_matrices(pos, k, None, g0, waveguide=False)
        rho = lindblad_steady_state(cm, om * g0, -det * g0, gamma0=g0).check(herm_tol=1e-10, trace_tol=1e-10)
        ee_ref = np.array(r[7:9], dtype=float)
        s_ref = np.array([complex(float(r[9]), float(r[10])), complex(float(r[11]), float(r[12]))])
        err = max(err, float(np.max(np.abs(rho.excited_all - ee_ref) / ee_ref)))
        s = np.array([rho.coherence(0), rho.coherence(1)])
        err = max(err, float(np.max(np.abs(s - s_ref) / np.abs(s_ref))))
    return Check(f"Lindblad vs dense two-atom oracle ({len(rows)} states)", err, 0.0, "rel 1e-6", err <= 1e-6)


def check_kerr():
    est = single_photon_phase(1529e-9, 2.53, 200e-6, 1.98e-7, 100e6, 7.68e-14)
    na = single_photon_phase(589e-9, 1.0, 1.0, 1.80e-5, 1.30e6, 1.77e-10)
    return [
        Check("n2 I_photon (slot)", est.n2_i_photon, 3.30e-5, "rel 2e-2", _rel(est.n2_i_photon, 3.30e-5) <= 0.02),
        Check("single-photon phase (rad)", est.phi, 0.07, "rel 5e-2", _rel(est.phi, 0.07) <= 0.05),
        Check("photons for a pi phase", est.photons_for_pi, 45, "abs 1", abs(est.photons_for_pi - 45) <= 1),
        Check("n2 I_photon (Na)", na.n2_i_photon, 4.47e-8, "rel 2e-2", _rel(na.n2_i_photon, 4.47e-8) <= 0.02),
    ]


def check_fit_roundtrip():
    x = np.linspace(-60, 60, 601)
    truth = dict(shift=2.5, amplitude=3.0, q=8.0, omega_d=12.0, gamma_l=4.0)
    y = fano_voigt(x, **truth)
    fit = fit_lineshape((x, y), truth["omega_d"])
    got = np.array([fit.shift, fit.amplitude, 1 / fit.q, fit.gamma_l])
    ref = np.array([truth["shift"], truth["amplitude"], 1 / truth["q"], truth["gamma_l"]])
    err = float(np.max(np.abs(got - ref) / np.abs(ref)))
    voigt = fano_voigt(x, 0.0, 1.0, math.inf, 12.0, 4.0)
    big_q = fano_voigt(x, 0.0, 1.0, 1e12, 12.0, 4.0)
    sym = float(np.max(np.abs(big_q - voigt)) / np.max(voigt))
    return [
        Check("noiseless Fano-Voigt roundtrip", err, 0.0, "rel 1e-6", err <= 1e-6),
        Check("q -> inf gives the Voigt", sym, 0.0, "rel 1e-6", sym <= 1e-6),
    ]


def run_checks() -> list[Check]:
    out = [check_self_limit(), check_purcell_identity()]
    out += check_scattering()
    out.append(check_mean_field())
    out += [check_faddeeva_table(), check_greens_table(), check_kk_table(), check_lindblad_table()]
    out += check_kerr()
    out += check_fit_roundtrip()
    return out


def format_report(checks) -> str:
    width = max(len(c.name) for c in checks)
    lines = [f"{'check':<{width}}  {'measured':>13}  {'expected':>13}  {'tolerance':<10}  result"]
    for c in checks:
        lines.append(f"{c.name:<{width}}  {c.measured:>13.6g}  {c.expected:>13.6g}  {c.tolerance:<10}  {'PASS' if c.passed else 'FAIL'}")
    n_fail = sum(not c.passed for c in checks)
    lines.append(f"{len(checks) - n_fail}/{len(checks)} checks passed")
    return "\n".join(lines)
