"""Mean-field optical Bloch dynamics of the interacting ensemble.

Each atom obeys two-level Bloch equations whose Rabi frequency is replaced by
the effective one: the local guided-mode drive plus the field scattered by all
other atoms through the total Green's function.

Detuning conventions: ``LaserDrive.detuning`` and the integrator work with
atom minus laser frequency; spectra are tabulated against the probe detuning
(laser minus atom), so a positive fitted centre is a blueshift.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import root

from .core import AtomState, LaserDrive, PhysicalParams, SimulationBox, doppler_shift, thermal_speed
from .ensemble import Ensemble, EnsembleConfig, advance_positions, sample_atoms
from .errors import DomainError, FitError, IntegratorError
from .greens import CouplingMatrices, coupling_matrices
from .mode import ModeProfile

log = logging.getLogger(__name__)

STABILITY_GUARD = 0.1
# target |eigenvalue| * dt per RK4 sub-step for the coupled system
_SUBSTEP_TARGET = 0.5


@dataclass(frozen=True)
class Spectrum:
    """Averaged excited-state population against probe detuning (rad/s)."""

    detunings: np.ndarray
    absorption: np.ndarray
    std_err: np.ndarray
    gamma0: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        if d.ndim != 1 or np.any(np.diff(d) <= 0):
            raise DomainError("detuning grid must be strictly increasing")
        a, e = np.asarray(self.absorption, dtype=float), np.asarray(self.std_err, dtype=float)
        if a.shape != d.shape or e.shape != d.shape:
            raise DomainError("spectrum arrays must share the detuning grid")
        if np.any(e < 0):
            raise DomainError("standard errors must be non-negative")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "absorption", a)
        object.__setattr__(self, "std_err", e)

    @property
    def detunings_gamma0(self) -> np.ndarray:
        return self.detunings / self.gamma0


@dataclass(frozen=True)
class Scenario:
    """Everything a Monte-Carlo spectrum needs, in SI units."""

    params: PhysicalParams
    box: SimulationBox
    mode: ModeProfile
    ensemble: EnsembleConfig
    omega0: float
    free_space: bool = True
    waveguide: bool = True
    positions: tuple | None = None
    discard_fraction: float = 0.0
    refresh_stride: int = 1
    gamma1: float | None = None
    r_min: float | None = None
    solver: str = "integrate"

    def __post_init__(self):
        if self.solver not in ("integrate", "steady"):
            raise DomainError(f"unknown solver {self.solver!r}")
        if self.solver == "steady" and self.ensemble.temperature > 0 and self.positions is None:
            raise DomainError("the steady solver needs stationary atoms (temperature 0 or fixed positions)")
        if not 0 <= self.discard_fraction < 1:
            raise DomainError("discard_fraction must lie in [0, 1)")
        if self.refresh_stride < 1:
            raise DomainError("refresh_stride must be >= 1")
        if self.omega0 < 0:
            raise DomainError("omega0 must be non-negative")

    @property
    def moving(self) -> bool:
        return self.positions is None and self.ensemble.temperature > 0

    def with_drive(self, omega0: float) -> "Scenario":
        return replace(self, omega0=omega0)


def default_dt(params: PhysicalParams, box: SimulationBox, pf_max: float, temperature: float, mass: float) -> float:
    dt = 1 / (200 * params.gamma0 * pf_max)
    if temperature > 0:
        dt = min(dt, min(box.extents) / (50 * thermal_speed(temperature, mass)))
    return dt


def _couplings(sc: Scenario, positions) -> CouplingMatrices:
    return coupling_matrices(
        positions,
        sc.params.k,
        sc.mode,
        sc.params.gamma0,
        r_min=sc.r_min,
        gamma1=sc.gamma1,
        free_space=sc.free_space,
        waveguide=sc.waveguide,
        check_psd=False,
    )


def effective_rabi(atom_index: int, atoms, couplings: CouplingMatrices, mode: ModeProfile, drive: LaserDrive) -> complex:
    """Local drive with propagation phase plus the mean field of all other atoms."""
    pos = np.array([a.position for a in atoms], dtype=float)
    sig = np.array([a.sigma_ge for a in atoms], dtype=complex)
    m = atom_index
    own = drive.omega0_peak * float(mode.field(pos[m, 0], pos[m, 1], strict=False))
    own *= np.exp(1j * mode.beta0 * pos[m, 2])
    kernel = couplings.field_kernel[m]
    return complex(own + np.sum(np.delete(kernel * sig, m)))


def _rhs(s, ee, omega, delta, gamma):
    z = 2 * ee - 1
    ds = -1j * delta * s - 1j * omega * z - 0.5 * gamma * s
    dee = -2 * np.imag(omega * np.conj(s)) - gamma * ee
    return ds, dee


def bloch_step(state: AtomState, omega_eff: complex, delta_total: float, gamma_total: float, dt: float) -> AtomState:
    """One RK4 step of a single atom at fixed effective Rabi frequency."""
    if dt * gamma_total >= STABILITY_GUARD:
        raise IntegratorError(f"dt * gamma = {dt * gamma_total:.3g} >= {STABILITY_GUARD}; reduce dt")
    s, ee = complex(state.sigma_ge), float(state.sigma_ee)
    k1 = _rhs(s, ee, omega_eff, delta_total, gamma_total)
    k2 = _rhs(s + 0.5 * dt * k1[0], ee + 0.5 * dt * k1[1], omega_eff, delta_total, gamma_total)
    k3 = _rhs(s + 0.5 * dt * k2[0], ee + 0.5 * dt * k2[1], omega_eff, delta_total, gamma_total)
    k4 = _rhs(s + dt * k3[0], ee + dt * k3[1], omega_eff, delta_total, gamma_total)
    s = s + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    ee = ee + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    ee = min(max(float(ee), 0.0), 1.0)
    return replace(state, sigma_ge=complex(s), sigma_ee=ee, sigma_gg=1.0 - ee)


class _Frame:
    """Coupling data in the co-moving drive frame s~_m = s_m exp(-i beta0 z_m)."""

    def __init__(self, sc: Scenario, positions):
        p = np.asarray(positions, dtype=float)
        c = _couplings(sc, p)
        beta0 = sc.mode.beta0
        phase = np.exp(1j * beta0 * p[:, 2])
        self.kernel = c.field_kernel * np.outer(np.conj(phase), phase)
        self.drive = sc.omega0 * sc.mode.field(p[:, 0], p[:, 1], strict=False)
        self.gamma = c.decay
        self.row_norm = float(np.max(np.sum(np.abs(self.kernel), axis=1))) if p.shape[0] > 1 else 0.0


def _coupled_rk4(s, ee, frame: _Frame, delta, dt):
    kernel_t = frame.kernel.T
    drive, gamma = frame.drive, frame.gamma

    def f(s_, ee_):
        return _rhs(s_, ee_, drive + s_ @ kernel_t, delta, gamma)

    k1 = f(s, ee)
    k2 = f(s + 0.5 * dt * k1[0], ee + 0.5 * dt * k1[1])
    k3 = f(s + 0.5 * dt * k2[0], ee + 0.5 * dt * k2[1])
    k4 = f(s + dt * k3[0], ee + dt * k3[1])
    s = s + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    ee = ee + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return s, np.clip(ee, 0.0, 1.0)


def _n_substeps(frame: _Frame, delta, dt) -> int:
    rate = frame.row_norm + float(np.max(np.abs(delta))) + float(np.max(frame.gamma))
    rate += 2 * float(np.max(np.abs(frame.drive), initial=0.0))
    n = max(1, math.ceil(rate * dt / _SUBSTEP_TARGET), math.ceil(dt * float(np.max(frame.gamma)) / (0.5 * STABILITY_GUARD)))
    return n


def integrate(sc: Scenario, ens: Ensemble, probe_detunings, s=None, ee=None, n_steps=None, accumulate=True):
    """Advance all detuning replicas of one trial; returns (mean_ee, s, ee, events).

    The same trajectories serve every detuning, since atomic motion does not
    depend on the internal state.
    """
    cfg = sc.ensemble
    dt = cfg.dt
    n_steps = cfg.n_steps if n_steps is None else n_steps
    delta0 = -np.asarray(probe_detunings, dtype=float)[:, None]
    D, N = delta0.shape[0], ens.n
    s = np.zeros((D, N), dtype=complex) if s is None else s
    ee = np.zeros((D, N)) if ee is None else ee
    start = int(sc.discard_fraction * n_steps)
    acc = np.zeros(D)
    count = 0
    events = 0
    moving = sc.moving
    frame = _Frame(sc, ens.positions)
    for step in range(n_steps):
        if moving and step % sc.refresh_stride == 0 and step > 0:
            frame = _Frame(sc, ens.positions)
        delta = delta0 + doppler_shift(ens.velocities[:, 2], sc.mode.n_eff, sc.params.k)[None, :]
        n_sub = _n_substeps(frame, delta, dt)
        h = dt / n_sub
        for _ in range(n_sub):
            s, ee = _coupled_rk4(s, ee, frame, delta, h)
        if moving:
            hit = advance_positions(ens, sc.box, dt)
            if hit.any():
                s[:, hit] = 0
                ee[:, hit] = 0
                events += int(hit.sum())
        if accumulate and step >= start:
            acc += ee.mean(axis=1)
            count += 1
    if not (np.all(np.isfinite(s)) and np.all(np.isfinite(ee))):
        raise IntegratorError("non-finite state")
    return (acc / max(count, 1)), s, ee, events


def _mf_residual(frame: _Frame, delta: float, s_scale: float, e_scale: float):
    n = frame.drive.size

    def resid(x):
        sv = (x[:n] + 1j * x[n : 2 * n]) * s_scale
        ev = x[2 * n :] * e_scale
        ds, dee = _rhs(sv, ev, frame.drive + frame.kernel @ sv, delta, frame.gamma)
        return np.concatenate([ds.real / s_scale, ds.imag / s_scale, dee / e_scale]) / frame.gamma.min()

    return resid


def steady_populations(sc: Scenario, positions, probe_detunings, tol: float = 1e-12, max_iter: int = 200):
    """Mean-field fixed point of stationary atoms for every detuning at once.

    For a given inversion the coherences solve a linear system; the
    populations then follow from d ee / dt = 0. The two half-steps are
    iterated to self-consistency, which takes a handful of sweeps for weak
    drive. Detunings where this stalls (sharp collective resonances that
    saturate) are finished with a Newton solve. Returns (s, ee), each of
    shape (detunings, atoms), in the drive frame.
    """
    frame = _Frame(sc, positions)
    delta = -np.asarray(probe_detunings, dtype=float)
    D, N = delta.size, frame.drive.size
    gamma = frame.gamma
    eye = np.eye(N)
    ee = np.zeros((D, N))
    s = np.zeros((D, N), dtype=complex)
    todo = np.ones(D, dtype=bool)
    for _ in range(max_iter):
        idx = np.flatnonzero(todo)
        if idx.size == 0:
            break
        z = 2 * ee[idx] - 1
        # (i delta + gamma / 2) s + i z (drive + K s) = 0
        a = (1j * delta[idx, None] + 0.5 * gamma[None, :])[:, :, None] * eye + 1j * z[:, :, None] * frame.kernel[None]
        s[idx] = np.linalg.solve(a, (-1j * z * frame.drive[None, :])[..., None])[..., 0]
        omega = frame.drive[None, :] + s[idx] @ frame.kernel.T
        new = np.clip(-2 * np.imag(omega * np.conj(s[idx])) / gamma[None, :], 0.0, 1.0)
        change = np.max(np.abs(new - ee[idx]), axis=1)
        scale = np.maximum(np.max(new, axis=1), 1e-300)
        ee[idx] = new
        todo[idx[change <= tol * scale]] = False
    for d in np.flatnonzero(todo):
        # near saturation the iteration can flip between empty and full, so
        # also start from the linear response and from half inversion
        a_lin = np.diag(1j * delta[d] + 0.5 * gamma) - 1j * frame.kernel
        s_lin = np.linalg.solve(a_lin, 1j * frame.drive)
        starts = [(s[d], ee[d]), (s_lin, np.abs(s_lin) ** 2), (np.zeros(N, dtype=complex), np.full(N, 0.5))]
        for s0, e0 in starts:
            e_scale = max(float(np.max(e0)), float(np.max(np.abs(s0))) ** 2, 1e-300)
            s_scale = max(float(np.max(np.abs(s0))), math.sqrt(e_scale))
            resid = _mf_residual(frame, delta[d], s_scale, e_scale)
            x0 = np.concatenate([s0.real / s_scale, s0.imag / s_scale, e0 / e_scale])
            sol = root(resid, x0, method="hybr", tol=1e-14)
            if np.all(np.isfinite(sol.x)) and np.max(np.abs(resid(sol.x))) < 1e-9:
                break
        else:
            raise IntegratorError("steady state not found; use the time integrator")
        s[d] = (sol.x[:N] + 1j * sol.x[N : 2 * N]) * s_scale
        ee[d] = sol.x[2 * N :] * e_scale
    if np.any(ee < -1e-12) or np.any(ee > 1 + 1e-12):
        raise IntegratorError("steady state left the physical population range")
    return s, ee


def _trial_ensemble(sc: Scenario, trial: int) -> Ensemble:
    if sc.positions is not None:
        return Ensemble.fixed(sc.positions)
    return sample_atoms(sc.ensemble, sc.box, trial)


def run_trial(sc: Scenario, probe_detunings, trial: int):
    """Time-and-atom averaged population for one trial, or None if it diverged."""
    ens = _trial_ensemble(sc, trial)
    try:
        if sc.solver == "steady":
            return steady_populations(sc, ens.positions, probe_detunings)[1].mean(axis=1)
        mean, *_ = integrate(sc, ens, probe_detunings)
    except IntegratorError as exc:
        log.warning("trial %d aborted: %s", trial, exc)
        return None
    return mean


def _run_trial_packed(args):
    return run_trial(*args)


def simulate_spectrum(sc: Scenario, probe_detunings, trials: int, workers: int = 1, metadata: dict | None = None) -> Spectrum:
    """Monte-Carlo spectrum averaged over ``trials`` independent trials.

    Trial results land in fixed slots, so the output does not depend on the
    number of workers.
    """
    det = np.asarray(probe_detunings, dtype=float)
    if trials < 1:
        raise DomainError("need at least one trial")
    tasks = [(sc, det, t) for t in range(trials)]
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_trial_packed, tasks))
    else:
        results = [_run_trial_packed(t) for t in tasks]
    good = [r for r in results if r is not None]
    aborted = [i for i, r in enumerate(results) if r is None]
    if not good:
        raise IntegratorError("all trials diverged")
    arr = np.array(good)
    mean = arr.mean(axis=0)
    err = arr.std(axis=0, ddof=1) / math.sqrt(len(good)) if len(good) > 1 else np.zeros_like(mean)
    meta = {
        "seed": sc.ensemble.seed,
        "trials": trials,
        "aborted_trials": aborted,
        "n_atoms": sc.ensemble.n_atoms if sc.positions is None else len(sc.positions),
        "omega0_over_gamma0": sc.omega0 / sc.params.gamma0,
    }
    meta.update(metadata or {})
    return Spectrum(det, mean, err, sc.params.gamma0, meta)


def steady_state_fixed(sc: Scenario, probe_detuning: float, t_settle: float | None = None, polish: bool = True):
    """Mean-field steady state (lab-frame coherences, populations) of stationary atoms."""
    if sc.positions is None:
        raise DomainError("steady state needs fixed atom positions")
    ens = Ensemble.fixed(sc.positions)
    gamma0 = sc.params.gamma0
    t_settle = 50 / gamma0 if t_settle is None else t_settle
    n_steps = max(1, int(math.ceil(t_settle / sc.ensemble.dt)))
    _, s, ee, _ = integrate(sc, ens, [probe_detuning], n_steps=n_steps, accumulate=False)
    s, ee = s[0], ee[0]
    if polish:
        frame = _Frame(sc, ens.positions)
        delta = -probe_detuning
        n = ens.n

        # unknowns scaled to O(1) so weak-drive populations keep full precision
        s_scale = max(float(np.max(np.abs(s))), 1e-300)
        e_scale = max(float(np.max(np.abs(ee))), 1e-300)
        resid = _mf_residual(frame, delta, s_scale, e_scale)
        x0 = np.concatenate([s.real / s_scale, s.imag / s_scale, ee / e_scale])
        sol = root(resid, x0, method="hybr", tol=1e-15)
        if np.all(np.isfinite(sol.x)) and np.max(np.abs(resid(sol.x))) < 1e-11:
            s = (sol.x[:n] + 1j * sol.x[n : 2 * n]) * s_scale
            ee = sol.x[2 * n :] * e_scale
    phase = np.exp(1j * sc.mode.beta0 * ens.positions[:, 2])
    return s * phase, ee


def _fit_shift(spec: Spectrum, model: str, omega_d: float | None):
    from .analysis.lineshape import fit_lineshape, fit_lorentzian

    if model == "lorentzian":
        res = fit_lorentzian(spec)
    else:
        res = fit_lineshape(spec, omega_d)
    return res


def extract_shift_vs_intensity(sc: Scenario, omega0_values, probe_detunings, trials, *, model="fano_voigt", omega_d=None, workers=1):
    """Fitted line centre (in Gamma0) for each drive strength.

    Returns a list of dict rows; a failed fit flags its row instead of
    aborting the sweep.
    """
    rows = []
    g0 = sc.params.gamma0
    for om in omega0_values:
        spec = simulate_spectrum(sc.with_drive(float(om)), probe_detunings, trials, workers)
        row = {"omega0_over_gamma0": om / g0, "intensity": 2 * sc.params.i_sat * (om / g0) ** 2}
        try:
            fit = _fit_shift(spec, model, omega_d)
            row.update(shift=fit.shift / g0, shift_err=fit.shift_err / g0, flag="" if fit.converged else "nonconverged")
        except FitError as exc:
            row.update(shift=float("nan"), shift_err=float("nan"), flag=f"fit_failed: {exc}")
        row["spectrum"] = spec
        rows.append(row)
    return rows


def box_length_sweep(sc: Scenario, lengths, density: float, probe_detunings, trials, *, model="lorentzian", omega_d=None, workers=1):
    """Shift against box length l for boxes (dx, dy, l) at constant density.

    Boxes are centred on the base box's transverse centre and on z = 0.
    """
    rows = []
    g0 = sc.params.gamma0
    for l in lengths:
        ext = (sc.box.extents[0], sc.box.extents[1], float(l))
        origin = (sc.box.origin[0], sc.box.origin[1], -0.5 * float(l))
        box = SimulationBox(ext, origin, sc.box.slot)
        ens = replace(sc.ensemble, n_atoms=max(1, int(round(density * box.free_volume))), density=density)
        sub = replace(sc, box=box, ensemble=ens)
        spec = simulate_spectrum(sub, probe_detunings, trials, workers)
        row = {"length": float(l), "n_atoms": ens.n_atoms}
        try:
            fit = _fit_shift(spec, model, omega_d)
            row.update(shift=fit.shift / g0, shift_err=fit.shift_err / g0, flag="" if fit.converged else "nonconverged")
        except FitError as exc:
            row.update(shift=float("nan"), shift_err=float("nan"), flag=f"fit_failed: {exc}")
        row["spectrum"] = spec
        rows.append(row)
    return rows
