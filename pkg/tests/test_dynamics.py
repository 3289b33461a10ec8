import math
from dataclasses import replace

import numpy as np
import pytest

from slotqed import dynamics
from slotqed.core import AtomState, PhysicalParams, SimulationBox
from slotqed.dynamics import (
    Scenario,
    Spectrum,
    bloch_step,
    extract_shift_vs_intensity,
    integrate,
    simulate_spectrum,
    steady_populations,
    steady_state_fixed,
)
from slotqed.ensemble import Ensemble, EnsembleConfig
from slotqed.errors import DomainError, IntegratorError
from slotqed.mode import ModeProfile


def _two_level_ee(omega, delta, gamma):
    return omega**2 / (delta**2 + gamma**2 / 4 + 2 * omega**2)


def _frozen(params, positions, omega, **kw):
    box = SimulationBox((2e-6, 2e-6, 2e-6), (-1e-6, -1e-6, -1e-6))
    ens = EnsembleConfig(n_atoms=len(positions), density=1.0, temperature=0.0, dt=2e-11, t_total=4e-9)
    return Scenario(params, box, ModeProfile.free_space(params), ens, omega, waveguide=False, positions=tuple(map(tuple, positions)), **kw)


def test_bloch_step_relaxes_to_closed_form():
    g, om, d = 1.0, 0.4, 0.7
    st = AtomState((0, 0, 0))
    for _ in range(4000):
        st = bloch_step(st, om, d, g, 0.01)
    assert st.sigma_ee == pytest.approx(_two_level_ee(om, d, g), rel=1e-10)
    assert st.is_physical()


def test_bloch_step_is_fourth_order():
    def run(h):
        st = AtomState((0, 0, 0))
        for _ in range(int(round(1.0 / h))):
            st = bloch_step(st, 2.0, 0.5, 1.0, h)
        return st.sigma_ee

    ref = run(1e-4)
    e1, e2 = abs(run(0.02) - ref), abs(run(0.01) - ref)
    assert 12 < e1 / e2 < 20


def test_bloch_step_guard():
    with pytest.raises(IntegratorError):
        bloch_step(AtomState((0, 0, 0)), 0.1, 0.0, 1.0, 1.0)


def test_spectrum_validation():
    with pytest.raises(DomainError):
        Spectrum(np.array([1.0, 0.0]), np.zeros(2), np.zeros(2), 1.0)
    with pytest.raises(DomainError):
        Spectrum(np.array([0.0, 1.0]), np.zeros(2), -np.ones(2), 1.0)


def test_steady_solver_needs_stationary_atoms(params, slot, slot_mode):
    box = SimulationBox.slot_channel(1e-6, slot)
    with pytest.raises(DomainError):
        Scenario(params, box, slot_mode, EnsembleConfig(n_atoms=3, density=1e20, temperature=300.0), 1.0, solver="steady")


def test_steady_fixed_point_matches_integration(params):
    k, g0 = params.k, params.gamma0
    # spacings near 1/k keep every collective mode at least 0.3 Gamma0 wide
    pos = np.array([[0, 0, 0], [0, 1.0 / k, 0], [0.8 / k, 1.7 / k, 0.5 / k]])
    sc = _frozen(params, pos, 0.3 * g0)
    sc = replace(sc, ensemble=replace(sc.ensemble, dt=1e-10))
    det = np.array([-3.0, 0.0, 2.0]) * g0
    _, ee = steady_populations(sc, pos, det)
    _, _, ee_t, _ = integrate(sc, Ensemble.fixed(pos), det, n_steps=int(80 / g0 / 1e-10), accumulate=False)
    assert ee_t == pytest.approx(ee, rel=1e-7)
    _, ee_fixed = steady_state_fixed(sc, 0.0, t_settle=5 / g0)
    assert ee_fixed == pytest.approx(ee[1], rel=1e-9)


def test_single_frozen_atom_lineshape(params):
    g0 = params.gamma0
    sc = _frozen(params, [[0.0, 0.0, 0.0]], 0.01 * g0, solver="steady")
    det = np.linspace(-5, 5, 11) * g0
    spec = simulate_spectrum(sc, det, 1)
    assert np.allclose(spec.absorption, _two_level_ee(0.01 * g0, det, g0), rtol=1e-10)


def _thermal(params, slot, slot_mode, trials_seed=3, n=4, **kw):
    box = SimulationBox.slot_channel(0.5e-6, slot)
    ens = EnsembleConfig(n_atoms=n, density=1e21, temperature=300.0, seed=trials_seed, dt=1e-11, t_total=2e-10, **kw)
    return Scenario(params, box, slot_mode, ens, 0.1 * params.gamma0)


def test_worker_count_does_not_change_results(params, slot, slot_mode):
    sc = _thermal(params, slot, slot_mode)
    det = np.linspace(-200, 200, 9) * params.gamma0
    a = simulate_spectrum(sc, det, 4, workers=1)
    b = simulate_spectrum(sc, det, 4, workers=2)
    assert np.array_equal(a.absorption, b.absorption) and np.array_equal(a.std_err, b.std_err)


def test_antithetic_pair_symmetric_without_interactions(params, slot, slot_mode):
    sc = replace(_thermal(params, slot, slot_mode, antithetic=True), free_space=False, waveguide=False)
    det = np.linspace(-400, 400, 17) * params.gamma0
    spec = simulate_spectrum(sc, det, 2)
    assert np.max(np.abs(spec.absorption - spec.absorption[::-1])) <= 1e-12 * spec.absorption.max()


def test_std_err_scales_with_trials(params):
    lam = params.lambda_probe
    box = SimulationBox((0.5 * lam, 0.5 * lam, 0.5 * lam), (-0.25 * lam,) * 3)
    ens = EnsembleConfig(n_atoms=8, density=8 / box.volume, temperature=0.0, seed=2)
    sc = Scenario(params, box, ModeProfile.free_space(params, propagating=False), ens, 1e-3 * params.gamma0, waveguide=False, solver="steady")
    det = np.linspace(-3, 3, 13) * params.gamma0
    a = simulate_spectrum(sc, det, 200)
    b = simulate_spectrum(sc, det, 400)
    ratio = np.median(a.std_err / b.std_err)
    assert ratio == pytest.approx(math.sqrt(2), rel=0.2)


def test_diverged_trials_are_flagged(params, slot, slot_mode, monkeypatch):
    sc = _thermal(params, slot, slot_mode)
    real = dynamics.integrate

    def flaky(sc_, ens, *a, **kw):
        if ens.trial == 1:
            raise IntegratorError("forced")
        return real(sc_, ens, *a, **kw)

    monkeypatch.setattr(dynamics, "integrate", flaky)
    spec = simulate_spectrum(sc, np.array([-1.0, 0.0, 1.0]) * params.gamma0, 3)
    assert spec.metadata["aborted_trials"] == [1]


def test_intensity_sweep_rows(params):
    g0 = params.gamma0
    sc = _frozen(params, [[0.0, 0.0, 0.0]], 0.01 * g0, solver="steady")
    rows = extract_shift_vs_intensity(sc, [0.01 * g0, 1.0 * g0], np.linspace(-10, 10, 81) * g0, 1, model="lorentzian")
    assert [r["flag"] for r in rows] == ["", ""]
    assert rows[0]["shift"] == pytest.approx(0.0, abs=1e-8)
    assert rows[1]["intensity"] == pytest.approx(2 * params.i_sat)


def test_integrate_returns_final_state_shapes(params):
    g0 = params.gamma0
    sc = _frozen(params, [[0.0, 0.0, 0.0], [0.0, 1e-7, 0.0]], 0.01 * g0)
    mean, s, ee, events = integrate(sc, Ensemble.fixed(sc.positions), [0.0, g0], n_steps=10)
    assert mean.shape == (2,) and s.shape == (2, 2) and ee.shape == (2, 2) and events == 0
