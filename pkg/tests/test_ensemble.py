import numpy as np
import pytest

from slotqed.core import SimulationBox
from slotqed.ensemble import EnsembleConfig, advance_positions, flux_speed, sample_atoms, sample_positions, stream
from slotqed.errors import ConfigError


def _cfg(**kw):
    base = dict(n_atoms=50, density=1e20, temperature=300.0, seed=7, dt=1e-11, t_total=1e-10)
    base.update(kw)
    return EnsembleConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        _cfg(n_atoms=0)
    with pytest.raises(ConfigError):
        _cfg(t_total=1e-12)
    with pytest.raises(ConfigError):
        _cfg(temperature=-1.0)


def test_for_box_counts_free_volume(slot):
    box = SimulationBox.slot_cell(1e-6, 100e-9, slot)
    cfg = EnsembleConfig.for_box(box, 1e21)
    assert cfg.n_atoms == round(1e21 * box.free_volume)
    with pytest.raises(ConfigError):
        EnsembleConfig.for_box(box, 1.0)


def test_positions_avoid_dielectrics(slot):
    box = SimulationBox.slot_cell(1e-6, 50e-9, slot)
    pos = sample_positions(stream(1, 0), box, 2000)
    assert pos.shape == (2000, 3)
    assert not box.in_dielectric(pos).any()
    assert box.inside(pos).all()


def test_streams_are_keyed_not_sequential(slot):
    box = SimulationBox.slot_channel(1e-6, slot)
    a = sample_atoms(_cfg(), box, trial=3)
    b = sample_atoms(_cfg(), box, trial=3)
    c = sample_atoms(_cfg(), box, trial=4)
    assert np.array_equal(a.positions, b.positions) and np.array_equal(a.velocities, b.velocities)
    assert not np.array_equal(a.positions, c.positions)


def test_antithetic_pair_is_mirror_image(slot):
    box = SimulationBox.slot_channel(1e-6, slot)
    cfg = _cfg(antithetic=True)
    a = sample_atoms(cfg, box, trial=6)
    b = sample_atoms(cfg, box, trial=7)
    z_sum = box.lo[2] + box.hi[2]
    assert np.allclose(b.positions[:, 2], z_sum - a.positions[:, 2], rtol=0, atol=1e-18)
    assert np.array_equal(b.positions[:, :2], a.positions[:, :2])
    assert np.array_equal(b.velocities[:, 2], -a.velocities[:, 2])
    # the pair stays mirrored through wall events
    for _ in range(200):
        advance_positions(a, box, 1e-10)
        advance_positions(b, box, 1e-10)
    assert np.allclose(b.positions[:, 2], z_sum - a.positions[:, 2], rtol=0, atol=1e-15)
    assert np.allclose(b.velocities[:, 2], -a.velocities[:, 2])


def test_antithetic_requires_symmetric_box(slot):
    from slotqed.core import Cuboid

    box = SimulationBox((1e-6, 1e-6, 1e-6), dielectrics=(Cuboid((0, 0, 0), (1e-7, 1e-7, 1e-7)),))
    with pytest.raises(ConfigError):
        sample_atoms(_cfg(antithetic=True, n_atoms=5), box, 0)


def test_atoms_stay_in_vapor(slot):
    box = SimulationBox.slot_cell(0.5e-6, 50e-9, slot)
    ens = sample_atoms(_cfg(n_atoms=100), box, 0)
    events = 0
    for _ in range(300):
        events += advance_positions(ens, box, 2e-10).sum()
        assert box.inside(ens.positions).all()
        assert not box.in_dielectric(ens.positions).any()
    assert events > 0


def test_flux_speed_distribution():
    rng = stream(3, 0)
    v = np.array([flux_speed(rng, 1.0) for _ in range(20000)])
    # Rayleigh distribution: mean sqrt(pi / 2)
    assert v.mean() == pytest.approx(np.sqrt(np.pi / 2), rel=0.02)


def test_frozen_atoms_do_not_move(slot):
    box = SimulationBox.slot_channel(1e-6, slot)
    ens = sample_atoms(_cfg(temperature=0.0), box, 0)
    before = ens.positions.copy()
    assert not advance_positions(ens, box, 1e-9).any()
    assert np.array_equal(before, ens.positions)
