"""Monte-Carlo sampling and ballistic propagation of the thermal vapor.

Random numbers come from counter-based Philox streams keyed by
(seed, trial) for the initial draw and (seed, trial, atom) for every later
wall event of that atom, so results do not depend on how trials are
distributed over workers.

With ``antithetic`` set, trials come in pairs: trial 2j+1 replays the draws
of trial 2j mirrored through the box mid-plane z -> z_lo + z_hi - z, v_z -> -v_z.
The z velocity distribution is symmetric, so each trial is still an exact
sample, while the pair's Doppler histories cancel to first order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RB85_MASS, AtomState, SimulationBox, thermal_speed
from .errors import ConfigError

_MAX_REJECT = 10_000


def stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class EnsembleConfig:
    n_atoms: int
    density: float
    temperature: float = 0.0
    mass: float = RB85_MASS
    seed: int = 0
    dt: float = 1e-11
    t_total: float = 1e-9
    antithetic: bool = False

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ConfigError("n_atoms must be at least 1")
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.t_total < self.dt:
            raise ConfigError("t_total must be at least one time step")
        if self.temperature < 0 or not self.mass > 0:
            raise ConfigError("temperature must be >= 0 and mass > 0")

    @classmethod
    def for_box(cls, box: SimulationBox, density: float, **kw) -> "EnsembleConfig":
        n = int(round(density * box.free_volume))
        if n < 1:
            raise ConfigError(f"density {density:.3e} m^-3 gives no atoms in the free volume")
        return cls(n_atoms=n, density=density, **kw)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_total / self.dt))

    @property
    def sigma_v(self) -> float:
        return thermal_speed(self.temperature, self.mass) if self.temperature > 0 else 0.0


@dataclass(eq=False)
class Ensemble:
    """Mutable positions and velocities of one Monte-Carlo trial."""

    positions: np.ndarray
    velocities: np.ndarray
    seed: int = 0
    trial: int = 0
    sigma_v: float = 0.0
    mirror: bool = False
    z_bounds: tuple = (0.0, 0.0)
    _streams: dict = field(default_factory=dict, repr=False)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    def rng(self, atom: int) -> np.random.Generator:
        g = self._streams.get(atom)
        if g is None:
            g = self._streams[atom] = stream(self.seed, self.trial, atom)
        return g

    def reflect_z(self, pos, vel):
        """Map a draw made in the unmirrored frame into this trial's frame."""
        if self.mirror:
            pos = pos.copy()
            vel = vel.copy()
            pos[..., 2] = self.z_bounds[0] + self.z_bounds[1] - pos[..., 2]
            vel[..., 2] = -vel[..., 2]
        return pos, vel

    def atom_states(self) -> list[AtomState]:
        return [AtomState(tuple(p), tuple(v)) for p, v in zip(self.positions, self.velocities)]

    @classmethod
    def fixed(cls, positions) -> "Ensemble":
        p = np.array(positions, dtype=float).reshape(-1, 3)
        return cls(p, np.zeros_like(p))


def sample_positions(rng: np.random.Generator, box: SimulationBox, n: int) -> np.ndarray:
    """Uniform positions over the vapor-accessible part of ``box``."""
    if box.free_volume <= 0:
        raise ConfigError("free volume is zero")
    out = np.empty((0, 3))
    for _ in range(_MAX_REJECT):
        need = n - out.shape[0]
        if need <= 0:
            break
        batch = rng.uniform(box.lo, box.hi, size=(max(2 * need, 16), 3))
        batch = batch[~box.in_dielectric(batch)]
        out = np.vstack([out, batch[:need]])
    else:
        raise ConfigError("could not place atoms in the free volume")
    return out


def sample_velocities(rng: np.random.Generator, n: int, sigma_v: float) -> np.ndarray:
    if sigma_v == 0:
        return np.zeros((n, 3))
    return rng.normal(0.0, sigma_v, size=(n, 3))


def _z_symmetric(box: SimulationBox) -> bool:
    zs = box.lo[2] + box.hi[2]
    tol = 1e-9 * box.extents[2]
    spans = {(tuple(d.lo[:2]), tuple(d.hi[:2]), d.lo[2], d.hi[2]) for d in box.dielectrics}
    mirrored = {(a, b, zs - hi, zs - lo) for a, b, lo, hi in spans}
    return all(any(abs(m[2] - s[2]) < tol and abs(m[3] - s[3]) < tol and m[:2] == s[:2] for s in spans) for m in mirrored)


def sample_atoms(config: EnsembleConfig, box: SimulationBox, trial: int = 0) -> Ensemble:
    """Initial ensemble of a trial: uniform positions, Maxwell-Boltzmann velocities."""
    key, mirror = trial, False
    if config.antithetic:
        if not _z_symmetric(box):
            raise ConfigError("antithetic pairing needs dielectrics symmetric under z mirroring")
        key, mirror = trial // 2, trial % 2 == 1
    rng = stream(config.seed, key)
    pos = sample_positions(rng, box, config.n_atoms)
    vel = sample_velocities(rng, config.n_atoms, config.sigma_v)
    ens = Ensemble(pos, vel, config.seed, key, config.sigma_v, mirror, (float(box.lo[2]), float(box.hi[2])))
    ens.positions, ens.velocities = ens.reflect_z(pos, vel)
    return ens


def flux_speed(rng: np.random.Generator, sigma_v: float) -> float:
    """Normal speed of an atom entering through a wall, density v exp(-v^2 / 2 sigma^2)."""
    return sigma_v * math.sqrt(-2.0 * math.log1p(-rng.random()))


def _respawn(ens: Ensemble, i: int, box: SimulationBox, axis: int, side: int, dt: float):
    rng = ens.rng(i)
    lo, hi = box.lo, box.hi
    if ens.mirror and axis == 2:
        side = -side  # draw as the unmirrored partner would
    face = hi[axis] if side > 0 else lo[axis]
    inward = -side
    for _ in range(_MAX_REJECT):
        p = rng.uniform(lo, hi)
        p[axis] = face
        v = rng.normal(0.0, ens.sigma_v, size=3) if ens.sigma_v > 0 else np.zeros(3)
        v[axis] = inward * flux_speed(rng, ens.sigma_v)
        # entry time uniform within the step
        q = p + v * dt * rng.random()
        probe = p.copy()
        probe[axis] += inward * 1e-9 * box.extents[axis]
        q, _ = ens.reflect_z(q, v)
        probe, _ = ens.reflect_z(probe, v)
        p, v = ens.reflect_z(p, v)
        if box.in_dielectric(probe):
            continue
        if box.inside(q) and not box.in_dielectric(q):
            p = q
        ens.positions[i] = p
        ens.velocities[i] = v
        return
    raise ConfigError("could not respawn atom on an unobstructed face")


def _reflect(ens: Ensemble, i: int, old: np.ndarray, new: np.ndarray, box: SimulationBox):
    for d in box.dielectrics:
        if not d.contains(new):
            continue
        step = new - old
        best, axis, face = -np.inf, 0, 0.0
        for a in range(3):
            if step[a] == 0:
                continue
            if old[a] <= d.lo[a] < new[a]:
                t, f = (d.lo[a] - old[a]) / step[a], d.lo[a]
            elif old[a] >= d.hi[a] > new[a]:
                t, f = (d.hi[a] - old[a]) / step[a], d.hi[a]
            else:
                continue
            if t > best:
                best, axis, face = t, a, f
        new = new.copy()
        new[axis] = 2 * face - new[axis]
        ens.velocities[i, axis] *= -1
        if not box.inside(new) or box.in_dielectric(new):
            new = old.copy()
        ens.positions[i] = new
        return


def advance_positions(ens: Ensemble, box: SimulationBox, dt: float) -> np.ndarray:
    """Ballistic step; returns the mask of atoms that hit a wall this step.

    Atoms leaving the box are re-injected through the face they crossed with
    an inward flux-distributed velocity. Atoms entering a dielectric are
    reflected specularly. Either event resets the atom's internal state,
    which is the caller's job.
    """
    old = ens.positions
    new = old + ens.velocities * dt
    events = np.zeros(ens.n, dtype=bool)
    if not np.any(ens.velocities):
        return events
    out = ~box.inside(new)
    hit = ~out & box.in_dielectric(new)
    stay = ~(out | hit)
    ens.positions = np.where(stay[:, None], new, old)
    for i in np.flatnonzero(out):
        step = new[i] - old[i]
        frac = np.full(3, np.inf)
        side = np.zeros(3, dtype=int)
        for a in range(3):
            if new[i, a] > box.hi[a]:
                frac[a], side[a] = (box.hi[a] - old[i, a]) / step[a], 1
            elif new[i, a] < box.lo[a]:
                frac[a], side[a] = (box.lo[a] - old[i, a]) / step[a], -1
        a = int(np.argmin(frac))
        _respawn(ens, i, box, a, side[a], dt)
    for i in np.flatnonzero(hit):
        _reflect(ens, i, old[i], new[i], box)
    events[out | hit] = True
    return events
