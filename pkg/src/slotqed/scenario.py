"""Scenario files: schema, validation, hashing and resolution to a Scenario.

A scenario is a YAML mapping. Unknown keys are rejected, and validation
errors name the offending field path (for example ``ensemble.dt``).
Frequencies are given in units of Gamma0; lengths in metres unless a block
sets ``units: lambda``.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import replace
from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from .core import PhysicalParams, SimulationBox, SlotGeometry, density_from_normalized, doppler_fwhm, rabi_from_intensity
from .dynamics import Scenario
from .ensemble import EnsembleConfig
from .errors import ConfigError, DomainError
from .mode import ModeProfile, analytic_fallback_profile, load_mode_profile


class _Block(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PhysicsBlock(_Block):
    lambda_probe: float = 1529e-9
    n_eff: float = 2.53
    gamma0: float = 2 * math.pi * 1.89e6
    i_sat: float = 1.4
    temperature: float = 300.0
    L_interaction: float = 200e-6


class SlotBlock(_Block):
    w: float = 300e-9
    h: float = 250e-9
    g: float = 50e-9


class BoxBlock(_Block):
    kind: Literal["slot_channel", "slot_cell", "cuboid"] = "slot_channel"
    units: Literal["m", "lambda"] = "m"
    length: float | None = Field(None, gt=0, description="z extent; for slot_channel it may be left out and set from n_atoms and density")
    margin: float = Field(0.0, ge=0)
    extents: tuple[float, float, float] | None = Field(None, description="cuboid (x, y, z) extents, centred on the origin")
    slot: SlotBlock = SlotBlock()

    @model_validator(mode="after")
    def _shape(self):
        if self.kind == "cuboid" and self.extents is None:
            raise ValueError("cuboid boxes need 'extents'")
        if self.kind == "slot_cell" and self.length is None:
            raise ValueError("slot_cell boxes need 'length'")
        return self


class ModeBlock(_Block):
    kind: Literal["analytic", "file", "free_space"] = "analytic"
    path: str | None = None
    pf_max: float = Field(35.0, ge=1)
    decay_length: float = Field(50e-9, gt=0)
    propagating: bool = True

    @model_validator(mode="after")
    def _path(self):
        if self.kind == "file" and not self.path:
            raise ValueError("mode kind 'file' needs 'path'")
        return self


class CouplingBlock(_Block):
    free_space: bool = True
    waveguide: bool = True
    r_min: float | None = Field(None, ge=0)
    gamma1_over_gamma0: float | None = Field(None, gt=0)


class EnsembleBlock(_Block):
    n_atoms: int | None = Field(None, ge=1)
    normalized_density: float | None = Field(None, gt=0, description="(k r)^-3")
    density: float | None = Field(None, gt=0, description="atoms per m^3")
    temperature: float | None = Field(None, ge=0, description="defaults to physics.temperature")
    positions: list[tuple[float, float, float]] | None = None
    dt: float = Field(1e-11, gt=0)
    t_total: float = Field(1e-9, gt=0)
    discard_fraction: float = Field(0.0, ge=0, lt=1)
    refresh_stride: int = Field(1, ge=1)
    antithetic: bool = False

    @model_validator(mode="after")
    def _density(self):
        if self.normalized_density is not None and self.density is not None:
            raise ValueError("give either 'density' or 'normalized_density', not both")
        return self


class DriveBlock(_Block):
    omega0_over_gamma0: float | None = Field(None, ge=0)
    intensity: float | None = Field(None, ge=0, description="peak intensity in W/m^2")

    @model_validator(mode="after")
    def _one(self):
        if (self.omega0_over_gamma0 is None) == (self.intensity is None):
            raise ValueError("give exactly one of 'omega0_over_gamma0' and 'intensity'")
        return self


class DetuningBlock(_Block):
    start: float = -50.0
    stop: float = 50.0
    points: int = Field(201, ge=2)

    @model_validator(mode="after")
    def _order(self):
        if not self.stop > self.start:
            raise ValueError("'stop' must exceed 'start'")
        return self

    def grid(self, gamma0: float) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.points) * gamma0


class SweepBlock(_Block):
    axis: Literal["none", "intensity", "density", "box_length"] = "none"
    values: list[float] = Field(default_factory=list, description="omega0/Gamma0, (k r)^-3, or box length in the box units")

    @model_validator(mode="after")
    def _values(self):
        if self.axis != "none" and not self.values:
            raise ValueError(f"sweep over '{self.axis}' needs 'values'")
        if self.axis == "none" and self.values:
            raise ValueError("'values' given without a sweep axis")
        return self


class FitBlock(_Block):
    model: Literal["lorentzian", "fano_voigt", "none"] = "lorentzian"
    omega_d_over_gamma0: float | None = Field(None, gt=0, description="Doppler FWHM; defaults to the thermal value")


class OutputBlock(_Block):
    directory: str = "results"
    detuning_unit: Literal["gamma0", "MHz", "rad/s"] = "gamma0"
    cp_offset_over_gamma0: float = -70.0


class ScenarioFile(_Block):
    seed: int = Field(0, ge=0)
    trials: int = Field(1, ge=1)
    solver: Literal["integrate", "steady"] = "integrate"
    physics: PhysicsBlock = PhysicsBlock()
    box: BoxBlock = BoxBlock()
    mode: ModeBlock = ModeBlock()
    coupling: CouplingBlock = CouplingBlock()
    ensemble: EnsembleBlock = EnsembleBlock()
    drive: DriveBlock
    detuning: DetuningBlock = DetuningBlock()
    sweep: SweepBlock = SweepBlock()
    fit: FitBlock = FitBlock()
    output: OutputBlock = OutputBlock()
    # directory relative mode paths resolve against; not part of the hash
    _base_dir: str | None = PrivateAttr(None)

    def config_hash(self) -> str:
        """SHA-256 of the canonical JSON form, ignoring the output directory."""
        data = self.model_dump(mode="json", exclude={"output": {"directory"}})
        blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def resolved_yaml(self) -> str:
        return yaml.safe_dump(self.model_dump(mode="json"), sort_keys=True)


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for e in exc.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        lines.append(f"{path}: {e['msg']}")
    return "; ".join(lines)


def parse_scenario(data, base_dir=None) -> ScenarioFile:
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a mapping")
    try:
        cfg = ScenarioFile.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None
    cfg._base_dir = None if base_dir is None else str(base_dir)
    return cfg


def load_scenario(path) -> ScenarioFile:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario: {exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML: {exc}") from None
    return parse_scenario(data, path.parent)


def _box(cfg: ScenarioFile, scale: float, length: float | None) -> SimulationBox:
    b = cfg.box
    slot = SlotGeometry(**b.slot.model_dump())
    if b.kind == "slot_channel":
        return SimulationBox.slot_channel(length, slot)
    if b.kind == "slot_cell":
        return SimulationBox.slot_cell(length, b.margin * scale, slot)
    ext = tuple(e * scale for e in b.extents)
    if length is not None:
        ext = (ext[0], ext[1], length)
    return SimulationBox(ext, tuple(-0.5 * e for e in ext), slot)


def _mode(cfg: ScenarioFile, params: PhysicalParams) -> ModeProfile:
    m = cfg.mode
    if m.kind == "free_space":
        return ModeProfile.free_space(params, propagating=m.propagating)
    if m.kind == "file":
        path = Path(m.path)
        if not path.is_absolute() and cfg._base_dir is not None:
            path = Path(cfg._base_dir) / path
        return load_mode_profile(path)
    slot = SlotGeometry(**cfg.box.slot.model_dump())
    return analytic_fallback_profile(params, slot, m.pf_max, m.decay_length)


def build_scenario(cfg: ScenarioFile, *, omega0_over_gamma0=None, normalized_density=None, box_length=None) -> Scenario:
    """Resolve a scenario file, optionally overriding one swept quantity."""
    try:
        params = PhysicalParams(**cfg.physics.model_dump())
        e = cfg.ensemble
        scale = params.lambda_probe if cfg.box.units == "lambda" else 1.0
        length = cfg.box.length * scale if cfg.box.length is not None else None
        if box_length is not None:
            length = box_length * scale

        if normalized_density is not None:
            density = density_from_normalized(normalized_density, params.k)
        elif e.normalized_density is not None:
            density = density_from_normalized(e.normalized_density, params.k)
        else:
            density = e.density

        positions = tuple(tuple(p) for p in e.positions) if e.positions else None
        n_atoms = len(positions) if positions else e.n_atoms
        length_from_n = cfg.box.kind == "slot_channel" and length is None
        if length_from_n:
            if positions:
                length = 1e-6
            elif n_atoms is None or density is None:
                raise ConfigError("box.length: slot_channel without a length needs ensemble.n_atoms and a density")
            else:
                s = cfg.box.slot
                length = n_atoms / (density * s.g * s.h)
        box = _box(cfg, scale, length)
        swept = normalized_density is not None or box_length is not None
        if swept and density is None and n_atoms is not None and not positions:
            # density of the unswept box is the one held fixed
            base_len = cfg.box.length * scale if cfg.box.length is not None else None
            density = n_atoms / _box(cfg, scale, base_len).free_volume
        if not positions and (n_atoms is None or (swept and not length_from_n)):
            if density is None:
                raise ConfigError("ensemble: give n_atoms or a density")
            n_atoms = max(1, int(round(density * box.free_volume)))
        if density is None:
            density = n_atoms / box.free_volume

        temperature = params.temperature if e.temperature is None else e.temperature
        ens = EnsembleConfig(
            n_atoms=n_atoms, density=density, temperature=temperature, seed=cfg.seed,
            dt=e.dt, t_total=e.t_total, antithetic=e.antithetic,
        )
        g0 = params.gamma0
        if omega0_over_gamma0 is not None:
            omega0 = omega0_over_gamma0 * g0
        elif cfg.drive.omega0_over_gamma0 is not None:
            omega0 = cfg.drive.omega0_over_gamma0 * g0
        else:
            omega0 = rabi_from_intensity(cfg.drive.intensity, params.i_sat, g0)
        c = cfg.coupling
        return Scenario(
            params, box, _mode(cfg, params), ens, omega0,
            free_space=c.free_space, waveguide=c.waveguide, positions=positions,
            discard_fraction=e.discard_fraction, refresh_stride=e.refresh_stride,
            gamma1=None if c.gamma1_over_gamma0 is None else c.gamma1_over_gamma0 * g0,
            r_min=c.r_min, solver=cfg.solver,
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from None


def sweep_points(cfg: ScenarioFile):
    """(label, value, scenario) for every point of the declared sweep."""
    axis = cfg.sweep.axis
    if axis == "none":
        return [("none", float("nan"), build_scenario(cfg))]
    key = {"intensity": "omega0_over_gamma0", "density": "normalized_density", "box_length": "box_length"}[axis]
    return [(axis, float(v), build_scenario(cfg, **{key: float(v)})) for v in cfg.sweep.values]


def doppler_width(cfg: ScenarioFile, sc: Scenario) -> float:
    """Doppler FWHM (rad/s) for Fano-Voigt fits."""
    if cfg.fit.omega_d_over_gamma0 is not None:
        return cfg.fit.omega_d_over_gamma0 * sc.params.gamma0
    t = sc.ensemble.temperature
    width = doppler_fwhm(t, max(sc.mode.n_eff, 1e-12), sc.params.k, sc.ensemble.mass) if t > 0 else 0.0
    return max(width, 1e-6 * sc.params.gamma0)


def with_seed(sc: Scenario, seed: int) -> Scenario:
    return replace(sc, ensemble=replace(sc.ensemble, seed=seed))
