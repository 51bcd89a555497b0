"""Run configuration: INI-style sections, frequencies in MHz (value / 2pi), exposure in ms.

Example::

    [system]
    g_mhz = 95
    kappa_mhz = 3000
    gamma_mhz = 3

    [probe]
    mode = cavity

An empty value means "use the default".  ``cooperativity`` in ``[system]``,
when set, overrides ``g_mhz``.
"""
from __future__ import annotations

import configparser
import dataclasses
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .model import MHZ, SystemParams
from .spectra import default_grids
from .steady_state import DriveMode, ProbeConfig


class ConfigError(ValueError):
    pass


@dataclass
class SystemSection:
    g_mhz: float = 95.0
    kappa_mhz: float = 3000.0
    gamma_mhz: float = 3.0
    omega_c_mhz: float = 0.0
    omega_a_mhz: float = 0.0
    cooperativity: float | None = None

    def params(self) -> SystemParams:
        kappa, gamma = self.kappa_mhz * MHZ, self.gamma_mhz * MHZ
        if self.cooperativity is not None:
            return SystemParams.from_cooperativity(
                self.cooperativity, kappa, gamma, self.omega_c_mhz * MHZ, self.omega_a_mhz * MHZ
            )
        return SystemParams.from_mhz(self.g_mhz, self.kappa_mhz, self.gamma_mhz, self.omega_c_mhz, self.omega_a_mhz)


@dataclass
class ProbeSection:
    mode: str = "cavity"
    j_in: float = 1e6
    rabi_mhz: float = 1.0
    kappa_T_mhz: float | None = None
    R1: float = 1.0
    R2: float = 1.0

    def probe(self) -> ProbeConfig:
        mode = DriveMode.parse(self.mode)
        kt = None if self.kappa_T_mhz is None else self.kappa_T_mhz * MHZ
        if mode is DriveMode.CAVITY:
            return ProbeConfig.cavity(self.j_in, kappa_T=kt, R1=self.R1, R2=self.R2)
        return ProbeConfig.atom(self.rabi_mhz * MHZ, kappa_T=kt, R1=self.R1, R2=self.R2)


@dataclass
class GridSection:
    """Detuning grid in units of kappa (dc) and gamma (da); blanks follow the reference sampling."""

    dc_min: float | None = None
    dc_max: float | None = None
    dc_points: int | None = None
    da_min: float | None = None
    da_max: float | None = None
    da_points: int | None = None
    refine: int = 1
    diagonal_span: float = 10.0
    diagonal_points: int = 801

    def grids(self, params: SystemParams, mode: DriveMode):
        dc0, da0 = default_grids(params, mode, self.refine)
        dc_n, da_n = dc0 / params.kappa, da0 / params.gamma
        dc = np.linspace(
            dc_n[0] if self.dc_min is None else self.dc_min,
            dc_n[-1] if self.dc_max is None else self.dc_max,
            dc_n.size if self.dc_points is None else self.dc_points,
        )
        da = np.linspace(
            da_n[0] if self.da_min is None else self.da_min,
            da_n[-1] if self.da_max is None else self.da_max,
            da_n.size if self.da_points is None else self.da_points,
        )
        return dc * params.kappa, da * params.gamma


@dataclass
class SynthSection:
    peak_counts: float = 200.0
    exposure_ms: float = 1.0
    realisations: int = 40
    noiseless: bool = False


@dataclass
class FitSection:
    C0: float | None = None
    A0: float | None = None
    max_iter: int = 200
    parametrization: str = "C"


@dataclass
class EigenSection:
    sweep_g_max_mhz: float | None = None
    sweep_points: int = 300


@dataclass
class DynamicsSection:
    dt_kappa: float = 0.02
    domega_gamma: float = 0.001


@dataclass
class RunConfig:
    system: SystemSection = field(default_factory=SystemSection)
    probe: ProbeSection = field(default_factory=ProbeSection)
    grid: GridSection = field(default_factory=GridSection)
    synth: SynthSection = field(default_factory=SynthSection)
    fit: FitSection = field(default_factory=FitSection)
    eigen: EigenSection = field(default_factory=EigenSection)
    dynamics: DynamicsSection = field(default_factory=DynamicsSection)
    seed: int = 0

    def params(self) -> SystemParams:
        return self.system.params()

    def probe_config(self) -> ProbeConfig:
        return self.probe.probe()


SECTIONS = ("system", "probe", "grid", "synth", "fit", "eigen", "dynamics")


def _coerce(raw: str, ftype):
    text = raw.strip()
    optional = "None" in str(ftype)
    if text == "" or text.lower() == "none":
        if optional:
            return None
        raise ValueError("a value is required")
    base = str(ftype).replace(" | None", "")
    if base == "bool":
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if base == "int":
        return int(text)
    if base == "float":
        value = float(text)
        if not math.isfinite(value):
            raise ValueError("must be finite")
        return value
    return text


def _unparse(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def loads(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    cfg = RunConfig()
    for name in parser.sections():
        if name == "run":
            for key, raw in parser.items(name):
                if key != "seed":
                    raise ConfigError(f"{source}: [run] unknown key {key!r}")
                try:
                    cfg.seed = int(raw)
                except ValueError as exc:
                    raise ConfigError(f"{source}: [run] seed: {exc}") from exc
            continue
        if name not in SECTIONS:
            raise ConfigError(f"{source}: unknown section [{name}]")
        section = getattr(cfg, name)
        known = {f.name: f for f in fields(section)}
        for key, raw in parser.items(name):
            if key not in known:
                raise ConfigError(f"{source}: [{name}] unknown key {key!r}")
            try:
                setattr(section, key, _coerce(raw, known[key].type))
            except ValueError as exc:
                raise ConfigError(f"{source}: [{name}] {key}: {exc}") from exc
    validate(cfg, source)
    return cfg


def validate(cfg: RunConfig, source: str = "<config>") -> None:
    try:
        cfg.params()
        cfg.probe_config().kappa_in(cfg.params())
        DriveMode.parse(cfg.probe.mode)
    except ValueError as exc:
        raise ConfigError(f"{source}: {exc}") from exc


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text, str(path))


def dumps(cfg: RunConfig) -> str:
    out = []
    for name in SECTIONS:
        out.append(f"[{name}]")
        for f in fields(getattr(cfg, name)):
            out.append(f"{f.name} = {_unparse(getattr(getattr(cfg, name), f.name))}".rstrip())
        out.append("")
    out += ["[run]", f"seed = {cfg.seed}", ""]
    return "\n".join(out)


def dump(cfg: RunConfig, path) -> None:
    Path(path).write_text(dumps(cfg))


def copy(cfg: RunConfig) -> RunConfig:
    return dataclasses.replace(
        cfg, **{name: dataclasses.replace(getattr(cfg, name)) for name in SECTIONS}
    )
