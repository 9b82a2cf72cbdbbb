"""Sectioned key=value run configuration: parsing, defaults, canonical echo.

All values are SI except protocol powers, which are dBm (the instrument
axis).  Unknown sections or keys are rejected; every output file embeds the
canonical echo of the fully-resolved config plus its hash, so any CSV can be
traced back to the exact run settings.
"""

from __future__ import annotations

import hashlib
import io
from configparser import ConfigParser
from dataclasses import dataclass, field

from .errors import ConfigError
from .geometry import CavityGeometry, MagnetSpec, MaterialParams
from .errors import DomainError


@dataclass(frozen=True)
class ThermalParams:
    r_th: float = 20.0                # cavity-to-bath thermal resistance [K/W]
    tau_th: float = 5.0               # wall thermal time constant [s]
    base_t: float = 0.135             # fridge base temperature [K]
    eta_trap: float = 1.0e6           # trapped-flux resistance gain [ohm/T^2]
    flux_pin_threshold: float = 4.0e-4  # field above which flux pins [T]
    substeps: int = 20                # dwell integration substeps

    def __post_init__(self):
        if min(self.r_th, self.tau_th, self.base_t, self.eta_trap,
               self.flux_pin_threshold) <= 0.0:
            raise DomainError("thermal parameters must be > 0")
        if self.substeps < 1:
            raise DomainError("thermal.substeps must be >= 1")


@dataclass(frozen=True)
class SolverOptions:
    dr: float = 1.0e-4
    dz: float = 1.0e-4
    beta_mode: str = "tm01"
    perturbation_average: str = "center"

    def __post_init__(self):
        if self.dr <= 0.0 or self.dz <= 0.0:
            raise DomainError("solver spacings must be > 0")
        if self.beta_mode not in ("tm01",):
            raise DomainError(f"unknown beta_mode {self.beta_mode!r}")
        if self.perturbation_average not in ("center", "volume"):
            raise DomainError("perturbation_average must be center or volume")


@dataclass(frozen=True)
class MapOptions:
    spacing: float = 1.0e-4
    z_max: float = 2.0e-3
    roi_x: tuple[float, float] = (0.0, 0.5e-3)
    roi_z: tuple[float, float] = (0.1e-3, 1.5e-3)


@dataclass(frozen=True)
class ProtocolSpec:
    kind: str = "temperature"   # temperature | power | switch
    setpoints: tuple[tuple[float, float], ...] = ()  # (t_bath [K], p_in [dBm])
    dwell: float = 60.0         # [s]
    magnet_z: float = 0.5e-3    # sphere-center height above stub top [m]

    def __post_init__(self):
        if self.kind not in ("temperature", "power", "switch"):
            raise DomainError(f"unknown protocol kind {self.kind!r}")
        if self.dwell <= 0.0:
            raise DomainError("protocol.dwell must be > 0")


@dataclass(frozen=True)
class NoiseOptions:
    sigma: float = 0.0
    seed: int = 1234

    def __post_init__(self):
        if self.sigma < 0.0:
            raise DomainError("noise.sigma must be >= 0")


@dataclass(frozen=True)
class RunConfig:
    cavity: CavityGeometry = field(default_factory=CavityGeometry)
    magnet: MagnetSpec = field(default_factory=MagnetSpec)
    material: MaterialParams = field(default_factory=MaterialParams)
    kinetic_fraction: float = 1.15e-4  # L_k share of total inductance at T -> 0
    q_ext: float = 1.2e4
    thermal: ThermalParams = field(default_factory=ThermalParams)
    solver: SolverOptions = field(default_factory=SolverOptions)
    map_opts: MapOptions = field(default_factory=MapOptions)
    protocol: ProtocolSpec = field(default_factory=ProtocolSpec)
    noise: NoiseOptions = field(default_factory=NoiseOptions)


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


def _setpoints_str(sp: tuple[tuple[float, float], ...]) -> str:
    return "; ".join(f"{_fmt(t)}:{_fmt(p)}" for t, p in sp)


def emit_config(cfg: RunConfig) -> str:
    """Canonical text form; emit(parse(emit(c))) == emit(c) byte-for-byte."""
    out = io.StringIO()
    sections = [
        ("cavity", [("outer_radius", cfg.cavity.outer_radius),
                    ("outer_height", cfg.cavity.outer_height),
                    ("stub_height", cfg.cavity.stub_height),
                    ("stub_radius", cfg.cavity.stub_radius)]),
        ("magnet", [("radius", cfg.magnet.radius),
                    ("remanence", cfg.magnet.remanence)]),
        ("material", [("t_c", cfg.material.t_c),
                      ("lambda0", cfg.material.lambda0),
                      ("sigma_n", cfg.material.sigma_n),
                      ("b_c0", cfg.material.b_c0),
                      ("r_res", cfg.material.r_res),
                      ("kinetic_fraction", cfg.kinetic_fraction)]),
        ("coupling", [("q_ext", cfg.q_ext)]),
        ("thermal", [("r_th", cfg.thermal.r_th),
                     ("tau_th", cfg.thermal.tau_th),
                     ("base_t", cfg.thermal.base_t),
                     ("eta_trap", cfg.thermal.eta_trap),
                     ("flux_pin_threshold", cfg.thermal.flux_pin_threshold),
                     ("substeps", cfg.thermal.substeps)]),
        ("solver", [("dr", cfg.solver.dr),
                    ("dz", cfg.solver.dz),
                    ("beta_mode", cfg.solver.beta_mode),
                    ("perturbation_average", cfg.solver.perturbation_average)]),
        ("map", [("spacing", cfg.map_opts.spacing),
                 ("z_max", cfg.map_opts.z_max),
                 ("roi_x", cfg.map_opts.roi_x),
                 ("roi_z", cfg.map_opts.roi_z)]),
        ("protocol", [("kind", cfg.protocol.kind),
                      ("setpoints", _setpoints_str(cfg.protocol.setpoints)),
                      ("dwell", cfg.protocol.dwell),
                      ("magnet_z", cfg.protocol.magnet_z)]),
        ("noise", [("sigma", cfg.noise.sigma),
                   ("seed", cfg.noise.seed)]),
    ]
    for name, keys in sections:
        out.write(f"[{name}]\n")
        for key, val in keys:
            out.write(f"{key} = {_fmt(val)}\n")
        out.write("\n")
    return out.getvalue()


def config_hash(cfg: RunConfig) -> str:
    return hashlib.sha256(emit_config(cfg).encode()).hexdigest()[:16]


_SCHEMA: dict[str, set[str]] = {
    "cavity": {"outer_radius", "outer_height", "stub_height", "stub_radius"},
    "magnet": {"radius", "remanence"},
    "material": {"t_c", "lambda0", "sigma_n", "b_c0", "r_res", "kinetic_fraction"},
    "coupling": {"q_ext"},
    "thermal": {"r_th", "tau_th", "base_t", "eta_trap", "flux_pin_threshold", "substeps"},
    "solver": {"dr", "dz", "beta_mode", "perturbation_average"},
    "map": {"spacing", "z_max", "roi_x", "roi_z"},
    "protocol": {"kind", "setpoints", "dwell", "magnet_z"},
    "noise": {"sigma", "seed"},
}


def _get_float(raw: dict, section: str, key: str, default: float) -> float:
    if key not in raw.get(section, {}):
        return default
    txt = raw[section][key]
    try:
        return float(txt)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {txt!r} as number") from exc


def _get_int(raw: dict, section: str, key: str, default: int) -> int:
    if key not in raw.get(section, {}):
        return default
    txt = raw[section][key]
    try:
        return int(txt)
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {txt!r} as integer") from exc


def _get_str(raw: dict, section: str, key: str, default: str) -> str:
    return raw.get(section, {}).get(key, default)


def _get_pair(raw: dict, section: str, key: str, default: tuple[float, float]) -> tuple[float, float]:
    if key not in raw.get(section, {}):
        return default
    parts = [p.strip() for p in raw[section][key].split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{section}.{key}: expected two comma-separated numbers")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{section}.{key}: cannot parse {raw[section][key]!r}") from exc


def parse_setpoints(text: str) -> tuple[tuple[float, float], ...]:
    """'t:p; t:p; ...' with t in kelvin and p in dBm."""
    text = text.strip()
    if not text:
        return ()
    out = []
    for token in text.split(";"):
        token = token.strip()
        if not token:
            continue
        if ":" not in token:
            raise ConfigError(f"protocol.setpoints: bad token {token!r}, expected t:p")
        t_txt, p_txt = token.split(":", 1)
        try:
            out.append((float(t_txt), float(p_txt)))
        except ValueError as exc:
            raise ConfigError(f"protocol.setpoints: cannot parse {token!r}") from exc
    return tuple(out)


def parse_config(text: str) -> RunConfig:
    """Parse INI-style config text; missing keys fall back to defaults."""
    parser = ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except Exception as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    raw: dict[str, dict[str, str]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        raw[section] = {}
        for key, val in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown config key {section}.{key}")
            raw[section][key] = val

    d = RunConfig()
    try:
        cavity = CavityGeometry(
            outer_radius=_get_float(raw, "cavity", "outer_radius", d.cavity.outer_radius),
            outer_height=_get_float(raw, "cavity", "outer_height", d.cavity.outer_height),
            stub_height=_get_float(raw, "cavity", "stub_height", d.cavity.stub_height),
            stub_radius=_get_float(raw, "cavity", "stub_radius", d.cavity.stub_radius),
        )
        magnet = MagnetSpec(
            radius=_get_float(raw, "magnet", "radius", d.magnet.radius),
            remanence=_get_float(raw, "magnet", "remanence", d.magnet.remanence),
        )
        material = MaterialParams(
            t_c=_get_float(raw, "material", "t_c", d.material.t_c),
            lambda0=_get_float(raw, "material", "lambda0", d.material.lambda0),
            sigma_n=_get_float(raw, "material", "sigma_n", d.material.sigma_n),
            b_c0=_get_float(raw, "material", "b_c0", d.material.b_c0),
            r_res=_get_float(raw, "material", "r_res", d.material.r_res),
        )
        thermal = ThermalParams(
            r_th=_get_float(raw, "thermal", "r_th", d.thermal.r_th),
            tau_th=_get_float(raw, "thermal", "tau_th", d.thermal.tau_th),
            base_t=_get_float(raw, "thermal", "base_t", d.thermal.base_t),
            eta_trap=_get_float(raw, "thermal", "eta_trap", d.thermal.eta_trap),
            flux_pin_threshold=_get_float(raw, "thermal", "flux_pin_threshold",
                                          d.thermal.flux_pin_threshold),
            substeps=_get_int(raw, "thermal", "substeps", d.thermal.substeps),
        )
        solver = SolverOptions(
            dr=_get_float(raw, "solver", "dr", d.solver.dr),
            dz=_get_float(raw, "solver", "dz", d.solver.dz),
            beta_mode=_get_str(raw, "solver", "beta_mode", d.solver.beta_mode),
            perturbation_average=_get_str(raw, "solver", "perturbation_average",
                                          d.solver.perturbation_average),
        )
        map_opts = MapOptions(
            spacing=_get_float(raw, "map", "spacing", d.map_opts.spacing),
            z_max=_get_float(raw, "map", "z_max", d.map_opts.z_max),
            roi_x=_get_pair(raw, "map", "roi_x", d.map_opts.roi_x),
            roi_z=_get_pair(raw, "map", "roi_z", d.map_opts.roi_z),
        )
        protocol = ProtocolSpec(
            kind=_get_str(raw, "protocol", "kind", d.protocol.kind),
            setpoints=parse_setpoints(_get_str(raw, "protocol", "setpoints", "")),
            dwell=_get_float(raw, "protocol", "dwell", d.protocol.dwell),
            magnet_z=_get_float(raw, "protocol", "magnet_z", d.protocol.magnet_z),
        )
        noise = NoiseOptions(
            sigma=_get_float(raw, "noise", "sigma", d.noise.sigma),
            seed=_get_int(raw, "noise", "seed", d.noise.seed),
        )
        kinetic_fraction = _get_float(raw, "material", "kinetic_fraction", d.kinetic_fraction)
        q_ext = _get_float(raw, "coupling", "q_ext", d.q_ext)
        if not 0.0 < kinetic_fraction < 1.0:
            raise ConfigError("material.kinetic_fraction must be in (0, 1)")
        if q_ext <= 0.0:
            raise ConfigError("coupling.q_ext must be > 0")
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc

    return RunConfig(cavity=cavity, magnet=magnet, material=material,
                     kinetic_fraction=kinetic_fraction, q_ext=q_ext,
                     thermal=thermal, solver=solver, map_opts=map_opts,
                     protocol=protocol, noise=noise)
