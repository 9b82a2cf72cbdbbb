"""Cavity/magnet geometry and superconductor material parameter records.

Defaults follow the measured system: 7 mm outer radius, 55 mm outer height,
5 mm tall stub of 2 mm radius, with a 0.5 mm radius spherical magnet resting
on the stub.  Material numbers are calibration values for the 6061-Al cavity
wall, overridable through the config file.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from .errors import DomainError


class ConductorModel(enum.Enum):
    PERFECT_CONDUCTOR = "PerfectConductor"


@dataclass(frozen=True)
class CavityGeometry:
    outer_radius: float = 7.0e-3   # [m]
    outer_height: float = 55.0e-3  # [m]
    stub_height: float = 5.0e-3    # [m]
    stub_radius: float = 2.0e-3    # [m]

    def __post_init__(self):
        for name in ("outer_radius", "outer_height", "stub_height", "stub_radius"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"cavity.{name} must be > 0")
        if self.stub_radius >= self.outer_radius:
            raise DomainError("stub exceeds outer radius")
        if self.stub_height >= self.outer_height:
            raise DomainError("stub exceeds outer height")


@dataclass(frozen=True)
class MagnetSpec:
    radius: float = 0.5e-3    # [m]
    remanence: float = 1.47   # [T], recorded metadata; unused by the RF model
    conductor_model: ConductorModel = ConductorModel.PERFECT_CONDUCTOR

    def __post_init__(self):
        if self.radius <= 0.0:
            raise DomainError("magnet.radius must be > 0")


@dataclass(frozen=True)
class MaterialParams:
    """Two-fluid wall parameters; all calibration values, none hard truth.

    Calibrated so the low-power transition lands near 800 mK with the 5 dBm
    transition at least 30 mK lower, the 785 mK power ramp collapses a few
    dB below 0 dBm, and the 550 mK ramp stays flat to 1e-6.
    """

    t_c: float = 0.80         # transition temperature [K]
    lambda0: float = 50.0e-9  # zero-T penetration depth [m]
    sigma_n: float = 4.0e6    # normal-state conductivity [S/m]
    b_c0: float = 8.7e-4      # zero-T critical field [T]
    r_res: float = 2.0e-9     # residual surface resistance floor [ohm]

    def __post_init__(self):
        for name in ("t_c", "lambda0", "sigma_n", "b_c0", "r_res"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"material.{name} must be > 0")
        if self.t_c > 10.0:
            raise DomainError("material.t_c above 10 K sanity bound")


@dataclass(frozen=True)
class CavitySystem:
    """A geometry/magnet pair that passed validation."""

    geometry: CavityGeometry = field(default_factory=CavityGeometry)
    magnet: MagnetSpec = field(default_factory=MagnetSpec)


def validate_geometry(geometry: CavityGeometry, magnet: MagnetSpec) -> CavitySystem:
    """Check cross-invariants and return the validated pair.

    Violations are reported by name; the per-record invariants are enforced
    by the dataclass constructors themselves.
    """
    problems = []
    if magnet.radius >= geometry.stub_radius:
        problems.append("magnet exceeds stub radius")
    if 2.0 * magnet.radius > geometry.outer_height - geometry.stub_height:
        problems.append("magnet does not fit above the stub")
    if problems:
        raise DomainError("; ".join(problems))
    return CavitySystem(geometry=geometry, magnet=magnet)
