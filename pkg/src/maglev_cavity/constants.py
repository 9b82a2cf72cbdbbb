"""Physical constants and power-unit conversions.

All internal computation is SI; dBm/mm/GHz appear only at I/O boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


@dataclass(frozen=True)
class PhysicalConstants:
    c: float = 299792458.0          # speed of light [m/s]
    mu0: float = 4.0e-7 * math.pi   # vacuum permeability [H/m]
    eps0: float = 1.0 / (4.0e-7 * math.pi * 299792458.0**2)  # [F/m]
    m_e: float = 9.1093837015e-31   # electron mass [kg]
    e_charge: float = 1.602176634e-19  # elementary charge [C]

    def __post_init__(self):
        for name in ("c", "mu0", "eps0", "m_e", "e_charge"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"constant {name} must be positive")
        if abs(self.c**2 * self.mu0 * self.eps0 - 1.0) > 1e-12:
            raise DomainError("constants violate c^2 * mu0 * eps0 = 1")


CONSTANTS = PhysicalConstants()


def dbm_to_watts(p_dbm: float) -> float:
    """Convert power in dBm to watts."""
    if not math.isfinite(p_dbm):
        raise DomainError(f"power must be finite, got {p_dbm}")
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def watts_to_dbm(p_watts: float) -> float:
    """Convert power in watts to dBm."""
    if not math.isfinite(p_watts) or p_watts <= 0.0:
        raise DomainError(f"power must be finite and positive, got {p_watts}")
    return 10.0 * math.log10(p_watts / 1e-3)
