"""Two-fluid superconductor thermodynamics and the lumped LC resonance.

Pair fraction follows the two-fluid law 1 - (T/Tc)^4; the penetration depth
scales as lambda0 / sqrt(pair fraction) and the kinetic inductance is linear
in the effective penetration depth.  Microwave power enters through a
quadratic pair-breaking suppression against the temperature-dependent
critical field b_c(T) = b_c0 (1 - (T/Tc)^2).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

from .constants import CONSTANTS, PhysicalConstants
from .errors import DomainError
from .geometry import MaterialParams


@dataclass(frozen=True)
class SuperconductorState:
    """Wall state at one operating point."""

    temperature: float        # [K]
    pair_fraction: float      # n_s/n, in [0, 1]
    lam: float                # effective penetration depth [m] (X_s / (w mu0))
    surface_resistance: float  # [ohm]
    surface_reactance: float   # [ohm]
    is_superconducting: bool

    def __post_init__(self):
        if not 0.0 <= self.pair_fraction <= 1.0:
            raise DomainError("pair_fraction outside [0, 1]")
        if self.is_superconducting != (self.pair_fraction > 0.0):
            raise DomainError("is_superconducting inconsistent with pair_fraction")


@dataclass(frozen=True)
class InductanceBudget:
    l_geom: float  # geometric inductance [H]
    l_kin: float   # kinetic inductance at the calibration point [H]
    c_eff: float   # effective capacitance [F]

    def __post_init__(self):
        if self.l_geom <= 0.0:
            raise DomainError("l_geom must be > 0")
        if self.l_kin < 0.0 or self.c_eff < 0.0:
            raise DomainError("l_kin and c_eff must be >= 0")


def superfluid_fraction(t: float, t_c: float) -> float:
    """Cooper-pair fraction n_s/n at temperature t, clamped to [0, 1]."""
    if t < 0.0:
        raise DomainError(f"temperature must be >= 0, got {t}")
    if t_c <= 0.0:
        raise DomainError(f"t_c must be > 0, got {t_c}")
    if t >= t_c:
        return 0.0
    return min(1.0, 1.0 - (t / t_c) ** 4)


def london_depth(n_s: float, k: PhysicalConstants = CONSTANTS) -> float:
    """London penetration depth for pair density n_s [m^-3] (SI form)."""
    if n_s <= 0.0:
        raise DomainError(f"pair density must be > 0, got {n_s}")
    return math.sqrt(k.m_e / (k.mu0 * n_s * k.e_charge**2))


def penetration_depth(t: float, mat: MaterialParams) -> float:
    """Temperature-dependent penetration depth lambda0 / sqrt(n_s/n)."""
    frac = superfluid_fraction(t, mat.t_c)
    if frac <= 0.0:
        raise DomainError("normal state: penetration depth undefined")
    return mat.lambda0 / math.sqrt(frac)


def critical_field(t: float, mat: MaterialParams) -> float:
    """b_c(T) = b_c0 (1 - (T/Tc)^2), clamped at 0 above Tc."""
    if t < 0.0:
        raise DomainError(f"temperature must be >= 0, got {t}")
    if t >= mat.t_c:
        return 0.0
    return mat.b_c0 * (1.0 - (t / mat.t_c) ** 2)


def effective_pair_density(t: float, b_rf_peak: float, mat: MaterialParams) -> float:
    """Pair fraction with quadratic RF pair-breaking suppression.

    Returns superfluid_fraction * max(0, 1 - (B/b_c(T))^2); 0 in the normal
    state (no error, since temperature sweeps cross the transition).
    """
    if b_rf_peak < 0.0:
        raise DomainError(f"b_rf_peak must be >= 0, got {b_rf_peak}")
    frac = superfluid_fraction(t, mat.t_c)
    if frac <= 0.0:
        return 0.0
    b_c = critical_field(t, mat)
    return frac * max(0.0, 1.0 - (b_rf_peak / b_c) ** 2)


def normal_surface_impedance(f: float, mat: MaterialParams, k: PhysicalConstants = CONSTANTS):
    """Normal-metal skin-effect impedance (1+i) sqrt(w mu0 / 2 sigma_n)."""
    if f <= 0.0:
        raise DomainError(f"frequency must be > 0, got {f}")
    r = math.sqrt(2.0 * math.pi * f * k.mu0 / (2.0 * mat.sigma_n))
    return r, r


def impedance_from_fraction(x_s: float, f: float, mat: MaterialParams,
                            k: PhysicalConstants = CONSTANTS) -> tuple[float, float]:
    """Two-fluid surface impedance (R_s, X_s) for a given pair fraction.

    Superconducting branch: sigma = sigma_n (1 - x_s) - i / (w mu0 lam_eff^2)
    with lam_eff = lambda0/sqrt(x_s); Z_s = sqrt(i w mu0 / sigma), R_s
    floored by r_res.  The branch crosses over continuously to the normal
    skin-effect form as x_s -> 0 (no r_res floor there).
    """
    if f <= 0.0:
        raise DomainError(f"frequency must be > 0, got {f}")
    omega_mu = 2.0 * math.pi * f * k.mu0
    if x_s <= 0.0:
        return normal_surface_impedance(f, mat, k)
    lam_eff = mat.lambda0 / math.sqrt(x_s)
    sigma = mat.sigma_n * (1.0 - x_s) - 1j / (omega_mu * lam_eff**2)
    z = cmath.sqrt(1j * omega_mu / sigma)
    return z.real + mat.r_res, z.imag


def surface_impedance(
    t: float,
    f: float,
    b_rf_peak: float,
    mat: MaterialParams,
    k: PhysicalConstants = CONSTANTS,
) -> tuple[float, float]:
    """Two-fluid surface impedance (R_s, X_s) at one operating point."""
    return impedance_from_fraction(effective_pair_density(t, b_rf_peak, mat), f, mat, k)


def effective_lambda(x_s: float, f: float, mat: MaterialParams,
                     k: PhysicalConstants = CONSTANTS) -> float:
    """Reactance-defined penetration depth X_s / (w mu0) for pair fraction x_s.

    Equals lambda0/sqrt(x_s) deep in the superconducting state and crosses
    over continuously to half the normal skin depth at x_s = 0, so the
    kinetic-inductance frequency model stays defined through the transition.
    """
    omega_mu = 2.0 * math.pi * f * k.mu0
    _, x_react = impedance_from_fraction(x_s, f, mat, k)
    return x_react / omega_mu


def state_at(t: float, f: float, b_rf_peak: float, mat: MaterialParams,
             k: PhysicalConstants = CONSTANTS) -> SuperconductorState:
    """Assemble the full SuperconductorState at (T, f, B_rf)."""
    x_s = effective_pair_density(t, b_rf_peak, mat)
    r_s, x_react = surface_impedance(t, f, b_rf_peak, mat, k)
    omega_mu = 2.0 * math.pi * f * k.mu0
    return SuperconductorState(
        temperature=t,
        pair_fraction=x_s,
        lam=x_react / omega_mu,
        surface_resistance=r_s,
        surface_reactance=x_react,
        is_superconducting=x_s > 0.0,
    )


def kinetic_inductance(lambda_eff: float, budget: InductanceBudget,
                       lambda_ref: float) -> float:
    """Kinetic inductance scaled linearly from the calibration anchor."""
    if lambda_eff <= 0.0 or lambda_ref <= 0.0:
        raise DomainError("penetration depths must be > 0")
    return budget.l_kin * (lambda_eff / lambda_ref)


def resonant_frequency_lumped(budget: InductanceBudget) -> float:
    """Quarter-wave LC estimate f = 1 / (2 pi sqrt((L_g + L_k) C))."""
    l_total = budget.l_geom + budget.l_kin
    if l_total <= 0.0 or budget.c_eff <= 0.0:
        raise DomainError("need positive total inductance and capacitance")
    return 1.0 / (2.0 * math.pi * math.sqrt(l_total * budget.c_eff))
