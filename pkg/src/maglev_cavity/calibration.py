"""System calibration: the solved mode reduced to the numbers sweeps need.

A calibration bundles the bare-mode summary (frequency, geometry factor,
peak field per stored joule), the lumped inductance budget anchored at the
zero-temperature penetration depth, the magnet levitation curve from the
shift map, and the thermal/coupling parameters.  It is what cmd_sweep,
cmd_invert_height and the service endpoints consume; cmd_calibrate builds
and persists it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .config import MapOptions, RunConfig, ThermalParams, config_hash
from .constants import CONSTANTS
from .errors import ConfigError, DomainError
from .geometry import CavityGeometry, MagnetSpec, MaterialParams, validate_geometry
from .mode_solver import (
    GridSpec,
    ModeField,
    analytic_coax_estimate,
    geometry_factor,
    peak_b_per_sqrt_joule,
    solve_bare_mode,
)
from .perturbation import RegionOfInterest, ShiftMap, shift_map, sphere_polarizabilities
from .superconductor import InductanceBudget


@dataclass(frozen=True)
class SystemCalibration:
    geometry: CavityGeometry
    magnet: MagnetSpec
    material: MaterialParams
    q_ext: float
    thermal: ThermalParams
    f0_ref: float             # bare-cavity mode frequency [Hz]
    geometry_factor: float    # [ohm]
    b_norm: float             # peak B per sqrt(stored joule) [T/sqrt(J)]
    budget: InductanceBudget
    lambda_ref: float         # anchor penetration depth (lambda0) [m]
    curve_z: np.ndarray       # x = 0 levitation curve, center heights [m]
    curve_df: np.ndarray      # frequency shift along the curve [Hz]
    roi: RegionOfInterest
    config_sha: str

    def magnet_shift(self, z: float) -> float:
        """Frequency shift for the magnet at center height z on the axis."""
        if len(self.curve_z) == 0:
            return 0.0
        return float(np.interp(z, self.curve_z, self.curve_df))


def lumped_budget(f0_ref: float, g: CavityGeometry, kinetic_fraction: float) -> InductanceBudget:
    """Split the LC budget so the lumped model reproduces the solver f0.

    c_eff uses the stub end-capacitance scale; only the L*C product and the
    kinetic fraction are observable, so the split is a convention.
    """
    c_eff = CONSTANTS.eps0 * math.pi * g.stub_radius**2 / (g.outer_height - g.stub_height)
    l_total = 1.0 / ((2.0 * math.pi * f0_ref) ** 2 * c_eff)
    return InductanceBudget(l_geom=(1.0 - kinetic_fraction) * l_total,
                            l_kin=kinetic_fraction * l_total, c_eff=c_eff)


def build_calibration(cfg: RunConfig) -> tuple[SystemCalibration, ShiftMap, ModeField]:
    """Solve the bare mode, map the magnet shift, assemble the calibration."""
    system = validate_geometry(cfg.cavity, cfg.magnet)
    grid = GridSpec.for_geometry(system.geometry, cfg.solver.dr, cfg.solver.dz)
    mode = solve_bare_mode(system.geometry, grid)
    sanity = analytic_coax_estimate(system.geometry)
    if not 0.2 * sanity < mode.f0 < 2.0 * sanity:
        raise ConfigError(
            f"solved mode {mode.f0:.3e} Hz implausible against estimate {sanity:.3e} Hz")

    pol = sphere_polarizabilities(system.magnet.radius)
    smap = shift_map(mode, system.geometry, system.magnet.radius, pol,
                     z_max=cfg.map_opts.z_max, spacing=cfg.map_opts.spacing,
                     average=cfg.solver.perturbation_average)

    col = smap.delta_f[0, :]
    keep = np.isfinite(col)
    if keep.sum() < 2:
        raise ConfigError("shift map has no feasible axis column")
    calib = SystemCalibration(
        geometry=system.geometry,
        magnet=system.magnet,
        material=cfg.material,
        q_ext=cfg.q_ext,
        thermal=cfg.thermal,
        f0_ref=mode.f0,
        geometry_factor=geometry_factor(mode),
        b_norm=peak_b_per_sqrt_joule(mode),
        budget=lumped_budget(mode.f0, system.geometry, cfg.kinetic_fraction),
        lambda_ref=cfg.material.lambda0,
        curve_z=smap.z_coords[keep],
        curve_df=col[keep],
        roi=RegionOfInterest(x_range=cfg.map_opts.roi_x, z_range=cfg.map_opts.roi_z),
        config_sha=config_hash(cfg),
    )
    return calib, smap, mode


def with_params(
    calib: SystemCalibration,
    material: MaterialParams | None = None,
    q_ext: float | None = None,
    r_th: float | None = None,
    kinetic_fraction: float | None = None,
    thermal: ThermalParams | None = None,
) -> SystemCalibration:
    """Calibration with substituted material/coupling/thermal knobs.

    The mode summary depends only on geometry, so calibration search loops
    reuse the solved mode and swap the cheap parameters.
    """
    mat = calib.material if material is None else material
    th = calib.thermal if thermal is None else thermal
    if r_th is not None:
        th = replace(th, r_th=r_th)
    budget = calib.budget
    if kinetic_fraction is not None:
        budget = lumped_budget(calib.f0_ref, calib.geometry, kinetic_fraction)
    return replace(calib, material=mat, thermal=th, budget=budget,
                   q_ext=calib.q_ext if q_ext is None else q_ext,
                   lambda_ref=mat.lambda0)


def roi_curve(calib: SystemCalibration) -> tuple[np.ndarray, np.ndarray]:
    """Levitation curve restricted to the region of interest."""
    z0, z1 = calib.roi.z_range
    keep = (calib.curve_z >= z0 - 1e-15) & (calib.curve_z <= z1 + 1e-15)
    if keep.sum() < 2:
        raise DomainError("region of interest leaves fewer than 2 curve points")
    return calib.curve_z[keep], calib.curve_df[keep]
