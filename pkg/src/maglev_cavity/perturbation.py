"""Magnet-induced frequency shift via small-sphere cavity perturbation.

A perfectly conducting sphere at position (x, z) shifts the mode by

    df = f0 * (alpha_m |H|^2 - alpha_e |E|^2) / (4 U)

with the standard conducting-sphere polarizabilities.  Electric energy
density dominates near the stub top, so resting positions shift the mode
down; lifting the magnet reduces |E| at its position and the shift relaxes
toward zero, which is what makes frequency a height probe.

Coordinates: x is the radial offset of the sphere center, z the height of
the sphere center above the stub top plane; contact with the stub top means
z = magnet radius.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .constants import CONSTANTS, PhysicalConstants
from .errors import DomainError
from .geometry import CavityGeometry
from .mode_solver import ModeField, sample_fields, sample_masks

EvalMode = Literal["center", "volume"]

# fixed sphere-volume quadrature lattice (13^3 box, keep radius <= 1)
_LAT = np.linspace(-1.0, 1.0, 13)
_U, _V, _W = np.meshgrid(_LAT, _LAT, _LAT, indexing="ij")
_INSIDE = _U**2 + _V**2 + _W**2 <= 1.0
_OFFSETS = np.stack([_U[_INSIDE], _V[_INSIDE], _W[_INSIDE]], axis=1)


@dataclass(frozen=True)
class SpherePolarizability:
    alpha_e: float  # electric, 4 pi eps0 a^3 [F m^2]
    alpha_m: float  # magnetic magnitude, 2 pi mu0 a^3 [H m^2], diamagnetic sign

    def __post_init__(self):
        if self.alpha_e <= 0.0 or self.alpha_m <= 0.0:
            raise DomainError("polarizabilities must be > 0")


@dataclass(frozen=True)
class RegionOfInterest:
    """Expected levitation window on the map (sphere-center coordinates)."""

    x_range: tuple[float, float] = (0.0, 0.5e-3)
    z_range: tuple[float, float] = (0.1e-3, 1.5e-3)

    def __post_init__(self):
        if self.x_range[0] >= self.x_range[1] or self.z_range[0] >= self.z_range[1]:
            raise DomainError("region of interest ranges must be non-empty")


@dataclass(frozen=True)
class ShiftMap:
    x_coords: np.ndarray   # radial offsets [m]
    z_coords: np.ndarray   # center heights above stub top [m]
    delta_f: np.ndarray    # [Hz], NaN on infeasible (absent) cells
    f0_ref: float          # bare frequency the shifts are relative to [Hz]

    def __post_init__(self):
        if self.delta_f.shape != (len(self.x_coords), len(self.z_coords)):
            raise DomainError("delta_f shape does not match coordinates")
        feasible = self.delta_f[np.isfinite(self.delta_f)]
        if feasible.size and not np.all(np.isfinite(feasible)):
            raise DomainError("delta_f must be finite on feasible cells")


def sphere_polarizabilities(a: float, k: PhysicalConstants = CONSTANTS) -> SpherePolarizability:
    """Conducting-sphere dipole polarizabilities for radius a."""
    if a <= 0.0:
        raise DomainError(f"sphere radius must be > 0, got {a}")
    return SpherePolarizability(alpha_e=4.0 * math.pi * k.eps0 * a**3,
                                alpha_m=2.0 * math.pi * k.mu0 * a**3)


def sphere_clearance(g: CavityGeometry, a: float, x: float, z_above_stub: float) -> tuple[str, float]:
    """Most-violated clearance for a sphere centered at (x, stub_top + z).

    Returns (surface name, signed clearance); negative means overlap.
    """
    z_abs = g.stub_height + z_above_stub
    worst = ("outer wall", g.outer_radius - x - a)
    checks = [
        ("cavity bottom", z_abs - a if x > g.stub_radius else math.inf),
        ("cavity top", g.outer_height - z_abs - a),
    ]
    # distance to the stub block {r <= stub_radius, z <= stub_height}
    dx = max(0.0, x - g.stub_radius)
    dz = max(0.0, z_abs - g.stub_height)
    if dx == 0.0 and dz == 0.0:
        stub_clear = -min(g.stub_radius - x, g.stub_height - z_abs) - a
    else:
        stub_clear = math.hypot(dx, dz) - a
    checks.append(("stub", stub_clear))
    for name, clear in checks:
        if clear < worst[1]:
            worst = (name, clear)
    return worst


def slater_shift(
    mode: ModeField,
    pos: tuple[float, float],
    pol: SpherePolarizability,
    g: CavityGeometry,
    magnet_radius: float,
    average: EvalMode = "center",
    masks=None,
) -> float:
    """Frequency shift [Hz] for the sphere centered at pos = (x, z_above_stub).

    ``average="volume"`` replaces the center field values by averages of
    |E|^2 and |H|^2 over the sphere volume (fixed deterministic lattice),
    which is less biased where the field varies on the sphere scale.
    """
    x, z = pos
    if x < 0.0:
        raise DomainError("radial offset must be >= 0")
    name, clear = sphere_clearance(g, magnet_radius, x, z)
    if clear < -1e-12:
        raise DomainError(f"sphere intersects metal: {name} clearance {clear:.3e} m")
    if masks is None:
        masks = sample_masks(mode)
    z_abs = g.stub_height + z
    if average == "center":
        er, ez, h = sample_fields(mode, x, z_abs, masks)
        e2, h2 = er * er + ez * ez, h * h
    else:
        e2 = h2 = 0.0
        for u, v, w in _OFFSETS * magnet_radius:
            r = math.hypot(x + u, v)
            er, ez, h = sample_fields(mode, r, z_abs + w, masks)
            e2 += er * er + ez * ez
            h2 += h * h
        e2 /= len(_OFFSETS)
        h2 /= len(_OFFSETS)
    return mode.f0 * (pol.alpha_m * h2 - pol.alpha_e * e2) / (4.0 * mode.stored_energy)


def shift_map(
    mode: ModeField,
    g: CavityGeometry,
    magnet_radius: float,
    pol: SpherePolarizability | None = None,
    x_max: float | None = None,
    z_max: float = 2.0e-3,
    spacing: float = 1.0e-4,
    average: EvalMode = "center",
) -> ShiftMap:
    """Map df over magnet positions; infeasible cells are NaN (absent)."""
    if spacing <= 0.0 or spacing > 1.0e-4 + 1e-15:
        raise DomainError("map spacing must be positive and <= 0.1 mm")
    if pol is None:
        pol = sphere_polarizabilities(magnet_radius)
    if x_max is None:
        x_max = g.stub_radius
    xs = np.arange(0.0, x_max + spacing / 2, spacing)
    zs = np.arange(0.0, z_max + spacing / 2, spacing)
    masks = sample_masks(mode)
    df = np.full((len(xs), len(zs)), np.nan)
    for i, x in enumerate(xs):
        for j, z in enumerate(zs):
            _, clear = sphere_clearance(g, magnet_radius, float(x), float(z))
            if clear < -1e-12:
                continue
            df[i, j] = slater_shift(mode, (float(x), float(z)), pol, g,
                                    magnet_radius, average, masks)
    return ShiftMap(x_coords=xs, z_coords=zs, delta_f=df, f0_ref=mode.f0)


def validity_flags(m: ShiftMap, limit: float = 1e-2) -> np.ndarray:
    """True where the perturbation exceeds the small-shift validity bound."""
    with np.errstate(invalid="ignore"):
        return np.abs(m.delta_f) > limit * m.f0_ref


def levitation_curve(m: ShiftMap, roi: RegionOfInterest | None = None) -> tuple[np.ndarray, np.ndarray]:
    """(z, df) along x = 0, restricted to feasible cells inside the ROI."""
    if roi is None:
        roi = RegionOfInterest()
    col = m.delta_f[0, :]
    keep = np.isfinite(col) & (m.z_coords >= roi.z_range[0] - 1e-15) \
        & (m.z_coords <= roi.z_range[1] + 1e-15)
    zs, dfs = m.z_coords[keep], col[keep]
    if len(zs) < 2:
        raise DomainError("levitation curve has fewer than 2 feasible points")
    return zs, dfs


def invert_height(f_meas: float, curve_z: np.ndarray, curve_df: np.ndarray,
                  f0_ref: float, tol_hz: float = 1.0) -> float:
    """Recover the magnet height from a measured frequency by bisection.

    The curve must be strictly monotone; the target f_meas - f0_ref must lie
    inside its range.  Non-monotone curves raise with the candidate
    crossing intervals listed.
    """
    target = f_meas - f0_ref
    diffs = np.diff(curve_df)
    if not (np.all(diffs > 0.0) or np.all(diffs < 0.0)):
        crossing = [
            (float(curve_z[i]), float(curve_z[i + 1]))
            for i in range(len(curve_df) - 1)
            if min(curve_df[i], curve_df[i + 1]) <= target <= max(curve_df[i], curve_df[i + 1])
        ]
        raise DomainError(f"ambiguous inversion: non-monotone curve, candidate intervals {crossing}")
    lo, hi = float(np.min(curve_df)), float(np.max(curve_df))
    if not (lo <= target <= hi):
        raise DomainError(
            f"frequency outside calibrated band: offset {target:.3e} Hz not in [{lo:.3e}, {hi:.3e}]")

    def df_of(z: float) -> float:
        return float(np.interp(z, curve_z, curve_df))

    z_lo, z_hi = float(curve_z[0]), float(curve_z[-1])
    if curve_df[0] > curve_df[-1]:
        # make df_of increasing over [z_lo, z_hi] for the bisection bracket
        def df_of(z: float, _zs=curve_z, _ds=curve_df) -> float:  # noqa: F811
            return -float(np.interp(z, _zs, _ds))
        target = -target
    for _ in range(200):
        mid = 0.5 * (z_lo + z_hi)
        val = df_of(mid)
        if abs(val - target) < tol_hz or (z_hi - z_lo) < 1e-15:
            return mid
        if val < target:
            z_lo = mid
        else:
            z_hi = mid
    return 0.5 * (z_lo + z_hi)
