"""Stateful replay of the cryogenic measurement protocols.

Each protocol setpoint is one dwell: the wall temperature relaxes toward
bath + r_th * dissipated power in fixed substeps (the driven observables are
re-evaluated every substep since heating shifts them), then the quench/flux
bookkeeping runs on the peak field seen during the dwell, and the final
observable state becomes the record.  Bistable fixed points are recorded
with the collapsed normal-branch observables and flagged.

Trapped flux accumulates on quench events and on dwells whose peak field
exceeds the pinning threshold; it only resets with a warm reset, which is
what produces the Q hysteresis of the up/down power ramps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from .calibration import SystemCalibration
from .config import ProtocolSpec
from .constants import dbm_to_watts
from .errors import BistableOperatingPoint, ConfigError, DomainError, NumericalError
from .geometry import MaterialParams
from .resonance import (
    ObservablePoint,
    collapsed_observable,
    coupling_x,
    dissipated_fraction,
    observable_state,
)
from .superconductor import critical_field


@dataclass(frozen=True)
class CryostatState:
    t_bath: float          # [K]
    t_eff: float           # cavity wall temperature [K]
    r_th: float            # thermal resistance to bath [K/W]
    trapped_flux_r: float  # accumulated residual surface resistance [ohm]
    quenched: bool
    time: float            # [s]

    def __post_init__(self):
        if self.t_eff < self.t_bath - 1e-12:
            raise DomainError("t_eff below bath temperature")
        if self.trapped_flux_r < 0.0:
            raise DomainError("trapped_flux_r must be >= 0")


@dataclass(frozen=True)
class SweepRecord:
    time: float
    t_bath: float
    t_eff: float
    p_in_dbm: float
    f0: float
    q_loaded: float
    q_int: float
    state: str             # SC | Normal | Bistable
    trapped_flux_r: float
    b_rf_peak: float
    pair_fraction: float


def warm_reset(thermal, state: CryostatState | None = None) -> CryostatState:
    """Cool-down reset: trapped flux cleared, temperatures at fridge base."""
    return CryostatState(t_bath=thermal.base_t, t_eff=thermal.base_t,
                         r_th=thermal.r_th, trapped_flux_r=0.0,
                         quenched=False, time=0.0)


def thermal_step(s: CryostatState, p_in_w: float, q_loaded: float, q_ext: float,
                 dt: float, tau_th: float) -> CryostatState:
    """Exponential relaxation of t_eff toward bath + r_th * dissipated power."""
    if dt <= 0.0:
        raise DomainError("dt must be > 0")
    p_diss = p_in_w * dissipated_fraction(coupling_x(q_loaded, q_ext))
    target = s.t_bath + s.r_th * p_diss
    t_eff = target + (s.t_eff - target) * math.exp(-dt / tau_th)
    return replace(s, t_eff=max(t_eff, s.t_bath), time=s.time + dt)


def quench_update(s: CryostatState, b_rf_peak: float, mat: MaterialParams,
                  eta_trap: float, flux_pin_threshold: float,
                  collapsed: bool = False) -> tuple[CryostatState, bool]:
    """Quench detection, trapped-flux accumulation, and recovery clearing.

    Returns the new state and whether a fresh quench event fired this dwell.
    """
    b_c = critical_field(s.t_eff, mat) if s.t_eff < mat.t_c else 0.0
    should = s.t_eff >= mat.t_c or b_rf_peak >= b_c or collapsed
    event = should and not s.quenched
    if should:
        quenched = True
    elif s.quenched and s.t_eff < mat.t_c and b_rf_peak < b_c:
        quenched = False
    else:
        quenched = s.quenched
    flux = s.trapped_flux_r
    if event or b_rf_peak > flux_pin_threshold:
        flux += eta_trap * b_rf_peak**2
    return replace(s, quenched=quenched, trapped_flux_r=flux), event


def _observe(s: CryostatState, p_dbm: float, magnet_z: float,
             calib: SystemCalibration) -> tuple[ObservablePoint, bool]:
    """Observable at the current wall temperature; True if bistable-collapsed."""
    if s.quenched:
        return collapsed_observable(s.t_eff, p_dbm, magnet_z, calib,
                                    extra_r_s=s.trapped_flux_r), False
    try:
        return observable_state(s.t_eff, p_dbm, magnet_z, calib,
                                extra_r_s=s.trapped_flux_r), False
    except BistableOperatingPoint:
        return collapsed_observable(s.t_eff, p_dbm, magnet_z, calib,
                                    extra_r_s=s.trapped_flux_r), True


def run_dwell(s: CryostatState, t_bath: float, p_dbm: float, dwell: float,
              magnet_z: float, calib: SystemCalibration) -> tuple[CryostatState, SweepRecord]:
    """One setpoint: relax, update quench bookkeeping, record."""
    th = calib.thermal
    s = replace(s, t_bath=t_bath, t_eff=max(s.t_eff, t_bath))
    p_w = dbm_to_watts(p_dbm)
    dt = dwell / th.substeps
    b_max = 0.0
    bistable_seen = False
    collapse_seen = False
    for _ in range(th.substeps):
        obs, bistable = _observe(s, p_dbm, magnet_z, calib)
        bistable_seen = bistable_seen or bistable
        # a fresh collapse of the driven branch counts as a quench trigger;
        # an already-quenched state reporting collapsed is just normal
        collapse_seen = collapse_seen or bistable or (not s.quenched and obs.collapsed)
        b_max = max(b_max, obs.b_rf_peak)
        s = thermal_step(s, p_w, obs.resonance.q_loaded, calib.q_ext, dt, th.tau_th)
    was_quenched = s.quenched
    s, _event = quench_update(s, b_max, calib.material, th.eta_trap,
                              th.flux_pin_threshold, collapsed=collapse_seen)
    obs, bistable = _observe(s, p_dbm, magnet_z, calib)
    bistable_seen = bistable_seen or bistable
    if was_quenched and not s.quenched and (bistable or obs.collapsed):
        # recovery only sticks if the superconducting branch is sustainable;
        # re-collapse within the same dwell is the same quench episode, so
        # no fresh flux increment
        s = replace(s, quenched=True)
        obs, _ = _observe(s, p_dbm, magnet_z, calib)
    if bistable_seen:
        state = "Bistable"
    elif obs.superconducting:
        state = "SC"
    else:
        state = "Normal"
    record = SweepRecord(
        time=s.time, t_bath=s.t_bath, t_eff=s.t_eff, p_in_dbm=p_dbm,
        f0=obs.resonance.f0, q_loaded=obs.resonance.q_loaded,
        q_int=obs.resonance.q_int, state=state, trapped_flux_r=s.trapped_flux_r,
        b_rf_peak=obs.b_rf_peak, pair_fraction=obs.pair_fraction,
    )
    return s, record


def run_protocol(protocol: ProtocolSpec, calib: SystemCalibration,
                 start: CryostatState | None = None) -> list[SweepRecord]:
    """Iterate the setpoints in order from a warm reset (or given state)."""
    if calib is None:
        raise ConfigError("run cmd_calibrate first")
    if not protocol.setpoints:
        raise ConfigError("protocol has no setpoints")
    s = warm_reset(calib.thermal) if start is None else start
    records = []
    for t_bath, p_dbm in protocol.setpoints:
        s, rec = run_dwell(s, t_bath, p_dbm, protocol.dwell, protocol.magnet_z, calib)
        records.append(rec)
    return records


def dwell_converged_state(t_bath: float, p_dbm: float, calib: SystemCalibration,
                          dwell: float = 60.0, magnet_z: float = 0.5e-3) -> str:
    """State after a single cold-start dwell at (t_bath, p)."""
    th = calib.thermal
    s = CryostatState(t_bath=t_bath, t_eff=t_bath, r_th=th.r_th,
                      trapped_flux_r=0.0, quenched=False, time=0.0)
    _, rec = run_dwell(s, t_bath, p_dbm, dwell, magnet_z, calib)
    return rec.state


def transition_temperature(p_dbm: float, calib: SystemCalibration,
                           resolution: float = 1e-3, dwell: float = 60.0,
                           magnet_z: float = 0.5e-3) -> float:
    """Lowest bath temperature whose dwell-converged state is not SC.

    Coarse upward scan to bracket the boundary, then bisection to the
    requested resolution (default 1 mK).
    """
    t_c = calib.material.t_c
    t_lo = calib.thermal.base_t
    if dwell_converged_state(t_lo, p_dbm, calib, dwell, magnet_z) != "SC":
        return t_lo
    t_hi = None
    steps = 60
    for i in range(1, steps + 1):
        t = t_lo + (1.2 * t_c - t_lo) * i / steps
        if dwell_converged_state(t, p_dbm, calib, dwell, magnet_z) != "SC":
            t_hi = t
            break
        t_lo = t
    if t_hi is None:
        raise NumericalError("no transition found below 1.2 t_c")
    while t_hi - t_lo > resolution:
        mid = 0.5 * (t_lo + t_hi)
        if dwell_converged_state(mid, p_dbm, calib, dwell, magnet_z) != "SC":
            t_hi = mid
        else:
            t_lo = mid
    return t_hi


def temperature_sweep_protocol(t_start: float, t_stop: float, t_step: float,
                               p_dbm: float, dwell: float = 60.0,
                               magnet_z: float = 0.5e-3) -> ProtocolSpec:
    n = int(round((t_stop - t_start) / t_step))
    pts = tuple((t_start + i * t_step, p_dbm) for i in range(n + 1))
    return ProtocolSpec(kind="temperature", setpoints=pts, dwell=dwell, magnet_z=magnet_z)


def power_ramp_protocol(t_bath: float, p_start: float, p_stop: float,
                        p_step: float = 1.0, up_down: bool = False,
                        dwell: float = 60.0, magnet_z: float = 0.5e-3) -> ProtocolSpec:
    n = int(round((p_stop - p_start) / p_step))
    ups = [p_start + i * p_step for i in range(n + 1)]
    powers = ups + ups[-2::-1] if up_down else ups
    pts = tuple((t_bath, p) for p in powers)
    return ProtocolSpec(kind="power", setpoints=pts, dwell=dwell, magnet_z=magnet_z)


def power_switch_protocol(high: float, lows: list[float], t_bath: float,
                          dwell: float = 300.0, magnet_z: float = 0.5e-3) -> ProtocolSpec:
    pts = []
    for low in lows:
        pts.append((t_bath, high))
        pts.append((t_bath, low))
    return ProtocolSpec(kind="switch", setpoints=tuple(pts), dwell=dwell, magnet_z=magnet_z)


def power_switch_series(high: float, lows: list[float], t_bath: float,
                        calib: SystemCalibration, dwell: float = 300.0,
                        magnet_z: float = 0.5e-3) -> list[SweepRecord]:
    """Alternate high/low dwells at fixed bath temperature."""
    return run_protocol(power_switch_protocol(high, lows, t_bath, dwell, magnet_z), calib)
