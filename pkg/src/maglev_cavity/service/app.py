"""FastAPI service wrapping the simulation and analysis chain.

The service owns the expensive state: solved modes and calibrations are
cached per config hash, so a long-running instance serves sweeps, fits and
inversions without re-solving.  The CLI is a thin client of these endpoints
(in-process by default, remote with --server).

Domain/config errors map to 422, numerical failures to 500, both with a
machine-parsable body {"kind": ..., "error": ...}.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import csvio
from ..calibration import SystemCalibration, build_calibration, with_params
from ..config import RunConfig, config_hash, parse_config
from ..errors import ConfigError, DomainError, NumericalError
from ..experiment import run_protocol, transition_temperature
from ..geometry import MaterialParams, validate_geometry
from ..mode_solver import (
    GridSpec,
    analytic_coax_estimate,
    electric_energy_fraction,
    evanescent_beta,
    geometry_factor,
    peak_b_per_sqrt_joule,
    solve_bare_mode,
)
from ..perturbation import invert_height, shift_map, sphere_polarizabilities
from ..resonance import fit_resonance, synth_s21, resonance_from_losses
from .schemas import (
    CalibrateRequest,
    CalibrateResponse,
    FilePayload,
    FitRequest,
    FitResponse,
    InvertHeightRequest,
    InvertHeightResponse,
    ModeSolveRequest,
    ModeSolveResponse,
    ShiftMapRequest,
    ShiftMapResponse,
    SweepRequest,
    SweepResponse,
    TransitionRequest,
    TransitionResponse,
)

app = FastAPI(title="maglev-cavity", version="0.1.0")
app.state.calibrations = {}


@app.exception_handler(ConfigError)
@app.exception_handler(DomainError)
async def _config_error(request: Request, exc: Exception):
    return JSONResponse(status_code=422, content={"kind": "config", "error": str(exc)})


@app.exception_handler(NumericalError)
async def _numerical_error(request: Request, exc: Exception):
    return JSONResponse(status_code=500, content={"kind": "numerical", "error": str(exc)})


@app.get("/health")
def health():
    return {"status": "ok"}


def _calibration_for(req_config: str, calibration_ini: str = "",
                     curve_csv: str = "") -> tuple[SystemCalibration, RunConfig]:
    cfg = parse_config(req_config)
    if calibration_ini and curve_csv:
        return csvio.read_calibration(calibration_ini, curve_csv), cfg
    sha = config_hash(cfg)
    cached = app.state.calibrations.get(sha)
    if cached is None:
        raise ConfigError("run cmd_calibrate first (no calibration for this config)")
    return cached, cfg


@app.post("/mode/solve", response_model=ModeSolveResponse)
def mode_solve(req: ModeSolveRequest):
    cfg = parse_config(req.config_text)
    system = validate_geometry(cfg.cavity, cfg.magnet)
    grid = GridSpec.for_geometry(system.geometry, cfg.solver.dr, cfg.solver.dz)
    mode = solve_bare_mode(system.geometry, grid)
    files = []
    if req.dump_fields:
        files.append(FilePayload(name="mode_fields.csv",
                                 content=csvio.field_map_csv(mode, cfg)))
    return ModeSolveResponse(
        f0_hz=mode.f0,
        f_next_hz=mode.f_next,
        analytic_estimate_hz=analytic_coax_estimate(system.geometry),
        geometry_factor_ohm=geometry_factor(mode),
        b_norm_t_per_sqrt_j=peak_b_per_sqrt_joule(mode),
        electric_fraction=electric_energy_fraction(mode),
        eigen_residual=mode.eigen_residual,
        evanescent_beta_per_m=evanescent_beta(mode.f0, system.geometry),
        files=files,
    )


@app.post("/shift-map", response_model=ShiftMapResponse)
def shift_map_endpoint(req: ShiftMapRequest):
    cfg = parse_config(req.config_text)
    system = validate_geometry(cfg.cavity, cfg.magnet)
    grid = GridSpec.for_geometry(system.geometry, cfg.solver.dr, cfg.solver.dz)
    mode = solve_bare_mode(system.geometry, grid)
    pol = sphere_polarizabilities(system.magnet.radius)
    smap = shift_map(mode, system.geometry, system.magnet.radius, pol,
                     z_max=cfg.map_opts.z_max, spacing=cfg.map_opts.spacing,
                     average=cfg.solver.perturbation_average)
    contact = np.argmin(np.abs(smap.z_coords - system.magnet.radius))
    row = smap.delta_f[:, contact]
    feas = np.isfinite(row)
    argmax_x = float(smap.x_coords[feas][np.argmax(np.abs(row[feas]))])
    return ShiftMapResponse(
        f0_ref_hz=smap.f0_ref,
        n_feasible=int(np.isfinite(smap.delta_f).sum()),
        argmax_contact_x_m=argmax_x,
        files=[FilePayload(name="shift_map.csv", content=csvio.shift_map_csv(smap, cfg))],
    )


@app.post("/calibrate", response_model=CalibrateResponse)
def calibrate(req: CalibrateRequest):
    cfg = parse_config(req.config_text)
    calib, smap, mode = build_calibration(cfg)
    t_low = None
    if req.grid_search:
        calib, t_low = _grid_search(calib)
    app.state.calibrations[calib.config_sha] = calib
    files = [
        FilePayload(name="calibration.ini", content=csvio.calibration_ini(calib, cfg)),
        FilePayload(name="levitation_curve.csv", content=csvio.curve_csv(calib, cfg)),
        FilePayload(name="shift_map.csv", content=csvio.shift_map_csv(smap, cfg)),
    ]
    return CalibrateResponse(
        config_sha=calib.config_sha,
        f0_ref_hz=calib.f0_ref,
        geometry_factor_ohm=calib.geometry_factor,
        b_norm_t_per_sqrt_j=calib.b_norm,
        r_th=calib.thermal.r_th,
        b_c0=calib.material.b_c0,
        transition_lowpower_k=t_low,
        files=files,
    )


def _grid_search(calib: SystemCalibration) -> tuple[SystemCalibration, float]:
    """Confirm/nudge (r_th, b_c0) against the qualitative sweep targets.

    Targets: transition(-15 dBm) near 800 mK, transition(5 dBm) at least
    30 mK lower, and the 785 mK ramp collapsing between -5 and 0 dBm.
    Scans a small neighborhood of the configured values and keeps the best.
    """
    from ..experiment import power_ramp_protocol

    def objective(c: SystemCalibration) -> float:
        t15 = transition_temperature(-15.0, c)
        t5 = transition_temperature(5.0, c)
        rec = run_protocol(power_ramp_protocol(0.785, -15.0, 5.0, 1.0), c)
        quench_p = next((r.p_in_dbm for r in rec if r.state != "SC"), None)
        score = -abs(t15 - 0.80) * 10.0
        score += min(0.0, ((t15 - t5) - 0.030) * 100.0)
        if quench_p is None:
            score -= 10.0
        else:
            score -= abs(quench_p + 2.5) * 0.05
        return score

    best = calib
    best_score = objective(calib)
    for fr in (0.9, 1.0, 1.1):
        for fb in (0.9, 1.0, 1.1):
            if fr == 1.0 and fb == 1.0:
                continue
            mat = MaterialParams(
                t_c=calib.material.t_c, lambda0=calib.material.lambda0,
                sigma_n=calib.material.sigma_n, b_c0=calib.material.b_c0 * fb,
                r_res=calib.material.r_res)
            cand = with_params(calib, material=mat, r_th=calib.thermal.r_th * fr)
            score = objective(cand)
            if score > best_score:
                best, best_score = cand, score
    return best, transition_temperature(-15.0, best)


@app.post("/sweep", response_model=SweepResponse)
def sweep(req: SweepRequest):
    calib, cfg = _calibration_for(req.config_text, req.calibration_ini, req.curve_csv)
    if not cfg.protocol.setpoints:
        raise ConfigError("protocol.setpoints is empty")
    records = run_protocol(cfg.protocol, calib)
    files = [FilePayload(name=f"sweep_{cfg.protocol.kind}.csv",
                         content=csvio.sweep_csv(records, cfg))]
    if req.emit_traces:
        for i, rec in enumerate(records):
            res = resonance_from_losses(rec.f0, rec.q_int, calib.q_ext)
            span = 8.0 * rec.f0 / rec.q_loaded
            freqs = np.linspace(rec.f0 - span / 2, rec.f0 + span / 2, 801)
            trace = synth_s21(res, freqs, noise_sigma=cfg.noise.sigma,
                              seed=cfg.noise.seed + i, power_dbm=rec.p_in_dbm,
                              temperature_k=rec.t_eff, timestamp_s=rec.time)
            files.append(FilePayload(name=f"trace_{i:04d}.csv",
                                     content=csvio.trace_csv(trace, cfg)))
    return SweepResponse(files=files)


@app.post("/fit", response_model=FitResponse)
def fit(req: FitRequest):
    cfg = parse_config(req.config_text)
    if not req.traces:
        raise ConfigError("no traces supplied")
    reports = []
    for payload in req.traces:
        trace = csvio.read_trace_csv(payload.content)
        reports.append((payload.name, fit_resonance(
            trace, magnitude_only=req.magnitude_only, background=req.background)))
    return FitResponse(
        report_csv=csvio.fit_report_csv(reports, cfg),
        converged_all=all(r.converged for _, r in reports),
    )


@app.post("/invert-height", response_model=InvertHeightResponse)
def invert(req: InvertHeightRequest):
    calib, _ = _calibration_for(req.config_text, req.calibration_ini, req.curve_csv)
    from ..calibration import roi_curve
    zs, dfs = roi_curve(calib)
    z = invert_height(req.f_meas_hz, zs, dfs, calib.f0_ref)
    return InvertHeightResponse(z_m=z, delta_f_hz=req.f_meas_hz - calib.f0_ref,
                                f0_ref_hz=calib.f0_ref)


@app.post("/transition", response_model=TransitionResponse)
def transition(req: TransitionRequest):
    calib, _ = _calibration_for(req.config_text, req.calibration_ini, req.curve_csv)
    if not math.isfinite(req.p_dbm):
        raise ConfigError("p_dbm must be finite")
    return TransitionResponse(t_transition_k=transition_temperature(req.p_dbm, calib))
