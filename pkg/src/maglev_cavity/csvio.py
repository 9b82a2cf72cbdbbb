"""Frozen CSV schemas and calibration persistence.

Every emitted file begins with comment lines carrying the tool name, the
config hash, and the full canonical config echo, so results are traceable
to exact settings.  Floats are written with repr (shortest round-trip), so
identical runs produce byte-identical files.
"""

from __future__ import annotations

import io
import math
from configparser import ConfigParser

import numpy as np

from .calibration import SystemCalibration
from .config import RunConfig, ThermalParams, emit_config, config_hash
from .errors import ConfigError, DomainError
from .geometry import CavityGeometry, MagnetSpec, MaterialParams
from .mode_solver import ModeField
from .perturbation import RegionOfInterest, ShiftMap
from .resonance import FitReport, S21Trace
from .superconductor import InductanceBudget
from .experiment import SweepRecord


def _fmt(v: float) -> str:
    return repr(float(v))


def header_lines(kind: str, cfg: RunConfig, extra: list[str] | None = None) -> str:
    out = [f"# maglev-cavity {kind}", f"# config_sha256: {config_hash(cfg)}"]
    for line in emit_config(cfg).splitlines():
        if line:
            out.append(f"# cfg {line}")
    for line in extra or []:
        out.append(f"# {line}")
    return "\n".join(out) + "\n"


def shift_map_csv(m: ShiftMap, cfg: RunConfig) -> str:
    """Columns x_mm, z_mm, delta_f_hz; infeasible cells omitted.

    z is the height of the sphere center above the stub top plane; contact
    with the stub top means z equals the magnet radius.
    """
    buf = io.StringIO()
    buf.write(header_lines("shift-map", cfg, [
        f"f0_ref_hz = {_fmt(m.f0_ref)}",
        "x = radial offset of sphere center [mm]",
        "z = sphere center height above stub top [mm]; contact at z = magnet radius",
        "infeasible positions (sphere overlapping metal) are omitted",
    ]))
    buf.write("x_mm,z_mm,delta_f_hz\n")
    for i, x in enumerate(m.x_coords):
        for j, z in enumerate(m.z_coords):
            df = m.delta_f[i, j]
            if math.isfinite(df):
                buf.write(f"{_fmt(x * 1e3)},{_fmt(z * 1e3)},{_fmt(df)}\n")
    return buf.getvalue()


def field_map_csv(mode: ModeField, cfg: RunConfig) -> str:
    """Cell-center field samples: r_m, z_m, e_r, e_z, h_phi."""
    grid = mode.grid
    buf = io.StringIO()
    buf.write(header_lines("mode-fields", cfg, [
        f"f0_hz = {_fmt(mode.f0)}",
        "E components are averaged to cell centers from the staggered maps",
        "fields normalized to 1 J stored energy",
    ]))
    buf.write("r_m,z_m,e_r,e_z,h_phi\n")
    e_r_c = 0.5 * (mode.e_r[:, :-1] + mode.e_r[:, 1:])
    e_z_c = 0.5 * (mode.e_z[:-1, :] + mode.e_z[1:, :])
    for i, r in enumerate(grid.r_centers):
        for j, z in enumerate(grid.z_centers):
            buf.write(f"{_fmt(r)},{_fmt(z)},{_fmt(e_r_c[i, j])},"
                      f"{_fmt(e_z_c[i, j])},{_fmt(mode.h_phi[i, j])}\n")
    return buf.getvalue()


SWEEP_COLUMNS = "time_s,t_bath_k,t_eff_k,p_in_dbm,f0_hz,q_loaded,q_int,state,trapped_flux_r_ohm"


def sweep_csv(records: list[SweepRecord], cfg: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(header_lines("sweep", cfg))
    buf.write(SWEEP_COLUMNS + "\n")
    for r in records:
        buf.write(f"{_fmt(r.time)},{_fmt(r.t_bath)},{_fmt(r.t_eff)},{_fmt(r.p_in_dbm)},"
                  f"{_fmt(r.f0)},{_fmt(r.q_loaded)},{_fmt(r.q_int)},{r.state},"
                  f"{_fmt(r.trapped_flux_r)}\n")
    return buf.getvalue()


def trace_csv(trace: S21Trace, cfg: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(header_lines("s21-trace", cfg, [
        f"power_dbm = {_fmt(trace.power_dbm)}",
        f"temperature_k = {_fmt(trace.temperature_k)}",
        f"timestamp_s = {_fmt(trace.timestamp_s)}",
    ]))
    buf.write("freq_hz,re_s21,im_s21\n")
    for f, s in zip(trace.freqs, trace.s21):
        buf.write(f"{_fmt(f)},{_fmt(s.real)},{_fmt(s.imag)}\n")
    return buf.getvalue()


def read_trace_csv(text: str) -> S21Trace:
    """Accepts freq_hz,re_s21,im_s21 or freq_hz,mag_db,phase_rad (by header)."""
    power = temperature = timestamp = 0.0
    rows: list[tuple[float, float, float]] = []
    columns = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("# ").replace(" ", "")
            for key, setter in (("power_dbm=", "p"), ("temperature_k=", "t"),
                                ("timestamp_s=", "s")):
                if body.startswith(key):
                    val = float(body[len(key):])
                    if setter == "p":
                        power = val
                    elif setter == "t":
                        temperature = val
                    else:
                        timestamp = val
            continue
        if columns is None:
            columns = [c.strip().lower() for c in line.split(",")]
            if columns not in (["freq_hz", "re_s21", "im_s21"],
                               ["freq_hz", "mag_db", "phase_rad"]):
                raise ConfigError(f"unrecognized trace header {columns}")
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ConfigError(f"bad trace row: {line!r}")
        rows.append((float(parts[0]), float(parts[1]), float(parts[2])))
    if columns is None or not rows:
        raise ConfigError("empty trace file")
    freqs = np.array([r[0] for r in rows])
    if columns[1] == "re_s21":
        s21 = np.array([complex(r[1], r[2]) for r in rows])
    else:
        mag = 10.0 ** (np.array([r[1] for r in rows]) / 20.0)
        ph = np.array([r[2] for r in rows])
        s21 = mag * np.exp(1j * ph)
    return S21Trace(freqs=freqs, s21=s21, power_dbm=power,
                    temperature_k=temperature, timestamp_s=timestamp)


FIT_COLUMNS = ("trace,f0_hat_hz,q_loaded_hat,q_ext_hat,x_hat,residual_rms,"
               "cov_f0,cov_q_loaded,cov_x,converged,span_warning")


def fit_report_csv(reports: list[tuple[str, FitReport]], cfg: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(header_lines("fit-report", cfg))
    buf.write(FIT_COLUMNS + "\n")
    for name, r in reports:
        buf.write(f"{name},{_fmt(r.f0_hat)},{_fmt(r.q_loaded_hat)},{_fmt(r.q_ext_hat)},"
                  f"{_fmt(r.x_hat)},{_fmt(r.residual_rms)},{_fmt(r.cov_f0)},"
                  f"{_fmt(r.cov_q_loaded)},{_fmt(r.cov_x)},{int(r.converged)},"
                  f"{int(r.span_warning)}\n")
    return buf.getvalue()


def curve_csv(calib: SystemCalibration, cfg: RunConfig) -> str:
    buf = io.StringIO()
    buf.write(header_lines("levitation-curve", cfg, [
        f"f0_ref_hz = {_fmt(calib.f0_ref)}",
        "z_m = sphere center height above stub top on the cavity axis",
    ]))
    buf.write("z_m,delta_f_hz\n")
    for z, df in zip(calib.curve_z, calib.curve_df):
        buf.write(f"{_fmt(z)},{_fmt(df)}\n")
    return buf.getvalue()


def calibration_ini(calib: SystemCalibration, cfg: RunConfig) -> str:
    """All scalar calibration fields; the curve travels in its own CSV."""
    g, mat, th = calib.geometry, calib.material, calib.thermal
    lines = [
        "[calibration]",
        f"config_sha = {calib.config_sha}",
        f"f0_ref = {_fmt(calib.f0_ref)}",
        f"geometry_factor = {_fmt(calib.geometry_factor)}",
        f"b_norm = {_fmt(calib.b_norm)}",
        f"l_geom = {_fmt(calib.budget.l_geom)}",
        f"l_kin = {_fmt(calib.budget.l_kin)}",
        f"c_eff = {_fmt(calib.budget.c_eff)}",
        f"lambda_ref = {_fmt(calib.lambda_ref)}",
        f"q_ext = {_fmt(calib.q_ext)}",
        "",
        "[geometry]",
        f"outer_radius = {_fmt(g.outer_radius)}",
        f"outer_height = {_fmt(g.outer_height)}",
        f"stub_height = {_fmt(g.stub_height)}",
        f"stub_radius = {_fmt(g.stub_radius)}",
        "",
        "[magnet]",
        f"radius = {_fmt(calib.magnet.radius)}",
        f"remanence = {_fmt(calib.magnet.remanence)}",
        "",
        "[material]",
        f"t_c = {_fmt(mat.t_c)}",
        f"lambda0 = {_fmt(mat.lambda0)}",
        f"sigma_n = {_fmt(mat.sigma_n)}",
        f"b_c0 = {_fmt(mat.b_c0)}",
        f"r_res = {_fmt(mat.r_res)}",
        "",
        "[thermal]",
        f"r_th = {_fmt(th.r_th)}",
        f"tau_th = {_fmt(th.tau_th)}",
        f"base_t = {_fmt(th.base_t)}",
        f"eta_trap = {_fmt(th.eta_trap)}",
        f"flux_pin_threshold = {_fmt(th.flux_pin_threshold)}",
        f"substeps = {th.substeps}",
        "",
        "[roi]",
        f"x_range = {_fmt(calib.roi.x_range[0])}, {_fmt(calib.roi.x_range[1])}",
        f"z_range = {_fmt(calib.roi.z_range[0])}, {_fmt(calib.roi.z_range[1])}",
        "",
    ]
    return "\n".join(lines)


def read_calibration(ini_text: str, curve_text: str) -> SystemCalibration:
    parser = ConfigParser()
    try:
        parser.read_string(ini_text)
        cal = parser["calibration"]
        geo = parser["geometry"]
        mag = parser["magnet"]
        mat = parser["material"]
        th = parser["thermal"]
        roi = parser["roi"]
    except Exception as exc:
        raise ConfigError(f"bad calibration file: {exc}") from exc

    zs, dfs = [], []
    for line in curve_text.splitlines():
        line = line.strip()
        if not line or line.startswith("#") or line.startswith("z_m"):
            continue
        z_txt, df_txt = line.split(",")
        zs.append(float(z_txt))
        dfs.append(float(df_txt))
    if len(zs) < 2:
        raise ConfigError("levitation curve file has fewer than 2 points")

    def pair(txt: str) -> tuple[float, float]:
        a, b = txt.split(",")
        return float(a), float(b)

    try:
        return SystemCalibration(
            geometry=CavityGeometry(
                outer_radius=float(geo["outer_radius"]),
                outer_height=float(geo["outer_height"]),
                stub_height=float(geo["stub_height"]),
                stub_radius=float(geo["stub_radius"])),
            magnet=MagnetSpec(radius=float(mag["radius"]),
                              remanence=float(mag["remanence"])),
            material=MaterialParams(
                t_c=float(mat["t_c"]), lambda0=float(mat["lambda0"]),
                sigma_n=float(mat["sigma_n"]), b_c0=float(mat["b_c0"]),
                r_res=float(mat["r_res"])),
            q_ext=float(cal["q_ext"]),
            thermal=ThermalParams(
                r_th=float(th["r_th"]), tau_th=float(th["tau_th"]),
                base_t=float(th["base_t"]), eta_trap=float(th["eta_trap"]),
                flux_pin_threshold=float(th["flux_pin_threshold"]),
                substeps=int(th["substeps"])),
            f0_ref=float(cal["f0_ref"]),
            geometry_factor=float(cal["geometry_factor"]),
            b_norm=float(cal["b_norm"]),
            budget=InductanceBudget(l_geom=float(cal["l_geom"]),
                                    l_kin=float(cal["l_kin"]),
                                    c_eff=float(cal["c_eff"])),
            lambda_ref=float(cal["lambda_ref"]),
            curve_z=np.array(zs),
            curve_df=np.array(dfs),
            roi=RegionOfInterest(x_range=pair(roi["x_range"]),
                                 z_range=pair(roi["z_range"])),
            config_sha=cal["config_sha"],
        )
    except (KeyError, ValueError, DomainError) as exc:
        raise ConfigError(f"bad calibration file: {exc}") from exc
