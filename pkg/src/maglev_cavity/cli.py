"""Command-line client for the maglev-cavity service.

Each subcommand posts to the corresponding service endpoint and writes the
returned files under --out.  By default the service runs in-process (no
network); --server targets a running instance instead.  Subcommands also
answer to their cmd_-prefixed spellings.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 output/I-O error.
"""

from __future__ import annotations

import os
import sys
from dataclasses import replace

import click
import httpx

from .config import NoiseOptions, ProtocolSpec, emit_config, parse_config
from .errors import ConfigError
from .experiment import (
    power_ramp_protocol,
    power_switch_protocol,
    temperature_sweep_protocol,
)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=3600.0)
    from fastapi.testclient import TestClient

    from .service.app import app
    return TestClient(app)


def _post(server: str | None, path: str, payload: dict) -> dict:
    with _client(server) as client:
        resp = client.post(path, json=payload)
    if resp.status_code == 200:
        return resp.json()
    try:
        body = resp.json()
        kind, msg = body.get("kind", "unknown"), body.get("error", resp.text)
    except Exception:
        kind, msg = "unknown", resp.text
    click.echo(f"error: {kind}: {msg}", err=True)
    sys.exit(EXIT_CONFIG if resp.status_code in (400, 422) else EXIT_NUMERICAL)


def _load_config_text(path: str | None, seed: int | None) -> str:
    text = ""
    if path:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            click.echo(f"error: io: {exc}", err=True)
            sys.exit(EXIT_IO)
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        click.echo(f"error: config: {exc}", err=True)
        sys.exit(EXIT_CONFIG)
    if seed is not None:
        cfg = replace(cfg, noise=NoiseOptions(sigma=cfg.noise.sigma, seed=seed))
    return emit_config(cfg)


def _write_files(out: str, files: list[dict], force: bool):
    os.makedirs(out, exist_ok=True)
    for f in files:
        path = os.path.join(out, f["name"])
        if os.path.exists(path) and not force:
            click.echo(f"error: io: refusing to overwrite {path} (use --force)", err=True)
            sys.exit(EXIT_IO)
    for f in files:
        path = os.path.join(out, f["name"])
        os.makedirs(os.path.dirname(path) or out, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f["content"])
        click.echo(path)


def _read_calibration_dir(path: str | None) -> tuple[str, str]:
    if not path:
        click.echo("error: config: run cmd_calibrate first (--calibration DIR required)",
                   err=True)
        sys.exit(EXIT_CONFIG)
    try:
        with open(os.path.join(path, "calibration.ini"), encoding="utf-8") as fh:
            ini = fh.read()
        with open(os.path.join(path, "levitation_curve.csv"), encoding="utf-8") as fh:
            curve = fh.read()
    except OSError:
        click.echo("error: config: run cmd_calibrate first (calibration files missing)",
                   err=True)
        sys.exit(EXIT_CONFIG)
    return ini, curve


class _AliasGroup(click.Group):
    """Resolve cmd_-prefixed spellings to the plain subcommand names."""

    def get_command(self, ctx, name):
        if name.startswith("cmd_") or name.startswith("cmd-"):
            name = name[4:].replace("_", "-")
        return super().get_command(ctx, name)


def common_options(fn):
    fn = click.option("--config", "config_path", type=click.Path(), default=None,
                      help="INI config file; defaults used when omitted.")(fn)
    fn = click.option("--out", default="out", show_default=True,
                      help="Output directory.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override noise.seed.")(fn)
    fn = click.option("--force", is_flag=True, help="Overwrite existing outputs.")(fn)
    fn = click.option("--server", default=None,
                      help="Service URL; in-process when omitted.")(fn)
    return fn


@click.group(cls=_AliasGroup)
def main():
    """Superconducting stub-cavity simulator and analysis chain."""


@main.command("mode-solve")
@common_options
@click.option("--fields", is_flag=True, help="Also dump the field maps CSV.")
def mode_solve(config_path, out, seed, force, server, fields):
    """Solve the bare cavity mode; report f0, G and the field scale."""
    text = _load_config_text(config_path, seed)
    body = _post(server, "/mode/solve", {"config_text": text, "dump_fields": fields})
    click.echo(f"f0 = {body['f0_hz']:.6e} Hz (estimate {body['analytic_estimate_hz']:.4e})")
    click.echo(f"f_next = {body['f_next_hz']:.6e} Hz")
    click.echo(f"G = {body['geometry_factor_ohm']:.4f} ohm; "
               f"B/sqrt(U) = {body['b_norm_t_per_sqrt_j']:.4f} T/sqrt(J)")
    if body["files"]:
        _write_files(out, body["files"], force)


@main.command("shift-map")
@common_options
def shift_map_cmd(config_path, out, seed, force, server):
    """Compute the magnet-position frequency-shift map CSV."""
    text = _load_config_text(config_path, seed)
    body = _post(server, "/shift-map", {"config_text": text})
    click.echo(f"f0_ref = {body['f0_ref_hz']:.6e} Hz; feasible cells = {body['n_feasible']}")
    _write_files(out, body["files"], force)


@main.command("calibrate")
@common_options
@click.option("--grid-search", is_flag=True,
              help="Nudge (r_th, b_c0) against the transition/collapse targets.")
def calibrate_cmd(config_path, out, seed, force, server, grid_search):
    """Build and save the system calibration (mode + levitation curve)."""
    text = _load_config_text(config_path, seed)
    body = _post(server, "/calibrate", {"config_text": text, "grid_search": grid_search})
    click.echo(f"f0_ref = {body['f0_ref_hz']:.6e} Hz; G = {body['geometry_factor_ohm']:.3f} ohm")
    click.echo(f"r_th = {body['r_th']}; b_c0 = {body['b_c0']}")
    if body.get("transition_lowpower_k") is not None:
        click.echo(f"transition(-15 dBm) = {body['transition_lowpower_k']:.4f} K")
    _write_files(out, body["files"], force)


@main.command("sweep")
@common_options
@click.option("--calibration", "calibration_dir", type=click.Path(), default=None,
              help="Directory produced by calibrate.")
@click.option("--kind", type=click.Choice(["temperature", "power", "switch"]),
              default=None, help="Generate setpoints instead of config ones.")
@click.option("--powers", default=None,
              help="Comma list of dBm powers (temperature sweeps; one file per power).")
@click.option("--t-start", type=float, default=0.135, show_default=True)
@click.option("--t-stop", type=float, default=1.0, show_default=True)
@click.option("--t-step", type=float, default=0.015, show_default=True)
@click.option("--t-bath", type=float, default=0.757, show_default=True)
@click.option("--p-start", type=float, default=-15.0, show_default=True)
@click.option("--p-stop", type=float, default=5.0, show_default=True)
@click.option("--p-step", type=float, default=1.0, show_default=True)
@click.option("--up-down", is_flag=True, help="Ramp power up then back down.")
@click.option("--high", type=float, default=5.0, show_default=True)
@click.option("--lows", default="-5,-4,-2", show_default=True)
@click.option("--dwell", type=float, default=None, help="Dwell seconds per setpoint.")
@click.option("--magnet-z", type=float, default=None, help="Magnet center height [m].")
@click.option("--traces", is_flag=True, help="Also synthesize an S21 trace per record.")
def sweep_cmd(config_path, out, seed, force, server, calibration_dir, kind, powers,
              t_start, t_stop, t_step, t_bath, p_start, p_stop, p_step, up_down,
              high, lows, dwell, magnet_z, traces):
    """Run a measurement protocol and write the sweep CSV (plus traces)."""
    text = _load_config_text(config_path, seed)
    ini, curve = _read_calibration_dir(calibration_dir)
    cfg = parse_config(text)
    dwell_s = dwell if dwell is not None else cfg.protocol.dwell
    z = magnet_z if magnet_z is not None else cfg.protocol.magnet_z

    protocols: list[tuple[str, ProtocolSpec]] = []
    if kind == "temperature":
        plist = [float(p) for p in (powers or "-15").split(",")]
        for p in plist:
            proto = temperature_sweep_protocol(t_start, t_stop, t_step, p,
                                               dwell=dwell_s, magnet_z=z)
            protocols.append((f"sweep_temperature_p{p:+g}dbm.csv", proto))
    elif kind == "power":
        proto = power_ramp_protocol(t_bath, p_start, p_stop, p_step, up_down=up_down,
                                    dwell=dwell_s, magnet_z=z)
        protocols.append((f"sweep_power_t{t_bath:g}k.csv", proto))
    elif kind == "switch":
        lows_list = [float(p) for p in lows.split(",")]
        proto = power_switch_protocol(high, lows_list, t_bath,
                                      dwell=dwell_s if dwell is not None else 300.0,
                                      magnet_z=z)
        protocols.append((f"sweep_switch_t{t_bath:g}k.csv", proto))
    else:
        protocols.append((f"sweep_{cfg.protocol.kind}.csv", cfg.protocol))

    all_files = []
    for name, proto in protocols:
        cfg_p = replace(cfg, protocol=proto)
        body = _post(server, "/sweep", {
            "config_text": emit_config(cfg_p),
            "calibration_ini": ini,
            "curve_csv": curve,
            "emit_traces": traces,
        })
        for f in body["files"]:
            if f["name"].startswith("sweep_"):
                f["name"] = name
            else:
                f["name"] = os.path.join("traces", name.replace(".csv", ""), f["name"])
            all_files.append(f)
    _write_files(out, all_files, force)


@main.command("fit")
@common_options
@click.option("--input", "input_path", type=click.Path(exists=True), required=True,
              help="Trace CSV file or directory of traces.")
@click.option("--magnitude-only", is_flag=True)
@click.option("--background", is_flag=True, help="Fit a complex linear background too.")
def fit_cmd(config_path, out, seed, force, server, input_path, magnitude_only, background):
    """Fit resonance parameters for one trace or a directory of traces."""
    text = _load_config_text(config_path, seed)
    paths = []
    if os.path.isdir(input_path):
        for root, _dirs, names in os.walk(input_path):
            paths.extend(os.path.join(root, n) for n in sorted(names)
                         if n.endswith(".csv"))
    else:
        paths = [input_path]
    if not paths:
        click.echo("error: io: no trace files found", err=True)
        sys.exit(EXIT_IO)
    traces = []
    for p in paths:
        with open(p, encoding="utf-8") as fh:
            traces.append({"name": os.path.relpath(p, input_path)
                           if os.path.isdir(input_path) else os.path.basename(p),
                           "content": fh.read()})
    body = _post(server, "/fit", {"config_text": text, "traces": traces,
                                  "magnitude_only": magnitude_only,
                                  "background": background})
    _write_files(out, [{"name": "fit_report.csv", "content": body["report_csv"]}], force)
    click.echo(f"converged_all = {body['converged_all']}")


@main.command("invert-height")
@common_options
@click.option("--calibration", "calibration_dir", type=click.Path(), default=None)
@click.option("--f-meas", type=float, required=True, help="Measured f0 [Hz].")
def invert_cmd(config_path, out, seed, force, server, calibration_dir, f_meas):
    """Recover the magnet height from a measured resonance frequency."""
    text = _load_config_text(config_path, seed)
    ini, curve = _read_calibration_dir(calibration_dir)
    body = _post(server, "/invert-height", {
        "config_text": text, "calibration_ini": ini, "curve_csv": curve,
        "f_meas_hz": f_meas})
    click.echo(f"z = {body['z_m']:.6e} m (delta_f = {body['delta_f_hz']:.4e} Hz)")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
def serve_cmd(host, port):
    """Run the HTTP service."""
    import uvicorn
    from .service.app import app
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
