"""Pydantic request/response models for the service endpoints."""

from __future__ import annotations

from pydantic import BaseModel, Field


class FilePayload(BaseModel):
    name: str
    content: str


class ModeSolveRequest(BaseModel):
    config_text: str = ""
    dump_fields: bool = False


class ModeSolveResponse(BaseModel):
    f0_hz: float
    f_next_hz: float
    analytic_estimate_hz: float
    geometry_factor_ohm: float
    b_norm_t_per_sqrt_j: float
    electric_fraction: float
    eigen_residual: float
    evanescent_beta_per_m: float
    files: list[FilePayload] = Field(default_factory=list)


class ShiftMapRequest(BaseModel):
    config_text: str = ""


class ShiftMapResponse(BaseModel):
    f0_ref_hz: float
    n_feasible: int
    argmax_contact_x_m: float
    files: list[FilePayload]


class CalibrateRequest(BaseModel):
    config_text: str = ""
    grid_search: bool = False


class CalibrateResponse(BaseModel):
    config_sha: str
    f0_ref_hz: float
    geometry_factor_ohm: float
    b_norm_t_per_sqrt_j: float
    r_th: float
    b_c0: float
    transition_lowpower_k: float | None = None
    files: list[FilePayload]


class SweepRequest(BaseModel):
    config_text: str = ""
    calibration_ini: str = ""
    curve_csv: str = ""
    emit_traces: bool = False


class SweepResponse(BaseModel):
    files: list[FilePayload]


class FitRequest(BaseModel):
    config_text: str = ""
    traces: list[FilePayload]
    magnitude_only: bool = False
    background: bool = False


class FitResponse(BaseModel):
    report_csv: str
    converged_all: bool


class InvertHeightRequest(BaseModel):
    f_meas_hz: float
    calibration_ini: str = ""
    curve_csv: str = ""
    config_text: str = ""


class InvertHeightResponse(BaseModel):
    z_m: float
    delta_f_hz: float
    f0_ref_hz: float


class TransitionRequest(BaseModel):
    config_text: str = ""
    calibration_ini: str = ""
    curve_csv: str = ""
    p_dbm: float


class TransitionResponse(BaseModel):
    t_transition_k: float


class ErrorBody(BaseModel):
    kind: str
    error: str
