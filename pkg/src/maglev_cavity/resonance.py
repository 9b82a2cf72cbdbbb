"""Observable resonance parameters, S21 synthesis, and resonance fitting.

The two-port transmission model is S21(f) = x / (1 + 2i Q_l (f - f0) / f0)
with on-resonance transmission x = 2 Q_l / Q_ext for two identical ports.
Energy conservation at resonance reads |S11|^2 + |S21|^2 + 2x(1-x) = 1 with
S11 = x - 1, so 2x(1-x) is the fraction of incident power dissipated in the
walls; the thermal model reuses it as the heating term.

observable_state closes the loop between stored RF field, pair breaking,
surface impedance, and loaded Q by damped fixed-point iteration.  Failure
to converge is the physical signature of a bistable operating point near
quench and is raised as such.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.optimize

from .constants import CONSTANTS, dbm_to_watts
from .errors import BistableOperatingPoint, DomainError, NumericalError
from .mode_solver import rf_field_amplitude
from .superconductor import (
    InductanceBudget,
    effective_pair_density,
    impedance_from_fraction,
    kinetic_inductance,
    resonant_frequency_lumped,
    superfluid_fraction,
)

if TYPE_CHECKING:
    from .calibration import SystemCalibration


@dataclass(frozen=True)
class ResonanceResult:
    f0: float
    q_int: float
    q_ext: float   # per port, two identical ports
    q_loaded: float

    def __post_init__(self):
        if min(self.f0, self.q_int, self.q_ext, self.q_loaded) <= 0.0:
            raise DomainError("resonance parameters must be positive")
        lhs = 1.0 / self.q_loaded
        rhs = 1.0 / self.q_int + 2.0 / self.q_ext
        if abs(lhs - rhs) > 1e-12 * lhs:
            raise DomainError("q_loaded inconsistent with q_int and q_ext")


@dataclass(frozen=True)
class ObservablePoint:
    """Converged driven-cavity state at one (T, P, magnet height)."""

    resonance: ResonanceResult
    b_rf_peak: float        # [T]
    pair_fraction: float
    lambda_eff: float       # [m]
    superconducting: bool
    collapsed: bool         # pair fraction driven to zero below t_c


@dataclass(frozen=True)
class S21Trace:
    freqs: np.ndarray        # [Hz], strictly increasing
    s21: np.ndarray          # complex, linear units
    power_dbm: float
    temperature_k: float
    timestamp_s: float

    def __post_init__(self):
        if len(self.freqs) != len(self.s21):
            raise DomainError("freqs and s21 lengths differ")
        if len(self.freqs) < 32:
            raise DomainError("trace needs >= 32 points")
        if not np.all(np.diff(self.freqs) > 0.0):
            raise DomainError("freqs must be strictly increasing")


@dataclass(frozen=True)
class FitReport:
    f0_hat: float
    q_loaded_hat: float
    q_ext_hat: float
    x_hat: float
    residual_rms: float
    cov_f0: float
    cov_q_loaded: float
    cov_x: float
    converged: bool
    span_warning: bool   # span below 6 loaded linewidths


def internal_q(mode_g: float, r_s: float) -> float:
    """Q_int = G / R_s."""
    if mode_g <= 0.0:
        raise DomainError("geometry factor must be > 0")
    if r_s <= 0.0:
        raise DomainError("lossless wall: Q undefined")
    return mode_g / r_s


def loaded_q(q_int: float, q_ext: float) -> float:
    """Two identical ports: (1/q_int + 2/q_ext)^-1."""
    if q_int <= 0.0 or q_ext <= 0.0:
        raise DomainError("quality factors must be > 0")
    return 1.0 / (1.0 / q_int + 2.0 / q_ext)


def resonance_from_losses(f0: float, q_int: float, q_ext: float) -> ResonanceResult:
    return ResonanceResult(f0=f0, q_int=q_int, q_ext=q_ext,
                           q_loaded=loaded_q(q_int, q_ext))


def coupling_x(q_loaded: float, q_ext: float) -> float:
    """On-resonance transmission x = 2 Q_l / Q_ext."""
    return 2.0 * q_loaded / q_ext


def dissipated_fraction(x: float) -> float:
    """Fraction of incident power dissipated internally, 2x(1-x)."""
    return 2.0 * x * (1.0 - x)


def s21_model(freqs: np.ndarray, f0: float, q_loaded: float, x: float) -> np.ndarray:
    return x / (1.0 + 2.0j * q_loaded * (freqs - f0) / f0)


def synth_s21(res: ResonanceResult, freqs: np.ndarray, noise_sigma: float = 0.0,
              seed: int = 0, power_dbm: float = 0.0, temperature_k: float = 0.0,
              timestamp_s: float = 0.0) -> S21Trace:
    """Synthesize a VNA-style trace; deterministic for a fixed seed."""
    freqs = np.asarray(freqs, dtype=float)
    x = coupling_x(res.q_loaded, res.q_ext)
    s21 = s21_model(freqs, res.f0, res.q_loaded, x)
    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        s21 = s21 + rng.normal(0.0, noise_sigma, len(freqs)) \
            + 1j * rng.normal(0.0, noise_sigma, len(freqs))
    return S21Trace(freqs=freqs, s21=s21, power_dbm=power_dbm,
                    temperature_k=temperature_k, timestamp_s=timestamp_s)


def _initial_guess(trace: S21Trace) -> tuple[float, float, float]:
    mag = np.abs(trace.s21)
    i0 = int(np.argmax(mag))
    f0 = float(trace.freqs[i0])
    peak = float(mag[i0])
    half = peak / math.sqrt(2.0)
    above = mag >= half
    left = i0
    while left > 0 and above[left - 1]:
        left -= 1
    right = i0
    while right < len(mag) - 1 and above[right + 1]:
        right += 1
    fwhm = float(trace.freqs[right] - trace.freqs[left])
    if fwhm <= 0.0:
        fwhm = float(trace.freqs[-1] - trace.freqs[0]) / 4.0
    q_l = max(f0 / fwhm, 1.0)
    return f0, q_l, min(max(peak, 1e-6), 2.0)


def fit_resonance(
    trace: S21Trace,
    initial_guess: tuple[float, float, float] | None = None,
    background: bool = False,
    magnitude_only: bool = False,
    q_ext_hint: float | None = None,
    residual_ceiling: float = 0.1,
) -> FitReport:
    """Nonlinear least squares of the two-port resonance model.

    Complex fit by default; ``magnitude_only`` fits |S21| for data without
    phase.  ``background`` adds a complex linear term a + b (f - f_center)
    for real traces with cable background.
    """
    freqs = trace.freqs
    f_center = 0.5 * (freqs[0] + freqs[-1])
    span = freqs[-1] - freqs[0]
    g0 = _initial_guess(trace) if initial_guess is None else initial_guess
    p0 = [g0[0] / f_center, math.log(g0[1]), g0[2]]
    if background:
        p0 += [0.0, 0.0, 0.0, 0.0]

    def model(p):
        f0, q_l, x = p[0] * f_center, math.exp(p[1]), p[2]
        m = s21_model(freqs, f0, q_l, x)
        if background:
            m = m + (p[3] + 1j * p[4]) + (p[5] + 1j * p[6]) * ((freqs - f_center) / span)
        return m

    def residuals(p):
        m = model(p)
        if magnitude_only:
            return np.abs(m) - np.abs(trace.s21)
        d = m - trace.s21
        return np.concatenate([d.real, d.imag])

    result = scipy.optimize.least_squares(residuals, p0, method="lm",
                                          gtol=1e-12, xtol=1e-14, ftol=1e-14,
                                          max_nfev=200 * (len(p0) + 1))
    res_vec = result.fun
    rms = float(np.sqrt(np.mean(res_vec**2)))
    f0_hat = float(result.x[0] * f_center)
    q_l_hat = float(math.exp(result.x[1]))
    x_hat = float(result.x[2])

    # covariance of (f0, q_loaded, x) from the Jacobian in internal coords
    m_pts, n_par = result.jac.shape
    cov_diag = np.full(3, math.nan)
    try:
        jtj_inv = np.linalg.inv(result.jac.T @ result.jac)
        sigma2 = float(np.sum(res_vec**2)) / max(m_pts - n_par, 1)
        d = np.sqrt(np.clip(np.diag(jtj_inv)[:3], 0.0, np.inf) * sigma2)
        cov_diag = np.array([(d[0] * f_center) ** 2, (d[1] * q_l_hat) ** 2, d[2] ** 2])
    except np.linalg.LinAlgError:
        pass

    linewidth = f0_hat / q_l_hat
    converged = bool(result.status > 0) and rms <= residual_ceiling
    q_ext_hat = 2.0 * q_l_hat / x_hat if x_hat > 0 else math.inf
    if q_ext_hint is not None:
        q_ext_hat = q_ext_hint
    return FitReport(
        f0_hat=f0_hat,
        q_loaded_hat=q_l_hat,
        q_ext_hat=q_ext_hat,
        x_hat=x_hat,
        residual_rms=rms,
        cov_f0=float(cov_diag[0]),
        cov_q_loaded=float(cov_diag[1]),
        cov_x=float(cov_diag[2]),
        converged=converged,
        span_warning=bool(span < 6.0 * linewidth),
    )


_PAIR_COLLAPSE = 1e-9  # of the zero-field fraction: below this the branch is gone


def observable_state(
    t: float,
    p_in_dbm: float,
    magnet_z: float,
    calib: "SystemCalibration",
    extra_r_s: float = 0.0,
    max_iter: int = 100,
    rel_tol: float = 1e-9,
) -> ObservablePoint:
    """Driven-cavity observables by damped fixed-point iteration.

    Iterates B_rf -> pair density -> (R_s, lambda) -> (Q, f0) -> B_rf with
    damping 0.5 on the pair-density update.  Raises BistableOperatingPoint
    when the loop still oscillates after ``max_iter`` steps (physical near
    quench; the sweep engine records the collapsed branch).
    """
    mat = calib.material
    p_w = dbm_to_watts(p_in_dbm)
    df_magnet = calib.magnet_shift(magnet_z)
    sf0 = superfluid_fraction(t, mat.t_c)

    def point(x: float) -> ObservablePoint:
        r_s, x_react = impedance_from_fraction(x, calib.f0_ref, mat)
        lam_eff = x_react / (2.0 * math.pi * calib.f0_ref * CONSTANTS.mu0)
        l_k = kinetic_inductance(lam_eff, calib.budget, calib.lambda_ref)
        budget = InductanceBudget(l_geom=calib.budget.l_geom, l_kin=l_k,
                                  c_eff=calib.budget.c_eff)
        f0 = resonant_frequency_lumped(budget) + df_magnet
        q_int = internal_q(calib.geometry_factor, r_s + extra_r_s)
        q_l = loaded_q(q_int, calib.q_ext)
        b = rf_field_amplitude(calib.b_norm, p_w, q_l, calib.q_ext, f0)
        sc = x > _PAIR_COLLAPSE * max(sf0, 1e-30)
        return ObservablePoint(
            resonance=ResonanceResult(f0=f0, q_int=q_int, q_ext=calib.q_ext, q_loaded=q_l),
            b_rf_peak=b,
            pair_fraction=x,
            lambda_eff=lam_eff,
            superconducting=sc,
            collapsed=(not sc) and sf0 > 0.0,
        )

    if sf0 <= 0.0:
        return point(0.0)

    x = sf0  # zero-field start
    prev_pt = point(x)
    for _ in range(max_iter):
        x_target = effective_pair_density(t, prev_pt.b_rf_peak, mat)
        x_new = x + 0.5 * (x_target - x)
        pt = point(x_new)
        change = max(abs(x_new - x) / sf0,
                     abs(pt.resonance.f0 - prev_pt.resonance.f0) / prev_pt.resonance.f0)
        x = x_new
        if change < rel_tol:
            return pt
        prev_pt = pt
    raise BistableOperatingPoint(
        f"fixed point did not converge at t={t} K, p={p_in_dbm} dBm",
        iterate_a=prev_pt, iterate_b=pt)


def collapsed_observable(t: float, p_in_dbm: float, magnet_z: float,
                         calib: "SystemCalibration", extra_r_s: float = 0.0) -> ObservablePoint:
    """Normal-branch observables (pair fraction forced to zero)."""
    mat = calib.material
    p_w = dbm_to_watts(p_in_dbm)
    r_s, x_react = impedance_from_fraction(0.0, calib.f0_ref, mat)
    lam_eff = x_react / (2.0 * math.pi * calib.f0_ref * CONSTANTS.mu0)
    l_k = kinetic_inductance(lam_eff, calib.budget, calib.lambda_ref)
    budget = InductanceBudget(l_geom=calib.budget.l_geom, l_kin=l_k, c_eff=calib.budget.c_eff)
    f0 = resonant_frequency_lumped(budget) + calib.magnet_shift(magnet_z)
    q_int = internal_q(calib.geometry_factor, r_s + extra_r_s)
    q_l = loaded_q(q_int, calib.q_ext)
    b = rf_field_amplitude(calib.b_norm, p_w, q_l, calib.q_ext, f0)
    return ObservablePoint(
        resonance=ResonanceResult(f0=f0, q_int=q_int, q_ext=calib.q_ext, q_loaded=q_l),
        b_rf_peak=b, pair_fraction=0.0, lambda_eff=lam_eff,
        superconducting=False, collapsed=superfluid_fraction(t, mat.t_c) > 0.0)
