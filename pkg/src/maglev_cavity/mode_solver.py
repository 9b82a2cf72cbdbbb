"""Axisymmetric finite-difference eigensolver for the m = 0 TM mode family.

The cavity fundamental is azimuthally symmetric with components
(E_r, E_z, H_phi), so the eigenproblem closes on the scalar H_phi:

    -d2H/dz2 - d/dr[(1/r) d(rH)/dr] = (w/c)^2 H

discretized on a staggered grid with H_phi at cell centers and E components
on the dual edges.  Perfect-conductor walls are the natural boundary
condition of the quadratic form, so tangential E vanishes on every wall edge
exactly by construction.  The 1/r terms at the axis are regularized through
the Stokes-consistent axis flux (E_z(0) from the circulation of H around the
axis), which keeps second-order convergence.

The discrete problem is a symmetric generalized eigenproblem A h = k^2 W h
with A positive semidefinite and W the diagonal of cell volumes weighted by
radius; it is solved by shift-invert Lanczos targeted at an analytic
quarter-wave estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constants import CONSTANTS, PhysicalConstants
from .errors import DomainError, NumericalError
from .geometry import CavityGeometry

MetalPredicate = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    dr: float
    dz: float
    nr: int
    nz: int

    def __post_init__(self):
        if self.dr <= 0.0 or self.dz <= 0.0:
            raise DomainError("grid spacings must be > 0")
        if self.nr < 4 or self.nz < 4:
            raise DomainError("grid too coarse")

    @staticmethod
    def for_geometry(g: CavityGeometry, dr: float = 1.0e-4, dz: float = 1.0e-4) -> "GridSpec":
        """Snap spacings so the outer walls land exactly on grid lines."""
        nr = max(4, round(g.outer_radius / dr))
        nz = max(4, round(g.outer_height / dz))
        return GridSpec(dr=g.outer_radius / nr, dz=g.outer_height / nz, nr=nr, nz=nz)

    @property
    def r_centers(self) -> np.ndarray:
        return (np.arange(self.nr) + 0.5) * self.dr

    @property
    def z_centers(self) -> np.ndarray:
        return (np.arange(self.nz) + 0.5) * self.dz

    @property
    def r_edges(self) -> np.ndarray:
        return np.arange(self.nr + 1) * self.dr

    @property
    def z_edges(self) -> np.ndarray:
        return np.arange(self.nz + 1) * self.dz


@dataclass(frozen=True)
class EvanescentModel:
    beta: float   # decay constant [1/m]
    z_ref: float  # stub top plane [m]

    def __post_init__(self):
        if self.beta <= 0.0:
            raise DomainError("beta must be > 0 below cutoff")


@dataclass(frozen=True)
class ModeField:
    """One normalized eigenmode: frequency, staggered field maps, energy.

    Field arrays hold the mode amplitudes scaled so that the stored energy
    (1/2) integral(eps0 |E|^2 + mu0 |H|^2) dV equals ``stored_energy`` (1 J
    after normalization), with the electric and magnetic halves equal.
    h_phi lives on cell centers, e_r on axial edges (nr, nz+1), e_z on
    radial edges (nr+1, nz).
    """

    f0: float
    f_next: float
    e_r: np.ndarray
    e_z: np.ndarray
    h_phi: np.ndarray
    stored_energy: float
    grid: GridSpec
    metal: np.ndarray          # bool, True on metal cells
    eigen_residual: float

    def __post_init__(self):
        if self.stored_energy <= 0.0:
            raise DomainError("stored_energy must be > 0")


def analytic_coax_estimate(g: CavityGeometry, k: PhysicalConstants = CONSTANTS,
                           end_correction: bool = True) -> float:
    """Quarter-wave estimate c / (4 (stub_height + dl)).

    dl models the capacitive loading of the open stub end: the parallel-plate
    term to the lid (negligible for tall cavities) plus the open-end fringing
    of the coax cross-section, taken as half the radial gap, which tracks
    full solves of this cavity class to a few percent.  Used as the
    eigensolver seed and a sanity bound, not as truth.
    """
    dl = 0.0
    if end_correction:
        c_top = (k.eps0 * math.pi * g.stub_radius**2
                 / (g.outer_height - g.stub_height))
        z_line = (math.sqrt(k.mu0 / k.eps0) / (2.0 * math.pi)
                  * math.log(g.outer_radius / g.stub_radius))
        dl = c_top * z_line * k.c + 0.5 * (g.outer_radius - g.stub_radius)
    return k.c / (4.0 * (g.stub_height + dl))


def evanescent_beta(f: float, g: CavityGeometry,
                    k: PhysicalConstants = CONSTANTS) -> float:
    """Decay constant sqrt(k_c^2 - (2 pi f / c)^2) of the section above the stub.

    k_c is the TM01 cutoff 2.405 / outer_radius, matching the azimuthal
    symmetry of the fundamental mode.
    """
    k_c = 2.405 / g.outer_radius
    k_w = 2.0 * math.pi * f / k.c
    if k_w >= k_c:
        raise DomainError("mode propagates; no evanescent decay")
    return math.sqrt(k_c**2 - k_w**2)


def stub_metal_mask(g: CavityGeometry, grid: GridSpec) -> np.ndarray:
    """True for cells whose center lies inside the stub."""
    r = grid.r_centers[:, None]
    z = grid.z_centers[None, :]
    return (r < g.stub_radius) & (z < g.stub_height)


def _assemble(grid: GridSpec, metal: np.ndarray) -> tuple[sp.csc_matrix, sp.csc_matrix, np.ndarray]:
    """Build the symmetric stiffness A and diagonal mass W on vacuum cells."""
    nr, nz, dr, dz = grid.nr, grid.nz, grid.dr, grid.dz
    r_c = grid.r_centers

    idx = -np.ones((nr, nz), dtype=np.int64)
    vac = ~metal
    ndof = int(vac.sum())
    if ndof == 0:
        raise DomainError("no vacuum cells in grid")
    idx[vac] = np.arange(ndof)

    rows, cols, vals = [], [], []

    def add(i, j, v):
        rows.append(i)
        cols.append(j)
        vals.append(v)

    # axial edges between (i, j) and (i, j+1): w * (h_up - h_dn)^2
    a = idx[:, :-1]
    b = idx[:, 1:]
    ok = (a >= 0) & (b >= 0)
    w = np.broadcast_to((r_c * dr / dz)[:, None], a.shape)[ok]
    aa, bb = a[ok], b[ok]
    add(aa, aa, w)
    add(bb, bb, w)
    add(aa, bb, -w)
    add(bb, aa, -w)

    # radial edges between (i, j) and (i+1, j) at r_i = (i+1) dr:
    # (dz / (r_i dr)) * (r_R h_R - r_L h_L)^2
    a = idx[:-1, :]
    b = idx[1:, :]
    ok = (a >= 0) & (b >= 0)
    r_i = grid.r_edges[1:nr]
    c_edge = dz / (r_i * dr)
    alpha = np.broadcast_to((r_c[1:] * np.sqrt(c_edge))[:, None], a.shape)[ok]
    beta = np.broadcast_to((r_c[:-1] * np.sqrt(c_edge))[:, None], a.shape)[ok]
    aa, bb = a[ok], b[ok]
    add(bb, bb, alpha**2)
    add(aa, aa, beta**2)
    add(aa, bb, -alpha * beta)
    add(bb, aa, -alpha * beta)

    # axis regularization: E_z(0) from the circulation of H, diagonal 2 dz
    ax = idx[0, :]
    ok = ax >= 0
    aa = ax[ok]
    add(aa, aa, np.full(aa.shape, 2.0 * dz))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    a_mat = sp.coo_matrix((vals, (rows, cols)), shape=(ndof, ndof)).tocsc()
    w_diag = np.broadcast_to((r_c * dr * dz)[:, None], (nr, nz))[vac]
    w_mat = sp.diags(w_diag).tocsc()
    return a_mat, w_mat, idx


def solve_axisymmetric_mode(
    grid: GridSpec,
    metal: np.ndarray,
    f_target: float,
    n_modes: int = 6,
    k: PhysicalConstants = CONSTANTS,
) -> ModeField:
    """Solve for the lowest m = 0 mode of an arbitrary axisymmetric metal mask.

    Shift-invert Lanczos around 0.5 * f_target keeps the wanted interior mode
    nearest the shift; eigenvectors use a fixed start vector so repeated runs
    are bit-identical.
    """
    a_mat, w_mat, idx = _assemble(grid, metal)
    ndof = a_mat.shape[0]
    sigma = (2.0 * math.pi * 0.5 * f_target / k.c) ** 2
    v0 = np.ones(ndof) / math.sqrt(ndof)
    try:
        lam, vec = spla.eigsh(a_mat, k=min(n_modes, ndof - 2), M=w_mat,
                              sigma=sigma, which="LM", v0=v0)
    except Exception as exc:  # ArpackNoConvergence and factorization failures
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    order = np.argsort(lam)
    lam, vec = lam[order], vec[:, order]
    if lam[0] <= 0.0:
        raise NumericalError(f"nonpositive eigenvalue {lam[0]:.3e}")

    h_dof = vec[:, 0]
    resid = float(np.linalg.norm(a_mat @ h_dof - lam[0] * (w_mat @ h_dof))
                  / (lam[0] * np.linalg.norm(w_mat @ h_dof)))
    if resid > 1e-8:
        raise NumericalError(f"eigen-residual {resid:.2e} exceeds 1e-8")

    f0 = k.c * math.sqrt(lam[0]) / (2.0 * math.pi)
    f_next = k.c * math.sqrt(lam[1]) / (2.0 * math.pi) if len(lam) > 1 else math.inf

    nr, nz, dr, dz = grid.nr, grid.nz, grid.dr, grid.dz
    h = np.zeros((nr, nz))
    vac = ~metal
    h[vac] = h_dof
    r_c = grid.r_centers

    # fix overall sign so the dominant circulation is positive
    if float((h * r_c[:, None]).sum()) < 0.0:
        h = -h

    omega = 2.0 * math.pi * f0
    # E maps from the discrete curl of H; wall and metal-adjacent edges stay 0
    e_r = np.zeros((nr, nz + 1))
    ok = vac[:, :-1] & vac[:, 1:]
    e_r[:, 1:nz][ok] = -((h[:, 1:] - h[:, :-1]) / dz)[ok]
    e_z = np.zeros((nr + 1, nz))
    ok = vac[:-1, :] & vac[1:, :]
    r_i = grid.r_edges[1:nr]
    num = (r_c[1:, None] * h[1:, :] - r_c[:-1, None] * h[:-1, :]) / (r_i[:, None] * dr)
    e_z[1:nr, :][ok] = num[ok]
    e_z[0, :][vac[0, :]] = 4.0 * h[0, vac[0, :]] / dr
    e_r /= omega * k.eps0
    e_z /= omega * k.eps0

    u_h = 0.5 * k.mu0 * float((h**2 * (2.0 * math.pi * r_c[:, None] * dr * dz)).sum())
    u_e = _electric_energy(e_r, e_z, grid, k)
    scale = 1.0 / math.sqrt(u_h + u_e)
    return ModeField(
        f0=f0,
        f_next=f_next,
        e_r=e_r * scale,
        e_z=e_z * scale,
        h_phi=h * scale,
        stored_energy=1.0,
        grid=grid,
        metal=metal,
        eigen_residual=resid,
    )


def _electric_energy(e_r: np.ndarray, e_z: np.ndarray, grid: GridSpec,
                     k: PhysicalConstants) -> float:
    """(1/2) eps0 integral |E|^2 dV with weights dual to the assembly."""
    dr, dz = grid.dr, grid.dz
    r_c = grid.r_centers
    r_i = grid.r_edges
    u = float((e_r**2 * (2.0 * math.pi * r_c[:, None] * dr * dz)).sum())
    u += float((e_z[1:, :]**2 * (2.0 * math.pi * r_i[1:, None] * dr * dz)).sum())
    u += float((e_z[0, :]**2).sum()) * math.pi * (dr / 2.0)**2 * dz
    return 0.5 * k.eps0 * u


def solve_bare_mode(g: CavityGeometry, grid: GridSpec | None = None,
                    k: PhysicalConstants = CONSTANTS,
                    extra_metal: MetalPredicate | None = None) -> ModeField:
    """Fundamental mode of the stub cavity (ports are lumped into Q_ext).

    ``extra_metal(r, z)`` marks additional perfectly conducting cells, used
    by the meshed-sphere cross-check of the perturbation module.
    """
    if grid is None:
        grid = GridSpec.for_geometry(g)
    if g.stub_radius / grid.dr < 10.0:
        raise DomainError("grid must resolve stub_radius with >= 10 cells")
    if grid.nr * grid.dr < g.outer_radius - 1e-12 or grid.nz * grid.dz < g.outer_height - 1e-12:
        raise DomainError("grid does not cover the cavity")
    metal = stub_metal_mask(g, grid)
    if extra_metal is not None:
        r = np.broadcast_to(grid.r_centers[:, None], metal.shape)
        z = np.broadcast_to(grid.z_centers[None, :], metal.shape)
        metal = metal | extra_metal(r, z)
    return solve_axisymmetric_mode(grid, metal, analytic_coax_estimate(g, k), k=k)


def stored_energy(mode: ModeField, k: PhysicalConstants = CONSTANTS) -> float:
    """Recompute (1/2) integral(eps0 |E|^2 + mu0 |H|^2) dV from the maps."""
    grid = mode.grid
    r_c = grid.r_centers
    u_h = 0.5 * k.mu0 * float((mode.h_phi**2
                               * (2.0 * math.pi * r_c[:, None] * grid.dr * grid.dz)).sum())
    return u_h + _electric_energy(mode.e_r, mode.e_z, grid, k)


def electric_energy_fraction(mode: ModeField, k: PhysicalConstants = CONSTANTS) -> float:
    return _electric_energy(mode.e_r, mode.e_z, mode.grid, k) / stored_energy(mode, k)


def _wall_faces(mode: ModeField):
    """Iterate (H_t^2, area) over all metal-facing and outer-boundary faces.

    On radial faces H is extrapolated with r H = const (the natural wall
    condition); on axial faces the adjacent cell value is used (dH/dz = 0).
    """
    grid, metal, h = mode.grid, mode.metal, mode.h_phi
    nr, nz, dr, dz = grid.nr, grid.nz, grid.dr, grid.dz
    r_c = grid.r_centers
    vac = ~metal

    terms = []

    # outer wall r = nr dr
    r_wall = nr * dr
    hw = h[nr - 1, :] * (r_c[nr - 1] / r_wall)
    terms.append(((hw**2 * vac[nr - 1, :]).sum() * 2.0 * math.pi * r_wall * dz))
    # bottom z = 0 and top z = nz dz
    terms.append(float((h[:, 0]**2 * vac[:, 0] * 2.0 * math.pi * r_c * dr).sum()))
    terms.append(float((h[:, nz - 1]**2 * vac[:, nz - 1] * 2.0 * math.pi * r_c * dr).sum()))

    # interior faces against metal cells
    # radial faces: vacuum at i, metal at i-1 (wall at r_edge i) or vice versa
    for shift in (1, -1):
        v = vac & np.roll(metal, shift, axis=0)
        if shift == 1:
            v[0, :] = False  # roll wraps; axis cells have no inner neighbor
            r_wall_arr = grid.r_edges[:nr]
        else:
            v[nr - 1, :] = False
            r_wall_arr = grid.r_edges[1:nr + 1]
        ii, jj = np.nonzero(v)
        if ii.size:
            rw = r_wall_arr[ii]
            hw = h[ii, jj] * (r_c[ii] / rw)
            terms.append(float((hw**2 * 2.0 * math.pi * rw * dz).sum()))
    # axial faces: vacuum at j, metal at j-1 or j+1
    for shift in (1, -1):
        v = vac & np.roll(metal, shift, axis=1)
        if shift == 1:
            v[:, 0] = False
        else:
            v[:, nz - 1] = False
        ii, jj = np.nonzero(v)
        if ii.size:
            terms.append(float((h[ii, jj]**2 * 2.0 * math.pi * r_c[ii] * dr).sum()))
    return sum(terms)


def geometry_factor(mode: ModeField, k: PhysicalConstants = CONSTANTS) -> float:
    """G = w0 mu0 integral |H|^2 dV / surface integral |H_t|^2 dA  [ohm]."""
    grid = mode.grid
    vol = float((mode.h_phi**2
                 * (2.0 * math.pi * grid.r_centers[:, None] * grid.dr * grid.dz)).sum())
    wall = _wall_faces(mode)
    if wall <= 0.0:
        raise NumericalError("empty wall integral")
    return 2.0 * math.pi * mode.f0 * k.mu0 * vol / wall


def peak_b_per_sqrt_joule(mode: ModeField, k: PhysicalConstants = CONSTANTS) -> float:
    """mu0 max|H| of the 1 J normalized mode [T / sqrt(J)], on this grid."""
    return k.mu0 * float(np.abs(mode.h_phi).max()) / math.sqrt(mode.stored_energy)


def rf_field_amplitude(mode_b_norm: float, p_in: float, q_loaded: float,
                       q_ext: float, f0: float) -> float:
    """Steady-state peak RF field for drive power p_in through one port.

    Two symmetric ports: stored energy U = 4 Q_l^2 / (Q_ext w0) * P_in, and
    B_peak scales as sqrt(U) from the normalized-mode peak.
    """
    if p_in < 0.0 or q_loaded <= 0.0 or q_ext <= 0.0 or f0 <= 0.0:
        raise DomainError("rf_field_amplitude needs nonnegative power, positive Qs and f0")
    if p_in == 0.0:
        return 0.0
    u = 4.0 * q_loaded**2 / (q_ext * 2.0 * math.pi * f0) * p_in
    return mode_b_norm * math.sqrt(u)


def sample_masks(mode: ModeField) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Validity masks for the three staggered arrays.

    Samples strictly inside metal carry no field information (their stored
    zeros would bias interpolation near surfaces); edges on a metal surface
    are genuine tangential-E zeros and stay valid.
    """
    vac = ~mode.metal
    nr, nz = mode.grid.nr, mode.grid.nz
    v_er = np.zeros((nr, nz + 1), dtype=bool)
    v_er[:, 1:nz] = vac[:, :-1] | vac[:, 1:]
    v_er[:, 0] = vac[:, 0]
    v_er[:, nz] = vac[:, nz - 1]
    v_ez = np.zeros((nr + 1, nz), dtype=bool)
    v_ez[1:nr, :] = vac[:-1, :] | vac[1:, :]
    v_ez[0, :] = vac[0, :]
    v_ez[nr, :] = vac[nr - 1, :]
    return v_er, v_ez, vac


def sample_fields(mode: ModeField, r: float, z: float,
                  masks=None) -> tuple[float, float, float]:
    """(e_r, e_z, h_phi) at a point, metal-masked bilinear interpolation."""
    if masks is None:
        masks = sample_masks(mode)
    v_er, v_ez, vac = masks
    grid = mode.grid
    er = _interp(mode.e_r, v_er, grid.r_centers, grid.z_edges, r, z)
    ez = _interp(mode.e_z, v_ez, grid.r_edges, grid.z_centers, r, z)
    h = _interp(mode.h_phi, vac, grid.r_centers, grid.z_centers, r, z)
    return er, ez, h


def field_at(mode: ModeField, r: float, z: float,
             g: CavityGeometry | None = None, masks=None) -> tuple[float, float]:
    """(|E|, |H|) by masked bilinear interpolation of the staggered maps.

    Points on metal surfaces are allowed; points strictly inside metal or
    outside the cavity raise DomainError.
    """
    grid = mode.grid
    r_dom = grid.nr * grid.dr
    z_dom = grid.nz * grid.dz
    if not (0.0 <= r <= r_dom and 0.0 <= z <= z_dom):
        raise DomainError(f"point (r={r}, z={z}) outside cavity")
    if g is not None:
        tol = 1e-12
        if r < g.stub_radius - tol and z < g.stub_height - tol:
            raise DomainError(f"point (r={r}, z={z}) inside stub metal")
    er, ez, h = sample_fields(mode, r, z, masks)
    return math.hypot(er, ez), abs(h)


def _interp(arr: np.ndarray, valid: np.ndarray, xs: np.ndarray, ys: np.ndarray,
            x: float, y: float) -> float:
    """Bilinear interpolation with edge clamping, skipping invalid samples."""
    x = min(max(x, xs[0]), xs[-1])
    y = min(max(y, ys[0]), ys[-1])
    i = min(int(np.searchsorted(xs, x) - 1), len(xs) - 2)
    j = min(int(np.searchsorted(ys, y) - 1), len(ys) - 2)
    i = max(i, 0)
    j = max(j, 0)
    tx = (x - xs[i]) / (xs[i + 1] - xs[i])
    ty = (y - ys[j]) / (ys[j + 1] - ys[j])
    w00 = (1 - tx) * (1 - ty) * valid[i, j]
    w10 = tx * (1 - ty) * valid[i + 1, j]
    w01 = (1 - tx) * ty * valid[i, j + 1]
    w11 = tx * ty * valid[i + 1, j + 1]
    total = w00 + w10 + w01 + w11
    if total <= 0.0:
        return 0.0
    return float((w00 * arr[i, j] + w10 * arr[i + 1, j]
                  + w01 * arr[i, j + 1] + w11 * arr[i + 1, j + 1]) / total)
