"""Cramer-Rao lower bounds for 2-D angle-of-arrival estimation.

Given per-port far-field patterns, the Fisher information at an angle is
F = J^H D J where J stacks the theta/phi derivatives of the full
steering row f = [e_theta, e_phi] and D = I - f^H f / ||f||^2 projects
out the steering direction.  The CRLB matrix is C = Re{F}^-1 / (2 SNR).
Derivatives are central finite differences on the stored grid (one-sided
at the theta poles, wrapped in phi on full-circle grids).

A closed-form expression for the ideal uniform planar array serves as a
cross-check oracle and exhibits the characteristic endfire blow-up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .emdata import PatternSet
from .errors import GridError
from .grid import AngleGrid


# ---------------------------------------------------------------------------
# sensing areas
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SensingArea:
    """Closed rectangular angle window [theta_min, theta_max] x [phi_min, phi_max] in degrees."""

    theta_min_deg: float
    theta_max_deg: float
    phi_min_deg: float
    phi_max_deg: float

    def __post_init__(self):
        if not (self.theta_min_deg <= self.theta_max_deg and self.phi_min_deg <= self.phi_max_deg):
            raise GridError(f"empty sensing area {self}")

    def bounds(self) -> tuple[float, float, float, float]:
        return (self.theta_min_deg, self.theta_max_deg, self.phi_min_deg, self.phi_max_deg)

    def indices(self, grid: AngleGrid) -> tuple[np.ndarray, np.ndarray]:
        """Grid indices of the closed area (theta ids, phi ids); raises if misaligned."""
        t0 = grid.theta_index(self.theta_min_deg)
        t1 = grid.theta_index(self.theta_max_deg)
        p0 = grid.phi_index(self.phi_min_deg)
        p1 = grid.phi_index(self.phi_max_deg)
        return np.arange(t0, t1 + 1), np.arange(p0, p1 + 1)

    def contains(self, theta_deg: float, phi_deg: float) -> bool:
        return (self.theta_min_deg <= theta_deg <= self.theta_max_deg
                and self.phi_min_deg <= phi_deg <= self.phi_max_deg)

    def label(self) -> str:
        return (f"theta[{self.theta_min_deg:g}:{self.theta_max_deg:g}]"
                f"_phi[{self.phi_min_deg:g}:{self.phi_max_deg:g}]")


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CRLBResult:
    """2x2 CRLB matrix (rad^2) at one angle plus the scalar objective sqrt(Tr C)."""

    matrix: np.ndarray
    objective: float
    angle_deg: tuple[float, float]
    snr_linear: float
    singular: bool = False

    @property
    def c_theta_theta(self) -> float:
        return float(self.matrix[0, 0])

    @property
    def c_phi_phi(self) -> float:
        return float(self.matrix[1, 1])


@dataclass(frozen=True)
class CRLBMap:
    """Per-angle CRLB table over a sensing area with its worst-case objective."""

    area: SensingArea
    snr_linear: float
    theta_deg: np.ndarray
    phi_deg: np.ndarray
    c_tt: np.ndarray
    c_tp: np.ndarray
    c_pp: np.ndarray
    objective: np.ndarray
    singular: np.ndarray
    worst: float
    worst_angle: tuple[float, float]

    @property
    def n_points(self) -> int:
        return self.theta_deg.size


# ---------------------------------------------------------------------------
# finite-difference stencil
# ---------------------------------------------------------------------------

def _step_multiple(grid: AngleGrid, fd_step_deg: float | None) -> int:
    if fd_step_deg is None:
        return 1
    mult = fd_step_deg / grid.step_deg
    s = int(round(mult))
    if s < 1 or abs(mult - s) > 1e-9:
        raise GridError(
            f"fd step {fd_step_deg} deg must be a positive multiple of the grid step {grid.step_deg}"
        )
    return s


def fd_stencil(grid: AngleGrid, theta_idx: np.ndarray, phi_idx: np.ndarray, step_mult: int):
    """Neighbour indices and inverse denominators (1/rad) for FD derivatives.

    Central differences in the interior; one-sided at theta = 0/180 and at
    phi edges of partial grids; modular wrap on full-circle phi grids.
    """
    s = step_mult
    h = s * grid.step_rad()
    nt, npph = grid.n_theta, grid.n_phi
    if nt - 1 < s:
        raise GridError("grid too small in theta for the requested fd step")

    it = np.asarray(theta_idx, dtype=np.int64)
    ip = np.asarray(phi_idx, dtype=np.int64)

    itp = it + s
    itm = it - s
    inv_dt = np.full(it.shape, 1.0 / (2.0 * h))
    lo = itm < 0
    hi = itp > nt - 1
    itp = np.where(lo, it + s, itp)
    itm = np.where(lo, it, itm)
    itp = np.where(hi, it, itp)
    itm = np.where(hi, it - s, itm)
    inv_dt = np.where(lo | hi, 1.0 / h, inv_dt)

    if grid.phi_wraps:
        ipp = (ip + s) % npph
        ipm = (ip - s) % npph
        inv_dp = np.full(ip.shape, 1.0 / (2.0 * h))
    else:
        if npph - 1 < s:
            raise GridError("grid too small in phi for the requested fd step")
        ipp = ip + s
        ipm = ip - s
        inv_dp = np.full(ip.shape, 1.0 / (2.0 * h))
        lo = ipm < 0
        hi = ipp > npph - 1
        ipp = np.where(lo, ip + s, ipp)
        ipm = np.where(lo, ip, ipm)
        ipp = np.where(hi, ip, ipp)
        ipm = np.where(hi, ip - s, ipm)
        inv_dp = np.where(lo | hi, 1.0 / h, inv_dp)

    return itp, itm, inv_dt, ipp, ipm, inv_dp


def _stacked(patterns: PatternSet) -> np.ndarray:
    """(2N, n_theta, n_phi) view: theta-pol ports then phi-pol ports."""
    d = patterns.data
    return d.reshape(2 * d.shape[1], d.shape[2], d.shape[3])


# ---------------------------------------------------------------------------
# core operations
# ---------------------------------------------------------------------------

def steering_jacobian(patterns: PatternSet, angle_deg: tuple[float, float],
                      fd_step_deg: float | None = None) -> np.ndarray:
    """Finite-difference Jacobian J (2N x 2): columns are d f/d theta, d f/d phi.

    f stacks the theta-pol steering row followed by the phi-pol row;
    derivatives are per radian.
    """
    grid = patterns.grid
    it = np.array([grid.theta_index(angle_deg[0])])
    ip = np.array([grid.phi_index(angle_deg[1])])
    s = _step_multiple(grid, fd_step_deg)
    itp, itm, inv_dt, ipp, ipm, inv_dp = fd_stencil(grid, it, ip, s)
    e = _stacked(patterns)
    dth = (e[:, itp[0], ip[0]] - e[:, itm[0], ip[0]]) * inv_dt[0]
    dph = (e[:, it[0], ipp[0]] - e[:, it[0], ipm[0]]) * inv_dp[0]
    return np.stack([dth, dph], axis=1)


def steering_row(patterns: PatternSet, angle_deg: tuple[float, float]) -> np.ndarray:
    """The 2N steering row f = [e_theta, e_phi] at a grid angle."""
    E = patterns.at(*angle_deg)
    return np.concatenate([E[0], E[1]])


def projection_matrix(f: np.ndarray) -> np.ndarray:
    """D = I - f^H f / ||f||^2 for a steering row f; annihilates f^H."""
    f = np.asarray(f, dtype=np.complex128).reshape(-1)
    nf2 = float(np.vdot(f, f).real)
    if nf2 <= 0.0:
        raise ValueError("zero steering vector has no projection complement")
    return np.eye(f.size, dtype=np.complex128) - np.outer(f.conj(), f) / nf2


def crlb_matrix(patterns: PatternSet, angle_deg: tuple[float, float], snr_linear: float,
                fd_step_deg: float | None = None) -> CRLBResult:
    """CRLB matrix at one grid angle; singular Fisher information yields +inf entries."""
    if not (snr_linear > 0):
        raise ValueError(f"snr must be positive, got {snr_linear}")
    grid = patterns.grid
    it = np.array([grid.theta_index(angle_deg[0])])
    ip = np.array([grid.phi_index(angle_deg[1])])
    s = _step_multiple(grid, fd_step_deg)
    sten = fd_stencil(grid, it, ip, s)
    c_tt, c_tp, c_pp, obj, sing = kernels.fim_sweep(_stacked(patterns), it, ip, *sten, snr_linear)
    C = np.array([[c_tt[0], c_tp[0]], [c_tp[0], c_pp[0]]])
    return CRLBResult(matrix=C, objective=float(obj[0]),
                      angle_deg=(float(angle_deg[0]), float(angle_deg[1])),
                      snr_linear=float(snr_linear), singular=bool(sing[0]))


def objective(C: np.ndarray) -> float:
    """Scalar solid-angle error measure sqrt(c_tt + c_pp); +inf propagates."""
    C = np.asarray(C)
    return float(np.sqrt(C[0, 0] + C[1, 1]))


def crlb_map(patterns: PatternSet, area: SensingArea, snr_linear: float,
             fd_step_deg: float | None = None) -> CRLBMap:
    """Evaluate the CRLB at every grid point of the area; track the worst objective.

    Points run row-major (theta outer); ties on the maximum break toward the
    lowest grid index, so the reduction is order-fixed and deterministic.
    """
    if not (snr_linear > 0):
        raise ValueError(f"snr must be positive, got {snr_linear}")
    grid = patterns.grid
    t_ids, p_ids = area.indices(grid)
    it = np.repeat(t_ids, p_ids.size)
    ip = np.tile(p_ids, t_ids.size)
    s = _step_multiple(grid, fd_step_deg)
    sten = fd_stencil(grid, it, ip, s)
    c_tt, c_tp, c_pp, obj, sing = kernels.fim_sweep(_stacked(patterns), it, ip, *sten, snr_linear)

    worst_i = int(np.argmax(obj))          # first maximum wins on ties
    th = grid.theta_start_deg + grid.step_deg * it
    ph = grid.phi_start_deg + grid.step_deg * ip
    return CRLBMap(
        area=area, snr_linear=float(snr_linear),
        theta_deg=th, phi_deg=ph,
        c_tt=c_tt, c_tp=c_tp, c_pp=c_pp,
        objective=obj, singular=sing,
        worst=float(obj[worst_i]),
        worst_angle=(float(th[worst_i]), float(ph[worst_i])),
    )


# ---------------------------------------------------------------------------
# closed-form UPA bound
# ---------------------------------------------------------------------------

def upa_crlb_closed_form(n_y: int, n_z: int, spacing_over_lambda: float,
                         angle_deg: tuple[float, float], snr_linear: float) -> CRLBResult:
    """Closed-form CRLB of the N_Y x N_Z uniform planar array.

    c = [[B_Y s^2 cp^2, -B_Y c s cp sp], [., B_Z s^2 + B_Y c^2 sp^2]]
        / (2 k^4 B_Y B_Z s^2 cp^2 SNR),
    with B_Y = N_Y(N_Y^2-1)/12, B_Z = N_Z(N_Z^2-1)/12 and k = 2 pi d/lambda.
    Diverges at endfire (sin(theta) cos(phi) = 0) and for single-row arrays.
    """
    if not (snr_linear > 0):
        raise ValueError(f"snr must be positive, got {snr_linear}")
    theta_deg, phi_deg = angle_deg
    B_Y = n_y * (n_y**2 - 1) / 12.0
    B_Z = n_z * (n_z**2 - 1) / 12.0
    k = 2.0 * math.pi * spacing_over_lambda

    endfire = (theta_deg % 180.0 == 0.0) or (abs(phi_deg) % 180.0 == 90.0)
    if endfire or B_Y == 0.0 or B_Z == 0.0:
        C = np.full((2, 2), np.inf)
        return CRLBResult(matrix=C, objective=np.inf, angle_deg=(float(theta_deg), float(phi_deg)),
                          snr_linear=float(snr_linear), singular=True)

    th = math.radians(theta_deg)
    ph = math.radians(phi_deg)
    s, c = math.sin(th), math.cos(th)
    sp, cp = math.sin(ph), math.cos(ph)
    den = 2.0 * k**4 * B_Y * B_Z * s * s * cp * cp * snr_linear
    b_tt = B_Y * s * s * cp * cp
    b_tp = -B_Y * c * s * cp * sp
    b_pp = B_Z * s * s + B_Y * c * c * sp * sp
    C = np.array([[b_tt, b_tp], [b_tp, b_pp]]) / den
    return CRLBResult(matrix=C, objective=objective(C),
                      angle_deg=(float(theta_deg), float(phi_deg)),
                      snr_linear=float(snr_linear), singular=False)


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def export_crlb_map(m: CRLBMap, path) -> None:
    """Tabular text dump: one row per grid point, +inf rendered as 'inf'."""
    with open(path, "w") as fh:
        fh.write("theta_deg,phi_deg,c_tt,c_tp,c_pp,objective\n")
        for i in range(m.n_points):
            row = (m.theta_deg[i], m.phi_deg[i], m.c_tt[i], m.c_tp[i], m.c_pp[i], m.objective[i])
            fh.write(",".join(_fmt(v) for v in row) + "\n")
