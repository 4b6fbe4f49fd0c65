"""Stress-energy densities, flux functionals, and parallelogram machinery.

All quantities are evaluated on stored trajectory frames: u is the level
pair average and u_t the centered pair difference, both second order at
the frame midpoint.  Spacetime integrals use the rectangle rule in x and
the trapezoid rule over the (possibly non-uniform) frame times.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, PaddingError
from .fields import spatial_derivative
from .integrator import Trajectory


@dataclass(frozen=True)
class StressEnergyFields:
    """Gridded T00, T01, T11 and the null form Q at one frame time."""

    t: float
    xs: np.ndarray
    T00: np.ndarray
    T01: np.ndarray
    T11: np.ndarray
    Q: np.ndarray


def densities_from_arrays(u: np.ndarray, ut: np.ndarray, dx: float, p: float,
                          include_potential: bool = True,
                          t: float = 0.0, xs=None) -> StressEnergyFields:
    ux = spatial_derivative(u, dx)
    kin = 0.5 * ut * ut + 0.5 * ux * ux
    if include_potential:
        pot = np.abs(u) ** (p + 1.0) / (p + 1.0)
    else:
        pot = np.zeros_like(u)
    T00 = kin + pot
    T11 = kin - pot
    T01 = ut * ux
    Q = -2.0 * ut * ut + 2.0 * ux * ux + 2.0 * (p + 1.0) * pot
    return StressEnergyFields(t=t, xs=xs, T00=T00, T01=T01, T11=T11, Q=Q)


def densities(traj: Trajectory, frame: int) -> StressEnergyFields:
    """Tensor densities at a stored frame."""
    return densities_from_arrays(
        traj.frame_u(frame), traj.frame_ut(frame), traj.grid.dx,
        traj.model.p, traj.model.defocusing_on,
        t=float(traj.times[frame]), xs=traj.grid.xs)


def _time_derivative_3pt(f_prev, f_mid, f_next, t_prev, t_mid, t_next):
    """Second-order centered derivative on a possibly non-uniform stencil."""
    hm = t_mid - t_prev
    hp = t_next - t_mid
    return (hm * hm * f_next + (hp * hp - hm * hm) * f_mid
            - hp * hp * f_prev) / (hp * hm * (hp + hm))


def conservation_residuals(traj: Trajectory, frame: int) -> tuple[float, float]:
    """Max-norm residuals of d/dt T00 = d/dx T01 and d/dt T01 = d/dx T11."""
    if not 0 < frame < traj.n_frames - 1:
        raise ConfigError("frame needs neighbors on both sides")
    prev = densities(traj, frame - 1)
    mid = densities(traj, frame)
    nxt = densities(traj, frame + 1)
    tp, tm, tn = traj.times[frame - 1], traj.times[frame], traj.times[frame + 1]
    dx = traj.grid.dx

    dt_T00 = _time_derivative_3pt(prev.T00, mid.T00, nxt.T00, tp, tm, tn)
    dt_T01 = _time_derivative_3pt(prev.T01, mid.T01, nxt.T01, tp, tm, tn)
    dx_T01 = spatial_derivative(mid.T01, dx)
    dx_T11 = spatial_derivative(mid.T11, dx)

    r_energy = float(np.max(np.abs(dt_T00 - dx_T01)[1:-1]))
    r_momentum = float(np.max(np.abs(dt_T01 - dx_T11)[1:-1]))
    return r_energy, r_momentum


def _sample_along_ray(traj: Trajectory, frame: int, x: float) -> float:
    grid = traj.grid
    if not grid.x_min <= x <= grid.x_max:
        raise PaddingError(
            f"ray position x={x:g} leaves the grid at t={traj.times[frame]:g}")
    u = traj.frame_u(frame)
    return float(np.interp(x, grid.xs, u))


def light_ray_flux(traj: Trajectory, x0: float, direction: int) -> float:
    """Trapezoid integral of |u|^(p+1) along the ray x = x0 + direction*t."""
    if direction not in (-1, 1):
        raise ConfigError("direction must be +1 or -1")
    p = traj.model.p
    vals = np.empty(traj.n_frames)
    for i in range(traj.n_frames):
        u = _sample_along_ray(traj, i, x0 + direction * traj.times[i])
        vals[i] = abs(u) ** (p + 1.0)
    return float(np.trapezoid(vals, traj.times))


@dataclass(frozen=True)
class ParallelogramSpec:
    """Slab |t - t0| <= T, |x - x0 - v(t - t0)| <= R with T >= R >= 1."""

    t0: float
    x0: float
    v: float
    R: float
    T: float

    def __post_init__(self):
        if not self.T >= self.R >= 1.0:
            raise ConfigError(f"need T >= R >= 1, got R={self.R}, T={self.T}")


def _frames_covering(traj: Trajectory, t_lo: float, t_hi: float) -> np.ndarray:
    """Frame indices inside [t_lo, t_hi]; the span must be recorded.

    Half a frame gap of slack is allowed at each end so a span that ends
    exactly at the last midpoint time still counts as covered.
    """
    times = traj.times
    gap = float(np.max(np.diff(times))) if times.size > 1 else 0.0
    if times[0] > t_lo + gap or times[-1] < t_hi - gap:
        raise PaddingError(
            f"requested span [{t_lo:g}, {t_hi:g}] not covered by recorded "
            f"times [{times[0]:g}, {times[-1]:g}]")
    idx = np.nonzero((times >= t_lo) & (times <= t_hi))[0]
    if idx.size < 2:
        raise ConfigError("span covers fewer than two frames")
    return idx


def parallelogram_integral(traj: Trajectory, spec: ParallelogramSpec) -> float:
    """Sharp-cutoff integral of |u|^(p+1) over the moving slab."""
    grid = traj.grid
    p = traj.model.p
    idx = _frames_covering(traj, spec.t0 - spec.T, spec.t0 + spec.T)
    xs = grid.xs
    slices = np.empty(idx.size)
    for k, i in enumerate(idx):
        c = spec.x0 + spec.v * (traj.times[i] - spec.t0)
        if c - spec.R < grid.x_min or c + spec.R > grid.x_max:
            raise PaddingError("slab leaves the grid in x")
        mask = np.abs(xs - c) <= spec.R
        u = traj.frame_u(i)[mask]
        slices[k] = grid.dx * np.sum(np.abs(u) ** (p + 1.0))
    return float(np.trapezoid(slices, traj.times[idx]))


def envelope_value(R: float, T: float) -> float:
    """The two-term bound shape sqrt(R T) + T/R."""
    return math.sqrt(R * T) + T / R


# --- C^2 window -----------------------------------------------------------

def _smoothstep(s):
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def _smoothstep_d1(s):
    return 30.0 * s * s * (1.0 - s) * (1.0 - s)


def _smoothstep_d2(s):
    return 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s)


def _smoothstep_int(s):
    # integral of the quintic smoothstep from 0 to s
    return s * s * s * s * (2.5 + s * (-3.0 + s))


class WindowFunction:
    """Even C^2 bump: 1 on [-1,1], quintic flank on 1<=|x|<=2, 0 beyond.

    psi is the exact antiderivative, with total mass psi(2) = 3.
    """

    mass = 3.0

    def chi(self, x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        s = np.clip(ax - 1.0, 0.0, 1.0)
        out = np.where(ax >= 2.0, 0.0, 1.0 - _smoothstep(s))
        return out if out.ndim else float(out)

    def chi_d1(self, x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        on_flank = (ax > 1.0) & (ax < 2.0)
        s = np.clip(ax - 1.0, 0.0, 1.0)
        out = np.where(on_flank, -np.sign(x) * _smoothstep_d1(s), 0.0)
        return out if out.ndim else float(out)

    def chi_d2(self, x):
        x = np.asarray(x, dtype=np.float64)
        ax = np.abs(x)
        on_flank = (ax > 1.0) & (ax < 2.0)
        s = np.clip(ax - 1.0, 0.0, 1.0)
        out = np.where(on_flank, -_smoothstep_d2(s), 0.0)
        return out if out.ndim else float(out)

    def psi(self, x):
        x = np.asarray(x, dtype=np.float64)
        s_lo = np.clip(-x - 1.0, 0.0, 1.0)
        s_hi = np.clip(x - 1.0, 0.0, 1.0)
        out = np.where(
            x <= -2.0, 0.0,
            np.where(x <= -1.0, x + 1.5 + _smoothstep_int(s_lo),
                     np.where(x < 1.0, x + 1.5,
                              np.where(x < 2.0,
                                       2.5 + s_hi - _smoothstep_int(s_hi),
                                       self.mass))))
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class WindowedFluxes:
    """The three windowed spacetime integrals; i3 comes in two evaluations."""

    i1: float
    i2: float
    i3_direct: float
    i3_by_parts: float


def windowed_flux_functionals(traj: Trajectory, spec: ParallelogramSpec,
                              window: WindowFunction) -> WindowedFluxes:
    """Window-weighted integrals of (T11+vT01), (T01+vT00), and Q.

    The Q integral is evaluated both directly and through integration by
    parts, applying the wave operator to the window analytically:

      box W = -chi''(t/T) chi2 / T^2 + 2v chi'(t/T) chi2' / (TR)
              + (1 - v^2) chi1 chi2'' / R^2.
    """
    grid = traj.grid
    v, R, T = spec.v, spec.R, spec.T
    idx = _frames_covering(traj, spec.t0 - 2.0 * T, spec.t0 + 2.0 * T)
    i1_t = np.empty(idx.size)
    i2_t = np.empty(idx.size)
    i3_t = np.empty(idx.size)
    i3p_t = np.empty(idx.size)
    xs = grid.xs
    for k, i in enumerate(idx):
        tt = (traj.times[i] - spec.t0)
        c = spec.x0 + v * tt
        if c - 2.0 * R < grid.x_min or c + 2.0 * R > grid.x_max:
            raise PaddingError("window support leaves the grid in x")
        chi1 = window.chi(tt / T)
        xarg = (xs - spec.x0 - v * tt) / R
        chi2 = window.chi(xarg)
        f = densities(traj, i)
        w = chi1 * chi2
        i1_t[k] = grid.dx * np.sum(w * (f.T11 + v * f.T01))
        i2_t[k] = grid.dx * np.sum(w * (f.T01 + v * f.T00))
        i3_t[k] = grid.dx * np.sum(w * f.Q)
        box_w = (-window.chi_d2(tt / T) / (T * T) * chi2
                 + 2.0 * v / (T * R) * window.chi_d1(tt / T) * window.chi_d1(xarg)
                 + (1.0 - v * v) / (R * R) * chi1 * window.chi_d2(xarg))
        u = traj.frame_u(i)
        i3p_t[k] = grid.dx * np.sum(u * u * box_w)
    ts = traj.times[idx]
    return WindowedFluxes(
        i1=float(np.trapezoid(i1_t, ts)),
        i2=float(np.trapezoid(i2_t, ts)),
        i3_direct=float(np.trapezoid(i3_t, ts)),
        i3_by_parts=float(np.trapezoid(i3p_t, ts)))


# --- pointwise algebraic identities ---------------------------------------

def case3_identity_residual(ut, ux, u, v, p):
    """|LHS - RHS| of the timelike-case linear-combination identity.

    LHS = (T11 + v T01) + v (T01 + v T00) + (1-v^2)/4 * Q,
    RHS = (v ut + ux)^2 + (p-1)(1-v^2)/(2(p+1)) |u|^(p+1);
    exact algebra, so the residual is pure roundoff.
    """
    ut = np.asarray(ut, dtype=np.float64)
    ux = np.asarray(ux, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    pot = np.abs(u) ** (p + 1.0)
    kin = 0.5 * ut * ut + 0.5 * ux * ux
    T00 = kin + pot / (p + 1.0)
    T11 = kin - pot / (p + 1.0)
    T01 = ut * ux
    Q = -2.0 * ut * ut + 2.0 * ux * ux + 2.0 * pot
    lhs = (T11 + v * T01) + v * (T01 + v * T00) + 0.25 * (1.0 - v * v) * Q
    rhs = (v * ut + ux) ** 2 + (p - 1.0) * (1.0 - v * v) / (2.0 * (p + 1.0)) * pot
    out = np.abs(lhs - rhs)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class CaseBoundsReport:
    case: int
    margin: float
    holds: bool


def case_bounds_check(ut: float, ux: float, u: float, v: float,
                      p: float) -> CaseBoundsReport:
    """Pointwise spacelike / lightlike lower bounds on the flux densities.

    v >= 1:  |u|^(p+1)/(p+1) <= T01 + v T00.
    0 < v < 1:  v|u|^(p+1)/(p+1) <= (T01 + v T00) + (1-v) T00, which is
    exact algebra (the slack is (ut+ux)^2/2 + (1-v)|u|^(p+1)/(p+1)).
    """
    pot = abs(u) ** (p + 1.0) / (p + 1.0)
    T00 = 0.5 * ut * ut + 0.5 * ux * ux + pot
    T01 = ut * ux
    scale = 1.0 + T00
    if v >= 1.0:
        margin = (T01 + v * T00) - pot
        return CaseBoundsReport(1, float(margin), bool(margin >= -1e-12 * scale))
    if v <= 0.0:
        raise ConfigError("case bounds are stated for v > 0")
    margin = (T01 + v * T00) + (1.0 - v) * T00 - v * pot
    return CaseBoundsReport(2, float(margin), bool(margin >= -1e-12 * scale))


# --- energy flux along a light ray ----------------------------------------

@dataclass(frozen=True)
class EnergyFluxCheck:
    times: np.ndarray
    half_line_energy: np.ndarray
    lhs: np.ndarray     # d/dt of the half-line energy
    rhs: np.ndarray     # T00 + T01 interpolated on the ray
    max_residual: float


def energy_flux_identity(traj: Trajectory, x0: float) -> EnergyFluxCheck:
    """Check d/dt int_{x < x0+t} T00 dx = (T00 + T01)(t, x0+t) frame-wise.

    The half-line energy interpolates the cumulative trapezoid of T00 at
    the moving cutoff, so it varies continuously with t; a sharp cell
    cutoff would leave an O(1) staircase error in the time derivative.
    """
    grid = traj.grid
    xs = grid.xs
    n = traj.n_frames
    half = np.empty(n)
    rhs = np.empty(n)
    for i in range(n):
        xr = x0 + traj.times[i]
        if not grid.x_min <= xr <= grid.x_max:
            raise PaddingError(f"ray exits the grid at t={traj.times[i]:g}")
        f = densities(traj, i)
        cum = np.concatenate(([0.0], np.cumsum(
            0.5 * (f.T00[1:] + f.T00[:-1]) * grid.dx)))
        half[i] = float(np.interp(xr, xs, cum))
        rhs[i] = float(np.interp(xr, xs, f.T00 + f.T01))
    lhs = np.gradient(half, traj.times)
    return EnergyFluxCheck(
        times=traj.times.copy(), half_line_energy=half, lhs=lhs, rhs=rhs,
        max_residual=float(np.max(np.abs(lhs - rhs))))


# --- CSV emission ----------------------------------------------------------

def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v
                             for v in row])


def write_ray_flux_csv(path, rows) -> None:
    """rows: (x0, direction, flux, bound, ratio)"""
    _write_csv(path, ["x0", "direction", "flux", "bound", "ratio"], rows)


def write_parallelogram_csv(path, rows) -> None:
    """rows: (t0, x0, v, R, T, integral, envelope, ratio)"""
    _write_csv(path, ["t0", "x0", "v", "R", "T", "integral", "envelope",
                      "ratio"], rows)


def write_conservation_csv(path, rows) -> None:
    """rows: (t, r_energy, r_momentum)"""
    _write_csv(path, ["t", "r_energy", "r_momentum"], rows)
