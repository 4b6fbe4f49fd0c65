"""Energy-conserving time integration and trajectory storage.

The scheme is the conservative potential-difference discretization

    (u+ - 2u0 + u-)/dt^2 = Lap_h u0 - G(u+, u-),
    G(a,b) = (|a|^(p+1) - |b|^(p+1)) / ((p+1)(a-b)),

which conserves the discrete energy returned by discrete_energy() exactly
(up to the nonlinear-solve tolerance).  Each stored frame keeps two
consecutive levels so u_t is reconstructible at second order; the frame
time is the midpoint of the pair.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import ConfigError, NumericalFault, PaddingError
from .fields import FieldState, Grid, ModelParams, make_grid

SNAPSHOT_MAGIC = b"NLWT"
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class SolverParams:
    dt: float
    cfl: float
    newton_tol: float = 1e-13
    newton_max_iter: int = 60
    record_stride: int = 1

    def __post_init__(self):
        if not (0.0 < self.cfl <= 0.95):
            raise ConfigError(f"cfl must lie in (0, 0.95], got {self.cfl}")
        if self.dt <= 0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.record_stride < 1:
            raise ConfigError("record_stride must be >= 1")


def solver_params(grid: Grid, cfl: float = 0.5, **kwargs) -> SolverParams:
    """SolverParams with dt tied to the grid: dt = cfl * dx."""
    return SolverParams(dt=cfl * grid.dx, cfl=cfl, **kwargs)


def nonlinear_difference_quotient(a, b, p: float):
    """Potential difference quotient G(a,b); G(a,a) = |a|^(p-1) a."""
    if p <= 1.0:
        raise ConfigError(f"need p > 1, got {p}")
    return kernels.diff_quotient(a, b, p)


def step(u_prev: np.ndarray, u_curr: np.ndarray, grid: Grid,
         model: ModelParams, solver: SolverParams) -> np.ndarray:
    """Advance one time level; boundary points stay exactly zero."""
    if u_prev.shape != (grid.n_points,) or u_curr.shape != (grid.n_points,):
        raise ConfigError("levels must match the grid")
    if not model.defocusing_on:
        return kernels.linear_step(u_prev, u_curr, solver.dt, grid.dx)
    u_next, ok = kernels.nonlinear_step(
        u_prev, u_curr, solver.dt, grid.dx, model.p,
        solver.newton_tol, solver.newton_max_iter)
    if not ok:
        raise NumericalFault(
            f"point solve failed to reach {solver.newton_tol:g} within "
            f"{solver.newton_max_iter} iterations")
    return u_next


def discrete_energy(u_prev: np.ndarray, u_curr: np.ndarray, grid: Grid,
                    model: ModelParams, solver: SolverParams) -> float:
    """The exactly conserved energy of a consecutive level pair."""
    return kernels.discrete_energy(u_prev, u_curr, solver.dt, grid.dx,
                                   model.p, model.defocusing_on)


class Trajectory:
    """Append-only record of level pairs; immutable once built.

    Frame i holds consecutive levels (levels[i,0], levels[i,1]) at times
    t_i -/+ dt/2 where t_i = times[i] is the pair midpoint.  Evolve output
    has uniform spacing record_stride*dt; mirrored/merged trajectories may
    carry one non-uniform gap, so all consumers difference explicit times.
    """

    def __init__(self, grid: Grid, model: ModelParams, solver: SolverParams,
                 times: np.ndarray, levels: np.ndarray,
                 energies: np.ndarray):
        self.grid = grid
        self.model = model
        self.solver = solver
        self.times = np.asarray(times, dtype=np.float64)
        self.levels = np.asarray(levels, dtype=np.float64)
        self.energies = np.asarray(energies, dtype=np.float64)
        if self.levels.shape != (self.times.size, 2, grid.n_points):
            raise ConfigError("trajectory arrays are inconsistent")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("frame times must be strictly increasing")
        for arr in (self.times, self.levels, self.energies):
            arr.setflags(write=False)

    @property
    def n_frames(self) -> int:
        return self.times.size

    @property
    def t_span(self) -> tuple[float, float]:
        return (float(self.times[0]), float(self.times[-1]))

    def frame_u(self, i: int) -> np.ndarray:
        """Field at the frame midpoint (pair average, second order)."""
        return 0.5 * (self.levels[i, 0] + self.levels[i, 1])

    def frame_ut(self, i: int) -> np.ndarray:
        """Time derivative at the frame midpoint (centered difference)."""
        return (self.levels[i, 1] - self.levels[i, 0]) / self.solver.dt

    def linf_series(self) -> np.ndarray:
        mid = 0.5 * (self.levels[:, 0, :] + self.levels[:, 1, :])
        return np.max(np.abs(mid), axis=1)


def _taylor_second_level(state: FieldState, model: ModelParams,
                         dt: float) -> np.ndarray:
    """Second-order start: u(dt) = u + dt*ut + dt^2/2 * u_tt(0)."""
    u, ut = state.u, state.ut
    dx = state.grid.dx
    u1 = np.zeros_like(u)
    lap = (u[2:] - 2.0 * u[1:-1] + u[:-2]) / (dx * dx)
    utt = lap.copy()
    if model.defocusing_on:
        ui = u[1:-1]
        utt -= np.abs(ui) ** (model.p - 1.0) * ui
    u1[1:-1] = u[1:-1] + dt * ut[1:-1] + 0.5 * dt * dt * utt
    return u1


def check_padding(state: FieldState, t_final: float) -> None:
    """Light cone from the support must stay >= 1 away from the boundary."""
    lo, hi = state.support_hull()
    g = state.grid
    if lo - (t_final + 1.0) < g.x_min or hi + (t_final + 1.0) > g.x_max:
        raise PaddingError(
            f"support [{lo:g}, {hi:g}] + light cone to t={t_final:g} "
            f"exceeds the grid [{g.x_min:g}, {g.x_max:g}]")


def evolve(initial: FieldState, t_final: float, model: ModelParams,
           solver: SolverParams, observers=()) -> Trajectory:
    """Run the conservative scheme to t >= t_final, recording level pairs.

    Observers are called as observer(frame_index, t_mid, u_prev, u_curr)
    at every recorded frame.  The step count is rounded up so the last
    recorded pair lands exactly on the stride.
    """
    if t_final <= 0:
        raise ConfigError("t_final must be positive")
    grid = initial.grid
    dt = solver.dt
    if abs(dt - solver.cfl * grid.dx) > 1e-12 * dt:
        raise ConfigError("solver dt does not equal cfl * dx for this grid")
    check_padding(initial, t_final)

    stride = solver.record_stride
    n_levels = max(1, int(round(t_final / dt)))
    n_levels = 1 + stride * math.ceil((n_levels - 1) / stride)

    u0 = initial.u.copy()
    u1 = _taylor_second_level(initial, model, dt)

    times, pairs, energies = [], [], []

    def record(k: int, a: np.ndarray, b: np.ndarray) -> None:
        t_mid = (k + 0.5) * dt
        if not np.all(np.isfinite(b)):
            raise NumericalFault(f"NaN detected at step {k + 1}")
        times.append(t_mid)
        pairs.append(np.stack((a, b)))
        energies.append(discrete_energy(a, b, grid, model, solver))
        for obs in observers:
            obs(len(times) - 1, t_mid, a, b)

    record(0, u0, u1)
    for k in range(1, n_levels):
        u2 = step(u0, u1, grid, model, solver)
        u0, u1 = u1, u2
        if k % stride == 0:
            record(k, u0, u1)

    return Trajectory(grid, model, solver,
                      np.array(times), np.stack(pairs), np.array(energies))


def evolve_from_pair(u_a: np.ndarray, u_b: np.ndarray, n_steps: int,
                     grid: Grid, model: ModelParams,
                     solver: SolverParams) -> tuple[np.ndarray, np.ndarray]:
    """Advance a raw level pair n_steps times; returns the final pair.

    Swapping the pair order reverses time exactly (the scheme is symmetric
    in u_prev <-> u_next), which the time-reversal tests exercise.
    """
    u0, u1 = u_a.copy(), u_b.copy()
    for _ in range(n_steps):
        u2 = step(u0, u1, grid, model, solver)
        u0, u1 = u1, u2
    return u0, u1


def mirror_concat(backward: Trajectory, forward: Trajectory) -> Trajectory:
    """Glue a velocity-reversed run and a forward run into one span.

    The backward trajectory is mapped t -> -t with each level pair swapped
    (time reversal flips u_t).  Frame spacing is uniform except for the
    single junction gap of dt at t = 0.
    """
    if backward.grid is not forward.grid and backward.grid != forward.grid:
        raise ConfigError("mirrored runs must share a grid")
    times = np.concatenate((-backward.times[::-1], forward.times))
    back_levels = backward.levels[::-1, ::-1, :]
    levels = np.concatenate((back_levels, forward.levels))
    energies = np.concatenate((backward.energies[::-1], forward.energies))
    return Trajectory(forward.grid, forward.model, forward.solver,
                      times, levels, energies)


# --- snapshot file format ------------------------------------------------
#
# Little-endian binary, layout:
#   offset 0   : 4s   magic "NLWT"
#   offset 4   : u32  format version (1)
#   offset 8   : f64  x_min, f64 x_max, f64 dx
#   offset 32  : u64  n_points
#   offset 40  : f64  p
#   offset 48  : u32  defocusing_on, u32 record_stride
#   offset 56  : f64  dt, f64 cfl, f64 newton_tol
#   offset 80  : u32  newton_max_iter, u32 reserved (0)
#   offset 88  : u64  frame_count
#   offset 96  : frames, each = f64 t_mid, n_points f64 (earlier level),
#                n_points f64 (later level)
#
# Energies are recomputed on read, so a write/read round trip is bit-exact
# in times and levels and value-identical in energies.

_HEADER = struct.Struct("<4sI3dQdIIdddII Q".replace(" ", ""))


def write_snapshot(traj: Trajectory, path) -> None:
    g, m, s = traj.grid, traj.model, traj.solver
    header = _HEADER.pack(
        SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
        g.x_min, g.x_max, g.dx, g.n_points,
        m.p, int(m.defocusing_on), s.record_stride,
        s.dt, s.cfl, s.newton_tol, s.newton_max_iter, 0,
        traj.n_frames)
    with open(path, "wb") as fh:
        fh.write(header)
        for i in range(traj.n_frames):
            fh.write(struct.pack("<d", traj.times[i]))
            fh.write(traj.levels[i, 0].astype("<f8").tobytes())
            fh.write(traj.levels[i, 1].astype("<f8").tobytes())


def read_snapshot(path) -> Trajectory:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) < _HEADER.size:
            raise ConfigError(f"truncated snapshot file {path}")
        (magic, version, x_min, x_max, dx, n_points, p, defocusing,
         stride, dt, cfl, tol, max_iter, _reserved, n_frames) = _HEADER.unpack(raw)
        if magic != SNAPSHOT_MAGIC:
            raise ConfigError(f"{path} is not a trajectory snapshot")
        if version != SNAPSHOT_VERSION:
            raise ConfigError(f"unsupported snapshot version {version}")
        grid = make_grid(x_min, x_max, dx)
        if grid.n_points != n_points:
            raise ConfigError("snapshot grid descriptor is inconsistent")
        model = ModelParams(p=p, defocusing_on=bool(defocusing))
        solver = SolverParams(dt=dt, cfl=cfl, newton_tol=tol,
                              newton_max_iter=max_iter, record_stride=stride)
        times = np.empty(n_frames)
        levels = np.empty((n_frames, 2, n_points))
        frame_bytes = 8 + 2 * 8 * n_points
        for i in range(n_frames):
            buf = fh.read(frame_bytes)
            if len(buf) < frame_bytes:
                raise ConfigError(f"truncated snapshot file {path}")
            times[i] = struct.unpack_from("<d", buf)[0]
            flat = np.frombuffer(buf, dtype="<f8", count=2 * n_points, offset=8)
            levels[i] = flat.reshape(2, n_points)
    energies = np.array([
        kernels.discrete_energy(levels[i, 0], levels[i, 1], dt, grid.dx,
                                p, bool(defocusing))
        for i in range(n_frames)])
    return Trajectory(grid, model, solver, times, levels, energies)
