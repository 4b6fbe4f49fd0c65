"""Uniform grid, field states, initial data profiles, and norms.

States hold (u, u_t) on a uniform grid; u_x is always derived by central
differences.  All initial data is compactly supported strictly inside the
grid so Dirichlet boundaries are never reached by the light cone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, ResourceCapError

# Hard cap on (x_max - x_min)/dx.
MAX_INTERVALS = 10**8
# |u| below this multiple of max|u| counts as zero when locating the support.
SUPPORT_CUTOFF = 1e-14
# Zero cells required between the support and each grid end.
PAD_CELLS = 2


@dataclass(frozen=True)
class Grid:
    """Uniform spatial grid x_j = x_min + j*dx, j = 0..n_points-1."""

    x_min: float
    x_max: float
    dx: float
    n_points: int

    @cached_property
    def xs(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n_points)
        x.setflags(write=False)
        return x

    def x(self, i: int) -> float:
        return self.x_min + i * self.dx

    def index_of(self, x: float) -> int:
        return int(round((x - self.x_min) / self.dx))


def make_grid(x_min: float, x_max: float, dx: float) -> Grid:
    """Build a uniform grid tiling [x_min, x_max]; dx must divide the span."""
    for v in (x_min, x_max, dx):
        if not math.isfinite(v):
            raise ConfigError(f"non-finite grid parameter: {v!r}")
    if not x_min < x_max:
        raise ConfigError(f"need x_min < x_max, got [{x_min}, {x_max}]")
    if dx <= 0:
        raise ConfigError(f"need dx > 0, got {dx}")
    span = x_max - x_min
    if span / dx > MAX_INTERVALS:
        raise ResourceCapError(
            f"grid of {span / dx:.3g} intervals exceeds cap {MAX_INTERVALS:g}"
        )
    n_points = int(round(span / dx)) + 1
    if n_points < 3:
        raise ConfigError("grid needs at least 3 points")
    tiled = x_min + (n_points - 1) * dx
    scale = max(abs(x_min), abs(x_max), 1.0)
    if abs(tiled - x_max) > 1e-12 * scale:
        raise ConfigError(
            f"dx={dx} does not tile [{x_min}, {x_max}] (ends at {tiled})"
        )
    return Grid(float(x_min), float(x_max), float(dx), n_points)


@dataclass(frozen=True)
class ModelParams:
    """Nonlinearity exponent p > 1; defocusing_on=False drops |u|^(p-1)u."""

    p: float
    defocusing_on: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p > 1.0):
            raise ConfigError(f"need p > 1, got {self.p}")


class FieldState:
    """Immutable (u, u_t) pair on a grid at one time level."""

    __slots__ = ("grid", "t", "u", "ut")

    def __init__(self, grid: Grid, t: float, u: np.ndarray, ut: np.ndarray):
        u = np.array(u, dtype=np.float64)
        ut = np.array(ut, dtype=np.float64)
        if u.shape != (grid.n_points,) or ut.shape != (grid.n_points,):
            raise ConfigError("field arrays must match the grid size")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ut))):
            raise ConfigError("field contains NaN or Inf")
        for arr in (u, ut):
            if arr[0] != 0.0 or arr[-1] != 0.0:
                raise ConfigError("boundary values must be exactly zero")
            arr.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "t", float(t))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "ut", ut)

    def __setattr__(self, name, value):
        raise AttributeError("FieldState is immutable")

    def support_hull(self) -> tuple[float, float]:
        """Coordinates of the outermost nonzero samples (state's own support)."""
        nz = np.nonzero((self.u != 0.0) | (self.ut != 0.0))[0]
        if nz.size == 0:
            mid = 0.5 * (self.grid.x_min + self.grid.x_max)
            return (mid, mid)
        return (self.grid.x(int(nz[0])), self.grid.x(int(nz[-1])))


@dataclass(frozen=True)
class Profile:
    """Initial data recipe; see the gaussian/traveling/noise/zero factories."""

    kind: str
    amplitude: float = 1.0
    center: float = 0.0
    width: float = 1.0
    direction: int = 1
    seed: int = 0
    cutoff: float = 4.0


def gaussian_profile(amplitude: float, center: float, width: float) -> Profile:
    return Profile("gaussian", amplitude=amplitude, center=center, width=width)


def traveling_profile(amplitude: float, center: float, width: float,
                      direction: int) -> Profile:
    if direction not in (-1, 1):
        raise ConfigError(f"direction must be +1 or -1, got {direction}")
    return Profile("traveling", amplitude=amplitude, center=center,
                   width=width, direction=direction)


def noise_profile(seed: int, cutoff: float, amplitude: float) -> Profile:
    if cutoff <= 0:
        raise ConfigError("cutoff wavenumber must be positive")
    return Profile("filtered_noise", amplitude=amplitude, seed=seed,
                   cutoff=cutoff)


def zero_profile() -> Profile:
    return Profile("zero", amplitude=0.0)


def profile_support_radius(profile: Profile) -> float:
    """Half-width within which the profile exceeds the truncation cutoff."""
    if profile.kind == "zero":
        return 1.0
    if profile.kind in ("gaussian", "traveling"):
        return profile.width * math.sqrt(-math.log(SUPPORT_CUTOFF)) + profile.width
    if profile.kind == "filtered_noise":
        # envelope spans the whole requested box; caller sizes the grid
        return math.inf
    raise ConfigError(f"unknown profile kind {profile.kind!r}")


def _smooth_envelope(xs: np.ndarray, lo: float, hi: float, ramp: float) -> np.ndarray:
    """C^2 window: 0 outside [lo, hi], 1 on [lo+ramp, hi-ramp]."""
    s_up = np.clip((xs - lo) / ramp, 0.0, 1.0)
    s_dn = np.clip((hi - xs) / ramp, 0.0, 1.0)
    smooth = lambda s: s * s * s * (10.0 + s * (-15.0 + 6.0 * s))
    return smooth(s_up) * smooth(s_dn)


def initial_data(profile: Profile, grid: Grid) -> FieldState:
    """Sample a profile at t=0, truncated to compact support inside the grid."""
    xs = grid.xs
    n = grid.n_points
    if profile.kind == "zero":
        return FieldState(grid, 0.0, np.zeros(n), np.zeros(n))

    if profile.kind in ("gaussian", "traveling"):
        arg = (xs - profile.center) / profile.width
        u = profile.amplitude * np.exp(-arg * arg)
        ut = np.zeros(n)
        if profile.kind == "traveling":
            # ut = -direction * u_x with the same central differences the
            # solver uses, so the linear flow transports the bump exactly.
            ut[1:-1] = -profile.direction * (u[2:] - u[:-2]) / (2.0 * grid.dx)
    elif profile.kind == "filtered_noise":
        rng = np.random.default_rng(profile.seed)
        white = rng.standard_normal(n)
        freqs = np.fft.rfftfreq(n, d=grid.dx) * 2.0 * math.pi
        spec = np.fft.rfft(white)
        spec[freqs > profile.cutoff] = 0.0
        band = np.fft.irfft(spec, n)
        span = grid.x_max - grid.x_min
        margin = max(4 * grid.dx, 0.05 * span)
        env = _smooth_envelope(xs, grid.x_min + margin, grid.x_max - margin,
                               0.1 * span)
        peak = np.max(np.abs(band))
        if peak > 0:
            band = band / peak
        u = profile.amplitude * band * env
        ut = np.zeros(n)
    else:
        raise ConfigError(f"unknown profile kind {profile.kind!r}")

    return _truncate_support(grid, u, ut)


def _truncate_support(grid: Grid, u: np.ndarray, ut: np.ndarray) -> FieldState:
    peak = max(np.max(np.abs(u)), np.max(np.abs(ut)))
    if peak == 0.0:
        return FieldState(grid, 0.0, np.zeros_like(u), np.zeros_like(ut))
    cut = SUPPORT_CUTOFF * peak
    live = (np.abs(u) > cut) | (np.abs(ut) > cut)
    idx = np.nonzero(live)[0]
    lo, hi = int(idx[0]), int(idx[-1])
    if lo < PAD_CELLS or hi > grid.n_points - 1 - PAD_CELLS:
        raise ConfigError(
            "profile support touches the boundary padding; enlarge the grid"
        )
    u = u.copy()
    ut = ut.copy()
    u[:lo] = 0.0
    u[hi + 1:] = 0.0
    ut[:lo] = 0.0
    ut[hi + 1:] = 0.0
    return FieldState(grid, 0.0, u, ut)


@dataclass(frozen=True)
class Norms:
    h1: float
    l2: float
    linf: float
    lp1: float
    energy: float


def spatial_derivative(u: np.ndarray, dx: float) -> np.ndarray:
    """Central differences in the interior, one-sided at the ends."""
    return np.gradient(u, dx, edge_order=1)


def norms(state: FieldState, params: ModelParams) -> Norms:
    """Rectangle-rule norms and the continuum energy of a state."""
    dx = state.grid.dx
    u, ut = state.u, state.ut
    ux = spatial_derivative(u, dx)
    p = params.p
    upow = np.abs(u) ** (p + 1.0)
    l2 = math.sqrt(dx * np.sum(u * u))
    h1 = math.sqrt(dx * np.sum(u * u + ux * ux))
    lp1 = (dx * np.sum(upow)) ** (1.0 / (p + 1.0))
    energy = dx * np.sum(0.5 * ut * ut + 0.5 * ux * ux)
    if params.defocusing_on:
        energy += dx * np.sum(upow) / (p + 1.0)
    return Norms(h1=h1, l2=l2, linf=float(np.max(np.abs(u))), lp1=lp1,
                 energy=float(energy))
