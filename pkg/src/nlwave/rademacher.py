"""Constructive approximate differentiation of Lipschitz functions on [-1,1].

A function enters as its samples on the level-n_max dyadic grid (2^n_max
equal intervals) and is treated as exactly piecewise linear between
samples.  Level n of the decomposition is the interpolant through the
2^n + 1 points at multiples of 2^(1-n); band n is f_{n+1} - f_n.  Bands
are pairwise orthogonal in the homogeneous H^1 inner product, giving the
Bessel budget sum e_n <= 2 * lip^2, and a pigeonhole scan over disjoint
level windows locates a quiet scale from which the accepted-slope set is
built.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ResolutionExhausted

SLOPE_TOL = 1e-9    # ingestion slack on the Lipschitz bound, roundoff only


class LipschitzSample:
    """Dyadic samples of a Lipschitz function, normalized to f(0) = 0."""

    def __init__(self, values: np.ndarray, lip_bound: float = 1.0,
                 normalize: bool = True):
        values = np.array(values, dtype=np.float64)
        n = values.size - 1
        if n < 2 or n & (n - 1):
            raise ConfigError(
                "need 2^n_max + 1 samples for a dyadic grid, got "
                f"{values.size}")
        self.n_max = n.bit_length() - 1
        self.lip_bound = float(lip_bound)
        self.spacing = 2.0 ** (1 - self.n_max)
        if normalize:
            values -= values[n // 2]          # x = 0 is the middle sample
        slopes = np.diff(values) / self.spacing
        if np.max(np.abs(slopes)) > lip_bound * (1.0 + SLOPE_TOL):
            raise ConfigError(
                f"samples violate the Lipschitz bound {lip_bound}")
        self.values = values
        self.values.setflags(write=False)

    @property
    def xs(self) -> np.ndarray:
        return -1.0 + self.spacing * np.arange(self.values.size)

    @classmethod
    def from_function(cls, f, n_max: int, lip_bound: float = 1.0,
                      normalize: bool = True) -> "LipschitzSample":
        xs = -1.0 + 2.0 ** (1 - n_max) * np.arange(2 ** n_max + 1)
        return cls(np.array([f(x) for x in xs]), lip_bound, normalize)

    @classmethod
    def coarse_random(cls, seed: int, n_max: int,
                      level: int = 6) -> "LipschitzSample":
        """Random 1-Lipschitz function: iid uniform slopes at a coarse level.

        Piecewise linear at dyadic level `level`, so all band energy sits
        in levels below `level` and the fine scales are exactly quiet.
        """
        if level > n_max:
            raise ConfigError("coarse level cannot exceed n_max")
        rng = np.random.default_rng(seed)
        slopes = rng.uniform(-1.0, 1.0, 2 ** level)
        coarse_vals = np.concatenate(
            ([0.0], np.cumsum(slopes) * 2.0 ** (1 - level)))
        rep = 2 ** (n_max - level)
        fine = np.interp(np.arange(2 ** n_max + 1) / rep,
                         np.arange(2 ** level + 1), coarse_vals)
        return cls(fine, 1.0)

    @classmethod
    def random_walk(cls, seed: int, n_max: int) -> "LipschitzSample":
        """Random 1-Lipschitz walk with iid uniform slopes at full resolution."""
        return cls.coarse_random(seed, n_max, level=n_max)

    def evaluate(self, y) -> np.ndarray:
        """Exact piecewise-linear evaluation anywhere in [-1, 1]."""
        return np.interp(y, self.xs, self.values)

    def level_slopes(self, n: int) -> np.ndarray:
        """Slopes of the level-n interpolant (2^n intervals on [-1,1])."""
        if not 0 <= n <= self.n_max:
            raise ConfigError(f"level {n} outside [0, {self.n_max}]")
        h = 2 ** (self.n_max - n)
        pts = self.values[::h]
        return np.diff(pts) / 2.0 ** (1 - n)


@dataclass(frozen=True)
class MultiscaleDecomposition:
    """Per-level slope sequences and the band energies e_n in closed form."""

    slopes: tuple[np.ndarray, ...]      # slopes[n] has 2^n entries
    band_energies: np.ndarray           # e_n = ||f_{n+1} - f_n||^2_{H^1dot}
    lip_bound: float

    @property
    def n_levels(self) -> int:
        return len(self.slopes) - 1

    def bessel_sum(self) -> float:
        return float(np.sum(self.band_energies))

    def band_derivative(self, n: int) -> np.ndarray:
        """d/dx of f_{n+1} - f_n expanded to the finest dyadic grid."""
        fine = self.n_levels
        rep_child = 2 ** (fine - n - 1)
        rep_parent = 2 ** (fine - n)
        child = np.repeat(self.slopes[n + 1], rep_child)
        parent = np.repeat(self.slopes[n], rep_parent)
        return child - parent

    def band_gram(self) -> np.ndarray:
        """Pairwise homogeneous-H^1 band inner products (closed form)."""
        fine_len = 2.0 ** (1 - self.n_levels)
        ders = np.stack([self.band_derivative(n)
                         for n in range(self.n_levels)])
        return ders @ ders.T * fine_len


def decompose(sample: LipschitzSample) -> MultiscaleDecomposition:
    """Slope hierarchy and band energies of the dyadic interpolants.

    On each parent interval the two child slopes straddle the parent
    slope symmetrically, so e_n = sum (s_L - s_R)^2 * 2^(-n-2) per parent.
    """
    slopes = tuple(sample.level_slopes(n) for n in range(sample.n_max + 1))
    energies = np.empty(sample.n_max)
    for n in range(sample.n_max):
        child = slopes[n + 1]
        gap = child[0::2] - child[1::2]
        energies[n] = float(np.sum(gap * gap)) * 2.0 ** (-n - 1)
    return MultiscaleDecomposition(slopes, energies, sample.lip_bound)


@dataclass(frozen=True)
class ScaleWindow:
    """Window family F(n) = n + K used by the pigeonhole scan."""

    K: int = 8

    def __call__(self, n: int) -> int:
        if self.K < 1:
            raise ConfigError("window width K must be >= 1")
        return n + self.K


@dataclass(frozen=True)
class QuietScaleResult:
    n0: int
    r: float
    sigma: float
    window: ScaleWindow
    band_sum: float
    probes: int


def find_quiet_scale(dec: MultiscaleDecomposition, sigma: float,
                     window: ScaleWindow = ScaleWindow()) -> QuietScaleResult:
    """First disjoint window [n0, F(n0)] with band energy sum <= sigma.

    Windows are scanned at n0 = 1, F(1)+1, F(F(1)+1)+1, ...; since they
    are disjoint and the total is at most 2*lip^2, at most
    ceil(2*lip^2/sigma) of them can fail.  Bands beyond the sample
    resolution are exactly zero (the function is piecewise linear), but a
    window that would have to START beyond the finest band means the
    result is below sample resolution and finer sampling is required.
    """
    if sigma <= 0:
        raise ConfigError("sigma must be positive")
    n_bands = dec.band_energies.size
    n0 = 1
    probes = 0
    while True:
        if n0 >= n_bands:
            raise ResolutionExhausted(
                f"no quiet window within the {n_bands} resolved bands; "
                "sample at a larger n_max")
        probes += 1
        hi = window(n0)
        s = float(np.sum(dec.band_energies[n0:min(hi, n_bands - 1) + 1]))
        if s <= sigma:
            return QuietScaleResult(n0=n0, r=sigma * 2.0 ** (-n0),
                                    sigma=sigma, window=window, band_sum=s,
                                    probes=probes)
        n0 = hi + 1


DEFAULT_PROBES_PER_SIDE = 12


@dataclass(frozen=True)
class ApproxDiffSet:
    """Accepted points where difference quotients stay delta-close to L."""

    delta: float
    r: float
    eps1: float
    accepted: np.ndarray       # boolean mask over the sample grid
    slopes: np.ndarray         # candidate slope L per grid point
    measure: float

    @property
    def accepted_fraction(self) -> float:
        return float(np.mean(self.accepted))


def _probe_offsets(eps1: float, r: float, spacing: float,
                   n_geom: int) -> np.ndarray:
    """Geometric ladder across [eps1, r] plus every grid multiple inside."""
    ladder = eps1 * (r / eps1) ** (np.arange(n_geom) / (n_geom - 1))
    k_lo = math.ceil(eps1 / spacing)
    k_hi = math.floor(r / spacing)
    grid_offs = spacing * np.arange(k_lo, k_hi + 1)
    return np.unique(np.concatenate((ladder, grid_offs)))


def approx_diff_set(sample: LipschitzSample, quiet: QuietScaleResult,
                    delta: float,
                    n_geom: int = DEFAULT_PROBES_PER_SIDE) -> ApproxDiffSet:
    """Accept x where |(f(y)-f(x))/(y-x) - L(x)| <= delta on the annulus.

    L(x) is the slope of the quiet-level interpolant on x's interval.  y
    runs over every sample point with eps1 <= |y-x| <= r plus a geometric
    ladder of off-grid probes evaluated through the exact piecewise-linear
    representative (the annulus can sit below the sample spacing).
    """
    if delta <= 0:
        raise ConfigError("delta must be positive")
    r = quiet.r
    eps1 = delta * r
    xs = sample.xs
    n_pts = xs.size

    n0 = min(quiet.n0, sample.n_max)
    level_slopes = sample.level_slopes(n0)
    idx = np.minimum((np.floor((xs + 1.0) / 2.0 ** (1 - n0))).astype(int),
                     level_slopes.size - 1)
    L = level_slopes[idx]

    accepted = np.ones(n_pts, dtype=bool)
    for off in _probe_offsets(eps1, r, sample.spacing, n_geom):
        for sign in (1.0, -1.0):
            y = xs + sign * off
            valid = (y >= -1.0) & (y <= 1.0)
            q = np.zeros(n_pts)
            q[valid] = (sample.evaluate(y[valid]) - sample.values[valid]) \
                / (sign * off)
            bad = valid & (np.abs(q - L) > delta * (1.0 + 1e-12))
            accepted &= ~bad
    measure = float(np.count_nonzero(accepted)) * sample.spacing
    return ApproxDiffSet(delta=delta, r=r, eps1=eps1, accepted=accepted,
                         slopes=L, measure=measure)


def default_sigma(delta: float) -> float:
    """sigma = 0.01 * delta^2; small enough that quiet-band slope drift
    stays well inside the delta budget."""
    return 0.01 * delta * delta


def write_rademacher_json(path, sample: LipschitzSample,
                          dec: MultiscaleDecomposition,
                          quiet: QuietScaleResult,
                          result: ApproxDiffSet) -> None:
    payload = {
        "lip_bound": sample.lip_bound,
        "sigma": quiet.sigma,
        "K": quiet.window.K,
        "delta": result.delta,
        "n0": quiet.n0,
        "r": result.r,
        "measure": result.measure,
        "accepted_fraction": result.accepted_fraction,
        "band_energies": [float(e) for e in dec.band_energies],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
