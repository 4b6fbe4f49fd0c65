"""Concentration-time extraction and Lipschitz worldline combinatorics.

A concentration trace is a 1-separated set of times where the sup norm
exceeds a threshold, together with the (leftmost) argmax positions.  Two
entries are spacelike when |dx| >= |dt| + 1; the particle number of a
trace is the largest pairwise-spacelike subset.  The dichotomy step
either certifies an almost-Lipschitz subset or strictly reduces the
particle number, and iterating it extracts a worldline whose canonical
1-Lipschitz envelope is the infimal convolution of the base points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .integrator import Trajectory


@dataclass(frozen=True)
class ConcentrationTrace:
    """1-separated concentration times with argmax positions and values."""

    threshold: float
    t: np.ndarray
    x: np.ndarray
    value: np.ndarray
    span: tuple[float, float]       # recorded time interval the scan covered

    def __post_init__(self):
        for arr in (self.t, self.x, self.value):
            np.asarray(arr).setflags(write=False)
        if self.t.size and np.any(np.diff(self.t) < 1.0 - 1e-12):
            raise ConfigError("concentration times must be 1-separated")

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def half_span(self) -> float:
        """T such that the recentred source span is [-T, T]."""
        return 0.5 * (self.span[1] - self.span[0])

    def subset(self, idx: np.ndarray) -> "ConcentrationTrace":
        idx = np.sort(np.asarray(idx, dtype=int))
        return ConcentrationTrace(self.threshold, self.t[idx].copy(),
                                  self.x[idx].copy(), self.value[idx].copy(),
                                  self.span)


def concentration_times(traj: Trajectory, threshold: float) -> ConcentrationTrace:
    """Greedy left-to-right scan selecting frames with sup norm >= threshold."""
    if threshold <= 0:
        raise ConfigError("threshold must be positive")
    ts, xs, vals = [], [], []
    last = -math.inf
    grid_x = traj.grid.xs
    for i in range(traj.n_frames):
        t = float(traj.times[i])
        if t < last + 1.0:
            continue
        u = traj.frame_u(i)
        j = int(np.argmax(np.abs(u)))      # ties resolve to the leftmost point
        if abs(u[j]) >= threshold:
            ts.append(t)
            xs.append(float(grid_x[j]))
            vals.append(float(u[j]))
            last = t
    return ConcentrationTrace(threshold, np.array(ts), np.array(xs),
                              np.array(vals), traj.t_span)


def is_spacelike(t1: float, x1: float, t2: float, x2: float) -> bool:
    """|x2 - x1| >= |t2 - t1| + 1, boundary included."""
    return abs(x2 - x1) >= abs(t2 - t1) + 1.0


def spacelike_matrix(t: np.ndarray, x: np.ndarray) -> np.ndarray:
    dt = np.abs(t[:, None] - t[None, :])
    dx = np.abs(x[:, None] - x[None, :])
    adj = dx >= dt + 1.0
    np.fill_diagonal(adj, False)
    return adj


EXACT_LIMIT = 20


def particle_number(trace: ConcentrationTrace, mode: str = "exact") -> int:
    """Largest pairwise-spacelike subset size (exact) or a greedy lower bound."""
    n = len(trace)
    if n == 0:
        return 0
    adj = spacelike_matrix(trace.t, trace.x)
    if mode == "greedy":
        chosen: list[int] = []
        for i in range(n):
            if all(adj[i, j] for j in chosen):
                chosen.append(i)
        return len(chosen)
    if mode != "exact":
        raise ConfigError(f"unknown mode {mode!r}")
    if n > EXACT_LIMIT:
        raise ConfigError(
            f"exact particle number is limited to {EXACT_LIMIT} entries "
            f"(got {n}); use mode='greedy'")
    return _max_clique(adj)


def _max_clique(adj: np.ndarray) -> int:
    """Branch and bound over the spacelike graph, degree-descending order."""
    n = adj.shape[0]
    order = np.argsort(-adj.sum(axis=1))
    a = adj[np.ix_(order, order)]
    best = 0

    def expand(candidates: list[int], size: int) -> None:
        nonlocal best
        if size > best:
            best = size
        for k, v in enumerate(candidates):
            if size + len(candidates) - k <= best:
                return
            nxt = [u for u in candidates[k + 1:] if a[v, u]]
            expand(nxt, size + 1)

    expand(list(range(n)), 0)
    return best


def particle_number_upper_bound(trace: ConcentrationTrace) -> int:
    """Interval bound: pairwise-spacelike entries have 1-separated positions,
    so at most floor(x-range) + 1 of them fit."""
    n = len(trace)
    if n == 0:
        return 0
    return min(n, int(np.max(trace.x) - np.min(trace.x)) + 1)


def particle_number_exhaustive(trace: ConcentrationTrace) -> int:
    """Independent oracle: enumerate all subsets (tiny traces only)."""
    n = len(trace)
    if n > 16:
        raise ConfigError("exhaustive oracle limited to 16 entries")
    adj = spacelike_matrix(trace.t, trace.x)
    best = 0
    for mask in range(1 << n):
        members = [i for i in range(n) if mask >> i & 1]
        if len(members) <= best:
            continue
        if all(adj[i, j] for k, i in enumerate(members)
               for j in members[k + 1:]):
            best = len(members)
    return best


@dataclass(frozen=True)
class Eps0Family:
    """eps0(c) = min(c, eps_hat * c^2); the knob the extraction exposes."""

    eps_hat: float = 0.1

    def __call__(self, c: float) -> float:
        if not 0.0 < c <= 1.0:
            raise ConfigError(f"eps0 is defined on (0, 1], got c={c}")
        return min(c, self.eps_hat * c * c)


@dataclass(frozen=True)
class DichotomyOutcome:
    """Either an almost-Lipschitz subset (i) or a particle-reduced one (ii)."""

    kind: str                        # "lipschitz" or "reduced"
    subset: ConcentrationTrace
    eps0_value: float
    witness: tuple[float, float] | None = None   # certifying entry for (ii)


def dichotomy_step(subset: ConcentrationTrace, c: float, eps0_value: float,
                   m: int) -> DichotomyOutcome:
    """One dichotomy round on the dense-interval portion of the subset.

    Partitions the span into equal intervals with length in
    [eps0*Tn/8, eps0*Tn/4], keeps entries in dense intervals (count
    strictly above c*eps0*Tn/8), and either certifies the almost-Lipschitz
    bound |dx| <= |dt| + eps0*Tn on all pairs, or splits around a
    violating pair and returns the larger, particle-reduced half with a
    machine-checked spacelike certificate.
    """
    n = len(subset)
    t_n = subset.half_span
    if m < 1:
        raise ConfigError("m must be >= 1")
    if n < 2.0 * c * t_n:
        raise ConfigError(
            f"subset of {n} entries is below the 2*c*Tn = {2*c*t_n:.3g} floor")
    span_len = subset.span[1] - subset.span[0]
    width_target = eps0_value * t_n / 4.0
    n_int = max(1, math.ceil(span_len / width_target))
    edges = subset.span[0] + span_len * np.arange(n_int + 1) / n_int
    which = np.clip(np.searchsorted(edges, subset.t, side="right") - 1,
                    0, n_int - 1)
    counts = np.bincount(which, minlength=n_int)
    dense_floor = c * eps0_value * t_n / 8.0
    dense = counts > dense_floor
    keep = dense[which]
    dd = subset.subset(np.nonzero(keep)[0])

    slack = eps0_value * t_n
    dt = np.abs(dd.t[:, None] - dd.t[None, :])
    dx = np.abs(dd.x[:, None] - dd.x[None, :])
    viol = np.argwhere(dx > dt + slack)
    if viol.size == 0:
        return DichotomyOutcome("lipschitz", dd, eps0_value)

    a, b = int(viol[0, 0]), int(viol[0, 1])
    t1, x1 = dd.t[a], dd.x[a]
    t2, x2 = dd.t[b], dd.x[b]
    interval = int(np.clip(np.searchsorted(edges, t1, side="right") - 1,
                           0, n_int - 1))
    in_i = (which[keep] == interval)
    near = in_i & (np.abs(dd.x - x1) <= slack / 2.0)
    far = in_i & ~near
    if near.sum() >= far.sum():
        chosen, witness = near, (float(t2), float(x2))
    else:
        chosen, witness = far, (float(t1), float(x1))
    out = dd.subset(np.nonzero(chosen)[0])

    for te, xe in zip(out.t, out.x):
        if not is_spacelike(te, xe, witness[0], witness[1]):
            raise ConfigError(
                "spacelike certificate failed; the span is too short for "
                f"eps0*Tn = {slack:.3g} (needs eps0*Tn >= 4)")
    floor = c * eps0_value * t_n / 16.0
    if len(out) < floor:
        raise ConfigError(
            f"reduced subset of {len(out)} entries is below the "
            f"c*eps0*Tn/16 = {floor:.3g} floor")
    return DichotomyOutcome("reduced", out, eps0_value, witness)


class LipschitzEnvelope:
    """x'(t) = min over base points of (x_i + |t - t_i|); 1-Lipschitz."""

    def __init__(self, t: np.ndarray, x: np.ndarray):
        if len(t) == 0:
            raise ConfigError("envelope needs at least one base point")
        self.base_t = np.asarray(t, dtype=np.float64)
        self.base_x = np.asarray(x, dtype=np.float64)

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        vals = self.base_x[:, None] + np.abs(t[None, :] - self.base_t[:, None]) \
            if t.ndim else self.base_x + np.abs(t - self.base_t)
        out = np.min(vals, axis=0) if t.ndim else np.min(vals)
        return out if t.ndim else float(out)


def envelope_evaluate(env: LipschitzEnvelope, t) -> float:
    return env(t)


@dataclass
class WorldlineExtraction:
    """Result bundle of the iterated dichotomy; success iff outcome (i)."""

    success: bool
    c: float
    c0: float
    eps0: Eps0Family
    eps0_value: float
    iterations: int
    selected: ConcentrationTrace | None
    envelope: LipschitzEnvelope | None
    reason: str = ""


def extract_lipschitz_worldline(trace: ConcentrationTrace,
                                eps0: Eps0Family = Eps0Family(),
                                m_max: int | None = None) -> WorldlineExtraction:
    """Iterate the dichotomy until an almost-Lipschitz subset certifies.

    c starts at (#trace)/(2*span) and shrinks by eps0(c)/16 on every
    particle-number reduction, clamped so the dichotomy floor #subset >=
    2*c*Tn keeps holding; the worst-case product of those factors is the
    reported c0.
    """
    n = len(trace)
    span_len = trace.span[1] - trace.span[0]
    if n == 0 or span_len <= 0:
        return WorldlineExtraction(False, 0.0, 0.0, eps0, 0.0, 0,
                                   None, None, "empty trace")
    if m_max is None:
        mode = "exact" if n <= EXACT_LIMIT else "greedy"
        m_max = max(1, particle_number(trace, mode))

    c = min(1.0, n / (2.0 * span_len))
    c0 = c
    for _ in range(m_max):
        c0 = max(min(1.0, c0 * eps0(c0) / 16.0), 1e-300)

    current = trace
    m = m_max
    for it in range(1, m_max + 1):
        ev = eps0(c)
        try:
            outcome = dichotomy_step(current, c, ev, m)
        except ConfigError as exc:
            # short spans cannot carry a spacelike certificate; that is the
            # expected no-coherent-worldline outcome, not a caller error
            return WorldlineExtraction(False, c, c0, eps0, ev, it, None, None,
                                       str(exc))
        if outcome.kind == "lipschitz":
            sel = outcome.subset
            env = LipschitzEnvelope(sel.t, sel.x)
            c_final = min(1.0, len(sel) / max(trace.half_span, 1e-300))
            return WorldlineExtraction(True, c_final, c0, eps0, ev, it,
                                       sel, env)
        current = outcome.subset
        m -= 1
        c = max(min(c * ev / 16.0, len(current) / (2.0 * span_len)), 1e-300)
    return WorldlineExtraction(False, c, c0, eps0, eps0(c), m_max, None, None,
                               "iteration cap reached without a Lipschitz subset")


# --- empirical Holder-1/2 constants ----------------------------------------

def holder_check(traj: Trajectory, max_frames: int = 64,
                 max_columns: int = 128) -> tuple[float, float]:
    """Empirical sup of |du| / sqrt(separation) in space and in time."""
    n = traj.n_frames
    frame_idx = np.unique(np.linspace(0, n - 1, min(n, max_frames)).astype(int))
    dx = traj.grid.dx
    c_space = 0.0
    for i in frame_idx:
        u = traj.frame_u(i)
        lag = 1
        while lag < u.size:
            diff = np.max(np.abs(u[lag:] - u[:-lag])) if u.size > lag else 0.0
            c_space = max(c_space, diff / math.sqrt(lag * dx))
            lag *= 2

    cols = np.unique(np.linspace(0, traj.grid.n_points - 1,
                                 min(traj.grid.n_points, max_columns)).astype(int))
    series = np.stack([traj.frame_u(i)[cols] for i in frame_idx])
    times = traj.times[frame_idx]
    c_time = 0.0
    lag = 1
    while lag < len(frame_idx):
        dts = times[lag:] - times[:-lag]
        diffs = np.max(np.abs(series[lag:] - series[:-lag]), axis=1)
        c_time = max(c_time, float(np.max(diffs / np.sqrt(dts))))
        lag *= 2
    return c_space, c_time


# --- emission ---------------------------------------------------------------

def write_worldline_csv(path, trace: ConcentrationTrace,
                        extraction: WorldlineExtraction | None) -> None:
    """Schema: t,x,value,selected(0/1)."""
    selected_times = set()
    if extraction is not None and extraction.selected is not None:
        selected_times = set(extraction.selected.t.tolist())
    with open(path, "w") as fh:
        fh.write("t,x,value,selected\n")
        for t, x, v in zip(trace.t, trace.x, trace.value):
            fh.write(f"{t!r},{x!r},{v!r},{int(t in selected_times)}\n")


def write_extraction_json(path, extraction: WorldlineExtraction) -> None:
    base = []
    if extraction.selected is not None:
        base = [[float(t), float(x)]
                for t, x in zip(extraction.selected.t, extraction.selected.x)]
    payload = {
        "c": extraction.c,
        "c0": extraction.c0,
        "eps0_params": {"eps_hat": extraction.eps0.eps_hat,
                        "eps0_value": extraction.eps0_value},
        "iterations": extraction.iterations,
        "outcome": "lipschitz" if extraction.success else "failed",
        "envelope_base_points": base,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
