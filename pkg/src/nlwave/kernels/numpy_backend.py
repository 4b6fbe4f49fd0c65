"""Pure-numpy kernels: vectorized implicit solve, leapfrog, discrete energy.

Fallback path for environments without numba; selected with
NLWAVE_BACKEND=numpy.  Must stay semantically identical to the numba
backend (same update equations, same convergence rule).
"""

from __future__ import annotations

import numpy as np

# Below this |a-b| (relative) the potential difference quotient switches to
# its limiting value at the midpoint.
DIFF_EPS = 1e-14


def _pow_p1(x, p):
    # |x|^(p+1) with fast paths for the common integer exponents
    if p == 3.0:
        s = x * x
        return s * s
    if p == 2.0:
        ax = np.abs(x)
        return ax * ax * ax
    return np.abs(x) ** (p + 1.0)


def _dpot(x, p):
    # |x|^(p-1) * x
    if p == 3.0:
        return x * x * x
    if p == 2.0:
        return np.abs(x) * x
    return np.abs(x) ** (p - 1.0) * x


def diff_quotient(a, b, p):
    """G(a,b) = (|a|^(p+1) - |b|^(p+1)) / ((p+1)(a-b)), midpoint limit on the diagonal."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    diff = a - b
    thr = DIFF_EPS * np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    near = np.abs(diff) <= thr
    safe = np.where(near, 1.0, diff)
    far = (_pow_p1(a, p) - _pow_p1(b, p)) / ((p + 1.0) * safe)
    m = 0.5 * (a + b)
    lim = np.abs(m) ** (p - 1.0) * m
    out = np.where(near, lim, far)
    return out if out.ndim else float(out)


def _g_cached(w, b, vb, p, dt2, target):
    """Residual g(w) = w + dt2*G(w,b) - target and slope, with vb = V(b) cached."""
    diff = w - b
    thr = DIFF_EPS * np.maximum(1.0, np.maximum(np.abs(w), np.abs(b)))
    near = np.abs(diff) <= thr
    safe = np.where(near, 1.0, diff)
    vw = _pow_p1(w, p) / (p + 1.0)
    gfar = (vw - vb) / safe
    m = 0.5 * (w + b)
    am = np.abs(m)
    gnear = am ** (p - 1.0) * m
    G = np.where(near, gnear, gfar)
    dfar = (_dpot(w, p) - G) / safe
    dnear = 0.5 * p * am ** (p - 1.0)
    dG = np.where(near, dnear, dfar)
    return w + dt2 * G - target, 1.0 + dt2 * dG


def nonlinear_step(u_prev, u_curr, dt, dx, p, tol, max_iter):
    """One implicit conservative step; returns (u_next, converged flag).

    Interior points solve w + dt^2*G(w, u_prev) = leapfrog(u_prev, u_curr)
    by bracketed Newton; the map is strictly increasing with slope >= 1,
    so the root is unique and lies within |g(w)| of any iterate.  One
    extra Newton polish after convergence pushes the residual to the
    roundoff floor, which exact energy conservation relies on.
    """
    dt2 = dt * dt
    r2 = dt2 / (dx * dx)
    target = (2.0 * u_curr[1:-1] - u_prev[1:-1]
              + r2 * ((u_curr[2:] - 2.0 * u_curr[1:-1]) + u_curr[:-2]))
    b = u_prev[1:-1]
    vb = _pow_p1(b, p) / (p + 1.0)

    w = target.copy()
    g, slope = _g_cached(w, b, vb, p, dt2, target)
    lo = np.where(g > 0.0, w - g, w)
    hi = np.where(g > 0.0, w, w - g)

    converged = False
    done = np.zeros_like(w, dtype=bool)
    for _ in range(max_iter):
        done = done | (np.abs(g) <= tol)
        if done.all():
            converged = True
            break
        live = ~done
        lo = np.where(live & (g < 0.0), w, lo)
        hi = np.where(live & (g > 0.0), w, hi)
        nxt = w - g / slope
        bad = (nxt <= lo) | (nxt >= hi) | ~np.isfinite(nxt)
        w = np.where(done, w, np.where(bad, 0.5 * (lo + hi), nxt))
        g, slope = _g_cached(w, b, vb, p, dt2, target)

    w = w - g / slope

    u_next = np.zeros_like(u_curr)
    u_next[1:-1] = w
    return u_next, converged


def linear_step(u_prev, u_curr, dt, dx):
    """Explicit leapfrog update for the linear wave equation."""
    r2 = (dt * dt) / (dx * dx)
    u_next = np.zeros_like(u_curr)
    u_next[1:-1] = (2.0 * u_curr[1:-1] - u_prev[1:-1]
                    + r2 * ((u_curr[2:] - 2.0 * u_curr[1:-1]) + u_curr[:-2]))
    return u_next


def discrete_energy(u_prev, u_curr, dt, dx, p, include_potential):
    """Energy functional conserved exactly by the conservative step."""
    kin = np.sum(((u_curr - u_prev) / dt) ** 2) * 0.5
    grad = np.sum((u_curr[1:] - u_curr[:-1]) * (u_prev[1:] - u_prev[:-1]))
    grad /= 2.0 * dx * dx
    total = kin + grad
    if include_potential:
        pot = np.sum(_pow_p1(u_curr, p) + _pow_p1(u_prev, p))
        total += pot / (2.0 * (p + 1.0))
    return float(dx * total)
