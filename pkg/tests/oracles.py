"""Independent oracles used by the test suite.

These deliberately avoid the package's solution paths: the power-flow
oracle bisects the scalar reduction of the circuit equations in v^2, the
control oracles enumerate, and the quantile oracle applies the sup/inf
definitions directly.
"""

import numpy as np


def _scalar_G(w, p, c_total, qf, params):
    r, x, f0, v0, phi = params.r, params.x, params.f0, params.v0, params.phi
    A = v0 * v0 - 2.0 * (r + phi * x) * p + 2.0 * x * qf
    D = 1.0 - 2.0 * x * f0 * c_total
    B = r * r + x * x
    l = (A - w * D) / B
    P = p + l * r
    Q = phi * p - w * f0 * c_total - qf + l * x
    return (P * P + Q * Q) / (v0 * v0) - l


def bisect_distflow_vsq(p, c_total, qf, params, low_root=False):
    """Bisection on v^2 of the scalar reduction of the circuit equations.

    Returns the squared voltage of the requested root, or None when no
    solution exists (no point with G < 0 between the roots).
    """
    v0sq = params.v0 ** 2
    mid = None
    for frac in np.linspace(0.02, 1.6, 400):
        if _scalar_G(frac * v0sq, p, c_total, qf, params) < 0.0:
            mid = frac * v0sq
            break
    if mid is None:
        return None
    if low_root:
        lo, hi = 0.0, mid
        if _scalar_G(lo, p, c_total, qf, params) < 0.0:
            return None
        for _ in range(200):
            m = 0.5 * (lo + hi)
            if _scalar_G(m, p, c_total, qf, params) >= 0.0:
                lo = m
            else:
                hi = m
            if hi - lo < 1e-14:
                break
        return 0.5 * (lo + hi)
    lo = mid
    hi = mid
    step = max(abs(mid), 1.0)
    while _scalar_G(hi, p, c_total, qf, params) < 0.0:
        hi += step
        step *= 2.0
        if hi > 1e8:
            return None
    for _ in range(200):
        m = 0.5 * (lo + hi)
        if _scalar_G(m, p, c_total, qf, params) < 0.0:
            lo = m
        else:
            hi = m
        if hi - lo < 1e-14:
            break
    return 0.5 * (lo + hi)


def bisect_distflow_vsq_batch(p, c_total, qf, params):
    """Vectorized high-root bisection (arrays in, array of v^2 out; NaN where
    no solution exists)."""
    p = np.asarray(p, dtype=float)
    c_total = np.asarray(c_total, dtype=float)
    qf = np.asarray(qf, dtype=float)
    r, x, f0, v0, phi = params.r, params.x, params.f0, params.v0, params.phi
    v0sq = v0 * v0
    A = v0sq - 2.0 * (r + phi * x) * p + 2.0 * x * qf
    D = 1.0 - 2.0 * x * f0 * c_total
    B = r * r + x * x

    def G(w):
        l = (A - w * D) / B
        P = p + l * r
        Q = phi * p - w * f0 * c_total - qf + l * x
        return (P * P + Q * Q) / v0sq - l

    mid = np.full(p.shape, np.nan)
    found = np.zeros(p.shape, dtype=bool)
    for frac in np.linspace(0.02, 1.6, 400):
        g = G(np.full(p.shape, frac * v0sq))
        newly = (~found) & (g < 0.0)
        mid[newly] = frac * v0sq
        found |= newly
        if found.all():
            break
    lo = mid.copy()
    hi = mid.copy()
    step = np.maximum(np.abs(mid), 1.0)
    for _ in range(80):
        below = found & (G(hi) < 0.0)
        if not below.any():
            break
        hi = np.where(below, hi + step, hi)
        step = np.where(below, step * 2.0, step)
    for _ in range(120):
        m = 0.5 * (lo + hi)
        neg = G(m) < 0.0
        lo = np.where(neg, m, lo)
        hi = np.where(neg, hi, m)
    out = 0.5 * (lo + hi)
    out[~found] = np.nan
    return out


def brute_force_hs(p, sizes, bounds, params, n_grid=10000):
    """Enumerate capacitor levels and a qf grid over the simplified
    affine system; mirrors the ascending-scan semantics."""
    a1 = params.f0 * (params.v0 ** 2 + params.epsilon)
    a2 = params.f0 * (params.v0 ** 2 - params.epsilon)
    ub = min(bounds.g1, bounds.h1)
    lb = max(bounds.g2, bounds.h2)
    grid = np.linspace(-sizes.qf_max, sizes.qf_max, n_grid)
    for k in range(sizes.k_levels + 1):
        cs = (k / sizes.k_levels) * sizes.cs_max
        ctot = sizes.c0 + cs
        ok_upper = (a1 * ctot + grid <= ub).any()
        ok_lower = (a2 * ctot + grid >= lb).any()
        if ok_upper and ok_lower:
            # smallest grid qf meeting the lower voltage constraint
            meets = a2 * ctot + grid >= bounds.g2
            qf = grid[meets][0] if meets.any() else grid[0]
            return True, k, cs, qf
    return False, -1, 0.0, 0.0


def grid_fast_control(p, c_total, qf_max, params, solve_vsq, n_grid=10000):
    """Grid search for the loss-minimal in-band qf on the exact model.

    solve_vsq(p, c_total, qf) -> (v^2, i^2) must be supplied by the caller
    (typically a thin wrapper over the package solver; the grid search
    itself is the independent part).
    """
    v0sq = params.v0 ** 2
    eps = params.epsilon
    grid = np.linspace(-qf_max, qf_max, n_grid)
    best = None
    for qf in grid:
        w, l = solve_vsq(p, c_total, qf)
        if abs(w - v0sq) <= eps:
            loss = l * params.r
            if best is None or loss < best[1]:
                best = (qf, loss)
    return best


def quantile_mass_below(model, row_idx, h):
    """Probability mass strictly below h under the bin-interpolated
    conditional distribution of a transition model row."""
    edges = np.asarray(model.bin_edges)
    probs = np.asarray(model.trans[row_idx])
    total = 0.0
    for j in range(len(probs)):
        left, right = edges[j], edges[j + 1]
        if h >= right:
            total += probs[j]
        elif h > left:
            total += probs[j] * (h - left) / (right - left)
    return total
