"""Two-timescale control: the slow capacitor heuristic over the simplified
affine constraint system, and the exact fast D-STATCOM problem.

The simplified system replaces the squared current in the voltage
constraints with constant proxies: l_tilde for the current stage and the
precomputed next-stage bounds (l_plus_lo, l_plus_hi) for the chance rows.
All four constraint bounds are then affine in the control variables.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .circuit import QF_BISECTION_TOL, OperatingPoint
from .errors import NoConvergence, StabilityViolation
from .load import quantile_h1, quantile_h2


@dataclass(frozen=True)
class ConstraintBounds:
    """Right-hand sides of the simplified control constraints at one power.

    g1/g2 bound the current-stage voltage band; h1/h2 are the
    chance-derived next-stage bounds (infinite when chance constraints are
    dropped). l_tilde and the l_plus bounds record the current-squared
    proxies used to build them.
    """
    g1: float
    g2: float
    h1: float
    h2: float
    l_tilde: float
    l_plus_lo: float
    l_plus_hi: float


@dataclass(frozen=True)
class SlowControlResult:
    feasible: bool
    cs_star: float
    qf_star: float
    loss_tilde: float
    k_star: int = -1


def loss_current_bounds(params, p_lo, p_hi):
    """Constant bounds on the next-stage squared current.

    Assumes the voltage band held at the realized next-stage point and
    drops the loss term, giving:

        lo = [p_lo^2 + ((r/x) p_lo - eps/(2x))^2] / v0^2
        hi = [p_hi^2 + ((r/x) p_hi + eps/(2x))^2] / v0^2
    """
    if p_lo > p_hi:
        raise ValueError("p_lo must not exceed p_hi")
    r, x, v0, eps = params.r, params.x, params.v0, params.epsilon
    lo = (p_lo ** 2 + ((r / x) * p_lo - eps / (2.0 * x)) ** 2) / v0 ** 2
    hi = (p_hi ** 2 + ((r / x) * p_hi + eps / (2.0 * x)) ** 2) / v0 ** 2
    return lo, hi


def constraint_bounds(p, model, delta, l_tilde, params, drop_chance=False):
    """Evaluate all four constraint bounds at stage power p.

    The deterministic rows use l_tilde; the chance rows use the conditional
    delta-quantiles of the next-stage power with the constant current
    bounds. drop_chance disables the chance rows entirely (the delta = 1
    convention used by the sweep).
    """
    r, x, phi, eps = params.r, params.x, params.phi, params.epsilon
    slope = r / x + phi
    half_band = eps / (2.0 * x)
    loss_gain = (r * r + x * x) / (2.0 * x)
    g1 = slope * p + half_band + l_tilde * loss_gain
    g2 = slope * p - half_band + l_tilde * loss_gain
    if drop_chance:
        h1 = math.inf
        h2 = -math.inf
        lp_lo, lp_hi = loss_current_bounds(params, model.p_lo, model.p_hi)
    else:
        lp_lo, lp_hi = loss_current_bounds(params, model.p_lo, model.p_hi)
        h1 = slope * quantile_h1(model, p, delta) + half_band + lp_lo * loss_gain
        h2 = slope * quantile_h2(model, p, delta) - half_band + lp_hi * loss_gain
    return ConstraintBounds(g1=g1, g2=g2, h1=h1, h2=h2, l_tilde=l_tilde,
                            l_plus_lo=lp_lo, l_plus_hi=lp_hi)


def slow_control_Hs(p, sizes, bounds, params):
    """Ascending capacitor-level scan of the simplified problem.

    Returns the first level passing both band tests, the proxy D-STATCOM
    setting clamped at -qf_max, and the exact power-flow loss at that
    point. Infeasibility is a result, not an error.
    """
    a1 = params.f0 * (params.v0 ** 2 + params.epsilon)
    a2 = params.f0 * (params.v0 ** 2 - params.epsilon)
    ub = min(bounds.g1, bounds.h1)
    lb = max(bounds.g2, bounds.h2)
    found, k, cs, qf = _kernels.hs_scan_core(
        sizes.c0, sizes.cs_max, sizes.k_levels, sizes.qf_max,
        ub, lb, bounds.g2, a1, a2)
    if not found:
        return SlowControlResult(feasible=False, cs_star=0.0, qf_star=0.0,
                                 loss_tilde=0.0)
    w, l, P, Q, status = _kernels.distflow_core(
        float(p), sizes.c0 + cs, qf,
        params.r, params.x, params.f0, params.v0, params.phi)
    if status == _kernels.STATUS_UNSTABLE:
        raise StabilityViolation(
            f"unstable capacitance c0+cs={sizes.c0 + cs} in slow control")
    if status != _kernels.STATUS_OK:
        raise NoConvergence(f"power flow failed at p={p} inside slow control")
    return SlowControlResult(feasible=True, cs_star=cs, qf_star=qf,
                             loss_tilde=l * params.r, k_star=k)


class BoundsTable:
    """Vectorized constraint geometry at a grid of stage powers.

    The chance rows (h1, h2) are fixed once delta and the model are known;
    the deterministic rows shift with the loss proxies, so ``assemble``
    rebuilds (g1, g2, ub, lb) for a given proxy vector. Used by the sizing
    objective and, via interpolation, by the real-time replay.
    """

    def __init__(self, p_points, model, delta, params, drop_chance=False):
        r, x, phi, eps = params.r, params.x, params.phi, params.epsilon
        self.params = params
        self.p = np.asarray(p_points, dtype=float)
        self.slope = r / x + phi
        self.half_band = eps / (2.0 * x)
        self.loss_gain = (r * r + x * x) / (2.0 * x)
        self.a1 = params.f0 * (params.v0 ** 2 + eps)
        self.a2 = params.f0 * (params.v0 ** 2 - eps)
        self.l_plus_lo, self.l_plus_hi = loss_current_bounds(
            params, model.p_lo, model.p_hi)
        self.drop_chance = drop_chance
        if drop_chance:
            self.h1 = np.full(len(self.p), math.inf)
            self.h2 = np.full(len(self.p), -math.inf)
        else:
            self.h1 = np.array([
                self.slope * quantile_h1(model, p, delta) + self.half_band
                + self.l_plus_lo * self.loss_gain for p in self.p])
            self.h2 = np.array([
                self.slope * quantile_h2(model, p, delta) - self.half_band
                + self.l_plus_hi * self.loss_gain for p in self.p])

    def assemble(self, l_tilde):
        g1 = self.slope * self.p + self.half_band + l_tilde * self.loss_gain
        g2 = self.slope * self.p - self.half_band + l_tilde * self.loss_gain
        ub = np.minimum(g1, self.h1)
        lb = np.maximum(g2, self.h2)
        return g1, g2, ub, lb


def fast_control_Cf(p, c0, cs, qf_max, params):
    """Exact fast-timescale D-STATCOM problem at one sample.

    Minimizes loss subject to the squared-voltage band and |qf| <= qf_max
    on the exact power-flow model; since loss grows with injection in the
    operating regime, the optimum is the smallest qf reaching the band
    floor, found by bisection. The clamped point is returned even when the
    band cannot be met (feasible=False) so a replay can proceed with it.
    """
    qf, w, l, P, Q, feas, status = _kernels.fast_qf_core(
        float(p), float(c0 + cs), float(qf_max),
        params.r, params.x, params.f0, params.v0, params.phi,
        params.epsilon, QF_BISECTION_TOL)
    if status == _kernels.STATUS_UNSTABLE:
        raise StabilityViolation(f"unstable capacitance c0+cs={c0 + cs}")
    if status != _kernels.STATUS_OK:
        raise NoConvergence(f"power flow failed at p={p} in fast control")
    op = OperatingPoint(v_sq=w, i_sq=l, p_send=P, q_send=Q)
    return qf, op, bool(feas)
