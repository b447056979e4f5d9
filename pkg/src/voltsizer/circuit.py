"""Single-branch circuit model: exact power-flow solution and the
closed-form squared-voltage relation used by the simplified constraints.

All quantities are per-unit with base power 1 kW and base voltage the
nominal slack-bus voltage, so kW values and pu values coincide.
"""

import math
from dataclasses import dataclass

from . import _kernels
from .errors import NoConvergence, StabilityViolation

QF_BISECTION_TOL = 1e-10


@dataclass(frozen=True)
class CircuitParams:
    """Fixed electrical and regulation parameters.

    r, x: branch resistance/reactance (pu); f0: system frequency (pu);
    v0: slack-bus voltage magnitude (pu); phi: load reactive-to-real power
    ratio; epsilon: half-width of the allowed band on v^2 (pu^2).
    """
    r: float
    x: float
    f0: float = 1.0
    v0: float = 1.0
    phi: float = 0.2
    epsilon: float = 0.02

    def __post_init__(self):
        if self.r <= 0 or self.x <= 0:
            raise ValueError("branch impedance must be positive")
        if self.f0 <= 0 or self.v0 <= 0:
            raise ValueError("f0 and v0 must be positive")
        if self.phi < 0:
            raise ValueError("phi must be nonnegative")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    def check_band_width(self, p_lo):
        """Enforce epsilon << 2*r*p_lo for the configured load floor."""
        if self.epsilon >= 2.0 * self.r * p_lo:
            raise ValueError(
                f"epsilon={self.epsilon} must be below 2*r*p_lo="
                f"{2.0 * self.r * p_lo} for the loss-monotone regime")


@dataclass(frozen=True)
class DeviceSizes:
    """Decision vector: fixed capacitance c0, switchable span cs_max with
    k_levels+1 settings, and D-STATCOM half-range qf_max (all pu)."""
    c0: float
    cs_max: float
    qf_max: float
    k_levels: int = 1

    def __post_init__(self):
        if self.c0 < 0 or self.cs_max < 0 or self.qf_max < 0:
            raise ValueError("device sizes must be nonnegative")
        if self.k_levels < 1:
            raise ValueError("k_levels must be >= 1")

    def levels(self):
        return [(k / self.k_levels) * self.cs_max
                for k in range(self.k_levels + 1)]

    def check_stability(self, params):
        if 1.0 - 2.0 * params.x * params.f0 * (self.c0 + self.cs_max) <= 0.0:
            raise StabilityViolation(
                f"1 - 2*x*f0*(c0+cs_max) <= 0 for c0+cs_max="
                f"{self.c0 + self.cs_max}")


@dataclass(frozen=True)
class ControlDecision:
    """One slow+fast control setting: capacitor level value cs and
    D-STATCOM injection qf (pu)."""
    cs: float
    qf: float


@dataclass(frozen=True)
class OperatingPoint:
    """Solved circuit state for one instant (all pu).

    The squared voltage and current are the primary solved quantities (the
    circuit equations are written in them, and at the 1 kW base i^2 is too
    large for a sqrt round-trip to preserve the last bits); v and i are
    derived views.
    """
    v_sq: float
    i_sq: float
    p_send: float
    q_send: float

    @property
    def v(self):
        return math.sqrt(self.v_sq)

    @property
    def i(self):
        return math.sqrt(self.i_sq)


def _check_decision(sizes, decision):
    lv = sizes.levels()
    tol = 1e-9 * max(1.0, sizes.cs_max)
    if min(abs(decision.cs - c) for c in lv) > tol:
        raise ValueError(
            f"cs={decision.cs} is not one of the {sizes.k_levels + 1} levels")
    if abs(decision.qf) > sizes.qf_max + 1e-9 * max(1.0, sizes.qf_max):
        raise ValueError(f"|qf|={abs(decision.qf)} exceeds qf_max={sizes.qf_max}")


def solve_distflow(p, params, sizes, decision):
    """Exact solution of the branch-flow equations at the high-voltage root.

    Returns the OperatingPoint with v close to v0 and small current; the
    low-voltage/high-loss root is never returned. Raises StabilityViolation
    when 1 - 2*x*f0*(c0+cs) <= 0 and NoConvergence when no solution exists
    within the iteration cap (load outside the solvable regime).
    """
    if p < 0:
        raise ValueError("load power must be nonnegative")
    _check_decision(sizes, decision)
    w, l, P, Q, status = _kernels.distflow_core(
        float(p), float(sizes.c0 + decision.cs), float(decision.qf),
        params.r, params.x, params.f0, params.v0, params.phi)
    if status == _kernels.STATUS_UNSTABLE:
        raise StabilityViolation(
            f"unstable capacitance c0+cs={sizes.c0 + decision.cs}")
    if status == _kernels.STATUS_NO_CONVERGENCE:
        raise NoConvergence(
            f"power flow did not converge at p={p}, "
            f"c={sizes.c0 + decision.cs}, qf={decision.qf}")
    return OperatingPoint(v_sq=w, i_sq=l, p_send=P, q_send=Q)


def v_squared_closed_form(p, qf, i_sq, c_total, params):
    """Squared load voltage as an affine function of (p, qf, i^2):

        (v0^2 - 2(r+phi*x)p + 2x*qf - i^2(r^2+x^2)) / (1 - 2x*f0*c_total)

    Raises StabilityViolation when the denominator is not positive.
    """
    D = 1.0 - 2.0 * params.x * params.f0 * c_total
    if D <= 0.0:
        raise StabilityViolation(f"1 - 2*x*f0*c_total <= 0 for c_total={c_total}")
    num = (params.v0 ** 2 - 2.0 * (params.r + params.phi * params.x) * p
           + 2.0 * params.x * qf - i_sq * (params.r ** 2 + params.x ** 2))
    return num / D


def distflow_residuals(p, params, c_total, qf, op):
    """Absolute residuals of the four circuit equations at an operating point.

    Returned in equation order (current, sending P, sending Q, voltage).
    """
    r, x, f0, v0, phi = params.r, params.x, params.f0, params.v0, params.phi
    w = op.v_sq
    l = op.i_sq
    e_cur = abs(l - (op.p_send * op.p_send + op.q_send * op.q_send) / (v0 * v0))
    e_p = abs(op.p_send - (p + l * r))
    e_q = abs(op.q_send - (phi * p - w * f0 * c_total - qf + l * x))
    e_v = abs(w - (v0 * v0 - 2.0 * (r * op.p_send + x * op.q_send)
                   + l * (r * r + x * x)))
    return e_cur, e_p, e_q, e_v
