"""Online replay of the real-time controller over a load trace, the two
uncontrolled benchmark replays, and violation/cost aggregation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .circuit import QF_BISECTION_TOL
from .control import BoundsTable
from .errors import NoConvergence, StabilityViolation

SAMPLES_CSV_HEADER = "tau,p,cs,qf,v,loss,stage,feasible"


@dataclass(frozen=True)
class RealtimeConfig:
    """Controller replay settings: capacitor switching delay d (samples),
    new-stage threshold p_th, re-solve threshold p_est (both pu), and the
    chance tolerance delta used to build the slow-problem bounds."""
    d: int = 2
    p_th: float = 200.0
    p_est: float = 100.0
    delta: float = 0.1

    def __post_init__(self):
        if self.d < 0:
            raise ValueError("delay must be nonnegative")
        if not self.p_th > self.p_est > 0:
            raise ValueError("need p_th > p_est > 0")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


@dataclass
class SimulationReport:
    """Per-sample traces plus aggregate metrics for one replay."""
    kind: str
    tau: np.ndarray
    p: np.ndarray
    cs: np.ndarray
    qf: np.ndarray
    v: np.ndarray
    i: np.ndarray
    loss: np.ndarray
    stage: np.ndarray
    feasible: np.ndarray
    violation_fraction: float
    total_loss: float
    loss_cost: float
    capital_cost: float
    total_cost: float
    stage_count: int
    switch_count: int
    infeasible_slow_solves: int = 0
    infeasible_fast_samples: int = 0
    solve_events: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    @property
    def n_samples(self):
        return len(self.tau)

    def to_dict(self):
        d = {
            "kind": self.kind,
            "n_samples": int(self.n_samples),
            "violation_fraction": float(self.violation_fraction),
            "total_loss": float(self.total_loss),
            "loss_cost": float(self.loss_cost),
            "capital_cost": float(self.capital_cost),
            "total_cost": float(self.total_cost),
            "stage_count": int(self.stage_count),
            "switch_count": int(self.switch_count),
            "infeasible_slow_solves": int(self.infeasible_slow_solves),
            "infeasible_fast_samples": int(self.infeasible_fast_samples),
        }
        d.update(self.meta)
        return d

    def write_samples_csv(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(SAMPLES_CSV_HEADER + "\n")
            for k in range(self.n_samples):
                fh.write(f"{int(self.tau[k])},{float(self.p[k])!r},"
                         f"{float(self.cs[k])!r},{float(self.qf[k])!r},"
                         f"{float(self.v[k])!r},{float(self.loss[k])!r},"
                         f"{int(self.stage[k])},{int(self.feasible[k])}\n")


def _aggregate(kind, trace, cs_vals, qf, w, l, stage, feas, params, cost,
               capital, stage_count, switch_count, hs_infeasible=0,
               solve_events=None, meta=None, n=None):
    n = len(trace.p) if n is None else n
    v0sq = params.v0 ** 2
    w = w[:n]
    l = l[:n]
    loss = l * params.r
    # band edges computed exactly as the controller computes its targets;
    # a centered |w - v0^2| > eps re-rounds and misflags points sitting
    # bitwise on the floor
    floor = v0sq - params.epsilon
    ceil = v0sq + params.epsilon
    violations = int(np.count_nonzero((w < floor) | (w > ceil)))
    loss_cost = cost.k_p * float(loss.mean()) if n else 0.0
    return SimulationReport(
        kind=kind,
        tau=trace.tau[:n].copy(),
        p=trace.p[:n].copy(),
        cs=np.asarray(cs_vals[:n], dtype=float),
        qf=np.asarray(qf[:n], dtype=float),
        v=np.sqrt(w),
        i=np.sqrt(l),
        loss=loss,
        stage=np.asarray(stage[:n]),
        feasible=np.asarray(feas[:n], dtype=np.int8),
        violation_fraction=violations / n if n else 0.0,
        total_loss=float(loss.sum()),
        loss_cost=loss_cost,
        capital_cost=float(capital),
        total_cost=loss_cost + float(capital),
        stage_count=int(stage_count),
        switch_count=int(switch_count),
        infeasible_slow_solves=int(hs_infeasible),
        infeasible_fast_samples=int(np.count_nonzero(feas[:n] == 0)),
        solve_events=solve_events or {},
        meta=meta or {},
    )


def run_realtime_Hrt(trace, sizes, model, stat, l_star, rt, cost, params,
                     drop_chance=False):
    """Replay the online controller over a trace.

    Stage starts and re-solves follow the running-mean rules with delay d;
    slow-problem bounds are interpolated from the sizing run's per-midpoint
    tables built with the converged loss proxies l_star; the D-STATCOM is
    re-optimized at every sample on the exact model. A power-flow failure
    aborts with NoConvergence carrying the partial report and position.
    """
    if len(trace) == 0:
        raise ValueError("cannot replay an empty trace")
    sizes.check_stability(params)
    table = BoundsTable(stat.midpoints, model, rt.delta, params,
                        drop_chance=drop_chance)
    l_star = np.asarray(l_star, dtype=float)
    if l_star.shape != table.p.shape:
        raise ValueError(
            f"l_star must have length {len(table.p)}, got {l_star.shape}")
    g1, g2, ub, lb = table.assemble(l_star)
    use_chance = not drop_chance
    h1 = table.h1 if use_chance else np.zeros_like(g1)
    h2 = table.h2 if use_chance else np.zeros_like(g2)

    (cs_lvl, qf, w, l, stage, cf_feas, hs_inf, ev_tau, ev_eff, ev_lvl,
     ev_feas, n_events, err_pos, status) = _kernels.replay_core(
        trace.p, int(rt.d), float(rt.p_th), float(rt.p_est),
        float(sizes.c0), float(sizes.cs_max), int(sizes.k_levels),
        float(sizes.qf_max), table.p, g1, g2, h1, h2, use_chance,
        params.r, params.x, params.f0, params.v0, params.phi,
        params.epsilon, table.a1, table.a2, QF_BISECTION_TOL)

    n = err_pos if err_pos >= 0 else len(trace.p)
    cs_vals = (cs_lvl.astype(float) / sizes.k_levels) * sizes.cs_max
    events = {
        "tau": ev_tau[:n_events].copy(),
        "effective": ev_eff[:n_events].copy(),
        "level": ev_lvl[:n_events].copy(),
        "feasible": ev_feas[:n_events].copy(),
    }
    switch_count = int(np.count_nonzero(np.diff(cs_lvl[:n]))) if n > 1 else 0
    stage_count = int(stage[n - 1]) + 1 if n > 0 else 0
    report = _aggregate(
        "controlled", trace, cs_vals, qf, w, l, stage, cf_feas, params, cost,
        capital=cost.capital(sizes, params), stage_count=stage_count,
        switch_count=switch_count, hs_infeasible=int(hs_inf[:n].sum()),
        solve_events=events,
        meta={"delta": rt.delta, "chance_dropped": bool(drop_chance),
              "c0": sizes.c0, "cs_max": sizes.cs_max, "qf_max": sizes.qf_max},
        n=n)
    if status != _kernels.STATUS_OK:
        raise NoConvergence(
            f"power flow failed during replay at tau={err_pos}",
            position=int(err_pos), partial_report=report)
    return report


def run_benchmark_fixed_only(trace, c0_fixed, params, cost):
    """Replay with only a fixed capacitor and no control actions."""
    if len(trace) == 0:
        raise ValueError("cannot replay an empty trace")
    if 1.0 - 2.0 * params.x * params.f0 * c0_fixed <= 0.0:
        raise StabilityViolation(f"unstable fixed capacitance {c0_fixed}")
    n_tot = len(trace.p)
    c_arr = np.full(n_tot, float(c0_fixed))
    z = np.zeros(n_tot)
    w, l, P, Q, status = _kernels.batch_solve_core(
        trace.p, c_arr, z, params.r, params.x, params.f0, params.v0,
        params.phi)
    bad = np.nonzero(status != _kernels.STATUS_OK)[0]
    n = int(bad[0]) if len(bad) else n_tot
    v0sq = params.v0 ** 2
    feas = ((w >= v0sq - params.epsilon)
            & (w <= v0sq + params.epsilon)).astype(np.int8)
    capital = cost.k_0 * params.v0 ** 2 * params.f0 * c0_fixed
    report = _aggregate(
        "benchmark_fixed", trace, z, z, w, l, np.zeros(n_tot, dtype=np.int64),
        feas, params, cost, capital=capital, stage_count=0, switch_count=0,
        meta={"c0_fixed": float(c0_fixed)}, n=n)
    if n < n_tot:
        raise NoConvergence(
            f"power flow failed during benchmark replay at tau={n}",
            position=n, partial_report=report)
    return report


def min_qf_for_band(p, c_total, params, tol=QF_BISECTION_TOL, cap=1e9):
    """Smallest qf reaching the band floor at load p (bisection; the
    returned value satisfies v^2 >= v0^2 - epsilon)."""
    target = params.v0 ** 2 - params.epsilon

    def vsq(qf):
        w, l, P, Q, st = _kernels.distflow_core(
            float(p), float(c_total), float(qf), params.r, params.x,
            params.f0, params.v0, params.phi)
        if st != _kernels.STATUS_OK:
            raise NoConvergence(f"power flow failed probing qf={qf} at p={p}")
        return w

    if vsq(0.0) >= target:
        return 0.0
    hi = 1.0
    while vsq(hi) < target:
        hi *= 2.0
        if hi > cap:
            raise NoConvergence(f"no qf below {cap} reaches the band at p={p}")
    lo = hi / 2.0 if hi > 1.0 else 0.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if vsq(mid) >= target:
            hi = mid
        else:
            lo = mid
    return hi


def size_fixed_for_no_undervoltage(p_hi, params, tol=1e-9):
    """Smallest fixed capacitance keeping v^2 >= v0^2 - epsilon at peak load.

    Bisects on c0. Voltage rises monotonically with c0 over the solvable
    prefix of the stable region; points where the power flow stops
    converging lie above the minimum, so they count as the upper side.
    """
    target = params.v0 ** 2 - params.epsilon
    cap = 0.999 / (2.0 * params.x * params.f0)

    def at_or_above(c0):
        w, l, P, Q, st = _kernels.distflow_core(
            float(p_hi), float(c0), 0.0, params.r, params.x, params.f0,
            params.v0, params.phi)
        if st != _kernels.STATUS_OK:
            return True, None
        return w >= target, w

    ok0, w0 = at_or_above(0.0)
    if ok0 and w0 is not None:
        return 0.0
    lo = 0.0
    hi = cap
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        above, _ = at_or_above(mid)
        if above:
            hi = mid
        else:
            lo = mid
    above, w = at_or_above(hi)
    if not above or w is None:
        raise StabilityViolation(
            f"no stable fixed capacitance reaches the band at p={p_hi}")
    return hi


def run_benchmark_dstatcom_only(trace, params, cost):
    """Replay with only a D-STATCOM: C0 = cs = 0, half-range set to the
    minimum making the fast problem feasible at peak load, re-optimized
    every sample."""
    if len(trace) == 0:
        raise ValueError("cannot replay an empty trace")
    qf_max = min_qf_for_band(trace.p_hi, 0.0, params)
    n_tot = len(trace.p)
    qf, w, l, feas, err_pos, status = _kernels.fast_replay_core(
        trace.p, 0.0, qf_max, params.r, params.x, params.f0, params.v0,
        params.phi, params.epsilon, QF_BISECTION_TOL)
    n = err_pos if err_pos >= 0 else n_tot
    capital = cost.k_f * qf_max
    report = _aggregate(
        "benchmark_dstatcom", trace, np.zeros(n_tot), qf, w, l,
        np.zeros(n_tot, dtype=np.int64), feas, params, cost, capital=capital,
        stage_count=0, switch_count=0, meta={"qf_max": float(qf_max)}, n=n)
    if status != _kernels.STATUS_OK:
        raise NoConvergence(
            f"power flow failed during benchmark replay at tau={err_pos}",
            position=int(err_pos), partial_report=report)
    return report
