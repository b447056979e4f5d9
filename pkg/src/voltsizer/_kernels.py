"""Hot numeric kernels.

Everything here is scalar-loop code compiled with @njit unless
``VOLTSIZER_DISABLE_NUMBA`` selects the pure-Python path (see ``accel``).
No fastmath anywhere: both paths must agree bit-for-bit.

Status codes returned by the solvers:
  0  OK
  1  no convergence (operating point outside the solvable regime)
  2  stability violation (1 - 2*x*f0*C <= 0)
"""

import numpy as np

from .accel import maybe_jit

STATUS_OK = 0
STATUS_NO_CONVERGENCE = 1
STATUS_UNSTABLE = 2

# iteration budget: plain fixed point, then damped Newton, then polish
_PLAIN_ITERS = 60
_NEWTON_ITERS = 100
_POLISH_ITERS = 40
_REL_TOL = 1e-12


@maybe_jit
def distflow_core(p, c_total, qf, r, x, f0, v0, phi):
    """Solve the single-branch power-flow equations for the high-voltage root.

    Returns (v^2, i^2, P, Q, status). The current-squared fixed point is
    iterated from 0 (which converges to the low-loss root) until it lands on
    a bitwise fixed point of the rounded map; a damped Newton step sequence
    takes over if plain iteration is still moving after _PLAIN_ITERS sweeps.
    The returned tuple is assembled so each of the four circuit equations is
    reproduced to well under 1e-9 when re-evaluated from the returned values
    (the i^2 equation exactly, by construction).
    """
    B = r * r + x * x
    D = 1.0 - 2.0 * x * f0 * c_total
    if D <= 0.0:
        return 0.0, 0.0, 0.0, 0.0, STATUS_UNSTABLE
    v0sq = v0 * v0
    A = v0sq - 2.0 * (r + phi * x) * p + 2.0 * x * qf
    # collapse the four equations onto l = F(l), F quadratic with
    # coefficients fixed by (p, c_total, qf)
    q0 = phi * p - qf - f0 * c_total * A / D
    xe = x + f0 * c_total * B / D

    l = 0.0
    l_prev = -1.0
    converged = False
    it = 0
    while it < _PLAIN_ITERS + _POLISH_ITERS:
        pl = p + l * r
        ql = q0 + l * xe
        ln = (pl * pl + ql * ql) / v0sq
        if ln == l:
            converged = True
            break
        if ln == l_prev:
            # 1-ulp two-cycle of the rounded map; settle on the midpoint
            l = 0.5 * (l + ln)
            converged = True
            break
        if not (ln >= 0.0) or ln > 1e120:
            return 0.0, 0.0, 0.0, 0.0, STATUS_NO_CONVERGENCE
        l_prev = l
        l = ln
        it += 1
        if it == _PLAIN_ITERS:
            # slow contraction (near the two-root boundary): damped Newton
            # on g(l) = F(l) - l, approaching the low-loss root from below
            for _ in range(_NEWTON_ITERS):
                pl = p + l * r
                ql = q0 + l * xe
                fv = (pl * pl + ql * ql) / v0sq
                g = fv - l
                gp = 2.0 * (r * pl + xe * ql) / v0sq - 1.0
                if gp == 0.0:
                    break
                step = -g / gp
                lx = l + step
                nh = 0
                while lx < 0.0 and nh < 64:
                    step *= 0.5
                    lx = l + step
                    nh += 1
                if not (lx >= 0.0) or lx > 1e120:
                    return 0.0, 0.0, 0.0, 0.0, STATUS_NO_CONVERGENCE
                moved = abs(lx - l)
                l = lx
                if moved <= 1e-14 * (1.0 + abs(l)):
                    break
            l_prev = -1.0

    if not converged:
        pl = p + l * r
        ql = q0 + l * xe
        ln = (pl * pl + ql * ql) / v0sq
        if abs(ln - l) > _REL_TOL * max(1.0, abs(l)):
            return 0.0, 0.0, 0.0, 0.0, STATUS_NO_CONVERGENCE

    # final assembly in the literal equation forms; anchoring the returned
    # i^2 to (P^2+Q^2)/v0^2 keeps every residual inside the 1e-9 budget
    # even though i^2 itself is ~1e7 pu^2 at the 1 kW base
    w = (A - l * B) / D
    if w <= 0.0:
        return 0.0, 0.0, 0.0, 0.0, STATUS_NO_CONVERGENCE
    P = p + l * r
    Q = phi * p - w * f0 * c_total - qf + l * x
    l_ret = (P * P + Q * Q) / v0sq
    return w, l_ret, P, Q, STATUS_OK


@maybe_jit
def batch_solve_core(p_arr, c_arr, qf_arr, r, x, f0, v0, phi):
    n = p_arr.shape[0]
    w = np.zeros(n)
    l = np.zeros(n)
    ps = np.zeros(n)
    qs = np.zeros(n)
    status = np.zeros(n, dtype=np.int64)
    for i in range(n):
        w[i], l[i], ps[i], qs[i], status[i] = distflow_core(
            p_arr[i], c_arr[i], qf_arr[i], r, x, f0, v0, phi)
    return w, l, ps, qs, status


@maybe_jit
def fast_qf_core(p, c_total, qf_max, r, x, f0, v0, phi, eps, qf_tol):
    """Loss-minimal D-STATCOM setting on the exact power-flow model.

    In the operating regime loss grows with qf, so the optimum is the
    smallest qf keeping v^2 >= v0^2 - eps; found by bisection and clamped
    to [-qf_max, qf_max]. The clamped point is returned even when the band
    cannot be met (feasible = 0).

    Returns (qf, v^2, i^2, P, Q, feasible, status).
    """
    v0sq = v0 * v0
    target = v0sq - eps
    w, l, P, Q, st = distflow_core(p, c_total, -qf_max, r, x, f0, v0, phi)
    if st != STATUS_OK:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0, st
    if w >= target:
        feas = 1 if w <= v0sq + eps else 0
        return -qf_max, w, l, P, Q, feas, STATUS_OK
    w, l, P, Q, st = distflow_core(p, c_total, qf_max, r, x, f0, v0, phi)
    if st != STATUS_OK:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0, st
    if w < target:
        # even full injection cannot reach the band floor
        return qf_max, w, l, P, Q, 0, STATUS_OK
    lo = -qf_max
    hi = qf_max
    while hi - lo > qf_tol:
        mid = 0.5 * (lo + hi)
        w, l, P, Q, st = distflow_core(p, c_total, mid, r, x, f0, v0, phi)
        if st != STATUS_OK:
            return 0.0, 0.0, 0.0, 0.0, 0.0, 0, st
        if w >= target:
            hi = mid
        else:
            lo = mid
    w, l, P, Q, st = distflow_core(p, c_total, hi, r, x, f0, v0, phi)
    if st != STATUS_OK:
        return 0.0, 0.0, 0.0, 0.0, 0.0, 0, st
    feas = 1 if (w >= target and w <= v0sq + eps) else 0
    return hi, w, l, P, Q, feas, STATUS_OK


@maybe_jit
def hs_scan_core(c0, cs_max, k_levels, qf_max, ub, lb, g2, a1, a2):
    """Ascending capacitor-level scan of the simplified affine system.

    ub = min(g1, h1), lb = max(g2, h2); a1 = f0*(v0^2+eps), a2 = f0*(v0^2-eps).
    Returns (found, k, cs, qf) with the first feasible level and the proxy
    D-STATCOM setting clamped at -qf_max.
    """
    for k in range(k_levels + 1):
        cs = (k / k_levels) * cs_max
        ctot = c0 + cs
        if a1 * ctot - qf_max <= ub and a2 * ctot + qf_max >= lb:
            qf = g2 - a2 * ctot
            if qf < -qf_max:
                qf = -qf_max
            return 1, k, cs, qf
    return 0, -1, 0.0, 0.0


@maybe_jit
def sizing_objective_core(c0, cs_max, k_levels, qf_max, p_mids, rho,
                          ub, lb, g2, r, x, f0, v0, phi, a1, a2, k_p):
    """Loss term of the approximate sizing objective over the partition.

    Runs the capacitor-control scan at every representative power; any
    infeasible point (or a failed exact solve, which only happens for
    candidates outside the stable regime) marks the whole candidate
    infeasible. Returns (feasible, k_p-weighted loss sum, cs_n, qf_n, i^2_n).
    """
    n = p_mids.shape[0]
    cs_arr = np.zeros(n)
    qf_arr = np.zeros(n)
    lsq_arr = np.zeros(n)
    if 1.0 - 2.0 * x * f0 * (c0 + cs_max) <= 0.0:
        return 0, 0.0, cs_arr, qf_arr, lsq_arr
    total = 0.0
    for i in range(n):
        found, k, cs, qf = hs_scan_core(
            c0, cs_max, k_levels, qf_max, ub[i], lb[i], g2[i], a1, a2)
        if found == 0:
            return 0, 0.0, cs_arr, qf_arr, lsq_arr
        w, l, P, Q, st = distflow_core(p_mids[i], c0 + cs, qf, r, x, f0, v0, phi)
        if st != STATUS_OK:
            return 0, 0.0, cs_arr, qf_arr, lsq_arr
        cs_arr[i] = cs
        qf_arr[i] = qf
        lsq_arr[i] = l
        total += k_p * (l * r) * rho[i]
    return 1, total, cs_arr, qf_arr, lsq_arr


@maybe_jit
def interp_clamped(xs, ys, xq):
    """Piecewise-linear interpolation with end-value clamping."""
    n = xs.shape[0]
    if xq <= xs[0]:
        return ys[0]
    if xq >= xs[n - 1]:
        return ys[n - 1]
    lo = 0
    hi = n - 1
    while hi - lo > 1:
        m = (lo + hi) // 2
        if xs[m] <= xq:
            lo = m
        else:
            hi = m
    t = (xq - xs[lo]) / (xs[hi] - xs[lo])
    return ys[lo] + t * (ys[hi] - ys[lo])


@maybe_jit
def replay_core(p_arr, d, p_th, p_est, c0, cs_max, k_levels, qf_max,
                tab_p, tab_g1, tab_g2, tab_h1, tab_h2, use_chance,
                r, x, f0, v0, phi, eps, a1, a2, qf_tol):
    """Online replay of the real-time control heuristic over a sample array.

    Stage detection and running-mean updates follow the controller verbatim;
    capacitor levels are scheduled with delay d. Slow-problem bounds come
    from linear interpolation of the individual per-partition tables
    (g1, g2 and, when chance rows are active, h1, h2), combined after
    interpolation. Returns per-sample arrays, the solve-event log, and
    (err_pos, status) where err_pos >= 0 marks a power-flow failure at that
    sample (arrays valid before it).
    """
    n = p_arr.shape[0]
    cs_lvl = np.zeros(n, dtype=np.int32)
    qf_out = np.zeros(n)
    w_out = np.zeros(n)
    l_out = np.zeros(n)
    stage_out = np.zeros(n, dtype=np.int64)
    cf_feas = np.zeros(n, dtype=np.int8)
    hs_inf = np.zeros(n, dtype=np.int8)
    ev_tau = np.zeros(n, dtype=np.int64)
    ev_eff = np.zeros(n, dtype=np.int64)
    ev_lvl = np.zeros(n, dtype=np.int32)
    ev_feas = np.zeros(n, dtype=np.int8)
    n_events = 0

    sched = np.zeros(n + d + 1, dtype=np.int32)
    t = 0
    pmean = p_arr[0]
    ptil = p_arr[0]
    big_t = 1
    err_pos = -1
    status = STATUS_OK

    for tau in range(n):
        pcur = p_arr[tau]
        do_solve = False
        if tau == 0:
            do_solve = True
        elif abs(pcur - pmean) > p_th:
            t += 1
            pmean = pcur
            ptil = pcur
            big_t = 1
            do_solve = True
        else:
            pmean = (pmean * big_t + pcur) / (big_t + 1)
            big_t += 1
            if abs(pmean - ptil) > p_est:
                ptil = pmean
                do_solve = True

        if do_solve:
            g2q = interp_clamped(tab_p, tab_g2, ptil)
            ubq = interp_clamped(tab_p, tab_g1, ptil)
            lbq = g2q
            if use_chance:
                h1q = interp_clamped(tab_p, tab_h1, ptil)
                h2q = interp_clamped(tab_p, tab_h2, ptil)
                if h1q < ubq:
                    ubq = h1q
                if h2q > lbq:
                    lbq = h2q
            found, k, cs, qfp = hs_scan_core(
                c0, cs_max, k_levels, qf_max, ubq, lbq, g2q, a1, a2)
            if found == 1:
                sched[tau + d] = k
            else:
                if tau + d - 1 >= 0:
                    sched[tau + d] = sched[tau + d - 1]
                else:
                    sched[tau + d] = 0
                hs_inf[tau] = 1
            if tau == 0:
                # warm start: the controller is assumed to have been
                # running before the trace, so the pre-scheduled levels
                # match the stage-0 solution
                for j in range(d):
                    sched[j] = sched[d]
            ev_tau[n_events] = tau
            ev_eff[n_events] = tau + d
            ev_lvl[n_events] = sched[tau + d]
            ev_feas[n_events] = found
            n_events += 1
        else:
            sched[tau + d] = sched[tau + d - 1]

        lvl = sched[tau]
        cs_app = (lvl / k_levels) * cs_max
        qf_s, w_s, l_s, P_s, Q_s, feas, st = fast_qf_core(
            pcur, c0 + cs_app, qf_max, r, x, f0, v0, phi, eps, qf_tol)
        if st != STATUS_OK:
            err_pos = tau
            status = st
            break
        cs_lvl[tau] = lvl
        qf_out[tau] = qf_s
        w_out[tau] = w_s
        l_out[tau] = l_s
        stage_out[tau] = t
        cf_feas[tau] = feas

    return (cs_lvl, qf_out, w_out, l_out, stage_out, cf_feas, hs_inf,
            ev_tau, ev_eff, ev_lvl, ev_feas, n_events, err_pos, status)


@maybe_jit
def fast_replay_core(p_arr, c_total, qf_max, r, x, f0, v0, phi, eps, qf_tol):
    """Per-sample fast control with fixed capacitance (D-STATCOM benchmark)."""
    n = p_arr.shape[0]
    qf_out = np.zeros(n)
    w_out = np.zeros(n)
    l_out = np.zeros(n)
    feas = np.zeros(n, dtype=np.int8)
    err_pos = -1
    status = STATUS_OK
    for tau in range(n):
        qf_s, w_s, l_s, P_s, Q_s, fe, st = fast_qf_core(
            p_arr[tau], c_total, qf_max, r, x, f0, v0, phi, eps, qf_tol)
        if st != STATUS_OK:
            err_pos = tau
            status = st
            break
        qf_out[tau] = qf_s
        w_out[tau] = w_s
        l_out[tau] = l_s
        feas[tau] = fe
    return qf_out, w_out, l_out, feas, err_pos, status
