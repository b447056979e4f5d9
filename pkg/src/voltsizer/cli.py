"""Command-line pipeline: synth -> estimate -> size -> simulate / sweep.

Configuration is a flat key = value text file ('#' starts a comment); every
key has a default except the paths. See README for the full key reference.
"""

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .circuit import CircuitParams, DeviceSizes
from .errors import ConfigError, VoltsizerError
from .load import (SyntheticConfig, TransitionModel, StationaryDistribution,
                   estimate_stationary, estimate_transition_model,
                   generate_synthetic_trace, ingest_trace, segment_stages,
                   write_trace)
from .realtime import (RealtimeConfig, run_benchmark_dstatcom_only,
                       run_benchmark_fixed_only, run_realtime_Hrt,
                       size_fixed_for_no_undervoltage)
from .sizing import (CostModel, SAConfig, TerminationThresholds,
                     control_table, optimal_sizing_Hosz)

SUMMARY_COLUMNS = ("delta,c0,cs_max,qf_max,violation_fraction,loss_cost,"
                   "capital_cost,total_cost,stage_count,switch_count,"
                   "outer_iterations,converged,error")


def _f(v):
    return float(v)


def _i(v):
    return int(v)


def _s(v):
    return v


def _opt_f(v):
    return None if v == "" else float(v)


def _floats(v):
    return [float(t) for t in v.replace(",", " ").split()]


def _matrix(v):
    if v == "":
        return None
    return [[float(t) for t in row.replace(",", " ").split()]
            for row in v.split(";") if row.strip()]


_SCHEMA = {
    # circuit
    "r": (_f, 1.1e-5), "x": (_f, 1.1e-5), "f0": (_f, 1.0), "v0": (_f, 1.0),
    "phi": (_f, 0.2), "epsilon": (_f, 0.02),
    # load support and sampling
    "p_lo": (_f, 2150.0), "p_hi": (_f, 3650.0), "dt": (_f, 5.0),
    # devices
    "k_levels": (_i, 1),
    # prices in natural units; converted once at load
    "energy_price_mwh": (_f, 50.0), "capacitor_price_mvar": (_f, 1000.0),
    "dstatcom_price_mvar": (_f, 100000.0), "lifetime_years": (_f, 30.0),
    # estimation
    "p_th": (_f, 200.0), "n_bins": (_i, 15), "n_parts": (_i, 50),
    # simulated annealing / outer loop
    "sa_t0": (_opt_f, None), "sa_cooling": (_f, 0.95),
    "sa_steps_per_temp": (_i, 50), "sa_step_c0": (_opt_f, None),
    "sa_step_cs": (_opt_f, None), "sa_step_qf": (_opt_f, None),
    "sa_restarts": (_i, 3), "sa_iteration_cap": (_i, 50_000),
    "outer_max": (_i, 20), "term_l_tol": (_f, 1e-3),
    "term_size_tol": (_f, 1e-3),
    # realtime
    "delay_samples": (_i, 2), "p_est": (_f, 100.0),
    # runs
    "delta": (_floats, [0.1]), "seed": (_i, 0),
    "trace": (_s, ""), "outdir": (_s, "out"),
    # synthetic generator
    "synth_samples": (_i, 100_000), "synth_mean_duration": (_f, 720.0),
    "synth_noise": (_f, 80.0), "synth_states": (_floats, None),
    "synth_trans": (_matrix, None),
    # benchmarks
    "benchmark_c0": (_opt_f, None),
}


@dataclass
class RunConfig:
    values: dict

    def __getattr__(self, key):
        try:
            return self.values[key]
        except KeyError:
            raise AttributeError(key)

    def params(self):
        v = self.values
        p = CircuitParams(r=v["r"], x=v["x"], f0=v["f0"], v0=v["v0"],
                          phi=v["phi"], epsilon=v["epsilon"])
        p.check_band_width(v["p_lo"])
        return p

    def cost(self):
        v = self.values
        return CostModel.from_prices(
            energy_price_mwh=v["energy_price_mwh"],
            capacitor_price_mvar=v["capacitor_price_mvar"],
            dstatcom_price_mvar=v["dstatcom_price_mvar"],
            lifetime_years=v["lifetime_years"])

    def sa_config(self, seed):
        v = self.values
        steps = None
        if all(v[k] is not None for k in ("sa_step_c0", "sa_step_cs",
                                          "sa_step_qf")):
            steps = np.array([v["sa_step_c0"], v["sa_step_cs"],
                              v["sa_step_qf"]])
        return SAConfig(t_initial=v["sa_t0"], cooling=v["sa_cooling"],
                        steps_per_temp=v["sa_steps_per_temp"],
                        step_sizes=steps, iteration_cap=v["sa_iteration_cap"],
                        seed=seed, restarts=v["sa_restarts"])

    def termination(self):
        v = self.values
        return TerminationThresholds(l_tol=v["term_l_tol"],
                                     size_tol=v["term_size_tol"],
                                     max_outer=v["outer_max"])

    def rt_config(self, delta):
        v = self.values
        return RealtimeConfig(d=v["delay_samples"], p_th=v["p_th"],
                              p_est=v["p_est"], delta=min(delta, 1.0))

    def synth_config(self):
        v = self.values
        kwargs = dict(p_lo=v["p_lo"], p_hi=v["p_hi"],
                      n_samples=v["synth_samples"],
                      mean_duration=v["synth_mean_duration"],
                      noise_scale=v["synth_noise"], dt=v["dt"])
        if v["synth_states"] is not None:
            kwargs["state_powers"] = np.asarray(v["synth_states"])
        if v["synth_trans"] is not None:
            kwargs["trans"] = np.asarray(v["synth_trans"])
        return SyntheticConfig(**kwargs)


def parse_config(path, overrides=None):
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    raw = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            key = key.strip().lower()
            if key not in _SCHEMA:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            raw[key] = val.strip()
    values = {}
    for key, (conv, default) in _SCHEMA.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for {key!r}: {exc}")
        else:
            values[key] = default
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    return RunConfig(values)


def _json_ready(obj):
    if isinstance(obj, dict):
        return {k: _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _json_ready(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_json_ready(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _fmt_delta(delta):
    return f"{delta:g}"


def _model_paths(cfg):
    out = cfg.outdir
    return os.path.join(out, "model.json"), os.path.join(out, "stationary.json")


def _load_artifacts(cfg):
    mpath, spath = _model_paths(cfg)
    for path in (mpath, spath):
        if not os.path.exists(path):
            raise ConfigError(
                f"estimation artifact missing: {path} (run 'estimate' first)")
    with open(mpath, "r", encoding="utf-8") as fh:
        model = TransitionModel.from_dict(json.load(fh))
    with open(spath, "r", encoding="utf-8") as fh:
        stat = StationaryDistribution.from_dict(json.load(fh))
    return model, stat


def cmd_synth(cfg):
    """Generate a synthetic trace at the configured trace path."""
    if not cfg.trace:
        raise ConfigError("config key 'trace' must name the output path")
    trace = generate_synthetic_trace(cfg.synth_config(), cfg.seed)
    os.makedirs(os.path.dirname(os.path.abspath(cfg.trace)), exist_ok=True)
    write_trace(trace, cfg.trace)
    print(f"synth: wrote {len(trace)} samples to {cfg.trace} "
          f"(p in [{trace.p.min():.1f}, {trace.p.max():.1f}] kW)")
    return 0


def cmd_estimate(cfg):
    """Estimate the transition model and stationary distribution."""
    if not cfg.trace:
        raise ConfigError("config key 'trace' must name the input trace")
    params = cfg.params()  # validates circuit config early
    trace = ingest_trace(cfg.trace, dt=cfg.dt, p_lo=cfg.p_lo, p_hi=cfg.p_hi)
    stages = segment_stages(trace, cfg.p_th)
    model = estimate_transition_model(stages, n_bins=cfg.n_bins)
    stat = estimate_stationary(trace, n_parts=cfg.n_parts)
    os.makedirs(cfg.outdir, exist_ok=True)
    mpath, spath = _model_paths(cfg)
    _write_json(mpath, model.to_dict())
    _write_json(spath, stat.to_dict())
    occupancy = model.counts.sum(axis=1).astype(int)
    print(f"estimate: {len(trace)} samples ({trace.clipped} clipped), "
          f"{len(stages)} stages")
    print(f"estimate: transition bins occupancy {occupancy.tolist()}")
    print(f"estimate: wrote {mpath} and {spath}")
    return 0


def _size_one(cfg, model, stat, delta, seed):
    params = cfg.params()
    cost = cfg.cost()
    drop = delta >= 1.0
    result = optimal_sizing_Hosz(
        stat, model, min(delta, 1.0), cost, params,
        sa=cfg.sa_config(seed), term=cfg.termination(),
        k_levels=cfg.k_levels, drop_chance=drop)
    table = control_table(result, stat, model, min(delta, 1.0), params,
                          drop_chance=drop)
    return result, table


def _sizes_payload(cfg, delta, result, table):
    ev = result.eval
    cost = cfg.cost()
    payload = {
        "delta": delta,
        "chance_dropped": bool(delta >= 1.0),
        "c0": result.sizes.c0,
        "cs_max": result.sizes.cs_max,
        "qf_max": result.sizes.qf_max,
        "k_levels": result.sizes.k_levels,
        "l_tilde": result.l_tilde,
        "converged": result.converged,
        "outer_iterations": result.outer_iterations,
        "objective": {"total": ev.total, "loss_term": ev.loss_term,
                      "capital_term": ev.capital_term},
        "cost_coefficients": {"k_p": cost.k_p, "k_0": cost.k_0,
                              "k_s": cost.k_s, "k_f": cost.k_f},
        "table": {k: table[k] for k in
                  ("p", "g1", "g2", "h1", "h2", "cs", "qf", "l_tilde")},
    }
    return payload


def _sizes_path(cfg, delta):
    return os.path.join(cfg.outdir, f"sizes_d{_fmt_delta(delta)}.json")


def cmd_size(cfg):
    """Run the optimal sizing loop for the first configured delta."""
    model, stat = _load_artifacts(cfg)
    delta = cfg.delta[0]
    result, table = _size_one(cfg, model, stat, delta, cfg.seed)
    os.makedirs(cfg.outdir, exist_ok=True)
    path = _sizes_path(cfg, delta)
    _write_json(path, _sizes_payload(cfg, delta, result, table))
    ev = result.eval
    print(f"size: delta={delta} -> C0={result.sizes.c0:.2f}, "
          f"Cs={result.sizes.cs_max:.2f}, qf_max={result.sizes.qf_max:.2f} "
          f"(K={result.sizes.k_levels})")
    print(f"size: objective {ev.total:.4f} $/day = loss {ev.loss_term:.4f} "
          f"+ capital {ev.capital_term:.4f}; converged={result.converged} "
          f"in {result.outer_iterations} outer iterations")
    print(f"size: wrote {path}")
    return 0


def _load_sizes(cfg, delta):
    path = _sizes_path(cfg, delta)
    if not os.path.exists(path):
        raise ConfigError(f"sizes artifact missing: {path} (run 'size' first)")
    with open(path, "r", encoding="utf-8") as fh:
        d = json.load(fh)
    sizes = DeviceSizes(c0=d["c0"], cs_max=d["cs_max"], qf_max=d["qf_max"],
                        k_levels=d["k_levels"])
    return sizes, np.asarray(d["l_tilde"], dtype=float), bool(d["chance_dropped"])


def _report_paths(cfg, tag):
    return (os.path.join(cfg.outdir, f"report_{tag}.json"),
            os.path.join(cfg.outdir, f"samples_{tag}.csv"))


def _emit_report(cfg, tag, report):
    os.makedirs(cfg.outdir, exist_ok=True)
    rpath, cpath = _report_paths(cfg, tag)
    payload = report.to_dict()
    cost = cfg.cost()
    payload["cost_coefficients"] = {"k_p": cost.k_p, "k_0": cost.k_0,
                                    "k_s": cost.k_s, "k_f": cost.k_f}
    _write_json(rpath, payload)
    report.write_samples_csv(cpath)
    print(f"simulate: {report.kind}: violation_fraction="
          f"{report.violation_fraction:.6f}, total_cost="
          f"{report.total_cost:.4f} $/day "
          f"(loss {report.loss_cost:.4f} + capital {report.capital_cost:.4f})")
    print(f"simulate: wrote {rpath} and {cpath}")


def cmd_simulate(cfg, benchmark=None):
    """Replay the controller (or a benchmark) over the configured trace."""
    if not cfg.trace:
        raise ConfigError("config key 'trace' must name the input trace")
    params = cfg.params()
    cost = cfg.cost()
    trace = ingest_trace(cfg.trace, dt=cfg.dt, p_lo=cfg.p_lo, p_hi=cfg.p_hi)
    if benchmark == "fixed":
        c0 = cfg.benchmark_c0
        if c0 is None:
            c0 = size_fixed_for_no_undervoltage(cfg.p_hi, params)
        report = run_benchmark_fixed_only(trace, c0, params, cost)
        _emit_report(cfg, "benchmark_fixed", report)
        return 0
    if benchmark == "dstatcom":
        report = run_benchmark_dstatcom_only(trace, params, cost)
        _emit_report(cfg, "benchmark_dstatcom", report)
        return 0
    model, stat = _load_artifacts(cfg)
    delta = cfg.delta[0]
    sizes, l_star, dropped = _load_sizes(cfg, delta)
    report = run_realtime_Hrt(trace, sizes, model, stat, l_star,
                              cfg.rt_config(delta), cost, params,
                              drop_chance=dropped)
    _emit_report(cfg, f"d{_fmt_delta(delta)}", report)
    return 0


def cmd_sweep(cfg):
    """Size and simulate for every configured delta; emit one summary CSV."""
    if not cfg.trace:
        raise ConfigError("config key 'trace' must name the input trace")
    params = cfg.params()
    cost = cfg.cost()
    trace = ingest_trace(cfg.trace, dt=cfg.dt, p_lo=cfg.p_lo, p_hi=cfg.p_hi)
    model, stat = _load_artifacts(cfg)
    os.makedirs(cfg.outdir, exist_ok=True)
    rows = []
    for idx, delta in enumerate(cfg.delta):
        seed = cfg.seed * 100003 + idx
        tag = f"d{_fmt_delta(delta)}"
        try:
            result, table = _size_one(cfg, model, stat, delta, seed)
            _write_json(_sizes_path(cfg, delta),
                        _sizes_payload(cfg, delta, result, table))
            report = run_realtime_Hrt(
                trace, result.sizes, model, stat, result.l_tilde,
                cfg.rt_config(delta), cost, params,
                drop_chance=delta >= 1.0)
            _emit_report(cfg, tag, report)
            rows.append(
                f"{delta!r},{result.sizes.c0!r},{result.sizes.cs_max!r},"
                f"{result.sizes.qf_max!r},{report.violation_fraction!r},"
                f"{report.loss_cost!r},{report.capital_cost!r},"
                f"{report.total_cost!r},{report.stage_count},"
                f"{report.switch_count},{result.outer_iterations},"
                f"{int(result.converged)},")
            print(f"sweep: delta={delta} done")
        except VoltsizerError as exc:
            msg = str(exc).replace(",", ";").replace("\n", " ")
            rows.append(f"{delta!r},,,,,,,,,,,,{type(exc).__name__}: {msg}")
            print(f"sweep: delta={delta} failed: {exc}")
    path = os.path.join(cfg.outdir, "summary.csv")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SUMMARY_COLUMNS + "\n")
        for row in rows:
            fh.write(row + "\n")
    print(f"sweep: wrote {path}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="voltsizer",
        description="Size and control reactive power devices on a radial "
                    "feeder with an intermittent load.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (("synth", "generate a synthetic load trace"),
                      ("estimate", "estimate load statistics from the trace"),
                      ("size", "run the optimal sizing loop"),
                      ("simulate", "replay the real-time controller"),
                      ("sweep", "size + simulate over the delta list")):
        sp = sub.add_parser(name, help=doc)
        sp.add_argument("--config", required=True, help="config file path")
        sp.add_argument("--delta", type=float, default=None,
                        help="override the configured delta (single value)")
        sp.add_argument("--seed", type=int, default=None,
                        help="override the configured seed")
        sp.add_argument("--out", default=None,
                        help="override the configured output directory")
        if name == "simulate":
            sp.add_argument("--benchmark", choices=("fixed", "dstatcom"),
                            default=None,
                            help="replay an uncontrolled benchmark instead")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    overrides = {"seed": args.seed, "outdir": args.out}
    if args.delta is not None:
        overrides["delta"] = [args.delta]
    try:
        cfg = parse_config(args.config, overrides)
        if args.command == "synth":
            return cmd_synth(cfg)
        if args.command == "estimate":
            return cmd_estimate(cfg)
        if args.command == "size":
            return cmd_size(cfg)
        if args.command == "simulate":
            return cmd_simulate(cfg, benchmark=getattr(args, "benchmark", None))
        if args.command == "sweep":
            return cmd_sweep(cfg)
        raise ConfigError(f"unknown command {args.command!r}")
    except (VoltsizerError, OSError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
