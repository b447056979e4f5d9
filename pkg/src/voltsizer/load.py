"""Load-trace handling: ingestion, stage segmentation, the stage-power
Markov transition model with its conditional quantiles, the sample-level
stationary distribution, and a synthetic trace generator standing in for
the proprietary measurement data.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, EmptyTrace, InsufficientData, ParseError

TRACE_HEADER = "index,power_kw"


@dataclass
class LoadTrace:
    """A contiguous sequence of load power samples.

    tau: sample indices; p: real power (pu = kW); dt: sampling period in
    seconds; p_lo/p_hi: configured support bounds; clipped: number of raw
    samples that fell outside the bounds at ingest.
    """
    tau: np.ndarray
    p: np.ndarray
    dt: float
    p_lo: float
    p_hi: float
    clipped: int = 0

    def __len__(self):
        return len(self.p)


@dataclass
class StageSequence:
    """Stages found by the online segmentation rule.

    Arrays are parallel: stage index t, first sample tau_start, duration in
    samples, and the stage average power. p_lo/p_hi are carried over from
    the trace for downstream binning.
    """
    t: np.ndarray
    tau_start: np.ndarray
    duration: np.ndarray
    p_avg: np.ndarray
    p_lo: float
    p_hi: float

    def __len__(self):
        return len(self.t)


@dataclass
class TransitionModel:
    """Binned first-order Markov model of consecutive stage powers."""
    bin_edges: np.ndarray
    trans: np.ndarray
    counts: np.ndarray

    @property
    def p_lo(self):
        return float(self.bin_edges[0])

    @property
    def p_hi(self):
        return float(self.bin_edges[-1])

    @property
    def n_bins(self):
        return len(self.bin_edges) - 1

    def row_index(self, p):
        idx = int(np.searchsorted(self.bin_edges, p, side="right")) - 1
        return min(max(idx, 0), self.n_bins - 1)

    def to_dict(self):
        return {"bin_edges": self.bin_edges.tolist(),
                "trans": self.trans.tolist(),
                "counts": self.counts.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(bin_edges=np.asarray(d["bin_edges"], dtype=float),
                   trans=np.asarray(d["trans"], dtype=float),
                   counts=np.asarray(d["counts"], dtype=float))


@dataclass
class StationaryDistribution:
    """Sample-level power distribution over an equal partition of
    [p_lo, p_hi]: weights are occupancy fractions, midpoints the
    representative powers used by the sizing objective."""
    partition: np.ndarray
    weights: np.ndarray
    midpoints: np.ndarray

    def __len__(self):
        return len(self.weights)

    def to_dict(self):
        return {"partition": self.partition.tolist(),
                "weights": self.weights.tolist(),
                "midpoints": self.midpoints.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(partition=np.asarray(d["partition"], dtype=float),
                   weights=np.asarray(d["weights"], dtype=float),
                   midpoints=np.asarray(d["midpoints"], dtype=float))


def ingest_trace(path, dt=5.0, p_lo=2150.0, p_hi=3650.0):
    """Read a trace file: one-line header then `index,power_kw` rows.

    Powers are clipped to [p_lo, p_hi] and the clip count recorded.
    Raises ParseError naming the offending row, EmptyTrace on no data.
    """
    if p_lo >= p_hi:
        raise ConfigError(f"p_lo={p_lo} must be below p_hi={p_hi}")
    taus = []
    powers = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise EmptyTrace(f"{path} is empty")
    start = 1 if not lines[0].split(",")[0].strip().lstrip("-").isdigit() else 0
    for rowno, line in enumerate(lines[start:], start=start + 1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"{path}:{rowno}: expected 'index,power_kw'")
        try:
            tau = int(parts[0])
            p = float(parts[1])
        except ValueError:
            raise ParseError(f"{path}:{rowno}: non-numeric field in {line!r}")
        if not math.isfinite(p):
            raise ParseError(f"{path}:{rowno}: non-finite power {parts[1]!r}")
        if taus and tau != taus[-1] + 1:
            raise ParseError(
                f"{path}:{rowno}: sample index {tau} is not contiguous "
                f"(previous {taus[-1]})")
        taus.append(tau)
        powers.append(p)
    if not powers:
        raise EmptyTrace(f"{path} has a header but no samples")
    p_arr = np.asarray(powers, dtype=float)
    clipped = int(np.count_nonzero((p_arr < p_lo) | (p_arr > p_hi)))
    p_arr = np.clip(p_arr, p_lo, p_hi)
    return LoadTrace(tau=np.asarray(taus, dtype=np.int64), p=p_arr,
                     dt=float(dt), p_lo=float(p_lo), p_hi=float(p_hi),
                     clipped=clipped)


def write_trace(trace, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(TRACE_HEADER + "\n")
        for tau, p in zip(trace.tau, trace.p):
            fh.write(f"{int(tau)},{float(p)!r}\n")


def segment_stages(trace, p_th):
    """Offline replay of the controller's stage logic.

    A new stage starts whenever a sample deviates from the running stage
    mean by more than p_th; the mean is updated incrementally exactly as
    the real-time rule does, so the final per-stage value equals the
    arithmetic mean of its samples.
    """
    if p_th <= 0:
        raise ValueError("p_th must be positive")
    if len(trace) == 0:
        raise EmptyTrace("cannot segment an empty trace")
    p = trace.p
    starts = [0]
    means = []
    durations = []
    mean = p[0]
    count = 1
    for tau in range(1, len(p)):
        if abs(p[tau] - mean) > p_th:
            means.append(mean)
            durations.append(count)
            starts.append(tau)
            mean = p[tau]
            count = 1
        else:
            mean = (mean * count + p[tau]) / (count + 1)
            count += 1
    means.append(mean)
    durations.append(count)
    n = len(starts)
    return StageSequence(t=np.arange(n, dtype=np.int64),
                         tau_start=np.asarray(starts, dtype=np.int64),
                         duration=np.asarray(durations, dtype=np.int64),
                         p_avg=np.asarray(means, dtype=float),
                         p_lo=trace.p_lo, p_hi=trace.p_hi)


def estimate_transition_model(stages, n_bins=15):
    """Row-stochastic transition matrix of consecutive stage-average powers.

    Unseen current-power rows fall back to the marginal next-stage
    distribution (maximum-entropy default for bins never visited).
    """
    if len(stages) < 2:
        raise InsufficientData(
            f"need at least 2 stages to estimate transitions, got {len(stages)}")
    if n_bins < 2:
        raise ValueError("n_bins must be >= 2")
    edges = np.linspace(stages.p_lo, stages.p_hi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, stages.p_avg, side="right") - 1,
                  0, n_bins - 1)
    counts = np.zeros((n_bins, n_bins))
    for a, b in zip(idx[:-1], idx[1:]):
        counts[a, b] += 1.0
    row_sums = counts.sum(axis=1)
    marginal = counts.sum(axis=0)
    marginal = marginal / marginal.sum()
    trans = np.empty_like(counts)
    for i in range(n_bins):
        if row_sums[i] > 0:
            trans[i] = counts[i] / row_sums[i]
        else:
            trans[i] = marginal
    return TransitionModel(bin_edges=edges, trans=trans, counts=counts)


def _conditional_cdf(model, p):
    row = model.trans[model.row_index(p)]
    cum = np.concatenate(([0.0], np.cumsum(row)))
    # guard against rounding in the final cumulative value
    cum[-1] = 1.0
    return row, cum


def quantile_h1(model, p, delta):
    """sup{h : P(next power <= h | p) <= delta} on the bin-interpolated
    conditional distribution."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    row, cum = _conditional_cdf(model, p)
    edges = model.bin_edges
    if delta >= 1.0:
        return float(edges[-1])
    # last bin whose left-edge cumulative stays within delta
    j = int(np.searchsorted(cum, delta, side="right")) - 1
    j = min(max(j, 0), model.n_bins - 1)
    if row[j] <= 0.0:
        return float(edges[j])
    frac = (delta - cum[j]) / row[j]
    return float(edges[j] + frac * (edges[j + 1] - edges[j]))


def quantile_h2(model, p, delta):
    """inf{h : P(next power >= h | p) <= delta}; the upper delta-quantile."""
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    row, cum = _conditional_cdf(model, p)
    edges = model.bin_edges
    target = 1.0 - delta
    if target <= 0.0:
        return float(edges[0])
    j = int(np.searchsorted(cum, target, side="left")) - 1
    j = min(max(j, 0), model.n_bins - 1)
    if row[j] <= 0.0:
        return float(edges[j + 1])
    frac = (target - cum[j]) / row[j]
    return float(edges[j] + frac * (edges[j + 1] - edges[j]))


def estimate_stationary(trace, n_parts=50):
    """Occupancy fractions of the 5-second samples over an equal partition.

    Deliberately uses sample-level data, not stage averages: stage powers
    carry no duration information.
    """
    if n_parts < 1:
        raise ValueError("n_parts must be >= 1")
    if len(trace) == 0:
        raise EmptyTrace("cannot estimate from an empty trace")
    partition = np.linspace(trace.p_lo, trace.p_hi, n_parts + 1)
    hist, _ = np.histogram(trace.p, bins=partition)
    weights = hist.astype(float) / len(trace)
    mids = 0.5 * (partition[:-1] + partition[1:])
    return StationaryDistribution(partition=partition, weights=weights,
                                  midpoints=mids)


@dataclass
class SyntheticConfig:
    """Generator settings for a piecewise-stationary synthetic trace.

    Stage powers follow the given Markov chain over state_powers, stage
    durations are geometric with the given mean, and samples carry i.i.d.
    uniform noise bounded by noise_scale (keep it below the segmentation
    threshold).
    """
    p_lo: float = 2150.0
    p_hi: float = 3650.0
    n_samples: int = 100_000
    mean_duration: float = 720.0
    noise_scale: float = 80.0
    # upward-jump masses are kept >= 0.12 so a 0.1-quantile of any
    # conditional reaches into the worst reachable bin (mirrors the
    # coverable-tail structure of the measured trace)
    state_powers: np.ndarray = field(
        default_factory=lambda: np.array([2300.0, 2600.0, 2900.0, 3200.0, 3500.0]))
    trans: np.ndarray = field(default_factory=lambda: np.array([
        [0.00, 0.52, 0.21, 0.12, 0.15],
        [0.26, 0.00, 0.42, 0.17, 0.15],
        [0.17, 0.28, 0.00, 0.37, 0.18],
        [0.10, 0.18, 0.40, 0.00, 0.32],
        [0.06, 0.14, 0.34, 0.46, 0.00],
    ]))
    dt: float = 5.0

    def validate(self):
        if self.p_lo >= self.p_hi:
            raise ConfigError(f"p_lo={self.p_lo} >= p_hi={self.p_hi}")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be positive")
        if self.mean_duration < 1:
            raise ConfigError("mean_duration must be >= 1 sample")
        if self.noise_scale < 0:
            raise ConfigError("noise_scale must be nonnegative")
        states = np.asarray(self.state_powers, dtype=float)
        if states.ndim != 1 or len(states) < 1:
            raise ConfigError("state_powers must be a nonempty vector")
        if (states < self.p_lo).any() or (states > self.p_hi).any():
            raise ConfigError("state powers must lie within [p_lo, p_hi]")
        trans = np.asarray(self.trans, dtype=float)
        if trans.shape != (len(states), len(states)):
            raise ConfigError("transition matrix shape must match state count")
        if (trans < 0).any() or not np.allclose(trans.sum(axis=1), 1.0,
                                                atol=1e-9):
            raise ConfigError("transition matrix rows must be probabilities")
        return states, trans


def generate_synthetic_trace_with_info(cfg, seed):
    """Generate a trace plus generator metadata (true stage count/boundaries)."""
    states, trans = cfg.validate()
    rng = np.random.default_rng(seed)
    n_states = len(states)
    samples = np.empty(cfg.n_samples)
    state = int(rng.integers(n_states))
    pos = 0
    stage_count = 0
    boundaries = []
    while pos < cfg.n_samples:
        dur = int(rng.geometric(1.0 / cfg.mean_duration))
        dur = min(dur, cfg.n_samples - pos)
        base = states[state]
        if cfg.noise_scale > 0:
            chunk = base + rng.uniform(-cfg.noise_scale, cfg.noise_scale,
                                       size=dur)
        else:
            chunk = np.full(dur, base)
        samples[pos:pos + dur] = chunk
        boundaries.append(pos)
        stage_count += 1
        pos += dur
        if n_states > 1:
            state = int(rng.choice(n_states, p=trans[state]))
    np.clip(samples, cfg.p_lo, cfg.p_hi, out=samples)
    trace = LoadTrace(tau=np.arange(cfg.n_samples, dtype=np.int64),
                      p=samples, dt=cfg.dt, p_lo=cfg.p_lo, p_hi=cfg.p_hi)
    info = {"stage_count": stage_count,
            "boundaries": np.asarray(boundaries, dtype=np.int64)}
    return trace, info


def generate_synthetic_trace(cfg, seed):
    """Deterministic synthetic load trace for a given seed."""
    trace, _ = generate_synthetic_trace_with_info(cfg, seed)
    return trace
