import numpy as np
import pytest

import voltsizer as vz
from voltsizer.load import generate_synthetic_trace_with_info, write_trace

from conftest import P_HI, P_LO
from oracles import quantile_mass_below


def make_trace(p, p_lo=P_LO, p_hi=P_HI, dt=5.0):
    p = np.asarray(p, dtype=float)
    return vz.LoadTrace(tau=np.arange(len(p), dtype=np.int64), p=p, dt=dt,
                        p_lo=p_lo, p_hi=p_hi)


def uniform_model(p_lo=2000.0, p_hi=3000.0, n_bins=10):
    """Transition model whose every conditional is uniform on the support."""
    edges = np.linspace(p_lo, p_hi, n_bins + 1)
    trans = np.full((n_bins, n_bins), 1.0 / n_bins)
    return vz.TransitionModel(bin_edges=edges, trans=trans,
                              counts=np.zeros((n_bins, n_bins)))


class TestIngest:
    def test_well_formed_file(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("index,power_kw\n0,2500\n1,2600\n2,2700\n")
        trace = vz.ingest_trace(path, dt=5.0, p_lo=P_LO, p_hi=P_HI)
        assert len(trace) == 3
        assert trace.clipped == 0
        assert trace.p.tolist() == [2500.0, 2600.0, 2700.0]

    def test_clipping_counted(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("index,power_kw\n0,2500\n1,9999\n")
        trace = vz.ingest_trace(path, p_lo=P_LO, p_hi=P_HI)
        assert trace.clipped == 1
        assert trace.p[1] == P_HI

    def test_parse_error_names_row(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("index,power_kw\n0,2500\n1,oops\n")
        with pytest.raises(vz.ParseError, match=":3"):
            vz.ingest_trace(path)

    def test_empty_trace(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("index,power_kw\n")
        with pytest.raises(vz.EmptyTrace):
            vz.ingest_trace(path)
        path.write_text("")
        with pytest.raises(vz.EmptyTrace):
            vz.ingest_trace(path)

    def test_non_contiguous_rejected(self, tmp_path):
        path = tmp_path / "t.csv"
        path.write_text("index,power_kw\n0,2500\n2,2600\n")
        with pytest.raises(vz.ParseError, match="contiguous"):
            vz.ingest_trace(path)

    def test_roundtrip_via_writer(self, tmp_path):
        trace = make_trace([2500.0, 2612.345, 3100.0])
        path = tmp_path / "t.csv"
        write_trace(trace, path)
        back = vz.ingest_trace(path, p_lo=P_LO, p_hi=P_HI)
        assert np.array_equal(back.p, trace.p)


class TestSegmentation:
    def test_constant_trace_single_stage(self):
        trace = make_trace(np.full(100, 2500.0))
        stages = vz.segment_stages(trace, p_th=200.0)
        assert len(stages) == 1
        assert stages.p_avg[0] == 2500.0
        assert stages.duration[0] == 100

    def test_step_trace_two_stages(self):
        p = np.concatenate([np.full(50, 2400.0), np.full(50, 3000.0)])
        stages = vz.segment_stages(make_trace(p), p_th=200.0)
        assert len(stages) == 2
        assert stages.tau_start.tolist() == [0, 50]
        assert stages.p_avg.tolist() == [2400.0, 3000.0]

    def test_small_fluctuations_keep_one_stage(self):
        rng = np.random.default_rng(3)
        p = 2800.0 + rng.uniform(-150.0, 150.0, size=500)
        stages = vz.segment_stages(make_trace(p), p_th=200.0)
        assert len(stages) == 1

    def test_empty_trace_rejected(self):
        trace = make_trace([])
        with pytest.raises(vz.EmptyTrace):
            vz.segment_stages(trace, p_th=200.0)
        with pytest.raises(ValueError):
            vz.segment_stages(make_trace([2500.0]), p_th=0.0)

    def test_stage_means_reconstruct_trace_mean(self):
        rng = np.random.default_rng(4)
        p = np.concatenate([
            2400.0 + rng.uniform(-80, 80, 300),
            3000.0 + rng.uniform(-80, 80, 200),
            2600.0 + rng.uniform(-80, 80, 400),
        ])
        trace = make_trace(p)
        stages = vz.segment_stages(trace, p_th=200.0)
        total = float((stages.p_avg * stages.duration).sum())
        assert stages.duration.sum() == len(trace)
        assert abs(total / len(trace) - p.mean()) <= 1e-12 * abs(p.mean())

    def test_durations_partition_trace(self):
        rng = np.random.default_rng(5)
        p = rng.choice([2300.0, 2900.0, 3500.0], size=300) \
            + rng.uniform(-50, 50, 300)
        trace = make_trace(p)
        stages = vz.segment_stages(trace, p_th=200.0)
        assert stages.duration.sum() == len(trace)
        assert (stages.duration >= 1).all()
        ends = stages.tau_start + stages.duration
        assert np.array_equal(ends[:-1], stages.tau_start[1:])


class TestTransitionModel:
    def test_alternating_two_bins(self):
        p_avg = np.array([2200.0, 3600.0] * 10)
        stages = vz.StageSequence(
            t=np.arange(20), tau_start=np.arange(20),
            duration=np.ones(20, dtype=np.int64), p_avg=p_avg,
            p_lo=P_LO, p_hi=P_HI)
        model = vz.estimate_transition_model(stages, n_bins=2)
        a = model.row_index(2200.0)
        b = model.row_index(3600.0)
        assert model.trans[a, b] == 1.0
        assert model.trans[b, a] == 1.0

    def test_single_bin_self_loop_and_marginal_fallback(self):
        p_avg = np.full(5, 2500.0)
        stages = vz.StageSequence(
            t=np.arange(5), tau_start=np.arange(5),
            duration=np.ones(5, dtype=np.int64), p_avg=p_avg,
            p_lo=P_LO, p_hi=P_HI)
        model = vz.estimate_transition_model(stages, n_bins=3)
        occupied = model.row_index(2500.0)
        assert model.trans[occupied, occupied] == 1.0
        for row in range(model.n_bins):
            if row != occupied:
                # unseen rows fall back to the marginal (all mass in the
                # single observed next-stage bin)
                assert model.trans[row, occupied] == 1.0

    def test_rows_are_probability_vectors(self):
        rng = np.random.default_rng(6)
        p_avg = rng.uniform(P_LO, P_HI, size=500)
        stages = vz.StageSequence(
            t=np.arange(500), tau_start=np.arange(500),
            duration=np.ones(500, dtype=np.int64), p_avg=p_avg,
            p_lo=P_LO, p_hi=P_HI)
        model = vz.estimate_transition_model(stages, n_bins=15)
        assert (model.trans >= 0).all()
        assert np.abs(model.trans.sum(axis=1) - 1.0).max() <= 1e-12

    def test_recovers_known_chain(self):
        true = np.array([[0.1, 0.6, 0.3],
                         [0.5, 0.2, 0.3],
                         [0.2, 0.3, 0.5]])
        states = np.array([2400.0, 2900.0, 3400.0])
        rng = np.random.default_rng(7)
        seq = [0]
        for _ in range(2000):
            seq.append(rng.choice(3, p=true[seq[-1]]))
        p_avg = states[np.array(seq)]
        n = len(p_avg)
        stages = vz.StageSequence(
            t=np.arange(n), tau_start=np.arange(n),
            duration=np.ones(n, dtype=np.int64), p_avg=p_avg,
            p_lo=P_LO, p_hi=P_HI)
        model = vz.estimate_transition_model(stages, n_bins=3)
        idx = [model.row_index(s) for s in states]
        est = model.trans[np.ix_(idx, idx)]
        assert np.abs(est - true).max() <= 0.05

    def test_insufficient_data(self):
        stages = vz.StageSequence(
            t=np.array([0]), tau_start=np.array([0]),
            duration=np.array([5]), p_avg=np.array([2500.0]),
            p_lo=P_LO, p_hi=P_HI)
        with pytest.raises(vz.InsufficientData):
            vz.estimate_transition_model(stages, n_bins=3)


class TestQuantiles:
    def test_delta_limits(self):
        model = uniform_model()
        p = 2500.0
        assert vz.quantile_h1(model, p, 0.0) == model.p_lo
        assert vz.quantile_h2(model, p, 0.0) == model.p_hi
        assert vz.quantile_h1(model, p, 1.0) == model.p_hi
        assert vz.quantile_h2(model, p, 1.0) == model.p_lo

    def test_uniform_closed_form(self):
        model = uniform_model(p_lo=2000.0, p_hi=3000.0, n_bins=10)
        assert vz.quantile_h1(model, 2500.0, 0.1) == pytest.approx(2100.0)
        assert vz.quantile_h2(model, 2500.0, 0.1) == pytest.approx(2900.0)

    def test_monotone_in_delta(self):
        rng = np.random.default_rng(8)
        trans = rng.dirichlet(np.ones(8), size=8)
        edges = np.linspace(P_LO, P_HI, 9)
        model = vz.TransitionModel(bin_edges=edges, trans=trans,
                                   counts=np.zeros((8, 8)))
        deltas = np.linspace(0.0, 1.0, 21)
        for p in [2200.0, 2800.0, 3500.0]:
            h1s = [vz.quantile_h1(model, p, d) for d in deltas]
            h2s = [vz.quantile_h2(model, p, d) for d in deltas]
            assert all(b >= a - 1e-12 for a, b in zip(h1s, h1s[1:]))
            assert all(b <= a + 1e-12 for a, b in zip(h2s, h2s[1:]))
            # h1 below h2 on the non-degenerate side
            for d in deltas[deltas < 0.5]:
                assert vz.quantile_h1(model, p, d) <= \
                    vz.quantile_h2(model, p, d) + 1e-12

    def test_definitional_sup_inf(self):
        rng = np.random.default_rng(9)
        trans = rng.dirichlet(np.ones(6) * 0.5, size=6)
        edges = np.linspace(P_LO, P_HI, 7)
        model = vz.TransitionModel(bin_edges=edges, trans=trans,
                                   counts=np.zeros((6, 6)))
        for p in rng.uniform(P_LO, P_HI, size=10):
            row = model.row_index(p)
            for delta in [0.0, 0.05, 0.25, 0.5, 0.75, 1.0]:
                h1 = vz.quantile_h1(model, p, delta)
                # mass strictly below h1 stays within delta ...
                assert quantile_mass_below(model, row, h1) <= delta + 1e-9
                # ... and any higher cut exceeds it
                for bump in [1e-6, 1.0, 50.0]:
                    h = h1 + bump
                    if h <= model.p_hi:
                        assert quantile_mass_below(model, row, h) > delta - 1e-9
                h2 = vz.quantile_h2(model, p, delta)
                above = 1.0 - quantile_mass_below(model, row, h2)
                # mass at-or-above h2 is controlled symmetrically
                assert above - model.trans[row].sum() * 0.0 <= 1.0
                assert 1.0 - quantile_mass_below(model, row, h2) <= \
                    delta + model.trans[row][model.row_index(h2)] * 1e-9 + 1e-9

    def test_delta_validation(self):
        model = uniform_model()
        with pytest.raises(ValueError):
            vz.quantile_h1(model, 2500.0, -0.1)
        with pytest.raises(ValueError):
            vz.quantile_h2(model, 2500.0, 1.1)


class TestStationary:
    def test_constant_trace_single_cell(self):
        trace = make_trace(np.full(50, 2500.0))
        stat = vz.estimate_stationary(trace, n_parts=10)
        assert stat.weights.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.count_nonzero(stat.weights) == 1

    def test_uniform_sweep(self):
        n = 10_000
        p = np.linspace(P_LO, P_HI - 1e-9, n)
        stat = vz.estimate_stationary(make_trace(p), n_parts=20)
        assert np.abs(stat.weights - 1.0 / 20).max() <= 2.0 / n
        assert abs(stat.weights.sum() - 1.0) <= 1e-12

    def test_midpoints(self):
        stat = vz.estimate_stationary(make_trace([2500.0] * 3), n_parts=5)
        width = (P_HI - P_LO) / 5
        assert stat.midpoints[0] == pytest.approx(P_LO + width / 2)
        assert len(stat.partition) == 6


class TestSynthetic:
    def test_deterministic(self):
        cfg = vz.SyntheticConfig(n_samples=2000)
        a = vz.generate_synthetic_trace(cfg, seed=42)
        b = vz.generate_synthetic_trace(cfg, seed=42)
        assert np.array_equal(a.p, b.p)
        c = vz.generate_synthetic_trace(cfg, seed=43)
        assert not np.array_equal(a.p, c.p)

    def test_single_state_no_noise_is_constant(self):
        cfg = vz.SyntheticConfig(
            n_samples=500, noise_scale=0.0,
            state_powers=np.array([2700.0]), trans=np.array([[1.0]]))
        trace = vz.generate_synthetic_trace(cfg, seed=1)
        assert (trace.p == 2700.0).all()

    def test_bounds_respected(self):
        cfg = vz.SyntheticConfig(n_samples=5000, noise_scale=300.0)
        trace = vz.generate_synthetic_trace(cfg, seed=2)
        assert trace.p.min() >= cfg.p_lo
        assert trace.p.max() <= cfg.p_hi

    def test_stage_count_roundtrip(self):
        cfg = vz.SyntheticConfig(n_samples=100_000, mean_duration=720.0,
                                 noise_scale=80.0)
        trace, info = generate_synthetic_trace_with_info(cfg, seed=11)
        stages = vz.segment_stages(trace, p_th=200.0)
        generated = info["stage_count"]
        assert abs(len(stages) - generated) <= 0.15 * generated

    def test_config_errors(self):
        with pytest.raises(vz.ConfigError):
            vz.generate_synthetic_trace(
                vz.SyntheticConfig(p_lo=3000.0, p_hi=2000.0), seed=0)
        with pytest.raises(vz.ConfigError):
            vz.generate_synthetic_trace(
                vz.SyntheticConfig(state_powers=np.array([100.0])), seed=0)
        bad = vz.SyntheticConfig(trans=np.array([
            [0.5, 0.5, 0, 0, 0], [1, 0, 0, 0, 0], [1, 0, 0, 0, 0],
            [1, 0, 0, 0, 0], [0.9, 0, 0, 0, 0]]))
        with pytest.raises(vz.ConfigError):
            vz.generate_synthetic_trace(bad, seed=0)
