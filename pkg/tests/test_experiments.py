"""实验编排：方差缩减、CLT 轨迹、漂移检查与鞅项集合"""

import math

import numpy as np
import pytest

from sgd_fluctuations.config.constants import STREAM_NAMESPACES
from sgd_fluctuations.data import SGDReferenceProvider
from sgd_fluctuations.errors import ConfigError
from sgd_fluctuations.models.fluctuation import FluctuationTrace
from sgd_fluctuations.models.measure import TraceSeries
from sgd_fluctuations.services.experiments import (
    ExperimentRunner,
    run_clt_experiment,
    run_drift_check,
    run_variance_experiment,
    summarize_ensemble,
    thin_trace,
)
from sgd_fluctuations.services.replication import ReplicationFarm
from sgd_fluctuations.services.streams import StreamFactory


class TestHelpers:
    def test_thin_trace(self):
        trace = TraceSeries(grid=np.arange(21) / 20, values=np.arange(21.0), meta={"probe": "f2"})
        thinned = thin_trace(trace, 0.25)
        np.testing.assert_allclose(thinned.grid, [0.0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_array_equal(thinned.values, [0.0, 5.0, 10.0, 15.0, 20.0])
        assert thinned.meta == {"probe": "f2"}
        assert thin_trace(trace, 0.0) is trace

    def test_summarize_ensemble(self):
        traces = [
            FluctuationTrace(grid=[0.0, 1.0], values=[v, 2 * v], N=10, beta=1.0, probe="f2")
            for v in (1.0, 2.0, 3.0)
        ]
        summary = summarize_ensemble(traces, 1.0)
        np.testing.assert_allclose(summary.mean, [2.0, 4.0])
        np.testing.assert_allclose(summary.half_width, [1.96 / math.sqrt(3), 2 * 1.96 / math.sqrt(3)])
        single = summarize_ensemble(traces[:1], 1.0)
        np.testing.assert_array_equal(single.ci_lo, single.ci_hi)

    def test_farm_preserves_order_and_counts(self):
        farm = ReplicationFarm(threads=3)
        assert farm.map(lambda r: r * r, 7) == [0, 1, 4, 9, 16, 25, 36]
        assert farm.get_stats()["replications"] == 7

    def test_farm_reraises(self):
        farm = ReplicationFarm(threads=2)

        def failing(r):
            if r == 3:
                raise RuntimeError("boom")
            return r

        with pytest.raises(RuntimeError, match="boom"):
            farm.map(failing, 6)
        assert farm.get_stats()["failures"] == 1

    def test_streams_are_deterministic(self):
        a = StreamFactory(1, 2).generator(3, "batch").random(4)
        b = StreamFactory(1, 2).generator(3, "batch").random(4)
        c = StreamFactory(1, 2).generator(3, "noise").random(4)
        np.testing.assert_array_equal(a, b)
        assert not np.array_equal(a, c)
        with pytest.raises(ValueError):
            StreamFactory(1).generator(0, "colour")
        other = StreamFactory(1, 2, ensemble=1).generator(3, "batch").random(4)
        assert not np.array_equal(a, other)
        with pytest.raises(ValueError, match="ensemble"):
            StreamFactory(1, 2, ensemble=-1)


class TestVariance:
    def test_point_init_without_noise_has_zero_variance(self, small_config):
        cfg = small_config(
            experiment="variance-reduction",
            d=2,
            alpha=0.0,
            noise_std=0.0,
            init_law="point",
            init_point=(0.3, 0.4),
            batch_sizes=(1, 4),
        )
        report = ExperimentRunner(cfg).run_variance()
        np.testing.assert_allclose(report.v_hats, [0.0, 0.0], atol=1e-25)
        for e in report.entries:
            np.testing.assert_allclose(e.bootstrap, 0.0, atol=1e-25)

    def test_identical_streams_have_zero_variance(self, small_config):
        cfg = small_config(experiment="variance-reduction", replications=2, batch_sizes=(1, 2))
        report = ExperimentRunner(cfg).run_variance(stream_key=lambda r: 0)
        np.testing.assert_array_equal(report.v_hats, [0.0, 0.0])

    def test_batch_sizes_share_streams_unless_disabled(self, small_config):
        shared = ExperimentRunner(
            small_config(experiment="variance-reduction", d=2, batch_sizes=(2, 2))
        ).run_variance()
        np.testing.assert_array_equal(shared.entries[0].samples, shared.entries[1].samples)
        independent = ExperimentRunner(
            small_config(experiment="variance-reduction", d=2, batch_sizes=(2, 2), common_streams=False)
        ).run_variance()
        np.testing.assert_array_equal(independent.entries[0].samples, shared.entries[0].samples)
        assert not np.array_equal(independent.entries[0].samples, independent.entries[1].samples)

    def test_report_shape(self, small_config):
        cfg = small_config(experiment="variance-reduction", d=2, batch_sizes=(1, 4), bootstrap=10)
        report = run_variance_experiment(cfg)
        assert report.batch_sizes == (1, 4)
        assert report.replications == 4
        assert all(e.bootstrap_count == 10 and e.samples.size == 4 for e in report.entries)
        np.testing.assert_allclose(report.v_hats, [np.var(e.samples) for e in report.entries])

    def test_threads_do_not_change_results(self, small_config):
        cfg = small_config(experiment="variance-reduction", d=2, batch_sizes=(1, 2), replications=6)
        serial = ExperimentRunner(cfg, ReplicationFarm(1)).run_variance()
        parallel = ExperimentRunner(cfg, ReplicationFarm(3)).run_variance()
        for a, b in zip(serial.entries, parallel.entries):
            np.testing.assert_array_equal(a.samples, b.samples)
            np.testing.assert_array_equal(a.bootstrap, b.bootstrap)

    def test_needs_two_replications(self, small_config):
        cfg = small_config(experiment="variance-reduction", replications=1)
        with pytest.raises(ConfigError, match="2 replications"):
            ExperimentRunner(cfg).run_variance()


class TestCLT:
    def test_noiseless_self_reference_has_zero_fluctuation(self, small_config):
        cfg = small_config(
            experiment="clt-trajectory", betas=(math.inf,), replications=1, emit_stride=0.0
        )
        reference = SGDReferenceProvider(
            cfg.sgd_config(beta=math.inf),
            cfg.data_model(),
            cfg.activation(),
            namespace=STREAM_NAMESPACES["RUN"],
        )
        report = ExperimentRunner(cfg).run_clt(reference)
        (trace,) = report.traces[math.inf]
        np.testing.assert_array_equal(trace.values, np.zeros(11))

    def test_summaries_per_beta(self, small_config):
        cfg = small_config(
            experiment="clt-trajectory", t_end=1.0, emit_stride=0.25, n_ref=40, betas=(1.0, 2.0)
        )
        report = run_clt_experiment(cfg)
        assert [s.beta for s in report.summaries] == [1.0, 2.0]
        assert report.reference_info["name"] == "sgd"
        assert report.reference_info["N_ref"] == 40
        summary = report.summary_for(2.0)
        np.testing.assert_allclose(summary.grid, [0.0, 0.25, 0.5, 0.75, 1.0])
        values = np.stack([t.values for t in report.traces[2.0]])
        np.testing.assert_allclose(summary.mean, values.mean(axis=0))
        assert np.all(summary.ci_lo <= summary.mean) and np.all(summary.mean <= summary.ci_hi)
        assert [t.replication for t in report.traces[1.0]] == [0, 1, 2, 3]
        # 不同 β 的集合使用独立子流
        assert not np.array_equal(report.traces[1.0][0].values, report.traces[2.0][0].values)

    def test_meanfield_reference(self, small_config):
        cfg = small_config(experiment="clt-trajectory", reference="meanfield", replications=2, betas=(1.0,))
        report = ExperimentRunner(cfg).run_clt()
        assert report.reference_info["name"] == "meanfield"
        assert report.summaries[0].grid.size == 6

    def test_meanfield_reference_defaults_to_half_sgd_step(self, small_config):
        provider = ExperimentRunner(small_config(mf_dt=None)).meanfield_provider()
        assert provider.dt == pytest.approx(1 / 40)
        assert provider.get_source_info()["dt"] == pytest.approx(1 / 40)


class TestDrift:
    def test_noiseless_coupled_ensembles_have_zero_slope(self, small_config):
        cfg = small_config(experiment="drift-check", t_end=1.0, noise_std=0.0, replications=3, n_ref=40)
        report = run_drift_check(cfg)
        assert report.fit.slope == 0.0
        assert report.fit.stderr == 0.0
        assert report.expected == 0.0
        assert report.summaries[0].grid.size == 11

    def test_expected_values(self, small_config):
        cfg = small_config(
            experiment="drift-check", N=16, t_end=1.0, emit_stride=0.0625, noise_std=0.2, replications=2, n_ref=32
        )
        report = ExperimentRunner(cfg).run_drift()
        assert report.expected == pytest.approx(0.04)
        assert report.expected_finite_n == pytest.approx(0.03)
        assert report.coupled
        assert report.fit.replications == 2

    def test_independent_ensembles_use_their_own_namespace(self, small_config):
        cfg = small_config(experiment="drift-check", t_end=1.0, replications=2, n_ref=40, coupled=False)
        runner = ExperimentRunner(cfg)
        report = runner.run_drift()
        probe = cfg.probe("f2")
        ref = runner.reference_provider(cfg.beta_hi).reference_trace(probe, cfg.t_end)
        independent = runner.fluctuation_ensemble(cfg.beta_hi, probe, ref, namespace="INDEPENDENT")
        np.testing.assert_array_equal(
            report.summaries[1].mean, summarize_ensemble(independent, cfg.beta_hi).mean
        )
        second_beta = runner.fluctuation_ensemble(cfg.beta_hi, probe, ref, ensemble=1)
        assert not np.array_equal(second_beta[0].values, independent[0].values)


class TestMartingaleEnsemble:
    def test_per_replication_quadrature_is_centred(self, small_config):
        cfg = small_config(N=40, t_end=0.5, replications=200, mf_quadrature=200)
        values = ExperimentRunner(cfg).run_martingale_ensemble("f2")
        assert values.shape == (200,)
        z = values.mean() / (values.std(ddof=1) / math.sqrt(values.size))
        assert abs(z) < 4.0

    def test_shared_quadrature_is_reproducible(self, small_config):
        cfg = small_config(N=20, t_end=0.25, replications=3, mf_quadrature=50)
        first = ExperimentRunner(cfg).run_martingale_ensemble("f2", quadrature_mode="shared")
        second = ExperimentRunner(cfg, ReplicationFarm(2)).run_martingale_ensemble("f2", quadrature_mode="shared")
        np.testing.assert_array_equal(first, second)

    def test_unknown_mode(self, small_config):
        with pytest.raises(ConfigError, match="quadrature mode"):
            ExperimentRunner(small_config()).run_martingale_ensemble(quadrature_mode="pooled")
