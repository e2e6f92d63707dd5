"""涨落轨迹、G 过程协方差与漂移拟合"""

import math

import numpy as np
import pytest

from sgd_fluctuations.errors import GridError, ProbeError
from sgd_fluctuations.models.data_model import BatchSchedule
from sgd_fluctuations.models.fluctuation import DriftFit, FluctuationTrace
from sgd_fluctuations.models.meanfield import QuadratureSample
from sgd_fluctuations.models.measure import EmpiricalSnapshot, TestFunction, TraceSeries
from sgd_fluctuations.models.network import InitSpec
from sgd_fluctuations.services.fluctuation import (
    drift_fit,
    fluctuation_trace,
    gprocess_covariance,
    gprocess_covariance_matrix,
    q_kernel,
)
from sgd_fluctuations.services.meanfield import integrate


@pytest.fixture
def setting(model_1d, ramp):
    rng = np.random.default_rng(17)
    quad = QuadratureSample.draw(model_1d, 150, rng)
    particles = InitSpec.gaussian().sample(rng, 60, 1)
    traj = integrate(particles, quad, ramp, 0.1, 1.0, 0.1)
    return traj, quad


class TestFluctuationTrace:
    def test_self_reference_is_zero(self):
        run = TraceSeries(grid=[0.0, 0.5, 1.0], values=[1.0, 2.0, 3.0], meta={"beta": 1.0, "probe": "f2"})
        trace = fluctuation_trace(run, run, 100)
        np.testing.assert_array_equal(trace.values, np.zeros(3))
        assert trace.N == 100
        assert trace.beta == 1.0
        assert trace.probe == "f2"

    def test_scaling_and_interpolation(self):
        run = TraceSeries(grid=[0.0, 0.5], values=[1.0, 2.0], meta={"replication": 4})
        ref = TraceSeries(grid=[0.0, 1.0], values=[0.0, 2.0])
        trace = fluctuation_trace(run, ref, 16)
        np.testing.assert_allclose(trace.values, [4.0, 4.0])
        assert trace.replication == 4

    def test_run_beyond_reference(self):
        run = TraceSeries(grid=[0.0, 2.0], values=[0.0, 0.0])
        ref = TraceSeries(grid=[0.0, 1.0], values=[0.0, 0.0])
        with pytest.raises(GridError):
            fluctuation_trace(run, ref, 4)
        with pytest.raises(GridError, match="empty"):
            fluctuation_trace(run, TraceSeries(grid=[], values=[]), 4)


class TestKernel:
    def test_q_kernel_matches_definition(self, ramp):
        samples = np.array([[0.7], [1.2], [-0.3]])
        snap = EmpiricalSnapshot(samples=samples)
        x, y = np.array([1.1]), 1.0
        pre = samples[:, 0] * x[0]
        output = np.mean(ramp.value(pre))
        directional = np.mean(ramp.derivative(pre) * (2.0 * samples[:, 0]) * x[0])
        expected = (y - output) * directional
        assert q_kernel(TestFunction.square(), snap, x, y, ramp) == pytest.approx(expected, abs=1e-12)

    def test_q_kernel_needs_gradient(self, ramp):
        probe = TestFunction.from_callable(lambda W: W[:, 0], "identity")
        with pytest.raises(ProbeError):
            q_kernel(probe, EmpiricalSnapshot(samples=[[0.0]]), np.array([1.0]), 1.0, ramp)


class TestCovariance:
    def test_scales_with_inverse_batch_size(self, setting, ramp):
        traj, quad = setting
        f, g = TestFunction.square(), TestFunction.coordinate(0)
        single = gprocess_covariance(f, g, traj, quad, BatchSchedule.fixed(1), 0.7, 1.0, ramp)
        for m in (2, 4, 16):
            batched = gprocess_covariance(f, g, traj, quad, BatchSchedule.fixed(m), 0.7, 1.0, ramp)
            assert math.isclose(batched.value * m, single.value, rel_tol=1e-12)
        assert single.prefactor == 1.0
        assert single.nodes[-1] == pytest.approx(0.7)

    def test_zero_at_time_zero(self, setting, ramp):
        traj, quad = setting
        estimate = gprocess_covariance(
            TestFunction.square(), TestFunction.square(), traj, quad, BatchSchedule.fixed(1), 0.0, 0.5, ramp
        )
        assert estimate.value == 0.0

    def test_matrix_is_symmetric_and_psd(self, setting, ramp):
        traj, quad = setting
        probes = [TestFunction.square(), TestFunction.coordinate(0), TestFunction.norm2()]
        matrix = gprocess_covariance_matrix(probes, traj, quad, BatchSchedule.fixed(2), 1.0, 1.0, ramp)
        np.testing.assert_array_equal(matrix, matrix.T)
        assert np.min(np.linalg.eigvalsh(matrix)) >= -1e-10
        pair = gprocess_covariance(probes[0], probes[0], traj, quad, BatchSchedule.fixed(2), 1.0, 1.0, ramp)
        assert pair.value == pytest.approx(matrix[0, 0], rel=1e-12)

    def test_bilinear_in_probes(self, setting, ramp):
        traj, quad = setting
        batch = BatchSchedule.fixed(3)
        square, coordinate, g = TestFunction.square(), TestFunction.coordinate(0), TestFunction.norm2()
        combined = TestFunction.quadratic([[2.5]], a=[-1.5], b=4.0, label="combined")

        def cov(f):
            return gprocess_covariance(f, g, traj, quad, batch, 0.8, 1.0, ramp).value

        expected = 2.5 * cov(square) - 1.5 * cov(coordinate)
        assert cov(combined) == pytest.approx(expected, rel=1e-10, abs=1e-12)

    def test_variance_is_non_decreasing_in_s(self, setting, ramp):
        traj, quad = setting
        f = TestFunction.square()
        times = [0.0, 0.05, 0.1, 0.25, 0.3, 0.55, 0.7, 0.85, 1.0]
        values = np.array(
            [gprocess_covariance(f, f, traj, quad, BatchSchedule.fixed(1), s, 1.0, ramp).value for s in times]
        )
        assert values[0] == 0.0
        assert np.all(np.diff(values) >= -1e-15)
        assert values[-1] > 0.0

    def test_argument_errors(self, setting, ramp):
        traj, quad = setting
        f = TestFunction.square()
        with pytest.raises(ValueError, match="s <= t"):
            gprocess_covariance(f, f, traj, quad, BatchSchedule.fixed(1), 0.8, 0.5, ramp)
        with pytest.raises(GridError):
            gprocess_covariance(f, f, traj, quad, BatchSchedule.fixed(1), 1.5, 2.0, ramp)


def make_trace(grid, values, beta=0.75):
    return FluctuationTrace(grid=grid, values=values, N=100, beta=beta, probe="f2")


class TestDriftFit:
    GRID = np.linspace(0.0, 8.0, 17)

    def test_recovers_linear_trend(self):
        low = make_trace(self.GRID, 0.02 * self.GRID + 0.5)
        high = make_trace(self.GRID, np.zeros_like(self.GRID), beta=1.0)
        fit = drift_fit(low, high)
        assert fit.slope == pytest.approx(0.02, abs=1e-12)
        assert fit.intercept == pytest.approx(0.5, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.stderr == pytest.approx(0.0, abs=1e-12)
        assert fit.replications == 1
        assert fit.within(0.02, rel_tol=1e-6)

    def test_ensemble_stderr(self):
        slopes = np.array([0.01, 0.02, 0.06])
        low = [make_trace(self.GRID, s * self.GRID) for s in slopes]
        high = [make_trace(self.GRID, np.zeros_like(self.GRID), beta=1.0) for _ in slopes]
        fit = drift_fit(low, high)
        assert fit.slope == pytest.approx(slopes.mean(), abs=1e-12)
        assert fit.stderr == pytest.approx(np.std(slopes, ddof=1) / math.sqrt(3), rel=1e-9)

    def test_identical_ensembles_have_zero_slope(self):
        traces = [make_trace(self.GRID, np.sin(self.GRID + k)) for k in range(3)]
        fit = drift_fit(traces, traces)
        assert fit.slope == 0.0
        assert fit.stderr == 0.0
        assert fit.r_squared == 1.0

    def test_grid_errors(self):
        short = np.linspace(0.0, 1.0, 9)
        with pytest.raises(GridError, match="at least 10"):
            drift_fit(make_trace(short, short), make_trace(short, short))
        other = np.linspace(0.0, 4.0, 17)
        with pytest.raises(GridError, match="common grid"):
            drift_fit(make_trace(self.GRID, self.GRID), make_trace(other, other))
        with pytest.raises(GridError, match="paired"):
            drift_fit([make_trace(self.GRID, self.GRID)] * 2, [make_trace(self.GRID, self.GRID)])

    def test_within_uses_relative_tolerance(self):
        fit = DriftFit(slope=0.0105, stderr=0.001, intercept=0.0, r_squared=0.9, replications=10)
        assert fit.within(0.01, rel_tol=0.1)
        assert not fit.within(0.02, rel_tol=0.1)
