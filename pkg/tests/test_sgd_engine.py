"""SGD 单步、轨迹与前极限分解"""

import math

import numpy as np
import pytest

from sgd_fluctuations.errors import NumericalError, ProbeError
from sgd_fluctuations.models.meanfield import QuadratureSample
from sgd_fluctuations.models.measure import TestFunction
from sgd_fluctuations.models.network import InitSpec, NetworkState
from sgd_fluctuations.services.sgd_engine import StepDraws, sgd_step
from sgd_fluctuations.services.streams import StreamFactory


def random_state(rng, N, d, k=0):
    return NetworkState(weights=rng.standard_normal((N, d)), k=k)


class TestStep:
    """单步更新"""

    def test_zero_rate_and_noise_leaves_weights(self, make_engine, rng):
        engine = make_engine(N=5, d=2, alpha=0.0, noise_std=0.0)
        state = random_state(rng, 5, 2)
        new = engine.step(state, rng)
        np.testing.assert_array_equal(new.weights, state.weights)
        assert new.k == 1

    def test_noise_only_increment_variance(self, make_engine):
        engine = make_engine(N=10, d=1, alpha=0.0, noise_std=0.1, beta=1.0)
        rng = np.random.default_rng(99)
        state = random_state(rng, 10, 1)
        increments = []
        for _ in range(1000):
            new = engine.step(state, rng)
            increments.append(new.weights - state.weights)
            state = new
        variance = np.var(np.concatenate(increments))
        assert variance == pytest.approx(0.01 / 100, rel=0.1)

    def test_noise_increment_uses_configured_scale(self, make_engine, rng):
        engine = make_engine(N=16, d=2, noise_std=0.3, beta=0.75)
        assert engine.cfg.noise_scale == pytest.approx(0.3 / 8.0)
        draws = engine.draw_step(engine.initial_state(rng), StreamFactory(5).run_streams(0))
        np.testing.assert_array_equal(engine.noise_increment(draws), engine.cfg.noise_scale * draws.noise)
        quiet = make_engine(N=16, d=2, beta=math.inf)
        assert quiet.draw_step(quiet.initial_state(rng), StreamFactory(5).run_streams(0)).noise is None

    def test_single_neuron_hand_computation(self, make_engine, ramp, model_1d, rng):
        alpha, w, x, y = 0.1, 1.0, 1.0, 1.0
        engine = make_engine(N=1, d=1, alpha=alpha, noise_std=0.0, init=InitSpec.at_point([w]))
        state = engine.initial_state(rng)
        new = engine.step(state, rng, batch=(np.array([[x]]), np.array([y])))
        expected = w + alpha * (y - ramp_value(w * x)) * 10.0 * x
        assert new.weights[0, 0] == pytest.approx(expected, abs=1e-14)
        assert new.weights[0, 0] == pytest.approx(-0.5, abs=1e-14)
        functional = sgd_step(engine.cfg, state, model_1d, ramp, rng, batch=(np.array([[x]]), np.array([y])))
        np.testing.assert_array_equal(functional.weights, new.weights)

    def test_permutation_equivariance(self, make_engine, rng):
        engine = make_engine(N=8, d=3)
        state = random_state(rng, 8, 3)
        draws = engine.draw_step(state, StreamFactory(5).run_streams(0))
        perm = rng.permutation(8)
        permuted = engine.apply_step(
            NetworkState(weights=state.weights[perm]),
            StepDraws(xs=draws.xs, ys=draws.ys, noise=draws.noise[perm]),
        )
        np.testing.assert_allclose(
            permuted.weights, engine.apply_step(state, draws).weights[perm], rtol=1e-12, atol=1e-15
        )

    def test_jump_bound_for_lipschitz_probes(self, make_engine, ramp, rng):
        engine = make_engine(N=20, d=3, batch=4)
        state = engine.initial_state(rng)
        streams = StreamFactory(11).run_streams(0)
        for _ in range(50):
            draws = engine.draw_step(state, streams)
            new = engine.apply_step(state, draws)
            per_sample = engine.cfg.alpha * (np.abs(draws.ys) + ramp.sup_abs) * ramp.sup_derivative
            bound = float(np.mean(per_sample * np.linalg.norm(draws.xs, axis=1))) / engine.cfg.N
            bound += engine.cfg.noise_scale * float(np.mean(np.linalg.norm(draws.noise, axis=1)))
            for probe in (TestFunction.norm2(), TestFunction.coordinate(0)):
                jump = abs(np.mean(probe.value(new.weights)) - np.mean(probe.value(state.weights)))
                assert jump <= bound + 1e-12
            state = new

    def test_overflow_raises_numerical_error(self, make_engine, rng):
        engine = make_engine(N=1, d=1, alpha=1e308, noise_std=0.0, init=InitSpec.at_point([1.0]))
        state = engine.initial_state(rng)
        with np.errstate(over="ignore"), pytest.raises(NumericalError) as info:
            engine.step(state, rng, batch=(np.array([[1.0]]), np.array([1.0])))
        assert info.value.step == 0
        assert info.value.neuron == 0

    def test_state_shape_must_match_config(self, make_engine, rng):
        engine = make_engine(N=4, d=2)
        with pytest.raises(ValueError, match="expects"):
            engine.step(random_state(rng, 3, 2), rng)


def ramp_value(t):
    return float(np.clip(10.0 * t - 7.5, -2.5, 7.5))


class TestTrajectory:
    def test_shorter_than_one_step(self, make_engine):
        engine = make_engine(N=10, d=1)
        result = engine.run_trajectory(0.05, [TestFunction.norm2()], StreamFactory(1).run_streams(0))
        trace = result.traces["norm2"]
        np.testing.assert_array_equal(trace.grid, [0.0])
        assert result.final_state.k == 0

    def test_grid_and_constant_probe(self, make_engine):
        engine = make_engine(N=10, d=2)
        result = engine.run_trajectory(
            0.5, [TestFunction.constant(1.0, 2), TestFunction.square()], StreamFactory(1).run_streams(0)
        )
        one = result.traces["one"]
        np.testing.assert_allclose(one.grid, np.arange(6) / 10)
        np.testing.assert_array_equal(one.values, np.ones(6))
        assert result.traces["f2"].meta["N"] == 10
        assert result.final_state.k == 5

    def test_record_every_keeps_final_point(self, make_engine):
        engine = make_engine(N=10, d=1)
        result = engine.run_trajectory(0.7, [TestFunction.square()], StreamFactory(1).run_streams(0), record_every=3)
        np.testing.assert_allclose(result.traces["f2"].grid, [0.0, 0.3, 0.6, 0.7])

    def test_same_streams_give_identical_runs(self, make_engine):
        engine = make_engine(N=15, d=2, batch=2)
        runs = [
            engine.run_trajectory(1.0, [TestFunction.square()], StreamFactory(42, 1).run_streams(3))
            for _ in range(2)
        ]
        np.testing.assert_array_equal(runs[0].traces["f2"].values, runs[1].traces["f2"].values)
        np.testing.assert_array_equal(runs[0].final_state.weights, runs[1].final_state.weights)

    def test_different_replications_differ(self, make_engine):
        engine = make_engine(N=15, d=2)
        a = engine.run_trajectory(1.0, [TestFunction.square()], StreamFactory(42).run_streams(0))
        b = engine.run_trajectory(1.0, [TestFunction.square()], StreamFactory(42).run_streams(1))
        assert not np.array_equal(a.final_state.weights, b.final_state.weights)


class TestDecomposition:
    """一步增量 = D + M + R + 噪声项"""

    def test_identity_holds_for_quadratic_probes(self, make_engine, model_3d):
        engine = make_engine(N=20, d=3, batch=3)
        rng = np.random.default_rng(8)
        raw = rng.standard_normal((3, 3))
        probes = [TestFunction.square(), TestFunction.quadratic(0.5 * (raw + raw.T), a=[0.1, 0.2, 0.3])]
        quad = QuadratureSample.draw(model_3d, 200, rng)
        state = engine.initial_state(rng)
        for _ in range(100):
            for probe in probes:
                xs, ys = model_3d.sample_batch(rng, 3)
                decomp, _ = engine.decompose_step(state, probe, rng, batch=(xs, ys))
                assert abs(decomp.residual) <= 1e-10
                assert decomp.m_term == 0.0
                with_quad, _ = engine.decompose_step(state, probe, rng, batch=(xs, ys), quadrature=quad)
                assert abs(with_quad.residual) <= 1e-10
            state = engine.step(state, rng)

    def test_affine_probe_has_no_remainder(self, make_engine, model_3d, rng):
        engine = make_engine(N=10, d=3)
        probe = TestFunction.affine([1.0, -1.0, 0.5], b=3.0)
        state = engine.initial_state(rng)
        quad = QuadratureSample.draw(model_3d, 100, rng)
        decomp, _ = engine.decompose_step(state, probe, rng, quadrature=quad)
        assert decomp.r_term == 0.0
        assert abs(decomp.total - (decomp.d_term + decomp.m_term + decomp.noise_term)) <= 1e-12

    def test_zero_rate_leaves_only_noise_and_remainder(self, make_engine, model_3d, rng):
        engine = make_engine(N=10, d=3, alpha=0.0)
        state = engine.initial_state(rng)
        quad = QuadratureSample.draw(model_3d, 50, rng)
        decomp, _ = engine.decompose_step(state, TestFunction.square(), rng, quadrature=quad)
        assert decomp.d_term == 0.0
        assert decomp.m_term == 0.0
        assert abs(decomp.total - (decomp.r_term + decomp.noise_term)) <= 1e-12

    def test_smooth_activation_probe_is_accepted(self, make_engine, smooth_ramp, model_3d, rng):
        engine = make_engine(N=10, d=3, act=smooth_ramp)
        probe = TestFunction.with_activation(smooth_ramp, [0.3, 0.2, 0.1])
        quad = QuadratureSample.draw(model_3d, 50, rng)
        decomp, new_state = engine.decompose_step(engine.initial_state(rng), probe, rng, quadrature=quad)
        assert not decomp.exact_remainder
        assert new_state.k == 1
        assert math.isfinite(decomp.residual)

    def test_smooth_activation_remainder_is_third_order(self, make_engine, smooth_ramp, model_3d, rng):
        # w·a 留在 [0.4, 0.6] 磨光段内部，f 沿路径是二次的，中点 Hessian 余项只剩 O(|ΔW|³)
        anchor = np.array([0.3, 0.2, 0.1])
        engine = make_engine(N=10, d=3, alpha=0.001, noise_std=0.01, act=smooth_ramp)
        probe = TestFunction.with_activation(smooth_ramp, anchor)
        quad = QuadratureSample.draw(model_3d, 50, rng)
        levels = 0.5 + rng.uniform(-0.03, 0.03, size=10)
        perp = rng.standard_normal((10, 3))
        perp -= np.outer(perp @ anchor, anchor) / (anchor @ anchor)
        state = NetworkState(weights=np.outer(levels, anchor) / (anchor @ anchor) + 0.5 * perp)
        third = 50.0 * float(np.linalg.norm(anchor)) ** 3
        for _ in range(20):
            decomp, new_state = engine.decompose_step(state, probe, rng, quadrature=quad)
            assert np.all(np.abs(new_state.weights @ anchor - 0.5) < 0.09)
            max_step = float(np.max(np.linalg.norm(new_state.weights - state.weights, axis=1)))
            assert abs(decomp.residual) <= third * max_step**3 + 1e-14
            assert abs(decomp.residual) < 1e-3 * abs(decomp.r_term)
            state = new_state

    def test_rejects_non_smooth_probe_and_missing_quadrature(self, make_engine, rng):
        engine = make_engine(N=5, d=3)
        state = engine.initial_state(rng)
        with pytest.raises(ProbeError):
            engine.decompose_step(state, TestFunction.norm2(), rng, batch=(np.ones((1, 3)), np.ones(1)))
        with pytest.raises(ValueError, match="quadrature"):
            engine.decompose_step(state, TestFunction.square(), rng)


class TestMartingale:
    def test_full_quadrature_batches_have_no_martingale(self, make_engine, model_1d, rng):
        engine = make_engine(N=20, d=1)
        quad = QuadratureSample.draw(model_1d, 100, rng)
        run = engine.martingale_trace(
            TestFunction.square(), 0.5, StreamFactory(3).run_streams(0), quad, quadrature_batch=True
        )
        np.testing.assert_array_equal(run.martingale.values, np.zeros(11))
        assert run.probe_trace.grid[-1] == 0.5

    def test_first_value_is_zero(self, make_engine, model_1d, rng):
        engine = make_engine(N=20, d=1)
        quad = QuadratureSample.draw(model_1d, 100, rng)
        run = engine.martingale_trace(TestFunction.square(), 0.5, StreamFactory(3).run_streams(0), quad)
        assert run.martingale.values[0] == 0.0
        assert run.martingale.meta["kind"] == "martingale"
        assert run.final_state.k == 10

    def test_probe_without_gradient_rejected(self, make_engine, model_1d, rng):
        engine = make_engine(N=5, d=1)
        quad = QuadratureSample.draw(model_1d, 10, rng)
        probe = TestFunction.from_callable(lambda W: W[:, 0], "identity")
        with pytest.raises(ProbeError):
            engine.martingale_trace(probe, 0.5, rng, quad)
