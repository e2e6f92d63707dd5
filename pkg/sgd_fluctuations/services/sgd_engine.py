"""带噪 mini-batch SGD 引擎

W_{k+1}^i = W_k^i + α/(N|B_k|) Σ_{(x,y)∈B_k} (y - g(x)) ∇σ*(W_k^i, x) + ε_k^i / N^β
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import NumericalError, ProbeError
from ..models.activation import ActivationSpec
from ..models.data_model import DataModel
from ..models.meanfield import QuadratureSample
from ..models.measure import TestFunction, TraceSeries
from ..models.network import (
    NetworkState,
    SGDConfig,
    StepDecomposition,
    q_values,
    residual_gradient,
)
from ..utils.log import logger
from .streams import RunStreams

Batch = Tuple[np.ndarray, np.ndarray]
RandomSource = Union[RunStreams, np.random.Generator]

IDENTITY_TOLERANCE = 1e-10


@dataclass(frozen=True, slots=True, eq=False)
class StepDraws:
    """一步中与当前权重无关的随机量：batch 与标准正态噪声 z_k，ε_k = σ_ε z_k"""

    xs: np.ndarray
    ys: np.ndarray
    noise: Optional[np.ndarray]


@dataclass(frozen=True, slots=True, eq=False)
class TrajectoryResult:
    """一次运行的探针轨迹与终态"""

    traces: Dict[str, TraceSeries]
    initial_state: NetworkState
    final_state: NetworkState


@dataclass(frozen=True, slots=True, eq=False)
class MartingaleRun:
    """累积鞅项 ⟨f, M_t^N⟩ 及同一运行的 ⟨f, μ_t^N⟩"""

    martingale: TraceSeries
    probe_trace: TraceSeries
    final_state: NetworkState


def _as_streams(rng: RandomSource) -> RunStreams:
    if isinstance(rng, RunStreams):
        return rng
    return RunStreams.from_generator(rng)


class SGDEngine:
    """SGD 引擎

    持有一组 (SGDConfig, DataModel, ActivationSpec)，对 NetworkState 做纯函数式推进。
    """

    def __init__(self, cfg: SGDConfig, model: DataModel, act: ActivationSpec):
        if model.d != cfg.d:
            raise ValueError(f"data model has d={model.d} but SGD config has d={cfg.d}")
        self.cfg = cfg
        self.model = model
        self.act = act

    # ---- 单步 ----

    def initial_state(self, rng: np.random.Generator) -> NetworkState:
        """按 InitSpec 抽取 W_0"""
        return NetworkState(weights=self.cfg.init.sample(rng, self.cfg.N, self.cfg.d), k=0)

    def draw_step(
        self, state: NetworkState, streams: RunStreams, batch: Optional[Batch] = None
    ) -> StepDraws:
        """抽取第 k 步的 batch 与噪声；注入 batch 时不消耗 batch 子流"""
        if batch is None:
            xs, ys = self.model.sample_batch(streams.batch, self.cfg.batch.size_at(state.k))
        else:
            xs = np.atleast_2d(np.asarray(batch[0], dtype=np.float64))
            ys = np.atleast_1d(np.asarray(batch[1], dtype=np.float64))
        noise = None
        if self.cfg.noisy:
            noise = streams.noise.standard_normal((self.cfg.N, self.cfg.d))
        return StepDraws(xs=xs, ys=ys, noise=noise)

    def noise_increment(self, draws: StepDraws) -> Optional[np.ndarray]:
        """ε_k^i / N^β = (σ_ε / N^β) z_k^i"""
        if draws.noise is None:
            return None
        return self.cfg.noise_scale * draws.noise

    def apply_step(self, state: NetworkState, draws: StepDraws) -> NetworkState:
        """用给定的随机量推进一步"""
        self._check_dims(state)
        cfg = self.cfg
        weights = state.weights
        update = (cfg.alpha / cfg.N) * residual_gradient(weights, draws.xs, draws.ys, self.act)
        increment = self.noise_increment(draws)
        if increment is not None:
            update = update + increment
        new_weights = weights + update
        bad_rows = np.flatnonzero(~np.isfinite(new_weights).all(axis=1))
        if bad_rows.size:
            raise NumericalError(
                f"non-finite weight produced at step {state.k}, neuron {int(bad_rows[0])}",
                step=state.k,
                neuron=int(bad_rows[0]),
                source="sgd",
            )
        return NetworkState(weights=new_weights, k=state.k + 1)

    def step(
        self, state: NetworkState, rng: RandomSource, batch: Optional[Batch] = None
    ) -> NetworkState:
        return self.apply_step(state, self.draw_step(state, _as_streams(rng), batch))

    def _check_dims(self, state: NetworkState) -> None:
        if state.N != self.cfg.N or state.d != self.cfg.d:
            raise ValueError(
                f"state is {state.N}x{state.d} but config expects {self.cfg.N}x{self.cfg.d}"
            )

    # ---- 轨迹 ----

    def _trace_meta(self, probe: TestFunction) -> dict:
        return {
            "N": self.cfg.N,
            "probe": probe.label,
            "seed": self.cfg.seed,
            "beta": self.cfg.beta,
        }

    def run_trajectory(
        self,
        t_end: float,
        probes: Sequence[TestFunction],
        rng: RandomSource,
        init_state: Optional[NetworkState] = None,
        quadrature_batch: Optional[QuadratureSample] = None,
        record_every: int = 1,
    ) -> TrajectoryResult:
        """运行 ⌊N·t_end⌋ 步并在 t = k/N 记录每个探针的 ⟨f, μ_t^N⟩

        quadrature_batch 给定时每一步都以整个求积样本为 batch（|B| → ∞ 的近似）。
        """
        if t_end < 0:
            raise ValueError("t_end must be non-negative")
        if record_every < 1:
            raise ValueError("record_every must be >= 1")
        streams = _as_streams(rng)
        state = init_state if init_state is not None else self.initial_state(streams.init)
        self._check_dims(state)
        initial = state
        batch = quadrature_batch.as_batch() if quadrature_batch is not None else None
        n_steps = self.cfg.steps_until(t_end)

        steps: List[int] = [state.k]
        values: List[List[float]] = [[float(np.mean(p.value(state.weights)))] for p in probes]
        for j in range(1, n_steps + 1):
            state = self.apply_step(state, self.draw_step(state, streams, batch))
            if j % record_every == 0 or j == n_steps:
                steps.append(state.k)
                for series, probe in zip(values, probes):
                    series.append(float(np.mean(probe.value(state.weights))))

        grid = np.asarray(steps, dtype=np.float64) / self.cfg.N
        traces = {
            probe.label: TraceSeries(grid=grid, values=series, meta=self._trace_meta(probe))
            for probe, series in zip(probes, values)
        }
        logger.debug(f"SGD 轨迹完成: N={self.cfg.N}, 步数={n_steps}, beta={self.cfg.beta}")
        return TrajectoryResult(traces=traces, initial_state=initial, final_state=state)

    # ---- 前极限分解 ----

    def decompose_step(
        self,
        state: NetworkState,
        f: TestFunction,
        rng: RandomSource,
        batch: Optional[Batch] = None,
        quadrature: Optional[QuadratureSample] = None,
    ) -> Tuple[StepDecomposition, NetworkState]:
        """执行一步并把 ⟨f, ν_{k+1}⟩ - ⟨f, ν_k⟩ 拆成 D + M + R + 噪声项

        D 项在 quadrature 上求 π 期望；未给 quadrature 时必须注入 batch，
        此时以该 batch 作为求积样本，M 项恒为 0。
        """
        if not f.is_smooth:
            raise ProbeError(f"decompose_step needs a twice differentiable probe, got {f.label!r}")
        if quadrature is None and batch is None:
            raise ValueError("decompose_step needs a quadrature sample or an injected batch")
        streams = _as_streams(rng)
        draws = self.draw_step(state, streams, batch)
        new_state = self.apply_step(state, draws)

        cfg = self.cfg
        weights = state.weights
        quad_xs, quad_ys = quadrature.as_batch() if quadrature is not None else (draws.xs, draws.ys)
        scale = cfg.alpha / cfg.N
        batch_term = scale * float(np.mean(q_values(f, weights, draws.xs, draws.ys, self.act)))
        d_term = scale * float(np.mean(q_values(f, weights, quad_xs, quad_ys, self.act)))

        increment = self.noise_increment(draws)
        noise_term = 0.0
        if increment is not None:
            noise_term = float(np.mean(np.einsum("ij,ij->i", f.gradient(weights), increment)))

        delta = new_state.weights - weights
        if f.has_constant_hessian:
            hessian = f.hessian(weights)
        else:
            hessian = f.hessian(0.5 * (weights + new_state.weights))
        r_term = 0.5 * float(np.mean(np.einsum("ij,ijk,ik->i", delta, hessian, delta)))

        total = float(np.mean(f.value(new_state.weights)) - np.mean(f.value(weights)))
        decomposition = StepDecomposition(
            k=state.k,
            probe=f.label,
            d_term=d_term,
            m_term=batch_term - d_term,
            r_term=r_term,
            noise_term=noise_term,
            total=total,
            exact_remainder=f.has_constant_hessian,
        )
        if decomposition.exact_remainder and abs(decomposition.residual) > IDENTITY_TOLERANCE:
            raise NumericalError(
                f"pre-limit identity violated at step {state.k}: residual {decomposition.residual!r}",
                step=state.k,
                source="decompose",
            )
        return decomposition, new_state

    # ---- 鞅项 ----

    def martingale_trace(
        self,
        f: TestFunction,
        t_end: float,
        rng: RandomSource,
        quadrature: QuadratureSample,
        init_state: Optional[NetworkState] = None,
        quadrature_batch: bool = False,
    ) -> MartingaleRun:
        """累积 ⟨f, M_t^N⟩ = Σ_{k<⌊Nt⌋} ⟨f, M_k^N⟩

        quadrature_batch 为真时 batch 即求积样本，每步 M 项为 0。
        """
        if not f.has_gradient:
            raise ProbeError(f"martingale_trace needs a probe with a gradient, got {f.label!r}")
        if t_end < 0:
            raise ValueError("t_end must be non-negative")
        streams = _as_streams(rng)
        state = init_state if init_state is not None else self.initial_state(streams.init)
        self._check_dims(state)
        batch = quadrature.as_batch() if quadrature_batch else None
        scale = self.cfg.alpha / self.cfg.N
        n_steps = self.cfg.steps_until(t_end)

        cumulative = np.zeros(n_steps + 1)
        probe_values = np.empty(n_steps + 1)
        probe_values[0] = float(np.mean(f.value(state.weights)))
        running = 0.0
        for j in range(n_steps):
            draws = self.draw_step(state, streams, batch)
            batch_mean = float(np.mean(q_values(f, state.weights, draws.xs, draws.ys, self.act)))
            quad_mean = float(
                np.mean(q_values(f, state.weights, quadrature.xs, quadrature.ys, self.act))
            )
            running += scale * (batch_mean - quad_mean)
            cumulative[j + 1] = running
            state = self.apply_step(state, draws)
            probe_values[j + 1] = float(np.mean(f.value(state.weights)))

        grid = np.arange(n_steps + 1, dtype=np.float64) / self.cfg.N
        meta = self._trace_meta(f)
        return MartingaleRun(
            martingale=TraceSeries(grid=grid, values=cumulative, meta={**meta, "kind": "martingale"}),
            probe_trace=TraceSeries(grid=grid, values=probe_values, meta=meta),
            final_state=state,
        )


# ---- 函数式入口 ----


def sgd_step(
    cfg: SGDConfig,
    state: NetworkState,
    model: DataModel,
    act: ActivationSpec,
    rng: RandomSource,
    batch: Optional[Batch] = None,
) -> NetworkState:
    """推进一步 SGD"""
    return SGDEngine(cfg, model, act).step(state, rng, batch)


def run_trajectory(
    cfg: SGDConfig,
    model: DataModel,
    act: ActivationSpec,
    t_end: float,
    probes: Sequence[TestFunction],
    rng: RandomSource,
    **kwargs,
) -> TrajectoryResult:
    return SGDEngine(cfg, model, act).run_trajectory(t_end, probes, rng, **kwargs)


def decompose_step(
    cfg: SGDConfig,
    state: NetworkState,
    model: DataModel,
    act: ActivationSpec,
    f: TestFunction,
    rng: RandomSource,
    **kwargs,
) -> Tuple[StepDecomposition, NetworkState]:
    return SGDEngine(cfg, model, act).decompose_step(state, f, rng, **kwargs)


def martingale_trace(
    cfg: SGDConfig,
    model: DataModel,
    act: ActivationSpec,
    f: TestFunction,
    t_end: float,
    rng: RandomSource,
    quadrature: QuadratureSample,
    **kwargs,
) -> MartingaleRun:
    return SGDEngine(cfg, model, act).martingale_trace(f, t_end, rng, quadrature, **kwargs)
