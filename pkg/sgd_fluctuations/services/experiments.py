"""实验编排服务

把 SGD 引擎、参考轨迹与涨落计算组合成五个实验：
single-run、meanfield-run、variance-reduction、clt-trajectory、drift-check。
"""

import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from ..config.constants import DRIFT_DEFAULTS, HARNESS_DEFAULTS, STREAM_NAMESPACES
from ..config.settings import ExperimentConfig
from ..data.meanfield_reference import MeanFieldReferenceProvider
from ..data.sgd_reference import SGDReferenceProvider
from ..data.source import ReferenceProvider
from ..errors import ConfigError
from ..models.fluctuation import FluctuationTrace
from ..models.meanfield import MeanFieldTrajectory, QuadratureSample
from ..models.measure import TestFunction, TraceSeries
from ..models.report import (
    CLTReport,
    CLTSummary,
    DriftReport,
    VarianceEntry,
    VarianceReport,
)
from ..utils.log import logger
from .fluctuation import drift_fit, fluctuation_trace
from .meanfield import reference_trace
from .replication import ReplicationFarm
from .sgd_engine import SGDEngine, TrajectoryResult
from .streams import StreamFactory

QUADRATURE_MODES = ("shared", "per-replication")
THIN_TOLERANCE = 1e-9

Series = Union[TraceSeries, FluctuationTrace]


def thin_trace(trace: Series, stride: float) -> Series:
    """只保留 t 为 stride 整数倍的网格点；stride <= 0 时原样返回"""
    if stride <= 0 or len(trace.grid) == 0:
        return trace
    multiples = np.rint(trace.grid / stride)
    mask = np.abs(trace.grid - multiples * stride) <= THIN_TOLERANCE * max(1.0, stride)
    if isinstance(trace, FluctuationTrace):
        return FluctuationTrace(
            grid=trace.grid[mask],
            values=trace.values[mask],
            N=trace.N,
            beta=trace.beta,
            probe=trace.probe,
            replication=trace.replication,
        )
    return TraceSeries(grid=trace.grid[mask], values=trace.values[mask], meta=trace.meta)


def summarize_ensemble(
    traces: Sequence[FluctuationTrace], beta: float, z: float = HARNESS_DEFAULTS["CI_Z"]
) -> CLTSummary:
    """均值 ± z·std/√R，R = 1 时置信带退化为均值本身"""
    if not traces:
        raise ValueError("cannot summarize an empty ensemble")
    values = np.stack([t.values for t in traces])
    replications = values.shape[0]
    mean = values.mean(axis=0)
    if replications > 1:
        half = z * values.std(axis=0, ddof=1) / math.sqrt(replications)
    else:
        half = np.zeros_like(mean)
    return CLTSummary(
        beta=beta,
        probe=traces[0].probe,
        grid=traces[0].grid,
        mean=mean,
        ci_lo=mean - half,
        ci_hi=mean + half,
        replications=replications,
    )


class ExperimentRunner:
    """实验编排服务

    持有一份已验证的 ExperimentConfig，所有重复都从主种子派生子流。
    """

    def __init__(self, cfg: ExperimentConfig, farm: Optional[ReplicationFarm] = None):
        self.cfg = cfg
        self.model = cfg.data_model()
        self.act = cfg.activation()
        self.farm = farm if farm is not None else ReplicationFarm(cfg.threads)
        self._stats = {
            "experiments": 0,
            "sgd_runs": 0,
            "reference_runs": 0,
        }

    # ---- 参考轨迹 ----

    def _stream_factory(self, namespace: str, ensemble: int = 0) -> StreamFactory:
        return StreamFactory(self.cfg.seed, STREAM_NAMESPACES[namespace], ensemble)

    def quadrature(self, replication: int = 0, namespace: str = "REFERENCE") -> QuadratureSample:
        """抽取求积样本；不同 (namespace, replication) 得到独立样本"""
        rng = self._stream_factory(namespace).generator(replication, "quadrature")
        return QuadratureSample.draw(
            self.model, self.cfg.mf_quadrature, rng, self.cfg.mf_stratified, seed=self.cfg.seed
        )

    def meanfield_provider(self) -> MeanFieldReferenceProvider:
        cfg = self.cfg
        return MeanFieldReferenceProvider(
            model=self.model,
            act=self.act,
            alpha=cfg.alpha,
            init=cfg.init_spec(),
            particles=cfg.mf_particles,
            quadrature=self.quadrature(),
            dt=cfg.meanfield_dt,
            rng=self._stream_factory("REFERENCE").generator(0, "reference"),
            integrator=cfg.mf_integrator,
            stride=cfg.mf_stride,
        )

    def reference_provider(self, beta: float) -> ReferenceProvider:
        """按配置构造 μ̄ 的参考：大 N′ SGD（噪声指数 beta）或平均场 ODE"""
        if self.cfg.reference == "meanfield":
            return self.meanfield_provider()
        return SGDReferenceProvider(
            self.cfg.sgd_config(N=self.cfg.reference_N, beta=beta),
            self.model,
            self.act,
            namespace=STREAM_NAMESPACES["REFERENCE"],
        )

    # ---- 单次运行 ----

    def run_single(self) -> TrajectoryResult:
        """一次 SGD 运行，记录配置中的全部探针"""
        cfg = self.cfg
        probes = [cfg.probe(name) for name in cfg.probes]
        engine = SGDEngine(cfg.sgd_config(), self.model, self.act)
        logger.info(f"单次运行: N={cfg.N}, d={cfg.d}, t_end={cfg.t_end}, beta={cfg.beta}")
        result = engine.run_trajectory(
            cfg.t_end,
            probes,
            self._stream_factory("RUN").run_streams(0),
            record_every=cfg.record_every,
        )
        self._stats["experiments"] += 1
        self._stats["sgd_runs"] += 1
        return result

    def run_meanfield(self) -> Dict[str, TraceSeries]:
        """积分平均场 ODE 并给出每个探针的 ⟨f, μ̄_t⟩"""
        cfg = self.cfg
        provider = self.meanfield_provider()
        logger.info(f"平均场运行: {provider.get_source_info()}")
        trajectory: MeanFieldTrajectory = provider.trajectory(cfg.t_end)
        traces = {
            name: reference_trace(trajectory, cfg.probe(name)) for name in cfg.probes
        }
        self._stats["experiments"] += 1
        self._stats["reference_runs"] += 1
        return traces

    # ---- 方差缩减 ----

    def run_variance(self, stream_key: Optional[Callable[[int], int]] = None) -> VarianceReport:
        """对每个 |B| 做 L 次独立运行，统计 m_ℓ = ⟨probe, μ_t^N⟩ 的经验方差

        variance.common_streams 为真（默认）时各 |B| 共用同一组子流（公共随机数），
        V̂ 随 |B| 的差异不含抽样噪声；为假时第 i 个 |B| 使用集合编号 i 的独立子流。
        stream_key 把重复编号映射到子流编号，默认恒等映射。
        """
        cfg = self.cfg
        if cfg.replications < 2:
            raise ConfigError("variance experiment needs at least 2 replications", source="variance")
        if not cfg.batch_sizes:
            raise ConfigError("variance experiment needs at least one batch size", source="variance")
        probe = cfg.probe(cfg.variance_probe)
        bootstrap_streams = self._stream_factory("BOOTSTRAP")
        key = stream_key if stream_key is not None else (lambda r: r)

        logger.info(
            f"方差缩减实验: N={cfg.N}, d={cfg.d}, t={cfg.t_end}, L={cfg.replications}, "
            f"|B| ∈ {list(cfg.batch_sizes)}, {'公共' if cfg.common_streams else '独立'}子流"
        )
        entries: List[VarianceEntry] = []
        for index, batch_size in enumerate(cfg.batch_sizes):
            streams = self._stream_factory("RUN", 0 if cfg.common_streams else index)
            sgd_cfg = cfg.sgd_config(batch_size=batch_size)
            engine = SGDEngine(sgd_cfg, self.model, self.act)
            record_every = max(1, sgd_cfg.steps_until(cfg.t_end))

            def replicate(
                r: int,
                engine: SGDEngine = engine,
                record_every: int = record_every,
                streams: StreamFactory = streams,
            ) -> float:
                result = engine.run_trajectory(
                    cfg.t_end, [probe], streams.run_streams(key(r)), record_every=record_every
                )
                return float(result.traces[probe.label].values[-1])

            samples = np.array(self.farm.map(replicate, cfg.replications, label=f"|B|={batch_size}"))
            v_hat = float(np.var(samples))
            rng = bootstrap_streams.generator(index, "bootstrap")
            bootstrap = np.array(
                [
                    np.var(samples[rng.integers(0, samples.size, samples.size)])
                    for _ in range(cfg.bootstrap)
                ]
            )
            entries.append(
                VarianceEntry(batch_size=batch_size, v_hat=v_hat, bootstrap=bootstrap, samples=samples)
            )
            self._stats["sgd_runs"] += cfg.replications
            logger.info(f"|B|={batch_size}: V̂={v_hat:.6g}")

        self._stats["experiments"] += 1
        return VarianceReport(
            entries=entries,
            probe=probe.label,
            t=cfg.t_end,
            N=cfg.N,
            replications=cfg.replications,
        )

    # ---- 涨落集合 ----

    def fluctuation_ensemble(
        self,
        beta: float,
        probe: TestFunction,
        reference: TraceSeries,
        namespace: str = "RUN",
        ensemble: int = 0,
    ) -> List[FluctuationTrace]:
        """R 次运行的 √N (⟨f, μ_t^N⟩ - ⟨f, μ̄_t⟩)，按 emit_stride 抽稀"""
        cfg = self.cfg
        engine = SGDEngine(cfg.sgd_config(beta=beta), self.model, self.act)
        streams = self._stream_factory(namespace, ensemble)

        def replicate(r: int) -> FluctuationTrace:
            result = engine.run_trajectory(
                cfg.t_end, [probe], streams.run_streams(r), record_every=cfg.record_every
            )
            run = result.traces[probe.label]
            run = TraceSeries(grid=run.grid, values=run.values, meta={**run.meta, "replication": r})
            return thin_trace(fluctuation_trace(run, reference, cfg.N), cfg.emit_stride)

        traces = self.farm.map(replicate, cfg.replications, label=f"beta={beta}")
        self._stats["sgd_runs"] += cfg.replications
        return traces

    def run_clt(self, reference: Optional[ReferenceProvider] = None) -> CLTReport:
        """每个 β 的涨落集合及其均值、95% 置信带

        各 β 在 RUN 命名空间下各占一个集合编号，参考轨迹共享。
        """
        cfg = self.cfg
        if not cfg.betas:
            raise ConfigError("clt experiment needs at least one beta", source="clt")
        probe = cfg.probe(cfg.clt_probe)
        provider = reference if reference is not None else self.reference_provider(max(cfg.betas))
        logger.info(f"CLT 轨迹实验: betas={list(cfg.betas)}, R={cfg.replications}, 参考={provider.get_source_info()}")

        # 1. 共享参考轨迹
        ref = provider.reference_trace(probe, cfg.t_end)
        self._stats["reference_runs"] += 1

        # 2. 各 β 的集合与汇总
        summaries: List[CLTSummary] = []
        traces: Dict[float, List[FluctuationTrace]] = {}
        for index, beta in enumerate(cfg.betas):
            if beta < DRIFT_DEFAULTS["BETA_LOW"]:
                logger.warning(f"β = {beta} < 3/4，该集合不做任何断言")
            ensemble = self.fluctuation_ensemble(beta, probe, ref, ensemble=index)
            traces[beta] = ensemble
            summaries.append(summarize_ensemble(ensemble, beta))

        self._stats["experiments"] += 1
        return CLTReport(summaries=summaries, traces=traces, reference_info=provider.get_source_info())

    def run_drift(self, reference: Optional[ReferenceProvider] = None) -> DriftReport:
        """β = 3/4 与 β_hi 两个集合的平均涨落之差对 t 拟合斜率

        coupled 时两集合共用子流（相同的初始化、batch 与标准化噪声）。
        """
        cfg = self.cfg
        beta_low, beta_hi = DRIFT_DEFAULTS["BETA_LOW"], cfg.beta_hi
        probe = cfg.probe("f2")
        provider = reference if reference is not None else self.reference_provider(beta_hi)
        if cfg.d != 1:
            logger.warning(f"漂移检查在 d = {cfg.d} 下运行，理论结果只覆盖 d = 1")
        logger.info(
            f"漂移检查: beta={beta_low} vs {beta_hi}, N={cfg.N}, R={cfg.replications}, "
            f"{'耦合' if cfg.coupled else '独立'}集合"
        )

        ref = provider.reference_trace(probe, cfg.t_end)
        self._stats["reference_runs"] += 1
        low = self.fluctuation_ensemble(beta_low, probe, ref)
        high_namespace = "RUN" if cfg.coupled else "INDEPENDENT"
        high = self.fluctuation_ensemble(beta_hi, probe, ref, namespace=high_namespace)
        fit = drift_fit(low, high)

        expected = cfg.d * cfg.noise_std**2
        expected_finite_n = expected * (1.0 - cfg.N ** (1.5 - 2.0 * beta_hi))
        logger.info(
            f"漂移斜率 {fit.slope:.6g} ± {fit.stderr:.2g}，理论值 {expected:.6g}"
            f"（有限 N 修正后 {expected_finite_n:.6g}）"
        )
        self._stats["experiments"] += 1
        return DriftReport(
            fit=fit,
            expected=expected,
            expected_finite_n=expected_finite_n,
            beta_low=beta_low,
            beta_hi=beta_hi,
            coupled=cfg.coupled,
            N=cfg.N,
            summaries=(summarize_ensemble(low, beta_low), summarize_ensemble(high, beta_hi)),
        )

    # ---- 鞅项集合 ----

    def run_martingale_ensemble(
        self,
        probe_name: str = "f2",
        batch_size: Optional[int] = None,
        quadrature_mode: str = "per-replication",
    ) -> np.ndarray:
        """R 次运行在 t_end 处的 ⟨f, M_t^N⟩

        shared：所有重复共用一份求积样本（比较不同 |B| 的方差时用）；
        per-replication：每个重复抽自己的求积样本，均值无偏。
        """
        if quadrature_mode not in QUADRATURE_MODES:
            raise ConfigError(
                f"quadrature mode must be one of {QUADRATURE_MODES}, got {quadrature_mode!r}",
                source="martingale",
            )
        cfg = self.cfg
        probe = cfg.probe(probe_name)
        engine = SGDEngine(cfg.sgd_config(batch_size=batch_size), self.model, self.act)
        streams = self._stream_factory("RUN")
        shared = self.quadrature() if quadrature_mode == "shared" else None

        def replicate(r: int) -> float:
            quad = shared if shared is not None else self.quadrature(r, namespace="RUN")
            run = engine.martingale_trace(probe, cfg.t_end, streams.run_streams(r), quad)
            return float(run.martingale.values[-1])

        values = np.array(self.farm.map(replicate, cfg.replications, label=f"martingale {quadrature_mode}"))
        self._stats["sgd_runs"] += cfg.replications
        return values

    def get_stats(self) -> Dict[str, Any]:
        """获取运行统计"""
        return {**self._stats, "farm": self.farm.get_stats()}


# ---- 函数式入口 ----


def run_variance_experiment(cfg: ExperimentConfig, **kwargs) -> VarianceReport:
    return ExperimentRunner(cfg).run_variance(**kwargs)


def run_clt_experiment(cfg: ExperimentConfig, **kwargs) -> CLTReport:
    return ExperimentRunner(cfg).run_clt(**kwargs)


def run_drift_check(cfg: ExperimentConfig, **kwargs) -> DriftReport:
    return ExperimentRunner(cfg).run_drift(**kwargs)
