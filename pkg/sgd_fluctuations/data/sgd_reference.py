"""大 N′ SGD 运行作为 μ̄ 的参考"""

from typing import Any, Dict, Tuple

from ..models.activation import ActivationSpec
from ..models.data_model import DataModel
from ..models.measure import TestFunction, TraceSeries
from ..models.network import SGDConfig
from ..services.sgd_engine import SGDEngine
from ..services.streams import StreamFactory
from ..utils.log import logger
from .source import ReferenceProvider

REFERENCE_REPLICATION = 0


class SGDReferenceProvider(ReferenceProvider):
    """用一次 N′ 个神经元的 SGD 运行近似 ⟨f, μ̄_t⟩，噪声保留

    参考运行使用独立的命名空间，与涨落运行的子流互不重叠。
    """

    def __init__(
        self,
        cfg: SGDConfig,
        model: DataModel,
        act: ActivationSpec,
        namespace: int = 99,
        record_every: int = 1,
    ):
        self.cfg = cfg
        self._engine = SGDEngine(cfg, model, act)
        self._streams = StreamFactory(cfg.seed, namespace)
        self._record_every = record_every
        self._cache: Dict[Tuple[str, float], TraceSeries] = {}

    def reference_trace(self, probe: TestFunction, t_end: float) -> TraceSeries:
        key = (probe.label, t_end)
        if key not in self._cache:
            logger.info(f"计算 SGD 参考轨迹: N'={self.cfg.N}, t_end={t_end}, 探针={probe.label}")
            result = self._engine.run_trajectory(
                t_end,
                [probe],
                self._streams.run_streams(REFERENCE_REPLICATION),
                record_every=self._record_every,
            )
            self._cache[key] = result.traces[probe.label]
        return self._cache[key]

    def get_source_info(self) -> Dict[str, Any]:
        return {
            "name": "sgd",
            "N_ref": self.cfg.N,
            "beta": self.cfg.beta,
            "noise_std": self.cfg.noise_std,
            "cached": len(self._cache),
        }
