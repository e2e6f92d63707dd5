"""μ̄ 参考轨迹的数据源抽象接口"""

from abc import ABC, abstractmethod
from typing import Any, Dict

from ..models.measure import TestFunction, TraceSeries


class ReferenceProvider(ABC):
    """平均场极限 μ̄ 的参考轨迹提供者

    统一大 N′ SGD 运行与平均场 ODE 两种离散化，供涨落计算使用。
    """

    @abstractmethod
    def reference_trace(self, probe: TestFunction, t_end: float) -> TraceSeries:
        """返回 [0, t_end] 上的 ⟨probe, μ̄_t⟩

        Raises:
            SimulationError: 参考轨迹计算失败时抛出
        """
        pass

    @abstractmethod
    def get_source_info(self) -> Dict[str, Any]:
        """获取数据源信息

        Returns:
            Dict[str, Any]: 数据源的基本信息
        """
        pass
