"""模拟器异常层次"""

from typing import Optional


class SimulationError(Exception):
    """模拟器异常基类"""

    def __init__(
        self, message: str, source: Optional[str] = None, cause: Optional[Exception] = None
    ):
        self.message = message
        self.source = source
        self.cause = cause
        super().__init__(self.message)


class ConfigError(SimulationError):
    """配置异常"""

    pass


class NumericalError(SimulationError):
    """数值异常：权重或粒子出现 NaN/Inf"""

    def __init__(
        self,
        message: str,
        step: Optional[int] = None,
        neuron: Optional[int] = None,
        source: Optional[str] = None,
    ):
        self.step = step
        self.neuron = neuron
        super().__init__(message, source=source)


class ProbeError(SimulationError):
    """测试函数缺少所需的导数"""

    pass


class GridError(SimulationError):
    """时间网格不兼容"""

    pass


class ArtifactIOError(SimulationError):
    """结果文件读写异常"""

    def __init__(self, message: str, path: str, cause: Optional[Exception] = None):
        self.path = path
        super().__init__(f"{message}: {path}", source="csv", cause=cause)
