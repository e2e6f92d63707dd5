"""μ̄ 参考轨迹数据源"""

from .meanfield_reference import MeanFieldReferenceProvider
from .sgd_reference import SGDReferenceProvider
from .source import ReferenceProvider

__all__ = ["ReferenceProvider", "SGDReferenceProvider", "MeanFieldReferenceProvider"]
