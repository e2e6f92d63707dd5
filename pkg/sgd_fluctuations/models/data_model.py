"""数据分布 π 与 mini-batch 规模"""

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np

from ..config.constants import MIXTURE_CONSTANTS


@dataclass(frozen=True, slots=True)
class MixtureComponent:
    """混合分布的一个分量：以概率 weight 取标签 label，x ~ N(mean, std² I_d)"""

    weight: float
    label: float
    mean: Tuple[float, ...]
    std: float

    def __post_init__(self) -> None:
        """数据验证"""
        if self.weight < 0:
            raise ValueError("component weight must be non-negative")
        if self.std < 0:
            raise ValueError("component std must be non-negative")
        if not np.isfinite(self.label):
            raise ValueError("component label must be finite")
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))

    @property
    def dim(self) -> int:
        return len(self.mean)


@dataclass(frozen=True, slots=True)
class DataModel:
    """数据分布 π

    默认模型：各以 1/2 概率取 y=+1, x ~ N(0, 1.2² I_d) 或 y=-1, x ~ N(0, 0.8² I_d)。
    """

    components: Tuple[MixtureComponent, ...]

    def __post_init__(self) -> None:
        """数据验证"""
        if not self.components:
            raise ValueError("data model needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))
        dims = {c.dim for c in self.components}
        if len(dims) != 1:
            raise ValueError(f"all components must share the same dimension, got {sorted(dims)}")
        if abs(sum(c.weight for c in self.components) - 1.0) > 1e-12:
            raise ValueError("mixture weights must sum to 1")
        if next(iter(dims)) < 1:
            raise ValueError("dimension must be >= 1")

    @classmethod
    def default(cls, d: int, spread: float = MIXTURE_CONSTANTS["SPREAD"]) -> "DataModel":
        """回归实验的默认分布"""
        weight = MIXTURE_CONSTANTS["WEIGHT"]
        zero = (0.0,) * d
        return cls(
            components=(
                MixtureComponent(weight=weight, label=1.0, mean=zero, std=1.0 + spread),
                MixtureComponent(weight=1.0 - weight, label=-1.0, mean=zero, std=1.0 - spread),
            )
        )

    @property
    def d(self) -> int:
        return self.components[0].dim

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def labels(self) -> np.ndarray:
        return np.array([c.label for c in self.components])

    @property
    def max_abs_label(self) -> float:
        return float(np.max(np.abs(self.labels)))

    def _component_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        means = np.array([c.mean for c in self.components], dtype=np.float64)
        stds = np.array([c.std for c in self.components], dtype=np.float64)
        return means, stds

    def sample_batch(self, rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
        """抽取 size 个独立样本，返回 (xs: size×d, ys: size)"""
        if size < 0:
            raise ValueError("batch size must be non-negative")
        means, stds = self._component_arrays()
        idx = rng.choice(len(self.components), size=size, p=self.weights)
        noise = rng.standard_normal((size, self.d))
        xs = means[idx] + stds[idx][:, None] * noise
        return xs, self.labels[idx].astype(np.float64)

    def sample_stratified(
        self, rng: np.random.Generator, size: int
    ) -> Tuple[np.ndarray, np.ndarray]:
        """按分量权重分层抽样，每个分量的样本数为 round(weight·size)，余数补给最后一个分量"""
        means, stds = self._component_arrays()
        counts = [int(round(c.weight * size)) for c in self.components[:-1]]
        counts.append(size - sum(counts))
        xs_parts, ys_parts = [], []
        for comp_idx, count in enumerate(counts):
            if count <= 0:
                continue
            noise = rng.standard_normal((count, self.d))
            xs_parts.append(means[comp_idx] + stds[comp_idx] * noise)
            ys_parts.append(np.full(count, self.components[comp_idx].label, dtype=np.float64))
        if not xs_parts:
            return np.empty((0, self.d)), np.empty(0)
        return np.vstack(xs_parts), np.concatenate(ys_parts)

    def to_dict(self) -> dict:
        """转换为字典格式"""
        return {
            "components": [
                {"weight": c.weight, "label": c.label, "mean": list(c.mean), "std": c.std}
                for c in self.components
            ]
        }


def sample_data(model: DataModel, rng: np.random.Generator) -> Tuple[np.ndarray, float]:
    """从 π 抽取一个 (x, y)"""
    xs, ys = model.sample_batch(rng, 1)
    return xs[0], float(ys[0])


BATCH_LAWS = ("fixed", "sequence")


@dataclass(frozen=True, slots=True)
class BatchSchedule:
    """mini-batch 规模 |B_k|

    fixed(m)：恒为 m。
    sequence：前若干步取 prefix[k]，此后恒为 limit_size，由构造保证收敛。
    """

    law: str = "fixed"
    limit_size: int = 1
    prefix: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        """数据验证"""
        if self.law not in BATCH_LAWS:
            raise ValueError(f"batch law must be one of {BATCH_LAWS}, got {self.law!r}")
        if self.limit_size < 1:
            raise ValueError("limit batch size must be a positive integer")
        object.__setattr__(self, "prefix", tuple(int(m) for m in self.prefix))
        if self.law == "fixed" and self.prefix:
            raise ValueError("fixed batch law takes no prefix sequence")
        if any(m < 1 for m in self.prefix):
            raise ValueError("every batch size must be a positive integer")

    @classmethod
    def fixed(cls, m: int) -> "BatchSchedule":
        return cls(law="fixed", limit_size=m)

    @classmethod
    def sequence(cls, prefix: Tuple[int, ...], limit_size: int) -> "BatchSchedule":
        return cls(law="sequence", limit_size=limit_size, prefix=tuple(prefix))

    def size_at(self, k: int) -> int:
        """第 k 步的 |B_k|"""
        if k < len(self.prefix):
            return self.prefix[k]
        return self.limit_size

    @property
    def inverse_limit_mean(self) -> float:
        """E[1/|B_∞|]，确定性规模序列下即 1/m_∞"""
        return 1.0 / self.limit_size
