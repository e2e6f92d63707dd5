"""平均场粒子系统的数据模型"""

from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .data_model import DataModel

INTEGRATORS = ("euler", "rk4")


@dataclass(frozen=True, slots=True, eq=False)
class QuadratureSample:
    """固定的 π 样本，替代 ∫ … π(dx, dy)"""

    xs: np.ndarray
    ys: np.ndarray
    seed: Optional[int] = None
    stratified: bool = False

    def __post_init__(self) -> None:
        """数据验证"""
        xs = np.array(self.xs, dtype=np.float64, copy=True)
        ys = np.array(self.ys, dtype=np.float64, copy=True).ravel()
        if xs.ndim != 2 or xs.shape[0] < 1:
            raise ValueError("quadrature needs at least one (x, y) pair")
        if xs.shape[0] != ys.shape[0]:
            raise ValueError("quadrature xs and ys must have the same length")
        xs.flags.writeable = False
        ys.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @classmethod
    def draw(
        cls,
        model: DataModel,
        size: int,
        rng: np.random.Generator,
        stratified: bool = False,
        seed: Optional[int] = None,
    ) -> "QuadratureSample":
        """从 π 抽取 size 个样本"""
        if size < 1:
            raise ValueError("quadrature size must be >= 1")
        if stratified:
            xs, ys = model.sample_stratified(rng, size)
        else:
            xs, ys = model.sample_batch(rng, size)
        return cls(xs=xs, ys=ys, seed=seed, stratified=stratified)

    @property
    def size(self) -> int:
        return self.xs.shape[0]

    @property
    def d(self) -> int:
        return self.xs.shape[1]

    def as_batch(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.xs, self.ys


@dataclass(frozen=True, slots=True, eq=False)
class MeanFieldTrajectory:
    """粒子轨道 X̄_t 在存储时刻上的快照"""

    times: np.ndarray
    particles: np.ndarray
    dt: float
    integrator: str
    alpha: float

    def __post_init__(self) -> None:
        """数据验证"""
        times = np.asarray(self.times, dtype=np.float64)
        particles = np.asarray(self.particles, dtype=np.float64)
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}, got {self.integrator!r}")
        if particles.ndim != 3 or particles.shape[0] != times.shape[0]:
            raise ValueError("particles must be stored as (snapshots, P, d) matching times")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("snapshot times must be strictly increasing")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        times.flags.writeable = False
        particles.flags.writeable = False
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "particles", particles)

    @property
    def P(self) -> int:
        return self.particles.shape[1]

    @property
    def t_end(self) -> float:
        return float(self.times[-1])
