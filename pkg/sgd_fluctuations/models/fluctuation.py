"""涨落过程相关的数据模型"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np


@dataclass(frozen=True, slots=True, eq=False)
class FluctuationTrace:
    """⟨f, η_t^N⟩ ≈ √N (⟨f, μ_t^N⟩ - ⟨f, μ̄_t⟩)，网格与 SGD 运行一致"""

    grid: np.ndarray
    values: np.ndarray
    N: int
    beta: float
    probe: str
    replication: Optional[int] = None

    def __post_init__(self) -> None:
        """数据验证"""
        grid = np.array(self.grid, dtype=np.float64, copy=True).ravel()
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if grid.shape != values.shape:
            raise ValueError("fluctuation grid and values must have the same length")
        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True, slots=True, eq=False)
class CovarianceEstimate:
    """G 过程协方差 Cov(⟨f_i, G_t⟩, ⟨f_j, G_s⟩) 的估计

    integrand 为各时间节点上的 Cov_π(Q_v[f_i], Q_v[f_j])。
    """

    probes: Tuple[str, str]
    s: float
    t: float
    value: float
    prefactor: float
    nodes: np.ndarray
    integrand: np.ndarray


@dataclass(frozen=True, slots=True)
class DriftFit:
    """β = 3/4 与较大 β 的平均涨落之差对 t 的最小二乘拟合"""

    slope: float
    stderr: float
    intercept: float
    r_squared: float
    replications: int

    def within(self, expected: float, rel_tol: float) -> bool:
        return math.isclose(self.slope, expected, rel_tol=rel_tol)
