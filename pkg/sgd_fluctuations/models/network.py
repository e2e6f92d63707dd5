"""两层网络的状态与 SGD 配置"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from ..config.constants import SGD_DEFAULTS
from ..errors import NumericalError
from .activation import ActivationSpec
from .data_model import BatchSchedule
from .measure import TestFunction

INIT_LAWS = ("gaussian", "uniform-ball", "point")


@dataclass(frozen=True, slots=True)
class InitSpec:
    """初始权重分布 μ0

    gaussian 的 std 为空时取 0.8/sqrt(d)。
    """

    law: str = "gaussian"
    std: Optional[float] = None
    radius: float = 1.0
    point: Tuple[float, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        """数据验证"""
        if self.law not in INIT_LAWS:
            raise ValueError(f"init law must be one of {INIT_LAWS}, got {self.law!r}")
        if self.std is not None and self.std < 0:
            raise ValueError("init std must be non-negative")
        if self.radius < 0:
            raise ValueError("init radius must be non-negative")
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))
        if self.law == "point" and not self.point:
            raise ValueError("point init needs the vector w0")

    @classmethod
    def gaussian(cls, std: Optional[float] = None) -> "InitSpec":
        return cls(law="gaussian", std=std)

    @classmethod
    def uniform_ball(cls, radius: float) -> "InitSpec":
        return cls(law="uniform-ball", radius=radius)

    @classmethod
    def at_point(cls, w0) -> "InitSpec":
        return cls(law="point", point=tuple(np.asarray(w0, dtype=np.float64).ravel()))

    def resolved_std(self, d: int) -> float:
        if self.std is not None:
            return self.std
        return SGD_DEFAULTS["INIT_STD_SCALE"] / math.sqrt(d)

    @property
    def support_radius(self) -> Optional[float]:
        """紧支撑半径；高斯初始化返回 None"""
        if self.law == "uniform-ball":
            return self.radius
        if self.law == "point":
            return float(np.linalg.norm(self.point))
        return None

    def sample(self, rng: np.random.Generator, n: int, d: int) -> np.ndarray:
        """抽取 n 个 i.i.d. 初始权重，返回 n×d"""
        if self.law == "gaussian":
            return self.resolved_std(d) * rng.standard_normal((n, d))
        if self.law == "uniform-ball":
            direction = rng.standard_normal((n, d))
            norms = np.linalg.norm(direction, axis=1, keepdims=True)
            norms[norms == 0] = 1.0
            radii = self.radius * rng.random(n) ** (1.0 / d)
            return direction / norms * radii[:, None]
        if len(self.point) != d:
            raise ValueError(f"point init has dimension {len(self.point)}, expected {d}")
        return np.tile(np.asarray(self.point, dtype=np.float64), (n, 1))

    def to_dict(self) -> dict:
        """转换为字典格式"""
        return {"law": self.law, "std": self.std, "radius": self.radius, "point": list(self.point)}


@dataclass(frozen=True, slots=True)
class SGDConfig:
    """带噪 mini-batch SGD 的参数

    beta = inf 表示不加噪声。
    """

    N: int
    d: int
    alpha: float = SGD_DEFAULTS["ALPHA"]
    beta: float = SGD_DEFAULTS["BETA"]
    noise_std: float = SGD_DEFAULTS["NOISE_STD"]
    batch: BatchSchedule = field(default_factory=BatchSchedule)
    init: InitSpec = field(default_factory=InitSpec)
    seed: int = SGD_DEFAULTS["SEED"]

    def __post_init__(self) -> None:
        """数据验证"""
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.alpha < 0 or not math.isfinite(self.alpha):
            raise ValueError("alpha must be a finite non-negative number")
        if not (self.beta > 0.5):
            raise ValueError("beta must lie in (1/2, inf]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def noisy(self) -> bool:
        return math.isfinite(self.beta) and self.noise_std > 0

    @property
    def noise_scale(self) -> float:
        """噪声项的系数 σ_ε / N^β"""
        if not self.noisy:
            return 0.0
        return self.noise_std / self.N**self.beta

    def steps_until(self, t_end: float) -> int:
        """⌊N·t_end⌋，容忍浮点误差"""
        return int(math.floor(self.N * t_end + 1e-9))


@dataclass(frozen=True, slots=True)
class NetworkState:
    """第 k 步的权重矩阵 W_k（第 i 行为 W_k^i）"""

    weights: np.ndarray
    k: int = 0

    def __post_init__(self) -> None:
        """数据验证：拷贝并冻结权重"""
        weights = np.array(self.weights, dtype=np.float64, copy=True)
        if weights.ndim != 2 or weights.shape[0] < 1 or weights.shape[1] < 1:
            raise ValueError(f"weights must be an N x d matrix with N, d >= 1, got {weights.shape}")
        if self.k < 0:
            raise ValueError("step counter must be non-negative")
        bad_rows = np.flatnonzero(~np.isfinite(weights).all(axis=1))
        if bad_rows.size:
            raise NumericalError(
                f"non-finite weight at step {self.k}, neuron {int(bad_rows[0])}",
                step=self.k,
                neuron=int(bad_rows[0]),
                source="sgd",
            )
        weights.flags.writeable = False
        object.__setattr__(self, "weights", weights)

    @property
    def N(self) -> int:
        return self.weights.shape[0]

    @property
    def d(self) -> int:
        return self.weights.shape[1]


@dataclass(frozen=True, slots=True)
class StepDecomposition:
    """一步 SGD 的前极限分解

    total = d_term + m_term + r_term + noise_term；
    exact_remainder 为真时 r_term 由常数 Hessian 精确给出。
    """

    k: int
    probe: str
    d_term: float
    m_term: float
    r_term: float
    noise_term: float
    total: float
    exact_remainder: bool

    @property
    def residual(self) -> float:
        return self.total - (self.d_term + self.m_term + self.r_term + self.noise_term)


def network_output(act: ActivationSpec, state: NetworkState, x: np.ndarray) -> float:
    """g_W^N(x) = (1/N) Σ_i σ*(W^i, x)"""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (state.d,):
        raise ValueError(f"input must have dimension {state.d}, got shape {x.shape}")
    return float(np.mean(act.value(state.weights @ x)))


def residual_gradient(
    weights: np.ndarray, xs: np.ndarray, ys: np.ndarray, act: ActivationSpec
) -> np.ndarray:
    """(1/m) Σ_b (y_b - g(x_b)) ∇σ*(W^i, x_b)，对每个神经元 i 返回一行

    g 为 weights 的经验平均；m = 0 时返回零。
    """
    if xs.shape[0] == 0:
        return np.zeros_like(weights)
    pre = weights @ xs.T
    outputs = act.value(pre).mean(axis=0)
    residual = ys - outputs
    return (act.derivative(pre) * residual) @ xs / xs.shape[0]


def q_values(
    f: TestFunction, weights: np.ndarray, xs: np.ndarray, ys: np.ndarray, act: ActivationSpec
) -> np.ndarray:
    """对每个样本 (x, y) 返回 (y - ⟨σ*(·,x), ν⟩)·⟨∇f·∇σ*(·,x), ν⟩，ν 为 weights 的经验测度"""
    pre = weights @ xs.T
    outputs = act.value(pre).mean(axis=0)
    directional = f.gradient(weights) @ xs.T
    return (ys - outputs) * (act.derivative(pre) * directional).mean(axis=0)
