"""经验测度、测试函数与时间序列"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional

import numpy as np

from ..errors import ProbeError
from .activation import ActivationSpec

PROBE_KINDS = ("norm2", "square", "coordinate", "affine", "quadratic", "activation", "callable")


@dataclass(frozen=True, slots=True, eq=False)
class EmpiricalSnapshot:
    """等权经验测度 (1/M) Σ δ_{samples_i}，样本拷贝自原状态"""

    samples: np.ndarray
    time_tag: float = 0.0

    def __post_init__(self) -> None:
        """数据验证"""
        samples = np.array(self.samples, dtype=np.float64, copy=True)
        if samples.ndim == 1:
            samples = samples[:, None]
        if samples.ndim != 2 or samples.shape[0] < 1:
            raise ValueError("snapshot needs at least one sample row")
        if self.time_tag < 0:
            raise ValueError("time tag must be non-negative")
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    @classmethod
    def from_state(cls, state, time_tag: Optional[float] = None) -> "EmpiricalSnapshot":
        """由 NetworkState 构造 ν_k^N，time_tag 默认 k/N"""
        t = state.k / state.N if time_tag is None else time_tag
        return cls(samples=state.weights, time_tag=t)

    @property
    def size(self) -> int:
        return self.samples.shape[0]

    @property
    def d(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True, slots=True, eq=False)
class TestFunction:
    """测试函数 f，对样本行向量化求值

    coordinate 的下标从 0 开始；callable 只提供函数值。
    """

    __test__ = False  # 防止 pytest 把它当作测试类收集

    kind: str
    label: str
    a: Optional[np.ndarray] = None
    b: float = 0.0
    A: Optional[np.ndarray] = None
    index: int = 0
    activation: Optional[ActivationSpec] = None
    anchor: Optional[np.ndarray] = None
    func: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        """数据验证"""
        if self.kind not in PROBE_KINDS:
            raise ValueError(f"probe kind must be one of {PROBE_KINDS}, got {self.kind!r}")
        if self.kind == "quadratic":
            if self.A is None or self.A.ndim != 2 or self.A.shape[0] != self.A.shape[1]:
                raise ValueError("quadratic probe needs a square matrix A")
            if not np.array_equal(self.A, self.A.T):
                raise ValueError("quadratic probe needs a symmetric matrix A")
        if self.kind == "coordinate" and self.index < 0:
            raise ValueError("coordinate index must be non-negative")
        if self.kind == "activation" and (self.activation is None or self.anchor is None):
            raise ValueError("activation probe needs an ActivationSpec and an anchor x0")
        if self.kind == "callable" and self.func is None:
            raise ValueError("callable probe needs a function")

    # ---- 构造 ----

    @classmethod
    def norm2(cls) -> "TestFunction":
        return cls(kind="norm2", label="norm2")

    @classmethod
    def square(cls) -> "TestFunction":
        return cls(kind="square", label="f2")

    @classmethod
    def coordinate(cls, j: int) -> "TestFunction":
        return cls(kind="coordinate", label=f"coordinate:{j}", index=j)

    @classmethod
    def affine(cls, a, b: float = 0.0, label: str = "affine") -> "TestFunction":
        return cls(kind="affine", label=label, a=np.asarray(a, dtype=np.float64), b=float(b))

    @classmethod
    def constant(cls, c: float = 1.0, d: int = 1) -> "TestFunction":
        return cls.affine(np.zeros(d), c, label="one" if c == 1.0 else f"constant:{c!r}")

    @classmethod
    def quadratic(cls, A, a=None, b: float = 0.0, label: str = "quadratic") -> "TestFunction":
        A = np.asarray(A, dtype=np.float64)
        a = np.zeros(A.shape[0]) if a is None else np.asarray(a, dtype=np.float64)
        return cls(kind="quadratic", label=label, A=A, a=a, b=float(b))

    @classmethod
    def with_activation(cls, act: ActivationSpec, x0) -> "TestFunction":
        return cls(
            kind="activation",
            label="activation",
            activation=act,
            anchor=np.asarray(x0, dtype=np.float64),
        )

    @classmethod
    def from_callable(cls, func: Callable[[np.ndarray], np.ndarray], label: str) -> "TestFunction":
        return cls(kind="callable", label=label, func=func)

    # ---- 性质 ----

    @property
    def has_gradient(self) -> bool:
        return self.kind != "callable"

    @property
    def is_smooth(self) -> bool:
        """是否处处二阶可导"""
        if self.kind in ("square", "coordinate", "affine", "quadratic"):
            return True
        if self.kind == "activation":
            return self.activation.is_smooth
        return False

    @property
    def has_constant_hessian(self) -> bool:
        return self.kind in ("square", "coordinate", "affine", "quadratic")

    # ---- 求值 ----

    def value(self, W: np.ndarray) -> np.ndarray:
        """f(W^i)，W 为 M×d"""
        W = np.atleast_2d(np.asarray(W, dtype=np.float64))
        if self.kind == "norm2":
            return np.linalg.norm(W, axis=1)
        if self.kind == "square":
            return np.einsum("ij,ij->i", W, W)
        if self.kind == "coordinate":
            return W[:, self.index].copy()
        if self.kind == "affine":
            return W @ self.a + self.b
        if self.kind == "quadratic":
            return np.einsum("ij,jk,ik->i", W, self.A, W) + W @ self.a + self.b
        if self.kind == "activation":
            return self.activation.value(W @ self.anchor)
        return np.asarray(self.func(W), dtype=np.float64)

    def gradient(self, W: np.ndarray) -> np.ndarray:
        """∇f(W^i)，返回 M×d"""
        W = np.atleast_2d(np.asarray(W, dtype=np.float64))
        if self.kind == "norm2":
            norms = np.linalg.norm(W, axis=1, keepdims=True)
            safe = np.where(norms > 0, norms, 1.0)
            return np.where(norms > 0, W / safe, 0.0)
        if self.kind == "square":
            return 2.0 * W
        if self.kind == "coordinate":
            grad = np.zeros_like(W)
            grad[:, self.index] = 1.0
            return grad
        if self.kind == "affine":
            return np.broadcast_to(self.a, W.shape).copy()
        if self.kind == "quadratic":
            return 2.0 * W @ self.A + self.a
        if self.kind == "activation":
            return self.activation.derivative(W @ self.anchor)[:, None] * self.anchor
        raise ProbeError(f"probe {self.label!r} has no gradient", source="probe")

    def hessian(self, W: np.ndarray) -> np.ndarray:
        """∇²f(W^i)，返回 M×d×d；不光滑的测试函数被拒绝"""
        W = np.atleast_2d(np.asarray(W, dtype=np.float64))
        if not self.is_smooth:
            raise ProbeError(f"probe {self.label!r} is not twice differentiable", source="probe")
        m, d = W.shape
        if self.kind == "square":
            return np.broadcast_to(2.0 * np.eye(d), (m, d, d))
        if self.kind in ("coordinate", "affine"):
            return np.zeros((m, d, d))
        if self.kind == "quadratic":
            return np.broadcast_to(2.0 * self.A, (m, d, d))
        curvature = self.activation.second_derivative(W @ self.anchor)
        return curvature[:, None, None] * np.outer(self.anchor, self.anchor)


@dataclass(frozen=True, slots=True, eq=False)
class TraceSeries:
    """网格 t_j 上的 ⟨f, μ_t^N⟩"""

    grid: np.ndarray
    values: np.ndarray
    meta: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """数据验证"""
        grid = np.array(self.grid, dtype=np.float64, copy=True).ravel()
        values = np.array(self.values, dtype=np.float64, copy=True).ravel()
        if grid.shape != values.shape:
            raise ValueError(f"grid has {grid.size} points but values has {values.size}")
        if grid.size > 1 and not np.all(np.diff(grid) > 0):
            raise ValueError("trace grid must be strictly increasing")
        grid.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "meta", dict(self.meta))

    def __len__(self) -> int:
        return self.grid.size

    def value_at(self, t: float) -> float:
        """网格间线性插值"""
        return float(np.interp(t, self.grid, self.values))
