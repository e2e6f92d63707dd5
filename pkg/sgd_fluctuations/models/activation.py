"""激活函数模型

σ*(w, x) = f(w·x)，f 为回归实验中的分段线性斜坡函数，
或在两个拐点附近用三次 Hermite 插值磨光后的版本。
"""

from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from ..config.constants import RAMP_CONSTANTS

ArrayLike = Union[float, np.ndarray]

ACTIVATION_KINDS = ("ramp", "smooth-ramp")


@dataclass(frozen=True, slots=True)
class ActivationSpec:
    """激活函数参数

    h = 0 时即为精确斜坡；smooth-ramp 且 h > 0 时，
    在 [t_lo-h, t_lo+h] 与 [t_hi-h, t_hi+h] 上做 C1 磨光。
    """

    kind: str = "ramp"
    lo: float = RAMP_CONSTANTS["LO"]
    slope: float = RAMP_CONSTANTS["SLOPE"]
    intercept: float = RAMP_CONSTANTS["INTERCEPT"]
    hi: float = RAMP_CONSTANTS["HI"]
    t_lo: float = RAMP_CONSTANTS["T_LO"]
    t_hi: float = RAMP_CONSTANTS["T_HI"]
    h: float = 0.0

    def __post_init__(self) -> None:
        """数据验证"""
        if self.kind not in ACTIVATION_KINDS:
            raise ValueError(f"activation kind must be one of {ACTIVATION_KINDS}, got {self.kind!r}")
        if not self.t_lo < self.t_hi:
            raise ValueError("t_lo must be smaller than t_hi")
        if self.slope < 0:
            raise ValueError("ramp slope must be non-negative")
        if abs(self.lo - (self.slope * self.t_lo + self.intercept)) > 1e-12:
            raise ValueError("ramp is discontinuous at t_lo: lo != slope*t_lo + intercept")
        if abs(self.hi - (self.slope * self.t_hi + self.intercept)) > 1e-12:
            raise ValueError("ramp is discontinuous at t_hi: hi != slope*t_hi + intercept")
        if self.h < 0:
            raise ValueError("smoothing half-width h must be non-negative")
        if self.kind == "ramp" and self.h != 0:
            raise ValueError("exact ramp takes h = 0, use kind='smooth-ramp' for h > 0")
        if 2 * self.h > self.t_hi - self.t_lo:
            raise ValueError("smoothing windows overlap: need 2h <= t_hi - t_lo")

    @classmethod
    def smooth(cls, h: float) -> "ActivationSpec":
        """默认常数下的磨光斜坡"""
        return cls(kind="smooth-ramp", h=h)

    @property
    def is_smooth(self) -> bool:
        """是否二阶可导（分段意义下的 C1 磨光）"""
        return self.kind == "smooth-ramp" and self.h > 0

    @property
    def sup_abs(self) -> float:
        """sup |f|"""
        return max(abs(self.lo), abs(self.hi))

    @property
    def sup_derivative(self) -> float:
        """sup |f'|；磨光段上 f' = slope·s 单调，上界仍是斜率"""
        return self.slope

    def _blend_windows(self) -> Tuple[tuple, tuple]:
        h = self.h
        lower = (
            self.t_lo - h,
            self.lo,
            0.0,
            self.slope * (self.t_lo + h) + self.intercept,
            self.slope,
        )
        upper = (
            self.t_hi - h,
            self.slope * (self.t_hi - h) + self.intercept,
            self.slope,
            self.hi,
            0.0,
        )
        return lower, upper

    def _blend(self, t: np.ndarray, window: tuple, order: int) -> np.ndarray:
        start, p0, m0, p1, m1 = window
        length = 2.0 * self.h
        s = (t - start) / length
        if order == 0:
            return (
                (2 * s**3 - 3 * s**2 + 1) * p0
                + (s**3 - 2 * s**2 + s) * length * m0
                + (-2 * s**3 + 3 * s**2) * p1
                + (s**3 - s**2) * length * m1
            )
        if order == 1:
            return (
                (6 * s**2 - 6 * s) * p0
                + (3 * s**2 - 4 * s + 1) * length * m0
                + (-6 * s**2 + 6 * s) * p1
                + (3 * s**2 - 2 * s) * length * m1
            ) / length
        return (
            (12 * s - 6) * p0
            + (6 * s - 4) * length * m0
            + (-12 * s + 6) * p1
            + (6 * s - 2) * length * m1
        ) / length**2

    def _apply_blends(self, t: np.ndarray, out: np.ndarray, order: int) -> np.ndarray:
        if not self.is_smooth:
            return out
        lower, upper = self._blend_windows()
        for centre, window in ((self.t_lo, lower), (self.t_hi, upper)):
            mask = np.abs(t - centre) < self.h
            if np.any(mask):
                out[mask] = self._blend(t[mask], window, order)
        return out

    def value(self, t: ArrayLike) -> np.ndarray:
        """f(t)，支持数组"""
        t = np.asarray(t, dtype=np.float64)
        flat_t = np.atleast_1d(t)
        out = np.clip(self.slope * flat_t + self.intercept, self.lo, self.hi)
        result = self._apply_blends(flat_t, out, 0)
        return result.reshape(t.shape)

    def derivative(self, t: ArrayLike) -> np.ndarray:
        """f'(t)；精确斜坡在拐点处取左导数"""
        t = np.asarray(t, dtype=np.float64)
        flat_t = np.atleast_1d(t)
        out = np.where((flat_t > self.t_lo) & (flat_t <= self.t_hi), self.slope, 0.0)
        result = self._apply_blends(flat_t, out, 1)
        return result.reshape(t.shape)

    def second_derivative(self, t: ArrayLike) -> np.ndarray:
        """f''(t)，仅磨光段非零"""
        t = np.asarray(t, dtype=np.float64)
        flat_t = np.atleast_1d(t)
        out = np.zeros_like(flat_t)
        result = self._apply_blends(flat_t, out, 2)
        return result.reshape(t.shape)

    def to_dict(self) -> dict:
        """转换为字典格式"""
        return {
            "kind": self.kind,
            "lo": self.lo,
            "slope": self.slope,
            "intercept": self.intercept,
            "hi": self.hi,
            "t_lo": self.t_lo,
            "t_hi": self.t_hi,
            "h": self.h,
        }


def _check_dims(w: np.ndarray, x: np.ndarray) -> None:
    if w.shape[-1] != x.shape[-1]:
        raise ValueError(f"dimension mismatch: w has d={w.shape[-1]}, x has d={x.shape[-1]}")


def ramp_eval(spec: ActivationSpec, t: float) -> float:
    """标量 f(t)"""
    return float(spec.value(t))


def sigma_star(spec: ActivationSpec, w: np.ndarray, x: np.ndarray) -> float:
    """σ*(w, x) = f(w·x)"""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _check_dims(w, x)
    return float(spec.value(np.dot(w, x)))


def grad_sigma_star(spec: ActivationSpec, w: np.ndarray, x: np.ndarray) -> np.ndarray:
    """∇_w σ*(w, x) = f'(w·x)·x"""
    w = np.asarray(w, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    _check_dims(w, x)
    return float(spec.derivative(np.dot(w, x))) * x
