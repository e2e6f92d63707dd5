"""实验结果数据模型"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Tuple

import numpy as np
from scipy import stats

from .fluctuation import DriftFit, FluctuationTrace


def _frozen_array(values) -> np.ndarray:
    array = np.array(values, dtype=np.float64, copy=True).ravel()
    array.flags.writeable = False
    return array


@dataclass(frozen=True, slots=True, eq=False)
class VarianceEntry:
    """一个 batch 规模下的 V̂ 及其 bootstrap 样本

    samples 为各重复的 m_ℓ = ⟨probe, μ_t^N⟩。
    """

    batch_size: int
    v_hat: float
    bootstrap: np.ndarray
    samples: np.ndarray

    def __post_init__(self) -> None:
        """数据验证"""
        if self.batch_size < 1:
            raise ValueError("batch_size must be a positive integer")
        if not self.v_hat >= 0:
            raise ValueError("V_hat must be non-negative")
        object.__setattr__(self, "bootstrap", _frozen_array(self.bootstrap))
        object.__setattr__(self, "samples", _frozen_array(self.samples))

    @property
    def bootstrap_count(self) -> int:
        return self.bootstrap.size

    @property
    def bootstrap_spread(self) -> Tuple[float, float]:
        """bootstrap 样本的最小值与最大值"""
        if self.bootstrap.size == 0:
            return (self.v_hat, self.v_hat)
        return (float(self.bootstrap.min()), float(self.bootstrap.max()))


@dataclass(frozen=True, slots=True, eq=False)
class VarianceReport:
    """方差缩减实验结果，每个 |B| 一项"""

    entries: Tuple[VarianceEntry, ...]
    probe: str
    t: float
    N: int
    replications: int

    def __post_init__(self) -> None:
        """数据验证"""
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise ValueError("variance report needs at least one batch size")

    @property
    def batch_sizes(self) -> Tuple[int, ...]:
        return tuple(e.batch_size for e in self.entries)

    @property
    def v_hats(self) -> np.ndarray:
        return np.array([e.v_hat for e in self.entries])

    def spearman(self) -> float:
        """V̂ 与 |B| 的 Spearman 秩相关；少于两项或 V̂ 全相等时为 nan"""
        if len(self.entries) < 2 or np.all(self.v_hats == self.v_hats[0]):
            return math.nan
        return float(stats.spearmanr(self.batch_sizes, self.v_hats)[0])

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式"""
        return {
            "probe": self.probe,
            "t": self.t,
            "N": self.N,
            "replications": self.replications,
            "batch_sizes": list(self.batch_sizes),
            "V_hat": self.v_hats.tolist(),
            "spearman": self.spearman(),
        }


@dataclass(frozen=True, slots=True, eq=False)
class CLTSummary:
    """一个 β 下涨落集合的均值与逐点正态近似置信带"""

    beta: float
    probe: str
    grid: np.ndarray
    mean: np.ndarray
    ci_lo: np.ndarray
    ci_hi: np.ndarray
    replications: int

    def __post_init__(self) -> None:
        """数据验证"""
        for name in ("grid", "mean", "ci_lo", "ci_hi"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name)))
        if not self.grid.size == self.mean.size == self.ci_lo.size == self.ci_hi.size:
            raise ValueError("summary columns must have the same length")
        if self.replications < 1:
            raise ValueError("summary needs at least one replication")

    @property
    def half_width(self) -> np.ndarray:
        return 0.5 * (self.ci_hi - self.ci_lo)

    def overlaps(self, other: "CLTSummary") -> np.ndarray:
        """逐点判断两条置信带是否相交"""
        if self.grid.shape != other.grid.shape or not np.allclose(self.grid, other.grid):
            raise ValueError("summaries are on different grids")
        return (self.ci_lo <= other.ci_hi) & (other.ci_lo <= self.ci_hi)


@dataclass(frozen=True, slots=True, eq=False)
class CLTReport:
    """CLT 轨迹实验结果"""

    summaries: Tuple[CLTSummary, ...]
    traces: Dict[float, Tuple[FluctuationTrace, ...]]
    reference_info: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        """数据验证"""
        object.__setattr__(self, "summaries", tuple(self.summaries))
        object.__setattr__(
            self, "traces", {beta: tuple(ensemble) for beta, ensemble in self.traces.items()}
        )

    def summary_for(self, beta: float) -> CLTSummary:
        for summary in self.summaries:
            if summary.beta == beta:
                return summary
        raise KeyError(beta)


@dataclass(frozen=True, slots=True, eq=False)
class DriftReport:
    """β = 3/4 漂移检查结果

    expected = d σ_ε²，expected_finite_n 额外扣除较大 β 在有限 N 下残留的部分。
    """

    fit: DriftFit
    expected: float
    expected_finite_n: float
    beta_low: float
    beta_hi: float
    coupled: bool
    N: int
    summaries: Tuple[CLTSummary, ...] = ()

    def __post_init__(self) -> None:
        """数据验证"""
        object.__setattr__(self, "summaries", tuple(self.summaries))

    @property
    def z_score(self) -> float:
        """(slope - expected_finite_n) / stderr"""
        diff = self.fit.slope - self.expected_finite_n
        if self.fit.stderr == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / self.fit.stderr

    def to_dict(self) -> Dict[str, Any]:
        """转换为字典格式"""
        return {
            "slope": self.fit.slope,
            "stderr": self.fit.stderr,
            "r_squared": self.fit.r_squared,
            "expected": self.expected,
            "expected_finite_n": self.expected_finite_n,
            "beta_low": self.beta_low,
            "beta_hi": self.beta_hi,
            "coupled": self.coupled,
            "N": self.N,
            "replications": self.fit.replications,
        }
