"""经验测度上的积分与距离"""

import numpy as np

from ..models.measure import EmpiricalSnapshot, TestFunction


def bracket(f: TestFunction, snap: EmpiricalSnapshot) -> float:
    """⟨f, μ⟩ = (1/M) Σ f(sample_i)"""
    return float(np.mean(f.value(snap.samples)))


def moment(snap: EmpiricalSnapshot, order: float) -> float:
    """(1/M) Σ ‖sample_i‖^p，p >= 1"""
    if order < 1:
        raise ValueError(f"moment order must be >= 1, got {order}")
    norms = np.linalg.norm(snap.samples, axis=1)
    return float(np.mean(norms**order))


def wasserstein1_1d(a: EmpiricalSnapshot, b: EmpiricalSnapshot) -> float:
    """一维等样本量经验测度之间的 W1，按分位数耦合精确计算"""
    if a.d != 1 or b.d != 1:
        raise ValueError(f"wasserstein1_1d needs d = 1, got d = {a.d} and d = {b.d}")
    if a.size != b.size:
        raise ValueError(f"wasserstein1_1d needs equal sample counts, got {a.size} and {b.size}")
    sorted_a = np.sort(a.samples[:, 0])
    sorted_b = np.sort(b.samples[:, 0])
    return float(np.mean(np.abs(sorted_a - sorted_b)))
