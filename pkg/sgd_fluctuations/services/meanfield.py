"""平均场极限 μ̄_t 的粒子近似

dX̄_t^i / dt = α ∫ (y - ⟨σ*(·,x), μ̄_t⟩) ∇σ*(X̄_t^i, x) π(dx, dy)，
π 期望用固定求积样本代替，μ̄_t 用 P 个粒子的经验测度代替。
"""

import math
from typing import Optional, Sequence

import numpy as np

from ..errors import GridError, NumericalError
from ..models.activation import ActivationSpec
from ..models.meanfield import INTEGRATORS, MeanFieldTrajectory, QuadratureSample
from ..models.measure import TestFunction, TraceSeries
from ..models.network import residual_gradient
from ..utils.log import logger

GRID_TOLERANCE = 1e-12


def meanfield_drift(
    particles: np.ndarray, quad: QuadratureSample, act: ActivationSpec, alpha: float
) -> np.ndarray:
    """每个粒子的漂移 (α/Q) Σ_q (y_q - ḡ(x_q)) ∇σ*(X^i, x_q)

    ḡ 在每个求积点上只算一次，复杂度 O(PQ)。
    """
    return alpha * residual_gradient(particles, quad.xs, quad.ys, act)


def lipschitz_constant(quad: QuadratureSample, act: ActivationSpec, alpha: float) -> float:
    """C0 = α (max|y| + sup|σ*|) sup|∇σ*|，粒子位移满足 |X̄_t - X̄_s| <= C0 (t - s)"""
    max_x = float(np.max(np.linalg.norm(quad.xs, axis=1)))
    max_y = float(np.max(np.abs(quad.ys)))
    return alpha * (max_y + act.sup_abs) * act.sup_derivative * max_x


def _advance(
    x: np.ndarray,
    h: float,
    quad: QuadratureSample,
    act: ActivationSpec,
    alpha: float,
    integrator: str,
) -> np.ndarray:
    if integrator == "euler":
        return x + h * meanfield_drift(x, quad, act, alpha)
    k1 = meanfield_drift(x, quad, act, alpha)
    k2 = meanfield_drift(x + 0.5 * h * k1, quad, act, alpha)
    k3 = meanfield_drift(x + 0.5 * h * k2, quad, act, alpha)
    k4 = meanfield_drift(x + h * k3, quad, act, alpha)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(
    init_particles: np.ndarray,
    quad: QuadratureSample,
    act: ActivationSpec,
    alpha: float,
    t_end: float,
    dt: float,
    integrator: str = "rk4",
    stride: int = 1,
) -> MeanFieldTrajectory:
    """定步长积分粒子系统，每 stride 步及终点存一次快照"""
    if dt <= 0:
        raise ValueError("dt must be positive")
    if t_end < 0:
        raise ValueError("t_end must be non-negative")
    if integrator not in INTEGRATORS:
        raise ValueError(f"integrator must be one of {INTEGRATORS}, got {integrator!r}")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    x = np.array(init_particles, dtype=np.float64, copy=True)
    if x.ndim != 2 or x.shape[1] != quad.d:
        raise ValueError(f"particles must be P x {quad.d}, got shape {x.shape}")

    n_steps = int(math.ceil(t_end / dt - 1e-9)) if t_end > 0 else 0
    times = [0.0]
    snapshots = [x.copy()]
    for j in range(1, n_steps + 1):
        t_prev = (j - 1) * dt
        t_next = t_end if j == n_steps else j * dt
        x = _advance(x, t_next - t_prev, quad, act, alpha, integrator)
        bad_rows = np.flatnonzero(~np.isfinite(x).all(axis=1))
        if bad_rows.size:
            raise NumericalError(
                f"non-finite particle at step {j}, particle {int(bad_rows[0])}",
                step=j,
                neuron=int(bad_rows[0]),
                source="meanfield",
            )
        if j % stride == 0 or j == n_steps:
            times.append(t_next)
            snapshots.append(x.copy())

    logger.debug(f"平均场积分完成: P={x.shape[0]}, Q={quad.size}, 步数={n_steps}, {integrator}")
    return MeanFieldTrajectory(
        times=np.asarray(times),
        particles=np.stack(snapshots),
        dt=dt,
        integrator=integrator,
        alpha=alpha,
    )


def reference_trace(
    traj: MeanFieldTrajectory, f: TestFunction, grid: Optional[Sequence[float]] = None
) -> TraceSeries:
    """⟨f, μ̄_t⟩ 在 grid 上的值，快照之间线性插值；grid 为空时取快照时刻"""
    at_snapshots = np.array([np.mean(f.value(traj.particles[j])) for j in range(traj.times.size)])
    if grid is None:
        grid = traj.times
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size and (
        grid[0] < traj.times[0] - GRID_TOLERANCE or grid[-1] > traj.times[-1] + GRID_TOLERANCE
    ):
        raise GridError(
            f"requested grid [{grid[0]}, {grid[-1]}] lies outside the trajectory "
            f"[{traj.times[0]}, {traj.times[-1]}]",
            source="meanfield",
        )
    values = np.interp(grid, traj.times, at_snapshots)
    meta = {"N": traj.P, "probe": f.label, "seed": None, "beta": math.inf, "kind": "meanfield"}
    return TraceSeries(grid=grid, values=values, meta=meta)
