"""涨落轨迹、G 过程协方差与 β = 3/4 漂移诊断"""

import math
from typing import List, Sequence, Union

import numpy as np

from ..errors import GridError, ProbeError
from ..models.activation import ActivationSpec
from ..models.data_model import BatchSchedule
from ..models.fluctuation import CovarianceEstimate, DriftFit, FluctuationTrace
from ..models.meanfield import MeanFieldTrajectory, QuadratureSample
from ..models.measure import EmpiricalSnapshot, TestFunction, TraceSeries
from ..models.network import q_values

GRID_TOLERANCE = 1e-12
MIN_FIT_POINTS = 10


def fluctuation_trace(run: TraceSeries, ref: TraceSeries, N: int) -> FluctuationTrace:
    """逐点 √N (run - ref)，参考轨迹插值到 run 的网格上"""
    if len(ref) == 0:
        raise GridError("reference trace is empty", source="fluctuation")
    if len(run) and (
        run.grid[0] < ref.grid[0] - GRID_TOLERANCE or run.grid[-1] > ref.grid[-1] + GRID_TOLERANCE
    ):
        raise GridError(
            f"run grid [{run.grid[0]}, {run.grid[-1]}] exceeds the reference range "
            f"[{ref.grid[0]}, {ref.grid[-1]}]",
            source="fluctuation",
        )
    ref_values = np.interp(run.grid, ref.grid, ref.values)
    return FluctuationTrace(
        grid=run.grid,
        values=math.sqrt(N) * (run.values - ref_values),
        N=N,
        beta=float(run.meta.get("beta", math.nan)),
        probe=str(run.meta.get("probe", "")),
        replication=run.meta.get("replication"),
    )


def q_kernel(
    f: TestFunction, snap_ref: EmpiricalSnapshot, x: np.ndarray, y: float, act: ActivationSpec
) -> float:
    """Q_v[f](x, y) = (y - ⟨σ*(·,x), μ̄_v⟩) ⟨∇f·∇σ*(·,x), μ̄_v⟩"""
    if not f.has_gradient:
        raise ProbeError(f"q_kernel needs a probe with a gradient, got {f.label!r}")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    return float(q_values(f, snap_ref.samples, x, np.array([y], dtype=np.float64), act)[0])


def _centered_q(
    f: TestFunction, particles: np.ndarray, quad: QuadratureSample, act: ActivationSpec
) -> np.ndarray:
    values = q_values(f, particles, quad.xs, quad.ys, act)
    return values - values.mean()


def _integration_nodes(ref_traj: MeanFieldTrajectory, s: float) -> tuple:
    """[0, s] 内的快照下标，以及 s 不在快照上时用于插值的相邻下标"""
    times = ref_traj.times
    inside = np.flatnonzero(times <= s + GRID_TOLERANCE)
    last = int(inside[-1])
    if abs(times[last] - s) <= GRID_TOLERANCE:
        return inside, None
    return inside, (last, last + 1)


def _covariance_integrals(
    probes: Sequence[TestFunction],
    ref_traj: MeanFieldTrajectory,
    quad: QuadratureSample,
    act: ActivationSpec,
    s: float,
) -> tuple:
    """返回 (节点时刻, 每个节点上的 π 协方差矩阵, 梯形积分)"""
    for f in probes:
        if not f.has_gradient:
            raise ProbeError(f"covariance needs probes with a gradient, got {f.label!r}")
    if s < 0:
        raise ValueError("s must be non-negative")
    if s > ref_traj.t_end + GRID_TOLERANCE:
        raise GridError(
            f"s = {s} lies beyond the reference trajectory end {ref_traj.t_end}",
            source="fluctuation",
        )

    def node_matrix(j: int) -> np.ndarray:
        centered = np.stack([_centered_q(f, ref_traj.particles[j], quad, act) for f in probes])
        return centered @ centered.T / quad.size

    indices, bracket = _integration_nodes(ref_traj, s)
    nodes = [float(ref_traj.times[j]) for j in indices]
    matrices = [node_matrix(int(j)) for j in indices]
    if bracket is not None:
        lo, hi = bracket
        t_lo, t_hi = ref_traj.times[lo], ref_traj.times[hi]
        weight = (s - t_lo) / (t_hi - t_lo)
        matrices.append((1.0 - weight) * matrices[-1] + weight * node_matrix(hi))
        nodes.append(float(s))
    stacked = np.stack(matrices)
    stacked = 0.5 * (stacked + np.transpose(stacked, (0, 2, 1)))
    node_times = np.asarray(nodes)
    if node_times.size < 2:
        integral = np.zeros(stacked.shape[1:])
    else:
        widths = np.diff(node_times)
        integral = np.tensordot(widths, 0.5 * (stacked[1:] + stacked[:-1]), axes=1)
    return node_times, stacked, integral


def gprocess_covariance(
    f_i: TestFunction,
    f_j: TestFunction,
    ref_traj: MeanFieldTrajectory,
    quad: QuadratureSample,
    batch: BatchSchedule,
    s: float,
    t: float,
    act: ActivationSpec,
) -> CovarianceEstimate:
    """α² E[1/|B_∞|] ∫_0^s Cov_π(Q_v[f_i], Q_v[f_j]) dv，积分用快照网格上的梯形公式"""
    if s > t:
        raise ValueError(f"covariance needs s <= t, got s={s}, t={t}")
    nodes, matrices, integral = _covariance_integrals([f_i, f_j], ref_traj, quad, act, s)
    prefactor = batch.inverse_limit_mean
    value = ref_traj.alpha**2 * prefactor * float(integral[0, 1])
    return CovarianceEstimate(
        probes=(f_i.label, f_j.label),
        s=s,
        t=t,
        value=value,
        prefactor=prefactor,
        nodes=nodes,
        integrand=matrices[:, 0, 1].copy(),
    )


def gprocess_covariance_matrix(
    probes: Sequence[TestFunction],
    ref_traj: MeanFieldTrajectory,
    quad: QuadratureSample,
    batch: BatchSchedule,
    s: float,
    t: float,
    act: ActivationSpec,
) -> np.ndarray:
    """一组探针上的协方差矩阵，严格对称"""
    if s > t:
        raise ValueError(f"covariance needs s <= t, got s={s}, t={t}")
    _, _, integral = _covariance_integrals(list(probes), ref_traj, quad, act, s)
    matrix = ref_traj.alpha**2 * batch.inverse_limit_mean * integral
    return 0.5 * (matrix + matrix.T)


TraceInput = Union[FluctuationTrace, Sequence[FluctuationTrace]]


def _as_ensemble(traces: TraceInput) -> List[FluctuationTrace]:
    if isinstance(traces, FluctuationTrace):
        return [traces]
    return list(traces)


def drift_fit(trace_34: TraceInput, trace_hi: TraceInput) -> DriftFit:
    """mean(trace_34 - trace_hi) 对 t 的最小二乘斜率

    标准误取各重复斜率的标准差 / √R；只有一个重复时退回普通最小二乘的标准误。
    """
    low, high = _as_ensemble(trace_34), _as_ensemble(trace_hi)
    if not low or len(low) != len(high):
        raise GridError(
            f"drift_fit needs paired ensembles, got {len(low)} and {len(high)} traces",
            source="fluctuation",
        )
    grid = low[0].grid
    for trace in low + high:
        if trace.grid.shape != grid.shape or not np.allclose(trace.grid, grid, atol=GRID_TOLERANCE):
            raise GridError("drift_fit needs all traces on a common grid", source="fluctuation")
    if grid.size < MIN_FIT_POINTS:
        raise GridError(
            f"drift_fit needs at least {MIN_FIT_POINTS} grid points, got {grid.size}",
            source="fluctuation",
        )

    diffs = np.stack([a.values - b.values for a, b in zip(low, high)])
    mean_diff = diffs.mean(axis=0)
    centered_t = grid - grid.mean()
    sxx = float(centered_t @ centered_t)
    slope = float(centered_t @ (mean_diff - mean_diff.mean()) / sxx)
    intercept = float(mean_diff.mean() - slope * grid.mean())
    residuals = mean_diff - (intercept + slope * grid)
    ss_res = float(residuals @ residuals)
    ss_tot = float(((mean_diff - mean_diff.mean()) ** 2).sum())
    r_squared = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot

    replications = diffs.shape[0]
    if replications >= 2:
        per_rep = (diffs - diffs.mean(axis=1, keepdims=True)) @ centered_t / sxx
        stderr = float(np.std(per_rep, ddof=1) / math.sqrt(replications))
    else:
        stderr = math.sqrt(ss_res / (grid.size - 2) / sxx)
    return DriftFit(
        slope=slope,
        stderr=stderr,
        intercept=intercept,
        r_squared=r_squared,
        replications=replications,
    )
