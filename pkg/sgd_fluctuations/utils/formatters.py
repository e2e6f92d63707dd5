"""实验结果格式化工具"""

import math
from pathlib import Path
from typing import Dict, Mapping, Sequence

from ..config.settings import ExperimentConfig
from ..errors import (
    ArtifactIOError,
    ConfigError,
    GridError,
    NumericalError,
    ProbeError,
    SimulationError,
)
from ..models.measure import TraceSeries
from ..models.report import CLTReport, DriftReport, VarianceReport

FAILURE_HINTS = {
    ConfigError: "检查配置文件的键名与取值，或用 --scale 选择预设",
    GridError: "让 harness.emit_stride 整除 t_end，或加大 t_end",
    ProbeError: "该操作需要光滑激活，设置 activation.kind = smooth-ramp 与 activation.h > 0",
    NumericalError: "减小 sgd.alpha 或 sgd.noise_std，或提高 sgd.beta",
    ArtifactIOError: "确认 --out 指向可写的目录",
}


class SummaryFormatter:
    """命令行摘要格式化器

    统一各实验的终端输出风格
    """

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config

    def format_header(self, title: str) -> str:
        lines = [f"📊 {title}", "=" * 25]
        lines.append(f"N={self.config.N}, d={self.config.d}, α={self.config.alpha}, σ_ε={self.config.noise_std}")
        lines.append(f"seed={self.config.seed}, t_end={self.config.t_end}")
        return "\n".join(lines)

    def format_traces(self, title: str, traces: Mapping[str, TraceSeries]) -> str:
        """各探针在起点与终点的取值"""
        lines = [self.format_header(title)]
        for label, trace in traces.items():
            if len(trace) == 0:
                lines.append(f"  {label}: (空轨迹)")
                continue
            lines.append(
                f"  {label}: t={trace.grid[0]:g} → {trace.values[0]:.6g}, "
                f"t={trace.grid[-1]:g} → {trace.values[-1]:.6g}（{len(trace)} 个点）"
            )
        return "\n".join(lines)

    def format_variance_report(self, report: VarianceReport) -> str:
        """每个 |B| 的 V̂ 与 bootstrap 范围"""
        lines = [self.format_header(f"方差缩减 ({report.probe}, t={report.t}, L={report.replications})")]
        for entry in report.entries:
            lo, hi = entry.bootstrap_spread
            lines.append(
                f"  |B|={entry.batch_size:>3}: V̂={entry.v_hat:.6g}  bootstrap [{lo:.4g}, {hi:.4g}]"
            )
        rho = report.spearman()
        if not math.isnan(rho):
            lines.append(f"\n📈 Spearman(V̂, |B|) = {rho:.3f}")
        return "\n".join(lines)

    def format_clt_report(self, report: CLTReport) -> str:
        """各 β 在最后一个网格点上的均值与带宽"""
        lines = [self.format_header("CLT 涨落轨迹")]
        lines.append(f"参考: {self._format_info(report.reference_info)}")
        for summary in report.summaries:
            if summary.grid.size == 0:
                continue
            lines.append(
                f"  β={summary.beta:g}: t={summary.grid[-1]:g} 均值 {summary.mean[-1]:.6g} "
                f"± {summary.half_width[-1]:.3g}（R={summary.replications}）"
            )
        if len(report.summaries) >= 2:
            first, second = report.summaries[0], report.summaries[1]
            overlap = first.overlaps(second)
            lines.append(f"\n置信带重叠: {int(overlap.sum())}/{overlap.size} 个网格点")
        return "\n".join(lines)

    def format_drift_report(self, report: DriftReport) -> str:
        """拟合斜率与理论值"""
        fit = report.fit
        lines = [self.format_header(f"β = {report.beta_low:g} 漂移检查")]
        lines.append(f"  斜率 {fit.slope:.6g} ± {fit.stderr:.3g}（R²={fit.r_squared:.3f}, R={fit.replications}）")
        lines.append(f"  理论值 d·σ_ε² = {report.expected:.6g}，有限 N 修正后 {report.expected_finite_n:.6g}")
        lines.append(f"  z = {report.z_score:.2f}，{'耦合' if report.coupled else '独立'}集合, β_hi={report.beta_hi:g}")
        return "\n".join(lines)

    @staticmethod
    def format_failure(category: str, error: SimulationError) -> str:
        """失败摘要，附带按异常类型给出的处理建议"""
        lines = [f"❌ {category}: {error.message}"]
        if isinstance(error, NumericalError) and error.step is not None:
            lines.append(f"   出错位置: 第 {error.step} 步, 神经元 {error.neuron}")
        for error_type, hint in FAILURE_HINTS.items():
            if isinstance(error, error_type):
                lines.append(f"💡 {hint}")
                break
        return "\n".join(lines)

    def format_artifacts(self, paths: Sequence[Path]) -> str:
        """已写出的结果文件"""
        names = ", ".join(p.name for p in paths)
        return f"✅ 已写入 {len(paths)} 个文件到 {self.config.output_dir}: {names}"

    @staticmethod
    def _format_info(info: Dict) -> str:
        return ", ".join(f"{k}={v}" for k, v in info.items())
