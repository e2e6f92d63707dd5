"""sgd_fluctuations 命令行入口"""

import argparse
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

from .config.constants import EXIT_CODES, SCALE_PRESETS
from .config.settings import ExperimentConfig, load_config, save_config
from .errors import ArtifactIOError, ConfigError, NumericalError, SimulationError
from .models.measure import TraceSeries
from .services.experiments import ExperimentRunner, thin_trace
from .utils.csv_io import emit_csv
from .utils.formatters import SummaryFormatter
from .utils.log import configure_logging, logger

# 子命令 -> 实验名
COMMANDS: Dict[str, str] = {
    "single-run": "single-run",
    "meanfield-run": "meanfield-run",
    "variance": "variance-reduction",
    "clt": "clt-trajectory",
    "drift": "drift-check",
}


class SimulatorCLI:
    """命令行主类

    解析配置、运行实验、写出 CSV 并打印摘要
    """

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.out_dir = Path(config.output_dir)
        self._runner: Optional[ExperimentRunner] = None
        self._formatter = SummaryFormatter(config)
        self._written: List[Path] = []

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "SimulatorCLI":
        """默认值 < 规模预设 < 配置文件 < 命令行参数"""
        config = ExperimentConfig(experiment=COMMANDS[args.command])
        if args.scale:
            config = config.with_scale(args.scale)
        if args.config:
            config = load_config(args.config, base=config)
        config = config.with_overrides(
            experiment=COMMANDS[args.command],
            output_dir=args.out,
            seed=args.seed,
            threads=args.threads,
        )
        config.validate()
        return cls(config)

    @property
    def runner(self) -> ExperimentRunner:
        if self._runner is None:
            self._runner = ExperimentRunner(self.config)
        return self._runner

    def run(self) -> int:
        handlers: Dict[str, Callable[[], str]] = {
            "single-run": self.single_run,
            "meanfield-run": self.meanfield_run,
            "variance-reduction": self.variance,
            "clt-trajectory": self.clt,
            "drift-check": self.drift,
        }
        logger.info(f"开始实验 {self.config.experiment}，输出目录 {self.out_dir}")
        save_config_artifact(self.config, self.out_dir / "config.txt")
        print(handlers[self.config.experiment]())
        print(self._formatter.format_artifacts(self._written))
        logger.info(f"实验完成: {self.runner.get_stats()}")
        return EXIT_CODES["OK"]

    def _emit(self, artifact, path: Path, seed: Optional[int] = None) -> None:
        self._written.append(emit_csv(artifact, path, seed=seed))

    def single_run(self) -> str:
        result = self.runner.run_single()
        traces = {label: thin_trace(t, self.config.emit_stride) for label, t in result.traces.items()}
        self._emit(
            [_with_replication(t, 0) for t in traces.values()],
            self.out_dir / "single_run_trace.csv",
        )
        return self._formatter.format_traces("单次 SGD 运行", traces)

    def meanfield_run(self) -> str:
        traces = {
            label: thin_trace(t, self.config.emit_stride)
            for label, t in self.runner.run_meanfield().items()
        }
        self._emit(list(traces.values()), self.out_dir / "meanfield_trace.csv", seed=self.config.seed)
        return self._formatter.format_traces("平均场 ODE", traces)

    def variance(self) -> str:
        report = self.runner.run_variance()
        self._emit(report, self.out_dir / "variance.csv")
        return self._formatter.format_variance_report(report)

    def clt(self) -> str:
        report = self.runner.run_clt()
        self._emit(report, self.out_dir / "clt_summary.csv")
        ensemble = [trace for beta in report.traces for trace in report.traces[beta]]
        self._emit(ensemble, self.out_dir / "clt_traces.csv", seed=self.config.seed)
        return self._formatter.format_clt_report(report)

    def drift(self) -> str:
        report = self.runner.run_drift()
        self._emit(report, self.out_dir / "drift_summary.csv")
        return self._formatter.format_drift_report(report)


def _with_replication(trace: TraceSeries, replication: int) -> TraceSeries:
    return TraceSeries(grid=trace.grid, values=trace.values, meta={**trace.meta, "replication": replication})


def save_config_artifact(config: ExperimentConfig, path: Path) -> None:
    """把最终生效的配置写到输出目录，便于复现"""
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        save_config(config, str(path))
    except OSError as e:
        raise ArtifactIOError("cannot write config snapshot", str(path), cause=e) from e


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="扁平 key = value 配置文件")
    common.add_argument("--out", help="输出目录")
    common.add_argument("--seed", type=int, help="64 位主种子")
    common.add_argument("--threads", type=int, help="重复实验的线程数")
    common.add_argument("--scale", choices=sorted(SCALE_PRESETS), help="规模预设")
    common.add_argument("--log-level", default=None, help="日志级别，默认读取 SGDF_LOG_LEVEL")

    parser = argparse.ArgumentParser(
        prog="sgd_fluctuations",
        description="两层网络带噪 mini-batch SGD 的平均场涨落模拟",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("single-run", parents=[common], help="一次 SGD 运行的探针轨迹")
    subparsers.add_parser("meanfield-run", parents=[common], help="平均场 ODE 的探针轨迹")
    subparsers.add_parser("variance", parents=[common], help="mini-batch 方差缩减实验")
    subparsers.add_parser("clt", parents=[common], help="不同 β 下的涨落轨迹与置信带")
    subparsers.add_parser("drift", parents=[common], help="β = 3/4 漂移检查")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args.log_level)
    try:
        return SimulatorCLI.from_args(args).run()
    except ConfigError as e:
        return _fail("配置错误", e, EXIT_CODES["CONFIG"])
    except NumericalError as e:
        return _fail("数值错误", e, EXIT_CODES["NUMERIC"])
    except ArtifactIOError as e:
        return _fail("文件读写错误", e, EXIT_CODES["IO"])
    except SimulationError as e:
        # 网格或探针不兼容同样源于配置
        return _fail("实验失败", e, EXIT_CODES["CONFIG"])


def _fail(category: str, error: SimulationError, code: int) -> int:
    logger.error(f"{category}: {error}")
    print(SummaryFormatter.format_failure(category, error), file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
