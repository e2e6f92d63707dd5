"""两层网络带噪 mini-batch SGD 的平均场涨落模拟与分析"""

from .config.settings import ExperimentConfig, dump_config, load_config, parse_config
from .errors import (
    ArtifactIOError,
    ConfigError,
    GridError,
    NumericalError,
    ProbeError,
    SimulationError,
)
from .services.experiments import (
    ExperimentRunner,
    run_clt_experiment,
    run_drift_check,
    run_variance_experiment,
)
from .utils.csv_io import emit_csv, read_csv_artifact

__version__ = "1.0.0"

__all__ = [
    "ExperimentConfig",
    "ExperimentRunner",
    "load_config",
    "dump_config",
    "parse_config",
    "run_variance_experiment",
    "run_clt_experiment",
    "run_drift_check",
    "emit_csv",
    "read_csv_artifact",
    "SimulationError",
    "ConfigError",
    "NumericalError",
    "ProbeError",
    "GridError",
    "ArtifactIOError",
]
