"""常量定义"""

from typing import Any, Dict

# 回归实验的分段线性激活 f(t)
RAMP_CONSTANTS: Dict[str, float] = {
    "LO": -2.5,
    "HI": 7.5,
    "SLOPE": 10.0,
    "INTERCEPT": -7.5,
    "T_LO": 0.5,
    "T_HI": 1.5,
}

# 数据分布 π：两个各向同性高斯分量，标签 ±1
MIXTURE_CONSTANTS: Dict[str, float] = {
    "SPREAD": 0.2,
    "WEIGHT": 0.5,
}

# SGD 默认参数
SGD_DEFAULTS: Dict[str, Any] = {
    "N": 200,
    "D": 1,
    "T_END": 1.0,
    "ALPHA": 0.1,
    "BETA": 1.0,
    "NOISE_STD": 0.1,  # N(0, 0.01 I_d)
    "INIT_STD_SCALE": 0.8,  # 初始化标准差 0.8/sqrt(d)
    "BATCH_SIZE": 1,
    "SEED": 20240101,
}

# 平均场 ODE
MEANFIELD_DEFAULTS: Dict[str, Any] = {
    "QUADRATURE_SIZE": 4000,
    "PARTICLES": 2000,
    "INTEGRATOR": "rk4",
    "SNAPSHOT_STRIDE": 1,
    "DT": None,  # auto：1/(2N)，SGD 步长 1/N 的一半
    "STRATIFIED": False,
}

# 实验框架
HARNESS_DEFAULTS: Dict[str, Any] = {
    "BOOTSTRAP_SAMPLES": 10,
    "CI_Z": 1.96,
    "EMIT_STRIDE": 0.5,
    "THREADS": 1,
    "OUTPUT_DIR": "results",
    "REFERENCE_FACTOR": 10,
    "REPLICATIONS": 100,
    "RECORD_EVERY": 1,
    "PROBES": ("norm2", "f2"),
}

# 方差缩减实验
VARIANCE_DEFAULTS: Dict[str, Any] = {
    "BATCH_SIZES": (1, 2, 4, 8, 16),
    "PROBE": "norm2",
    "COMMON_STREAMS": True,  # 各 |B| 共用子流（公共随机数）
}

# CLT 轨迹实验；N_REF = 0 表示取 REFERENCE_FACTOR * N
CLT_DEFAULTS: Dict[str, Any] = {
    "BETAS": (1.0, 2.0),
    "REFERENCE": "sgd",
    "N_REF": 0,
    "PROBE": "f2",
}

# β = 3/4 漂移检查
DRIFT_DEFAULTS: Dict[str, Any] = {
    "BETA_LOW": 0.75,
    "BETA_HI": 1.0,
    "COUPLED": True,
}

# 随机数子流命名空间
STREAM_NAMESPACES: Dict[str, int] = {
    "RUN": 1,
    "INDEPENDENT": 2,
    "BOOTSTRAP": 7,
    "REFERENCE": 99,
}

# 退出码
EXIT_CODES: Dict[str, int] = {
    "OK": 0,
    "CONFIG": 2,
    "NUMERIC": 3,
    "IO": 4,
}

# 规模预设：desk 约为 paper 规模的 1/10，full 是 paper 的别名
SCALE_PRESETS: Dict[str, Dict[str, Any]] = {
    "desk": {
        "variance": {"d": 10, "N": 200, "t_end": 1.25, "replications": 200},
        "clt": {"d": 1, "N": 2000, "n_ref": 20000, "t_end": 8.0, "replications": 2000},
        "drift": {"d": 1, "N": 2000, "n_ref": 20000, "t_end": 8.0, "replications": 2000},
    },
    "paper": {
        "variance": {"d": 40, "N": 800, "t_end": 1.25, "replications": 1000},
        "clt": {"d": 1, "N": 20000, "n_ref": 250000, "t_end": 8.0, "replications": 20000},
        "drift": {"d": 1, "N": 20000, "n_ref": 250000, "t_end": 8.0, "replications": 20000},
    },
}
SCALE_PRESETS["full"] = SCALE_PRESETS["paper"]

EXPERIMENTS = ("variance-reduction", "clt-trajectory", "drift-check", "single-run", "meanfield-run")

# 实验名到规模预设分组
PRESET_GROUPS: Dict[str, str] = {
    "variance-reduction": "variance",
    "clt-trajectory": "clt",
    "drift-check": "drift",
    "single-run": "clt",
    "meanfield-run": "clt",
}

# CSV 表头
CSV_HEADERS: Dict[str, tuple] = {
    "trace": ("t", "value", "replication", "probe", "beta", "N", "seed"),
    "variance": ("batch_size", "V_hat", "bootstrap_id"),
    "summary": ("t", "beta", "mean", "ci_lo", "ci_hi", "R"),
}
