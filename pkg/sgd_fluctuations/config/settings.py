"""实验配置管理

默认值取自 constants，可被 SGDF_ 前缀的环境变量覆盖，
再依次被配置文件与命令行参数覆盖。配置文件为扁平的 key = value 文本。
"""

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from ..errors import ConfigError
from ..models.activation import ACTIVATION_KINDS, ActivationSpec
from ..models.data_model import BATCH_LAWS, BatchSchedule, DataModel
from ..models.meanfield import INTEGRATORS
from ..models.measure import TestFunction
from ..models.network import INIT_LAWS, InitSpec, SGDConfig
from ..utils.log import logger
from ..utils.validators import ConfigValidator, ValidationError
from .constants import (
    CLT_DEFAULTS,
    DRIFT_DEFAULTS,
    EXPERIMENTS,
    HARNESS_DEFAULTS,
    MEANFIELD_DEFAULTS,
    MIXTURE_CONSTANTS,
    PRESET_GROUPS,
    SCALE_PRESETS,
    SGD_DEFAULTS,
    VARIANCE_DEFAULTS,
)

ENV_PREFIX = "SGDF_"
REFERENCE_KINDS = ("sgd", "meanfield")

# 配置文件键 -> (属性名, 取值类型)
CONFIG_KEYS: Dict[str, Tuple[str, str]] = {
    "experiment": ("experiment", "str"),
    "sgd.N": ("N", "int"),
    "sgd.d": ("d", "int"),
    "sgd.alpha": ("alpha", "float"),
    "sgd.beta": ("beta", "float"),
    "sgd.noise_std": ("noise_std", "float"),
    "sgd.seed": ("seed", "int"),
    "sgd.t_end": ("t_end", "float"),
    "init.law": ("init_law", "str"),
    "init.std": ("init_std", "opt_float"),
    "init.radius": ("init_radius", "float"),
    "init.point": ("init_point", "floats"),
    "batch.law": ("batch_law", "str"),
    "batch.size": ("batch_size", "int"),
    "batch.prefix": ("batch_prefix", "ints"),
    "data.spread": ("data_spread", "float"),
    "activation.kind": ("activation_kind", "str"),
    "activation.h": ("activation_h", "float"),
    "harness.replications": ("replications", "int"),
    "harness.threads": ("threads", "int"),
    "harness.out": ("output_dir", "str"),
    "harness.probes": ("probes", "strs"),
    "harness.bootstrap": ("bootstrap", "int"),
    "harness.emit_stride": ("emit_stride", "float"),
    "harness.record_every": ("record_every", "int"),
    "variance.batch_sizes": ("batch_sizes", "ints"),
    "variance.probe": ("variance_probe", "str"),
    "variance.common_streams": ("common_streams", "bool"),
    "clt.betas": ("betas", "floats"),
    "clt.reference": ("reference", "str"),
    "clt.n_ref": ("n_ref", "int"),
    "clt.probe": ("clt_probe", "str"),
    "drift.beta_hi": ("beta_hi", "float"),
    "drift.coupled": ("coupled", "bool"),
    "meanfield.particles": ("mf_particles", "int"),
    "meanfield.quadrature": ("mf_quadrature", "int"),
    "meanfield.dt": ("mf_dt", "opt_float"),
    "meanfield.integrator": ("mf_integrator", "str"),
    "meanfield.stratified": ("mf_stratified", "bool"),
    "meanfield.stride": ("mf_stride", "int"),
}

_SEQUENCE_KINDS = ("ints", "floats", "strs")
_TRUE = ("true", "yes", "on", "1")
_FALSE = ("false", "no", "off", "0")


def env_name(key: str) -> str:
    """sgd.noise_std -> SGDF_SGD_NOISE_STD"""
    return ENV_PREFIX + key.upper().replace(".", "_")


def parse_value(key: str, raw: str) -> Any:
    """按键的类型解析文本取值"""
    if key not in CONFIG_KEYS:
        raise ConfigError(f"unknown config key {key!r}", source="config")
    kind = CONFIG_KEYS[key][1]
    text = raw.strip()
    try:
        if kind == "str":
            return text
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "opt_float":
            return None if text.lower() in ("", "auto", "none") else float(text)
        if kind == "bool":
            if text.lower() in _TRUE:
                return True
            if text.lower() in _FALSE:
                return False
            raise ValueError(f"not a boolean: {text!r}")
        items = [item.strip() for item in text.split(",") if item.strip()]
        if kind == "ints":
            return tuple(int(item) for item in items)
        if kind == "floats":
            return tuple(float(item) for item in items)
        return tuple(items)
    except ValueError as e:
        raise ConfigError(f"cannot parse {key} = {raw!r}: {e}", source="config", cause=e) from e


def format_value(key: str, value: Any) -> str:
    """parse_value 的逆，浮点数用 repr 以保证精确往返"""
    kind = CONFIG_KEYS[key][1]
    if kind == "float":
        return repr(float(value))
    if kind == "opt_float":
        return "auto" if value is None else repr(float(value))
    if kind == "bool":
        return "true" if value else "false"
    if kind == "ints":
        return ", ".join(str(int(v)) for v in value)
    if kind == "floats":
        return ", ".join(repr(float(v)) for v in value)
    if kind == "strs":
        return ", ".join(value)
    return str(value)


def _env(key: str, default: Any) -> Any:
    raw = os.getenv(env_name(key))
    if raw is None:
        return default
    return parse_value(key, raw)


def build_probe(name: str, d: int) -> TestFunction:
    """由名称构造测试函数：norm2, f2 / square, one, coordinate:j（j 从 0 开始）"""
    if name == "norm2":
        return TestFunction.norm2()
    if name in ("f2", "square"):
        return TestFunction.square()
    if name == "one":
        return TestFunction.constant(1.0, d)
    if name.startswith("coordinate:"):
        j = int(name.split(":", 1)[1])
        if not 0 <= j < d:
            raise ConfigError(f"probe {name!r} needs 0 <= j < d = {d}", source="config")
        return TestFunction.coordinate(j)
    raise ConfigError(f"unknown probe {name!r}", source="config")


@dataclass
class ExperimentConfig:
    """实验配置类"""

    experiment: str = field(default_factory=lambda: _env("experiment", "single-run"))

    # SGD 配置
    N: int = field(default_factory=lambda: _env("sgd.N", SGD_DEFAULTS["N"]))
    d: int = field(default_factory=lambda: _env("sgd.d", SGD_DEFAULTS["D"]))
    alpha: float = field(default_factory=lambda: _env("sgd.alpha", SGD_DEFAULTS["ALPHA"]))
    beta: float = field(default_factory=lambda: _env("sgd.beta", SGD_DEFAULTS["BETA"]))
    noise_std: float = field(
        default_factory=lambda: _env("sgd.noise_std", SGD_DEFAULTS["NOISE_STD"])
    )
    seed: int = field(default_factory=lambda: _env("sgd.seed", SGD_DEFAULTS["SEED"]))
    t_end: float = field(default_factory=lambda: _env("sgd.t_end", SGD_DEFAULTS["T_END"]))

    # 初始化、batch、数据与激活
    init_law: str = field(default_factory=lambda: _env("init.law", "gaussian"))
    init_std: Optional[float] = field(default_factory=lambda: _env("init.std", None))
    init_radius: float = field(default_factory=lambda: _env("init.radius", 1.0))
    init_point: Tuple[float, ...] = field(default_factory=lambda: _env("init.point", ()))
    batch_law: str = field(default_factory=lambda: _env("batch.law", "fixed"))
    batch_size: int = field(
        default_factory=lambda: _env("batch.size", SGD_DEFAULTS["BATCH_SIZE"])
    )
    batch_prefix: Tuple[int, ...] = field(default_factory=lambda: _env("batch.prefix", ()))
    data_spread: float = field(
        default_factory=lambda: _env("data.spread", MIXTURE_CONSTANTS["SPREAD"])
    )
    activation_kind: str = field(default_factory=lambda: _env("activation.kind", "ramp"))
    activation_h: float = field(default_factory=lambda: _env("activation.h", 0.0))

    # 实验框架
    replications: int = field(
        default_factory=lambda: _env("harness.replications", HARNESS_DEFAULTS["REPLICATIONS"])
    )
    threads: int = field(
        default_factory=lambda: _env("harness.threads", HARNESS_DEFAULTS["THREADS"])
    )
    output_dir: str = field(
        default_factory=lambda: _env("harness.out", HARNESS_DEFAULTS["OUTPUT_DIR"])
    )
    probes: Tuple[str, ...] = field(
        default_factory=lambda: _env("harness.probes", HARNESS_DEFAULTS["PROBES"])
    )
    bootstrap: int = field(
        default_factory=lambda: _env("harness.bootstrap", HARNESS_DEFAULTS["BOOTSTRAP_SAMPLES"])
    )
    emit_stride: float = field(
        default_factory=lambda: _env("harness.emit_stride", HARNESS_DEFAULTS["EMIT_STRIDE"])
    )
    record_every: int = field(
        default_factory=lambda: _env("harness.record_every", HARNESS_DEFAULTS["RECORD_EVERY"])
    )

    # 各实验
    batch_sizes: Tuple[int, ...] = field(
        default_factory=lambda: _env("variance.batch_sizes", VARIANCE_DEFAULTS["BATCH_SIZES"])
    )
    variance_probe: str = field(
        default_factory=lambda: _env("variance.probe", VARIANCE_DEFAULTS["PROBE"])
    )
    common_streams: bool = field(
        default_factory=lambda: _env("variance.common_streams", VARIANCE_DEFAULTS["COMMON_STREAMS"])
    )
    betas: Tuple[float, ...] = field(
        default_factory=lambda: _env("clt.betas", CLT_DEFAULTS["BETAS"])
    )
    reference: str = field(default_factory=lambda: _env("clt.reference", CLT_DEFAULTS["REFERENCE"]))
    n_ref: int = field(default_factory=lambda: _env("clt.n_ref", CLT_DEFAULTS["N_REF"]))
    clt_probe: str = field(default_factory=lambda: _env("clt.probe", CLT_DEFAULTS["PROBE"]))
    beta_hi: float = field(default_factory=lambda: _env("drift.beta_hi", DRIFT_DEFAULTS["BETA_HI"]))
    coupled: bool = field(default_factory=lambda: _env("drift.coupled", DRIFT_DEFAULTS["COUPLED"]))

    # 平均场 ODE
    mf_particles: int = field(
        default_factory=lambda: _env("meanfield.particles", MEANFIELD_DEFAULTS["PARTICLES"])
    )
    mf_quadrature: int = field(
        default_factory=lambda: _env("meanfield.quadrature", MEANFIELD_DEFAULTS["QUADRATURE_SIZE"])
    )
    mf_dt: Optional[float] = field(
        default_factory=lambda: _env("meanfield.dt", MEANFIELD_DEFAULTS["DT"])
    )
    mf_integrator: str = field(
        default_factory=lambda: _env("meanfield.integrator", MEANFIELD_DEFAULTS["INTEGRATOR"])
    )
    mf_stratified: bool = field(
        default_factory=lambda: _env("meanfield.stratified", MEANFIELD_DEFAULTS["STRATIFIED"])
    )
    mf_stride: int = field(
        default_factory=lambda: _env("meanfield.stride", MEANFIELD_DEFAULTS["SNAPSHOT_STRIDE"])
    )

    def __post_init__(self) -> None:
        for key, (attr, kind) in CONFIG_KEYS.items():
            if kind in _SEQUENCE_KINDS:
                setattr(self, attr, tuple(getattr(self, attr)))

    # ---- 派生对象 ----

    @property
    def reference_N(self) -> int:
        """参考运行的 N′，n_ref = 0 时取 N 的固定倍数"""
        if self.n_ref > 0:
            return self.n_ref
        return HARNESS_DEFAULTS["REFERENCE_FACTOR"] * self.N

    @property
    def meanfield_dt(self) -> float:
        """ODE 步长，meanfield.dt = auto 时取 SGD 步长的一半 1/(2N)"""
        if self.mf_dt is not None:
            return self.mf_dt
        return 1.0 / (2 * self.N)

    def activation(self) -> ActivationSpec:
        return ActivationSpec(kind=self.activation_kind, h=self.activation_h)

    def data_model(self) -> DataModel:
        return DataModel.default(self.d, self.data_spread)

    def init_spec(self) -> InitSpec:
        return InitSpec(
            law=self.init_law, std=self.init_std, radius=self.init_radius, point=self.init_point
        )

    def batch_schedule(self, size: Optional[int] = None) -> BatchSchedule:
        """batch 规模；size 覆盖极限规模"""
        limit = self.batch_size if size is None else size
        if self.batch_law == "fixed":
            return BatchSchedule.fixed(limit)
        return BatchSchedule.sequence(self.batch_prefix, limit)

    def sgd_config(
        self,
        N: Optional[int] = None,
        beta: Optional[float] = None,
        batch_size: Optional[int] = None,
    ) -> SGDConfig:
        return SGDConfig(
            N=self.N if N is None else N,
            d=self.d,
            alpha=self.alpha,
            beta=self.beta if beta is None else beta,
            noise_std=self.noise_std,
            batch=self.batch_schedule(batch_size),
            init=self.init_spec(),
            seed=self.seed,
        )

    def probe(self, name: str) -> TestFunction:
        return build_probe(name, self.d)

    # ---- 序列化 ----

    def to_dict(self) -> Dict[str, Any]:
        """转换为以点分键表示的字典"""
        return {key: getattr(self, attr) for key, (attr, _) in CONFIG_KEYS.items()}

    def validate(self) -> None:
        """验证配置有效性，失败时抛出 ConfigError"""
        v = ConfigValidator()
        try:
            v.validate_choice("experiment", self.experiment, EXPERIMENTS)
            v.validate_positive_int("sgd.N", self.N)
            v.validate_positive_int("sgd.d", self.d)
            v.validate_non_negative("sgd.alpha", self.alpha)
            v.validate_beta("sgd.beta", self.beta)
            v.validate_non_negative("sgd.noise_std", self.noise_std)
            v.validate_seed("sgd.seed", self.seed)
            v.validate_non_negative("sgd.t_end", self.t_end)
            v.validate_choice("init.law", self.init_law, INIT_LAWS)
            if self.init_std is not None:
                v.validate_non_negative("init.std", self.init_std)
            v.validate_non_negative("init.radius", self.init_radius)
            if self.init_law == "point" and len(self.init_point) != self.d:
                raise ValidationError("init.point", self.init_point, f"需要 {self.d} 个坐标")
            v.validate_choice("batch.law", self.batch_law, BATCH_LAWS)
            v.validate_positive_int("batch.size", self.batch_size)
            v.validate_int_list("batch.prefix", self.batch_prefix, allow_empty=True)
            v.validate_choice("activation.kind", self.activation_kind, ACTIVATION_KINDS)
            v.validate_non_negative("activation.h", self.activation_h)
            v.validate_positive_int("harness.replications", self.replications)
            v.validate_positive_int("harness.threads", self.threads)
            v.validate_output_dir("harness.out", self.output_dir)
            for name in v.validate_probe_names("harness.probes", self.probes):
                self.probe(name)
            v.validate_positive_int("harness.bootstrap", self.bootstrap)
            v.validate_non_negative("harness.emit_stride", self.emit_stride)
            v.validate_positive_int("harness.record_every", self.record_every)
            v.validate_int_list("variance.batch_sizes", self.batch_sizes)
            v.validate_probe_names("variance.probe", (self.variance_probe,))
            v.validate_beta_list("clt.betas", self.betas)
            v.validate_choice("clt.reference", self.reference, REFERENCE_KINDS)
            if self.n_ref != 0:
                v.validate_positive_int("clt.n_ref", self.n_ref)
            v.validate_probe_names("clt.probe", (self.clt_probe,))
            v.validate_beta("drift.beta_hi", self.beta_hi)
            if not self.beta_hi > DRIFT_DEFAULTS["BETA_LOW"]:
                raise ValidationError("drift.beta_hi", self.beta_hi, "必须大于 3/4")
            v.validate_positive_int("meanfield.particles", self.mf_particles)
            v.validate_positive_int("meanfield.quadrature", self.mf_quadrature)
            if self.mf_dt is not None:
                v.validate_positive("meanfield.dt", self.mf_dt)
            v.validate_choice("meanfield.integrator", self.mf_integrator, INTEGRATORS)
            v.validate_positive_int("meanfield.stride", self.mf_stride)
            self.activation()
            self.data_model()
            self.sgd_config()
        except ValidationError as e:
            raise ConfigError(str(e), source=e.field, cause=e) from e
        except ValueError as e:
            raise ConfigError(f"invalid configuration: {e}", source="config", cause=e) from e

        for beta in (self.beta, *self.betas):
            if beta < DRIFT_DEFAULTS["BETA_LOW"]:
                logger.warning(f"β = {beta} < 3/4，超出已分析的区间，结果不做任何断言")

    def with_overrides(self, **overrides: Any) -> "ExperimentConfig":
        """返回覆盖部分字段后的新配置，值为 None 的项忽略"""
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def with_scale(self, scale: str) -> "ExperimentConfig":
        """套用规模预设 desk / paper"""
        if scale not in SCALE_PRESETS:
            raise ConfigError(
                f"unknown scale {scale!r}, expected one of {sorted(SCALE_PRESETS)}",
                source="config",
            )
        if self.experiment not in PRESET_GROUPS:
            raise ConfigError(f"unknown experiment {self.experiment!r}", source="config")
        preset = SCALE_PRESETS[scale][PRESET_GROUPS[self.experiment]]
        logger.info(f"使用 {scale} 规模预设: {preset}")
        return dataclasses.replace(self, **preset)


# ---- 配置文件 ----

_SECTION_ORDER = (
    "experiment",
    "sgd",
    "init",
    "batch",
    "data",
    "activation",
    "harness",
    "variance",
    "clt",
    "drift",
    "meanfield",
)


def dump_config(cfg: ExperimentConfig) -> str:
    """序列化为扁平 key = value 文本"""
    values = cfg.to_dict()
    lines = ["# sgd_fluctuations experiment config"]
    for section in _SECTION_ORDER:
        keys = [k for k in CONFIG_KEYS if k.split(".", 1)[0] == section]
        lines.append("")
        for key in keys:
            lines.append(f"{key} = {format_value(key, values[key])}")
    return "\n".join(lines) + "\n"


def parse_config(text: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """解析配置文本，未出现的键沿用 base"""
    base = base if base is not None else ExperimentConfig()
    updates: Dict[str, Any] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, sep, raw = content.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}", source="config")
        if key not in CONFIG_KEYS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}", source="config")
        updates[CONFIG_KEYS[key][0]] = parse_value(key, raw)
    return dataclasses.replace(base, **updates)


def load_config(path: str, base: Optional[ExperimentConfig] = None) -> ExperimentConfig:
    """读取配置文件"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}", source="config", cause=e) from e
    logger.debug(f"读取配置文件: {path}")
    return parse_config(text, base)


def save_config(cfg: ExperimentConfig, path: str) -> None:
    Path(path).write_text(dump_config(cfg), encoding="utf-8")

