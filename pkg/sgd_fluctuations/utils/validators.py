"""配置字段验证工具"""

import math
import re
from typing import Any, Iterable, Sequence, Tuple

PROBE_PATTERN = re.compile(r"^(norm2|f2|square|one|coordinate:\d+)$")


class ValidationError(Exception):
    """验证错误异常"""

    def __init__(self, field: str, value: Any, reason: str) -> None:
        self.field = field
        self.value = value
        self.reason = reason
        super().__init__(f"Validation failed for {field}='{value}': {reason}")


class ConfigValidator:
    """配置验证器

    逐字段检查实验配置，错误统一以 ValidationError 抛出
    """

    def validate_positive_int(self, field: str, value: Any) -> int:
        """验证正整数"""
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(field, value, "必须是整数类型")
        if value < 1:
            raise ValidationError(field, value, "必须是正整数")
        return value

    def validate_non_negative(self, field: str, value: Any) -> float:
        """验证非负有限实数"""
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(field, value, "必须是数值类型")
        if not math.isfinite(value) or value < 0:
            raise ValidationError(field, value, "必须是非负有限数")
        return float(value)

    def validate_positive(self, field: str, value: Any) -> float:
        """验证正的有限实数"""
        value = self.validate_non_negative(field, value)
        if value == 0:
            raise ValidationError(field, value, "必须是正数")
        return value

    def validate_beta(self, field: str, value: Any) -> float:
        """验证噪声指数 β ∈ (1/2, ∞]"""
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ValidationError(field, value, "必须是数值类型")
        if math.isnan(value) or value <= 0.5:
            raise ValidationError(field, value, "必须满足 β > 1/2 或 β = inf")
        return float(value)

    def validate_choice(self, field: str, value: Any, choices: Sequence[str]) -> str:
        """验证枚举取值"""
        if value not in choices:
            raise ValidationError(field, value, f"可选值: {', '.join(choices)}")
        return value

    def validate_seed(self, field: str, value: Any) -> int:
        """验证 64 位无符号种子"""
        if isinstance(value, bool) or not isinstance(value, int):
            raise ValidationError(field, value, "必须是整数类型")
        if not 0 <= value < 2**64:
            raise ValidationError(field, value, "必须在 [0, 2^64) 内")
        return value

    def validate_int_list(self, field: str, values: Iterable[Any], allow_empty: bool = False) -> Tuple[int, ...]:
        """验证正整数列表"""
        values = tuple(values)
        if not values and not allow_empty:
            raise ValidationError(field, values, "不能为空")
        return tuple(self.validate_positive_int(field, v) for v in values)

    def validate_beta_list(self, field: str, values: Iterable[Any]) -> Tuple[float, ...]:
        """验证 β 列表"""
        values = tuple(values)
        if not values:
            raise ValidationError(field, values, "不能为空")
        return tuple(self.validate_beta(field, v) for v in values)

    def validate_probe_names(self, field: str, names: Iterable[Any]) -> Tuple[str, ...]:
        """验证探针名称：norm2, f2, square, one, coordinate:j"""
        names = tuple(names)
        if not names:
            raise ValidationError(field, names, "至少需要一个探针")
        for name in names:
            if not isinstance(name, str) or not PROBE_PATTERN.match(name):
                raise ValidationError(field, name, "未知探针，可用: norm2, f2, square, one, coordinate:j")
        return names

    def validate_output_dir(self, field: str, value: Any) -> str:
        """验证输出目录"""
        if not isinstance(value, str) or not value.strip():
            raise ValidationError(field, value, "不能为空")
        if re.search(r"[\x00-\x1f]", value):
            raise ValidationError(field, value, "包含控制字符")
        return value
