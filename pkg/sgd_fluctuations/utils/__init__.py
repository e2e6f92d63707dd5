"""工具类模块"""

from .log import configure_logging, logger
from .validators import ConfigValidator, ValidationError

__all__ = ["ConfigValidator", "ValidationError", "configure_logging", "logger"]
