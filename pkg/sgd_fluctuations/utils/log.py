"""包级日志"""

import logging
import os
from typing import Optional

logger = logging.getLogger("sgd_fluctuations")

_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def configure_logging(level: Optional[str] = None) -> None:
    """为命令行入口安装一次输出处理器，库代码不应调用"""
    level_name = (level or os.getenv("SGDF_LOG_LEVEL", "INFO")).upper()
    if not logger.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(_FORMAT))
        logger.addHandler(handler)
    logger.setLevel(getattr(logging, level_name, logging.INFO))
