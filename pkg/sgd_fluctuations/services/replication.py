"""重复实验调度

每个重复由编号决定其随机数子流，结果按编号排列，
因此单线程与多线程的输出逐位一致。
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, TypeVar

from ..utils.log import logger

T = TypeVar("T")


class ReplicationFarm:
    """重复实验执行器"""

    def __init__(self, threads: int = 1):
        if threads < 1:
            raise ValueError("threads must be >= 1")
        self.threads = threads
        self._stats = {"batches": 0, "replications": 0, "failures": 0}

    def map(self, fn: Callable[[int], T], count: int, label: str = "") -> List[T]:
        """对 0..count-1 执行 fn，按编号返回结果

        任一重复失败时丢弃全部部分结果并重新抛出异常。
        """
        if count < 0:
            raise ValueError("replication count must be non-negative")
        logger.debug(f"开始 {count} 个重复 {label}（线程数 {self.threads}）")
        try:
            if self.threads == 1 or count <= 1:
                results = [fn(i) for i in range(count)]
            else:
                with ThreadPoolExecutor(max_workers=self.threads) as executor:
                    futures = [executor.submit(fn, i) for i in range(count)]
                    try:
                        results = [future.result() for future in futures]
                    except BaseException:
                        for future in futures:
                            future.cancel()
                        raise
        except Exception as e:
            self._stats["failures"] += 1
            logger.error(f"重复实验失败 {label}: {e}")
            raise

        self._stats["batches"] += 1
        self._stats["replications"] += count
        return results

    def get_stats(self) -> Dict[str, Any]:
        """获取调度统计"""
        return {**self._stats, "threads": self.threads}
