# runtime.py
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, Tuple, TypeVar

from data.lab_settings import BLOCK_SIZE
from lab.config import settings
from lab.errors import ResourceGuardError

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


class TimeoutManager:
    """超时管理器 - 管理一次实验的墙钟时间预算"""

    def __init__(self, max_seconds: Optional[float] = None):
        """
        初始化超时管理器

        Args:
            max_seconds: 最长运行时间（秒），None 或 0 表示不限时
        """
        self.max_seconds = max_seconds if max_seconds and max_seconds > 0 else None
        self.start_time = time.monotonic()

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.start_time

    def check(self, where: str = "") -> None:
        """
        检查预算，超时则抛出异常

        Raises:
            ResourceGuardError: 已超过时间预算
        """
        if self.max_seconds is None:
            return
        elapsed = self.elapsed
        if elapsed > self.max_seconds:
            raise ResourceGuardError(
                f"超出时间预算: {elapsed:.3f}s > {self.max_seconds}s {where}".strip(),
                elapsed=elapsed,
                max_seconds=self.max_seconds,
            )


# 无预算的全局实例
NO_DEADLINE = TimeoutManager(None)


class WorkerPool:
    """工作线程池：按固定分块并行计算，结果保持分块顺序"""

    def __init__(self, threads: Optional[int] = None, deadline: Optional[TimeoutManager] = None):
        self.threads = max(1, threads or settings.threads)
        self.deadline = deadline or NO_DEADLINE

    def map(self, fn: Callable[[T], R], blocks: Sequence[T]) -> List[R]:
        """对每个分块调用 fn，返回与 blocks 同序的结果列表"""
        self.deadline.check()
        if self.threads == 1 or len(blocks) <= 1:
            results = []
            for block in blocks:
                results.append(fn(block))
                self.deadline.check()
            return results

        def guarded(block: T) -> R:
            self.deadline.check()
            return fn(block)

        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            return list(executor.map(guarded, blocks))


def split_range(total: int, block: int = BLOCK_SIZE) -> List[Tuple[int, int]]:
    """把 [0, total) 切成固定大小的区间，与线程数无关"""
    if total <= 0:
        return []
    block = max(1, int(block))
    return [(start, min(start + block, total)) for start in range(0, total, block)]


def exact_sum(values: Iterable[float]) -> float:
    """正确舍入的浮点求和（与顺序无关）"""
    return math.fsum(values)


def exact_complex_sum(values: Iterable[complex]) -> complex:
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))
