import os
import sys

import pytest

# 添加项目根目录到路径
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from lab.core import Coefficients  # noqa: E402
from lab.runtime import WorkerPool  # noqa: E402


@pytest.fixture
def pool():
    """单线程池，结果与多线程逐位相同"""
    return WorkerPool(1)


@pytest.fixture
def pool4():
    return WorkerPool(4)


@pytest.fixture
def random_coefficients():
    """[lo, hi] 上的单位模随机系数"""
    def build(lo: int, hi: int, seed: int = 1) -> Coefficients:
        import numpy as np

        rng = np.random.default_rng(seed)
        n = hi - lo + 1
        return Coefficients.on_interval(lo, hi, np.exp(2j * np.pi * rng.random(n)))

    return build
