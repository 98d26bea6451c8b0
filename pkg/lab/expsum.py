# expsum.py
"""
指数和 S(x) = Σ a_n e(φ(n)·x) 的求值

单点、批量、沿 x₁ 的 FFT 纤维、格点集求和，以及张量求积规则上的 ∫|S|^p。
相位一律先用整数频率精确约化到 [0,1)，再乘 2π。
"""
import itertools
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.special import roots_legendre

from data.lab_settings import GAUSS_ORDER, MAX_GRID_POINTS
from lab.core import (
    Coefficients,
    PhaseSystem,
    TorusBox,
    frac,
    frac_mul,
    unit,
)
from lab.errors import DomainError, ResourceGuardError
from lab.runtime import WorkerPool, exact_complex_sum, exact_sum

logger = logging.getLogger(__name__)

# 每个分块中复数元素个数的目标值
_BLOCK_ELEMENTS = 1 << 18


@dataclass(frozen=True)
class GridSpec:
    """
    逐轴点数与偏移（以步长为单位，0 表示从盒子左端点开始）

    equispaced 为 False 时非周期轴改用复合 Gauss，段数为 ⌈M_k/order⌉；
    边长为 1 的轴总是周期等距规则。
    """

    counts: Tuple[int, ...]
    offsets: Tuple[float, ...] = ()
    equispaced: bool = True

    def __post_init__(self):
        counts = tuple(int(c) for c in self.counts)
        if not counts or any(c < 1 for c in counts):
            raise DomainError(f"网格点数必须为正: {self.counts}")
        offsets = tuple(float(o) for o in self.offsets) or (0.0,) * len(counts)
        if len(offsets) != len(counts):
            raise DomainError("偏移与点数的维数不一致")
        if any(not 0.0 <= o < 1.0 for o in offsets):
            raise DomainError(f"偏移必须在 [0,1) 内: {offsets}")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "offsets", offsets)

    @property
    def size(self) -> int:
        return math.prod(self.counts)

    @property
    def d(self) -> int:
        return len(self.counts)

    def axis_rules(self, box: TorusBox, order: int = GAUSS_ORDER) -> Tuple["AxisRule", ...]:
        if box.d != self.d:
            raise DomainError(f"网格维数 {self.d} 与盒子维数 {box.d} 不一致")
        axes = []
        for M, off, lo, side in zip(self.counts, self.offsets, box.anchor, box.sides):
            if side == 1.0:
                # 整周期上的平均与起点无关
                axes.append(AxisRule.periodic(M, off / M))
            elif self.equispaced:
                axes.append(AxisRule.equispaced(lo, side, M, off))
            else:
                axes.append(AxisRule.gauss(lo, side, int(math.ceil(M / order)), order))
        return tuple(axes)


def _phase_sum(freqs: Sequence[np.ndarray], coords: Sequence[np.ndarray]) -> np.ndarray:
    total = None
    for f, x in zip(freqs, coords):
        part = frac_mul(x, f)
        total = part if total is None else total + part
    return frac(total)


def _as_point(x: Sequence[float], d: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != d:
        raise DomainError(f"点的维数 {x.shape[0]} 与相位系统维数 {d} 不一致")
    if not np.all(np.isfinite(x)):
        raise DomainError("求值点必须有限")
    return x


def eval_point(a: Coefficients, sys: PhaseSystem, x: Sequence[float]) -> complex:
    """S(x) = Σ a_n e(φ(n)·x)，用补偿求和累加"""
    x = _as_point(x, sys.d)
    freqs = sys.frequencies(a)
    terms = a.values * unit(_phase_sum(freqs, list(x)))
    return exact_complex_sum(terms)


def eval_points(a: Coefficients, sys: PhaseSystem, X: np.ndarray) -> np.ndarray:
    """对 (m, d) 个点批量求值"""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != sys.d:
        raise DomainError(f"求值点数组形状应为 (m, {sys.d})")
    if not np.all(np.isfinite(X)):
        raise DomainError("求值点必须有限")
    freqs = sys.frequencies(a)
    out = np.empty(X.shape[0], dtype=np.complex128)
    rows = max(1, _BLOCK_ELEMENTS // a.size)
    for start in range(0, X.shape[0], rows):
        chunk = X[start:start + rows]
        phase = _phase_sum(freqs, [chunk[:, k:k + 1] for k in range(sys.d)])
        out[start:start + rows] = unit(phase) @ a.values
    return out


def eval_grid(a: Coefficients, sys: PhaseSystem, box: TorusBox, grid: GridSpec,
              max_grid_points: int = MAX_GRID_POINTS) -> np.ndarray:
    """盒子上按 grid 布点的全部取值，形状为各轴节点数（等距网格即 grid.counts）"""
    if grid.size > max_grid_points:
        raise ResourceGuardError(
            f"网格共 {grid.size} 个点，超过上限 {max_grid_points}",
            required_counts=grid.counts,
        )
    axes = grid.axis_rules(box)
    mesh = np.meshgrid(*[ax.nodes for ax in axes], indexing="ij")
    X = np.stack([m.reshape(-1) for m in mesh], axis=1)
    return eval_points(a, sys, X).reshape(tuple(ax.size for ax in axes))


def modulated_coefficients(a: Coefficients, freqs: Sequence[np.ndarray], X: np.ndarray) -> np.ndarray:
    """b_n = a_n·e(Σ_k f_k(n) X[:,k])，返回 (m, n)"""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] == 0:
        return np.broadcast_to(a.values, (X.shape[0], a.size)).copy()
    phase = _phase_sum(freqs, [X[:, k:k + 1] for k in range(X.shape[1])])
    return a.values[None, :] * unit(phase)


def _fiber_placement(a: Coefficients, M: int) -> np.ndarray:
    if a.is_multi_index:
        raise DomainError("FFT 纤维需要一维支撑集")
    n_hi = a.hi
    span = n_hi - a.lo
    if M < n_hi or M <= span:
        raise ResourceGuardError(
            f"纤维点数 M={M} 会产生混叠，需要 M ≥ {max(n_hi, span + 1)}",
            required_counts=(max(n_hi, span + 1),),
        )
    return np.mod(a.support, M)


def eval_fiber_x1(a: Coefficients, sys: PhaseSystem, x_rest: Sequence[float], M: int) -> np.ndarray:
    """
    在 x₁ = m/M (m=0..M−1) 上的全部取值

    Args:
        a: 一维支撑集的系数
        sys: 第一个坐标频率为 n 的相位系统
        x_rest: 其余 d−1 个坐标
        M: 纤维点数

    Returns:
        长度 M 的复数组
    """
    if not sys.fiber_ready:
        raise DomainError(f"{sys.describe()} 的第一个坐标频率不是 n，不能做 x₁ 纤维")
    x_rest = np.asarray(x_rest, dtype=np.float64).reshape(-1)
    if x_rest.shape[0] != sys.d - 1:
        raise DomainError(f"x_rest 应有 {sys.d - 1} 个坐标")
    idx = _fiber_placement(a, int(M))
    freqs = sys.frequencies(a)
    b = modulated_coefficients(a, freqs[1:], x_rest[None, :])[0]
    c = np.zeros(int(M), dtype=np.complex128)
    c[idx] = b
    return M * np.fft.ifft(c)


def eval_lattice_sum(a: Coefficients, points: np.ndarray, x: Sequence[float]) -> complex:
    """Σ_𝐧 a_𝐧 e(𝐧·x)，points 与 a.values 一一对应"""
    pts = np.asarray(points, dtype=np.int64)
    if pts.size == 0 or pts.shape[0] == 0:
        raise DomainError("格点集为空")
    if pts.ndim != 2 or pts.shape[0] != a.size:
        raise DomainError("格点数组形状应为 (系数个数, d)")
    x = _as_point(x, pts.shape[1])
    freqs = [pts[:, k] for k in range(pts.shape[1])]
    return exact_complex_sum(a.values * unit(_phase_sum(freqs, list(x))))


def paraboloid_coefficients(d: int, N: int, values: Optional[Sequence[complex]] = None) -> Tuple[Coefficients, PhaseSystem]:
    """{1..N}^{d−1} 上的系数与对应的抛物面相位系统"""
    sys = PhaseSystem.paraboloid(d, N)
    grids = np.meshgrid(*([np.arange(1, N + 1)] * (d - 1)), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    return Coefficients.from_points(pts, values), sys


def paraboloid_points(d: int, N: int) -> np.ndarray:
    """格点集 {(𝐧, |𝐧|²)}"""
    a, _ = paraboloid_coefficients(d, N)
    return np.concatenate([a.support, np.sum(a.support ** 2, axis=1, keepdims=True)], axis=1)


def sphere_coefficients(N: int, values: Optional[Sequence[complex]] = None) -> Tuple[Coefficients, PhaseSystem]:
    """上半圆 x²+y²=N 上的系数与球面相位系统"""
    from lab.counting import circle_lattice

    shell = circle_lattice(N)
    if not shell.points:
        raise DomainError(f"N={N} 不是两个平方数之和，圆周格点为空")
    return Coefficients.from_points(shell.points, values), PhaseSystem.sphere(N)


def nyquist_counts(sys: PhaseSystem, support: Union[Coefficients, int], l: int,
                   oversample: float = 1.0) -> Tuple[int, ...]:
    """
    使全环面等距网格精确积分 |S|^{2l} 的逐轴点数 ⌈oversample·(2lF_k+1)⌉

    support 为整数 N 时取 [1, N]。
    """
    if int(l) != l or l < 1:
        raise DomainError(f"l 必须是正整数: l={l}")
    if oversample < 1:
        raise DomainError(f"oversample 必须 ≥ 1: {oversample}")
    a = Coefficients.on_interval(1, int(support)) if isinstance(support, (int, np.integer)) else support
    return tuple(int(math.ceil(oversample * (2 * l * F + 1))) for F in sys.axis_bandwidths(a))


# ---------------------------------------------------------------------------
# 张量求积规则
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class AxisRule:
    """单轴求积规则；periodic_count 非空时节点为 anchor + i/M，相位按整数精确计算"""

    nodes: np.ndarray
    weights: np.ndarray
    periodic_count: Optional[int] = None
    anchor: float = 0.0
    kind: str = "gauss"
    offset: float = 0.0

    @classmethod
    def periodic(cls, M: int, anchor: float = 0.0, length: float = 1.0) -> "AxisRule":
        M = int(M)
        if M < 1:
            raise DomainError("周期规则点数必须为正")
        nodes = anchor + np.arange(M, dtype=np.float64) / M
        return cls(nodes, np.full(M, length / M), M, float(anchor), "periodic")

    @classmethod
    def equispaced(cls, lo: float, length: float, M: int, offset: float = 0.0) -> "AxisRule":
        """区间 [lo, lo+length) 上的 M 个等距节点 lo + length·(i+offset)/M，等权"""
        M = int(M)
        if M < 1:
            raise DomainError("等距规则点数必须为正")
        nodes = lo + length * (np.arange(M, dtype=np.float64) + offset) / M
        return cls(nodes, np.full(M, length / M), None, 0.0, "equispaced", float(offset))

    @classmethod
    def gauss(cls, lo: float, length: float, panels: int, order: int) -> "AxisRule":
        """复合 Gauss–Legendre：panels 段，每段 order 个节点"""
        panels, order = int(panels), int(order)
        if panels < 1 or order < 1:
            raise DomainError("Gauss 规则的段数和阶数必须为正")
        t, w = roots_legendre(order)
        h = length / panels
        left = lo + h * np.arange(panels, dtype=np.float64)
        nodes = (left[:, None] + 0.5 * h * (t[None, :] + 1.0)).reshape(-1)
        weights = np.tile(0.5 * h * w, panels)
        return cls(nodes, weights)

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    def phase_table(self, freq: np.ndarray) -> np.ndarray:
        """(M, n) 的 e(f(n)·x_i)"""
        if self.periodic_count is not None:
            M = self.periodic_count
            residues = np.mod(freq, M).astype(np.int64)
            i = np.arange(M, dtype=np.int64)
            phase = np.mod(i[:, None] * residues[None, :], M) / M
            if self.anchor != 0.0:
                phase = frac(phase + frac_mul(self.anchor, freq)[None, :])
            return unit(phase)
        return unit(frac_mul(self.nodes[:, None], freq[None, :]))


@dataclass(frozen=True)
class TensorRule:
    axes: Tuple[AxisRule, ...]

    @property
    def size(self) -> int:
        return math.prod(ax.size for ax in self.axes)

    @property
    def d(self) -> int:
        return len(self.axes)


def fft_placement(a: Coefficients, freqs: Sequence[np.ndarray], counts: Sequence[int]) -> Optional[np.ndarray]:
    """
    前 t 个轴的多维 FFT 放置下标；若 (f_k(n) mod M_k) 不是单射则返回 None
    """
    linear = np.zeros(a.size, dtype=np.int64)
    stride = 1
    for f, M in reversed(list(zip(freqs, counts))):
        linear = linear + np.mod(f, M).astype(np.int64) * stride
        stride *= int(M)
    if np.unique(linear).size != a.size:
        return None
    return linear


def torus_block_power(B: np.ndarray, placement: np.ndarray, counts: Sequence[int], p: float) -> np.ndarray:
    """
    每一行 b 在前 t 个周期轴的 Nyquist 网格上 |Σ b_n e(f(n)·y)|^p 的平均

    Args:
        B: (m, n) 调制后的系数
        placement: fft_placement 给出的线性下标
        counts: 周期轴点数
        p: 幂次

    Returns:
        (m,) 的平均值
    """
    counts = tuple(int(c) for c in counts)
    total = math.prod(counts)
    C = np.zeros((B.shape[0], total), dtype=np.complex128)
    C[:, placement] = B
    C = C.reshape((B.shape[0],) + counts)
    V = np.fft.ifftn(C, axes=tuple(range(1, len(counts) + 1))) * total
    return np.mean(np.abs(V.reshape(B.shape[0], total)) ** p, axis=1)


def fiber_integrator(a: Coefficients, sys: PhaseSystem, ax0: AxisRule, p: float):
    """
    返回函数 B ↦ 每一行的 Σ_i w_i |Σ_n B_n e(f₁(n)x_i)|^p

    x₁ 方向若为从 0 开始的周期规则且相位系统允许，用 FFT；否则显式矩阵。
    """
    freqs0 = sys.frequencies(a)[0]
    w0 = ax0.weights
    placement = None
    if ax0.periodic_count is not None and ax0.anchor == 0.0 and sys.fiber_ready and not a.is_multi_index:
        M0 = ax0.periodic_count
        if M0 >= a.hi and M0 > a.hi - a.lo:
            placement = np.mod(a.support, M0).astype(np.int64)
    E0 = None if placement is not None else ax0.phase_table(freqs0).T  # (n, M0)

    def fiber_power(B: np.ndarray) -> np.ndarray:
        if placement is not None:
            C = np.zeros((B.shape[0], ax0.periodic_count), dtype=np.complex128)
            C[:, placement] = B
            V = np.fft.ifft(C, axis=1) * ax0.periodic_count
        else:
            V = B @ E0
        return (np.abs(V) ** p) @ w0

    return fiber_power


def power_integral(a: Coefficients, sys: PhaseSystem, rule: TensorRule, p: float,
                   pool: Optional[WorkerPool] = None) -> float:
    """
    ∫|S|^p 在张量规则上的求积值

    外层轴逐点枚举，最后一轴按块向量化；分块与线程数无关。
    """
    if rule.d != sys.d:
        raise DomainError(f"求积规则维数 {rule.d} 与相位系统维数 {sys.d} 不一致")
    if p <= 0:
        raise DomainError(f"p 必须为正: p={p}")
    pool = pool or WorkerPool()
    freqs = sys.frequencies(a)
    ax0 = rule.axes[0]
    fiber_power = fiber_integrator(a, sys, ax0, p)

    if rule.d == 1:
        return float(fiber_power(a.values[None, :])[0])

    tables = [ax.phase_table(f) for ax, f in zip(rule.axes[1:], freqs[1:])]
    last = rule.axes[-1]
    rows = max(1, _BLOCK_ELEMENTS // max(a.size, ax0.size))
    outer_axes = rule.axes[1:-1]
    outer = list(itertools.product(*[range(ax.size) for ax in outer_axes]))
    chunks = [(s, min(s + rows, last.size)) for s in range(0, last.size, rows)]
    blocks = [(o, c) for o in outer for c in chunks]
    logger.debug(f"power_integral: {len(blocks)} 个分块, 规则点数 {rule.size}")

    def run(block) -> float:
        o, (s, e) = block
        base = a.values.copy()
        weight = 1.0
        for k, i in enumerate(o):
            base = base * tables[k][i]
            weight *= outer_axes[k].weights[i]
        B = base[None, :] * tables[-1][s:e]
        return weight * float(fiber_power(B) @ last.weights[s:e])

    return exact_sum(pool.map(run, blocks))
