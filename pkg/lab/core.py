# core.py
"""
共享领域类型、临界指数表、归一化包络与对数拟合

所有类型构造后不可变，可以在线程之间共享。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from data.lab_settings import MAX_PHASE_BITS
from lab.errors import DomainError, ResourceGuardError

logger = logging.getLogger(__name__)

# 精确相位约化：频率按 26 位分段，配合 Dekker 乘积
LIMB_BITS = 26
_LIMB_MASK = (1 << LIMB_BITS) - 1
_SPLITTER = float((1 << 27) + 1)
_INT64_SAFE_BITS = 62

IntArray = np.ndarray


# ---------------------------------------------------------------------------
# 整数频率与相位约化
# ---------------------------------------------------------------------------

def max_bit_length(m: IntArray) -> int:
    """整数数组中绝对值的最大位数"""
    if m.size == 0:
        return 0
    if m.dtype == object:
        return max(abs(int(v)) for v in m.ravel()).bit_length()
    return int(np.max(np.abs(m.astype(np.int64)))).bit_length()


def integer_power(base: IntArray, k: int) -> IntArray:
    """逐元素计算 base**k；超出 int64 安全范围时改用 Python 大整数（object 数组）"""
    base = np.asarray(base)
    if k == 0:
        return np.ones(base.shape, dtype=np.int64)
    bits = max_bit_length(base.astype(np.int64) if base.dtype != object else base) * k
    if bits <= _INT64_SAFE_BITS:
        return np.power(base.astype(np.int64), k)
    if bits > MAX_PHASE_BITS:
        raise ResourceGuardError(
            f"频率位宽 {bits} 超过 {MAX_PHASE_BITS} 位上限",
            bits=bits,
        )
    out = np.empty(base.shape, dtype=object)
    flat = out.reshape(-1)
    for i, v in enumerate(base.reshape(-1)):
        flat[i] = int(v) ** k
    return out


def frac(x: np.ndarray) -> np.ndarray:
    """x mod 1，落在 [0, 1)；对双精度浮点是精确运算"""
    y = x - np.floor(x)
    return np.where(y >= 1.0, 0.0, y)


def _product_error(a: np.ndarray, b: np.ndarray, p: np.ndarray) -> np.ndarray:
    # b 至多 26 位有效数字，因此只需拆分 a
    c = _SPLITTER * a
    a_hi = c - (c - a)
    a_lo = a - a_hi
    return (a_hi * b - p) + a_lo * b


def frac_mul(x: Union[float, np.ndarray], m: IntArray) -> np.ndarray:
    """
    计算 frac(x·m)，误差只来自最后几次舍入

    Args:
        x: 浮点数或浮点数组
        m: 整数数组（int64 或 Python 大整数 object 数组），与 x 可广播

    Returns:
        [0, 1) 中的浮点数组
    """
    x = frac(np.asarray(x, dtype=np.float64))
    m = np.asarray(m)
    if m.dtype.kind not in "iuO":
        raise DomainError("频率必须是整数")
    negative = np.asarray(m < 0, dtype=bool)
    mag = np.abs(m)
    bits = max_bit_length(mag)
    if bits > MAX_PHASE_BITS:
        raise ResourceGuardError(f"频率位宽 {bits} 超过 {MAX_PHASE_BITS} 位上限", bits=bits)
    acc = np.zeros(np.broadcast(x, mag).shape, dtype=np.float64)
    for c in range(max(1, -(-bits // LIMB_BITS))):
        limb = ((mag >> (LIMB_BITS * c)) & _LIMB_MASK).astype(np.float64)
        xs = frac(np.ldexp(x, LIMB_BITS * c))
        p = xs * limb
        acc = acc + frac(p) + _product_error(xs, limb, p)
    acc = frac(acc)
    return np.where(negative, frac(-acc), acc)


def unit(phase: np.ndarray) -> np.ndarray:
    """e(t) = exp(2πit)，t 应已约化到 [0, 1)"""
    return np.exp(2j * np.pi * phase)


# ---------------------------------------------------------------------------
# 系数
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Coefficients:
    """有限复序列 a_n（或格点集上的 a_𝐧）

    support 为一维整数数组（区间或显式集合）或 (n, k) 多重指标数组。
    """

    support: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        support = np.array(self.support, dtype=np.int64)
        values = np.array(self.values, dtype=np.complex128).reshape(-1)
        if support.ndim not in (1, 2) or support.shape[0] == 0:
            raise DomainError("系数的支撑集必须非空")
        if support.shape[0] != values.shape[0]:
            raise DomainError(f"支撑集大小 {support.shape[0]} 与系数个数 {values.shape[0]} 不一致")
        if not np.all(np.isfinite(values)):
            raise DomainError("系数必须是有限复数")
        keys = support if support.ndim == 2 else support[:, None]
        if np.unique(keys, axis=0).shape[0] != keys.shape[0]:
            raise DomainError("支撑集中有重复指标")
        support.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "values", values)

    @classmethod
    def on_interval(cls, lo: int, hi: int, values: Optional[Iterable[complex]] = None) -> "Coefficients":
        if hi < lo:
            raise DomainError(f"区间 [{lo}, {hi}] 为空")
        support = np.arange(lo, hi + 1, dtype=np.int64)
        vals = np.ones(support.size, dtype=np.complex128) if values is None else np.asarray(list(values))
        return cls(support, vals)

    @classmethod
    def from_points(cls, points: Sequence[Sequence[int]], values: Optional[Iterable[complex]] = None) -> "Coefficients":
        pts = np.asarray(points, dtype=np.int64)
        if pts.ndim == 1:
            pts = pts.reshape(-1)
        vals = np.ones(pts.shape[0], dtype=np.complex128) if values is None else np.asarray(list(values))
        return cls(pts, vals)

    @property
    def size(self) -> int:
        return int(self.values.shape[0])

    @property
    def is_multi_index(self) -> bool:
        return self.support.ndim == 2

    @property
    def is_interval(self) -> bool:
        if self.is_multi_index:
            return False
        s = self.support
        return bool(np.all(np.diff(s) == 1))

    @property
    def lo(self) -> int:
        self._require_scalar()
        return int(self.support.min())

    @property
    def hi(self) -> int:
        self._require_scalar()
        return int(self.support.max())

    def _require_scalar(self) -> None:
        if self.is_multi_index:
            raise DomainError("多重指标支撑集没有 lo/hi")

    def norm(self, p: float = 2.0) -> float:
        """ℓ^p 范数；p=∞ 为最大模"""
        mod = np.abs(self.values)
        if p == math.inf:
            return float(mod.max())
        if p <= 0:
            raise DomainError(f"范数指数必须为正: p={p}")
        return float(math.fsum(mod ** p) ** (1.0 / p))

    def abs(self) -> "Coefficients":
        return Coefficients(self.support, np.abs(self.values))

    def combine(self, alpha: complex, other: "Coefficients", beta: complex) -> "Coefficients":
        """α·self + β·other（支撑集必须相同）"""
        if self.support.shape != other.support.shape or not np.array_equal(self.support, other.support):
            raise DomainError("线性组合要求相同的支撑集")
        return Coefficients(self.support, alpha * self.values + beta * other.values)


# ---------------------------------------------------------------------------
# 相位系统
# ---------------------------------------------------------------------------

MOMENT_CURVE = "moment-curve"
POWER_SYSTEM = "power-system"
PARABOLOID = "paraboloid"
SPHERE = "sphere"


@dataclass(frozen=True)
class PhaseSystem:
    """频率映射 n ↦ (n^{β₁},…,n^{β_k})，或抛物面/球面格点集"""

    kind: str
    exponents: Tuple[int, ...] = ()
    d: int = 0
    N: Optional[int] = None

    def __post_init__(self):
        if self.kind in (MOMENT_CURVE, POWER_SYSTEM):
            exps = tuple(int(e) for e in self.exponents)
            if not exps:
                raise DomainError("幂次系统至少需要一个指数")
            if any(e <= 0 for e in exps) or any(b <= a for a, b in zip(exps, exps[1:])):
                raise DomainError(f"指数必须是严格递增的正整数: {exps}")
            object.__setattr__(self, "exponents", exps)
            object.__setattr__(self, "d", len(exps))
        elif self.kind == PARABOLOID:
            if self.d < 2 or self.N is None or self.N < 1:
                raise DomainError(f"抛物面格点需要 d ≥ 2, N ≥ 1: d={self.d}, N={self.N}")
        elif self.kind == SPHERE:
            if self.d < 2 or self.N is None or self.N < 0:
                raise DomainError(f"球面格点需要 d ≥ 2, N ≥ 0: d={self.d}, N={self.N}")
        else:
            raise DomainError(f"未知相位系统: {self.kind}")

    @classmethod
    def moment_curve(cls, d: int) -> "PhaseSystem":
        if d < 1:
            raise DomainError(f"维数必须 ≥ 1: d={d}")
        return cls(MOMENT_CURVE, tuple(range(1, d + 1)))

    @classmethod
    def power_system(cls, betas: Sequence[int]) -> "PhaseSystem":
        return cls(POWER_SYSTEM, tuple(betas))

    @classmethod
    def paraboloid(cls, d: int, N: int) -> "PhaseSystem":
        return cls(PARABOLOID, d=d, N=N)

    @classmethod
    def sphere(cls, N: int, d: int = 2) -> "PhaseSystem":
        return cls(SPHERE, d=d, N=N)

    @property
    def dimension(self) -> int:
        return self.d

    @property
    def is_lattice(self) -> bool:
        return self.kind in (PARABOLOID, SPHERE)

    @property
    def fiber_ready(self) -> bool:
        """第一个坐标的频率恰为 n（可沿 x₁ 做 FFT）"""
        return self.kind in (MOMENT_CURVE, POWER_SYSTEM) and self.exponents[0] == 1

    def describe(self) -> str:
        if self.kind in (MOMENT_CURVE, POWER_SYSTEM):
            return f"{self.kind}{self.exponents}"
        return f"{self.kind}(d={self.d},N={self.N})"

    def check_support(self, a: Coefficients) -> None:
        """检查系数支撑集与相位系统匹配，不匹配时抛出 DomainError"""
        if self.kind in (MOMENT_CURVE, POWER_SYSTEM):
            if a.is_multi_index:
                raise DomainError(f"{self.describe()} 需要一维整数支撑集")
            return
        if not a.is_multi_index:
            raise DomainError(f"{self.describe()} 需要多重指标支撑集")
        pts = a.support
        if self.kind == PARABOLOID:
            if pts.shape[1] != self.d - 1:
                raise DomainError(f"抛物面指标应为 {self.d - 1} 维，实际 {pts.shape[1]} 维")
            if pts.min() < 1 or pts.max() > self.N:
                raise DomainError(f"抛物面指标必须落在 {{1..{self.N}}}^{self.d - 1}")
        else:
            if pts.shape[1] != self.d:
                raise DomainError(f"球面格点应为 {self.d} 维，实际 {pts.shape[1]} 维")
            if not np.all(np.sum(pts.astype(object) ** 2, axis=1) == self.N):
                raise DomainError(f"存在不满足 |𝐧|² = {self.N} 的格点")

    def frequencies(self, a: Coefficients) -> List[IntArray]:
        """每个坐标轴上的整数频率（长度 d 的列表，每项形如 (n,)）"""
        self.check_support(a)
        if self.kind in (MOMENT_CURVE, POWER_SYSTEM):
            return [integer_power(a.support, k) for k in self.exponents]
        pts = a.support
        if self.kind == PARABOLOID:
            cols = [pts[:, i].copy() for i in range(pts.shape[1])]
            cols.append(np.sum(pts * pts, axis=1))
            return cols
        return [pts[:, i].copy() for i in range(pts.shape[1])]

    def axis_bandwidths(self, a: Coefficients) -> List[int]:
        """每个坐标轴上频率的最大绝对值 F_k"""
        return [int(max(abs(int(np.max(f))), abs(int(np.min(f))))) if f.dtype != object
                else max(abs(int(v)) for v in f)
                for f in self.frequencies(a)]

    def axis_spans(self, a: Coefficients) -> List[int]:
        """每个坐标轴上频率的极差 max f − min f"""
        spans = []
        for f in self.frequencies(a):
            if f.dtype == object:
                spans.append(int(max(f)) - int(min(f)))
            else:
                spans.append(int(np.max(f)) - int(np.min(f)))
        return spans


# ---------------------------------------------------------------------------
# 环面盒子与二进尺度
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TorusBox:
    """[0,1]^d 中的轴对齐盒子（锚点 + 边长）"""

    anchor: Tuple[float, ...]
    sides: Tuple[float, ...]

    def __post_init__(self):
        anchor = tuple(float(v) for v in self.anchor)
        sides = tuple(float(v) for v in self.sides)
        if len(anchor) != len(sides) or not sides:
            raise DomainError("锚点与边长的维数不一致")
        if any(not math.isfinite(v) for v in anchor):
            raise DomainError("锚点必须有限")
        if any(not (0.0 < s <= 1.0) for s in sides):
            raise DomainError(f"边长必须落在 (0, 1]: {sides}")
        object.__setattr__(self, "anchor", tuple(v - math.floor(v) for v in anchor))
        object.__setattr__(self, "sides", sides)

    @classmethod
    def full(cls, d: int) -> "TorusBox":
        return cls((0.0,) * d, (1.0,) * d)

    @classmethod
    def dyadic(cls, d: int, j: int) -> "TorusBox":
        return DyadicScale(j).box(d)

    @classmethod
    def from_sides(cls, sides: Sequence[float], anchor: Optional[Sequence[float]] = None) -> "TorusBox":
        return cls(tuple(anchor) if anchor is not None else (0.0,) * len(sides), tuple(sides))

    @property
    def d(self) -> int:
        return len(self.sides)

    @property
    def volume(self) -> float:
        return math.prod(self.sides)

    @property
    def periodic_axes(self) -> Tuple[bool, ...]:
        return tuple(s == 1.0 for s in self.sides)

    @property
    def is_full_torus(self) -> bool:
        return all(self.periodic_axes)

    def translate(self, offset: Sequence[float]) -> "TorusBox":
        if len(offset) != self.d:
            raise DomainError("平移向量维数不一致")
        return TorusBox(tuple(a + o for a, o in zip(self.anchor, offset)), self.sides)

    def contains(self, other: "TorusBox") -> bool:
        """other ⊆ self（在 [anchor, anchor+side] 的提升上比较）"""
        if other.d != self.d:
            return False
        for a, s, b, t in zip(self.anchor, self.sides, other.anchor, other.sides):
            if s == 1.0:
                continue
            if b < a - 1e-15 or b + t > a + s + 1e-15:
                return False
        return True

    def describe(self) -> str:
        parts = [f"{a:.6g}+{s:.6g}" for a, s in zip(self.anchor, self.sides)]
        return "box[" + ",".join(parts) + "]"


@dataclass(frozen=True)
class DyadicScale:
    j: int

    def __post_init__(self):
        if int(self.j) != self.j or self.j < 0:
            raise DomainError(f"二进尺度 j 必须是非负整数: j={self.j}")

    @property
    def side(self) -> float:
        return math.ldexp(1.0, -int(self.j))

    def box(self, d: int) -> TorusBox:
        return TorusBox((0.0,) * d, (self.side,) * d)


# ---------------------------------------------------------------------------
# 临界指数与包络
# ---------------------------------------------------------------------------

def critical_exponents(d: int) -> Tuple[int, int, int]:
    """返回 (p_d, ρ_d, v_d)"""
    if int(d) != d or d < 2:
        raise DomainError(f"临界指数需要 d ≥ 2: d={d}")
    d = int(d)
    p_d = d * (d - 1)
    rho_d = (3 * d * d - 4) // 4 if d % 2 == 0 else (3 * d * d - 3) // 4
    v_d = d * (d + 1)
    return p_d, rho_d, v_d


@dataclass(frozen=True)
class ExponentTable:
    """d ↦ (p_d, ρ_d, v_d)"""

    entries: Dict[int, Tuple[int, int, int]] = field(default_factory=dict)

    @classmethod
    def build(cls, d_max: int = 64) -> "ExponentTable":
        return cls({d: critical_exponents(d) for d in range(2, d_max + 1)})

    def __getitem__(self, d: int) -> Tuple[int, int, int]:
        if d not in self.entries:
            return critical_exponents(d)
        return self.entries[d]

    def rho_equals_p(self) -> List[int]:
        return [d for d, (p, rho, _) in self.entries.items() if p == rho]


def _check_envelope_args(p: float, N: int, j: int = 0) -> None:
    if p <= 0:
        raise DomainError(f"p 必须为正: p={p}")
    if N < 1:
        raise DomainError(f"N 必须 ≥ 1: N={N}")
    if j < 0:
        raise DomainError(f"j 必须 ≥ 0: j={j}")


def conjecture_envelope(d: int, p: float, N: int, j: int = 0) -> float:
    """N^{max(0,(p−ρ_d)/2)}"""
    _check_envelope_args(p, N, j)
    _, rho, _ = critical_exponents(d)
    return float(N) ** max(0.0, (p - rho) / 2.0)


def surface_envelope(d: int, p: float, N: int) -> float:
    """曲面测度矩的猜想包络 N^{max(0,(p−p_d)/2)}"""
    _check_envelope_args(p, N)
    p_d, _, _ = critical_exponents(d)
    return float(N) ** max(0.0, (p - p_d) / 2.0)


def vinogradov_exponent(d: int, p: float) -> float:
    return max(0.0, p / 2.0 - d * (d + 1) / 2.0)


def vinogradov_envelope(d: int, p: float, N: int) -> float:
    """全环面 p 阶矩（除以 ‖a‖₂^p）的精确增长 N^{max(0,p/2−d(d+1)/2)}"""
    _check_envelope_args(p, N)
    return float(N) ** vinogradov_exponent(d, p)


def holder_baseline_exponent(d: int, p: float) -> float:
    """由 Hölder 与平均值定理得到的 2^{j·e} 中的 e = (1−d)/2 + p/(d+1)"""
    if d < 2 or p <= 0:
        raise DomainError(f"需要 d ≥ 2, p > 0: d={d}, p={p}")
    return (1.0 - d) / 2.0 + p / (d + 1.0)


def holder_baseline_range(d: int) -> float:
    """e ≤ 0 的最大 p，即 (d²−1)/2"""
    if d < 2:
        raise DomainError(f"需要 d ≥ 2: d={d}")
    return (d * d - 1) / 2.0


def power_system_envelope(betas: Sequence[int], p: float, N: int) -> float:
    """(1 + N^{1/2 − Σβ/p})^p"""
    _check_envelope_args(p, N)
    PhaseSystem.power_system(betas)
    return (1.0 + float(N) ** (0.5 - sum(betas) / p)) ** p


# 分情形包络：名称 ↦ (d, p, 范数)
CASES: Dict[str, Tuple[int, float, str]] = {
    "d3p6": (3, 6.0, "l2"),
    "d4p6": (4, 6.0, "l2"),
    "d4p10": (4, 10.0, "l2"),
    "d4p11": (4, 11.0, "l6"),
    "d4p12": (4, 12.0, "l2"),
    "d5p18": (5, 18.0, "l9"),
}


def case_envelope(case: str, N: int, j: int) -> float:
    """分情形分析中 2^{j(d+1)/2}∫_{[0,2^{-j}]^d}|S|^p 的目标衰减（不含 N^ε 与范数）"""
    if case not in CASES:
        raise DomainError(f"未知情形: {case}，可选 {sorted(CASES)}")
    _check_envelope_args(1.0, N, j)
    two_j = 2.0 ** j
    if case == "d3p6":
        return two_j ** -2
    if case == "d4p6":
        if two_j > float(N) ** 3:
            raise DomainError("d4p6 情形要求 2^j ≤ N³")
        return two_j ** -3 * max(1.0 / two_j, 1.0 / N)
    if case in ("d4p10", "d4p11"):
        return two_j ** -2.5
    if case == "d4p12":
        if two_j <= N:
            return two_j ** -3
        if two_j <= float(N) ** 2:
            return two_j ** -2 / N
        raise DomainError("d4p12 情形要求 2^j ≤ N²")
    return two_j ** -3


# ---------------------------------------------------------------------------
# 结果类型与拟合
# ---------------------------------------------------------------------------

METHODS = ("grid", "mc", "exact-count", "exact-kernel")


@dataclass(frozen=True)
class MomentResult:
    value: float
    abs_error: float
    method: str
    N: Optional[int] = None
    d: Optional[int] = None
    p: Optional[float] = None
    region: str = ""
    seed: Optional[int] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.method not in METHODS:
            raise DomainError(f"未知方法: {self.method}")
        value = float(self.value)
        # 舍入可能产生极小的负数
        if value < 0.0:
            if value < -1e-9 * max(1.0, abs(self.abs_error)):
                raise DomainError(f"矩的值为负: {value}")
            value = 0.0
        object.__setattr__(self, "value", value)
        err = 0.0 if self.method == "exact-count" else max(0.0, float(self.abs_error))
        object.__setattr__(self, "abs_error", err)

    @property
    def relative_error(self) -> float:
        return self.abs_error / self.value if self.value > 0 else math.inf


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    slope_stderr: float
    residual_max: float
    sample_points: Tuple[Tuple[float, float], ...]

    def refit(self) -> "FitResult":
        xs = [x for x, _ in self.sample_points]
        ys = [y for _, y in self.sample_points]
        return fit_slope(xs, ys)


def fit_slope(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """最小二乘直线 y = slope·x + intercept，返回斜率标准误差"""
    x = np.asarray(xs, dtype=np.float64)
    y = np.asarray(ys, dtype=np.float64)
    if x.shape != y.shape or x.size < 2:
        raise DomainError("拟合至少需要两个点")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("拟合数据必须有限")
    if np.ptp(x) == 0:
        raise DomainError("拟合横坐标不能全相同")
    if x.size > 2:
        # 协方差按残差平方和 / (n−2) 缩放
        (slope, intercept), cov = np.polyfit(x, y, 1, cov=True)
        stderr = math.sqrt(max(float(cov[0, 0]), 0.0))
    else:
        slope, intercept = np.polyfit(x, y, 1)
        stderr = math.inf
    resid = y - (slope * x + intercept)
    return FitResult(
        slope=float(slope),
        intercept=float(intercept),
        slope_stderr=stderr,
        residual_max=float(np.max(np.abs(resid))),
        sample_points=tuple((float(a), float(b)) for a, b in zip(x, y)),
    )


def fit_loglog(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """log₂ y 对 log₂ x 的拟合；非正数据视为定义域错误"""
    if any(v <= 0 for v in xs) or any(v <= 0 for v in ys):
        raise DomainError("对数拟合要求全部数据为正")
    return fit_slope([math.log2(v) for v in xs], [math.log2(v) for v in ys])
