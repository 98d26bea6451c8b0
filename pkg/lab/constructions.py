# constructions.py
"""
系数配方与锐性构造

常数序列、Rademacher / 单位模随机序列、区间指示、小帽序列、文件序列；
Q_{d,N} 盒子上的相长干涉、小帽反例的下界积分。
"""
import json
import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from data.lab_settings import DEFAULT_SEED, MAX_GRID_POINTS, MC_MIN_SAMPLES
from lab.core import Coefficients, PhaseSystem, TorusBox, critical_exponents
from lab.errors import DomainError
from lab.expsum import eval_points
from lab.measures import GraphSurface
from lab.moments import stratified_uniform, torus_fiber_integral
from lab.runtime import WorkerPool

logger = logging.getLogger(__name__)

CONSTANT = "constant"
RADEMACHER = "rademacher"
UNIMODULAR = "unimodular"
INDICATOR = "indicator"
SMALLCAP = "smallcap"
FILE = "file"

KINDS = (CONSTANT, RADEMACHER, UNIMODULAR, INDICATOR, SMALLCAP, FILE)
_ALIASES = {"const": CONSTANT, "unimodular-random": UNIMODULAR}

# 小帽积分的默认样本数
SMALLCAP_SAMPLES = 4096

Support = Union[Tuple[int, int], Sequence[int], np.ndarray]


def smallcap_length(N: int) -> int:
    """M = ⌊N^{3/4}⌋，用整数平方根精确计算"""
    if N < 1:
        raise DomainError(f"N 必须 ≥ 1: N={N}")
    return math.isqrt(math.isqrt(N ** 3))


def smallcap_start(N: int) -> int:
    return (N + 1) // 2


@dataclass(frozen=True)
class SequenceRecipe:
    """
    系数配方

    生成算法固定：rademacher 取 `default_rng(seed).integers(0, 2, n)` 映射到 ±1，
    unimodular 取 `default_rng(seed).random(n)` 作为相位 e(θ)；两者都按支撑集升序逐项生成。
    """

    kind: str
    seed: Optional[int] = None
    lo: Optional[int] = None
    hi: Optional[int] = None
    N: Optional[int] = None
    path: Optional[str] = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise DomainError(f"未知序列类型: {self.kind}，可选 {KINDS}")
        object.__setattr__(self, "kind", kind)
        if kind in (RADEMACHER, UNIMODULAR) and self.seed is None:
            object.__setattr__(self, "seed", DEFAULT_SEED)
        if kind == INDICATOR and (self.lo is None or self.hi is None or self.hi < self.lo):
            raise DomainError("indicator 需要 lo ≤ hi")
        if kind == SMALLCAP and (self.N is None or self.N < 2):
            raise DomainError("smallcap 需要 N ≥ 2")
        if kind == FILE and not self.path:
            raise DomainError("file 需要 path")

    @classmethod
    def constant(cls) -> "SequenceRecipe":
        return cls(CONSTANT)

    @classmethod
    def rademacher(cls, seed: int = DEFAULT_SEED) -> "SequenceRecipe":
        return cls(RADEMACHER, seed=seed)

    @classmethod
    def unimodular(cls, seed: int = DEFAULT_SEED) -> "SequenceRecipe":
        return cls(UNIMODULAR, seed=seed)

    @classmethod
    def indicator(cls, lo: int, hi: int) -> "SequenceRecipe":
        return cls(INDICATOR, lo=lo, hi=hi)

    @classmethod
    def smallcap(cls, N: int) -> "SequenceRecipe":
        return cls(SMALLCAP, N=N)

    @classmethod
    def from_file(cls, path: str) -> "SequenceRecipe":
        return cls(FILE, path=path)

    def to_dict(self) -> Dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SequenceRecipe":
        if not isinstance(data, dict) or "kind" not in data:
            raise DomainError(f"序列配方必须是带 kind 的对象: {data}")
        unknown = set(data) - {"kind", "seed", "lo", "hi", "N", "path"}
        if unknown:
            raise DomainError(f"序列配方含未知字段: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, text: str) -> "SequenceRecipe":
        """接受 JSON 对象，或简写 `const` / `rademacher:7` / `smallcap:16` 之类"""
        text = text.strip()
        if not text.startswith("{"):
            kind, _, arg = text.partition(":")
            kind = _ALIASES.get(kind, kind)
            try:
                if kind in (RADEMACHER, UNIMODULAR):
                    return cls(kind, seed=int(arg) if arg else None)
                if kind == SMALLCAP:
                    return cls(kind, N=int(arg))
                if kind == INDICATOR:
                    lo, hi = arg.split(",")
                    return cls(kind, lo=int(lo), hi=int(hi))
            except ValueError:
                raise DomainError(f"无法解析序列配方: {text}")
            if kind == FILE:
                return cls(kind, path=arg)
            return cls(kind)
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise DomainError(f"序列配方 JSON 解析失败: {e}")
        return cls.from_dict(data)

    def default_support(self) -> Optional[Tuple[int, int]]:
        if self.kind == INDICATOR:
            return self.lo, self.hi
        if self.kind == SMALLCAP:
            start = smallcap_start(self.N)
            return start, start + smallcap_length(self.N)
        return None

    def realize(self, support: Optional[Support] = None) -> Coefficients:
        return realize(self, support)


def _support_array(support: Support) -> np.ndarray:
    if isinstance(support, tuple) and len(support) == 2:
        lo, hi = int(support[0]), int(support[1])
        if hi < lo:
            raise DomainError(f"区间 [{lo}, {hi}] 为空")
        return np.arange(lo, hi + 1, dtype=np.int64)
    arr = np.sort(np.asarray(support, dtype=np.int64).reshape(-1))
    if arr.size == 0:
        raise DomainError("支撑集为空")
    return arr


def realize(recipe: SequenceRecipe, support: Optional[Support] = None) -> Coefficients:
    """
    按配方在支撑集上生成系数

    support 为 (lo, hi) 区间或整数数组；indicator / smallcap 可省略（取自身区间），
    此时支撑集之外的项为 0。file 配方的支撑集取自文件，给出的 support 必须一致。

    Raises:
        DomainError: 支撑集缺失或与配方不一致，或文件无法解析
    """
    if recipe.kind == FILE:
        from lab.tables import read_coefficients

        a = read_coefficients(recipe.path)
        if support is not None and not np.array_equal(a.support, _support_array(support)):
            raise DomainError(f"文件 {recipe.path} 的支撑集与请求的支撑集不一致")
        return a
    if support is None:
        support = recipe.default_support()
        if support is None:
            raise DomainError(f"{recipe.kind} 配方需要给出支撑集")
    n = _support_array(support)
    if recipe.kind == CONSTANT:
        values = np.ones(n.size, dtype=np.complex128)
    elif recipe.kind == RADEMACHER:
        bits = np.random.default_rng(recipe.seed).integers(0, 2, n.size)
        values = (1 - 2 * bits).astype(np.complex128)
    elif recipe.kind == UNIMODULAR:
        theta = np.random.default_rng(recipe.seed).random(n.size)
        values = np.exp(2j * np.pi * theta)
    else:
        lo, hi = recipe.default_support()
        values = ((n >= lo) & (n <= hi)).astype(np.complex128)
        if not np.any(values):
            raise DomainError(f"支撑集与 [{lo}, {hi}] 不相交")
    return Coefficients(n, values)


def spike(n0: int, support: Optional[Tuple[int, int]] = None) -> Coefficients:
    """单点序列 a = e_{n0}"""
    if support is not None and not support[0] <= n0 <= support[1]:
        raise DomainError(f"n0={n0} 不在区间 {support} 内")
    return Coefficients.on_interval(n0, n0)


# ---------------------------------------------------------------------------
# Q_{d,N} 与相长干涉
# ---------------------------------------------------------------------------

def q_box(d: int, N: int, c: float = 1.0) -> TorusBox:
    """[0,c/N]×[0,c/N²]×…×[0,c/N^d]"""
    if d < 1 or N < 1:
        raise DomainError(f"需要 d ≥ 1, N ≥ 1: d={d}, N={N}")
    if not 0 < c <= 1:
        raise DomainError(f"收缩因子必须落在 (0, 1]: c={c}")
    return TorusBox((0.0,) * d, tuple(c * float(N) ** -k for k in range(1, d + 1)))


def interference_bound(d: int, N: int, c: float) -> float:
    """
    a ≡ 1 时 q_box(d, N, c) 上 |S_d| 的下界 N·cos(2πcd)

    盒子内 |Σ x_k n^k| ≤ cd，c ≤ 1/(8d) 时每一项的实部至少 cos(π/4)。
    """
    if not 0 < c <= 1.0 / (8 * d) * (1 + 1e-12):
        raise DomainError(f"c={c} 超过 1/(8d)={1.0 / (8 * d):.6g}，没有下界保证")
    q_box(d, N, c)
    return N * math.cos(2.0 * math.pi * c * d)


def sample_min_modulus(d: int, N: int, c: float, samples: int = 1000,
                       seed: int = DEFAULT_SEED) -> float:
    """在 q_box(d, N, c) 中分层抽样，返回 min |S_d(x, N)|（a ≡ 1）"""
    box = q_box(d, N, c)
    rng = np.random.default_rng(seed)
    U = stratified_uniform(samples, d, rng)
    X = np.asarray(box.sides) * U
    S = eval_points(Coefficients.on_interval(1, N), PhaseSystem.moment_curve(d), X)
    return float(np.min(np.abs(S)))


def q_box_containment(surface: GraphSurface, N: int, samples_per_axis: int = 5) -> Tuple[float, bool]:
    """F 在 q_box(d−1, N) 上的上确界，以及是否 ≤ N^{−d}"""
    if surface.is_circle:
        raise DomainError("圆周不是图曲面")
    box = q_box(surface.d - 1, N)
    ranges = [np.linspace(0.0, s, samples_per_axis) for s in box.sides]
    mesh = np.meshgrid(*ranges, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    sup = float(np.max(np.abs(surface.F(pts))))
    return sup, sup <= float(N) ** -surface.d * (1.0 + 1e-12)


# ---------------------------------------------------------------------------
# 亚临界锐性
# ---------------------------------------------------------------------------

def sharpness_scale(d: int, N: int) -> int:
    """2^j = N^k 的 j（向下取整），奇数 d 时 k=(d+1)/2，偶数 d 时 k=(d+2)/2"""
    if d < 2 or N < 1:
        raise DomainError(f"需要 d ≥ 2, N ≥ 1: d={d}, N={N}")
    k = (d + 1) / 2.0 if d % 2 else (d + 2) / 2.0
    return int(math.floor(k * math.log2(N) + 1e-12))


def sharpness_lower_bound(d: int, p: float, N: int, a: Coefficients) -> float:
    """‖a‖₂^p·N^{(p−ρ_d)/2}"""
    _, rho, _ = critical_exponents(d)
    return a.norm(2) ** p * float(N) ** ((p - rho) / 2.0)


# ---------------------------------------------------------------------------
# 小帽反例
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SmallCapResult:
    N: int
    M: int
    lhs: float
    stderr: float
    volume: float
    samples: int
    seed: int
    exact_axes: int = 2

    @property
    def ratio(self) -> float:
        """LHS / M²"""
        return self.lhs / self.M ** 2

    @property
    def ratio_stderr(self) -> float:
        return self.stderr / self.M ** 2


def smallcap_grid_cost(a: Coefficients, exact_axes: int, samples: int) -> int:
    """前 exact_axes 个坐标用 Nyquist 网格时的总点数"""
    m = a.support - a.lo
    spans = [int(np.max(m)), int(np.max(m * m))][:exact_axes]
    return math.prod(6 * s + 1 for s in spans) * samples


def smallcap_lower_bound(N: int, a: Optional[Coefficients] = None,
                         samples: int = SMALLCAP_SAMPLES, seed: int = DEFAULT_SEED,
                         max_grid_points: int = MAX_GRID_POINTS,
                         pool: Optional[WorkerPool] = None,
                         exact_axes: Optional[int] = None) -> SmallCapResult:
    """
    ∫ |Σ a_n e(x₁n + x₂n² + x₃n³ + x₄n⁴)|¹² over [−1,1]²×[−1/N,1/N]×[−1/N³,1/N³]

    令 n = n₀ + m：关于 m 和 m² 的线性项并入 (x₁, x₂) 的平移，
    剩下的相位为 m·x₁ + m²·x₂ + m³·x₃ + (4n₀m³ + m⁴)·x₄。
    前 exact_axes 个坐标在整周期上用 Nyquist 网格精确积分，其余坐标分层抽样；
    exact_axes=1 时 x₂ 在 [0,1) 上抽样，网格只剩 x₁ 一维。
    缺省时网格放得下就取 2，否则取 1。

    Raises:
        DomainError: 支撑集不在 [⌈N/2⌉, N] 中
        ResourceGuardError: 网格点数超限
    """
    if N < 2:
        raise DomainError(f"N 必须 ≥ 2: N={N}")
    if samples < MC_MIN_SAMPLES:
        raise DomainError(f"mc 样本数至少为 {MC_MIN_SAMPLES}: {samples}")
    if exact_axes not in (None, 1, 2):
        raise DomainError(f"exact_axes 只能为 1 或 2: {exact_axes}")
    start = smallcap_start(N)
    if a is None:
        a = SequenceRecipe.smallcap(N).realize()
    if a.is_multi_index or a.lo < start or a.hi > N:
        raise DomainError(f"支撑集必须落在 [{start}, {N}]")
    nonzero = a.values != 0
    if not np.any(nonzero):
        raise DomainError("系数全为零")
    a = Coefficients(a.support[nonzero], a.values[nonzero])
    if exact_axes is None:
        exact_axes = 2 if smallcap_grid_cost(a, 2, samples) <= max_grid_points else 1
    n0 = a.lo
    m = a.support - n0
    freqs = [m, m * m, m ** 3, 4 * n0 * m ** 3 + m ** 4]
    anchors = (0.0, -1.0 / N, -1.0 / N ** 3)[2 - exact_axes:]
    sides = (1.0, 2.0 / N, 2.0 / N ** 3)[2 - exact_axes:]
    fiber, fiber_err = torus_fiber_integral(
        a, freqs[:exact_axes], freqs[exact_axes:], anchors, sides,
        12, samples, seed, True, max_grid_points, pool,
    )
    # (x₁, x₂) ∈ [−1,1]² 覆盖两个整周期
    lhs, err = 4.0 * fiber, 4.0 * fiber_err
    M = smallcap_length(N)
    volume = 16.0 / float(N) ** 4
    logger.info(f"小帽 N={N} M={M} 网格轴数={exact_axes}: LHS={lhs:.6g}±{err:.2g}, LHS/M²={lhs / M ** 2:.6g}")
    return SmallCapResult(N, M, lhs, err, volume, samples, seed, exact_axes)
