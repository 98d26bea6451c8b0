# counting.py
"""
精确组合预言机

偶数阶矩 = 幂和向量多重集的 Σ|W(v)|²；子盒闭式积分；和集；
抛物面与 L⁴ 核求和；F_C 工具；圆周格点统计。
所有键都是精确整数，从不使用浮点键。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from data.lab_settings import MAX_PAIRS, MAX_TUPLES, SHELL_INCLUDE_ENDPOINTS
from lab.core import Coefficients, PhaseSystem, TorusBox, frac_mul, unit
from lab.errors import DomainError, ResourceGuardError
from lab.runtime import WorkerPool, exact_complex_sum, exact_sum, split_range

logger = logging.getLogger(__name__)

_INT64_KEY_LIMIT = 1 << 62
_CHUNK_ELEMENTS = 1 << 20
# l4 核的逐项计数相对配对上限的倍数
L4_TERMS_PER_PAIR = 100


# ---------------------------------------------------------------------------
# 幂和多重集与偶数阶矩
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FrequencyMultiset:
    """l 重幂和向量 ↦ 累积复权重"""

    keys: np.ndarray     # (V, d) int64
    weights: np.ndarray  # (V,) complex128
    l: int

    @property
    def size(self) -> int:
        return int(self.keys.shape[0])

    @property
    def total_mass(self) -> complex:
        return exact_complex_sum(self.weights)

    def even_moment(self) -> float:
        return exact_sum(np.abs(self.weights) ** 2)


def _reduce_rows(keys: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    uniq, inv = np.unique(keys, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    re = np.bincount(inv, weights=weights.real, minlength=uniq.shape[0])
    im = np.bincount(inv, weights=weights.imag, minlength=uniq.shape[0])
    return uniq, re + 1j * im


def _int64_frequencies(sys: PhaseSystem, a: Coefficients, l: int) -> List[np.ndarray]:
    freqs = sys.frequencies(a)
    out = []
    for f in freqs:
        if f.dtype == object:
            raise ResourceGuardError("幂和键超出 64 位整数范围")
        bound = int(np.max(np.abs(f))) * l
        if bound >= _INT64_KEY_LIMIT:
            raise ResourceGuardError(f"幂和键 {bound} 超出 64 位整数范围")
        out.append(f.astype(np.int64))
    return out


def power_sum_multiset(a: Coefficients, sys: PhaseSystem, l: int,
                       max_tuples: int = MAX_TUPLES,
                       pool: Optional[WorkerPool] = None) -> FrequencyMultiset:
    """
    枚举全部 l 元组，按幂和向量 Σ φ(n_i) 合并权重 Π a_{n_i}

    Args:
        a: 系数
        sys: 相位系统
        l: 元组长度
        max_tuples: 允许的最大元组数

    Returns:
        FrequencyMultiset

    Raises:
        ResourceGuardError: 元组数超过上限
    """
    if int(l) != l or l < 1:
        raise DomainError(f"l 必须是正整数: l={l}")
    l = int(l)
    n = a.size
    total = n ** l
    if total > max_tuples:
        raise ResourceGuardError(
            f"需要枚举 {total} 个 {l} 元组，超过上限 {max_tuples}",
            required_tuples=total,
        )
    pool = pool or WorkerPool()
    freqs = np.stack(_int64_frequencies(sys, a, l), axis=1)  # (n, d)

    # 后 l−1 个下标的全部组合，按首下标分块
    if l > 1:
        rest = np.indices((n,) * (l - 1)).reshape(l - 1, -1).T
        rest_keys = freqs[rest].sum(axis=1)
        rest_w = np.prod(a.values[rest], axis=1)
    else:
        rest_keys = np.zeros((1, freqs.shape[1]), dtype=np.int64)
        rest_w = np.ones(1, dtype=np.complex128)
    lead_block = max(1, _CHUNK_ELEMENTS // rest_keys.shape[0])

    def run(span):
        s, e = span
        keys = (freqs[s:e, None, :] + rest_keys[None, :, :]).reshape(-1, freqs.shape[1])
        w = (a.values[s:e, None] * rest_w[None, :]).reshape(-1)
        return _reduce_rows(keys, w)

    parts = pool.map(run, split_range(n, lead_block))
    keys = np.concatenate([k for k, _ in parts], axis=0)
    weights = np.concatenate([w for _, w in parts])
    keys, weights = _reduce_rows(keys, weights)
    logger.debug(f"幂和多重集: l={l}, 元组 {total}, 不同向量 {keys.shape[0]}")
    return FrequencyMultiset(keys, weights, l)


def even_moment_count(a: Coefficients, sys: PhaseSystem, l: int,
                      max_tuples: int = MAX_TUPLES,
                      pool: Optional[WorkerPool] = None) -> float:
    """∫_{T^d}|S|^{2l} = Σ_v |W(v)|²（精确）"""
    return power_sum_multiset(a, sys, l, max_tuples, pool).even_moment()


def _interval_kernel(m: np.ndarray, anchor: float, side: float) -> np.ndarray:
    """∫_{α}^{α+δ} e(mt) dt，对整数数组 m 逐元素计算"""
    zero = m == 0
    safe = np.where(zero, 1, m)
    val = (unit(frac_mul(side, safe)) - 1.0) / (2j * np.pi * safe)
    if anchor != 0.0:
        val = val * unit(frac_mul(anchor, safe))
    return np.where(zero, side, val)


def box_moment_exact(a: Coefficients, sys: PhaseSystem, box: TorusBox, l: int,
                     max_tuples: int = MAX_TUPLES, max_pairs: int = MAX_PAIRS,
                     pool: Optional[WorkerPool] = None,
                     multiset: Optional[FrequencyMultiset] = None) -> float:
    """
    子盒上的 ∫|S|^{2l}，由 Σ_{u,v} W_u·conj(W_v)·Π_k I_k(u_k−v_k) 精确给出

    multiset 可传入已算好的 l 重幂和多重集。
    """
    if box.d != sys.d:
        raise DomainError(f"盒子维数 {box.d} 与相位系统维数 {sys.d} 不一致")
    pool = pool or WorkerPool()
    ms = multiset if multiset is not None else power_sum_multiset(a, sys, l, max_tuples, pool)
    if box.is_full_torus:
        return ms.even_moment()
    K = ms.size
    if K * K > max_pairs:
        raise ResourceGuardError(
            f"闭式子盒积分需要 {K * K} 对频率向量，超过上限 {max_pairs}",
            required_pairs=K * K,
        )
    keys, W = ms.keys, ms.weights
    rows = max(1, _CHUNK_ELEMENTS // max(K, 1))

    def run(span):
        s, e = span
        diff = keys[s:e, None, :] - keys[None, :, :]
        kern = np.ones(diff.shape[:2], dtype=np.complex128)
        for k in range(sys.d):
            kern = kern * _interval_kernel(diff[:, :, k], box.anchor[k], box.sides[k])
        return complex(np.sum(W[s:e, None] * np.conj(W)[None, :] * kern))

    total = exact_complex_sum(pool.map(run, split_range(K, rows)))
    return float(total.real)


# ---------------------------------------------------------------------------
# 和集
# ---------------------------------------------------------------------------

def sumset(S: Sequence[int], l: int, max_tuples: int = MAX_TUPLES) -> Tuple[np.ndarray, int]:
    """lS − lS = {n₁+…+n_l − n_{l+1}−…−n_{2l}}，返回（排序数组，大小）"""
    S = np.unique(np.asarray(list(S), dtype=np.int64))
    if S.size == 0:
        raise DomainError("集合 S 为空")
    if int(l) != l or l < 1:
        raise DomainError(f"l 必须是正整数: l={l}")
    if S.size ** l > max_tuples:
        raise ResourceGuardError(f"|S|^l = {S.size ** l} 超过上限 {max_tuples}")
    lS = np.zeros(1, dtype=np.int64)
    for _ in range(int(l)):
        lS = np.unique((lS[:, None] + S[None, :]).reshape(-1))
    diff = np.unique((lS[:, None] - lS[None, :]).reshape(-1))
    return diff, int(diff.size)


@dataclass(frozen=True)
class SumsetCheck:
    ratio: float
    holds: bool
    lhs: float
    full_moment: float
    interval_length: float
    sumset_size: int


def lemma_a35_check(S: Sequence[int], a: Coefficients, interval: Tuple[float, float], l: int,
                    max_tuples: int = MAX_TUPLES) -> SumsetCheck:
    """
    ∫_I |Σ_{n∈S} a_n e(nt)|^{2l} dt ≤ |I|·|lS−lS|·∫₀¹|…|^{2l} 的精确比值

    interval 为 (起点, 长度)。
    """
    start, length = interval
    S_arr = np.unique(np.asarray(list(S), dtype=np.int64))
    if a.is_multi_index or not np.array_equal(np.sort(a.support), S_arr):
        raise DomainError("系数支撑集必须等于 S")
    sys = PhaseSystem.moment_curve(1)
    box = TorusBox((start,), (length,))
    lhs = box_moment_exact(a, sys, box, l, max_tuples)
    full = even_moment_count(a, sys, l, max_tuples)
    if full <= 0:
        raise DomainError("全环面矩为零，比值无定义")
    _, size = sumset(S_arr, l, max_tuples)
    ratio = lhs / (length * size * full)
    return SumsetCheck(ratio, ratio <= 1.0 + 1e-10, lhs, full, length, size)


# ---------------------------------------------------------------------------
# 抛物面核
# ---------------------------------------------------------------------------

def _paraboloid_vectors(d: int, N: int) -> np.ndarray:
    grids = np.meshgrid(*([np.arange(1, N + 1, dtype=np.int64)] * (d - 1)), indexing="ij")
    pts = np.stack([g.reshape(-1) for g in grids], axis=1)
    return np.concatenate([pts, np.sum(pts * pts, axis=1, keepdims=True)], axis=1).astype(np.float64)


def _paraboloid_factor(d: int, N: int) -> float:
    base = float(N) ** ((d - 3) / 2.0)
    if d == 2:
        return base * math.sqrt(N)
    if d == 3:
        return base * (math.log(N) if N >= 2 else 1.0)
    return base


def parab_kernel_bound(d: int, N: int, beta: Optional[float] = None,
                       a: Optional[Coefficients] = None,
                       max_pairs: int = MAX_PAIRS,
                       pool: Optional[WorkerPool] = None) -> Tuple[float, float]:
    """
    Σ_{𝐦,𝐧} |a_𝐦 a_𝐧|(1+|(𝐦−𝐧,|𝐦|²−|𝐧|²)|)^{−β} 及其归一化值

    Returns:
        (value, value/(‖a‖²·N^{(d−3)/2}·factor(d)))
    """
    if d < 2 or N < 1:
        raise DomainError(f"需要 d ≥ 2, N ≥ 1: d={d}, N={N}")
    beta = (d - 1) / 2.0 if beta is None else float(beta)
    if beta < 0:
        raise DomainError(f"β 必须非负: {beta}")
    vecs = _paraboloid_vectors(d, N)
    K = vecs.shape[0]
    if K * K > max_pairs:
        raise ResourceGuardError(f"需要 {K * K} 对格点，超过上限 {max_pairs}", required_pairs=K * K)
    if a is None:
        mods = np.ones(K)
    else:
        if a.size != K:
            raise DomainError(f"系数个数应为 N^{d - 1} = {K}")
        mods = np.abs(a.values)
    pool = pool or WorkerPool()
    rows = max(1, _CHUNK_ELEMENTS // K)

    def run(span):
        s, e = span
        dist = np.sqrt(np.sum((vecs[s:e, None, :] - vecs[None, :, :]) ** 2, axis=2))
        return float(mods[s:e] @ ((1.0 + dist) ** -beta) @ mods)

    value = exact_sum(pool.map(run, split_range(K, rows)))
    norm2 = exact_sum(mods ** 2)
    if norm2 == 0:
        raise DomainError("‖a‖ = 0")
    return value, value / (norm2 * _paraboloid_factor(d, N))


def paraboloid_row_sup(d: int, N: int, max_pairs: int = MAX_PAIRS) -> Tuple[float, float]:
    """sup_𝐦 Σ_𝐧 c_{𝐦,𝐧}，c = (1+|(𝐦−𝐧,|𝐦|²−|𝐧|²)|)^{−(d−1)/2}；返回（值，归一化值）"""
    if d < 2 or N < 1:
        raise DomainError(f"需要 d ≥ 2, N ≥ 1: d={d}, N={N}")
    vecs = _paraboloid_vectors(d, N)
    K = vecs.shape[0]
    if K * K > max_pairs:
        raise ResourceGuardError(f"需要 {K * K} 对格点，超过上限 {max_pairs}", required_pairs=K * K)
    beta = (d - 1) / 2.0
    best = 0.0
    rows = max(1, _CHUNK_ELEMENTS // K)
    for s, e in split_range(K, rows):
        dist = np.sqrt(np.sum((vecs[s:e, None, :] - vecs[None, :, :]) ** 2, axis=2))
        best = max(best, float(np.max(np.sum((1.0 + dist) ** -beta, axis=1))))
    return best, best / _paraboloid_factor(d, N)


# ---------------------------------------------------------------------------
# F_C 与凸序列引理
# ---------------------------------------------------------------------------

def fc_amax(C: float) -> float:
    """F_C 的最大值点 (C/4)^{1/3}"""
    return (C / 4.0) ** (1.0 / 3.0)


def f_c(C: float, a):
    """F_C(a) = √(a(C−a³))，要求 C > 1000, 0 < a < C^{1/3}"""
    if C <= 1000:
        raise DomainError(f"F_C 要求 C > 1000: C={C}")
    arr = np.asarray(a, dtype=np.float64)
    if np.any(arr <= 0) or np.any(arr ** 3 >= C):
        raise DomainError(f"a 必须落在 (0, C^(1/3)) 内")
    val = np.sqrt(arr * (C - arr ** 3))
    return float(val) if val.ndim == 0 else val


def fc_increment_check(C: float, y_grid: Sequence[float]) -> Tuple[float, float, bool]:
    """
    |F_C(a_max−y) − F_C(a_max)|/y² 在 y_grid 上的 (最小值, 最大值, 是否落在 [1/20, 20])
    """
    amax = fc_amax(C)
    y = np.asarray(list(y_grid), dtype=np.float64)
    if y.size == 0 or np.any(y <= 0) or np.any(y >= amax):
        raise DomainError(f"y 必须落在 (0, a_max={amax:.6g})")
    ratios = np.abs(f_c(C, amax - y) - f_c(C, amax)) / y ** 2
    lo, hi = float(ratios.min()), float(ratios.max())
    return lo, hi, (lo >= 1.0 / 20.0 and hi <= 20.0)


@dataclass(frozen=True)
class ConvexSumBound:
    grid_sup: float
    argmax: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.grid_sup <= self.bound + 1e-9


def _convex_sum(fvals: np.ndarray, xs: np.ndarray, alpha: float, shift: float) -> np.ndarray:
    out = np.empty(xs.size)
    rows = max(1, _CHUNK_ELEMENTS // max(fvals.size, 1))
    for s, e in split_range(xs.size, rows):
        out[s:e] = np.sum(1.0 / (np.abs(fvals[None, :] - xs[s:e, None]) ** alpha + shift), axis=1)
    return out


def convex_sum_bound(fvals: Sequence[float], alpha: float, step: float = 0.25) -> ConvexSumBound:
    """
    f(0)=0、严格递增、凹的序列：sup_x Σ_j 1/(|f(j)−x|^α+1) ≤ 2 + 4Σ_j 1/((f(M)−f(j))^α+1)

    上确界在步长 step 的网格与全部 f(j) 上取。
    """
    f = np.asarray(list(fvals), dtype=np.float64)
    if f.size < 2 or f[0] != 0.0:
        raise DomainError("序列至少两项且 f(0)=0")
    df = np.diff(f)
    if np.any(df <= 0) or np.any(np.diff(df) > 1e-12 * max(1.0, float(f[-1]))):
        raise DomainError("序列必须严格递增且为凹")
    n = int(math.ceil((f[-1] + 2.0) / step)) + 1
    xs = np.concatenate([np.linspace(-1.0, f[-1] + 1.0, n), f])
    sums = _convex_sum(f, xs, alpha, 1.0)
    k = int(np.argmax(sums))
    bound = 2.0 + 4.0 * float(np.sum(1.0 / ((f[-1] - f) ** alpha + 1.0)))
    return ConvexSumBound(float(sums[k]), float(xs[k]), bound)


@dataclass(frozen=True)
class CipResult:
    """
    sup 只对 a=1..⌊a_max⌋ 求和；lemma 取自 f(a)=F_C(a)/D 在 a=0..⌊a_max⌋ 上的凸序列引理，
    其 bound 含 j=0 一项 4/(f(⌊a_max⌋)^β+1)，即 lemma_j0_term。
    lemma.grid_sup 记为 D^β·sup（不含 a=0 项）。
    """

    sup: float
    argmax: float
    lemma: ConvexSumBound
    lemma_j0_term: float = 0.0

    @property
    def lemma_holds(self) -> bool:
        return self.lemma.holds

    @property
    def lemma_bound_without_j0(self) -> float:
        return self.lemma.bound - self.lemma_j0_term


def cor_cip_sup(C: float, D: float, beta: float, density: float = 4.0, refine: bool = True) -> CipResult:
    """
    sup_x Σ_{a=1}^{⌊a_max⌋} 1/(|F_C(a)−x|^β + D^β)

    网格覆盖 [0, F_C(a_max)]，步长 D/density（density ≥ 4），并在网格最大值附近细化；
    同时以 f(a)=F_C(a)/D 检查凸序列引理（a=0..⌊a_max⌋，界中含 j=0 项，见 CipResult）。
    """
    if beta <= 0.5:
        raise DomainError(f"需要 β > 1/2: β={beta}")
    if D <= 0:
        raise DomainError(f"需要 D > 0: D={D}")
    if density < 4:
        raise DomainError(f"网格密度至少为每个 D 四个点: {density}")
    amax = fc_amax(C)
    A = int(math.floor(amax))
    if A < 1:
        raise DomainError("a_max < 1，求和为空")
    Fa = f_c(C, np.arange(1, A + 1, dtype=np.float64))
    Fmax = f_c(C, amax)
    step = D / density
    n = int(math.ceil(Fmax / step)) + 1
    xs = np.concatenate([np.linspace(0.0, Fmax, n), Fa])
    Db = D ** beta
    sums = _convex_sum(Fa, xs, beta, Db)
    k = int(np.argmax(sums))
    best, arg = float(sums[k]), float(xs[k])
    if refine:
        fine = np.linspace(arg - step, arg + step, 401)
        fine = fine[(fine >= 0.0) & (fine <= Fmax)]
        if fine.size:
            fs = _convex_sum(Fa, fine, beta, Db)
            kf = int(np.argmax(fs))
            if fs[kf] > best:
                best, arg = float(fs[kf]), float(fine[kf])
    lemma_f = np.concatenate([[0.0], Fa / D])
    lemma = convex_sum_bound(lemma_f, beta, step=1.0 / density)
    # 引理的左端以 D^β·sup 表示
    lemma = ConvexSumBound(Db * best, arg, lemma.bound)
    j0 = 4.0 / (lemma_f[-1] ** beta + 1.0)
    return CipResult(best, arg, lemma, j0)


def s_cd(C: float, D: float, beta: float, b_max: int = 2000) -> float:
    """S(C,D) = Σ_{b≥a>0} 1/(|ab−D|^β + |a(a²+3b²)−C|^β + 1)，截断到 b ≤ b_max"""
    if beta <= 0:
        raise DomainError(f"需要 β > 0: β={beta}")
    if b_max < 1:
        raise DomainError("b_max 必须 ≥ 1")
    partial = []
    rows = max(1, _CHUNK_ELEMENTS // b_max)
    for s, e in split_range(b_max, rows):
        b = np.arange(s + 1, e + 1, dtype=np.float64)[:, None]
        a = np.arange(1, b_max + 1, dtype=np.float64)[None, :]
        mask = a <= b
        terms = 1.0 / (np.abs(a * b - D) ** beta + np.abs(a * (a * a + 3 * b * b) - C) ** beta + 1.0)
        partial.append(float(np.sum(np.where(mask, terms, 0.0))))
    return exact_sum(partial)


# ---------------------------------------------------------------------------
# L⁴ 核
# ---------------------------------------------------------------------------

def l4_kernel_row(N: int, beta: float, n1: int, n3: int) -> float:
    """固定 (n₁,n₃) 时 Σ_{n₂≠n₄} (|Δ₂|^β + |Δ₃|^β + 1)^{−1}"""
    n = np.arange(1, N + 1, dtype=np.float64)
    n2, n4 = np.meshgrid(n, n, indexing="ij")
    mask = n2 != n4
    d2 = n1 * n1 + n2 ** 2 - n3 * n3 - n4 ** 2
    d3 = float(n1) ** 3 + n2 ** 3 - float(n3) ** 3 - n4 ** 3
    terms = 1.0 / (np.abs(d2) ** beta + np.abs(d3) ** beta + 1.0)
    return exact_sum(terms[mask])


def l4_kernel_sup(N: int, beta: float, pool: Optional[WorkerPool] = None,
                  max_pairs: int = MAX_PAIRS) -> float:
    """
    sup_{n₁,n₃} Σ_{n₂≠n₄} (|n₁²+n₂²−n₃²−n₄²|^β + |n₁³+n₂³−n₃³−n₄³|^β + 1)^{−1}

    (n₁,n₃) ↔ (n₃,n₁) 对称，只计算 n₁ ≤ n₃。逐项上限为 max_pairs × L4_TERMS_PER_PAIR。
    """
    if N < 1 or N > 512:
        raise ResourceGuardError(f"l4_kernel_sup 要求 1 ≤ N ≤ 512: N={N}")
    if beta <= 0:
        raise DomainError(f"需要 β > 0: β={beta}")
    if N < 2:
        return 0.0
    work = (N * (N + 1) // 2) * N * (N - 1)
    if work > max_pairs * L4_TERMS_PER_PAIR:
        raise ResourceGuardError(f"需要 {work} 项，超过上限 {max_pairs * L4_TERMS_PER_PAIR}")
    n = np.arange(1, N + 1, dtype=np.float64)
    n2, n4 = np.meshgrid(n, n, indexing="ij")
    mask = n2 != n4
    U = (n2 ** 2 - n4 ** 2)[mask]
    V = (n2 ** 3 - n4 ** 3)[mask]
    i1, i3 = np.triu_indices(N)
    D = (n[i1] ** 2 - n[i3] ** 2)
    Cc = (n[i1] ** 3 - n[i3] ** 3)
    pool = pool or WorkerPool()
    rows = max(1, _CHUNK_ELEMENTS // U.size)

    def run(span):
        s, e = span
        terms = 1.0 / (np.abs(D[s:e, None] + U[None, :]) ** beta
                       + np.abs(Cc[s:e, None] + V[None, :]) ** beta + 1.0)
        return float(np.max(np.sum(terms, axis=1)))

    return max(pool.map(run, split_range(D.size, rows)))


def l4_failure_ratio(j: int, beta: float, max_pairs: int = MAX_PAIRS) -> float:
    """
    a = 1_{[1,⌊2^{j/3}⌋]} 的四线性核和除以 ‖a‖⁴，增长约为 2^{j(2/3−β)}
    """
    if j < 0:
        raise DomainError(f"j 必须 ≥ 0: j={j}")
    K = int(math.floor(2.0 ** (j / 3.0) + 1e-9))
    n = np.arange(1, K + 1, dtype=np.float64)
    p1, p2 = np.meshgrid(n, n, indexing="ij")
    s2 = (p1 ** 2 + p2 ** 2).reshape(-1)
    s3 = (p1 ** 3 + p2 ** 3).reshape(-1)
    P = s2.size
    if P * P > max_pairs:
        raise ResourceGuardError(f"需要 {P * P} 对，超过上限 {max_pairs}")
    partial = []
    rows = max(1, _CHUNK_ELEMENTS // P)
    for s, e in split_range(P, rows):
        terms = 1.0 / (np.abs(s2[s:e, None] - s2[None, :]) ** beta
                       + np.abs(s3[s:e, None] - s3[None, :]) ** beta + 1.0)
        partial.append(float(np.sum(terms)))
    return exact_sum(partial) / float(K * K)


# ---------------------------------------------------------------------------
# 圆周格点
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LatticeShell:
    """上半圆 x²+y²=N, y ≥ 0 上的整点，按 x 递增（极角递减）排列"""

    N: int
    points: Tuple[Tuple[int, int], ...]
    include_endpoints: bool = True

    def __post_init__(self):
        seen = set()
        for x, y in self.points:
            if x * x + y * y != self.N or y < 0:
                raise DomainError(f"({x},{y}) 不在 x²+y²={self.N} 的上半圆上")
            if (x, y) in seen:
                raise DomainError(f"重复格点 ({x},{y})")
            seen.add((x, y))

    @property
    def size(self) -> int:
        return len(self.points)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.points, dtype=np.int64).reshape(-1, 2)

    def angles(self) -> np.ndarray:
        pts = self.as_array()
        return np.arctan2(pts[:, 1].astype(np.float64), pts[:, 0].astype(np.float64))


def circle_lattice(N: int, include_endpoints: bool = SHELL_INCLUDE_ENDPOINTS) -> LatticeShell:
    """O(√N) 试除枚举 x²+y²=N, y ≥ 0"""
    if int(N) != N or N < 1:
        raise DomainError(f"N 必须是正整数: N={N}")
    if N > 10**8:
        raise ResourceGuardError(f"圆周枚举要求 N ≤ 10^8: N={N}")
    N = int(N)
    r = math.isqrt(N)
    pts = []
    for x in range(-r, r + 1):
        rem = N - x * x
        y = math.isqrt(rem)
        if y * y != rem:
            continue
        if y == 0 and not include_endpoints:
            continue
        pts.append((x, y))
    return LatticeShell(N, tuple(pts), include_endpoints)


def _nonempty_shell(N: int, shell: Optional[LatticeShell]) -> LatticeShell:
    shell = shell or circle_lattice(N)
    if shell.size == 0:
        raise DomainError(f"N={N} 不能表示为两个平方数之和")
    return shell


def arc_max_count(N: int, gamma: float, shell: Optional[LatticeShell] = None) -> int:
    """弧长 N^{γ/2} 的闭弧上最多包含的格点数（极角滑动窗口）"""
    shell = _nonempty_shell(N, shell)
    width = float(N) ** ((gamma - 1.0) / 2.0)
    theta = np.sort(shell.angles())
    best, i = 0, 0
    for j in range(theta.size):
        while theta[j] - theta[i] > width + 1e-12:
            i += 1
        best = max(best, j - i + 1)
    return best


ZERO_BUCKET = None


def _dyadic_bucket(q: np.ndarray) -> np.ndarray:
    """正整数 q=|v|² 所在的 j：2^j ≤ |v| < 2^{j+1} ⇔ 4^j ≤ q < 4^{j+1}"""
    e = np.floor(np.log2(q.astype(np.float64))).astype(np.int64)
    e = np.where(np.left_shift(np.int64(1), e) > q, e - 1, e)
    e = np.where(np.left_shift(np.int64(1), e + 1) <= q, e + 1, e)
    return e // 2


def dyadic_pair_profile(N: int, shell: Optional[LatticeShell] = None,
                        max_pairs: int = MAX_PAIRS) -> Dict[Optional[int], int]:
    """
    j ↦ I_j = max_{(𝐧₁,𝐧₂)} #{(𝐧₃,𝐧₄): 2^j ≤ |𝐧₁+𝐧₂−𝐧₃−𝐧₄| < 2^{j+1}}；None 为零差桶
    """
    shell = _nonempty_shell(N, shell)
    P = shell.as_array()
    sums = (P[:, None, :] + P[None, :, :]).reshape(-1, 2)
    uniq, mult = np.unique(sums, axis=0, return_counts=True)
    T = uniq.shape[0]
    if T * T > max_pairs:
        raise ResourceGuardError(f"需要 {T * T} 对和向量，超过上限 {max_pairs}")
    profile: Dict[Optional[int], int] = {}
    rows = max(1, _CHUNK_ELEMENTS // T)
    for s, e in split_range(T, rows):
        diff = uniq[s:e, None, :] - uniq[None, :, :]
        q = np.sum(diff * diff, axis=2)
        zero = q == 0
        zero_counts = np.sum(np.where(zero, mult[None, :], 0), axis=1)
        profile[ZERO_BUCKET] = max(profile.get(ZERO_BUCKET, 0), int(zero_counts.max()))
        buckets = _dyadic_bucket(np.where(zero, 1, q))
        for j in np.unique(buckets[~zero]):
            counts = np.sum(np.where((buckets == j) & ~zero, mult[None, :], 0), axis=1)
            key = int(j)
            profile[key] = max(profile.get(key, 0), int(counts.max()))
    return profile


def pair_count_Ij(N: int, j: Optional[int], shell: Optional[LatticeShell] = None) -> int:
    """单个桶 I_j；j=None 表示零差"""
    return dyadic_pair_profile(N, shell).get(j, 0)


def sphere_l4_majorant(N: int, beta: float, shell: Optional[LatticeShell] = None,
                       max_pairs: int = MAX_PAIRS) -> float:
    """Σ_j 2^{−jβ} I_j（零差桶权重 1）"""
    profile = dyadic_pair_profile(N, shell, max_pairs)
    return math.fsum(cnt * (1.0 if j is ZERO_BUCKET else 2.0 ** (-j * beta))
                     for j, cnt in profile.items())
