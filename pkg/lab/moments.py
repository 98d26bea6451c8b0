# moments.py
"""
指数和的 L^p 矩

盒子上、曲面测度上与衰减核上的矩；猜想归一化；标度指数拟合；
解耦不等式的比值实验。
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from data.lab_settings import (
    DEFAULT_SEED,
    GAUSS_ORDER,
    MAX_GRID_POINTS,
    MAX_PAIRS,
    MAX_TUPLES,
    MC_DEFAULT_SAMPLES,
    MC_MIN_SAMPLES,
)
from lab.core import (
    CASES,
    Coefficients,
    FitResult,
    MomentResult,
    PhaseSystem,
    TorusBox,
    case_envelope,
    fit_loglog,
    fit_slope,
)
from lab.counting import FrequencyMultiset, box_moment_exact, power_sum_multiset
from lab.errors import DomainError, ResourceGuardError
from lab.expsum import (
    AxisRule,
    GridSpec,
    TensorRule,
    eval_points,
    fft_placement,
    fiber_integrator,
    modulated_coefficients,
    power_integral,
    torus_block_power,
)
from lab.measures import DecayKernel, GraphSurface
from lab.runtime import WorkerPool, exact_complex_sum, exact_sum, split_range

logger = logging.getLogger(__name__)

GRID = "grid"
MC = "mc"
EXACT = "exact"
AUTO = "auto"

_BLOCK_ELEMENTS = 1 << 18


@dataclass(frozen=True)
class QuadratureSpec:
    """求积方式：grid（逐轴点数）、mc（样本数与种子）、exact（计数预言机）或 auto"""

    method: str = AUTO
    counts: Optional[Tuple[int, ...]] = None
    samples: int = MC_DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    stratified: bool = True
    tolerance: float = 1e-8
    max_grid_points: int = MAX_GRID_POINTS
    max_tuples: int = MAX_TUPLES
    max_pairs: int = MAX_PAIRS

    def __post_init__(self):
        if self.method not in (GRID, MC, EXACT, AUTO):
            raise DomainError(f"未知求积方式: {self.method}")
        if self.counts is not None:
            object.__setattr__(self, "counts", GridSpec(self.counts).counts)
        if self.samples < MC_MIN_SAMPLES:
            raise DomainError(f"mc 样本数至少为 {MC_MIN_SAMPLES}: {self.samples}")

    @classmethod
    def parse(cls, text: Optional[str], **kwargs) -> "QuadratureSpec":
        """解析 `grid:<c1,c2,…>`、`grid`、`mc:<samples>`、`mc`、`exact`、`auto`"""
        if not text:
            return cls(**kwargs)
        method, _, arg = text.partition(":")
        try:
            if method == GRID and arg:
                return cls(GRID, counts=tuple(int(c) for c in arg.split(",")), **kwargs)
            if method == MC and arg:
                return cls(MC, samples=int(arg), **kwargs)
        except ValueError:
            raise DomainError(f"无法解析求积参数: {text}")
        return cls(method, **kwargs)

    def with_seed(self, seed: int) -> "QuadratureSpec":
        return QuadratureSpec(self.method, self.counts, self.samples, seed, self.stratified,
                              self.tolerance, self.max_grid_points, self.max_tuples, self.max_pairs)


# ---------------------------------------------------------------------------
# 网格规则
# ---------------------------------------------------------------------------

def _even_order(p: float) -> Optional[int]:
    """p 为正偶数时返回 l = p/2"""
    if float(p).is_integer() and int(p) % 2 == 0 and p > 0:
        return int(p) // 2
    return None


def _step_count(p: float, F: int) -> int:
    # 步长规则 1/(4⌈p/2⌉F)
    return 4 * int(math.ceil(p / 2.0)) * max(int(F), 1)


def grid_rule(a: Coefficients, sys: PhaseSystem, box: TorusBox, p: float,
              counts: Optional[Union[Sequence[int], GridSpec]] = None, order: int = GAUSS_ORDER,
              max_grid_points: int = MAX_GRID_POINTS) -> Tuple[TensorRule, bool]:
    """
    按分辨率规则为盒子建立张量求积规则

    周期轴（边长 1）用等距节点：偶数 p 下点数 > l·span 即精确，否则要求满足步长规则。
    非周期轴每个节点间距（Gauss 为每段长度）≤ 1/(4⌈p/2⌉F_k)。
    counts 可以是 GridSpec，也可以是逐轴节点数；后者与缺省情形在非周期轴上用复合 Gauss。

    Returns:
        (规则, 是否对偶数 p 精确)
    """
    if box.d != sys.d:
        raise DomainError(f"盒子维数 {box.d} 与相位系统维数 {sys.d} 不一致")
    l = _even_order(p)
    F = sys.axis_bandwidths(a)
    spans = sys.axis_spans(a)
    required = []
    for k in range(sys.d):
        if box.sides[k] == 1.0:
            required.append(l * spans[k] + 1 if l is not None else _step_count(p, F[k]))
        else:
            panels_min = max(int(math.ceil(box.sides[k] * _step_count(p, F[k]) - 1e-9)), 1)
            required.append(panels_min * order)
    if counts is None:
        grid = GridSpec(tuple(required), equispaced=False)
    elif isinstance(counts, GridSpec):
        grid = counts
    else:
        grid = GridSpec(tuple(counts), equispaced=False)
    if grid.d != sys.d:
        raise DomainError(f"网格点数应有 {sys.d} 个")
    axes = grid.axis_rules(box, order)
    exact, short = True, False
    for k, ax in enumerate(axes):
        if ax.periodic_count is not None:
            M = ax.periodic_count
            if M < required[k] and not M >= _step_count(p, F[k]):
                short = True
            exact = exact and l is not None and M >= l * spans[k] + 1
            continue
        exact = False
        if ax.kind == "equispaced":
            if ax.size < box.sides[k] * _step_count(p, F[k]) - 1e-9:
                short = True
        elif ax.size < required[k]:
            short = True
    if short:
        raise ResourceGuardError(
            f"网格点数 {grid.counts} 低于分辨率要求 {tuple(required)}",
            required_counts=tuple(required),
        )
    rule = TensorRule(axes)
    if rule.size > max_grid_points:
        raise ResourceGuardError(
            f"网格共 {rule.size} 个点，超过上限 {max_grid_points}",
            required_counts=tuple(ax.size for ax in axes),
        )
    return rule, exact


def _coarse_rule(rule: TensorRule, box: TorusBox, order: int) -> TensorRule:
    axes = []
    for ax, side, anchor in zip(rule.axes, box.sides, box.anchor):
        if ax.periodic_count is not None:
            axes.append(AxisRule.periodic(max(1, ax.periodic_count // 2), ax.anchor))
        elif ax.kind == "equispaced":
            axes.append(AxisRule.equispaced(anchor, side, max(1, ax.size // 2), ax.offset))
        else:
            panels = ax.size // order
            axes.append(AxisRule.gauss(anchor, side, panels, order - 2))
    return TensorRule(tuple(axes))


def stratified_uniform(n: int, k: int, rng: np.random.Generator, stratified: bool = True) -> np.ndarray:
    """[0,1)^k 中的 n 个样本；stratified 时每个坐标轴各自分层（拉丁超立方）"""
    u = rng.random((n, k))
    if not stratified or k == 0:
        return u
    out = np.empty((n, k))
    for j in range(k):
        out[:, j] = (rng.permutation(n) + u[:, j]) / n
    return out


def _mean_and_stderr(values: np.ndarray) -> Tuple[float, float]:
    n = values.size
    mean = exact_sum(values) / n
    if n < 2:
        return mean, 0.0
    var = exact_sum((values - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


# ---------------------------------------------------------------------------
# 盒子上的矩
# ---------------------------------------------------------------------------

def _grid_box_moment(a, sys, box, p, quad: QuadratureSpec, pool) -> MomentResult:
    rule, exact = grid_rule(a, sys, box, p, quad.counts, GAUSS_ORDER, quad.max_grid_points)
    value = power_integral(a, sys, rule, p, pool)
    if exact:
        err = 1e-12 * abs(value)
    else:
        coarse = power_integral(a, sys, _coarse_rule(rule, box, GAUSS_ORDER), p, pool)
        err = abs(value - coarse)
    return MomentResult(value, err, GRID, p=p, d=sys.d, region=box.describe(),
                        extra={"counts": [ax.size for ax in rule.axes]})


def _mc_box_moment(a, sys, box, p, quad: QuadratureSpec, pool) -> MomentResult:
    """x₁ 方向用求积纤维，其余坐标分层抽样"""
    if sys.is_lattice:
        raise DomainError("格点相位系统的盒子矩请使用 grid 或 exact")
    if sys.d == 1:
        # 没有可抽样的坐标
        return _grid_box_moment(a, sys, box, p, quad, pool)
    fiber_box = TorusBox((box.anchor[0],), (box.sides[0],))
    fiber_sys = PhaseSystem.power_system(sys.exponents[:1])
    a_rule, _ = grid_rule(a, fiber_sys, fiber_box, p, None, GAUSS_ORDER, quad.max_grid_points)
    fiber_power = fiber_integrator(a, sys, a_rule.axes[0], p)

    rng = np.random.default_rng(quad.seed)
    n = quad.samples
    U = stratified_uniform(n, sys.d - 1, rng, quad.stratified)
    X = np.asarray(box.anchor[1:]) + np.asarray(box.sides[1:]) * U
    freqs = sys.frequencies(a)[1:]
    rows = max(1, _BLOCK_ELEMENTS // max(a.size, a_rule.axes[0].size))

    def run(span):
        s, e = span
        return fiber_power(modulated_coefficients(a, freqs, X[s:e]))

    values = np.concatenate(pool.map(run, split_range(n, rows)))
    vol = math.prod(box.sides[1:])
    mean, stderr = _mean_and_stderr(values)
    return MomentResult(vol * mean, vol * stderr, MC, p=p, d=sys.d, region=box.describe(),
                        seed=quad.seed, extra={"samples": n})


def _exact_box_moment(a, sys, box, p, quad: QuadratureSpec, pool,
                      multiset: Optional[FrequencyMultiset] = None) -> MomentResult:
    l = _even_order(p)
    if l is None:
        raise DomainError(f"计数预言机只适用于正偶数 p: p={p}")
    value = box_moment_exact(a, sys, box, l, quad.max_tuples, quad.max_pairs, pool, multiset)
    if box.is_full_torus:
        return MomentResult(value, 0.0, "exact-count", p=p, d=sys.d, region=box.describe())
    return MomentResult(value, 1e-12 * abs(value), "exact-kernel", p=p, d=sys.d, region=box.describe())


def box_moment(a: Coefficients, sys: PhaseSystem, box: TorusBox, p: float,
               quad: Optional[QuadratureSpec] = None,
               pool: Optional[WorkerPool] = None) -> MomentResult:
    """
    ∫_box |S|^p dx

    auto：偶数 p 且可枚举时用精确预言机，否则网格，网格过大时 mc。

    Raises:
        DomainError: p ≤ 0 或支撑集与相位系统不匹配
        ResourceGuardError: 网格分辨率不足或规模超限
    """
    if not p > 0:
        raise DomainError(f"p 必须为正: p={p}")
    if box.d != sys.d:
        raise DomainError(f"盒子维数 {box.d} 与相位系统维数 {sys.d} 不一致")
    sys.check_support(a)
    quad = quad or QuadratureSpec()
    pool = pool or WorkerPool()
    method = quad.method
    if method == EXACT:
        result = _exact_box_moment(a, sys, box, p, quad, pool)
    elif method == GRID:
        result = _grid_box_moment(a, sys, box, p, quad, pool)
    elif method == MC:
        result = _mc_box_moment(a, sys, box, p, quad, pool)
    else:
        result = _auto_box_moment(a, sys, box, p, quad, pool)
    logger.debug(f"box_moment {box.describe()} p={p}: {result.value:.6g} ± {result.abs_error:.2g} ({result.method})")
    return result


def _auto_box_moment(a, sys, box, p, quad, pool) -> MomentResult:
    l = _even_order(p)
    if l is not None and a.size ** l <= quad.max_tuples:
        if box.is_full_torus:
            return _exact_box_moment(a, sys, box, p, quad, pool)
        ms = power_sum_multiset(a, sys, l, quad.max_tuples, pool)
        if ms.size * ms.size <= quad.max_pairs:
            return _exact_box_moment(a, sys, box, p, quad, pool, ms)
    try:
        return _grid_box_moment(a, sys, box, p, quad, pool)
    except ResourceGuardError as e:
        if sys.is_lattice:
            raise
        logger.info(f"网格不可行（{e.message}），改用 mc")
    return _mc_box_moment(a, sys, box, p, quad, pool)


# ---------------------------------------------------------------------------
# 曲面测度上的矩
# ---------------------------------------------------------------------------

def _surface_axes(a, sys, surface: GraphSurface, p: float, order: int) -> List[AxisRule]:
    F = sys.axis_bandwidths(a)
    c = int(math.ceil(p / 2.0))
    if surface.is_circle:
        band = surface.radius * math.hypot(F[0], F[1])
        M = max(64, 4 * c * int(math.ceil(2.0 * math.pi * band)))
        return [AxisRule(2.0 * np.pi * np.arange(M) / M, np.full(M, 2.0 * np.pi / M), None)]
    axes = []
    for k in range(surface.d - 1):
        band = F[k] + F[-1] * surface.grad_bound[k]
        panels = max(1, int(math.ceil(4 * c * max(band, 1.0))))
        axes.append(AxisRule.gauss(0.0, 1.0, panels, order))
    return axes


def _surface_integrand(a, sys, surface, p, x: np.ndarray) -> np.ndarray:
    S = eval_points(a, sys, surface.points(x))
    return np.abs(S) ** p * surface.weight(x)


def _surface_grid(a, sys, surface, p, axes: Sequence[AxisRule], pool) -> float:
    sizes = [ax.size for ax in axes]
    total = math.prod(sizes)

    def run(span):
        s, e = span
        idx = np.unravel_index(np.arange(s, e), sizes)
        x = np.stack([axes[k].nodes[idx[k]] for k in range(len(axes))], axis=1)
        w = np.prod(np.stack([axes[k].weights[idx[k]] for k in range(len(axes))], axis=1), axis=1)
        return float(_surface_integrand(a, sys, surface, p, x) @ w)

    rows = max(1, _BLOCK_ELEMENTS // a.size)
    return exact_sum(pool.map(run, split_range(total, rows)))


def surface_moment(a: Coefficients, sys: PhaseSystem, surface: GraphSurface, p: float,
                   quad: Optional[QuadratureSpec] = None,
                   pool: Optional[WorkerPool] = None) -> MomentResult:
    """∫ |S(x, F(x))|^p weight(x) dx（圆周时对弧长积分）"""
    if not p > 0:
        raise DomainError(f"p 必须为正: p={p}")
    if surface.d != sys.d:
        raise DomainError(f"曲面维数 {surface.d} 与相位系统维数 {sys.d} 不一致")
    sys.check_support(a)
    quad = quad or QuadratureSpec()
    pool = pool or WorkerPool()
    if quad.method == EXACT:
        raise DomainError("曲面矩没有计数预言机，请使用 grid 或 mc")
    axes = _surface_axes(a, sys, surface, p, GAUSS_ORDER)
    if quad.counts is not None:
        if len(quad.counts) != len(axes):
            raise DomainError(f"曲面参数网格应有 {len(axes)} 个点数")
        if any(c < ax.size for c, ax in zip(quad.counts, axes)):
            raise ResourceGuardError(
                f"网格点数 {quad.counts} 低于分辨率要求 {tuple(ax.size for ax in axes)}",
                required_counts=tuple(ax.size for ax in axes),
            )
        axes = [_refine_surface_axis(ax, c, surface.is_circle) for ax, c in zip(axes, quad.counts)]
    size = math.prod(ax.size for ax in axes)
    method = quad.method
    if method == AUTO:
        method = GRID if size <= quad.max_grid_points else MC
    region = f"surface[{surface.describe()}]"

    if method == GRID:
        if size > quad.max_grid_points:
            raise ResourceGuardError(f"曲面网格共 {size} 个点，超过上限 {quad.max_grid_points}",
                                     required_counts=tuple(ax.size for ax in axes))
        value = _surface_grid(a, sys, surface, p, axes, pool)
        coarse_axes = [_coarsen_surface_axis(ax, surface.is_circle) for ax in axes]
        err = abs(value - _surface_grid(a, sys, surface, p, coarse_axes, pool))
        return MomentResult(value, err, GRID, p=p, d=sys.d, region=region,
                            extra={"counts": [ax.size for ax in axes]})

    rng = np.random.default_rng(quad.seed)
    n = quad.samples
    U = stratified_uniform(n, surface.parameter_dim, rng, quad.stratified)
    scale = 2.0 * np.pi if surface.is_circle else 1.0
    X = scale * U

    def run(span):
        s, e = span
        return _surface_integrand(a, sys, surface, p, X[s:e])

    rows = max(1, _BLOCK_ELEMENTS // a.size)
    values = np.concatenate(pool.map(run, split_range(n, rows)))
    mean, stderr = _mean_and_stderr(values)
    return MomentResult(scale * mean, scale * stderr, MC, p=p, d=sys.d, region=region,
                        seed=quad.seed, extra={"samples": n})


def _refine_surface_axis(ax: AxisRule, count: int, circle: bool) -> AxisRule:
    if circle:
        return AxisRule(2.0 * np.pi * np.arange(count) / count, np.full(count, 2.0 * np.pi / count), None)
    return AxisRule.gauss(0.0, 1.0, int(math.ceil(count / GAUSS_ORDER)), GAUSS_ORDER)


def _coarsen_surface_axis(ax: AxisRule, circle: bool) -> AxisRule:
    if circle:
        M = max(1, ax.size // 2)
        return AxisRule(2.0 * np.pi * np.arange(M) / M, np.full(M, 2.0 * np.pi / M), None)
    return AxisRule.gauss(0.0, 1.0, ax.size // GAUSS_ORDER, GAUSS_ORDER - 2)


# ---------------------------------------------------------------------------
# 核上的 2l 线性型
# ---------------------------------------------------------------------------

def kernel_moment(a: Coefficients, sys: PhaseSystem, kernel: Callable[[np.ndarray], np.ndarray], l: int,
                  max_tuples: int = MAX_TUPLES, max_pairs: int = MAX_PAIRS,
                  pool: Optional[WorkerPool] = None) -> float:
    """
    Σ_{2l 元组} Π a·Π ā·K(频率差) = Σ_{u,v} W_u conj(W_v) K(u−v)

    Raises:
        ResourceGuardError: 枚举规模超限
    """
    if int(l) != l or l < 1:
        raise DomainError(f"l 必须是正整数: l={l}")
    pool = pool or WorkerPool()
    try:
        ms = power_sum_multiset(a, sys, int(l), max_tuples, pool)
    except ResourceGuardError as e:
        raise ResourceGuardError(
            f"{e.message}；请缩小支撑集，或直接用 power_sum_multiset 做折半枚举",
            **e.details,
        )
    K = ms.size
    if K * K > max_pairs:
        raise ResourceGuardError(
            f"需要 {K * K} 对幂和向量，超过上限 {max_pairs}；请缩小支撑集",
            required_pairs=K * K,
        )
    keys = ms.keys.astype(np.float64)
    W = ms.weights
    rows = max(1, _BLOCK_ELEMENTS // K)

    def run(span):
        s, e = span
        kern = kernel(keys[s:e, None, :] - keys[None, :, :])
        return complex(np.sum(W[s:e, None] * np.conj(W)[None, :] * kern))

    total = exact_complex_sum(pool.map(run, split_range(K, rows)))
    return float(total.real)


# ---------------------------------------------------------------------------
# 归一化
# ---------------------------------------------------------------------------

NORMS = ("l2", "l6", "l9")


def norm_power(a: Coefficients, N: int, p: float, norm: str = "l2") -> float:
    """‖a‖₂^p，或 N^{p(1/2−1/q)}‖a‖_q^p（q = 6, 9）"""
    if norm == "l2":
        value = a.norm(2) ** p
    elif norm in ("l6", "l9"):
        q = 6 if norm == "l6" else 9
        value = float(N) ** (p * (0.5 - 1.0 / q)) * a.norm(q) ** p
    else:
        raise DomainError(f"未知归一化: {norm}，可选 {NORMS}")
    if value == 0:
        raise DomainError("‖a‖ = 0，无法归一化")
    return value


def conjecture3_normalized(a: Coefficients, d: int, N: int, j: int, p: float,
                           quad: Optional[QuadratureSpec] = None, norm: str = "l2",
                           pool: Optional[WorkerPool] = None) -> float:
    """2^{j(d+1)/2}·∫_{[0,2^{−j}]^d}|S|^p / 归一化"""
    denom = norm_power(a, N, p, norm)
    sys = PhaseSystem.moment_curve(d)
    m = box_moment(a, sys, TorusBox.dyadic(d, j), p, quad, pool)
    return 2.0 ** (j * (d + 1) / 2.0) * m.value / denom


def case_ratio(a: Coefficients, case: str, N: int, j: int,
               quad: Optional[QuadratureSpec] = None, pool: Optional[WorkerPool] = None) -> float:
    """分情形量 2^{j(d+1)/2}∫|S|^p / 范数 与其目标衰减之比"""
    if case not in CASES:
        raise DomainError(f"未知情形: {case}，可选 {sorted(CASES)}")
    d, p, norm = CASES[case]
    target = case_envelope(case, N, j)
    return conjecture3_normalized(a, d, N, j, p, quad, norm, pool) / target


def dyadic_majorant(a: Coefficients, d: int, N: int, p: float,
                    quad: Optional[QuadratureSpec] = None,
                    pool: Optional[WorkerPool] = None) -> Tuple[float, List[Tuple[int, float]]]:
    """
    Σ_{1≤2^j≤dN^d} 2^{j(d+1)/2}∫_{[−2^{−j},2^{−j}]^d}|S_{|a|}|^p

    Returns:
        (总和, [(j, 第 j 项)])
    """
    if N < 1:
        raise DomainError(f"N 必须 ≥ 1: N={N}")
    sys = PhaseSystem.moment_curve(d)
    b = a.abs()
    terms = []
    j = 0
    while 2 ** j <= d * N ** d:
        if j <= 1:
            # [−1,1]^d 覆盖环面 2^d 次，[−1/2,1/2]^d 恰为一个周期
            m = box_moment(b, sys, TorusBox.full(d), p, quad, pool).value * (2 ** d if j == 0 else 1)
        else:
            side = 2.0 ** (1 - j)
            box = TorusBox((-side / 2.0,) * d, (side,) * d)
            m = box_moment(b, sys, box, p, quad, pool).value
        terms.append((j, 2.0 ** (j * (d + 1) / 2.0) * m))
        j += 1
    return math.fsum(t for _, t in terms), terms


# ---------------------------------------------------------------------------
# 性质检查
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool


def holder_check(a: Coefficients, sys: PhaseSystem, box: TorusBox, p: float, q: float,
                 quad: Optional[QuadratureSpec] = None,
                 pool: Optional[WorkerPool] = None) -> InequalityCheck:
    """(∫_box|S|^p/vol)^{1/p} ≤ (∫_box|S|^q/vol)^{1/q}，容差来自两次求积的误差"""
    if not 0 < p < q:
        raise DomainError(f"需要 0 < p < q: p={p}, q={q}")
    mp = box_moment(a, sys, box, p, quad, pool)
    mq = box_moment(a, sys, box, q, quad, pool)
    vol = box.volume
    lhs = (mp.value / vol) ** (1.0 / p)
    rhs = (mq.value / vol) ** (1.0 / q)
    tol = 1e-9 * rhs
    if mp.value > 0:
        tol += lhs * mp.abs_error / (p * mp.value)
    if mq.value > 0:
        tol += rhs * mq.abs_error / (q * mq.value)
    return InequalityCheck(lhs, rhs, lhs <= rhs + tol)


def _correlate(ms: FrequencyMultiset, coeffs: Dict[Tuple[int, ...], complex]) -> complex:
    """Σ_k c_k Σ_u W_u·conj(W_{u+k}) = ∫|S|^{2l}·Σ_k c_k e(k·x) dx"""
    index = {tuple(int(v) for v in key): i for i, key in enumerate(ms.keys)}
    parts = []
    for k, c in coeffs.items():
        k = np.asarray(k, dtype=np.int64)
        acc = []
        for i, key in enumerate(ms.keys):
            jdx = index.get(tuple(int(v) for v in key + k))
            if jdx is not None:
                acc.append(ms.weights[i] * np.conj(ms.weights[jdx]))
        parts.append(c * exact_complex_sum(acc))
    return exact_complex_sum(parts)


def lemma_a28_check(a: Coefficients, sys: PhaseSystem,
                    mu: Dict[Tuple[int, ...], complex], nu: Dict[Tuple[int, ...], float],
                    p: int, max_tuples: int = MAX_TUPLES) -> InequalityCheck:
    """
    三角多项式密度 μ = φdx, ν = ψdx 且 |φ̂| ≤ ψ̂ 时，|∫|S_a|^p dμ| ≤ ∫|S_{|a|}|^p dν（偶数 p）
    """
    l = _even_order(p)
    if l is None:
        raise DomainError(f"需要正偶数 p: p={p}")
    for k, c in mu.items():
        if len(k) != sys.d:
            raise DomainError(f"频率 {k} 的维数不是 {sys.d}")
        if abs(c) > nu.get(k, 0.0) + 1e-15:
            raise DomainError(f"频率 {k} 处 |μ̂| > ν̂")
    if any(v < 0 for v in nu.values()):
        raise DomainError("ν̂ 必须非负")
    lhs = abs(_correlate(power_sum_multiset(a, sys, l, max_tuples), mu))
    rhs = _correlate(power_sum_multiset(a.abs(), sys, l, max_tuples), nu).real
    return InequalityCheck(lhs, rhs, lhs <= rhs + 1e-8 * max(1.0, abs(rhs)))


# ---------------------------------------------------------------------------
# 标度指数拟合
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExperimentConfig:
    """
    拟合实验：序列配方 + 相位系统维数 + 区域 + 被拟合的量

    quantity: raw（∫|S|^p）、normalized（除以 ‖a‖₂^p）、conj3（猜想归一化）
    region: full（全环面）或 dyadic（[0,2^{−j}]^d）
    """

    d: int
    p: float
    recipe: Any
    region: str = "full"
    quantity: str = "raw"
    norm: str = "l2"
    j: int = 0
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def __post_init__(self):
        if self.region not in ("full", "dyadic"):
            raise DomainError(f"未知区域: {self.region}")
        if self.quantity not in ("raw", "normalized", "conj3"):
            raise DomainError(f"未知拟合量: {self.quantity}")

    def coefficients(self, N: int) -> Coefficients:
        return self.recipe.realize((1, N))

    def value(self, N: int, j: Optional[int] = None, pool: Optional[WorkerPool] = None) -> MomentResult:
        j = self.j if j is None else j
        a = self.coefficients(N)
        sys = PhaseSystem.moment_curve(self.d)
        box = TorusBox.full(self.d) if self.region == "full" else TorusBox.dyadic(self.d, j)
        m = box_moment(a, sys, box, self.p, self.quad, pool)
        if self.quantity == "raw":
            scale = 1.0
        elif self.quantity == "normalized":
            scale = 1.0 / norm_power(a, N, self.p, "l2")
        else:
            scale = 2.0 ** (j * (self.d + 1) / 2.0) / norm_power(a, N, self.p, self.norm)
        return MomentResult(m.value * scale, m.abs_error * scale, m.method, N=N, d=self.d, p=self.p,
                            region=m.region, seed=m.seed, extra=dict(m.extra, j=j))


def _check_ladder(ladder: Sequence[float], geometric: bool) -> List[float]:
    ladder = [float(v) for v in ladder]
    if len(ladder) < 4:
        raise DomainError("阶梯至少需要 4 个点")
    if geometric:
        if any(v <= 0 for v in ladder):
            raise DomainError("几何阶梯必须为正")
        ratios = [b / a for a, b in zip(ladder, ladder[1:])]
    else:
        ratios = [b - a for a, b in zip(ladder, ladder[1:])]
    if any(abs(r - ratios[0]) > 1e-9 * max(1.0, abs(ratios[0])) for r in ratios) or ratios[0] == (1.0 if geometric else 0.0):
        raise DomainError(f"阶梯必须是{'几何' if geometric else '等差'}数列: {ladder}")
    return ladder


def exponent_fit_over_N(config: ExperimentConfig, ladder: Sequence[int],
                        pool: Optional[WorkerPool] = None) -> Tuple[FitResult, List[MomentResult]]:
    """log₂(量) 对 log₂ N 的最小二乘斜率"""
    Ns = [int(v) for v in _check_ladder(ladder, geometric=True)]
    results = [config.value(N, pool=pool) for N in Ns]
    logger.info(f"N 阶梯 {Ns}: {[r.value for r in results]}")
    return fit_loglog(Ns, [r.value for r in results]), results


def exponent_fit_over_j(config: ExperimentConfig, N: int, ladder: Sequence[int],
                        pool: Optional[WorkerPool] = None) -> Tuple[FitResult, List[MomentResult]]:
    """log₂(量) 对 j 的最小二乘斜率"""
    js = [int(v) for v in _check_ladder(ladder, geometric=False)]
    if any(j < 0 for j in js):
        raise DomainError("j 必须非负")
    results = [config.value(N, j, pool) for j in js]
    if any(r.value <= 0 for r in results):
        raise DomainError("拟合数据必须为正")
    logger.info(f"j 阶梯 {js}: {[r.value for r in results]}")
    return fit_slope(js, [math.log2(r.value) for r in results]), results


# ---------------------------------------------------------------------------
# 解耦不等式
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Statement:
    """解耦命题：指数、前 periodic 个坐标取整个周期、其余坐标边长 N^{−e}"""

    name: str
    exponents: Tuple[int, ...]
    periodic: int
    side_exponents: Tuple[int, ...]
    p: int
    norm: int
    rhs_power: int

    def sides(self, N: int) -> Tuple[float, ...]:
        return tuple(float(N) ** -e for e in self.side_exponents)

    def rhs(self, a: Coefficients, N: int) -> float:
        return float(N) ** self.rhs_power * math.prod(self.sides(N)) * a.norm(self.norm) ** self.p


STATEMENTS: Dict[str, Statement] = {
    "a10": Statement("a10", (1, 2, 3, 4), 2, (2, 2), 12, 6, 4),
    "a11": Statement("a11", (1, 2, 3, 4), 1, (1, 1, 2), 12, 6, 4),
    "a32": Statement("a32", (1, 3, 4, 5), 1, (2, 2, 3), 12, 6, 4),
    "d32": Statement("d32", (1, 2, 4, 5), 2, (3, 3), 12, 6, 4),
    "c7": Statement("c7", (1, 2, 3, 4, 5), 2, (2, 1, 2), 18, 9, 7),
}


def _spans(freqs: Sequence[np.ndarray]) -> List[int]:
    return [int(np.max(f)) - int(np.min(f)) for f in freqs]


def torus_fiber_integral(a: Coefficients, periodic_freqs: Sequence[np.ndarray],
                         sampled_freqs: Sequence[np.ndarray], anchors: Sequence[float],
                         sides: Sequence[float], p: int, samples: int, seed: int,
                         stratified: bool = True, max_grid_points: int = MAX_GRID_POINTS,
                         pool: Optional[WorkerPool] = None) -> Tuple[float, float]:
    """
    ∫_{T^t × box} |Σ a_n e(f(n)·y + g(n)·x)|^p dy dx

    周期坐标 y 上用 Nyquist 网格 + ifftn 精确求平均（偶数 p），
    盒子坐标 x 上分层抽样。返回（值，标准误差）。
    """
    l = _even_order(p)
    if l is None:
        raise DomainError(f"环面纤维积分需要正偶数 p: p={p}")
    if samples < MC_MIN_SAMPLES:
        raise DomainError(f"mc 样本数至少为 {MC_MIN_SAMPLES}: {samples}")
    counts = tuple(l * s + 1 for s in _spans(periodic_freqs))
    placement = fft_placement(a, periodic_freqs, counts)
    if placement is None:
        raise DomainError("周期坐标上的频率放置不是单射")
    per_sample = math.prod(counts)
    if per_sample * samples > max_grid_points:
        raise ResourceGuardError(
            f"环面纤维积分需要 {per_sample}×{samples} 个点，超过上限 {max_grid_points}",
            required_counts=counts,
        )
    pool = pool or WorkerPool()
    rng = np.random.default_rng(seed)
    U = stratified_uniform(samples, len(sampled_freqs), rng, stratified)
    X = np.asarray(anchors, dtype=np.float64) + np.asarray(sides, dtype=np.float64) * U
    rows = max(1, _BLOCK_ELEMENTS // max(per_sample, a.size))

    def run(span):
        s, e = span
        B = modulated_coefficients(a, sampled_freqs, X[s:e])
        return torus_block_power(B, placement, counts, p)

    values = np.concatenate(pool.map(run, split_range(samples, rows)))
    vol = math.prod(sides)
    mean, stderr = _mean_and_stderr(values)
    return vol * mean, vol * stderr


@dataclass(frozen=True)
class DecouplingResult:
    statement: str
    N: int
    ratio: float
    ratio_stderr: float
    lhs: float
    lhs_stderr: float
    rhs: float
    samples: int
    seed: int


def _decoupling_cost(st: Statement, N: int, samples: int) -> int:
    lo = (N + 1) // 2
    l = st.p // 2
    cost = 1
    for e in st.exponents[:st.periodic]:
        cost *= l * (N ** e - lo ** e) + 1
    return cost * samples


def decoupling_ratio(statement: str, N: int, a: Optional[Coefficients] = None,
                     quad: Optional[QuadratureSpec] = None,
                     pool: Optional[WorkerPool] = None) -> DecouplingResult:
    """
    解耦命题左端积分 / 右端（不含 N^ε），支撑集 [N/2, N]，区间取最小允许边长

    Raises:
        ResourceGuardError: 所需点数超限（details 含 max_feasible_N）
    """
    if statement not in STATEMENTS:
        raise DomainError(f"未知解耦命题: {statement}，可选 {sorted(STATEMENTS)}")
    if N < 2:
        raise DomainError(f"N 必须 ≥ 2: N={N}")
    st = STATEMENTS[statement]
    quad = quad or QuadratureSpec(MC)
    lo = (N + 1) // 2
    a = a if a is not None else Coefficients.on_interval(lo, N)
    if a.is_multi_index or a.lo < lo or a.hi > N:
        raise DomainError(f"系数支撑集必须落在 [{lo}, {N}]")
    if _decoupling_cost(st, N, quad.samples) > quad.max_grid_points:
        feasible = N - 1
        while feasible >= 2 and _decoupling_cost(st, feasible, quad.samples) > quad.max_grid_points:
            feasible -= 1
        raise ResourceGuardError(
            f"{statement} 在 N={N} 处不可行，最大可行 N 为 {feasible if feasible >= 2 else '无'}",
            max_feasible_N=feasible if feasible >= 2 else None,
        )
    freqs = PhaseSystem.power_system(st.exponents).frequencies(a)
    sides = st.sides(N)
    lhs, lhs_err = torus_fiber_integral(
        a, freqs[:st.periodic], freqs[st.periodic:], (0.0,) * len(sides), sides,
        st.p, quad.samples, quad.seed, quad.stratified, quad.max_grid_points, pool,
    )
    rhs = st.rhs(a, N)
    if rhs == 0:
        raise DomainError("右端为零（‖a‖ = 0）")
    logger.info(f"{statement} N={N}: LHS={lhs:.6g}±{lhs_err:.2g}, RHS={rhs:.6g}")
    return DecouplingResult(statement, N, lhs / rhs, lhs_err / rhs, lhs, lhs_err, rhs,
                            quad.samples, quad.seed)
