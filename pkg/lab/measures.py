# measures.py
"""
图曲面上的曲面测度及其 Fourier 系数

σ̂(ξ) = ∫ e(−ξ·(x, F(x))) √(1+|∇F(x)|²) dx，参数域 [0,1]^{d−1}；
圆周按弧长参数化，沿角度等距求积。
"""
import functools
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from data.lab_settings import BESSEL_SERIES_CUTOFF, GAUSS_ORDER, MAX_GRID_POINTS, PANEL_SAFETY
from lab.core import FitResult, fit_slope, frac, unit
from lab.errors import DomainError, ResourceGuardError
from lab.expsum import AxisRule
from lab.runtime import WorkerPool, exact_complex_sum, split_range

logger = logging.getLogger(__name__)

SQUARE = "square"
BILINEAR_D3 = "bilinear-d3"
D4 = "d4"
D5 = "d5"
GENERAL = "general"
CIRCLE = "circle"
CUSTOM = "custom"
FLAT = "flat"

FAMILIES = (SQUARE, BILINEAR_D3, D4, D5, GENERAL, CIRCLE, CUSTOM, FLAT)

# 每个参数轴上求积节点的最小段数
MIN_PANELS = 8
_CHUNK_NODES = 1 << 16


def _general_pairs(d: int) -> List[Tuple[int, int]]:
    # 参数下标从 0 开始：x_i x_{d−i} ↦ (i−1, d−i−1)
    return [(i - 1, d - i - 1) for i in range(1, d // 2 + 1)]


@dataclass(frozen=True, eq=False)
class GraphSurface:
    """
    图曲面 {(x, F(x)) : x ∈ [0,1]^{d−1}} ⊂ T^d，或 T² 中半径 r 的圆周

    grad_bound[k] 是 sup|∂_k F| 的上界，用于求积分辨率规则。
    """

    family: str
    d: int
    F: Optional[Callable[[np.ndarray], np.ndarray]] = None
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    grad_bound: Tuple[float, ...] = ()
    radius: float = 1.0
    label: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"未知曲面族: {self.family}")
        if self.d < 2:
            raise DomainError(f"曲面所在维数必须 ≥ 2: d={self.d}")
        if self.family == CIRCLE:
            if self.d != 2 or not self.radius > 0:
                raise DomainError("圆周只在 T² 中定义且半径为正")
        elif self.F is None or self.grad is None:
            raise DomainError(f"{self.family} 缺少 F 或 ∇F")
        if self.family != CIRCLE and len(self.grad_bound) != self.d - 1:
            raise DomainError("grad_bound 的长度必须是 d−1")

    # ---- 构造 ----

    @classmethod
    def square(cls) -> "GraphSurface":
        return cls(SQUARE, 2,
                   F=lambda x: x[:, 0] ** 2,
                   grad=lambda x: 2.0 * x[:, :1],
                   grad_bound=(2.0,), label="x₁²")

    @classmethod
    def bilinear_d3(cls) -> "GraphSurface":
        return cls(BILINEAR_D3, 3,
                   F=lambda x: x[:, 0] * x[:, 1],
                   grad=lambda x: np.stack([x[:, 1], x[:, 0]], axis=1),
                   grad_bound=(1.0, 1.0), label="x₁x₂")

    @classmethod
    def d4(cls) -> "GraphSurface":
        return cls(D4, 4,
                   F=lambda x: (x[:, 1] ** 2 + x[:, 0] * x[:, 2]) / 2.0,
                   grad=lambda x: np.stack([x[:, 2] / 2.0, x[:, 1], x[:, 0] / 2.0], axis=1),
                   grad_bound=(0.5, 1.0, 0.5), label="(x₂²+x₁x₃)/2")

    @classmethod
    def d5(cls) -> "GraphSurface":
        return cls(D5, 5,
                   F=lambda x: (x[:, 0] * x[:, 3] + x[:, 1] * x[:, 2]) / 2.0,
                   grad=lambda x: np.stack([x[:, 3], x[:, 2], x[:, 1], x[:, 0]], axis=1) / 2.0,
                   grad_bound=(0.5, 0.5, 0.5, 0.5), label="(x₁x₄+x₂x₃)/2")

    @classmethod
    def general(cls, d: int) -> "GraphSurface":
        """F = (2/d) Σ_{1≤i≤d/2} x_i x_{d−i}"""
        if d < 2:
            raise DomainError(f"d 必须 ≥ 2: d={d}")
        pairs = _general_pairs(d)
        c = 2.0 / d

        def F(x):
            return c * sum(x[:, i] * x[:, j] for i, j in pairs)

        def grad(x):
            g = np.zeros_like(x)
            for i, j in pairs:
                g[:, i] += c * x[:, j]
                g[:, j] += c * x[:, i]
            return g

        bound = [0.0] * (d - 1)
        for i, j in pairs:
            bound[i] += c
            bound[j] += c
        return cls(GENERAL, d, F=F, grad=grad, grad_bound=tuple(bound), label=f"general(d={d})")

    @classmethod
    def circle(cls, r: float = 1.0) -> "GraphSurface":
        return cls(CIRCLE, 2, radius=float(r), label=f"circle({r:g})")

    @classmethod
    def custom(cls, d: int, F: Callable, grad: Callable,
               grad_bound: Optional[Sequence[float]] = None, label: str = "custom") -> "GraphSurface":
        """
        自定义图曲面

        grad_bound 缺省时在每轴 33 个点的网格上取 |∇F| 的最大值并放大 1.5 倍。
        """
        if grad_bound is None:
            t = np.linspace(0.0, 1.0, 33)
            mesh = np.meshgrid(*([t] * (d - 1)), indexing="ij")
            pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
            grad_bound = tuple(1.5 * float(v) for v in np.max(np.abs(grad(pts)), axis=0))
        return cls(CUSTOM, d, F=F, grad=grad, grad_bound=tuple(grad_bound), label=label)

    @classmethod
    def flat(cls, d: int) -> "GraphSurface":
        return cls(FLAT, d,
                   F=lambda x: np.zeros(x.shape[0]),
                   grad=lambda x: np.zeros_like(x),
                   grad_bound=(0.0,) * (d - 1), label="flat")

    @classmethod
    def from_name(cls, name: str, d: Optional[int] = None) -> "GraphSurface":
        """命令行名称：square, bilinear-d3, d4, d5, general, flat, circle 或 circle:<r>"""
        if name.startswith(CIRCLE):
            _, _, r = name.partition(":")
            return cls.circle(float(r) if r else 1.0)
        builders = {SQUARE: cls.square, BILINEAR_D3: cls.bilinear_d3, D4: cls.d4, D5: cls.d5}
        if name in builders:
            return builders[name]()
        if name in (GENERAL, FLAT):
            if d is None:
                raise DomainError(f"{name} 需要给出 d")
            return cls.general(d) if name == GENERAL else cls.flat(d)
        raise DomainError(f"未知曲面族: {name}")

    # ---- 几何 ----

    @property
    def is_circle(self) -> bool:
        return self.family == CIRCLE

    @property
    def parameter_dim(self) -> int:
        return 1 if self.is_circle else self.d - 1

    def points(self, x: np.ndarray) -> np.ndarray:
        """参数 (m, d−1) ↦ 曲面点 (m, d)；圆周的参数为角度"""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.parameter_dim)
        if self.is_circle:
            return self.radius * np.stack([np.cos(x[:, 0]), np.sin(x[:, 0])], axis=1)
        return np.concatenate([x, self.F(x)[:, None]], axis=1)

    def weight(self, x: np.ndarray) -> np.ndarray:
        """面积元 √(1+|∇F|²)；圆周为 r"""
        x = np.asarray(x, dtype=np.float64).reshape(-1, self.parameter_dim)
        if self.is_circle:
            return np.full(x.shape[0], self.radius)
        g = self.grad(x)
        return np.sqrt(1.0 + np.sum(g * g, axis=1))

    def oscillations(self, xi: Sequence[int]) -> Tuple[float, ...]:
        """e(−ξ·(x,F(x))) 沿每个参数轴在单位长度上振荡次数的上界"""
        xi = np.asarray(xi, dtype=np.float64)
        if self.is_circle:
            return (2.0 * math.pi * self.radius * float(np.linalg.norm(xi)),)
        return tuple(abs(xi[k]) + abs(xi[-1]) * self.grad_bound[k] for k in range(self.d - 1))

    def required_panels(self, xi: Sequence[int]) -> Tuple[int, ...]:
        """每次振荡至少两段"""
        return tuple(int(math.ceil(2.0 * (1.0 + o))) for o in self.oscillations(xi))

    def describe(self) -> str:
        return self.label or self.family


def flat_surface(d: int) -> GraphSurface:
    return GraphSurface.flat(d)


# ---------------------------------------------------------------------------
# Fourier 系数
# ---------------------------------------------------------------------------

def _check_xi(surface: GraphSurface, xi: Sequence[int]) -> np.ndarray:
    arr = np.asarray(xi)
    if arr.shape != (surface.d,):
        raise DomainError(f"ξ 的维数应为 {surface.d}")
    if not np.all(np.equal(np.mod(arr, 1), 0)):
        raise DomainError(f"ξ 必须是整数向量: {xi}")
    return arr.astype(np.int64)


def _circle_coefficient(surface: GraphSurface, xi: np.ndarray, M: int) -> complex:
    theta = 2.0 * np.pi * np.arange(M, dtype=np.float64) / M
    pts = surface.points(theta[:, None])
    phase = frac(-(pts @ xi.astype(np.float64)))
    return exact_complex_sum(unit(phase)) * (2.0 * np.pi * surface.radius / M)


def _graph_coefficient(surface: GraphSurface, xi: np.ndarray, panels: Sequence[int],
                       order: int, max_grid_points: int) -> complex:
    rules = [AxisRule.gauss(0.0, 1.0, P, order) for P in panels]
    sizes = [r.size for r in rules]
    total = math.prod(sizes)
    if total > max_grid_points:
        raise ResourceGuardError(
            f"σ̂ 求积需要 {total} 个节点，超过上限 {max_grid_points}",
            required_counts=tuple(sizes),
        )
    xi_f = xi.astype(np.float64)
    parts = []
    for s, e in split_range(total, _CHUNK_NODES):
        idx = np.unravel_index(np.arange(s, e), sizes)
        x = np.stack([rules[k].nodes[idx[k]] for k in range(len(rules))], axis=1)
        w = np.prod(np.stack([rules[k].weights[idx[k]] for k in range(len(rules))], axis=1), axis=1)
        phase = frac(-(surface.points(x) @ xi_f))
        parts.append(complex(np.sum(unit(phase) * surface.weight(x) * w)))
    return exact_complex_sum(parts)


def _resolve_panels(surface: GraphSurface, xi: np.ndarray, panels) -> Tuple[int, ...]:
    required = surface.required_panels(xi)
    if panels is None:
        if surface.is_circle:
            return tuple(max(64, PANEL_SAFETY * r) for r in required)
        return tuple(max(MIN_PANELS, r) for r in required)
    given = (int(panels),) * len(required) if np.isscalar(panels) else tuple(int(p) for p in panels)
    if len(given) != len(required):
        raise DomainError("panels 的维数与参数维数不一致")
    if any(g < r for g, r in zip(given, required)):
        raise ResourceGuardError(
            f"求积段数 {given} 不足，需要至少 {required}",
            required_counts=required,
        )
    return given


def surface_fourier_estimate(surface: GraphSurface, xi: Sequence[int], panels=None,
                             order: int = GAUSS_ORDER,
                             max_grid_points: int = MAX_GRID_POINTS) -> Tuple[complex, float]:
    """
    σ̂(ξ) 及其误差估计（与段数加倍后的结果之差）

    Raises:
        ResourceGuardError: 段数低于分辨率规则
    """
    xi = _check_xi(surface, xi)
    P = _resolve_panels(surface, xi, panels)
    if surface.is_circle:
        v1 = _circle_coefficient(surface, xi, P[0])
        v2 = _circle_coefficient(surface, xi, 2 * P[0])
    else:
        v1 = _graph_coefficient(surface, xi, P, order, max_grid_points)
        v2 = _graph_coefficient(surface, xi, tuple(2 * p for p in P), order, max_grid_points)
    return v2, abs(v2 - v1)


def surface_fourier_coefficient(surface: GraphSurface, xi: Sequence[int], panels=None,
                                order: int = GAUSS_ORDER,
                                max_grid_points: int = MAX_GRID_POINTS) -> complex:
    """σ̂(ξ) = ∫ e(−ξ·(x,F(x))) weight(x) dx"""
    xi = _check_xi(surface, xi)
    P = _resolve_panels(surface, xi, panels)
    if surface.is_circle:
        return _circle_coefficient(surface, xi, P[0])
    return _graph_coefficient(surface, xi, P, order, max_grid_points)


def surface_mass(surface: GraphSurface) -> float:
    return surface_fourier_coefficient(surface, (0,) * surface.d).real


# ---------------------------------------------------------------------------
# 贝塞尔函数与 Herz 渐近
# ---------------------------------------------------------------------------

def _j0_series(z: np.ndarray) -> np.ndarray:
    q = -(z * z) / 4.0
    term = np.ones_like(z)
    total = np.ones_like(z)
    for k in range(1, 80):
        term = term * q / (k * k)
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.maximum(np.abs(total), 1e-300)):
            break
    return total


def _j0_asymptotic(z: np.ndarray) -> np.ndarray:
    # 大参数展开，在最小项处截断
    P = np.ones_like(z)
    Q = np.zeros_like(z)
    term = np.ones_like(z)
    prev = np.full_like(z, np.inf)
    active = np.ones(z.shape, dtype=bool)
    for k in range(1, 60):
        term = term * (-(2 * k - 1) ** 2) / (k * 8.0 * z)
        mag = np.abs(term)
        active = active & (mag < prev)
        if not np.any(active):
            break
        contrib = np.where(active, term, 0.0)
        if k % 2 == 0:
            P = P + (1 if k % 4 == 0 else -1) * contrib
        else:
            Q = Q + (1 if k % 4 == 1 else -1) * contrib
        prev = np.where(active, mag, prev)
    chi = z - np.pi / 4.0
    return np.sqrt(2.0 / (np.pi * z)) * (P * np.cos(chi) - Q * np.sin(chi))


def bessel_j0(z) -> np.ndarray:
    """J₀(z)：|z| ≤ BESSEL_SERIES_CUTOFF 用幂级数，其余用渐近展开"""
    z = np.abs(np.asarray(z, dtype=np.float64))
    out = np.empty_like(z)
    small = z <= BESSEL_SERIES_CUTOFF
    if np.any(small):
        out[small] = _j0_series(z[small])
    if np.any(~small):
        out[~small] = _j0_asymptotic(z[~small])
    return out


def bessel_oracle(r: float, xi: Sequence[float]) -> complex:
    """半径 r 的圆周测度的 Fourier 系数 2πr·J₀(2πr|ξ|)"""
    if not r > 0:
        raise DomainError(f"半径必须为正: r={r}")
    z = 2.0 * math.pi * r * float(np.linalg.norm(np.asarray(xi, dtype=np.float64)))
    return complex(2.0 * math.pi * r * float(bessel_j0(z)))


@functools.lru_cache(maxsize=32)
def herz_amplitude(r: float, lo: float = 400.0, hi: float = 800.0, step: float = 0.37) -> float:
    """
    在 |ξ| ∈ [lo, hi]（非整数采样）上对 σ̂ ≈ C₀|ξ|^{−1/2}cos(2π(r|ξ|−1/8)) 做最小二乘

    解析值为 2√r。
    """
    if not r > 0:
        raise DomainError(f"半径必须为正: r={r}")
    s = np.arange(lo, hi, step) + 0.5 * step
    y = 2.0 * np.pi * r * bessel_j0(2.0 * np.pi * r * s)
    g = s ** -0.5 * np.cos(2.0 * np.pi * (r * s - 0.125))
    return float(np.dot(y, g) / np.dot(g, g))


def herz_residual(r: float, xi: Sequence[int], C0: Optional[float] = None) -> float:
    """
    |σ̂(ξ) − C₀|ξ|^{−1/2}cos(2π(r|ξ|−1/8))|·|ξ|^{3/2}

    有界即说明 d=2 时的余项为 O(|ξ|^{−3/2})。
    """
    s = float(np.linalg.norm(np.asarray(xi, dtype=np.float64)))
    if s < 5:
        raise DomainError(f"Herz 比较要求 |ξ| ≥ 5: |ξ|={s:.6g}")
    C0 = herz_amplitude(float(r)) if C0 is None else C0
    sigma = surface_fourier_coefficient(GraphSurface.circle(r), xi)
    model = C0 * s ** -0.5 * math.cos(2.0 * math.pi * (r * s - 0.125))
    return abs(sigma - model) * s ** 1.5


# ---------------------------------------------------------------------------
# 衰减核与衰减拟合
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DecayKernel:
    """K(ξ) = (1+|ξ|)^{−β}"""

    beta: float

    def __post_init__(self):
        if not (self.beta >= 0 and math.isfinite(self.beta)):
            raise DomainError(f"β 必须是非负有限数: {self.beta}")

    def __call__(self, xi: np.ndarray) -> np.ndarray:
        xi = np.asarray(xi, dtype=np.float64)
        norm = np.sqrt(np.sum(xi * xi, axis=-1))
        return (1.0 + norm) ** -self.beta


def decay_fit(surface: GraphSurface, directions: Sequence[Sequence[int]],
              radii: Sequence[int], pool: Optional[WorkerPool] = None) -> FitResult:
    """
    对每个半径 R 取 max_dir |σ̂(R·dir)|（上包络），拟合 log₂ 包络对 log₂ R 的斜率

    Raises:
        DomainError: 半径少于 4 个、方向少于 3 个，或包络退化
    """
    radii = [int(r) for r in radii]
    dirs = [tuple(int(v) for v in d) for d in directions]
    if len(radii) < 4 or len(dirs) < 3:
        raise DomainError("衰减拟合至少需要 4 个半径与 3 个方向")
    if any(r <= 0 for r in radii):
        raise DomainError("半径必须为正")
    if any(len(d) != surface.d or not any(d) for d in dirs):
        raise DomainError(f"方向必须是非零的 {surface.d} 维整数向量")
    pool = pool or WorkerPool()
    jobs = [(r, d) for r in radii for d in dirs]
    values = pool.map(lambda job: abs(surface_fourier_coefficient(surface, [job[0] * v for v in job[1]])), jobs)
    envelope = [max(values[i * len(dirs):(i + 1) * len(dirs)]) for i in range(len(radii))]
    if any(v < 1e-14 for v in envelope):
        raise DomainError("σ̂ 的包络低于 1e−14，衰减拟合退化")
    logger.debug(f"衰减拟合 {surface.describe()}: 包络 {envelope}")
    return fit_slope([math.log2(r) for r in radii], [math.log2(v) for v in envelope])


# ---------------------------------------------------------------------------
# 小盒包含性与圆周双线性型
# ---------------------------------------------------------------------------

def fit_containment(surface: GraphSurface, N: int, samples_per_axis: int = 5) -> Tuple[float, bool]:
    """
    sup |F| 在 [0,1/N]×…×[0,1/N^{d−1}] 上的值及其是否 ≤ N^{−d}

    多项式族在正卦限单调，因此上确界在远角点处取得；网格点用于自定义族。
    """
    if surface.is_circle:
        raise DomainError("圆周不是图曲面")
    if N < 1:
        raise DomainError(f"N 必须 ≥ 1: N={N}")
    d = surface.d
    ranges = [np.linspace(0.0, float(N) ** -(k + 1), samples_per_axis) for k in range(d - 1)]
    mesh = np.meshgrid(*ranges, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    sup = float(np.max(np.abs(surface.F(pts))))
    return sup, sup <= float(N) ** -d * (1.0 + 1e-12)


def sphere_bilinear_form(points, values: Sequence[complex], r: float = 1.0) -> Tuple[float, float]:
    """
    Σ_{𝐦,𝐧} a_𝐦 ā_𝐧 σ̂_r(𝐦−𝐧)，σ̂_r 为半径 r 的圆周测度

    Returns:
        (值, 值/‖a‖²)
    """
    if hasattr(points, "as_array"):
        points = points.as_array()
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    a = np.asarray(list(values), dtype=np.complex128)
    if pts.shape[0] == 0:
        raise DomainError("格点集为空")
    if a.shape[0] != pts.shape[0]:
        raise DomainError("系数个数与格点个数不一致")
    norm2 = float(np.sum(np.abs(a) ** 2))
    if norm2 == 0:
        raise DomainError("‖a‖ = 0")
    diff = pts[:, None, :] - pts[None, :, :]
    z = 2.0 * np.pi * r * np.sqrt(np.sum(diff * diff, axis=2))
    kernel = 2.0 * np.pi * r * bessel_j0(z)
    value = float(np.real(a @ kernel @ np.conj(a)))
    return value, value / norm2


def fourier_table(surface: GraphSurface, xis: Sequence[Sequence[int]],
                  pool: Optional[WorkerPool] = None) -> List[Tuple[Tuple[int, ...], complex]]:
    pool = pool or WorkerPool()
    xis = [tuple(int(v) for v in xi) for xi in xis]
    values = pool.map(lambda xi: surface_fourier_coefficient(surface, xi), xis)
    return list(zip(xis, values))


def write_fourier_table(path: str, surface: GraphSurface, xis: Sequence[Sequence[int]],
                        pool: Optional[WorkerPool] = None) -> int:
    """把 σ̂ 表写成 CSV `xi_1,...,xi_d,re,im,abs`，返回行数"""
    from lab.tables import write_fourier_rows

    rows = fourier_table(surface, xis, pool)
    write_fourier_rows(path, surface.d, rows)
    return len(rows)
