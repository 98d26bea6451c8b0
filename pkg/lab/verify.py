# verify.py
"""
验收套件

每个判据返回实测值与 passed 标志；判据内部的 LabError 记为失败（不中断套件），
墙钟预算耗尽则整个套件以 ResourceGuardError 退出。
"""
import itertools
import logging
import math
import time
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from scipy import special

from data.lab_settings import DEFAULT_SEED, SCHEMA_VERSION, SLOPE_THRESHOLD, SuiteConfig
from lab.constructions import (
    SequenceRecipe,
    interference_bound,
    sample_min_modulus,
    smallcap_lower_bound,
    spike,
)
from lab.core import Coefficients, PhaseSystem, TorusBox, fit_loglog
from lab.counting import (
    arc_max_count,
    box_moment_exact,
    circle_lattice,
    cor_cip_sup,
    even_moment_count,
    l4_kernel_sup,
    lemma_a35_check,
    parab_kernel_bound,
)
from lab.errors import DomainError, LabError, ResourceGuardError, create_error_response
from lab.measures import GraphSurface, bessel_oracle, decay_fit, surface_fourier_coefficient
from lab.moments import (
    ExperimentConfig,
    QuadratureSpec,
    box_moment,
    decoupling_ratio,
    exponent_fit_over_j,
    exponent_fit_over_N,
    lemma_a28_check,
)
from lab.runtime import TimeoutManager, WorkerPool

logger = logging.getLogger(__name__)

SUITES: Dict[str, Dict[str, Any]] = {s["name"]: s for s in SuiteConfig.ALL}


@dataclass
class VerifyContext:
    pool: WorkerPool
    seed: int = DEFAULT_SEED
    beta: Optional[float] = None

    def rng(self, salt: int) -> np.random.Generator:
        return np.random.default_rng([self.seed, salt])


def _close(x: float, y: float, rel: float) -> bool:
    return abs(x - y) <= rel * max(abs(x), abs(y), 1e-300)


# ---------------------------------------------------------------------------
# core
# ---------------------------------------------------------------------------

def oracle_equivalence(ctx: VerifyContext) -> Dict[str, Any]:
    cases = [(d, N, p) for d in (1, 2, 3) for N in (4, 8, 12) for p in (2, 4)] + [(3, 8, 6)]
    worst = 0.0
    for d, N, p in cases:
        a = SequenceRecipe.unimodular(ctx.seed + N).realize((1, N))
        sys = PhaseSystem.moment_curve(d)
        box = TorusBox.full(d)
        grid = box_moment(a, sys, box, p, QuadratureSpec("grid"), ctx.pool).value
        count = even_moment_count(a, sys, p // 2, pool=ctx.pool)
        exact = box_moment_exact(a, sys, box, p // 2, pool=ctx.pool)
        for v in (grid, exact):
            worst = max(worst, abs(v - count) / count)
    return {"cases": len(cases), "max_relative_error": worst, "passed": worst <= 1e-10}


def vinogradov_identity(ctx: VerifyContext) -> Dict[str, Any]:
    sys = PhaseSystem.moment_curve(2)
    mismatches = []
    for N in range(1, 51):
        value = even_moment_count(Coefficients.on_interval(1, N), sys, 2, pool=ctx.pool)
        if value != 2 * N * N - N:
            mismatches.append(N)
    brute_ok = True
    for N in range(1, 7):
        count = sum(1 for t in itertools.product(range(1, N + 1), repeat=4)
                    if t[0] + t[1] == t[2] + t[3] and t[0] ** 2 + t[1] ** 2 == t[2] ** 2 + t[3] ** 2)
        brute_ok = brute_ok and count == 2 * N * N - N
    return {"mismatches": mismatches, "brute_force_ok": brute_ok,
            "passed": not mismatches and brute_ok}


def supercritical_slope(ctx: VerifyContext) -> Dict[str, Any]:
    # d=1, p=6：‖a‖₂⁻⁶∫|S|⁶ 的精确增长 N^{p/2−1} = N²
    config = ExperimentConfig(1, 6, SequenceRecipe.constant(), quantity="normalized",
                              quad=QuadratureSpec("exact"))
    fit, results = exponent_fit_over_N(config, [16, 32, 64, 128], ctx.pool)
    return {"d": 1, "p": 6, "slope": fit.slope, "slope_stderr": fit.slope_stderr,
            "values": [r.value for r in results], "passed": 1.8 <= fit.slope <= 2.2}


def dyadic_decay_d2(ctx: VerifyContext) -> Dict[str, Any]:
    config = ExperimentConfig(2, 2, SequenceRecipe.rademacher(ctx.seed), region="dyadic")
    fit, results = exponent_fit_over_j(config, 256, list(range(2, 9)), ctx.pool)
    return {"N": 256, "slope": fit.slope, "slope_stderr": fit.slope_stderr,
            "methods": sorted({r.method for r in results}), "passed": fit.slope <= -1.4}


def dyadic_decay_d3(ctx: VerifyContext) -> Dict[str, Any]:
    quad = QuadratureSpec(samples=8192, seed=ctx.seed)
    out, ok = {}, True
    for recipe in (SequenceRecipe.constant(), SequenceRecipe.rademacher(ctx.seed)):
        config = ExperimentConfig(3, 6, recipe, region="dyadic", quantity="conj3", quad=quad)
        values = [config.value(64, j, ctx.pool).value for j in range(7)]
        running = math.inf
        for v in values:
            ok = ok and v <= 3.0 * running
            running = min(running, v)
        out[recipe.kind] = values
    return {"N": 64, "p": 6, "normalized": out, "passed": ok}


def herz_bessel(ctx: VerifyContext) -> Dict[str, Any]:
    circle = GraphSurface.circle(1.0)
    xis = [(0, 0), (1, 0), (0, 3), (3, 4), (7, 7), (5, 12), (20, 21), (25, 25), (30, 40), (14, 48)]
    worst = max(abs(surface_fourier_coefficient(circle, xi) - bessel_oracle(1.0, xi)) for xi in xis)
    # 自带的 J₀ 与 scipy 对照
    oracle_gap = max(abs(bessel_oracle(1.0, xi).real - 2.0 * math.pi * special.j0(2.0 * math.pi * math.hypot(*xi)))
                     for xi in xis)
    # 整数模长的方向使 cos(2π|ξ| − π/4) 恒为 cos(π/4)
    fit = decay_fit(circle, [(1, 0), (3, 4), (5, 12)], [8, 16, 32, 64], ctx.pool)
    return {"max_abs_error": worst, "oracle_gap": float(oracle_gap), "decay_slope": fit.slope,
            "passed": worst <= 1e-6 and oracle_gap <= 1e-8 and abs(fit.slope + 0.5) <= 0.1}


def constructive_interference(ctx: VerifyContext) -> Dict[str, Any]:
    N, rows, ok = 64, {}, True
    for d in (2, 3, 4):
        c = 1.0 / (8 * d)
        bound = interference_bound(d, N, c)
        sampled = sample_min_modulus(d, N, c, 1000, ctx.seed + d)
        rows[d] = {"bound": bound, "sampled_min": sampled}
        ok = ok and sampled >= bound >= N * math.cos(math.pi / 4) - 1e-9
    return {"N": N, "by_d": rows, "passed": ok}


def sumset_lemma(ctx: VerifyContext) -> Dict[str, Any]:
    rng = ctx.rng(12)
    worst = 0.0
    for _ in range(25):
        size = int(rng.integers(1, 11))
        S = np.sort(rng.choice(np.arange(1, 11), size=size, replace=False))
        a = Coefficients(S, np.exp(2j * np.pi * rng.random(size)))
        l = int(rng.integers(1, 3))
        interval = (float(rng.random()), float(rng.uniform(0.01, 1.0)))
        worst = max(worst, lemma_a35_check(S, a, interval, l).ratio)
    return {"instances": 25, "max_ratio": worst, "passed": worst <= 1.0 + 1e-10}


def trig_density_lemma(ctx: VerifyContext) -> Dict[str, Any]:
    rng = ctx.rng(13)
    sys = PhaseSystem.moment_curve(2)
    worst_margin, ok = math.inf, True
    for _ in range(20):
        N = int(rng.integers(3, 7))
        a = Coefficients.on_interval(1, N, rng.normal(size=N) + 1j * rng.normal(size=N))
        freqs = [tuple(int(v) for v in k) for k in rng.integers(-3, 4, size=(6, 2))]
        nu = {k: float(rng.uniform(0.1, 1.0)) for k in freqs}
        mu = {k: v * float(rng.uniform(0, 1)) * np.exp(2j * np.pi * rng.random()) for k, v in nu.items()}
        p = int(rng.choice([2, 4]))
        check = lemma_a28_check(a, sys, mu, nu, p)
        ok = ok and check.holds
        worst_margin = min(worst_margin, check.rhs - check.lhs)
    return {"instances": 20, "min_margin": worst_margin, "passed": ok}


# ---------------------------------------------------------------------------
# paraboloid / l4 / sphere
# ---------------------------------------------------------------------------

def paraboloid_d2(ctx: VerifyContext) -> Dict[str, Any]:
    Ns = [16, 32, 64, 128, 256]
    normalized = [parab_kernel_bound(2, N, pool=ctx.pool)[1] for N in Ns]
    fit = fit_loglog(Ns, normalized)
    return {"normalized": normalized, "slope": fit.slope, "passed": fit.slope <= 0.1}


def paraboloid_d3(ctx: VerifyContext) -> Dict[str, Any]:
    Ns = [8, 16, 32, 64]
    scaled = [parab_kernel_bound(3, N, pool=ctx.pool)[0] / (N * N * math.log(N)) for N in Ns]
    band = max(scaled) / min(scaled)
    return {"value_over_N2logN": scaled, "band": band, "passed": band <= 2.0}


def cip_uniformity(ctx: VerifyContext) -> Dict[str, Any]:
    beta = 0.7
    values = [D ** (beta - 0.5) * cor_cip_sup(C, D, beta).sup
              for C in (1e4, 1e5, 1e6) for D in (1, 4, 16, 64)]
    spread = max(values) / min(values)
    return {"beta": beta, "spread": spread, "passed": spread <= 4.0}


def l4_kernel(ctx: VerifyContext) -> Dict[str, Any]:
    Ns = [32, 64, 128, 256]
    out: Dict[str, Any] = {}
    betas = [ctx.beta] if ctx.beta is not None else [0.75, 0.6]
    ok = True
    for beta in betas:
        sups = [l4_kernel_sup(N, beta, ctx.pool) for N in Ns]
        fit = fit_loglog(Ns, sups)
        if beta > 2.0 / 3.0:
            ratio = max(sups) / min(sups)
            ok = ok and ratio <= 3.0
            out[f"beta={beta:g}"] = {"sups": sups, "ratio": ratio, "slope": fit.slope}
        else:
            # β < 2/3 时核和应当增长
            ok = ok and fit.slope >= 0.05
            out[f"beta={beta:g}"] = {"sups": sups, "slope": fit.slope}
    out["passed"] = ok
    return out


def circle_shells(ctx: VerifyContext) -> Dict[str, Any]:
    s25, s3 = circle_lattice(25).size, circle_lattice(3).size
    rng = ctx.rng(14)
    worst = 0
    for _ in range(100):
        while True:
            x, y = (int(v) for v in rng.integers(0, 708, size=2))
            N = x * x + y * y
            if 1 <= N <= 10 ** 6:
                break
        worst = max(worst, arc_max_count(N, 0.4))
    return {"S25": s25, "S3": s3, "max_arc_count": worst,
            "passed": s25 == 7 and s3 == 0 and worst <= 3}


# ---------------------------------------------------------------------------
# 解耦
# ---------------------------------------------------------------------------

def a11_spike(ctx: VerifyContext) -> Dict[str, Any]:
    N = 16
    result = decoupling_ratio("a11", N, spike(N // 2), QuadratureSpec("mc", samples=1000, seed=ctx.seed), ctx.pool)
    return {"N": N, "ratio": result.ratio, "expected": N ** -4.0,
            "passed": _close(result.ratio, N ** -4.0, 1e-9)}


def a11_seeds(ctx: VerifyContext) -> Dict[str, Any]:
    N = 8
    runs = [decoupling_ratio("a11", N, None, QuadratureSpec("mc", seed=s), ctx.pool)
            for s in (ctx.seed, ctx.seed + 1)]
    gap = abs(runs[0].ratio - runs[1].ratio)
    combined = math.hypot(runs[0].ratio_stderr, runs[1].ratio_stderr)
    return {"N": N, "ratios": [r.ratio for r in runs], "stderrs": [r.ratio_stderr for r in runs],
            "passed": gap <= 3.0 * combined}


def smallcap_16(ctx: VerifyContext) -> Dict[str, Any]:
    N = 16
    runs = [smallcap_lower_bound(N, seed=s, pool=ctx.pool) for s in (ctx.seed, ctx.seed + 1)]
    floor = smallcap_lower_bound(N, spike(N // 2), samples=1000, pool=ctx.pool)
    gap = abs(runs[0].lhs - runs[1].lhs)
    combined = math.hypot(runs[0].stderr, runs[1].stderr)
    ok = gap <= 3.0 * combined and _close(floor.lhs, floor.volume, 1e-9)
    return {"N": N, "M": runs[0].M, "lhs_over_M2": [r.ratio for r in runs],
            "stderrs": [r.stderr for r in runs], "spike_lhs": floor.lhs, "passed": ok}


SMALLCAP_LADDER = (16, 81, 256)
SMALLCAP_STABILITY_SAMPLES = 1 << 17


def smallcap_stability(ctx: VerifyContext) -> Dict[str, Any]:
    # 三个 N 统一只在 x₁ 上用网格
    runs = [smallcap_lower_bound(N, samples=SMALLCAP_STABILITY_SAMPLES, seed=ctx.seed, pool=ctx.pool,
                                 exact_axes=1)
            for N in SMALLCAP_LADDER]
    ratios = [r.ratio for r in runs]
    spread = max(ratios) / min(ratios)
    return {"N": list(SMALLCAP_LADDER), "M": [r.M for r in runs], "lhs_over_M2": ratios,
            "stderrs": [r.ratio_stderr for r in runs], "spread": spread, "passed": spread <= 4.0}


def decoupling_slopes(ctx: VerifyContext) -> Dict[str, Any]:
    Ns = [6, 8, 10, 12]
    out, ok = {}, True
    for statement, samples in (("a11", 4096), ("c7", 2048)):
        ratios, errs = [], []
        for N in Ns:
            lo = (N + 1) // 2
            a = SequenceRecipe.unimodular(ctx.seed).realize((lo, N))
            r = decoupling_ratio(statement, N, a, QuadratureSpec("mc", samples=samples, seed=ctx.seed), ctx.pool)
            ratios.append(r.ratio)
            errs.append(r.ratio_stderr)
        fit = fit_loglog(Ns, ratios)
        ok = ok and fit.slope <= 0.5
        out[statement] = {"ratios": ratios, "stderrs": errs, "slope": fit.slope}
    out["passed"] = ok
    return out


CRITERIA: Dict[Any, tuple] = {
    1: ("oracle-equivalence", oracle_equivalence),
    2: ("vinogradov-identity", vinogradov_identity),
    3: ("supercritical-slope", supercritical_slope),
    4: ("dyadic-decay-d2", dyadic_decay_d2),
    5: ("dyadic-decay-d3", dyadic_decay_d3),
    6: ("paraboloid-d2", paraboloid_d2),
    7: ("paraboloid-d3", paraboloid_d3),
    8: ("cip-uniformity", cip_uniformity),
    9: ("l4-kernel", l4_kernel),
    10: ("herz-bessel", herz_bessel),
    11: ("constructive-interference", constructive_interference),
    12: ("sumset-lemma", sumset_lemma),
    13: ("trig-density-lemma", trig_density_lemma),
    14: ("circle-shells", circle_shells),
    15: ("decoupling-slopes", decoupling_slopes),
    "a11-spike": ("a11-spike", a11_spike),
    "a11-seeds": ("a11-seeds", a11_seeds),
    "smallcap-16": ("smallcap-16", smallcap_16),
    "smallcap-stability": ("smallcap-stability", smallcap_stability),
}


def _run_criterion(key, ctx: VerifyContext, timing: bool) -> Dict[str, Any]:
    name, fn = CRITERIA[key]
    start = time.monotonic()
    try:
        record = {"id": key, "name": name}
        record.update(fn(ctx))
    except ResourceGuardError as e:
        if "elapsed" in e.details:
            raise
        record = {"id": key, "name": name, "passed": False}
        record.update(create_error_response("ResourceGuardError", e.message, e.exit_code, e.details))
    except LabError as e:
        record = {"id": key, "name": name, "passed": False}
        record.update(create_error_response(type(e).__name__, e.message, e.exit_code, e.details))
    if timing:
        record["seconds"] = round(time.monotonic() - start, 3)
    logger.info(f"判据 {key} ({name}): {'通过' if record['passed'] else '失败'}")
    return record


def suite_names(include_heavy: bool = False) -> List[str]:
    return [s["name"] for s in SuiteConfig.ALL if include_heavy or not s["heavy"]]


def run_suite(name: str, threads: Optional[int] = None, max_seconds: Optional[float] = None,
              seed: int = DEFAULT_SEED, beta: Optional[float] = None, timing: bool = False,
              emit: Optional[Callable[[str], None]] = None) -> Dict[str, Any]:
    """
    运行一个验收套件

    Args:
        name: 套件名称
        threads: 工作线程数
        max_seconds: 墙钟预算；重型套件的标称耗时超出预算时直接拒绝
        seed: 随机判据的种子
        beta: 注入 l4 判据的 β
        timing: 报告中是否记录耗时
        emit: 每个判据完成后接收一行摘要

    Returns:
        报告字典（schema_version, suite, passed, criteria）

    Raises:
        ResourceGuardError: 预算不足
    """
    if name not in SUITES:
        raise DomainError(f"未知套件: {name}，可选 {sorted(SUITES)}")
    suite = SUITES[name]
    if suite["heavy"] and max_seconds and suite["nominal_seconds"] > max_seconds:
        raise ResourceGuardError(
            f"套件 {name} 标称耗时 {suite['nominal_seconds']}s 超过预算 {max_seconds}s",
            nominal_seconds=suite["nominal_seconds"],
            max_seconds=max_seconds,
        )
    deadline = TimeoutManager(max_seconds)
    ctx = VerifyContext(WorkerPool(threads, deadline), seed, beta)
    logger.info(f"开始验收套件 {name}: 判据 {suite['criteria']}")
    records = []
    for key in suite["criteria"]:
        deadline.check(f"(判据 {key} 之前)")
        record = _run_criterion(key, ctx, timing)
        records.append(record)
        if emit:
            emit(f"[{'PASS' if record['passed'] else 'FAIL'}] {name} #{key} {record['name']}")
    report = {
        "schema_version": SCHEMA_VERSION,
        "suite": name,
        "seed": seed,
        "slope_threshold": SLOPE_THRESHOLD,
        "passed": all(r["passed"] for r in records),
        "criteria": records,
    }
    if timing:
        report["seconds"] = round(deadline.elapsed, 3)
    return report
