# cli.py
"""
命令行入口 `weyl`

子命令: eval, moment, surface-moment, kernel, fit, decoupling, count, shell, verify
退出码: 0 成功, 1 验收失败, 2 定义域错误, 3 资源限制, 64 用法错误
"""
import argparse
import logging
import sys
import time
from typing import Any, Dict, List, Optional, Sequence

from lab.config import RunConfig, settings
from lab.constructions import SequenceRecipe, q_box, smallcap_start
from lab.core import Coefficients, PhaseSystem, TorusBox, fit_loglog
from lab.counting import (
    cor_cip_sup,
    circle_lattice,
    arc_max_count,
    dyadic_pair_profile,
    even_moment_count,
    l4_failure_ratio,
    l4_kernel_sup,
    parab_kernel_bound,
    paraboloid_row_sup,
    sphere_l4_majorant,
    sumset,
)
from lab.errors import DomainError, LabError, UsageError
from lab.expsum import eval_point, paraboloid_coefficients
from lab.measures import DecayKernel, GraphSurface
from lab.moments import (
    ExperimentConfig,
    QuadratureSpec,
    STATEMENTS,
    box_moment,
    decoupling_ratio,
    exponent_fit_over_j,
    exponent_fit_over_N,
    kernel_moment,
    surface_moment,
)
from lab.runtime import TimeoutManager, WorkerPool
from lab.tables import append_results, result_row, write_counts, write_report, write_shell
from lab.verify import SUITES, run_suite, suite_names
from printstream import print_stream

logger = logging.getLogger(__name__)

# 出现在 RunConfig.params 中的参数
_PARAM_KEYS = ("d", "N", "p", "j", "l", "beta", "seq", "box", "quad", "x", "betas", "surface",
               "statement", "ladder", "over", "region", "quantity", "norm", "gamma", "form",
               "C", "D", "sumset", "suite")

_DEFAULTS: Dict[str, Any] = {
    "seq": "const",
    "box": "full",
    "quad": "auto",
    "over": "N",
    "region": "full",
    "quantity": "raw",
    "norm": "l2",
    "form": "moment",
    "l": 1,
    "beta": None,
}


class LabArgumentParser(argparse.ArgumentParser):
    """参数错误抛出 UsageError（退出码 64），而不是直接退出"""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"无法解析整数列表: {text}")


def _float_list(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"无法解析浮点数列表: {text}")


def build_parser() -> LabArgumentParser:
    common = LabArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON 配置文件，命令行参数优先")
    common.add_argument("--save-config", help="把本次解析后的配置写成 JSON")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="结果输出路径")
    common.add_argument("--threads", type=int, help="工作线程数（默认 WEYL_THREADS 或逻辑核数）")
    common.add_argument("--max-tuples", type=int)
    common.add_argument("--max-pairs", type=int)
    common.add_argument("--max-grid-points", type=int)
    common.add_argument("--max-seconds", type=float)
    common.add_argument("--timing", action="store_true", help="在结果中记录耗时")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = LabArgumentParser(prog="weyl", description="Weyl 和实验室")
    sub = parser.add_subparsers(dest="command", parser_class=LabArgumentParser)
    sub.required = True

    def add(name: str, help_text: str) -> LabArgumentParser:
        return sub.add_parser(name, parents=[common], help=help_text)

    def sequence_flags(p: LabArgumentParser):
        p.add_argument("--d", type=int)
        p.add_argument("--N", type=int)
        p.add_argument("--seq", help="序列配方 JSON 或简写（const, rademacher:7, smallcap:16, file:<path>）")
        p.add_argument("--betas", help="幂次系统指数，如 1,3,4（缺省为矩曲线 1..d）")

    p = add("eval", "计算 S(x)")
    sequence_flags(p)
    p.add_argument("--x", help="求值点，逗号分隔")

    p = add("moment", "盒子上的 L^p 矩")
    sequence_flags(p)
    p.add_argument("--p", type=float)
    p.add_argument("--j", type=int)
    p.add_argument("--box", help="full | dyadic:<j> | q:<c> | sides:<s1,…>[@<a1,…>]")
    p.add_argument("--quad", help="auto | exact | grid[:c1,c2,…] | mc[:samples]")

    p = add("surface-moment", "曲面测度上的 L^p 矩")
    sequence_flags(p)
    p.add_argument("--p", type=float)
    p.add_argument("--surface", help="square, bilinear-d3, d4, d5, general, flat, circle[:r]")
    p.add_argument("--quad")

    p = add("kernel", "核型与核和")
    sequence_flags(p)
    p.add_argument("--form", choices=["moment", "parab", "row-sup", "l4", "l4-fail", "cip"])
    p.add_argument("--lattice", choices=["paraboloid"], help="在抛物面格点上计算 kernel moment")
    p.add_argument("--l", type=int)
    p.add_argument("--j", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--C", type=float)
    p.add_argument("--D", type=float)

    p = add("fit", "标度指数拟合")
    sequence_flags(p)
    p.add_argument("--p", type=float)
    p.add_argument("--j", type=int)
    p.add_argument("--over", choices=["N", "j"])
    p.add_argument("--ladder", help="N 或 j 的阶梯，逗号分隔")
    p.add_argument("--region", choices=["full", "dyadic"])
    p.add_argument("--quantity", choices=["raw", "normalized", "conj3"])
    p.add_argument("--norm", choices=["l2", "l6", "l9"])
    p.add_argument("--quad")

    p = add("decoupling", "解耦命题的比值实验")
    p.add_argument("--statement", choices=sorted(STATEMENTS))
    p.add_argument("--N", type=int)
    p.add_argument("--ladder", help="多个 N 时拟合比值的增长斜率")
    p.add_argument("--seq")
    p.add_argument("--quad")

    p = add("count", "精确计数")
    p.add_argument("--vinogradov", action="store_true", help="∫|S|^{2l} 的精确计数")
    p.add_argument("--sumset", help="|lS − lS|，S 逗号分隔")
    p.add_argument("--shell-pairs", action="store_true", help="圆周格点差的二进分布 I_j")
    p.add_argument("--d", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--l", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--seq")
    p.add_argument("--betas")

    p = add("shell", "圆周格点")
    p.add_argument("--N", type=int)
    p.add_argument("--gamma", type=float, help="同时计算弧长 N^{γ/2} 上的最大格点数")
    p.add_argument("--no-endpoints", action="store_true")

    p = add("verify", "运行验收套件")
    p.add_argument("suite", nargs="?", help=f"{', '.join(SUITES)}（缺省为全部非重型套件）")
    p.add_argument("--heavy", action="store_true", help="缺省运行时包含重型套件")
    p.add_argument("--beta", type=float, help="注入 l4 判据的 β")

    return parser


# ---------------------------------------------------------------------------
# 参数解析辅助
# ---------------------------------------------------------------------------

def _resolve(args: argparse.Namespace) -> RunConfig:
    """命令行 > 配置文件 > 环境变量 > 默认值"""
    env = settings.run_defaults()
    base = RunConfig.from_file(args.config, env) if args.config else RunConfig(args.command, **env)
    if args.config and base.command != args.command:
        raise UsageError(f"配置文件的命令是 {base.command}，与 {args.command} 不一致")
    params = {k: getattr(args, k) for k in _PARAM_KEYS if hasattr(args, k) and getattr(args, k) is not None}
    for flag in ("vinogradov", "shell_pairs", "no_endpoints", "heavy", "lattice"):
        if getattr(args, flag, None):
            params[flag] = getattr(args, flag)
    config = base.merged(
        params=params,
        seed=args.seed,
        out=args.out,
        threads=args.threads,
        max_tuples=args.max_tuples,
        max_pairs=args.max_pairs,
        max_grid_points=args.max_grid_points,
        max_seconds=args.max_seconds,
    )
    for k, v in _DEFAULTS.items():
        config.params.setdefault(k, v)
    return config


def _require(params: Dict[str, Any], *keys: str) -> None:
    missing = [k for k in keys if params.get(k) is None]
    if missing:
        raise UsageError(f"缺少参数: {', '.join('--' + k for k in missing)}")


def _system(params: Dict[str, Any]) -> PhaseSystem:
    if params.get("betas"):
        sys_ = PhaseSystem.power_system(_int_list(params["betas"]))
        if params.get("d") is not None and params["d"] != sys_.d:
            raise DomainError(f"--betas 给出 {sys_.d} 个指数，与 --d {params['d']} 不一致")
        return sys_
    _require(params, "d")
    return PhaseSystem.moment_curve(params["d"])


def _coefficients(params: Dict[str, Any], lo: int = 1) -> Coefficients:
    _require(params, "N")
    recipe = SequenceRecipe.from_json(params["seq"])
    return recipe.realize(None if recipe.kind == "file" else (lo, params["N"]))


def _box(params: Dict[str, Any], d: int) -> TorusBox:
    spec = params["box"]
    if params.get("j") is not None and spec == "full":
        return TorusBox.dyadic(d, params["j"])
    kind, _, arg = spec.partition(":")
    if kind == "full":
        return TorusBox.full(d)
    if kind == "dyadic":
        return TorusBox.dyadic(d, int(arg))
    if kind == "q":
        _require(params, "N")
        return q_box(d, params["N"], float(arg) if arg else 1.0)
    if kind == "sides":
        sides, _, anchor = arg.partition("@")
        return TorusBox.from_sides(_float_list(sides), _float_list(anchor) if anchor else None)
    raise UsageError(f"无法解析 --box {spec}")


def _quad(config: RunConfig) -> QuadratureSpec:
    return QuadratureSpec.parse(
        config.params.get("quad"),
        seed=config.seed,
        max_grid_points=config.max_grid_points,
        max_tuples=config.max_tuples,
        max_pairs=config.max_pairs,
    )


def _format(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 2 ** 53 else "%.17g" % v


class _Run:
    """一次命令的执行上下文：线程池、计时与结果输出"""

    def __init__(self, config: RunConfig, timing: bool):
        self.config = config
        self.params = config.params
        self.timing = timing
        self.deadline = TimeoutManager(config.max_seconds)
        self.pool = WorkerPool(config.threads, self.deadline)
        self.start = time.monotonic()

    @property
    def wall_ms(self) -> Optional[float]:
        return round(1000.0 * (time.monotonic() - self.start), 3) if self.timing else None

    def emit(self, text: str) -> None:
        print_stream(text, flush=True)

    def record(self, rows: Sequence[Sequence[Any]]) -> None:
        if self.config.out:
            append_results(self.config.out, rows)


# ---------------------------------------------------------------------------
# 子命令
# ---------------------------------------------------------------------------

def cmd_eval(run: _Run) -> int:
    params = run.params
    _require(params, "x")
    sys_ = _system(params)
    a = _coefficients(params)
    value = eval_point(a, sys_, _float_list(params["x"]))
    run.emit(f"{value.real:.17g} {value.imag:.17g} {abs(value):.17g}")
    return 0


def cmd_moment(run: _Run) -> int:
    params = run.params
    _require(params, "p")
    sys_ = _system(params)
    a = _coefficients(params)
    box = _box(params, sys_.d)
    result = box_moment(a, sys_, box, params["p"], _quad(run.config), run.pool)
    run.emit(f"{_format(result.value)} ± {result.abs_error:.3g} ({result.method})")
    run.record([result_row("moment", result.value, result.abs_error, result.method,
                           d=sys_.d, N=params["N"], p=params["p"], j=params.get("j"),
                           seed=result.seed, wall_ms=run.wall_ms)])
    return 0


def cmd_surface_moment(run: _Run) -> int:
    params = run.params
    _require(params, "p", "surface")
    surface = GraphSurface.from_name(params["surface"], params.get("d"))
    params.setdefault("d", surface.d)
    sys_ = _system(params)
    a = _coefficients(params)
    result = surface_moment(a, sys_, surface, params["p"], _quad(run.config), run.pool)
    run.emit(f"{_format(result.value)} ± {result.abs_error:.3g} ({result.method})")
    run.record([result_row(f"surface-moment:{surface.describe()}", result.value, result.abs_error,
                           result.method, d=surface.d, N=params["N"], p=params["p"],
                           seed=result.seed, wall_ms=run.wall_ms)])
    return 0


def cmd_kernel(run: _Run) -> int:
    params = run.params
    form = params["form"]
    if form == "moment":
        _require(params, "beta", "N")
        if params.get("lattice") == "paraboloid":
            _require(params, "d")
            base, sys_ = paraboloid_coefficients(params["d"], params["N"])
            values = SequenceRecipe.from_json(params["seq"]).realize((1, base.size)).values
            a = Coefficients(base.support, values)
        else:
            sys_ = _system(params)
            a = _coefficients(params)
        value = kernel_moment(a, sys_, DecayKernel(params["beta"]), params["l"],
                              max_tuples=run.config.max_tuples, max_pairs=run.config.max_pairs, pool=run.pool)
        normalized = None
    elif form == "parab":
        _require(params, "d", "N")
        value, normalized = parab_kernel_bound(params["d"], params["N"], params.get("beta"),
                                               max_pairs=run.config.max_pairs, pool=run.pool)
    elif form == "row-sup":
        _require(params, "d", "N")
        value, normalized = paraboloid_row_sup(params["d"], params["N"], run.config.max_pairs)
    elif form == "l4":
        _require(params, "N", "beta")
        value, normalized = l4_kernel_sup(params["N"], params["beta"], run.pool, run.config.max_pairs), None
    elif form == "l4-fail":
        _require(params, "j", "beta")
        value, normalized = l4_failure_ratio(params["j"], params["beta"], run.config.max_pairs), None
    else:
        _require(params, "C", "D", "beta")
        result = cor_cip_sup(params["C"], params["D"], params["beta"])
        value, normalized = result.sup, params["D"] ** (params["beta"] - 0.5) * result.sup
    line = _format(value) if normalized is None else f"{_format(value)} (normalized {normalized:.17g})"
    run.emit(line)
    run.record([result_row(f"kernel:{form}", value, 0.0, "exact-kernel", d=params.get("d"),
                           N=params.get("N"), j=params.get("j"), wall_ms=run.wall_ms)])
    return 0


def cmd_fit(run: _Run) -> int:
    params = run.params
    _require(params, "d", "p", "ladder")
    recipe = SequenceRecipe.from_json(params["seq"])
    config = ExperimentConfig(params["d"], params["p"], recipe, region=params["region"],
                              quantity=params["quantity"], norm=params["norm"],
                              j=params.get("j") or 0, quad=_quad(run.config))
    ladder = _int_list(params["ladder"])
    if params["over"] == "N":
        fit, results = exponent_fit_over_N(config, ladder, run.pool)
    else:
        _require(params, "N")
        if params["region"] != "dyadic":
            raise UsageError("--over j 需要 --region dyadic")
        fit, results = exponent_fit_over_j(config, params["N"], ladder, run.pool)
    run.emit(f"slope {fit.slope:.17g} ± {fit.slope_stderr:.3g}")
    rows = [result_row(f"fit-point:{params['over']}", r.value, r.abs_error, r.method, d=params["d"],
                       N=r.N, p=params["p"], j=r.extra.get("j"), seed=r.seed) for r in results]
    rows.append(result_row(f"fit-slope:{params['over']}", fit.slope, fit.slope_stderr, results[0].method,
                           d=params["d"], p=params["p"], seed=run.config.seed, wall_ms=run.wall_ms))
    run.record(rows)
    return 0


def cmd_decoupling(run: _Run) -> int:
    params = run.params
    _require(params, "statement")
    if params.get("ladder"):
        Ns = _int_list(params["ladder"])
    else:
        _require(params, "N")
        Ns = [params["N"]]
    quad = QuadratureSpec.parse(params.get("quad") if params.get("quad") != "auto" else "mc",
                                seed=run.config.seed, max_grid_points=run.config.max_grid_points)
    recipe = SequenceRecipe.from_json(params["seq"])
    rows, ratios = [], []
    for N in Ns:
        a = recipe.realize((smallcap_start(N), N)) if recipe.kind != "file" else recipe.realize()
        r = decoupling_ratio(params["statement"], N, a, quad, run.pool)
        ratios.append(r.ratio)
        run.emit(f"{params['statement']} N={N}: ratio {r.ratio:.17g} ± {r.ratio_stderr:.3g}")
        rows.append(result_row(f"decoupling:{params['statement']}", r.ratio, r.ratio_stderr, "mc",
                               N=N, p=STATEMENTS[params["statement"]].p, seed=r.seed))
    if len(Ns) >= 2:
        fit = fit_loglog(Ns, ratios)
        run.emit(f"slope {fit.slope:.17g} ± {fit.slope_stderr:.3g}")
        rows.append(result_row(f"decoupling-slope:{params['statement']}", fit.slope, fit.slope_stderr,
                               "mc", seed=run.config.seed, wall_ms=run.wall_ms))
    run.record(rows)
    return 0


def cmd_count(run: _Run) -> int:
    params = run.params
    if params.get("vinogradov"):
        _require(params, "l")
        sys_ = _system(params)
        a = _coefficients(params)
        value = even_moment_count(a, sys_, params["l"], run.config.max_tuples, run.pool)
        run.emit(_format(value))
        run.record([result_row("count:vinogradov", value, 0.0, "exact-count", d=sys_.d,
                               N=params["N"], p=2 * params["l"], wall_ms=run.wall_ms)])
        return 0
    if params.get("sumset"):
        _, size = sumset(_int_list(params["sumset"]), params["l"], run.config.max_tuples)
        run.emit(str(size))
        return 0
    if params.get("shell_pairs"):
        _require(params, "N")
        profile = dyadic_pair_profile(params["N"], max_pairs=run.config.max_pairs)
        for key in sorted(profile, key=lambda k: -1 if k is None else k):
            run.emit(f"{'zero' if key is None else key} {profile[key]}")
        if params.get("beta") is not None:
            run.emit(f"majorant {sphere_l4_majorant(params['N'], params['beta'], max_pairs=run.config.max_pairs):.17g}")
        if run.config.out:
            write_counts(run.config.out, "j", profile)
        return 0
    raise UsageError("count 需要 --vinogradov、--sumset 或 --shell-pairs 之一")


def cmd_shell(run: _Run) -> int:
    params = run.params
    _require(params, "N")
    shell = circle_lattice(params["N"], include_endpoints=not params.get("no_endpoints"))
    run.emit(str(shell.size))
    if params.get("gamma") is not None:
        run.emit(f"arc_max {arc_max_count(params['N'], params['gamma'], shell)}")
    if run.config.out:
        write_shell(run.config.out, shell.points)
    return 0


def cmd_verify(run: _Run) -> int:
    params = run.params
    names = [params["suite"]] if params.get("suite") else suite_names(bool(params.get("heavy")))
    for name in names:
        if name not in SUITES:
            raise UsageError(f"未知套件: {name}，可选 {', '.join(SUITES)}")
    ok = True
    for name in names:
        report = run_suite(name, run.config.threads, run.config.max_seconds, run.config.seed,
                           params.get("beta"), run.timing,
                           emit=lambda line: print_stream(line))
        path = run.config.out if run.config.out and len(names) == 1 else f"verify-{name}.json"
        write_report(path, report)
        ok = ok and report["passed"]
    print_stream(f"verify: {'PASS' if ok else 'FAIL'}", flush=True)
    return 0 if ok else 1


HANDLERS = {
    "eval": cmd_eval,
    "moment": cmd_moment,
    "surface-moment": cmd_surface_moment,
    "kernel": cmd_kernel,
    "fit": cmd_fit,
    "decoupling": cmd_decoupling,
    "count": cmd_count,
    "shell": cmd_shell,
    "verify": cmd_verify,
}


def _log_level(verbose: int) -> int:
    if verbose >= 2:
        return logging.DEBUG
    if verbose == 1:
        return logging.INFO
    return getattr(logging, settings.log_level, logging.WARNING)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """解析参数并执行子命令，返回退出码"""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        logging.getLogger().setLevel(_log_level(args.verbose))
        config = _resolve(args)
        if args.save_config:
            with open(args.save_config, "w", encoding="utf-8", newline="\n") as f:
                f.write(config.to_json() + "\n")
        logger.info(f"运行 {config.command}: {config.params}")
        code = HANDLERS[config.command](_Run(config, args.timing))
        logger.info(f"{config.command} 完成")
        return code
    except LabError as e:
        logger.error(f"{type(e).__name__}: {e.message}")
        sys.stderr.write(f"错误: {e.message}\n")
        return e.exit_code
    except SystemExit as e:
        # --help
        return int(e.code or 0)
