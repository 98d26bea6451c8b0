# tables.py
"""
结果文件的读写

CSV 一律 UTF-8、LF 换行、`.` 小数点，浮点数用 %.17g 写出以保证可逐字节复现。
"""
import csv
import json
import logging
import math
import os
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from data.lab_settings import SCHEMA_VERSION
from lab.core import Coefficients
from lab.errors import DomainError

logger = logging.getLogger(__name__)

RESULT_COLUMNS = ("schema_version", "experiment", "d", "N", "p", "j",
                  "method", "value", "stderr", "seed", "wall_ms")


def format_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return "%.17g" % v
    return str(v)


def _open_for_write(path: str, mode: str):
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    return open(path, mode, encoding="utf-8", newline="")


def write_rows(path: str, columns: Sequence[str], rows: Iterable[Sequence[Any]], append: bool = False) -> int:
    """写出 CSV；append 时文件已有内容则不重复表头。返回写出的行数"""
    new_file = not append or not os.path.exists(path) or os.path.getsize(path) == 0
    count = 0
    with _open_for_write(path, "a" if append else "w") as f:
        writer = csv.writer(f, lineterminator="\n")
        if new_file:
            writer.writerow(columns)
        for row in rows:
            if len(row) != len(columns):
                raise DomainError(f"行长度 {len(row)} 与列数 {len(columns)} 不一致")
            writer.writerow([format_value(v) for v in row])
            count += 1
    return count


def read_rows(path: str) -> Tuple[List[str], List[List[str]]]:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                raise DomainError(f"{path} 为空")
            return header, [row for row in reader if row]
    except OSError as e:
        raise DomainError(f"无法读取 {path}: {e}")


# ---------------------------------------------------------------------------
# 实验结果
# ---------------------------------------------------------------------------

def result_row(experiment: str, value: float, stderr: float, method: str, *,
               d: Optional[int] = None, N: Optional[int] = None, p: Optional[float] = None,
               j: Optional[int] = None, seed: Optional[int] = None,
               wall_ms: Optional[float] = None) -> List[Any]:
    return [SCHEMA_VERSION, experiment, d, N, p, j, method, value, stderr, seed, wall_ms]


def append_results(path: str, rows: Iterable[Sequence[Any]]) -> int:
    """追加到结果 CSV（表头 schema_version,experiment,d,N,p,j,method,value,stderr,seed,wall_ms）"""
    n = write_rows(path, RESULT_COLUMNS, rows, append=True)
    logger.debug(f"追加 {n} 行到 {path}")
    return n


# ---------------------------------------------------------------------------
# 系数
# ---------------------------------------------------------------------------

def write_coefficients(path: str, a: Coefficients) -> int:
    """一维支撑集写成 `n,re,im`，多重指标写成 `n_1,…,n_k,re,im`"""
    if a.is_multi_index:
        k = a.support.shape[1]
        columns = [f"n_{i + 1}" for i in range(k)] + ["re", "im"]
        rows = [list(map(int, pt)) + [float(v.real), float(v.imag)] for pt, v in zip(a.support, a.values)]
    else:
        columns = ["n", "re", "im"]
        rows = [[int(n), float(v.real), float(v.imag)] for n, v in zip(a.support, a.values)]
    return write_rows(path, columns, rows)


def read_coefficients(path: str) -> Coefficients:
    header, rows = read_rows(path)
    if len(header) < 3 or header[-2:] != ["re", "im"]:
        raise DomainError(f"{path} 的表头应为 n,re,im 或 n_1,…,n_k,re,im")
    k = len(header) - 2
    try:
        support = [[int(v) for v in row[:k]] for row in rows]
        values = [complex(float(row[k]), float(row[k + 1])) for row in rows]
    except (ValueError, IndexError) as e:
        raise DomainError(f"{path} 解析失败: {e}")
    if not rows:
        raise DomainError(f"{path} 中没有系数")
    pts = np.asarray(support, dtype=np.int64)
    return Coefficients(pts[:, 0] if k == 1 else pts, values)


# ---------------------------------------------------------------------------
# σ̂ 表、格点与计数
# ---------------------------------------------------------------------------

def write_fourier_rows(path: str, d: int, rows: Sequence[Tuple[Sequence[int], complex]]) -> int:
    columns = [f"xi_{i + 1}" for i in range(d)] + ["re", "im", "abs"]
    return write_rows(path, columns,
                      [list(xi) + [v.real, v.imag, abs(v)] for xi, v in rows])


def write_shell(path: str, points: Sequence[Tuple[int, int]]) -> int:
    return write_rows(path, ["x", "y"], [list(pt) for pt in points])


def write_counts(path: str, key: str, counts: Mapping[Any, int]) -> int:
    """键值计数表；键为 None 的项写成 `zero`"""
    def order(k):
        return (-1, 0) if k is None else (0, k)

    return write_rows(path, [key, "count"],
                      [["zero" if k is None else k, v] for k, v in sorted(counts.items(), key=lambda kv: order(kv[0]))])


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def _json_safe(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


def dumps_report(payload: Dict[str, Any]) -> str:
    return json.dumps(_json_safe(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_report(path: str, payload: Dict[str, Any]) -> None:
    with _open_for_write(path, "w") as f:
        f.write(dumps_report(payload))
    logger.info(f"报告已写入 {path}")
