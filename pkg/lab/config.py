# config.py
import json
import logging
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Dict, Optional

from dotenv import load_dotenv

from data.lab_settings import (
    DEFAULT_SEED,
    MAX_GRID_POINTS,
    MAX_PAIRS,
    MAX_SECONDS,
    MAX_TUPLES,
)
from lab.errors import DomainError

load_dotenv()

logger = logging.getLogger(__name__)


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return int(float(raw))
    except ValueError:
        logger.warning(f"环境变量 {name}={raw!r} 无法解析，使用默认值 {default}")
        return default


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return float(raw)
    except ValueError:
        logger.warning(f"环境变量 {name}={raw!r} 无法解析，使用默认值 {default}")
        return default


@dataclass(frozen=True)
class LabSettings:
    """运行时设置：data 默认值叠加 .env / 环境变量"""

    threads: int
    max_tuples: int
    max_pairs: int
    max_grid_points: int
    max_seconds: float
    log_level: str

    @classmethod
    def from_env(cls) -> "LabSettings":
        return cls(
            threads=max(1, _env_int("WEYL_THREADS", os.cpu_count() or 1)),
            max_tuples=_env_int("WEYL_MAX_TUPLES", MAX_TUPLES),
            max_pairs=_env_int("WEYL_MAX_PAIRS", MAX_PAIRS),
            max_grid_points=_env_int("WEYL_MAX_GRID_POINTS", MAX_GRID_POINTS),
            max_seconds=_env_float("WEYL_MAX_SECONDS", MAX_SECONDS),
            log_level=os.getenv("WEYL_LOG_LEVEL", "WARNING").upper(),
        )

    def run_defaults(self) -> Dict[str, Any]:
        """RunConfig 中可由环境变量决定的字段"""
        return {"threads": self.threads, "max_tuples": self.max_tuples, "max_pairs": self.max_pairs,
                "max_grid_points": self.max_grid_points, "max_seconds": self.max_seconds}


@dataclass
class RunConfig:
    """一次运行的完整配置，可序列化为 JSON 以便复现"""

    command: str
    params: Dict[str, Any] = field(default_factory=dict)
    seed: int = DEFAULT_SEED
    out: Optional[str] = None
    threads: int = 1
    max_tuples: int = MAX_TUPLES
    max_pairs: int = MAX_PAIRS
    max_grid_points: int = MAX_GRID_POINTS
    max_seconds: float = MAX_SECONDS

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, text: str, defaults: Optional[Dict[str, Any]] = None) -> "RunConfig":
        """文件中缺少的字段取 defaults（通常为环境设置）"""
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise DomainError(f"配置 JSON 解析失败: {e}")
        if not isinstance(raw, dict) or "command" not in raw:
            raise DomainError("配置 JSON 必须是包含 command 的对象")
        known = {k: raw[k] for k in raw if k in cls.__dataclass_fields__}
        return cls(**{**(defaults or {}), **known})

    @classmethod
    def from_file(cls, path: str, defaults: Optional[Dict[str, Any]] = None) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_json(f.read(), defaults)
        except OSError as e:
            raise DomainError(f"无法读取配置文件 {path}: {e}")

    def merged(self, **overrides: Any) -> "RunConfig":
        """返回以 overrides 中非 None 的字段覆盖后的副本"""
        clean = {k: v for k, v in overrides.items() if v is not None}
        params = dict(self.params)
        params.update(clean.pop("params", {}) or {})
        return replace(self, params=params, **clean)


settings = LabSettings.from_env()
