# errors.py
from typing import Any, Dict, Optional


class LabError(Exception):
    """实验室异常基类，携带命令行退出码"""

    exit_code = 1

    def __init__(self, message: str, **details: Any):
        self.message = message
        self.details = details
        super().__init__(message)


class DomainError(LabError):
    """参数不在定义域内（退出码 2）"""

    exit_code = 2


class ResourceGuardError(LabError):
    """资源限制拒绝执行（退出码 3）

    details 中记录所需规模，例如 required_counts、max_feasible_N、elapsed。
    """

    exit_code = 3


class UsageError(LabError):
    """命令行用法错误（退出码 64）"""

    exit_code = 64


def create_error_response(error_type: str, message: str, code: int,
                          details: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """创建错误记录，用于 verify 报告"""
    record = {
        "error": {
            "message": message,
            "type": error_type,
            "code": code,
        }
    }
    if details:
        record["error"]["details"] = details
    return record
