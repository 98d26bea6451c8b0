# 实验室默认参数
# 环境变量（见 lab/config.py）可以覆盖其中的资源限制

# 输出文件格式版本
SCHEMA_VERSION = 1

# "≲_ε N^ε" 的数值化：拟合斜率阈值
SLOPE_THRESHOLD = 0.2

# 资源限制
MAX_TUPLES = 10**8
MAX_PAIRS = 10**8
MAX_GRID_POINTS = 2 * 10**8
MAX_SECONDS = 0.0  # 0 表示不限时
MAX_PHASE_BITS = 120

# 求积参数
GAUSS_ORDER = 8
PANEL_SAFETY = 4
MC_MIN_SAMPLES = 1000
MC_DEFAULT_SAMPLES = 1 << 14
BLOCK_SIZE = 4096

# 默认随机种子
DEFAULT_SEED = 20240607

# 圆周格点是否包含 y=0 的两个端点
SHELL_INCLUDE_ENDPOINTS = True

# 贝塞尔函数幂级数与渐近展开的切换点
BESSEL_SERIES_CUTOFF = 12.0


class SuiteConfig:
    """验收套件配置 - 名称、是否重型、标称耗时（秒）"""

    CORE = {
        "name": "core",
        "heavy": False,
        "nominal_seconds": 300,
        "criteria": [1, 2, 3, 4, 5, 10, 11, 12, 13],
    }

    PARABOLOID = {
        "name": "paraboloid",
        "heavy": False,
        "nominal_seconds": 180,
        "criteria": [6, 7],
    }

    L4 = {
        "name": "l4",
        "heavy": False,
        "nominal_seconds": 600,
        "criteria": [8, 9],
    }

    SPHERE = {
        "name": "sphere",
        "heavy": False,
        "nominal_seconds": 60,
        "criteria": [14],
    }

    DECOUPLING_LIGHT = {
        "name": "decoupling-light",
        "heavy": False,
        "nominal_seconds": 300,
        "criteria": ["a11-spike", "a11-seeds", "smallcap-16", "smallcap-stability"],
    }

    DECOUPLING_HEAVY = {
        "name": "decoupling-heavy",
        "heavy": True,
        "nominal_seconds": 1800,
        "criteria": [15],
    }

    # 默认 verify 顺序
    ALL = [CORE, PARABOLOID, L4, SPHERE, DECOUPLING_LIGHT, DECOUPLING_HEAVY]
