"""
配置文件
"""
import os

from dotenv import load_dotenv

# 加载环境变量（.env 可覆盖输出目录与日志级别）
load_dotenv()

# 项目根目录
BASE_DIR = os.path.dirname(os.path.abspath(__file__))

# 输出目录
RESULTS_DIR = os.getenv('MIXED_NS_RESULTS_DIR', os.path.join(BASE_DIR, 'results'))
LOG_DIR = os.getenv('MIXED_NS_LOG_DIR', os.path.join(BASE_DIR, 'logs'))
LOG_LEVEL = os.getenv('MIXED_NS_LOG_LEVEL', 'INFO')

# ============ 几何配置 ============
CORNER_ANGLE_DEG = 75.0       # 转角超过该值的边界顶点视为角点
FRAME_TOL = 1e-12             # 法向/切向单位性检查容差
CHANNEL_LENGTH = 2.0          # 通道长度（高度为1）
ANNULUS_INNER_RADIUS = 0.5    # 圆环内半径（外半径为1）
FLAT_CURVATURE_TOL = 1e-12    # 曲率小于该值视为平直边界

# ============ 数值积分 ============
# 体积分：6点4阶三角形公式；边界积分：每条边3点Gauss公式
TRIANGLE_QUAD_ORDER = 4
EDGE_QUAD_POINTS = 3

# ============ 边界恒等式验证 ============
IDENTITY_SAMPLES = 64
HYPOTHESIS_TOL = 1e-10
FIELD_SELF_CHECK_TOL = 1e-6

# ============ 约束 ============
CONSTRAINT_PARALLEL_TOL = 1e-8   # 两个约束方向的叉积小于该值视为平行
CONSTRAINT_CONSISTENCY_TOL = 1e-10

# ============ 提升场 ============
FLUX_TOL = 1e-8               # 净通量相对容差
INITIAL_COMPAT_TOL = 1e-8     # v0 与提升场初值在 Γ₁ 上的差

# ============ 强制性（Korn常数与平移常数） ============
SHIFT_SAFETY = 1e-6           # 平移常数的安全余量
DENSE_EIG_LIMIT = 1500        # 约化自由度不超过该值时使用稠密特征值求解
EIG_TOL = 1e-8
EIG_MAX_ITERS = 2000
RIGID_MODE_TOL = 1e-8         # korn_beta / nu 小于该值判定存在刚体模态
EIG_SEED = 20240101

# ============ 时间推进 ============
PICARD_TOL = 1e-10
MAX_PICARD_ITERS = 50
PICARD_GROWTH_LIMIT = 5       # 残差连续增长次数上限
LINEAR_TOL = 1e-12
DEFAULT_SCHEME = 'implicit_euler'

# ============ 相容性检查 ============
COMPAT_IN_H_SLOPE = 0.1
COMPAT_NOT_IN_H_SLOPE = 0.4
COMPAT_MIN_LEVELS = 3

# ============ 输出格式 ============
CSV_FLOAT_FORMAT = '%.12e'
SNAPSHOT_FLOAT_FORMAT = '%.16e'

# ============ 退出码 ============
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_MESH = 3
EXIT_HYPOTHESIS = 4
EXIT_ASSEMBLY = 5
EXIT_COERCIVITY = 6
EXIT_FLUX = 10
EXIT_PICARD = 11
EXIT_COMPAT = 12
