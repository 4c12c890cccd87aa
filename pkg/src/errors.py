"""错误类型定义

命令行按类型映射退出码：配置错误 2，数据错误 3，数值失败 4。
"""


class SeparationError(Exception):
    """分离工具包的基础异常"""
    exit_code: int = 1


class ConfigError(SeparationError, ValueError):
    """配置无效（未知字段、取值越界、参数组合矛盾）"""
    exit_code = 2


class DataError(SeparationError, ValueError):
    """输入数据无效（空数据、格式不支持、尺度退化）"""
    exit_code = 3


class DomainError(DataError):
    """参数超出数学定义域，如 alpha 不在 (0, 2]"""


class ShapeError(DataError):
    """维度不匹配"""


class NumericalError(SeparationError, ArithmeticError):
    """数值计算失败（目标函数非有限、所有重启都塌缩）"""
    exit_code = 4
