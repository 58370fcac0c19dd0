"""错误定义模块"""
from __future__ import annotations

from typing import Any, Optional
from pydantic import BaseModel, Field


class ExitCode:
    """命令行退出码"""
    SUCCESS = 0
    CONFIG_ERROR = 1
    DATA_ERROR = 2
    NUMERICAL_ERROR = 3


class ErrorCode:
    """错误码定义"""
    # 通用错误
    SUCCESS = (0, "成功")
    INTERNAL_ERROR = (1000, "内部错误")

    # 配置相关错误
    INVALID_CONFIG = (1100, "配置无效")

    # 数据相关错误
    NON_POSITIVE_PRICE = (2000, "价格必须为正")
    UNALIGNED_DATES = (2001, "日期必须严格递增")
    BASKET_TOO_LARGE = (2002, "篮子大小超过资产数量")
    INVALID_SYNTHETIC_SPEC = (2003, "合成数据参数无效")
    ZERO_VARIANCE = (2004, "资产收益率方差为零")
    EMPTY_PANEL = (2005, "数据面板为空")
    DIMENSION_MISMATCH = (2006, "维度不匹配")
    TOO_FEW_VERTICES = (2007, "TMFG至少需要4个顶点")
    ONE_CLASS_LABELS = (2008, "标签只包含一个类别")
    WINDOW_TOO_LONG = (2009, "窗口长度超过观测数")

    # 数值相关错误
    SINGULAR_CLIQUE = (3000, "团协方差矩阵奇异")
    PRECISION_NOT_PD = (3001, "精度矩阵非正定")
    EMPTY_CLUSTER = (3002, "聚类多次重置后仍为空")
    SINGULAR_COVARIANCE = (3003, "样本协方差矩阵奇异")
    DEGENERATE_COMPONENT = (3004, "混合模型分量退化")
    ALL_FITS_FAILED = (3005, "所有拟合均失败")


class ErrorDetail(BaseModel):
    """错误详情模型"""
    code: int = Field(..., description="错误码")
    message: str = Field(..., description="错误消息")
    detail: Optional[Any] = Field(None, description="详细错误信息")
    field: Optional[str] = Field(None, description="错误字段")


class BaseErrorException(Exception):
    """基础错误异常"""

    exit_code: int = ExitCode.NUMERICAL_ERROR

    def __init__(
        self,
        error_code: tuple[int, str],
        detail: Any = None,
        field: str = None,
    ):
        self.error_code = error_code[0]
        self.error_message = error_code[1]
        self.detail = detail
        self.field = field
        super().__init__(self.one_line())

    def to_detail(self) -> ErrorDetail:
        return ErrorDetail(
            code=self.error_code,
            message=self.error_message,
            detail=self.detail,
            field=self.field,
        )

    def one_line(self) -> str:
        text = f"error[{self.error_code}] {self.error_message}"
        if self.detail is not None:
            text += f": {self.detail}"
        return text.replace("\n", " ")


class ConfigErrorException(BaseErrorException):
    """配置错误（退出码1）"""
    exit_code = ExitCode.CONFIG_ERROR


class DataErrorException(BaseErrorException):
    """数据错误（退出码2）"""
    exit_code = ExitCode.DATA_ERROR


class NumericalErrorException(BaseErrorException):
    """数值计算失败（退出码3）"""
    exit_code = ExitCode.NUMERICAL_ERROR


class InternalErrorException(NumericalErrorException):
    """内部错误"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.INTERNAL_ERROR, detail=detail)


class InvalidConfigException(ConfigErrorException):
    """配置无效"""
    def __init__(self, detail: Any = None, field: str = None):
        super().__init__(ErrorCode.INVALID_CONFIG, detail=detail, field=field)


class NonPositivePriceException(DataErrorException):
    """价格非正"""
    def __init__(self, date: Any, ticker: str):
        self.date = date
        self.ticker = ticker
        super().__init__(ErrorCode.NON_POSITIVE_PRICE, detail=f"date={date}, ticker={ticker}", field=ticker)


class UnalignedDatesException(DataErrorException):
    """日期未对齐"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.UNALIGNED_DATES, detail=detail)


class BasketTooLargeException(DataErrorException):
    """篮子过大"""
    def __init__(self, m: int, n: int):
        super().__init__(ErrorCode.BASKET_TOO_LARGE, detail=f"m={m} > n={n}")


class InvalidSyntheticSpecException(DataErrorException):
    """合成数据参数无效"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.INVALID_SYNTHETIC_SPEC, detail=detail)


class ZeroVarianceException(DataErrorException):
    """零方差资产"""
    def __init__(self, ticker: str):
        self.ticker = ticker
        super().__init__(ErrorCode.ZERO_VARIANCE, detail=f"ticker={ticker}", field=ticker)


class EmptyPanelException(DataErrorException):
    """数据面板为空"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.EMPTY_PANEL, detail=detail)


class DimensionMismatchException(DataErrorException):
    """维度不匹配"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.DIMENSION_MISMATCH, detail=detail)


class TooFewVerticesException(DataErrorException):
    """顶点数不足"""
    def __init__(self, n: int):
        super().__init__(ErrorCode.TOO_FEW_VERTICES, detail=f"n={n}")


class OneClassLabelsException(DataErrorException):
    """单一类别标签"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.ONE_CLASS_LABELS, detail=detail)


class WindowTooLongException(DataErrorException):
    """窗口过长"""
    def __init__(self, delta: int, T: int):
        super().__init__(ErrorCode.WINDOW_TOO_LONG, detail=f"delta={delta} > T={T}")


class SingularCliqueException(NumericalErrorException):
    """团协方差奇异"""
    def __init__(self, clique: tuple[int, ...]):
        self.clique = tuple(int(v) for v in clique)
        super().__init__(ErrorCode.SINGULAR_CLIQUE, detail=f"clique={list(self.clique)}")


class PrecisionNotPositiveDefiniteException(NumericalErrorException):
    """精度矩阵非正定"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.PRECISION_NOT_PD, detail=detail)


class EmptyClusterException(NumericalErrorException):
    """聚类为空"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.EMPTY_CLUSTER, detail=detail)


class SingularCovarianceException(NumericalErrorException):
    """样本协方差奇异"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.SINGULAR_COVARIANCE, detail=detail)


class DegenerateComponentException(NumericalErrorException):
    """混合分量退化"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.DEGENERATE_COMPONENT, detail=detail)


class AllFitsFailedException(NumericalErrorException):
    """所有拟合失败"""
    def __init__(self, detail: Any = None):
        super().__init__(ErrorCode.ALL_FITS_FAILED, detail=detail)
