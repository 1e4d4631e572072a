"""Exception hierarchy. Every qmelab error carries an ErrorCode for the CLI exit contract."""
from __future__ import annotations

from .const import ErrorCode


class QmelabError(Exception):
    code: ErrorCode = ErrorCode.E_NUMERIC

    def __init__(self, message: str, code: ErrorCode | None = None) -> None:
        super().__init__(message)
        if code is not None:
            self.code = code

    def as_dict(self) -> dict:
        return {"code": self.code.value, "message": str(self)}


class ConfigError(QmelabError, ValueError):
    code = ErrorCode.E_CONFIG_SCHEMA


class DimensionError(ConfigError):
    code = ErrorCode.E_DIMENSION


class NumericError(QmelabError, ArithmeticError):
    code = ErrorCode.E_NUMERIC


class QuadratureError(NumericError):
    code = ErrorCode.E_QUADRATURE


class DegenerateKernelError(NumericError):
    code = ErrorCode.E_KERNEL_DEGENERATE
