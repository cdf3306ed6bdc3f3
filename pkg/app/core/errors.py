"""Exception hierarchy shared by every polariton-lab service."""

from typing import List, Optional


class PolaritonLabError(Exception):
    """Base error; `operation` names the failing "module.op" for the CLI."""

    def __init__(self, message: str, operation: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.operation = operation

    def __str__(self) -> str:
        if self.operation:
            return f"{self.operation}: {self.message}"
        return self.message


class InvalidParameterError(PolaritonLabError, ValueError):
    """One or more parameter invariants are violated."""

    def __init__(self, errors: List[str] | str, operation: Optional[str] = None):
        self.errors = [errors] if isinstance(errors, str) else list(errors)
        super().__init__("; ".join(self.errors), operation)


class PoleCollisionError(PolaritonLabError):
    """The Laplace point sits on an emitter pole -iE_j."""

    def __init__(self, index: Optional[int], z: complex, operation: Optional[str] = None):
        self.index = index
        self.z = z
        where = f"emitter j={index}" if index is not None else "an averaged pole"
        super().__init__(f"z={z} collides with the pole of {where}", operation)


class ContractError(PolaritonLabError):
    """Unsupported site pair, argument shape or configuration combination."""


class SizeGuardError(PolaritonLabError):
    """A dense computation was requested beyond the configured size guard."""


class DomainError(PolaritonLabError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class ValidityError(PolaritonLabError):
    """An asymptotic form was requested outside its validity window."""


class DegenerateBreakdownError(PolaritonLabError):
    """First-order root correction has a vanishing denominator."""

    def __init__(self, root_index: int, operation: Optional[str] = None):
        self.root_index = root_index
        super().__init__(f"vanishing denominator for root index {root_index}", operation)


class FitError(PolaritonLabError):
    """The single-pole rate fit could not be evaluated."""


class ConfigError(PolaritonLabError):
    """Run configuration could not be parsed or merged."""

    def __init__(
        self,
        message: str,
        line: Optional[int] = None,
        column: Optional[int] = None,
        operation: Optional[str] = "cli.load_config",
    ):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message, operation)
