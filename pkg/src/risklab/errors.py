"""Exception types shared across the package."""


class RiskLabError(Exception):
    """Base class for all package errors."""


class DomainError(RiskLabError, ValueError):
    """A parameter lies outside the domain an operation accepts."""


class ContractError(RiskLabError, ValueError):
    """A caller-supplied object broke its contract (bad policy output, shape mismatch)."""


class OracleTooLargeError(RiskLabError, RuntimeError):
    """An exhaustive enumeration would exceed its configured cap."""
