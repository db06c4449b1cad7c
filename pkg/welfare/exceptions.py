from typing import Any, Dict, List, Optional, Tuple


class WelfareError(Exception):
    """Base exception for all welfare library errors."""
    pass


class ModelError(WelfareError):
    """An oracle was queried outside its domain or broke its own contract."""
    pass


class PreconditionError(WelfareError):
    """An operation's stated precondition does not hold for the given input."""
    pass


class ConstructionError(WelfareError):
    """
    Raised when a mechanism table cannot be extended.

    Carries the budget pair being built and the endpoint utilities so the
    offending model state can be reproduced.
    """

    def __init__(self, message: str, state: Optional[Dict[str, Any]] = None) -> None:
        super().__init__(message)
        self.state: Dict[str, Any] = state or {}


class EnumerationCapExceeded(WelfareError):
    """An exhaustive enumeration would exceed its configured cap."""

    def __init__(self, what: str, count: int, cap: int) -> None:
        super().__init__(f"{what}: {count} candidates exceed the cap of {cap}")
        self.count = count
        self.cap = cap


class InstanceFormatError(WelfareError):
    """An instance or table file could not be parsed."""

    def __init__(self, source: str, diagnostics: List[Tuple[str, str]]) -> None:
        details = "; ".join(f"{where}: {message}" for where, message in diagnostics)
        super().__init__(f"{source}: {details}")
        self.source = source
        self.diagnostics = diagnostics


class FixtureError(WelfareError):
    """Unknown fixture or repro case, or a parameter outside its stated range."""
    pass
