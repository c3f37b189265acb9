"""Exception types shared across the toolkit."""

from __future__ import annotations


class SikoError(Exception):
    """Base class for all toolkit errors."""


class NotHangul(SikoError, ValueError):
    pass


class EmptyInput(SikoError, ValueError):
    pass


class UnknownRole(SikoError, KeyError):
    pass


class BadParams(SikoError, ValueError):
    pass


class BadRatio(BadParams):
    pass


class StemMismatch(SikoError, ValueError):
    """Incomplete and restored sentences do not share a stem sequence."""

    def __init__(self, incomplete: list[str], restored: list[str]):
        self.incomplete = incomplete
        self.restored = restored
        super().__init__(f"stem sequences differ: {incomplete!r} vs {restored!r}")


class ParseError(SikoError, ValueError):
    def __init__(self, path: str, line: int, offset: int, msg: str):
        self.path = path
        self.line = line
        self.offset = offset
        super().__init__(f"{path}:{line}:{offset}: {msg}")


class SchemaError(SikoError, ValueError):
    def __init__(self, field: str, where: str = ""):
        self.field = field
        suffix = f" ({where})" if where else ""
        super().__init__(f"missing field {field!r}{suffix}")


class Unlabeled(SikoError, ValueError):
    pass


class TooFew(SikoError, ValueError):
    pass


class TransportFailed(SikoError):
    pass


class AugmentError(SikoError):
    """One or more records failed to transform; carries every failure."""

    def __init__(self, failures: list[tuple[str, str]]):
        self.failures = failures
        super().__init__(f"{len(failures)} record(s) failed to transform")
