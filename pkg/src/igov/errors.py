"""Error types shared across the parser, grounder and engines."""

from __future__ import annotations


class IgovError(Exception):
    """Base class for all tool errors."""


class IgovSyntaxError(IgovError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UnknownSymbolError(IgovError):
    pass


class ArityMismatchError(IgovError):
    pass


class UntypedVariableError(IgovError):
    pass


class TypeMismatchError(IgovError):
    pass


class EmptyTypeError(IgovError):
    pass


class ExplosionLimitError(IgovError):
    pass


class SemanticsUndefinedError(IgovError):
    """The specification hits a case where the semantics is partial.

    Examples: a violation forces a discharge of the same norm through event
    generation, or a derivation rule's output contradicts its own context.
    These indicate institution-design faults; we surface them rather than
    silently repairing.
    """

    def __init__(self, message: str, institution: str | None = None, instant: int | None = None):
        where = []
        if institution is not None:
            where.append(f"institution={institution}")
        if instant is not None:
            where.append(f"instant={instant}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.institution = institution
        self.instant = instant


class SemanticsAmbiguousError(SemanticsUndefinedError):
    """Two mutually exclusive state closures exist (multi-valued case)."""


class SearchBudgetExceededError(IgovError):
    pass


class NoSolutionWithinBoundsError(IgovError):
    pass


class IllegalEditError(IgovError):
    pass
