"""Exception hierarchy.

Every data or user error raised by the library derives from
:class:`MoonvolError`, itself a :class:`ValueError`, so callers can catch
one type at the CLI boundary.
"""


class MoonvolError(ValueError):
    """Base class for all data/user errors."""


class ParseError(MoonvolError):
    """Malformed input record. ``line`` is 1-based (header is line 1)."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"{message} at line {line}"
        super().__init__(message)


class InvariantError(ParseError):
    """A parsed record violates a domain invariant (e.g. high < low)."""


class DuplicateDateError(ParseError):
    pass


class LeadingGapError(MoonvolError):
    def __init__(self, date):
        self.date = date
        super().__init__(f"no value available on or before trading day {date.isoformat()}")


class DegenerateBarError(MoonvolError):
    """Composite variance is not strictly positive, so its log is undefined."""


class ZeroActivityError(MoonvolError):
    pass


class EmptyTableError(MoonvolError):
    pass


class DegenerateRangeError(MoonvolError):
    pass


class DegenerateColumnError(MoonvolError):
    pass


class InsufficientDataError(MoonvolError):
    pass


class CollinearityError(MoonvolError):
    def __init__(self, message, columns=()):
        self.columns = tuple(columns)
        super().__init__(message)


class InfeasibleScenarioError(MoonvolError):
    pass


class LexiconError(MoonvolError):
    pass
