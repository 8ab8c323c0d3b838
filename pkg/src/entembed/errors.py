"""Exception types shared across the package."""


class EntembedError(Exception):
    """Base class for errors raised by entembed."""


class RuleSyntaxError(EntembedError):
    """Rule text that violates the grammar; carries the offending position."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, col {column}: {message}")
        self.line = line
        self.column = column


class ExtractionError(EntembedError):
    """Rule facts that cannot be turned into a valid entity state."""


class DataFormatError(EntembedError):
    """Malformed dataset, symbol-table, or weight-document content."""


class NumericError(EntembedError):
    """Non-finite values where finite arithmetic was required."""
