"""Exception types shared across the package."""


class TokmargError(Exception):
    """Base class for all package errors."""


class TokenizerFormatError(TokmargError):
    """Vocabulary or merges file is malformed or violates basic invariants."""


class UntokenizableSpanError(TokmargError):
    """A byte span has no valid tokenization under the vocabulary."""

    def __init__(self, span: bytes):
        self.span = span
        super().__init__(f"no valid tokenization exists for span {span!r}")


class EnumerationCapError(TokmargError):
    """Exact enumeration would exceed the configured tokenization cap."""

    def __init__(self, count: int, cap: int):
        self.count = count
        self.cap = cap
        super().__init__(f"tokenization count {count} exceeds cap {cap}")


class BackendError(TokmargError):
    """A scoring backend failed (transport error, bad response, bad ids)."""
