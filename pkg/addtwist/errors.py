"""Exception hierarchy for addtwist."""

from typing import Optional


class AddTwistError(Exception):
    """Base class for every error raised by addtwist."""


class DomainError(AddTwistError, ValueError):
    """An argument lies outside the domain of the operation."""


class NonInvertibleError(DomainError):
    """A residue has no inverse modulo the requested modulus."""

    def __init__(self, a: int, m: int):
        super().__init__(f"{a} is not invertible modulo {m}")
        self.a = a
        self.m = m


class SpecError(AddTwistError):
    """A form or eta-quotient specification string is malformed."""


class DataError(AddTwistError):
    """Coefficient data could not be parsed or is inconsistent."""

    def __init__(self, message: str, line: Optional[int] = None, n: Optional[int] = None):
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif n is not None:
            where = f" (at n={n})"
        super().__init__(f"{message}{where}")
        self.line = line
        self.n = n


class TruncationError(AddTwistError):
    """Stored coefficients are too short for the requested accuracy."""

    def __init__(self, message: str, required: int):
        super().__init__(f"{message}; at least {required} coefficients required")
        self.required = required


class PrecisionError(AddTwistError):
    """The requested tolerance is out of reach in double precision."""

    def __init__(self, message: str, suggestion: Optional[str] = None):
        text = message if suggestion is None else f"{message} ({suggestion})"
        super().__init__(text)
        self.suggestion = suggestion


class DependencyError(AddTwistError):
    """A contragredient series needed by the functional equation is missing."""

    def __init__(self, label: str):
        super().__init__(f"missing contragredient series for character {label}")
        self.label = label


class InvariantError(AddTwistError):
    """A computed quantity violates an invariant it must satisfy."""
