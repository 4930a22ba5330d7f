"""Run configuration, environment defaults and logging setup."""

import logging
import os
from fractions import Fraction
from pathlib import Path
from typing import Literal, Optional, Union

from pydantic import BaseModel, Field, field_validator, model_validator

from addtwist.averages import LIMIT_TOL
from addtwist.errors import DomainError
from addtwist.forms import SeriesSource, parse_form

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
HANDLER_NAME = "addtwist"
DEFAULT_FORM = "bundled:11a"


def configure_logging(level: Union[str, int] = "WARNING") -> logging.Logger:
    """Attach one stream handler to the ``addtwist`` logger."""
    logger = logging.getLogger("addtwist")
    if isinstance(level, str):
        level = level.upper()
    logger.setLevel(level)
    if not any(h.get_name() == HANDLER_NAME for h in logger.handlers):
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter(LOG_FORMAT))
        handler.set_name(HANDLER_NAME)
        logger.addHandler(handler)
    return logger


def parse_x(text: Union[str, float, Fraction]) -> Fraction:
    """Read x as ``p/q`` or a decimal and check 0 <= x <= 1."""
    try:
        x = Fraction(text) if not isinstance(text, float) else Fraction(str(text))
    except (ValueError, ZeroDivisionError) as e:
        raise DomainError(f"cannot read x from {text!r}: {e}") from e
    if not 0 <= x <= 1:
        raise DomainError(f"x must lie in [0, 1], got {text}")
    return x


def parse_int_list(text: str) -> list[int]:
    return [int(part) for part in text.replace(" ", "").split(",") if part]


def parse_float_list(text: str) -> list[float]:
    return [float(part) for part in text.replace(" ", "").split(",") if part]


class Settings(BaseModel):
    """Defaults taken from ADDTWIST_* environment variables."""

    tol: float = Field(default=1e-6, gt=0, description="Default tolerance for verification sweeps")
    log_level: str = Field(default="WARNING", description="Log level for the addtwist logger")
    jobs: int = Field(default=1, ge=1, description="Worker processes for independent tasks")

    @classmethod
    def from_env(cls) -> "Settings":
        values = {}
        for name in ("tol", "log_level", "jobs"):
            raw = os.getenv(f"ADDTWIST_{name.upper()}")
            if raw:
                values[name] = raw
        return cls(**values)


class RunConfig(BaseModel):
    """Validated parameters of one command."""

    form: str = Field(default=DEFAULT_FORM, description="Form source: eta:<spec>, file:<path> or bundled:<name>")
    x: Optional[float] = Field(default=None, description="Endpoint of the averaging interval, p/q or decimal")
    M: Optional[int] = Field(default=None, ge=1, description="Single modulus M")
    M_list: Optional[list[int]] = Field(default=None, description="Ascending list of moduli")
    s_list: list[float] = Field(default=[0.7, 1.0, 1.3], description="Points s of the functional equation check")
    d_max: int = Field(default=12, ge=1, description="Largest denominator")
    tol: float = Field(default=1e-6, description="Tolerance for pass/fail")
    out: Optional[Path] = Field(default=None, description="Output file; stdout when absent")
    fmt: Literal["csv", "json"] = Field(default="csv", description="Output format")
    jobs: int = Field(default=1, ge=1, description="Worker processes")
    limit_terms: Optional[int] = Field(default=None, ge=1, description="Explicit length of the limit series")
    limit_tol: float = Field(default=LIMIT_TOL, gt=0, description="Certified tail tolerance of the limit series")

    @field_validator("x", mode="before")
    @classmethod
    def _read_x(cls, value):
        if value is None:
            return None
        return float(parse_x(value))

    @field_validator("tol")
    @classmethod
    def _positive_tol(cls, value: float) -> float:
        if not value > 0:
            raise ValueError(f"tolerance must be positive, got {value}")
        return value

    @field_validator("M_list")
    @classmethod
    def _check_moduli(cls, value: Optional[list[int]]) -> Optional[list[int]]:
        if value is None:
            return None
        if not value:
            raise ValueError("M-list must not be empty")
        if any(M < 1 for M in value):
            raise ValueError("moduli must be positive")
        if value != sorted(value):
            raise ValueError("M-list must be ascending")
        return value

    @model_validator(mode="after")
    def _single_form(self) -> "RunConfig":
        if not self.form or not self.form.strip():
            raise ValueError("a form source is required")
        if self.M is not None and self.M_list is not None:
            raise ValueError("give either M or M-list, not both")
        return self

    def moduli(self) -> list[int]:
        if self.M_list is not None:
            return self.M_list
        if self.M is not None:
            return [self.M]
        raise DomainError("a modulus M or an M-list is required")

    def source(self) -> SeriesSource:
        return parse_form(self.form)
