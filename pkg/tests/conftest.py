"""Pytest configuration and fixtures."""

import pytest

from addtwist.characters import primitive_characters
from addtwist.forms import bundled_form


@pytest.fixture(scope="session")
def f11():
    """The level-11 newform eta(z)^2 eta(11z)^2."""
    return bundled_form("11a")


@pytest.fixture(scope="session")
def f27():
    """The level-27 newform eta(3z)^2 eta(9z)^2."""
    return bundled_form("27a")


@pytest.fixture(scope="session")
def f27_chi3():
    """Stored coefficients of the newform attached to 27a twisted by the character mod 3."""
    return bundled_form("27a_chi3")


@pytest.fixture(scope="session")
def chi3():
    """The primitive character mod 3."""
    (chi,) = primitive_characters(3)
    return chi


@pytest.fixture
def coeff_file(tmp_path):
    """Write a coefficient file in the text format and return its path."""

    def write(coeffs, label="test", level=11, weight=2, character=None, name="coeffs.txt"):
        lines = [f"# newform {label}", f"level {level}", f"weight {weight}"]
        if character is not None:
            lines.append(f"character {character[0]} {character[1]}")
        lines.append("coeffs")
        lines.extend(f"{n} {value}" for n, value in enumerate(coeffs, start=1))
        path = tmp_path / name
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return path

    return write
