"""
app/utils/rationals.py - Exact parsing/formatting of probability literals.

Handles formats like:
- 9/10, -3/4     (fraction)
- 0.9, .125, 2   (plain decimal, converted exactly)
Binary floats and exponent notation are rejected: nothing on a probability path
ever goes through float.
"""
import re
from fractions import Fraction
from typing import Union

from app.engine.errors import InvalidRational

_FRACTION_RE = re.compile(r"^\s*([+-]?\d+)\s*/\s*(\d+)\s*$")
_DECIMAL_RE = re.compile(r"^\s*([+-]?)(\d*)(?:\.(\d*))?\s*$")


def parse_rational(text: Union[str, int, Fraction]) -> Fraction:
    if isinstance(text, Fraction):
        return text
    if isinstance(text, bool) or not isinstance(text, (str, int)):
        raise InvalidRational(f"expected a rational literal, got {type(text).__name__}", {"value": repr(text)})
    if isinstance(text, int):
        return Fraction(text)

    m = _FRACTION_RE.match(text)
    if m:
        denominator = int(m.group(2))
        if denominator == 0:
            raise InvalidRational(f"zero denominator in {text!r}", {"value": text})
        return Fraction(int(m.group(1)), denominator)

    m = _DECIMAL_RE.match(text)
    if m and (m.group(2) or m.group(3)):
        sign = -1 if m.group(1) == "-" else 1
        whole = int(m.group(2) or "0")
        frac_digits = m.group(3) or ""
        value = Fraction(whole)
        if frac_digits:
            value += Fraction(int(frac_digits), 10 ** len(frac_digits))
        return sign * value

    raise InvalidRational(f"not an exact rational literal: {text!r}", {"value": text})


def parse_probability(text: Union[str, int, Fraction]) -> Fraction:
    value = parse_rational(text)
    if value < 0 or value > 1:
        raise InvalidRational(f"probability {format_rational(value)} outside [0, 1]", {"value": str(text)})
    return value


def format_rational(value: Fraction) -> str:
    """Canonical p/q rendering (integers included, e.g. 1/1)."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"
