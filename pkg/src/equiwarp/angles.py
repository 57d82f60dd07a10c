"""Parsing and formatting of angle expressions.

Angles given as multiples of pi ("6*pi/16", "pi/2", "-pi") are evaluated
symbolically: the rational factor is computed first and multiplied by
math.pi once, so "8*pi/16" equals math.pi / 2 exactly instead of drifting
through a decimal round trip. Anything without "pi" is parsed as plain
radians.
"""

from __future__ import annotations

import math
import re

__all__ = ["AngleParseError", "parse_angle", "phi_dirname", "phi_label"]


class AngleParseError(ValueError):
    """The text is not a recognizable angle expression."""


_PI_FORM = re.compile(
    r"""^\s*
        (?P<sign>[+-])?\s*
        (?:(?P<num>\d+(?:\.\d+)?)\s*\*\s*)?   # optional leading factor
        pi
        (?:\s*/\s*(?P<den>\d+(?:\.\d+)?))?    # optional divisor
        \s*$""",
    re.VERBOSE | re.IGNORECASE,
)


def parse_angle(text: str) -> float:
    """Evaluate an angle expression to radians.

    Accepts "<x>" (plain radians), "pi", "<x>*pi", "pi/<y>" and
    "<x>*pi/<y>", with an optional leading sign and the Greek letter
    allowed in place of "pi".
    """
    if not isinstance(text, str):
        raise AngleParseError(f"angle expression must be a string, got {type(text).__name__}")
    cleaned = text.replace("π", "pi")
    m = _PI_FORM.match(cleaned)
    if m is not None:
        num = float(m.group("num")) if m.group("num") else 1.0
        den = float(m.group("den")) if m.group("den") else 1.0
        if den == 0.0:
            raise AngleParseError(f"zero divisor in angle expression: {text!r}")
        value = (num / den) * math.pi
        return -value if m.group("sign") == "-" else value
    try:
        return float(cleaned)
    except ValueError:
        raise AngleParseError(f"cannot parse angle expression: {text!r}") from None


def _sixteenth(phi: float) -> int | None:
    """Return k when phi == k*pi/16 for a positive integer k, else None."""
    k = round(phi / (math.pi / 16.0))
    if k >= 1 and abs(phi - k * (math.pi / 16.0)) <= 1e-12:
        return k
    return None


def phi_dirname(phi: float) -> str:
    """Directory name for a sweep value: phi_<k>pi16 for exact sixteenths."""
    k = _sixteenth(phi)
    if k is not None:
        return f"phi_{k}pi16"
    return "phi_" + f"{phi:.6f}".replace(".", "_").replace("-", "m")


def phi_label(phi: float) -> str:
    """Human-facing row label: "6pi/16" for exact sixteenths, else radians."""
    k = _sixteenth(phi)
    if k is not None:
        return f"{k}pi/16"
    return f"{phi:.4f}"
