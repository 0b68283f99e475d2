"""Unit conversion at the ingestion boundary. Everything internal is SI."""

import math
import re

PSI = 6894.757293168361  # Pa
MILE = 1609.344  # m
INCH = 0.0254  # m
FOOT = 0.3048  # m

# Reference scales used to normalise the diffusion coefficient.
P0 = 800.0 * PSI  # upper operating pressure, Pa
T0 = 15.0 * 60.0  # representative horizon, s

_UNITS = {
    "pressure": {"": 1.0, "pa": 1.0, "kpa": 1e3, "mpa": 1e6, "bar": 1e5, "psi": PSI},
    "length": {
        "": 1.0, "m": 1.0, "km": 1e3, "mi": MILE, "mile": MILE, "miles": MILE,
        "ft": FOOT, "in": INCH, "inch": INCH,
    },
    "massflow": {"": 1.0, "kg/s": 1.0},
    "time": {"": 1.0, "s": 1.0, "min": 60.0, "h": 3600.0},
    "speed": {"": 1.0, "m/s": 1.0},
    "none": {"": 1.0},
}

_QUANTITY = re.compile(
    r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)\s*([A-Za-z/]*)\s*$"
)


def parse_quantity(text, dimension):
    """Parse ``"800psi"`` / ``"100 km"`` / ``"12.5"`` into an SI float.

    Raises ValueError on an unparsable number or a unit foreign to
    ``dimension``.
    """
    m = _QUANTITY.match(text)
    if m is None:
        raise ValueError(f"not a number: {text!r}")
    value = float(m.group(1))
    unit = m.group(2).lower()
    table = _UNITS[dimension]
    if unit not in table:
        raise ValueError(f"unit {m.group(2)!r} is not a valid {dimension} unit")
    return value * table[unit]


def format_float(x):
    """Shortest text that round-trips ``x`` exactly."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def pa_to_psi(p):
    return p / PSI


def m_to_miles(x):
    return x / MILE
