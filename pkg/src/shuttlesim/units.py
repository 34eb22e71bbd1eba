"""Unit conversions. Everything inside the package is SI (m, s, m/s)."""

MPH = 0.44704  # m/s per mph
MILE = 1609.344  # m per mile
FOOT = 0.3048
KPH = 1.0 / 3.6

_LENGTH = {"m": 1.0, "km": 1000.0, "mi": MILE, "ft": FOOT}
_SPEED = {"mps": 1.0, "m/s": 1.0, "mph": MPH, "kph": KPH, "km/h": KPH}


def mph_to_mps(v):
    return v * MPH


def mps_to_mph(v):
    return v / MPH


def length_factor(unit: str) -> float:
    try:
        return _LENGTH[unit]
    except KeyError:
        raise ValueError(f"unknown length unit {unit!r}") from None


def speed_factor(unit: str) -> float:
    try:
        return _SPEED[unit]
    except KeyError:
        raise ValueError(f"unknown speed unit {unit!r}") from None
