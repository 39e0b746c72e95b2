"""Unit conversions and physical constants.

Canonical internal units everywhere in this package: micrometers, seconds,
micromolar. Conversions happen at type boundaries only.
"""
from __future__ import annotations

from .errors import UnitError

AVOGADRO = 6.02214086e23  # 1/mol

# Power-of-ten units carry their decimal exponent relative to the family
# base; the remaining units carry a plain factor. Keeping the exponent lets
# same-family conversions apply one exact 10**k constant in a single
# correctly rounded multiply or divide, so round trips through power-of-ten
# factors are exact whenever the scaled value is itself representable.
_LENGTH = {"m": ("e", 0), "dm": ("e", -1), "cm": ("e", -2), "mm": ("e", -3), "um": ("e", -6), "nm": ("e", -9)}
_TIME = {"s": ("e", 0), "ms": ("e", -3), "min": ("f", 60.0), "h": ("f", 3600.0)}
_CONCENTRATION = {"M": ("e", 0), "mM": ("e", -3), "uM": ("e", -6), "nM": ("e", -9)}
_FREQUENCY = {"Hz": ("e", 0), "1/s": ("e", 0), "bpm": ("f", 1.0 / 60.0)}

_FAMILIES = {
    "length": _LENGTH,
    "time": _TIME,
    "concentration": _CONCENTRATION,
    "frequency": _FREQUENCY,
}

_ALIASES = {"µm": "um", "µM": "uM", "sec": "s", "minute": "min"}


def _lookup(unit: str):
    name = _ALIASES.get(unit, unit)
    for family, table in _FAMILIES.items():
        if name in table:
            return family, table[name]
    raise UnitError(f"unknown unit {unit!r}")


def _pow10(value: float, k: int) -> float:
    if k == 0:
        return value
    if k > 0:
        return value * 10.0**k
    return value / 10.0**-k


def _rescale(value: float, entry_a, entry_b) -> float:
    kind_a, a = entry_a
    kind_b, b = entry_b
    if kind_a == "e" and kind_b == "e":
        return _pow10(value, a - b)
    if kind_a == "e":
        return _pow10(value, a) / b
    if kind_b == "e":
        return _pow10(value * a, -b)
    return value * a / b


def _to_base(value: float, entry) -> float:
    kind, a = entry
    return _pow10(value, a) if kind == "e" else value * a


def convert(value: float, from_unit: str, to_unit: str) -> float:
    """Convert ``value`` between compatible units.

    Same-family conversions apply an exact factor. Frequency <-> time
    conversions return the period (reciprocal), so e.g. 80 bpm -> 0.75 s.
    """
    fam_a, entry_a = _lookup(from_unit)
    fam_b, entry_b = _lookup(to_unit)
    if fam_a == fam_b:
        return _rescale(value, entry_a, entry_b)
    if {fam_a, fam_b} == {"frequency", "time"}:
        if value == 0.0:
            raise UnitError("cannot convert zero frequency/period to its reciprocal")
        reciprocal_base = 1.0 / _to_base(value, entry_a)
        return _rescale(reciprocal_base, ("e", 0), entry_b)
    raise UnitError(f"incompatible dimensions: {from_unit!r} ({fam_a}) -> {to_unit!r} ({fam_b})")
