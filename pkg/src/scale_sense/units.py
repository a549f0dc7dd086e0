"""Culinary quantity parsing, unit normalization, and base-unit conversion.

Quantities are normalized to ml (volume) or g (weight). The final numeral
converter walks the other way: a normalized value is re-expressed in a
target unit and snapped to the nearest cook-friendly whole + fraction.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from importlib import resources
from pathlib import Path


class UnknownUnit(ValueError):
    """Raw unit token matches no canonical unit or alias."""


class MalformedQuantity(ValueError):
    """Quantity text is unparseable, has a zero denominator, or is <= 0."""


class TypeMismatch(ValueError):
    """A weight-normalized value was paired with a volume unit or vice versa."""


class MeasurementType(str, Enum):
    VOLUME = "volume"
    WEIGHT = "weight"

    @property
    def base_unit_name(self) -> str:
        return "ml" if self is MeasurementType.VOLUME else "g"


@dataclass(frozen=True)
class Unit:
    canonical_name: str
    mtype: MeasurementType
    base_factor: float  # ml or g per 1 unit

    def __post_init__(self):
        if self.base_factor <= 0:
            raise ValueError(f"base_factor must be positive: {self.canonical_name}")

    def __str__(self) -> str:
        return self.canonical_name


# Class order for the 14-way unit classifier. Index in this tuple is the label.
UNIT_ORDER = (
    "cup", "tablespoon", "teaspoon", "lb", "ounce", "g", "ml",
    "pinch", "dash", "kg", "pint", "quart", "drop", "gallon",
)

# Fractions a cook actually writes, plus 0 and 1 so near-integers render as
# integers. Ascending order; ties snap to the smaller value.
SNAP_FRACTIONS = (
    Fraction(0), Fraction(1, 16), Fraction(1, 8), Fraction(1, 4),
    Fraction(1, 3), Fraction(3, 8), Fraction(1, 2), Fraction(5, 8),
    Fraction(2, 3), Fraction(3, 4), Fraction(7, 8), Fraction(1),
)


class UnitTable:
    """The 14 canonical units plus the alias map, loaded from a data file."""

    def __init__(self, units: dict[str, Unit], aliases: dict[str, str]):
        self._units = dict(units)
        self._aliases = dict(aliases)

    @classmethod
    def from_file(cls, path: str | Path) -> "UnitTable":
        units: dict[str, Unit] = {}
        aliases: dict[str, str] = {}
        section = None
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if line in ("[units]", "[aliases]"):
                section = line
                continue
            fields = line.split("\t")
            if section == "[units]":
                if len(fields) != 3:
                    raise ValueError(f"{path}:{lineno}: expected canonical<TAB>type<TAB>factor")
                name, type_label, factor = fields
                units[name] = Unit(name, MeasurementType(type_label), float(factor))
            elif section == "[aliases]":
                if len(fields) != 2:
                    raise ValueError(f"{path}:{lineno}: expected alias<TAB>canonical")
                alias, canonical = fields
                aliases[alias] = canonical
            else:
                raise ValueError(f"{path}:{lineno}: line outside [units]/[aliases] section")
        table = cls(units, aliases)
        for alias, canonical in aliases.items():
            if canonical not in units:
                raise ValueError(f"alias {alias!r} points to unknown unit {canonical!r}")
        return table

    @classmethod
    def default(cls) -> "UnitTable":
        with resources.as_file(resources.files("scale_sense.data") / "unit_table.tsv") as p:
            return cls.from_file(p)

    @property
    def units(self) -> tuple[Unit, ...]:
        return tuple(self._units[name] for name in UNIT_ORDER if name in self._units)

    def unit(self, canonical_name: str) -> Unit:
        try:
            return self._units[canonical_name]
        except KeyError:
            raise UnknownUnit(canonical_name) from None

    def normalize_unit_token(self, raw: str) -> Unit:
        """Resolve a raw unit token (any case, plural, abbreviated) to its unit."""
        token = raw.strip().lower().rstrip(".")
        if not token:
            raise UnknownUnit(raw)
        if token in self._units:
            return self._units[token]
        if token in self._aliases:
            return self._units[self._aliases[token]]
        raise UnknownUnit(raw)


_DEFAULT_TABLE: UnitTable | None = None


def default_table() -> UnitTable:
    global _DEFAULT_TABLE
    if _DEFAULT_TABLE is None:
        _DEFAULT_TABLE = UnitTable.default()
    return _DEFAULT_TABLE


def normalize_unit_token(raw: str) -> Unit:
    return default_table().normalize_unit_token(raw)


_INT_RE = re.compile(r"^\d+$")
_DECIMAL_RE = re.compile(r"^\d*\.\d+$|^\d+\.\d*$")
_FRACTION_RE = re.compile(r"^(\d+)/(\d+)$")
_MIXED_RE = re.compile(r"^(\d+) (\d+)/(\d+)$")


def parse_quantity_text(raw: str) -> float:
    """Parse an integer, decimal, fraction "a/b", or mixed "w a/b" quantity.

    Mixed numbers sum whole and fractional parts ("1 1/2" -> 1.5). Raises
    MalformedQuantity on anything else, a zero denominator, or value <= 0.
    """
    text = raw.strip()
    value: Fraction | None = None
    if _INT_RE.match(text):
        value = Fraction(int(text))
    elif _DECIMAL_RE.match(text):
        value = Fraction(text)
    else:
        m = _FRACTION_RE.match(text)
        if m:
            num, den = int(m.group(1)), int(m.group(2))
            if den == 0:
                raise MalformedQuantity(f"zero denominator: {raw!r}")
            value = Fraction(num, den)
        else:
            m = _MIXED_RE.match(text)
            if m:
                whole, num, den = (int(g) for g in m.groups())
                if den == 0:
                    raise MalformedQuantity(f"zero denominator: {raw!r}")
                value = whole + Fraction(num, den)
    if value is None:
        raise MalformedQuantity(f"unparseable quantity: {raw!r}")
    if value <= 0:
        raise MalformedQuantity(f"quantity must be positive: {raw!r}")
    return float(value)


def to_base(value: float, unit: Unit) -> float:
    """Convert `value` in `unit` to the base unit (ml or g) of the unit's type."""
    if value <= 0:
        raise ValueError(f"value must be positive: {value}")
    return value * unit.base_factor


def from_base(normalized: float, unit: Unit, *, mtype: MeasurementType | None = None) -> float:
    """Exact inverse of to_base.

    `mtype`, when given, names the measurement type of `normalized`; a
    mismatch with the unit's type raises TypeMismatch.
    """
    if normalized <= 0:
        raise ValueError(f"normalized value must be positive: {normalized}")
    if mtype is not None and mtype != unit.mtype:
        raise TypeMismatch(f"{unit.mtype.value} unit {unit} given a {mtype.value}-normalized value")
    return normalized / unit.base_factor


def snap_fraction(x: float) -> tuple[int, Fraction]:
    """Split x > 0 into (whole, fraction) with the fraction snapped.

    The fractional part maps to the nearest snap candidate (ties toward the
    smaller value); a snap to 1 carries into whole + 1 with fraction 0.
    """
    if x <= 0:
        raise ValueError(f"x must be positive: {x}")
    whole = int(x)
    frac = x - whole
    best = SNAP_FRACTIONS[0]
    best_err = abs(frac - float(best))
    for candidate in SNAP_FRACTIONS[1:]:
        err = abs(frac - float(candidate))
        if err < best_err:
            best, best_err = candidate, err
    if best == 1:
        return whole + 1, Fraction(0)
    return whole, best


@dataclass(frozen=True)
class FormattedQuantity:
    whole: int
    fraction: Fraction
    unit: Unit

    def __post_init__(self):
        if self.whole < 0:
            raise ValueError("whole part must be non-negative")
        if self.whole + self.fraction <= 0:
            raise ValueError("formatted quantity must be positive")
        if self.fraction not in SNAP_FRACTIONS[:-1]:
            raise ValueError(f"fraction {self.fraction} outside the snap set")

    @property
    def value(self) -> float:
        return self.whole + float(self.fraction)

    def __str__(self) -> str:
        parts = []
        if self.whole:
            parts.append(str(self.whole))
        if self.fraction:
            parts.append(f"{self.fraction.numerator}/{self.fraction.denominator}")
        parts.append(self.unit.canonical_name)
        return " ".join(parts)


def format_quantity(
    normalized: float, unit: Unit, *, mtype: MeasurementType | None = None
) -> FormattedQuantity:
    """Render a normalized (ml/g) value as whole + fraction of `unit`.

    Values that snap all the way to zero are bumped to the smallest positive
    fraction so the output is never "0 <unit>".
    """
    converted = from_base(normalized, unit, mtype=mtype)
    whole, fraction = snap_fraction(converted)
    if whole == 0 and fraction == 0:
        fraction = SNAP_FRACTIONS[1]
    return FormattedQuantity(whole, fraction, unit)
