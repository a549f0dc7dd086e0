"""Recipe-context ingredient quantity recommendation engine."""

__version__ = "0.1.0"

from .units import (  # noqa: F401
    MeasurementType,
    Unit,
    UnitTable,
    default_table,
    format_quantity,
    from_base,
    normalize_unit_token,
    parse_quantity_text,
    snap_fraction,
    to_base,
)
