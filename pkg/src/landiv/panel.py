"""County-year panel data model, CSV ingestion, validation and summaries."""

from __future__ import annotations

import csv
import enum
import io
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np


class PanelError(ValueError):
    """Raised when a panel file cannot be ingested."""


class LandUse(enum.IntEnum):
    """The four land uses; the integer codes are part of the file formats."""

    AGRICULTURE = 0
    SOLAR = 1
    WIND = 2
    RESIDENTIAL = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, text: str) -> LandUse:
        key = text.strip()
        if key.isdigit():
            return cls(int(key))
        try:
            return cls[key.upper()]
        except KeyError:
            raise ValueError(f"unknown land use {text!r}") from None


class RegulationLevel(enum.IntEnum):
    NONE = 1
    IMPEDIMENTS = 2
    MORATORIUM = 3
    DIFFICULT_TO_PERMIT = 4
    BAN = 5

    @classmethod
    def parse(cls, value: int | str) -> RegulationLevel:
        try:
            code = int(value)
        except (TypeError, ValueError):
            raise ValueError(f"regulation code {value!r} is not an integer") from None
        try:
            return cls(code)
        except ValueError:
            raise ValueError(f"regulation code {code} outside 1..5") from None


@dataclass(frozen=True)
class PanelObservation:
    county_id: str
    year: int
    slr: int | None = None
    wnd: int | None = None
    high_heat_days: int | None = None
    corn_yield: float | None = None
    log_income: float | None = None
    log_gdp: float | None = None
    population: float | None = None
    median_age: float | None = None
    labor_force: float | None = None
    unemployment_rate: float | None = None
    metro: int | None = None
    solar_regulation: RegulationLevel | None = None
    wind_regulation: RegulationLevel | None = None
    extras: Mapping[str, float | None] = field(default_factory=dict)

    @property
    def key(self) -> tuple[str, int]:
        return (self.county_id, self.year)


# canonical column name -> attribute name, in canonical output order
CANONICAL_COLUMNS: dict[str, str] = {
    "county_id": "county_id",
    "year": "year",
    "slr": "slr",
    "wnd": "wnd",
    "days_above_t": "high_heat_days",
    "corn_yield": "corn_yield",
    "log_income": "log_income",
    "log_gdp": "log_gdp",
    "population": "population",
    "median_age": "median_age",
    "labor_force": "labor_force",
    "unemployment_rate": "unemployment_rate",
    "metro": "metro",
    "solar_reg": "solar_regulation",
    "wind_reg": "wind_regulation",
}
_ATTR_TO_COLUMN = {attr: col for col, attr in CANONICAL_COLUMNS.items()}
_INT_ATTRS = {"year", "slr", "wnd", "high_heat_days", "metro"}
_REG_ATTRS = {"solar_regulation", "wind_regulation"}
REQUIRED_COLUMNS = ("county_id", "year")

# numeric variables reported by ``summarize``, in table order
SUMMARY_VARIABLES = (
    "slr", "wnd", "high_heat_days", "corn_yield", "log_income", "log_gdp",
    "population", "median_age", "labor_force", "unemployment_rate",
)


def column_attribute(name: str) -> str:
    """Resolve a canonical column name or attribute name to the attribute."""
    if name in CANONICAL_COLUMNS:
        return CANONICAL_COLUMNS[name]
    return name


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError:
        value = float(text)
        if not value.is_integer():
            raise ValueError(f"{text!r} is not an integer") from None
        return int(value)


def _parse_float(text: str) -> float:
    value = float(text)
    if not math.isfinite(value):
        raise ValueError(f"{text!r} is not finite")
    return value


def _parse_cell(attr: str, text: str, *, strict: bool):
    text = text.strip()
    if text == "":
        return None
    if attr in _REG_ATTRS:
        if strict:
            return RegulationLevel.parse(text)
        code = _parse_int(text)
        return RegulationLevel(code) if code in RegulationLevel._value2member_map_ else code
    if attr in _INT_ATTRS:
        return _parse_int(text)
    return _parse_float(text)


def load_schema(path: str | Path) -> dict[str, str]:
    """Read a column map file (``canonical_name = header_in_file``)."""
    from landiv.kvfile import read_kv

    mapping = read_kv(path)
    unknown = set(mapping) - set(CANONICAL_COLUMNS)
    if unknown:
        raise PanelError(f"schema names unknown canonical columns: {sorted(unknown)}")
    return mapping


def read_panel(path: str | Path, schema: Mapping[str, str] | None = None,
               *, strict: bool = True) -> list[PanelObservation]:
    """Parse a panel CSV without domain validation.

    ``strict=False`` keeps out-of-range regulation codes as plain integers so
    that ``validate_panel`` can report them; structural problems (missing
    columns, unparsable numbers) always raise.
    """
    with open(path, newline="") as handle:
        text = handle.read()
    return _read_rows(io.StringIO(text), schema or {}, strict=strict, source=str(path))


def _read_rows(handle, schema: Mapping[str, str], *, strict: bool,
               source: str) -> list[PanelObservation]:
    reader = csv.DictReader(handle)
    header = reader.fieldnames or []
    column_of = {canon: schema.get(canon, canon) for canon in CANONICAL_COLUMNS}
    for canon in (*REQUIRED_COLUMNS, *schema):
        if column_of[canon] not in header:
            raise PanelError(f"{source}: missing column {column_of[canon]!r}")
    present = {canon: col for canon, col in column_of.items() if col in header}
    mapped = set(present.values())
    extra_cols = [col for col in header if col not in mapped]

    rows = []
    for lineno, record in enumerate(reader, start=2):
        values = {}
        for canon, col in present.items():
            attr = CANONICAL_COLUMNS[canon]
            cell = record[col] if record[col] is not None else ""
            try:
                if attr == "county_id":
                    values[attr] = cell.strip()
                    if not values[attr]:
                        raise ValueError("empty county_id")
                else:
                    values[attr] = _parse_cell(attr, cell, strict=strict)
            except ValueError as exc:
                raise PanelError(f"{source}:{lineno}: column {col!r}: {exc}") from None
        if values.get("year") is None:
            raise PanelError(f"{source}:{lineno}: missing year")
        extras = {}
        for col in extra_cols:
            cell = (record[col] or "").strip()
            try:
                extras[col] = _parse_float(cell) if cell else None
            except ValueError as exc:
                raise PanelError(f"{source}:{lineno}: column {col!r}: {exc}") from None
        rows.append(PanelObservation(**values, extras=extras))
    return rows


def load_panel(path: str | Path, schema: Mapping[str, str] | None = None) -> list[PanelObservation]:
    """Load, validate and sort a panel CSV.

    Raises ``PanelError`` on a missing column, an unparsable number, a
    regulation code outside 1..5, a duplicate ``(county_id, year)`` or any
    other invariant violation found by ``validate_panel``.
    """
    rows = read_panel(path, schema, strict=True)
    problems = validate_panel(rows)
    if problems:
        listing = "; ".join(str(p) for p in problems[:10])
        more = f" (+{len(problems) - 10} more)" if len(problems) > 10 else ""
        raise PanelError(f"{path}: {listing}{more}")
    return sorted(rows, key=lambda obs: obs.key)


# ---------------------------------------------------------------------------
# writing
# ---------------------------------------------------------------------------

def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, enum.IntEnum):
        return str(int(value))
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def format_panel(panel: Sequence[PanelObservation]) -> str:
    """Canonical CSV text: fixed column order, shortest round-trip floats."""
    extra_cols = sorted({k for obs in panel for k in obs.extras})
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow([*CANONICAL_COLUMNS, *extra_cols])
    for obs in panel:
        row = [_format_cell(getattr(obs, attr)) for attr in CANONICAL_COLUMNS.values()]
        row += [_format_cell(obs.extras.get(col)) for col in extra_cols]
        writer.writerow(row)
    return buffer.getvalue()


def write_panel(panel: Sequence[PanelObservation], path: str | Path) -> None:
    Path(path).write_text(format_panel(panel), newline="")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Violation:
    row: int
    field: str
    message: str

    def __str__(self) -> str:
        return f"row {self.row}: {self.field}: {self.message}"


def validate_panel(panel: Sequence[PanelObservation]) -> list[Violation]:
    """List every invariant violation; an empty list means the panel is valid."""
    out: list[Violation] = []
    seen: dict[tuple[str, int], int] = {}
    for i, obs in enumerate(panel):
        def bad(name, message):
            out.append(Violation(i, _ATTR_TO_COLUMN.get(name, name), message))

        if obs.key in seen:
            bad("year", f"duplicate key ({obs.county_id}, {obs.year}), first at row {seen[obs.key]}")
        else:
            seen[obs.key] = i
        for name in ("slr", "wnd", "metro"):
            value = getattr(obs, name)
            if value is not None and value not in (0, 1):
                bad(name, f"{value} not in {{0,1}}")
        if obs.high_heat_days is not None and obs.high_heat_days < 0:
            bad("high_heat_days", f"negative count {obs.high_heat_days}")
        if obs.unemployment_rate is not None and not 0 <= obs.unemployment_rate <= 100:
            bad("unemployment_rate", f"{obs.unemployment_rate} outside [0, 100]")
        if obs.corn_yield is not None and obs.corn_yield <= 0:
            bad("corn_yield", f"non-positive yield {obs.corn_yield}")
        for name in ("population", "labor_force"):
            value = getattr(obs, name)
            if value is not None and value < 0:
                bad(name, f"negative count {value}")
        for name in _REG_ATTRS:
            value = getattr(obs, name)
            if value is not None and not isinstance(value, RegulationLevel):
                bad(name, f"regulation code {value} outside 1..5")
    return out


def format_violations(violations: Iterable[Violation]) -> str:
    return "".join(f"{v}\n" for v in violations)


# ---------------------------------------------------------------------------
# column access and summaries
# ---------------------------------------------------------------------------

def column(panel: Sequence[PanelObservation], name: str) -> np.ndarray:
    """One variable as a float array, NaN where missing.

    ``name`` may be an attribute, a canonical column name or an extra column.
    """
    attr = column_attribute(name)
    if attr in {f.name for f in fields(PanelObservation)} and attr != "extras":
        if attr == "county_id":
            raise KeyError("county_id is not numeric")
        values = [getattr(obs, attr) for obs in panel]
    else:
        if panel and not any(attr in obs.extras for obs in panel):
            raise KeyError(f"unknown variable {name!r}")
        values = [obs.extras.get(attr) for obs in panel]
    return np.array([np.nan if v is None else float(v) for v in values], dtype=float)


@dataclass(frozen=True)
class VariableSummary:
    mean: float
    sd: float
    min: float
    max: float
    count: int


@dataclass(frozen=True)
class PanelSummary:
    variables: dict[str, VariableSummary]
    n_obs: int

    def format(self) -> str:
        lines = [f"{'Variable':<20}{'Mean':>14}{'SD':>14}{'Min':>12}{'Max':>12}{'N':>8}"]
        for name, s in self.variables.items():
            lines.append(f"{name:<20}{s.mean:>14.2f}{s.sd:>14.2f}{s.min:>12.2f}{s.max:>12.2f}{s.count:>8d}")
        return "\n".join(lines) + "\n"


def summarize(panel: Sequence[PanelObservation]) -> PanelSummary:
    """Mean, sample SD (n-1), min and max of each numeric variable.

    Sums use ``math.fsum`` so the result does not depend on row order.
    Missing cells are skipped per variable.
    """
    if not panel:
        raise ValueError("cannot summarize an empty panel")
    out = {}
    for name in SUMMARY_VARIABLES:
        values = [float(v) for v in (getattr(obs, name) for obs in panel) if v is not None]
        if not values:
            continue
        n = len(values)
        mean = math.fsum(values) / n
        lo, hi = min(values), max(values)
        mean = min(max(mean, lo), hi)
        sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1)) if n > 1 else 0.0
        out[name] = VariableSummary(mean, sd, lo, hi, n)
    return PanelSummary(out, len(panel))
