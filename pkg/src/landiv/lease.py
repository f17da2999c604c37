"""Annual lease payoffs for crop, wind and solar use of one parcel, in integer cents."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field
from decimal import ROUND_HALF_EVEN, Decimal, InvalidOperation
from importlib.resources import files
from pathlib import Path

from landiv.kvfile import parse_kv, read_kv

RATE_KEYS = (
    "crop_per_acre",
    "wind_per_mw",
    "turbine_flat",
    "blanket_per_acre",
    "road_per_foot",
    "transmission_per_foot",
    "solar_per_acre",
)

# Cents.  Midpoints of the quoted 2024 Indiana ranges, except the solar rate
# which follows the worked example ($1,250/acre) rather than the $1,000-$1,700
# range midpoint.
DEFAULT_CARD_NAME = "indiana-2024-midpoint"
DEFAULT_RATES = {
    "crop_per_acre": 30_000,
    "wind_per_mw": 750_000,
    "turbine_flat": 200_000,
    "blanket_per_acre": 3_000,
    "road_per_foot": 150,
    "transmission_per_foot": 150,
    "solar_per_acre": 125_000,
}

PARCEL_KEYS = (
    "total_acres", "turbine_count", "megawatts_per_turbine", "access_road_feet",
    "transmission_feet", "farmable_acres_under_wind", "solar_acres", "residual_crop_acres",
)


class LeaseError(ValueError):
    pass


def _decimal(value, name: str) -> Decimal:
    try:
        d = Decimal(str(value))
    except InvalidOperation:
        raise LeaseError(f"{name}: not a number: {value!r}") from None
    if not d.is_finite():
        raise LeaseError(f"{name}: not finite")
    return d


@dataclass(frozen=True)
class RateCard:
    rates: Mapping[str, int]   # cents
    name: str = "custom"

    def __post_init__(self):
        missing = [k for k in RATE_KEYS if k not in self.rates]
        if missing:
            raise LeaseError(f"rate card {self.name!r} is missing rate key(s): {', '.join(missing)}")
        unknown = sorted(set(self.rates) - set(RATE_KEYS))
        if unknown:
            raise LeaseError(f"rate card {self.name!r} has unknown key(s): {', '.join(unknown)}")
        clean = {}
        for k in RATE_KEYS:
            v = self.rates[k]
            if isinstance(v, bool) or int(v) != v or v < 0:
                raise LeaseError(f"rate {k} must be a nonnegative whole number of cents, got {v!r}")
            clean[k] = int(v)
        object.__setattr__(self, "rates", clean)

    def __getitem__(self, key: str) -> int:
        return self.rates[key]

    def override(self, **changes: int) -> RateCard:
        return RateCard({**self.rates, **changes}, name=f"{self.name}+override")


DEFAULT_CARD = RateCard(DEFAULT_RATES, DEFAULT_CARD_NAME)


@dataclass(frozen=True)
class ParcelSpec:
    total_acres: Decimal
    turbine_count: Decimal
    megawatts_per_turbine: Decimal
    access_road_feet: Decimal
    transmission_feet: Decimal
    farmable_acres_under_wind: Decimal
    solar_acres: Decimal
    residual_crop_acres: Decimal
    rates: RateCard = field(default=DEFAULT_CARD)

    def __post_init__(self):
        for key in PARCEL_KEYS:
            value = _decimal(getattr(self, key), key)
            if value < 0:
                raise LeaseError(f"{key} must be nonnegative, got {value}")
            object.__setattr__(self, key, value)
        if self.solar_acres + self.residual_crop_acres > self.total_acres:
            raise LeaseError("solar_acres + residual_crop_acres exceeds total_acres")
        if self.farmable_acres_under_wind > self.total_acres:
            raise LeaseError("farmable_acres_under_wind exceeds total_acres")

    @property
    def megawatts(self) -> Decimal:
        return self.turbine_count * self.megawatts_per_turbine

    def scaled(self, factor) -> ParcelSpec:
        """Scale every quantity (acres, feet, turbines) but not the per-turbine rating."""
        f = _decimal(factor, "factor")
        return ParcelSpec(*(getattr(self, k) * (1 if k == "megawatts_per_turbine" else f)
                            for k in PARCEL_KEYS), rates=self.rates)


def _cents(quantity: Decimal, rate_cents: int) -> int:
    """Quantity times a cents rate, rounded half-even to a whole cent."""
    return int((quantity * rate_cents).to_integral_value(rounding=ROUND_HALF_EVEN))


@dataclass(frozen=True)
class LineItem:
    label: str
    quantity: Decimal
    unit: str
    rate_cents: int
    amount_cents: int


def crop_items(spec: ParcelSpec) -> list[LineItem]:
    r = spec.rates["crop_per_acre"]
    return [LineItem("crop production lease", spec.total_acres, "acres", r, _cents(spec.total_acres, r))]


def wind_items(spec: ParcelSpec, scheme: int) -> list[LineItem]:
    rates = spec.rates
    road = LineItem("access road", spec.access_road_feet, "ft", rates["road_per_foot"],
                    _cents(spec.access_road_feet, rates["road_per_foot"]))
    line = LineItem("power transmission", spec.transmission_feet, "ft",
                    rates["transmission_per_foot"],
                    _cents(spec.transmission_feet, rates["transmission_per_foot"]))
    crop = LineItem("crop production lease", spec.farmable_acres_under_wind, "acres",
                    rates["crop_per_acre"],
                    _cents(spec.farmable_acres_under_wind, rates["crop_per_acre"]))
    if scheme == 1:
        head = [LineItem("generation", spec.megawatts, "MW", rates["wind_per_mw"],
                         _cents(spec.megawatts, rates["wind_per_mw"]))]
    elif scheme == 2:
        head = [LineItem("turbine", spec.turbine_count, "turbine(s)", rates["turbine_flat"],
                         _cents(spec.turbine_count, rates["turbine_flat"])),
                LineItem("blanket per-acre", spec.total_acres, "acres", rates["blanket_per_acre"],
                         _cents(spec.total_acres, rates["blanket_per_acre"]))]
    else:
        raise LeaseError(f"wind scheme must be 1 or 2, got {scheme!r}")
    if scheme == 2:
        return [head[0], road, line, head[1], crop]
    return [*head, road, line, crop]


def solar_items(spec: ParcelSpec) -> list[LineItem]:
    rates = spec.rates
    return [
        LineItem("solar", spec.solar_acres, "acres", rates["solar_per_acre"],
                 _cents(spec.solar_acres, rates["solar_per_acre"])),
        LineItem("crop production lease", spec.residual_crop_acres, "acres", rates["crop_per_acre"],
                 _cents(spec.residual_crop_acres, rates["crop_per_acre"])),
    ]


def crop_lease_total(spec: ParcelSpec) -> int:
    """Annual crop lease in cents."""
    return sum(i.amount_cents for i in crop_items(spec))


def wind_total(spec: ParcelSpec, scheme: int) -> int:
    """Annual wind lease in cents under payment scheme 1 (per MW) or 2 (flat turbine + blanket)."""
    return sum(i.amount_cents for i in wind_items(spec, scheme))


def solar_total(spec: ParcelSpec) -> int:
    return sum(i.amount_cents for i in solar_items(spec))


def format_dollars(cents: int) -> str:
    sign = "-" if cents < 0 else ""
    cents = abs(cents)
    dollars, rem = divmod(cents, 100)
    return f"{sign}${dollars:,}" + (f".{rem:02d}" if rem else "")


def _fmt_qty(q: Decimal) -> str:
    q = q.normalize()
    text = f"{q:,f}"
    return text


def itemized_table(spec: ParcelSpec) -> str:
    rows = [("Lease", "Quantity", "Payment", "Subtotal", "Total")]

    def block(title, items, total):
        rows.append((title, "", "", "", ""))
        for it in items:
            rows.append(("", f"{_fmt_qty(it.quantity)} {it.unit} - {it.label}",
                         format_dollars(it.rate_cents), format_dollars(it.amount_cents), ""))
        rows.append(("", "", "", "", format_dollars(total)))

    block("Crop Production", crop_items(spec), crop_lease_total(spec))
    block("Wind Power, scheme 1", wind_items(spec, 1), wind_total(spec, 1))
    block("Wind Power, scheme 2", wind_items(spec, 2), wind_total(spec, 2))
    block("Solar Power", solar_items(spec), solar_total(spec))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = []
    for r in rows:
        lines.append("  ".join([r[0].ljust(widths[0]), r[1].ljust(widths[1]),
                                *(c.rjust(w) for c, w in zip(r[2:], widths[2:]))]).rstrip())
    lines.insert(1, "-" * len(lines[0]))
    return "\n".join(lines) + "\n"


def totals(spec: ParcelSpec) -> dict[str, int]:
    return {
        "crop": crop_lease_total(spec),
        "wind_scheme1": wind_total(spec, 1),
        "wind_scheme2": wind_total(spec, 2),
        "solar": solar_total(spec),
    }


def totals_csv(spec: ParcelSpec) -> str:
    lines = ["lease,total_cents,total_dollars"]
    for name, cents in totals(spec).items():
        lines.append(f"{name},{cents},{cents / 100:.2f}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# files
# ---------------------------------------------------------------------------

def rate_card_from_mapping(values: Mapping[str, str], name: str = "custom") -> RateCard:
    values = dict(values)
    name = values.pop("name", name)
    rates = {}
    for key, text in values.items():
        try:
            rates[key] = int(text)
        except ValueError:
            raise LeaseError(f"rate {key}: expected whole cents, got {text!r}") from None
    return RateCard(rates, name)


def load_rate_card(path: str | Path) -> RateCard:
    return rate_card_from_mapping(read_kv(path), Path(path).stem)


def parse_rate_card(text: str, name: str = "custom") -> RateCard:
    return rate_card_from_mapping(parse_kv(text), name)


def parcel_from_mapping(values: Mapping[str, str], rates: RateCard = DEFAULT_CARD) -> ParcelSpec:
    missing = [k for k in PARCEL_KEYS if k not in values]
    if missing:
        raise LeaseError(f"parcel is missing key(s): {', '.join(missing)}")
    unknown = sorted(set(values) - set(PARCEL_KEYS))
    if unknown:
        raise LeaseError(f"parcel has unknown key(s): {', '.join(unknown)}")
    return ParcelSpec(*(_decimal(values[k].strip(), k) for k in PARCEL_KEYS), rates=rates)


def load_parcel(path: str | Path, rates: RateCard = DEFAULT_CARD) -> ParcelSpec:
    return parcel_from_mapping(read_kv(path), rates)


def bundled_path(name: str) -> Path:
    return Path(str(files("landiv") / "data" / "lease" / name))


def default_parcel(rates: RateCard = DEFAULT_CARD) -> ParcelSpec:
    return load_parcel(bundled_path("parcel-80acre.cfg"), rates)
