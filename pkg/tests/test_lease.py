import pytest
from hypothesis import given
from hypothesis import strategies as st

from landiv.lease import (
    DEFAULT_CARD, PARCEL_KEYS, LeaseError, ParcelSpec, RateCard, crop_lease_total,
    default_parcel, format_dollars, itemized_table, load_rate_card, parcel_from_mapping,
    parse_rate_card, solar_total, totals, wind_total,
)

# Totals from the published representative-lease table, in cents.
PUBLISHED = {"crop": 2_400_000, "wind_scheme1": 6_495_000, "wind_scheme2": 3_185_000,
             "solar": 8_195_000}


def test_published_totals():
    assert totals(default_parcel()) == PUBLISHED


def test_table_lists_each_total():
    text = itemized_table(default_parcel())
    for dollars in ("$24,000", "$64,950", "$31,850", "$81,950"):
        assert dollars in text


def test_crop_rate_override():
    card = DEFAULT_CARD.override(crop_per_acre=40_000)
    assert crop_lease_total(default_parcel(card)) == 3_200_000


def test_missing_rate_key_is_named():
    with pytest.raises(LeaseError, match="solar_per_acre"):
        parse_rate_card("crop_per_acre = 30000\nwind_per_mw = 750000\nturbine_flat = 200000\n"
                        "blanket_per_acre = 3000\nroad_per_foot = 150\n"
                        "transmission_per_foot = 150\n")


def test_rates_must_be_whole_cents():
    with pytest.raises(LeaseError):
        parse_rate_card("crop_per_acre = 300.5\n")
    with pytest.raises(LeaseError):
        RateCard({**DEFAULT_CARD.rates, "crop_per_acre": -1})


def test_bundled_card_file_matches_default():
    from landiv.lease import bundled_path

    assert load_rate_card(bundled_path("indiana-2024-midpoint.cfg")).rates == DEFAULT_CARD.rates


def test_fractional_acres_are_cent_exact():
    p = parcel_from_mapping({k: "0" for k in PARCEL_KEYS} | {"total_acres": "80.125"})
    assert crop_lease_total(p) == 2_403_750   # 80.125 * 30000 exactly
    p = parcel_from_mapping({k: "0" for k in PARCEL_KEYS} | {"total_acres": "0.00001"})
    assert crop_lease_total(p) == 0           # 0.3 cents rounds half-even to 0


def test_parcel_checks_acreage():
    with pytest.raises(LeaseError, match="exceeds"):
        ParcelSpec(10, 0, 0, 0, 0, 0, 8, 5)
    with pytest.raises(LeaseError, match="negative|nonnegative"):
        ParcelSpec(10, -1, 0, 0, 0, 0, 0, 0)


quantities = st.decimals(min_value=0, max_value=10_000, places=2, allow_nan=False,
                         allow_infinity=False)


@st.composite
def parcels(draw):
    total = draw(quantities)
    solar = draw(st.decimals(min_value=0, max_value=total, places=2))
    residual = draw(st.decimals(min_value=0, max_value=total - solar, places=2))
    farm_w = draw(st.decimals(min_value=0, max_value=total, places=2))
    return ParcelSpec(total, draw(st.integers(0, 10)), draw(quantities), draw(quantities),
                      draw(quantities), farm_w, solar, residual)


@given(parcels())
def test_doubling_doubles_totals(p):
    # sub-cent line amounts round once per line, so allow one cent per line item
    doubled = totals(p.scaled(2))
    for key, value in totals(p).items():
        assert abs(doubled[key] - 2 * value) <= 5


@given(parcels())
def test_doubling_whole_quantities_is_exact(p):
    whole = p.scaled(100)
    assert totals(whole.scaled(2)) == {k: 2 * v for k, v in totals(whole).items()}


@given(parcels())
def test_integer_quantities_are_exact(p):
    whole = p.scaled(100)  # 2-decimal quantities become whole numbers
    assert crop_lease_total(whole) == int(whole.total_acres) * 30_000
    for scheme in (1, 2):
        assert isinstance(wind_total(whole, scheme), int)
    assert solar_total(whole) == (int(whole.solar_acres) * 125_000
                                  + int(whole.residual_crop_acres) * 30_000)


def test_format_dollars():
    assert format_dollars(2_400_000) == "$24,000"
    assert format_dollars(150) == "$1.50"
    assert format_dollars(-5) == "-$0.05"
