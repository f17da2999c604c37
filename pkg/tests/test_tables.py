import csv
import io

import numpy as np
import pytest
from oracles import random_panel

from landiv.estimator import CONST, DesignSpec, FitResult, fit
from landiv.tables import NEXT_BEST_LAYOUT, TableLayout, label, render_csv, render_table


def _result(coef, se, names=("log_income", CONST), r2=0.5, n=100):
    coef, se = np.asarray(coef, float), np.asarray(se, float)
    return FitResult(tuple(names), coef, se, np.diag(se ** 2), n, 1000, r2, "2sls", "slr",
                     fe_absorbed=("county", "year"))


def test_stars_and_parentheses():
    text = render_table([_result([-1.0, 2.0], [0.1, 5.0])])
    row = next(line for line in text.splitlines() if line.startswith("Farm Return"))
    assert row.split()[-1] == "-1.000***"
    se_row = text.splitlines()[text.splitlines().index(row) + 1]
    assert se_row.strip() == "(0.100)"
    assert "Constant" in text
    assert text.index("Farm Return") < text.index("Constant")


def test_five_column_layout_with_empty_column():
    results = [_result([-0.3, 1], [0.3, 1]), _result([-1.1, 1], [0.4, 1]), None,
               _result([0.1, 1], [0.5, 1]), _result([0.0, 1], [0.5, 1])]
    text = render_table(results, NEXT_BEST_LAYOUT)
    lines = text.splitlines()
    assert "Land Use Ranked Second" in lines[1]
    assert lines[2].split() == ["ALL", "Agriculture", "Residential", "Solar", "Wind"]
    obs = next(line for line in lines if line.startswith("Obs."))
    assert obs.split()[1:] == ["100", "100", "empty", "100", "100"]
    widths = {len(line) for line in lines if line.startswith(("Obs.", "R-squared", "---"))}
    assert len(widths) == 1


def test_footer_fixed_effects_and_missing_r2():
    r = _result([1.0, 0.0], [1.0, 1.0], r2=None)
    text = render_table([r])
    assert "County Fixed Effects" in text and "Yes" in text
    r2 = next(line for line in text.splitlines() if line.startswith("R-squared"))
    assert r2.split()[-1] == "."


def test_header_count_must_match():
    with pytest.raises(ValueError):
        render_table([_result([1, 1], [1, 1])], NEXT_BEST_LAYOUT)


def test_digits_and_labels():
    text = render_table([_result([1.23456, 0], [0.5, 1])], TableLayout(digits=2))
    assert "1.23" in text and "1.235" not in text
    assert label("log_income:d1") == "Farm Return x d1"


def test_csv_round_trips_estimates():
    data = random_panel(np.random.default_rng(0))
    res = fit(DesignSpec("y", endogenous="x", instrument="z", controls=("c1",)), data)
    rows = list(csv.DictReader(io.StringIO(render_csv([res, None], TableLayout(headers=("A", "B"))))))
    body = [r for r in rows if r["column"] == "A"]
    assert [r["term"] for r in body] == list(res.names)
    assert [float(r["coef"]) for r in body] == res.coef.tolist()
    assert [r["n_obs"] for r in rows if r["column"] == "B"] == ["0"]
