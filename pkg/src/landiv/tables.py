"""Fixed-width and CSV rendering of regression results."""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass

from landiv.estimator import CONST, FitResult

LABELS = {
    "log_income": "Farm Return",
    "high_heat_days": "High Heat Days",
    "days_above_t": "High Heat Days",
    "median_age": "Median Census Age",
    "unemployment_rate": "Unemployment Rate",
    "log_gdp": "log(GDP)",
    "population": "Population",
    "labor_force": "Labor Force",
    CONST: "Constant",
}
NEXT_BEST_HEADERS = ("ALL", "Agriculture", "Residential", "Solar", "Wind")
NEXT_BEST_GROUP = "Land Use Ranked Second"


@dataclass(frozen=True)
class TableLayout:
    headers: tuple[str, ...] | None = None
    group_header: str | None = None
    title: str = ""
    terms: tuple[str, ...] | None = None  # row order; default is first-seen order
    label_width: int = 22
    col_width: int = 14
    digits: int = 3


NEXT_BEST_LAYOUT = TableLayout(headers=NEXT_BEST_HEADERS, group_header=NEXT_BEST_GROUP)


def label(term: str) -> str:
    if term in LABELS:
        return LABELS[term]
    if ":" in term:
        return " x ".join(label(part) for part in term.split(":"))
    return term


def _terms(results: Sequence[FitResult | None], layout: TableLayout) -> list[str]:
    if layout.terms is not None:
        return list(layout.terms)
    seen: list[str] = []
    for r in results:
        if r is None:
            continue
        for name in r.names:
            if name not in seen:
                seen.append(name)
    # constant goes last, as in the usual table layout
    if CONST in seen:
        seen.remove(CONST)
        seen.append(CONST)
    return seen


def _headers(results, layout) -> list[str]:
    if layout.headers is not None:
        if len(layout.headers) != len(results):
            raise ValueError(f"{len(layout.headers)} headers for {len(results)} results")
        return list(layout.headers)
    return [r.label if r is not None and r.label else f"({i + 1})" for i, r in enumerate(results)]


def _fmt(value: float, digits: int) -> str:
    return f"{value:.{digits}f}"


def render_table(results: Sequence[FitResult | None], layout: TableLayout = TableLayout()) -> str:
    """Coefficients with SEs in parentheses beneath, then an Obs./FE/R-squared footer.

    ``None`` entries (an empty subsample) render blank with "empty" as the Obs. count.
    """
    results = list(results)
    terms = _terms(results, layout)
    headers = _headers(results, layout)
    lw, cw = layout.label_width, layout.col_width
    ncol = len(results)
    rule = "-" * (lw + cw * ncol)
    lines = []
    if layout.title:
        lines.append(layout.title)
    lines.append(rule)
    if layout.group_header:
        lines.append(" " * lw + f"{layout.group_header:^{cw * ncol}}")
    lines.append(f"{'':<{lw}}" + "".join(f"{h:>{cw}}" for h in headers))
    lines.append(rule)
    for term in terms:
        coef_row, se_row = [], []
        for r in results:
            if r is None or term not in r.names:
                coef_row.append("")
                se_row.append("")
                continue
            coef_row.append(_fmt(r.coefficient(term), layout.digits) + r.stars(term))
            se_row.append(f"({_fmt(r.stderr(term), layout.digits)})")
        lines.append(f"{label(term):<{lw}}" + "".join(f"{c:>{cw}}" for c in coef_row))
        lines.append(f"{'':<{lw}}" + "".join(f"{c:>{cw}}" for c in se_row))
    lines.append(rule)
    footer = [
        ("Obs.", [str(r.n_obs) if r else "empty" for r in results]),
        ("County Fixed Effects", [_yes(r, "county") for r in results]),
        ("Year Fixed Effects", [_yes(r, "year") for r in results]),
        ("R-squared", [_r2(r, layout.digits) for r in results]),
    ]
    for name, cells in footer:
        lines.append(f"{name:<{lw}}" + "".join(f"{c:>{cw}}" for c in cells))
    lines.append(rule)
    lines.append("Standard errors in parentheses. *** p<0.01, ** p<0.05, * p<0.10")
    return "\n".join(lines) + "\n"


def _yes(r: FitResult | None, fe: str) -> str:
    if r is None:
        return ""
    return "Yes" if fe in r.fe_absorbed else "No"


def _r2(r: FitResult | None, digits: int) -> str:
    if r is None:
        return ""
    return "." if r.r_squared is None else _fmt(r.r_squared, digits)


def render_csv(results: Sequence[FitResult | None], layout: TableLayout = TableLayout()) -> str:
    """Long-format CSV: one row per (column, term)."""
    results = list(results)
    headers = _headers(results, layout)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["column", "term", "coef", "se", "t", "p", "stars", "n_obs", "r_squared",
                     "method", "se_type"])
    for header, r in zip(headers, results):
        if r is None:
            writer.writerow([header, "", "", "", "", "", "", 0, "", "", ""])
            continue
        t, p = r.tstats, r.pvalues
        for i, name in enumerate(r.names):
            writer.writerow([header, name, repr(float(r.coef[i])), repr(float(r.se[i])),
                             repr(float(t[i])), repr(float(p[i])), r.stars(name), r.n_obs,
                             "" if r.r_squared is None else repr(float(r.r_squared)),
                             r.method, r.se_type])
    return buffer.getvalue()
