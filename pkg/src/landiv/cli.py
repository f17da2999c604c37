"""Command-line entry point: ``landiv <subcommand> ...``.

Exit codes: 0 success, 2 input error, 3 a scenario violates the requested
proposition's hypothesis, 4 numeric failure (rank deficiency, non-convergence).
Every run writes ``manifest.json`` into ``--out-dir`` with SHA-256 hashes of
its inputs and outputs.  Output files never embed timestamps, so identical
arguments and inputs reproduce identical bytes.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

from landiv import __version__
from landiv.estimator import (
    DesignSpec, EstimationError, fit, next_best_columns,
)
from landiv.instrument import (
    DEFAULT_THRESHOLD_F, GROWING_SEASON, SeasonWindow, attach_instrument, heat_day_table,
    incomes_from_yield, load_daily_temperatures, load_prices, write_daily_temperatures,
)
from landiv.kvfile import parse_bool, read_kv, split_list
from landiv.lease import (
    DEFAULT_CARD, LeaseError, bundled_path, itemized_table, load_parcel, load_rate_card,
    totals_csv,
)
from landiv.panel import (
    LandUse, PanelError, format_violations, load_panel, load_schema, read_panel, summarize,
    validate_panel, write_panel,
)
from landiv.ranking import (
    format_rank_table, format_rankings, load_rankings, rank_panel, tabulate_rankings,
)
from landiv.simlab.montecarlo import run_replications
from landiv.simlab.scenario import bundled_scenario_path, load_scenario
from landiv.simlab.verify import HypothesisViolation
from landiv.tables import NEXT_BEST_LAYOUT, TableLayout, render_csv, render_table

EXIT_OK, EXIT_INPUT, EXIT_HYPOTHESIS, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(ValueError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Run:
    """Collects inputs and outputs of one invocation and writes the manifest."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out_dir = Path(args.out_dir)
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []

    def input(self, path) -> Path:
        path = Path(path)
        if not path.exists():
            raise UsageError(f"input file not found: {path}")
        self.inputs.append(path)
        return path

    def write(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        path.write_text(text, newline="")
        self.outputs.append(path)
        return path

    def register(self, path: Path) -> None:
        self.outputs.append(path)

    def manifest(self, status: int) -> None:
        settings = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(self.args).items()
                    if k not in ("func",)}
        record = {
            "tool": "landiv",
            "version": __version__,
            "subcommand": self.args.command,
            "arguments": settings,
            "config_paths": [self.args.config] if self.args.config else [],
            "seed": self.args.seed,
            "inputs": {str(p): _sha256(p) for p in self.inputs},
            "outputs": {str(p): _sha256(p) for p in self.outputs},
            "exit_code": status,
            "timestamp": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        }
        (self.out_dir / "manifest.json").write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _schema(run: Run, path):
    return load_schema(run.input(path)) if path else None


def _panel(run: Run, args, *, strict: bool = True):
    path = run.input(args.panel)
    return load_panel(path, _schema(run, args.schema)) if strict else read_panel(path, _schema(run, args.schema), strict=False)


def _parse_spec(values: dict[str, str]) -> tuple[DesignSpec, dict]:
    known = {"dependent", "endogenous", "instrument", "controls", "interactions", "fixed_effects",
             "subsample", "se_type", "layout", "threshold", "window", "weak_f_floor", "digits"}
    unknown = set(values) - known
    if unknown:
        raise UsageError(f"unknown spec key(s): {', '.join(sorted(unknown))}")
    if "dependent" not in values:
        raise UsageError("spec file needs a 'dependent' entry")
    fe_text = values.get("fixed_effects", "county, year").strip().lower()
    fixed = frozenset() if fe_text in ("", "none") else frozenset(split_list(fe_text))
    spec = DesignSpec(
        dependent=values["dependent"],
        endogenous=values.get("endogenous") or None,
        instrument=values.get("instrument") or None,
        controls=tuple(split_list(values["controls"])) if "controls" in values
        else ("median_age", "unemployment_rate"),
        interactions=tuple(split_list(values.get("interactions", ""))),
        fixed_effects=fixed,
        subsample=LandUse.parse(values["subsample"]) if values.get("subsample") else None,
        se_type=values.get("se_type", "classical"),
        weak_f_floor=float(values.get("weak_f_floor", 10.0)),
    )
    extra = {
        "layout": values.get("layout", "").strip().lower() or None,
        "threshold": float(values["threshold"]) if values.get("threshold") else None,
        "window": SeasonWindow.parse(values["window"]) if values.get("window") else GROWING_SEASON,
        "digits": int(values.get("digits", 3)),
    }
    return spec, extra


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_validate(args, run: Run) -> int:
    panel = _panel(run, args, strict=False)
    problems = validate_panel(panel)
    report = format_violations(problems) if problems else "no violations\n"
    run.write("validation.txt", report)
    sys.stdout.write(report)
    if not problems and panel:
        summary = summarize(panel).format()
        run.write("summary.txt", summary)
        sys.stdout.write(summary)
    return EXIT_OK if not problems else EXIT_INPUT


def cmd_rank(args, run: Run) -> int:
    panel = _panel(run, args)
    rankings = rank_panel(panel, args.seed, reseed=args.reseed)
    run.write("rankings.csv", format_rankings(rankings))
    table = format_rank_table(tabulate_rankings(rankings))
    run.write("rank_table.txt", table)
    sys.stdout.write(table)
    return EXIT_OK


def cmd_estimate(args, run: Run) -> int:
    spec, extra = _parse_spec(read_kv(run.input(args.spec)))
    panel = _panel(run, args)
    if extra["threshold"] is not None:
        if not args.temperatures:
            raise UsageError("spec sets a heat threshold; pass --temperatures to recompute heat days")
        series = load_daily_temperatures(run.input(args.temperatures))
        years = sorted({obs.year for obs in panel})
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            counts = {(h.county_id, h.year): h.days
                      for h in heat_day_table(series, years, extra["window"], extra["threshold"])}
        incomes = {obs.key: obs.log_income for obs in panel if obs.log_income is not None}
        panel, report = attach_instrument(panel, counts, incomes, tolerance=args.tolerance)
        run.write("attach_report.txt", report.format())
    layout = extra["layout"] or ("next_best" if args.rankings else "single")
    if layout not in ("next_best", "single"):
        raise UsageError(f"layout must be next_best or single, got {layout!r}")
    needs_rankings = layout == "next_best" or spec.subsample is not None
    if needs_rankings and not args.rankings:
        raise UsageError("this specification needs next-best rankings; pass --rankings")
    rankings = load_rankings(run.input(args.rankings)) if args.rankings else None
    missing = [obs.key for obs in panel if rankings is not None and obs.key not in rankings]
    if needs_rankings and missing:
        raise UsageError(f"{len(missing)} panel rows have no ranking, e.g. {missing[0]}")

    notes = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if layout == "next_best":
            results = next_best_columns(spec, panel, rankings)
            headers = NEXT_BEST_LAYOUT.headers
            for h, r in zip(headers, results):
                if r is None:
                    notes.append(f"column {h}: empty subsample")
            table_layout = replace(NEXT_BEST_LAYOUT, digits=extra["digits"])
        else:
            results = [fit(spec, panel, rankings)]
            table_layout = TableLayout(headers=(spec.subsample.label if spec.subsample else "ALL",),
                                       digits=extra["digits"])
    notes += [str(w.message) for w in caught]

    title = f"Dependent variable: {spec.dependent}"
    text = render_table(results, replace(table_layout, title=title))
    out = [text]
    run.write("table.txt", text)
    run.write("coefficients.csv", render_csv(results, table_layout))
    if spec.endogenous is not None:
        firsts = [r.first_stage if r is not None else None for r in results]
        ftext = render_table(firsts, replace(table_layout, title=f"First stage: {spec.endogenous}"))
        fstats = "First-stage F: " + "  ".join(
            f"{h}={r.first_stage_f[0]:.2f}" if r is not None else f"{h}=."
            for h, r in zip(table_layout.headers, results)) + "\n"
        run.write("first_stage.txt", ftext + fstats)
        run.write("first_stage.csv", render_csv(firsts, table_layout))
        out += [ftext, fstats]
    dropped = [f"{h}: {r.n_dropped} rows dropped for missing values"
               for h, r in zip(table_layout.headers, results) if r is not None and r.n_dropped]
    notes += dropped
    if notes:
        run.write("notes.txt", "\n".join(notes) + "\n")
        out.append("\n".join(notes) + "\n")
    sys.stdout.write("".join(out))
    return EXIT_OK


def cmd_instrument(args, run: Run) -> int:
    panel = _panel(run, args)
    series = load_daily_temperatures(run.input(args.temperatures))
    window = SeasonWindow.parse(args.window) if args.window else GROWING_SEASON
    years = sorted({obs.year for obs in panel})
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        table = heat_day_table(series, years, window, args.threshold)
    counts = {(h.county_id, h.year): h.days for h in table}
    lines = ["county_id,year,high_heat_days,missing_days"]
    lines += [f"{h.county_id},{h.year},{h.days},{h.missing}" for h in table]
    run.write("heat_days.csv", "\n".join(lines) + "\n")
    if args.prices:
        incomes = incomes_from_yield(panel, load_prices(run.input(args.prices)))
    else:
        incomes = {obs.key: obs.log_income for obs in panel if obs.log_income is not None}
    filled, report = attach_instrument(panel, counts, incomes, tolerance=args.tolerance)
    out = run.out_dir / "panel_instrumented.csv"
    write_panel(filled, out)
    run.register(out)
    run.write("attach_report.txt", report.format())
    sys.stdout.write(report.format())
    return EXIT_OK


def cmd_lease(args, run: Run) -> int:
    card = load_rate_card(run.input(args.rates)) if args.rates else DEFAULT_CARD
    if args.set:
        changes = {}
        for item in args.set:
            key, _, value = item.partition("=")
            try:
                changes[key.strip()] = int(value)
            except ValueError:
                raise UsageError(f"--set expects key=cents, got {item!r}") from None
        card = card.override(**changes)
    parcel_path = run.input(args.parcel) if args.parcel else bundled_path("parcel-80acre.cfg")
    parcel = load_parcel(parcel_path, card)
    text = itemized_table(parcel)
    run.write("lease.txt", text)
    run.write("lease.csv", totals_csv(parcel))
    sys.stdout.write(text)
    return EXIT_OK


def _scenario_path(run: Run, name: str) -> Path:
    path = Path(name)
    if path.exists():
        return run.input(path)
    bundled = bundled_scenario_path(name.removesuffix(".cfg"))
    if bundled.exists():
        return run.input(bundled)
    raise UsageError(f"no scenario file {name!r} (and no bundled scenario of that name)")


def cmd_montecarlo(args, run: Run) -> int:
    config = load_scenario(_scenario_path(run, args.scenario))
    if args.seed_override:
        config = config.with_seed(args.seed)
    if args.n is not None:
        config = replace(config, n=args.n)
    props = split_list(args.propositions) if args.propositions else None
    summary = run_replications(config, args.reps, props, workers=args.parallel, atol=args.atol)
    text = summary.format()
    if args.reps == 1:
        text += _single_report(config, props, args.atol)
    run.write("montecarlo.txt", text)
    run.write("montecarlo.csv", summary.to_csv())
    sys.stdout.write(text)
    return EXIT_OK if summary.passed else 1


def _single_report(config, props, atol) -> str:
    """Detailed first-replication report, with the oracle's alternative expressions."""
    import numpy as np

    from landiv.simlab.montecarlo import replication_seed
    from landiv.simlab.population import draw_population
    from landiv.simlab.verify import verify_proposition

    pop = draw_population(config, np.random.default_rng(replication_seed(config.seed, 0)))
    parts = []
    for which in props or config.propositions:
        report = verify_proposition(pop, which, atol=atol)
        parts.append(report.format())
    oracle = report.oracle
    parts.append("oracle by option (complier share %.4f)\n" % oracle.complier_share)
    for m in oracle.margins:
        parts.append(f"  option {m.option}: E[Om0|c]={m.late_omega0:.5f} E[Om1|c]={m.late_omega1:.5f} "
                     f"mixing={m.mixing_term:.5f} wald={m.wald_enumerated:.5f} "
                     f"ratio/Pr(c)={m.wald_over_complier_share:.5f} E[Om0|c,M=0]={m.late_omega0_m0:.5f}\n")
    return "".join(parts)


def cmd_simulate_panel(args, run: Run) -> int:
    from landiv.simlab.panel_dgp import PanelDGP, daily_temperatures, simulate_panel

    dgp = PanelDGP(n_counties=args.counties)
    sim = simulate_panel(dgp, seed=args.seed)
    path = run.out_dir / "panel.csv"
    write_panel(sim.panel, path)
    run.register(path)
    run.write("prices.csv", "year,price\n" + "".join(f"{y},{p!r}\n" for y, p in sorted(sim.prices.items())))
    if args.temperatures:
        tpath = run.out_dir / "temperatures.csv"
        write_daily_temperatures(daily_temperatures(sim.panel, seed=args.seed), tpath)
        run.register(tpath)
    sys.stdout.write(f"wrote {len(sim.panel)} rows to {path}\n")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    def global_opts(p, default):
        p.add_argument("--seed", type=int, default=default, help="base seed for all randomness (default 0)")
        p.add_argument("--out-dir", default=default, help="directory for outputs (default .)")
        p.add_argument("--config", default=default, help="key=value file of option defaults")

    # accepted before or after the subcommand; the subcommand copy only sets when given
    common = argparse.ArgumentParser(add_help=False)
    global_opts(common, argparse.SUPPRESS)
    parser = argparse.ArgumentParser(prog="landiv", description="Land-use IV toolkit")
    global_opts(parser, None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def panel_opts(p):
        p.add_argument("--panel", required=True, help="panel CSV")
        p.add_argument("--schema", default=None, help="column map (canonical = header)")

    p = sub.add_parser("validate", parents=[common], help="check a panel CSV")
    panel_opts(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rank", parents=[common], help="preference rankings and next-best uses")
    panel_opts(p)
    p.add_argument("--reseed", type=int, default=0, help="alternative randomization index")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("estimate", parents=[common], help="OLS/2SLS tables")
    panel_opts(p)
    p.add_argument("--spec", required=True, help="specification file")
    p.add_argument("--rankings", default=None, help="rankings CSV from 'rank'")
    p.add_argument("--temperatures", default=None, help="daily temperatures for threshold variants")
    p.add_argument("--tolerance", type=float, default=0.05)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("instrument", parents=[common], help="build heat-day counts and log income")
    panel_opts(p)
    p.add_argument("--temperatures", required=True)
    p.add_argument("--prices", default=None, help="year,price CSV; log income from yield x price")
    p.add_argument("--threshold", type=float, default=DEFAULT_THRESHOLD_F)
    p.add_argument("--window", default=None, help="MM-DD:MM-DD, default 04-01:09-30")
    p.add_argument("--tolerance", type=float, default=0.05)
    p.set_defaults(func=cmd_instrument)

    p = sub.add_parser("lease", parents=[common], help="itemized lease payoffs")
    p.add_argument("--rates", default=None, help="rate card (cents); default indiana-2024-midpoint")
    p.add_argument("--parcel", default=None, help="parcel file; default the 80 acre example")
    p.add_argument("--set", action="append", default=[], metavar="KEY=CENTS")
    p.set_defaults(func=cmd_lease)

    p = sub.add_parser("montecarlo", parents=[common], help="verify propositions by simulation")
    p.add_argument("--scenario", required=True, help="scenario file or bundled name (p3iii, ...)")
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--parallel", type=int, default=1)
    p.add_argument("--propositions", default=None, help="comma list overriding the scenario's")
    p.add_argument("--n", type=int, default=None, help="override population size")
    p.add_argument("--atol", type=float, default=0.02)
    p.set_defaults(func=cmd_montecarlo)

    p = sub.add_parser("simulate-panel", parents=[common],
                       help="synthetic county panel with planted coefficients")
    p.add_argument("--counties", type=int, default=495)
    p.add_argument("--temperatures", action="store_true", help="also write daily temperatures")
    p.set_defaults(func=cmd_simulate_panel)
    return parser


_CONFIG_TYPES = {"reps": int, "parallel": int, "n": int, "counties": int, "reseed": int,
                 "threshold": float, "tolerance": float, "atol": float, "temperatures": None}


def _apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser) -> None:
    """Fill options left at their defaults from the ``--config`` file."""
    if not args.config:
        return
    values = read_kv(args.config)
    for key, text in values.items():
        dest = key.replace("-", "_")
        if not hasattr(args, dest) or dest in ("command", "func", "config"):
            raise UsageError(f"{args.config}: option {key!r} does not apply to '{args.command}'")
        current = getattr(args, dest)
        if dest == "seed":
            if current is None:
                args.seed = int(text)
            continue
        if dest == "out_dir":
            if current is None:
                args.out_dir = text
            continue
        default = parser_defaults(parser, args.command).get(dest)
        if current != default:
            continue  # command line wins
        if isinstance(default, bool):
            setattr(args, dest, parse_bool(text))
        elif dest == "set":
            setattr(args, dest, split_list(text))
        elif _CONFIG_TYPES.get(dest):
            setattr(args, dest, _CONFIG_TYPES[dest](text))
        else:
            setattr(args, dest, text)


def parser_defaults(parser: argparse.ArgumentParser, command: str) -> dict:
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            sub = action.choices[command]
            return {a.dest: a.default for a in sub._actions}
    return {}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args, parser)
    except (UsageError, OSError, ValueError) as exc:
        print(f"landiv: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    args.seed_override = args.seed is not None
    args.seed = 0 if args.seed is None else args.seed
    args.out_dir = args.out_dir or "."
    run = Run(args)
    try:
        status = args.func(args, run)
    except HypothesisViolation as exc:
        print(f"landiv: refused: {exc}", file=sys.stderr)
        status = EXIT_HYPOTHESIS
    except (EstimationError, FloatingPointError) as exc:
        print(f"landiv: numeric failure: {exc}", file=sys.stderr)
        status = EXIT_NUMERIC
    except (UsageError, PanelError, LeaseError, OSError, ValueError, KeyError) as exc:
        print(f"landiv: error: {exc}", file=sys.stderr)
        status = EXIT_INPUT
    run.manifest(status)
    return status


if __name__ == "__main__":
    sys.exit(main())
