"""Seeded Monte Carlo replications of the proposition checks."""

from __future__ import annotations

import csv
import io
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from landiv.simlab.population import draw_population
from landiv.simlab.scenario import ScenarioConfig
from landiv.simlab.verify import DEFAULT_ATOL, check_hypothesis, verify_proposition


def replication_seed(base_seed: int, rep: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([base_seed, rep])


@dataclass(frozen=True)
class ReplicationResult:
    rep: int
    rows: tuple[tuple[str, str, float, float, float, bool, bool], ...]
    # (proposition, check, estimate, se, target, passed, counted)


def run_one(config: ScenarioConfig, rep: int, propositions: Sequence[str],
            atol: float = DEFAULT_ATOL, options: Sequence[int] | None = None) -> ReplicationResult:
    rng = np.random.default_rng(replication_seed(config.seed, rep))
    pop = draw_population(config, rng)
    rows = []
    oracle = None
    for which in propositions:
        report = verify_proposition(pop, which, atol=atol, oracle=oracle, options=options)
        oracle = report.oracle
        rows.extend((which, c.name, c.estimate, c.se, c.target, c.passed, c.counted)
                    for c in report.checks)
    return ReplicationResult(rep, tuple(rows))


def _run_chunk(args):
    config, reps, propositions, atol, options = args
    return [run_one(config, rep, propositions, atol, options) for rep in reps]


@dataclass(frozen=True)
class CheckSummary:
    proposition: str
    check: str
    n_reps: int
    mean: float
    sd: float
    mean_target: float
    bias: float           # mean(estimate - target)
    coverage: float       # share of reps whose 95% interval covers the target
    pass_rate: float
    counted: bool
    planted: float | None = None

    @property
    def bias_bound(self) -> float:
        """Three Monte Carlo standard errors of the mean estimate."""
        return 3 * self.sd / math.sqrt(self.n_reps) if self.n_reps > 1 else math.inf

    @property
    def bias_vs_planted(self) -> float | None:
        return None if self.planted is None else self.mean - self.planted


@dataclass(frozen=True)
class MonteCarloSummary:
    scenario: str
    n_reps: int
    base_seed: int
    atol: float
    checks: tuple[CheckSummary, ...]
    replications: tuple[ReplicationResult, ...]

    def verdict(self, s: CheckSummary) -> bool:
        if self.n_reps == 1:
            return s.pass_rate == 1.0
        return abs(s.bias) <= max(self.atol, s.bias_bound)

    @property
    def passed(self) -> bool:
        return all(self.verdict(s) for s in self.checks if s.counted)

    def format(self) -> str:
        lines = [f"scenario {self.scenario}  reps {self.n_reps}  seed {self.base_seed}",
                 f"{'check':<44}{'mean':>10}{'sd':>10}{'target':>10}{'bias':>11}"
                 f"{'cover':>8}{'pass':>8}  verdict"]
        for s in self.checks:
            status = "PASS" if self.verdict(s) else "FAIL"
            if not s.counted:
                status += " (diagnostic)"
            lines.append(f"{s.proposition + ' ' + s.check:<44}{s.mean:>10.5f}{s.sd:>10.5f}"
                         f"{s.mean_target:>10.5f}{s.bias:>11.2e}{s.coverage:>8.3f}{s.pass_rate:>8.3f}"
                         f"  {status}")
            if s.planted is not None:
                lines.append(f"{'':<4}planted {s.planted:.5f}; mean - planted {s.bias_vs_planted:.2e}"
                             f" (bound {s.bias_bound:.2e})")
        lines.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["proposition", "check", "n_reps", "mean", "sd", "mean_target", "bias",
                         "coverage", "pass_rate", "counted", "verdict"])
        for s in self.checks:
            writer.writerow([s.proposition, s.check, s.n_reps, repr(s.mean), repr(s.sd),
                             repr(s.mean_target), repr(s.bias), repr(s.coverage), repr(s.pass_rate),
                             int(s.counted), "PASS" if self.verdict(s) else "FAIL"])
        return buffer.getvalue()


def _planted_for(config: ScenarioConfig, proposition: str, check: str) -> float | None:
    if config.planted_option is None or not proposition.startswith("P3"):
        return None
    if check == f"rho1[{config.planted_option}] vs E[Omega0|c]" and proposition in ("P3i", "P3ii"):
        return config.planted_value
    return None


def summarize(config: ScenarioConfig, results: Sequence[ReplicationResult],
              atol: float) -> MonteCarloSummary:
    results = sorted(results, key=lambda r: r.rep)
    keys = [(p, c, counted) for p, c, *_, counted in results[0].rows]
    checks = []
    for i, (prop, name, counted) in enumerate(keys):
        est = np.array([r.rows[i][2] for r in results])
        se = np.array([r.rows[i][3] for r in results])
        target = np.array([r.rows[i][4] for r in results])
        passed = np.array([r.rows[i][5] for r in results])
        n = len(results)
        checks.append(CheckSummary(
            proposition=prop, check=name, n_reps=n, mean=float(est.mean()),
            sd=float(est.std(ddof=1)) if n > 1 else 0.0, mean_target=float(target.mean()),
            bias=float((est - target).mean()),
            coverage=float(np.mean(np.abs(est - target) <= 1.959963984540054 * se)),
            pass_rate=float(passed.mean()), counted=counted,
            planted=_planted_for(config, prop, name),
        ))
    return MonteCarloSummary(config.name or "scenario", len(results), config.seed, atol,
                             tuple(checks), tuple(results))


def run_replications(config: ScenarioConfig, n_reps: int,
                     propositions: Sequence[str] | None = None, *, workers: int = 1,
                     atol: float = DEFAULT_ATOL,
                     options: Sequence[int] | None = None) -> MonteCarloSummary:
    """Run ``n_reps`` independent replications and summarize them in index order.

    Replication ``r`` draws from ``SeedSequence([config.seed, r])`` so the
    result does not depend on ``workers`` or on scheduling order.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be at least 1")
    propositions = tuple(propositions or config.propositions)
    if not propositions:
        raise ValueError("no propositions to verify")
    for which in propositions:
        check_hypothesis(config, which)
    reps = list(range(n_reps))
    if workers <= 1 or n_reps == 1:
        results = _run_chunk((config, reps, propositions, atol, options))
    else:
        chunks = [reps[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = pool.map(_run_chunk, [(config, c, propositions, atol, options)
                                          for c in chunks if c])
            results = [r for part in parts for r in part]
    return summarize(config, results, atol)
