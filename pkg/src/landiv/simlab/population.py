"""Simulated agents with every counterfactual stored.

Choices come from a random-utility model.  Each agent has base utilities
``W_k = log(choice_share_k) + selection * s * TASTE_LOADING_k + gumbel_k`` where
``s = -1, 0, 1`` for never-takers, compliers and always-takers.  At low income
the agent picks ``argmax W``.  At high income some options leave the choice
set: option ``k`` exits when a uniform draw ``u_k`` falls below the exit
probability for the agent's margin on ``k``.  Using one uniform for both
margins couples the two potential responses, so ``Omega_1 = Omega_0`` holds
agent by agent whenever the two exit probabilities coincide.

The margin ``M_k`` is 1 when the best option other than ``k`` (under ``W``) is
the lowest-indexed of the remaining options.
"""

from __future__ import annotations

import csv
import io
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from landiv.simlab.scenario import N_OPTIONS, ScenarioConfig

NEVER, COMPLIER, ALWAYS = 0, 1, 2
TYPE_NAMES = ("never", "complier", "always")
TASTE_LOADING = np.array([0.0, 1.0, -1.0])
_GUMBEL_MEAN = np.euler_gamma
_GUMBEL_SD = np.pi / np.sqrt(6.0)


@dataclass(frozen=True)
class AgentDraw:
    z: int
    ic0: int
    ic1: int
    compliance_type: str
    y_k_ic: np.ndarray     # (3, 2): y^k_ic
    m_k: np.ndarray        # (3,)
    d_k_pot: np.ndarray    # (3, 2, 2): d^k_ic(m)
    ic: int
    d: np.ndarray          # (3,) realized choice indicators
    y: float


def _draw_rng(config: ScenarioConfig, rng) -> np.random.Generator:
    if rng is None:
        return np.random.default_rng(config.seed)
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def _argmax_masked(w: np.ndarray, exited: np.ndarray) -> np.ndarray:
    # ties go to the lowest index, as np.argmax does
    return np.argmax(np.where(exited, -np.inf, w), axis=1)


def _remaining(k: int) -> tuple[int, int]:
    return tuple(j for j in range(N_OPTIONS) if j != k)


class Population(Sequence):
    """Struct-of-arrays population; indexing yields ``AgentDraw`` records."""

    def __init__(self, config: ScenarioConfig, *, types, z, utilities, exit_uniforms, margins,
                 y_pot, delta):
        self.config = config
        self.types = types
        self.z = z
        self.ic0 = (types == ALWAYS).astype(np.int8)
        self.ic1 = (types != NEVER).astype(np.int8)
        self.ic = self.ic0 + (self.ic1 - self.ic0) * z
        self.utilities = utilities
        self.exit_uniforms = exit_uniforms
        self.margins = margins
        self.y_pot = y_pot          # (n, 3, 2)
        self.delta = delta          # (n, 3): Delta^0, Delta^1, Delta^2
        self._build_choices()

    # -- choices -----------------------------------------------------------
    def _exited(self, margins: np.ndarray) -> np.ndarray:
        return np.where(margins == 1, self._exit1, self._exit0)

    def _build_choices(self):
        n = len(self.types)
        w = self.utilities
        q1 = np.asarray(self.config.exit_margin1)
        q0 = np.asarray(self.config.exit_margin0)
        self._exit1 = self.exit_uniforms < q1
        self._exit0 = self.exit_uniforms < q0
        low = np.argmax(w, axis=1).astype(np.int8)
        high = _argmax_masked(w, self._exited(self.margins)).astype(np.int8)
        # worlds[:, k, ic, m]: option chosen when option k's margin is set to m
        worlds = np.empty((n, N_OPTIONS, 2, 2), dtype=np.int8)
        worlds[:, :, 0, :] = low[:, None, None]
        for k in range(N_OPTIONS):
            for m in (0, 1):
                if q0[k] == q1[k]:
                    # option k's margin does not move its exit, so the world is the realized one
                    worlds[:, k, 1, m] = high
                    continue
                margins = self.margins.copy()
                margins[:, k] = m
                worlds[:, k, 1, m] = _argmax_masked(w, self._exited(margins))
        self.worlds = worlds
        self.d_pot = (worlds == np.arange(N_OPTIONS)[None, :, None, None]).astype(np.int8)
        # choice at each income level under the agent's own margins
        self.choice_at = np.column_stack([low, high])
        self.choice = np.where(self.ic == 1, self.choice_at[:, 1], self.choice_at[:, 0])
        self.d = (self.choice[:, None] == np.arange(N_OPTIONS)).astype(np.int8)
        rows = np.arange(n)
        self.y_at = np.column_stack([self.y_pot[rows, self.choice_at[:, 0], 0],
                                     self.y_pot[rows, self.choice_at[:, 1], 1]])
        self.y = self.y_pot[rows, self.choice, self.ic]
        # next-best option once the realized choice is removed, under base utilities
        masked = w.copy()
        masked[rows, self.choice] = -np.inf
        self.next_best = np.argmax(masked, axis=1)

    # -- derived views -----------------------------------------------------
    @property
    def complier(self) -> np.ndarray:
        return self.types == COMPLIER

    def omega(self, k: int, m: int) -> np.ndarray:
        """d^k_1(m) - d^k_0(m)."""
        return self.d_pot[:, k, 1, m].astype(float) - self.d_pot[:, k, 0, m]

    def gamma0(self, k: int) -> np.ndarray:
        """d^k_0(1) - d^k_0(0)."""
        return self.d_pot[:, k, 0, 1].astype(float) - self.d_pot[:, k, 0, 0]

    def omega_own_margin(self, k: int) -> np.ndarray:
        return np.where(self.margins[:, k] == 1, self.omega(k, 1), self.omega(k, 0))

    def d_at(self, ic: np.ndarray) -> np.ndarray:
        """Choice indicators when income is set to ``ic`` (own margins)."""
        choice = np.where(np.asarray(ic) == 1, self.choice_at[:, 1], self.choice_at[:, 0])
        return (choice[:, None] == np.arange(N_OPTIONS)).astype(np.int8)

    # -- Sequence ------------------------------------------------------------
    def __len__(self) -> int:
        return len(self.types)

    def __getitem__(self, i):
        if isinstance(i, slice):
            return [self[j] for j in range(*i.indices(len(self)))]
        return AgentDraw(
            z=int(self.z[i]), ic0=int(self.ic0[i]), ic1=int(self.ic1[i]),
            compliance_type=TYPE_NAMES[self.types[i]], y_k_ic=self.y_pot[i].copy(),
            m_k=self.margins[i].copy(), d_k_pot=self.d_pot[i].copy(), ic=int(self.ic[i]),
            d=self.d[i].copy(), y=float(self.y[i]),
        )


def draw_population(config: ScenarioConfig, rng=None) -> Population:
    """Draw ``config.n`` agents.  ``rng`` defaults to ``config.seed``."""
    rng = _draw_rng(config, rng)
    n = config.n
    cuts = np.cumsum(config.shares)[:-1]
    types = np.searchsorted(cuts, rng.random(n), side="right").astype(np.int8)
    z = (rng.random(n) < config.z_prob).astype(np.int8)
    s = types.astype(float) - 1.0
    gumbel = rng.gumbel(size=(n, N_OPTIONS))
    utilities = (np.log(np.asarray(config.choice_shares))[None, :]
                 + config.selection * s[:, None] * TASTE_LOADING[None, :] + gumbel)
    exit_uniforms = rng.random((n, N_OPTIONS))

    if config.restrictive:
        margins = np.zeros((n, N_OPTIONS), dtype=np.int8)
    else:
        margins = np.empty((n, N_OPTIONS), dtype=np.int8)
        for k in range(N_OPTIONS):
            a, b = _remaining(k)
            best = np.where(utilities[:, b] > utilities[:, a], b, a)
            margins[:, k] = best == min(a, b)

    taste = (gumbel - _GUMBEL_MEAN) / _GUMBEL_SD
    xi = rng.standard_normal((n, N_OPTIONS))
    noise = rng.standard_normal((n, N_OPTIONS))
    mu, sd = np.asarray(config.delta_mean), np.asarray(config.delta_sd)
    delta = mu[None, :] + sd[None, :] * xi
    delta[:, 0] += config.selection * s + config.delta_choice_selection * taste[:, 1]
    delta[:, 1:] += config.delta_choice_selection * taste[:, 1:]
    y0 = (np.asarray(config.level_mean)[None, :] + config.selection * s[:, None]
          + config.level_sd * noise)
    y1 = y0 + delta[:, [0]]
    y1[:, 1:] += delta[:, 1:]
    y_pot = np.stack([y0, y1], axis=2)
    return Population(config, types=types, z=z, utilities=utilities,
                      exit_uniforms=exit_uniforms, margins=margins, y_pot=y_pot, delta=delta)


OBSERVABLE_COLUMNS = ("county_id", "year", "slr", "wnd", "days_above_t", "log_income", "d0",
                      "outcome")


def realize_observables(pop: Population) -> dict[str, np.ndarray]:
    """Observed columns in panel naming: slr/wnd carry d^1/d^2, days_above_t carries z,
    log_income carries Ic; ``d0`` and ``outcome`` are extra columns.

    Every agent gets its own county id and the single year 2000, so keys stay
    unique; fits on this table should disable fixed effects.
    """
    n = len(pop)
    return {
        "county_id": np.array([f"A{i:07d}" for i in range(n)]),
        "year": np.full(n, 2000),
        "slr": pop.d[:, 1].astype(float),
        "wnd": pop.d[:, 2].astype(float),
        "days_above_t": pop.z.astype(float),
        "log_income": pop.ic.astype(float),
        "d0": pop.d[:, 0].astype(float),
        "outcome": pop.y.astype(float),
    }


def format_observables(table: dict[str, np.ndarray]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(OBSERVABLE_COLUMNS)
    columns = [table[c] for c in OBSERVABLE_COLUMNS]
    for row in zip(*columns):
        county, year, *rest = row
        # the first four observables are 0/1 indicators
        writer.writerow([county, int(year), *(int(v) if i < 4 else repr(float(v))
                                              for i, v in enumerate(rest))])
    return buffer.getvalue()


def write_observables(pop: Population, path: str | Path) -> None:
    Path(path).write_text(format_observables(realize_observables(pop)), newline="")
