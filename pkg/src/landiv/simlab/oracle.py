"""Estimands computed by direct averaging over stored counterfactuals."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from landiv.simlab.population import Population
from landiv.simlab.scenario import N_OPTIONS


def _mean(values: np.ndarray, mask: np.ndarray) -> float:
    return float(values[mask].mean()) if mask.any() else math.nan


@dataclass(frozen=True)
class MarginEstimands:
    """Choice-model estimands for one option ``k``."""

    option: int
    late_omega0: float          # E[Omega_0 | complier]
    late_omega1: float          # E[Omega_1 | complier]
    mixing_term: float          # E[(Omega_1 - Omega_0) M | complier]
    wald_enumerated: float      # E[d(z=1) - d(z=0)] / E[Ic_1 - Ic_0]
    wald_over_complier_share: float     # E[Omega_0 + (Omega_1 - Omega_0) M | complier] / Pr(complier)
    late_omega0_m0: float       # E[Omega_0 | complier, M = 0]
    share_m1_compliers: float


@dataclass(frozen=True)
class OracleEstimands:
    complier_share: float
    late0: float                # E[Delta0 | complier, d1 = d2 = 0]
    theta1: float               # E[(Delta0 - late0) + Delta1 | complier, d1 = 1]
    theta2: float
    delta1_late: float          # E[Delta1 | complier, d1 = 1]
    delta2_late: float
    margins: tuple[MarginEstimands, ...]
    empty_cells: tuple[str, ...] = field(default=())

    def rho1(self, k: int) -> MarginEstimands:
        return self.margins[k]


def oracle_estimands(pop: Population) -> OracleEstimands:
    c = pop.complier
    p_c = float(c.mean())
    empty = []
    d = pop.d.astype(bool)
    cell0 = c & ~d[:, 1] & ~d[:, 2]
    cell1, cell2 = c & d[:, 1], c & d[:, 2]
    for name, cell in (("complier, option 0", cell0), ("complier, option 1", cell1),
                       ("complier, option 2", cell2)):
        if not cell.any():
            empty.append(name)
    delta = pop.delta
    late0 = _mean(delta[:, 0], cell0)
    theta1 = _mean(delta[:, 0] - late0 + delta[:, 1], cell1)
    theta2 = _mean(delta[:, 0] - late0 + delta[:, 2], cell2)

    margins = []
    ic_gap = float((pop.ic1 - pop.ic0).mean())
    for k in range(N_OPTIONS):
        om0, om1 = pop.omega(k, 0), pop.omega(k, 1)
        m = pop.margins[:, k]
        own = np.where(m == 1, om1, om0)
        # d^k at z = 1 minus d^k at z = 0, agent by agent
        dz = pop.d_pot[np.arange(len(pop)), k, pop.ic1, m].astype(float) \
            - pop.d_pot[np.arange(len(pop)), k, pop.ic0, m]
        wald = float(dz.mean()) / ic_gap if ic_gap > 0 else math.nan
        late_own = _mean(own, c)
        m0 = c & (m == 0)
        if not m0.any():
            empty.append(f"complier, M_{k} = 0")
        margins.append(MarginEstimands(
            option=k,
            late_omega0=_mean(om0, c),
            late_omega1=_mean(om1, c),
            mixing_term=_mean((om1 - om0) * m, c),
            wald_enumerated=wald,
            wald_over_complier_share=late_own / p_c if p_c > 0 else math.nan,
            late_omega0_m0=_mean(om0, m0),
            share_m1_compliers=_mean(m.astype(float), c),
        ))
    if p_c == 0:
        empty.append("complier")
    return OracleEstimands(
        complier_share=p_c, late0=late0, theta1=theta1, theta2=theta2,
        delta1_late=_mean(delta[:, 1], cell1), delta2_late=_mean(delta[:, 2], cell2),
        margins=tuple(margins), empty_cells=tuple(empty),
    )


# ---------------------------------------------------------------------------
# OLS bias decomposition
# ---------------------------------------------------------------------------

def mixture(conditionals: Sequence[float], weights: Sequence[float]) -> float:
    """Weighted combination of conditional means; empty cells (weight 0) are skipped."""
    if len(conditionals) != len(weights):
        raise ValueError("conditionals and weights differ in length")
    total = 0.0
    for value, weight in zip(conditionals, weights):
        if weight == 0:
            continue
        total += value * weight
    return total


@dataclass(frozen=True)
class OLSBiasReport:
    option: int
    ols_estimand: float             # E(y | Ic=1, d=1) - E(y | Ic=0, d=1)
    effect: float                   # E(y_1 - y_0 | Ic=1, d=1)
    selection_term: float           # E(y_0 | Ic=1, d=1) - E(y_0 | Ic=0, d=1)
    next_best: tuple[int, ...]
    conditionals: tuple[float, ...]  # E(y_1 - y_0 | Ic=1, d=1, next best = j)
    weights: tuple[float, ...]       # P[next best = j | Ic=1, d=1]
    weights_unconditional: tuple[float, ...]  # P[next best = j | d=1]
    mixture: float
    mixture_unconditional_weights: float

    @property
    def decomposition_residual(self) -> float:
        return self.ols_estimand - (self.effect + self.selection_term)

    @property
    def mixture_residual(self) -> float:
        return self.effect - self.mixture

    def format(self) -> str:
        lines = [
            f"option {self.option}",
            f"  OLS estimand                {self.ols_estimand: .6f}",
            f"  effect on the treated       {self.effect: .6f}",
            f"  selection term              {self.selection_term: .6f}",
        ]
        for j, cond, w, wu in zip(self.next_best, self.conditionals, self.weights,
                                  self.weights_unconditional):
            lines.append(f"  next best {j}: E = {cond: .6f}  weight|Ic=1 = {w:.6f}  weight = {wu:.6f}")
        lines += [
            f"  mixture (weights | Ic=1)    {self.mixture: .6f}  residual {self.mixture_residual:.2e}",
            f"  mixture (weights | d only)  {self.mixture_unconditional_weights: .6f}",
        ]
        return "\n".join(lines) + "\n"


def ols_bias_report(pop: Population, option: int = 1) -> OLSBiasReport:
    """Split the OLS contrast for ``option`` into effect, selection and next-best mixture."""
    if option not in range(1, N_OPTIONS):
        raise ValueError("option must be 1 or 2")
    chosen = pop.d[:, option].astype(bool)
    hi, lo = chosen & (pop.ic == 1), chosen & (pop.ic == 0)
    y, y0, y1 = pop.y, pop.y_at[:, 0], pop.y_at[:, 1]
    gain = y1 - y0
    ols = _mean(y, hi) - _mean(y, lo)
    effect = _mean(gain, hi)
    selection = _mean(y0, hi) - _mean(y0, lo)
    others = tuple(j for j in range(N_OPTIONS) if j != option)
    conditionals, weights, weights_u = [], [], []
    n_hi, n_chosen = int(hi.sum()), int(chosen.sum())
    for j in others:
        cell = hi & (pop.next_best == j)
        conditionals.append(_mean(gain, cell))
        weights.append(cell.sum() / n_hi if n_hi else math.nan)
        weights_u.append((chosen & (pop.next_best == j)).sum() / n_chosen if n_chosen else math.nan)
    return OLSBiasReport(
        option=option, ols_estimand=ols, effect=effect, selection_term=selection,
        next_best=others, conditionals=tuple(conditionals), weights=tuple(map(float, weights)),
        weights_unconditional=tuple(map(float, weights_u)),
        mixture=mixture(conditionals, weights),
        mixture_unconditional_weights=mixture(conditionals, weights_u),
    )
