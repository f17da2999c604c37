"""Two-way fixed-effects OLS and 2SLS.

Fixed effects are absorbed by alternating projections.  After absorption the
grand means are added back and an explicit constant is estimated, so the
reported ``_cons`` follows the usual Stata convention (``ybar - xbar'b``)
while the slopes, residuals and degrees of freedom match the dummy-variable
(LSDV) regression.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
from scipy import stats

from landiv.panel import CANONICAL_COLUMNS, LandUse, column, column_attribute

CONST = "_cons"
SE_TYPES = ("classical", "robust", "cluster_by_county")
FE_NAMES = ("county", "year")
DEFAULT_CONTROLS = ("median_age", "unemployment_rate")
NEXT_BEST_COLUMNS = (LandUse.AGRICULTURE, LandUse.RESIDENTIAL, LandUse.SOLAR, LandUse.WIND)


class EstimationError(ValueError):
    """Base class for estimation failures."""


class RankDeficientError(EstimationError):
    def __init__(self, columns: Sequence[str]):
        self.columns = tuple(columns)
        super().__init__(f"design matrix is rank deficient; collinear columns: {', '.join(columns)}")


class ConvergenceError(EstimationError):
    pass


class EmptySubsampleError(EstimationError):
    pass


class WeakInstrumentWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# specifications and results
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignSpec:
    dependent: str
    endogenous: str | None = None
    instrument: str | None = None
    controls: tuple[str, ...] = DEFAULT_CONTROLS
    interactions: tuple[str, ...] = ()
    fixed_effects: frozenset[str] = frozenset(FE_NAMES)
    subsample: LandUse | None = None
    se_type: str = "classical"
    weak_f_floor: float = 10.0

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "interactions", tuple(self.interactions))
        object.__setattr__(self, "fixed_effects", frozenset(self.fixed_effects))
        if (self.endogenous is None) != (self.instrument is None):
            raise ValueError("an instrument is required exactly when an endogenous variable is given")
        if self.interactions and self.endogenous is None:
            raise ValueError("interactions need an endogenous variable")
        if not self.fixed_effects <= set(FE_NAMES):
            raise ValueError(f"fixed effects must be a subset of {FE_NAMES}")
        if self.se_type not in SE_TYPES:
            raise ValueError(f"se_type must be one of {SE_TYPES}")

    @property
    def endogenous_terms(self) -> tuple[str, ...]:
        if self.endogenous is None:
            return ()
        return (self.endogenous, *(f"{self.endogenous}:{d}" for d in self.interactions))

    @property
    def instrument_terms(self) -> tuple[str, ...]:
        if self.instrument is None:
            return ()
        return (self.instrument, *(f"{self.instrument}:{d}" for d in self.interactions))

    @property
    def exogenous_terms(self) -> tuple[str, ...]:
        return (*self.interactions, *self.controls)


@dataclass
class FitResult:
    names: tuple[str, ...]
    coef: np.ndarray
    se: np.ndarray
    vcov: np.ndarray
    n_obs: int
    df_resid: int
    r_squared: float | None
    method: str
    dependent: str
    se_type: str = "classical"
    fe_absorbed: tuple[str, ...] = ()
    first_stages: tuple[FitResult, ...] = ()
    first_stage_f: tuple[float, ...] = ()
    n_dropped: int = 0
    label: str = ""
    residuals: np.ndarray | None = field(default=None, repr=False)

    def _index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"no coefficient {name!r}; have {self.names}") from None

    def coefficient(self, name: str) -> float:
        return float(self.coef[self._index(name)])

    def stderr(self, name: str) -> float:
        return float(self.se[self._index(name)])

    @property
    def coefficients(self) -> dict[str, float]:
        return dict(zip(self.names, map(float, self.coef)))

    @property
    def tstats(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            return self.coef / self.se

    @property
    def pvalues(self) -> np.ndarray:
        t = np.abs(self.tstats)
        p = 2 * stats.t.sf(t, max(self.df_resid, 1))
        return np.where(self.se > 0, p, np.where(self.coef != 0, 0.0, 1.0))

    def pvalue(self, name: str) -> float:
        return float(self.pvalues[self._index(name)])

    def stars(self, name: str) -> str:
        return significance_stars(self.pvalue(name))

    def conf_int(self, name: str, level: float = 0.95) -> tuple[float, float]:
        q = stats.t.ppf(0.5 + level / 2, max(self.df_resid, 1))
        b, s = self.coefficient(name), self.stderr(name)
        return b - q * s, b + q * s

    @property
    def first_stage(self) -> FitResult | None:
        return self.first_stages[0] if self.first_stages else None


def significance_stars(p: float) -> str:
    if p < 0.01:
        return "***"
    if p < 0.05:
        return "**"
    if p < 0.10:
        return "*"
    return ""


# ---------------------------------------------------------------------------
# fixed effects
# ---------------------------------------------------------------------------

def _codes(labels) -> np.ndarray:
    return np.unique(np.asarray(labels), return_inverse=True)[1].ravel()


def _demean_by(m: np.ndarray, codes: np.ndarray, n_groups: int, counts: np.ndarray) -> np.ndarray:
    means = np.empty((n_groups, m.shape[1]))
    for j in range(m.shape[1]):
        means[:, j] = np.bincount(codes, weights=m[:, j], minlength=n_groups) / counts
    return m - means[codes]


def demean(matrix: np.ndarray, groups: Sequence[np.ndarray], *, tol: float = 1e-10,
           max_iter: int = 10_000) -> np.ndarray:
    """Project columns off one or more sets of group indicators.

    Alternating projections; stops when the largest change over one sweep,
    relative to ``max(1, max|column|)``, drops below ``tol``.
    """
    m = np.array(matrix, dtype=float, copy=True)
    squeeze = m.ndim == 1
    if squeeze:
        m = m[:, None]
    if not np.all(np.isfinite(m)):
        raise EstimationError("cannot demean non-finite values")
    prepared = []
    for g in groups:
        codes = _codes(g)
        n_groups = int(codes.max()) + 1 if len(codes) else 0
        prepared.append((codes, n_groups, np.bincount(codes, minlength=n_groups)))
    if not prepared:
        return m[:, 0] if squeeze else m
    scale = np.maximum(1.0, np.abs(m).max(axis=0)) if len(m) else np.ones(m.shape[1])
    n_sweeps = 1 if len(prepared) == 1 else max_iter
    for _ in range(n_sweeps):
        previous = m
        for codes, n_groups, counts in prepared:
            m = _demean_by(m, codes, n_groups, counts)
        if len(prepared) == 1 or np.max(np.abs(m - previous) / scale, initial=0.0) < tol:
            break
    else:
        raise ConvergenceError(f"alternating projections did not converge in {max_iter} sweeps")
    return m[:, 0] if squeeze else m


def fe_rank(county: np.ndarray, year: np.ndarray, fixed_effects: frozenset[str]) -> int:
    """Column rank of the absorbed indicator set (counties, years, or both)."""
    c, t = _codes(county), _codes(year)
    n_c = int(c.max()) + 1 if len(c) else 0
    n_t = int(t.max()) + 1 if len(t) else 0
    if fixed_effects == {"county"}:
        return n_c
    if fixed_effects == {"year"}:
        return n_t
    if not fixed_effects:
        return 0
    # both: n_c + n_t minus the number of connected components of the county-year graph
    parent = list(range(n_c + n_t))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for a, b in set(zip(c.tolist(), (t + n_c).tolist())):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    components = len({find(a) for a in range(n_c + n_t)})
    return n_c + n_t - components


def within_transform(panel, variables: Sequence[str], fixed_effects=FE_NAMES, *,
                     tol: float = 1e-10, max_iter: int = 10_000) -> np.ndarray:
    """Two-way (or one-way) demeaned matrix of ``variables``, rows in panel order."""
    fixed_effects = frozenset(fixed_effects)
    data = _table(panel)
    matrix = np.column_stack([data.get(v) for v in variables])
    if not np.all(np.isfinite(matrix)):
        raise EstimationError("missing values in variables passed to within_transform")
    if "county" in fixed_effects and "year" in fixed_effects:
        if len(set(data.county)) < 2 or len(set(data.year)) < 2:
            raise EstimationError("two-way fixed effects need at least two counties and two years")
    return demean(matrix, _fe_groups(data.county, data.year, fixed_effects), tol=tol, max_iter=max_iter)


def _fe_groups(county, year, fixed_effects) -> list[np.ndarray]:
    out = []
    if "county" in fixed_effects:
        out.append(np.asarray(county))
    if "year" in fixed_effects:
        out.append(np.asarray(year))
    return out


# ---------------------------------------------------------------------------
# array-level estimation
# ---------------------------------------------------------------------------

def _check_rank(x: np.ndarray, names: Sequence[str], what: str = "regressors") -> None:
    if x.shape[0] < x.shape[1]:
        raise EstimationError(f"{x.shape[0]} observations for {x.shape[1]} {what}")
    if x.shape[1] == 0:
        return
    _, r, piv = scipy.linalg.qr(x, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(x.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    rank = int(np.sum(diag > max(tol, 1e-10 * diag[0])))
    if rank < x.shape[1]:
        raise RankDeficientError([names[i] for i in sorted(piv[rank:])])


def _vcov(xhat: np.ndarray, resid: np.ndarray, df_resid: int, se_type: str,
          clusters: np.ndarray | None, k_cluster: int | None = None) -> np.ndarray:
    n, k = xhat.shape
    q, r = np.linalg.qr(xhat)
    r_inv = scipy.linalg.solve_triangular(r, np.eye(k))
    bread = r_inv @ r_inv.T
    if se_type == "classical":
        return bread * (resid @ resid / df_resid)
    if se_type == "robust":
        scores = xhat * resid[:, None]
        return bread @ (scores.T @ scores) @ bread * (n / df_resid)
    if se_type == "cluster_by_county":
        if clusters is None:
            raise EstimationError("clustered standard errors need cluster labels")
        codes = _codes(clusters)
        g = int(codes.max()) + 1
        if g < 2:
            raise EstimationError("clustered standard errors need at least two clusters")
        summed = np.zeros((g, k))
        np.add.at(summed, codes, xhat * resid[:, None])
        k_used = k if k_cluster is None else k_cluster
        factor = g / (g - 1) * (n - 1) / (n - k_used)
        return bread @ (summed.T @ summed) @ bread * factor
    raise ValueError(f"unknown se_type {se_type!r}")


def linear_iv(y: np.ndarray, x: np.ndarray, z: np.ndarray, names: Sequence[str], *,
              se_type: str = "classical", clusters: np.ndarray | None = None,
              df_absorbed: int = 0, df_nested: int = 0, tss: float | None = None,
              method: str = "2sls", dependent: str = "y",
              instrument_names: Sequence[str] | None = None) -> FitResult:
    """Generalised IV (2SLS) of ``y`` on ``x`` with instrument matrix ``z``.

    With ``z`` equal to ``x`` this is OLS.  ``df_absorbed`` is subtracted from
    the residual degrees of freedom; ``df_nested`` of those are nested within
    the clusters and left out of the clustered small-sample factor.  ``tss``
    overrides the total sum of squares used for R-squared (needed when fixed
    effects were absorbed).
    """
    y = np.asarray(y, dtype=float)
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    n, k = x.shape
    if z is x or (z.shape == x.shape and np.array_equal(z, x)):
        xhat = x
    else:
        if instrument_names is None:
            instrument_names = [f"instrument {i}" for i in range(z.shape[1])]
        _check_rank(z, instrument_names, "instruments")
        qz, _ = np.linalg.qr(z)
        xhat = qz @ (qz.T @ x)
    _check_rank(xhat, names)
    coef, *_ = np.linalg.lstsq(xhat, y, rcond=None)
    resid = y - x @ coef
    df_resid = n - k - df_absorbed
    if df_resid <= 0:
        raise EstimationError(f"no residual degrees of freedom (n={n}, k={k}, absorbed={df_absorbed})")
    if se_type == "cluster_by_county":
        df_t = len(np.unique(clusters)) - 1
    else:
        df_t = df_resid
    vcov = _vcov(xhat, resid, df_resid, se_type, clusters, k + df_absorbed - df_nested)
    se = np.sqrt(np.clip(np.diag(vcov), 0.0, None))
    if tss is None:
        tss = float(np.sum((y - y.mean()) ** 2))
    ssr = float(resid @ resid)
    r2 = 1.0 - ssr / tss if tss > 0 else None
    if r2 is not None and r2 < 0:
        r2 = None
    return FitResult(tuple(names), coef, se, vcov, n, df_t, r2, method, dependent,
                     se_type=se_type, residuals=resid)


def excluded_f(first: FitResult, names: Sequence[str]) -> float:
    """Wald F for the joint exclusion of ``names`` from a first-stage fit."""
    idx = [first._index(nm) for nm in names]
    b = first.coef[idx]
    v = first.vcov[np.ix_(idx, idx)]
    try:
        return float(b @ np.linalg.solve(v, b) / len(idx))
    except np.linalg.LinAlgError:
        return math.inf


# ---------------------------------------------------------------------------
# panel-level estimation
# ---------------------------------------------------------------------------

class _Table:
    """Column access over a list of observations or a mapping of arrays."""

    def __init__(self, panel):
        self._panel = panel
        self._cache: dict[str, np.ndarray] = {}
        if isinstance(panel, Mapping):
            self.county = np.asarray(panel["county_id"])
            self.year = np.asarray(panel["year"])
            self.n = len(self.county)
        else:
            self.county = np.array([obs.county_id for obs in panel], dtype=object)
            self.year = np.array([obs.year for obs in panel])
            self.n = len(panel)

    def get(self, name: str) -> np.ndarray:
        if name in self._cache:
            return self._cache[name]
        if ":" in name:
            left, right = name.split(":", 1)
            value = self.get(left) * self.get(right)
        elif isinstance(self._panel, Mapping):
            for key in (name, column_attribute(name), _CANONICAL_NAME.get(name)):
                if key in self._panel:
                    break
            else:
                raise KeyError(f"unknown variable {name!r}")
            value = np.asarray(self._panel[key], dtype=float)
        else:
            value = column(self._panel, name)
        self._cache[name] = value
        return value


_CANONICAL_NAME = {attr: col for col, attr in CANONICAL_COLUMNS.items()}


def _table(panel) -> _Table:
    return panel if isinstance(panel, _Table) else _Table(panel)


def _subset(panel, mask: np.ndarray):
    if isinstance(panel, Mapping):
        return {k: np.asarray(v)[mask] for k, v in panel.items()}
    return [obs for obs, keep in zip(panel, mask) if keep]


def _design(spec: DesignSpec, panel, *, ols_terms: Sequence[str] | None = None):
    data = _table(panel)
    if ols_terms is None:
        regressors = (*spec.endogenous_terms, *spec.exogenous_terms)
    else:
        regressors = tuple(ols_terms)
    instruments = (*spec.instrument_terms, *spec.exogenous_terms)
    used = {spec.dependent, *regressors, *instruments}
    y = data.get(spec.dependent)
    cols = {name: data.get(name) for name in used}
    keep = np.isfinite(y)
    for values in cols.values():
        keep &= np.isfinite(values)
    n_dropped = int(data.n - keep.sum())
    if not keep.any():
        raise EmptySubsampleError("no complete observations for this specification")
    county, year = data.county[keep], data.year[keep]
    y = y[keep]
    x = np.column_stack([cols[nm][keep] for nm in regressors]) if regressors else np.empty((len(y), 0))
    z = np.column_stack([cols[nm][keep] for nm in instruments]) if instruments else np.empty((len(y), 0))
    tss = float(np.sum((y - y.mean()) ** 2))
    x_tss = np.sum((x - x.mean(axis=0)) ** 2, axis=0)
    fe = spec.fixed_effects
    df_absorbed = df_nested = 0
    if fe:
        groups = _fe_groups(county, year, fe)
        if {"county", "year"} <= fe and (len(set(county)) < 2 or len(set(year)) < 2):
            raise EstimationError("two-way fixed effects need at least two counties and two years")
        block = np.column_stack([y, x, z])
        means = block.mean(axis=0)
        block = demean(block, groups) + means
        y, x, z = block[:, 0], block[:, 1:1 + x.shape[1]], block[:, 1 + x.shape[1]:]
        df_absorbed = fe_rank(county, year, fe) - 1
        if "county" in fe:
            df_nested = len(set(county)) - 1  # county effects sit inside county clusters
    ones = np.ones((len(y), 1))
    x = np.hstack([x, ones])
    z = np.hstack([z, ones])
    return dict(y=y, x=x, z=z, regressors=(*regressors, CONST), instruments=(*instruments, CONST),
                county=county, df_absorbed=df_absorbed, df_nested=df_nested, tss=tss, x_tss=x_tss,
                n_dropped=n_dropped,
                fe=tuple(name for name in FE_NAMES if name in fe))


def _finish(result: FitResult, d, label: str) -> FitResult:
    return replace(result, fe_absorbed=d["fe"], n_dropped=d["n_dropped"], label=label)


def _apply_subsample(spec: DesignSpec, panel, rankings):
    if spec.subsample is None:
        return panel
    if rankings is None:
        raise ValueError("a next-best subsample needs rankings")
    return _filter_next_best(panel, rankings, spec.subsample)


def ols_fit(spec: DesignSpec, panel, rankings=None, *, label: str = "") -> FitResult:
    """OLS of ``spec.dependent`` on the endogenous terms (if any) and controls."""
    panel = _apply_subsample(spec, panel, rankings)
    d = _design(spec, panel, ols_terms=(*spec.endogenous_terms, *spec.exogenous_terms))
    res = linear_iv(d["y"], d["x"], d["x"], d["regressors"], se_type=spec.se_type,
                    clusters=d["county"], df_absorbed=d["df_absorbed"], df_nested=d["df_nested"],
                    tss=d["tss"], method="ols", dependent=spec.dependent)
    return _finish(res, d, label)


def tsls_fit(spec: DesignSpec, panel, rankings=None, *, label: str = "") -> FitResult:
    """Two-stage least squares with nested first stages, one per endogenous term."""
    if spec.endogenous is None:
        raise ValueError("tsls_fit needs an endogenous variable and an instrument")
    panel = _apply_subsample(spec, panel, rankings)
    d = _design(spec, panel)
    res = linear_iv(d["y"], d["x"], d["z"], d["regressors"], se_type=spec.se_type,
                    clusters=d["county"], df_absorbed=d["df_absorbed"], df_nested=d["df_nested"],
                    tss=d["tss"], method="2sls", dependent=spec.dependent,
                    instrument_names=d["instruments"])
    firsts, fstats = [], []
    for j, term in enumerate(spec.endogenous_terms):
        target = d["x"][:, j]
        first = linear_iv(target, d["z"], d["z"], d["instruments"], se_type=spec.se_type,
                          clusters=d["county"], df_absorbed=d["df_absorbed"], df_nested=d["df_nested"],
                          tss=float(d["x_tss"][j]),
                          method="ols", dependent=term)
        first = _finish(first, d, label)
        firsts.append(first)
        fstats.append(excluded_f(first, spec.instrument_terms))
    weakest = min(fstats)
    if weakest < spec.weak_f_floor:
        warnings.warn(f"weak first stage: F = {weakest:.2f} < {spec.weak_f_floor}",
                      WeakInstrumentWarning, stacklevel=2)
    return replace(_finish(res, d, label), first_stages=tuple(firsts), first_stage_f=tuple(fstats))


def fit(spec: DesignSpec, panel, rankings=None, *, label: str = "") -> FitResult:
    if spec.endogenous is None:
        return ols_fit(spec, panel, rankings, label=label)
    return tsls_fit(spec, panel, rankings, label=label)


def _keys(panel) -> list[tuple[str, int]]:
    if isinstance(panel, Mapping):
        return list(zip(np.asarray(panel["county_id"]).tolist(), np.asarray(panel["year"]).tolist()))
    return [obs.key for obs in panel]


def _filter_next_best(panel, rankings, value: LandUse):
    value = LandUse(value)
    mask = []
    for key in _keys(panel):
        if key not in rankings:
            raise KeyError(f"no ranking for {key}")
        mask.append(rankings[key].next_best == value)
    mask = np.array(mask, dtype=bool)
    if not mask.any():
        raise EmptySubsampleError(f"no observations with next-best {value.label}")
    return _subset(panel, mask)


def margin_conditioned_fit(spec: DesignSpec, panel, rankings, next_best_value: LandUse) -> FitResult:
    """Fit on the rows whose next-best land use equals ``next_best_value``."""
    sub = _filter_next_best(panel, rankings, next_best_value)
    spec = replace(spec, subsample=None)
    return fit(spec, sub, label=LandUse(next_best_value).label)


def next_best_columns(spec: DesignSpec, panel, rankings) -> list[FitResult | None]:
    """ALL plus the four next-best-conditioned fits; ``None`` marks an empty subsample."""
    out: list[FitResult | None] = [fit(replace(spec, subsample=None), panel, label="ALL")]
    for use in NEXT_BEST_COLUMNS:
        try:
            out.append(margin_conditioned_fit(spec, panel, rankings, use))
        except EmptySubsampleError:
            out.append(None)
    return out
