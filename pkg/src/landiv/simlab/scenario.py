"""Scenario descriptions for the potential-outcomes lab."""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from landiv.kvfile import parse_bool, parse_kv, read_kv, split_list

PROPOSITIONS = ("P1", "P2i", "P2ii", "P3i", "P3ii", "P3iii")
N_OPTIONS = 3


def _triple(values, name: str) -> tuple[float, float, float]:
    values = tuple(float(v) for v in values)
    if len(values) != N_OPTIONS:
        raise ValueError(f"{name} needs {N_OPTIONS} values, got {len(values)}")
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"{name} has non-finite values")
    return values


@dataclass(frozen=True)
class ScenarioConfig:
    """One data-generating process.

    Compliance types are (never, complier, always).  Options are 0, 1, 2 with
    option 0 the farming default.  ``exit_prob[k]`` is the probability that
    option ``k`` drops out of an agent's choice set when income is high and the
    agent faces margin 1 for ``k``; ``exit_prob_margin0`` is the margin-0
    counterpart and is only used when ``margin_dependent`` is set.
    """

    n: int = 50_000
    shares: tuple[float, float, float] = (0.25, 0.5, 0.25)
    z_prob: float = 0.5
    choice_shares: tuple[float, float, float] = (0.4, 0.3, 0.3)
    selection: float = 0.0
    delta_mean: tuple[float, float, float] = (0.3, 0.2, -0.1)
    delta_sd: tuple[float, float, float] = (0.0, 0.0, 0.0)
    delta_choice_selection: float = 0.0
    level_mean: tuple[float, float, float] = (1.0, 1.5, 0.5)
    level_sd: float = 0.25
    exit_prob: tuple[float, float, float] = (0.0, 0.0, 0.0)
    exit_prob_margin0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    margin_dependent: bool = False
    restrictive: bool = False
    seed: int = 0
    propositions: tuple[str, ...] = ()
    options: tuple[int, ...] = (0, 1, 2)   # options checked by the choice-model propositions
    planted_option: int | None = None
    planted_value: float | None = None
    name: str = ""

    def __post_init__(self):
        for name in ("shares", "choice_shares", "delta_mean", "delta_sd", "level_mean",
                     "exit_prob", "exit_prob_margin0"):
            object.__setattr__(self, name, _triple(getattr(self, name), name))
        object.__setattr__(self, "propositions", tuple(self.propositions))
        object.__setattr__(self, "options", tuple(int(k) for k in self.options))
        if not self.options or any(k not in range(N_OPTIONS) for k in self.options):
            raise ValueError("options must be a non-empty subset of 0, 1, 2")
        if self.n < 1:
            raise ValueError("population size must be at least 1")
        if any(s < 0 for s in self.shares) or not math.isclose(sum(self.shares), 1.0, abs_tol=1e-9):
            raise ValueError(f"compliance shares {self.shares} must be nonnegative and sum to 1")
        if any(s <= 0 for s in self.choice_shares) or not math.isclose(sum(self.choice_shares), 1.0,
                                                                      abs_tol=1e-9):
            raise ValueError(f"choice shares {self.choice_shares} must be positive and sum to 1")
        if not 0.0 < self.z_prob < 1.0:
            raise ValueError("z_prob must lie strictly between 0 and 1")
        if any(s < 0 for s in self.delta_sd) or self.level_sd < 0:
            raise ValueError("standard deviations must be nonnegative")
        for name in ("exit_prob", "exit_prob_margin0"):
            probs = getattr(self, name)
            if any(not 0.0 <= p <= 1.0 for p in probs):
                raise ValueError(f"{name} entries must lie in [0, 1]")
            if probs[0] != 0.0:
                raise ValueError(f"{name}[0] must be 0: the farming option is always available")
        unknown = set(self.propositions) - set(PROPOSITIONS)
        if unknown:
            raise ValueError(f"unknown propositions {sorted(unknown)}; choose from {PROPOSITIONS}")
        if (self.planted_option is None) != (self.planted_value is None):
            raise ValueError("planted_option and planted_value go together")
        if self.planted_option is not None and self.planted_option not in range(N_OPTIONS):
            raise ValueError("planted_option must be 0, 1 or 2")

    @property
    def exit_margin1(self) -> tuple[float, float, float]:
        return self.exit_prob

    @property
    def exit_margin0(self) -> tuple[float, float, float]:
        return self.exit_prob_margin0 if self.margin_dependent else self.exit_prob

    @property
    def income_responsive(self) -> bool:
        return any(self.exit_margin1) or any(self.exit_margin0)

    def with_seed(self, seed: int) -> ScenarioConfig:
        return replace(self, seed=seed)

    def to_kv(self) -> str:
        lines = []
        for f in fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                text = ", ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = repr(value) if isinstance(value, float) else str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"


_FLOAT_TRIPLES = {"shares", "choice_shares", "delta_mean", "delta_sd", "level_mean",
                  "exit_prob", "exit_prob_margin0"}
_BOOLS = {"margin_dependent", "restrictive"}
_INTS = {"n", "seed", "planted_option"}
_FLOATS = {"z_prob", "selection", "delta_choice_selection", "level_sd", "planted_value"}


def scenario_from_mapping(values: Mapping[str, str], *, name: str = "") -> ScenarioConfig:
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(values) - known
    if unknown:
        raise ValueError(f"unknown scenario keys: {', '.join(sorted(unknown))}")
    kwargs = {}
    for key, text in values.items():
        try:
            if key in _FLOAT_TRIPLES:
                kwargs[key] = tuple(float(v) for v in split_list(text))
            elif key in _BOOLS:
                kwargs[key] = parse_bool(text)
            elif key in _INTS:
                kwargs[key] = int(text)
            elif key in _FLOATS:
                kwargs[key] = float(text)
            elif key == "propositions":
                kwargs[key] = tuple(split_list(text))
            elif key == "options":
                kwargs[key] = tuple(int(v) for v in split_list(text))
            else:
                kwargs[key] = text
        except ValueError as exc:
            raise ValueError(f"scenario key {key!r}: {exc}") from None
    kwargs.setdefault("name", name)
    return ScenarioConfig(**kwargs)


def parse_scenario(text: str, *, name: str = "") -> ScenarioConfig:
    return scenario_from_mapping(parse_kv(text), name=name)


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    return scenario_from_mapping(read_kv(path), name=path.stem)


def bundled_scenario_path(name: str) -> Path:
    from importlib.resources import files

    return Path(str(files("landiv") / "data" / "scenarios" / f"{name}.cfg"))


def bundled_scenario(name: str) -> ScenarioConfig:
    return load_scenario(bundled_scenario_path(name))


def as_dict(config: ScenarioConfig) -> dict:
    return asdict(config)
