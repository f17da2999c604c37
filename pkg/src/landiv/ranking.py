"""Land-use preference ranking from urban/rural status and renewable regulations.

Rural counties put agriculture first, urban counties put residential first.
The remaining three uses are ordered from the solar and wind regulation codes,
with coin flips wherever the rules leave an order open.  Every county-year gets
its own random stream derived from ``(base_seed, county_id, year)`` so a
re-ranking under a different base seed changes only the coin flips.
"""

from __future__ import annotations

import csv
import hashlib
import io
import random
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from landiv.panel import LandUse, PanelObservation, RegulationLevel

RENEWABLES = (LandUse.SOLAR, LandUse.WIND)
RANKINGS_HEADER = (
    "county_id", "year", "rank_agriculture", "rank_solar", "rank_wind",
    "rank_residential", "next_best", "seed",
)


@dataclass(frozen=True)
class PreferenceRanking:
    ranks: tuple[int, int, int, int]  # indexed by LandUse code
    tie_broken: bool = False
    seed_used: int | None = None

    def __post_init__(self):
        if sorted(self.ranks) != [1, 2, 3, 4]:
            raise ValueError(f"ranks {self.ranks} are not a permutation of 1..4")

    @classmethod
    def from_mapping(cls, ranks: Mapping[LandUse, int], **kw) -> PreferenceRanking:
        return cls(tuple(ranks[use] for use in LandUse), **kw)

    def rank(self, use: LandUse) -> int:
        return self.ranks[use]

    def at(self, position: int) -> LandUse:
        return LandUse(self.ranks.index(position))

    @property
    def next_best(self) -> LandUse:
        return self.at(2)

    def as_dict(self) -> dict[LandUse, int]:
        return {use: self.ranks[use] for use in LandUse}


def observation_seed(base_seed: int, county_id: str, year: int, reseed: int = 0) -> int:
    """Stable 64-bit seed for one county-year (independent of PYTHONHASHSEED)."""
    token = f"{base_seed}|{reseed}|{county_id}|{year}".encode()
    return int.from_bytes(hashlib.blake2b(token, digest_size=8).digest(), "big")


def _coin(rng: random.Random) -> bool:
    return rng.random() < 0.5


def rank_county(metro: int | bool, solar_reg: RegulationLevel, wind_reg: RegulationLevel,
                rng: random.Random, *, seed_used: int | None = None) -> PreferenceRanking:
    """Apply the ranking flowchart to one county-year."""
    solar_reg = RegulationLevel(solar_reg)
    wind_reg = RegulationLevel(wind_reg)
    first, fallback = ((LandUse.RESIDENTIAL, LandUse.AGRICULTURE) if metro
                       else (LandUse.AGRICULTURE, LandUse.RESIDENTIAL))
    ranks = {first: 1}
    solar_ban = solar_reg is RegulationLevel.BAN
    wind_ban = wind_reg is RegulationLevel.BAN
    tie = False

    if solar_ban and wind_ban:
        ranks[fallback] = 2
        tie = True
        low, high = (LandUse.SOLAR, LandUse.WIND) if _coin(rng) else (LandUse.WIND, LandUse.SOLAR)
        ranks[low], ranks[high] = 3, 4
    elif solar_ban or wind_ban:
        banned, open_ = ((LandUse.SOLAR, LandUse.WIND) if solar_ban
                         else (LandUse.WIND, LandUse.SOLAR))
        ranks[banned] = 4
        tie = True
        a, b = (open_, fallback) if _coin(rng) else (fallback, open_)
        ranks[a], ranks[b] = 2, 3
    else:
        ranks[fallback] = 4
        if solar_reg < wind_reg:
            ranks[LandUse.SOLAR], ranks[LandUse.WIND] = 2, 3
        elif wind_reg < solar_reg:
            ranks[LandUse.WIND], ranks[LandUse.SOLAR] = 2, 3
        else:
            tie = True
            a, b = (LandUse.SOLAR, LandUse.WIND) if _coin(rng) else (LandUse.WIND, LandUse.SOLAR)
            ranks[a], ranks[b] = 2, 3
    return PreferenceRanking.from_mapping(ranks, tie_broken=tie, seed_used=seed_used)


def random_uses(metro: int | bool, solar_reg: RegulationLevel,
                wind_reg: RegulationLevel) -> frozenset[LandUse]:
    """Uses whose rank is set by a coin flip for these inputs; all others are fixed."""
    fallback = LandUse.AGRICULTURE if metro else LandUse.RESIDENTIAL
    solar_ban = RegulationLevel(solar_reg) is RegulationLevel.BAN
    wind_ban = RegulationLevel(wind_reg) is RegulationLevel.BAN
    if solar_ban and wind_ban:
        return frozenset(RENEWABLES)
    if solar_ban:
        return frozenset({LandUse.WIND, fallback})
    if wind_ban:
        return frozenset({LandUse.SOLAR, fallback})
    if RegulationLevel(solar_reg) == RegulationLevel(wind_reg):
        return frozenset(RENEWABLES)
    return frozenset()


def next_best(ranking: PreferenceRanking, chosen: LandUse) -> LandUse:
    """Highest-ranked use once ``chosen`` is removed from consideration."""
    chosen = LandUse(chosen)
    return min((use for use in LandUse if use != chosen), key=ranking.rank)


def rank_panel(panel: Sequence[PanelObservation], base_seed: int,
               reseed: int = 0) -> dict[tuple[str, int], PreferenceRanking]:
    out = {}
    for i, obs in enumerate(panel):
        if obs.metro is None or obs.solar_regulation is None or obs.wind_regulation is None:
            raise ValueError(f"row {i} ({obs.county_id}, {obs.year}): metro and both "
                             "regulation codes are needed for ranking")
        seed = observation_seed(base_seed, obs.county_id, obs.year, reseed)
        out[obs.key] = rank_county(obs.metro, obs.solar_regulation, obs.wind_regulation,
                                   random.Random(seed), seed_used=seed)
    return out


def tabulate_rankings(rankings: Sequence[PreferenceRanking] | Mapping) -> np.ndarray:
    """4x4 counts: rows are land uses (LandUse order), columns are ranks 1..4."""
    if isinstance(rankings, Mapping):
        rankings = list(rankings.values())
    table = np.zeros((4, 4), dtype=int)
    for r in rankings:
        for use in LandUse:
            table[use, r.rank(use) - 1] += 1
    return table


def format_rank_table(table: np.ndarray) -> str:
    lines = [f"{'Land Use':<14}{'1':>8}{'2':>8}{'3':>8}{'4':>8}"]
    names = {LandUse.AGRICULTURE: "Agriculture", LandUse.SOLAR: "Solar Energy",
             LandUse.WIND: "Wind Energy", LandUse.RESIDENTIAL: "Residential"}
    for use in LandUse:
        lines.append(f"{names[use]:<14}" + "".join(f"{c:>8d}" for c in table[use]))
    return "\n".join(lines) + "\n"


def format_rankings(rankings: Mapping[tuple[str, int], PreferenceRanking]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(RANKINGS_HEADER)
    for (county, year), r in sorted(rankings.items()):
        writer.writerow([county, year, *r.ranks, r.next_best.label,
                         "" if r.seed_used is None else r.seed_used])
    return buffer.getvalue()


def write_rankings(rankings: Mapping[tuple[str, int], PreferenceRanking], path: str | Path) -> None:
    Path(path).write_text(format_rankings(rankings), newline="")


def load_rankings(path: str | Path) -> dict[tuple[str, int], PreferenceRanking]:
    out = {}
    with open(path, newline="") as handle:
        reader = csv.DictReader(handle)
        missing = set(RANKINGS_HEADER) - set(reader.fieldnames or [])
        if missing:
            raise ValueError(f"{path}: missing columns {sorted(missing)}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                ranks = tuple(int(rec[c]) for c in RANKINGS_HEADER[2:6])
                ranking = PreferenceRanking(ranks, seed_used=int(rec["seed"]) if rec["seed"] else None)
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            if ranking.next_best != LandUse.parse(rec["next_best"]):
                raise ValueError(f"{path}:{lineno}: next_best disagrees with the ranks")
            out[(rec["county_id"], int(rec["year"]))] = ranking
    return out
