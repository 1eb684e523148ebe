"""Per-paper geographic diversity scores.

Three scores are computed from a paper's coauthor cities:

* the mean network distance over distinct city pairs,
* the Shannon entropy of those pair distances, binned on corpus-wide edges,
* a weighted entropy of the coauthors' positions on a lat/lon grid, where each
  occupied cell is weighted by ``centrality**0.05 / rank_weight``.
"""
from __future__ import annotations

import math
import warnings
from collections import Counter
from collections.abc import Callable, Iterable, Mapping
from dataclasses import dataclass, field
from itertools import combinations
from typing import NamedTuple

import numpy as np

from .errors import ValidationError

FIELDS = (
    "Biology",
    "Biomedical Research",
    "Chemistry",
    "Clinical Medicine",
    "Earth and Space",
    "Engineering and Technology",
    "Health",
    "Mathematics",
    "Physics",
    "Professional Fields",
    "Psychology",
    "Social Sciences",
)

CENTRALITY_POWER = 0.05

DistanceProvider = Callable[[str, str], float]


@dataclass(frozen=True)
class PaperRecord:
    paper_id: str
    arc: float
    field: str
    coauthor_cities: tuple[str, ...]

    def __post_init__(self):
        if not math.isfinite(self.arc) or self.arc < 0:
            raise ValidationError(f"paper {self.paper_id!r}: ARC must be finite and >= 0, got {self.arc}")
        if self.field not in FIELDS:
            raise ValidationError(f"paper {self.paper_id!r}: unknown field {self.field!r}")
        if not self.coauthor_cities:
            raise ValidationError(f"paper {self.paper_id!r}: no coauthor cities")
        object.__setattr__(self, "coauthor_cities", tuple(self.coauthor_cities))

    @property
    def cities(self) -> tuple[str, ...]:
        """Distinct coauthor cities in sorted order."""
        return tuple(sorted(set(self.coauthor_cities)))


@dataclass(frozen=True)
class DiversityScores:
    paper_id: str
    n_authors: int
    n_distinct_cities: int
    avg_weighted_distance: float
    distance_entropy: float
    weighted_location_entropy: float
    n_unreachable: int = 0


@dataclass(frozen=True)
class BinningScheme:
    kind: str
    width: float | tuple[float, float]
    origin: float | tuple[float, float] = 0.0

    def __post_init__(self):
        if self.kind not in ("distance", "geo"):
            raise ValidationError(f"unknown binning kind {self.kind!r}")
        widths = self.width if isinstance(self.width, tuple) else (self.width,)
        if any(not w > 0 for w in widths):
            raise ValidationError("bin width must be positive")

    @classmethod
    def geo(cls, deg=5.0):
        return cls("geo", (float(deg), float(deg)), (-90.0, -180.0))


class PairDistances(NamedTuple):
    values: np.ndarray
    n_unreachable: int
    too_few_cities: bool


def pairwise_distances(paper: PaperRecord, distance: DistanceProvider) -> PairDistances:
    """Distances over unordered pairs of distinct coauthor cities.

    Unreachable pairs are left out and counted.
    """
    cities = paper.cities
    if len(cities) < 2:
        return PairDistances(np.empty(0), 0, True)
    vals = []
    unreachable = 0
    for a, b in combinations(cities, 2):
        d = distance(a, b)
        if math.isinf(d):
            unreachable += 1
        else:
            vals.append(d)
    return PairDistances(np.array(vals, dtype=float), unreachable, False)


def avg_weighted_distance(paper: PaperRecord, distance: DistanceProvider) -> float:
    """Mean pair distance; NaN for single-city papers."""
    pairs = pairwise_distances(paper, distance)
    if pairs.values.size == 0:
        return math.nan
    return float(np.mean(pairs.values))


def shannon_entropy(counts, base=math.e) -> float:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    if counts.size == 0:
        return 0.0
    p = counts / counts.sum()
    return float(-(p * np.log(p)).sum() / math.log(base)) + 0.0


def freedman_diaconis_edges(values, max_bins=10_000) -> np.ndarray:
    """Bin edges spanning ``values`` with the Freedman-Diaconis width.

    Falls back to a single bin when the spread is zero.
    """
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size == 0:
        raise ValidationError("no finite distances to bin")
    lo, hi = float(v.min()), float(v.max())
    q75, q25 = np.percentile(v, [75, 25])
    width = 2.0 * (q75 - q25) * v.size ** (-1.0 / 3.0)
    if hi <= lo:
        return np.array([lo, lo + 1.0])
    if width <= 0:
        width = (hi - lo) / max(1.0, math.sqrt(v.size))
    n_bins = int(min(max_bins, max(1, math.ceil((hi - lo) / width))))
    return np.linspace(lo, hi, n_bins + 1)


def _bin_counts(values: np.ndarray, edges: np.ndarray) -> np.ndarray:
    idx = np.searchsorted(edges, values, side="right") - 1
    idx = np.clip(idx, 0, len(edges) - 2)
    return np.bincount(idx, minlength=len(edges) - 1)


def distance_entropy(paper: PaperRecord, distance: DistanceProvider, edges, base=math.e) -> float:
    """Entropy of the paper's pair distances over shared bin ``edges``.

    Two distinct cities give exactly 0; fewer give NaN.
    """
    pairs = pairwise_distances(paper, distance)
    if pairs.too_few_cities or pairs.values.size == 0:
        return math.nan
    if pairs.values.size == 1:
        return 0.0
    return shannon_entropy(_bin_counts(pairs.values, np.asarray(edges, float)), base)


def geo_cell(lat: float, lon: float, deg=5.0) -> tuple[int, int]:
    """Grid cell of a point, cells anchored at (-90, -180)."""
    n_rows = math.ceil(180.0 / deg)
    n_cols = math.ceil(360.0 / deg)
    row = min(int(math.floor((lat + 90.0) / deg)), n_rows - 1)
    col = min(int(math.floor((lon + 180.0) / deg)), n_cols - 1)
    return row, col


@dataclass
class GeoBinStats:
    """Cell-level averages of rank weight and city centrality.

    ``cell_of`` maps city id to its grid cell; ``rank_weight`` and
    ``centrality`` map a cell to the mean over the cities that fall in it.
    """

    deg: float
    cell_of: dict[str, tuple[int, int]]
    rank_weight: dict[tuple[int, int], float]
    centrality: dict[tuple[int, int], float] = field(default_factory=dict)

    @classmethod
    def from_profiles(cls, cities: Iterable, profiles: Mapping, deg=5.0) -> "GeoBinStats":
        cell_of = {}
        members: dict[tuple[int, int], list] = {}
        for c in cities:
            cell = geo_cell(c.lat, c.lon, deg)
            cell_of[c.id] = cell
            members.setdefault(cell, []).append(profiles[c.id])
        rank = {k: math.fsum(p.rank_weight for p in v) / len(v) for k, v in members.items()}
        cent = {
            k: math.fsum(p.centrality for p in v) / len(v)
            for k, v in members.items()
            if all(p.centrality is not None and math.isfinite(p.centrality) for p in v)
        }
        return cls(deg, cell_of, rank, cent)

    def weight(self, cell) -> float | None:
        c = self.centrality.get(cell)
        if c is None:
            return None
        return c ** CENTRALITY_POWER / self.rank_weight[cell]


def weighted_entropy(p, w, base=math.e) -> float:
    """``-sum(w * p * log p)`` with ``0 log 0 = 0``."""
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=float)
    nz = p > 0
    return float(-(w[nz] * p[nz] * np.log(p[nz])).sum() / math.log(base)) + 0.0


def weighted_location_entropy(paper: PaperRecord, geo: GeoBinStats, base=math.e) -> float:
    """Weighted entropy of where the coauthors sit on the lat/lon grid.

    Every coauthor counts, so two authors from one city weigh twice. Cells
    without a centrality value are skipped with a warning.
    """
    counts = Counter(geo.cell_of[c] for c in paper.coauthor_cities)
    total = sum(counts.values())
    p, w = [], []
    for cell, n in sorted(counts.items()):
        weight = geo.weight(cell)
        if weight is None:
            warnings.warn(f"no centrality for grid cell {cell}; cell skipped", stacklevel=2)
            continue
        p.append(n / total)
        w.append(weight)
    return weighted_entropy(p, w, base)


def score_papers(papers: Iterable[PaperRecord], distance: DistanceProvider, edges, geo: GeoBinStats,
                 base=math.e) -> list[DiversityScores]:
    out = []
    edges = np.asarray(edges, float)
    for paper in papers:
        pairs = pairwise_distances(paper, distance)
        vals = pairs.values
        if vals.size == 0:
            avg, ent = math.nan, math.nan
        else:
            avg = float(np.mean(vals))
            ent = 0.0 if vals.size == 1 else shannon_entropy(_bin_counts(vals, edges), base)
        out.append(DiversityScores(
            paper_id=paper.paper_id,
            n_authors=len(paper.coauthor_cities),
            n_distinct_cities=len(paper.cities),
            avg_weighted_distance=avg,
            distance_entropy=ent,
            weighted_location_entropy=weighted_location_entropy(paper, geo, base),
            n_unreachable=pairs.n_unreachable,
        ))
    return out
