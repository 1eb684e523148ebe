"""Synthetic corpora with planted effects.

Airports are scattered around real country centres with a hub-and-spoke
flight pattern, cities sit near airports, and papers draw coauthor cities with
a mix of local and long-range collaboration. Citation scores are then set from
the paper's own diversity scores::

    arc = base + peak(avg distance) + entropy_slope * entropy
          + rank_slope * (rank weight - 1) + noise

where ``peak`` rises with slope ``b1`` up to ``x_star`` and continues with
slope ``b2`` after it. Every estimator downstream therefore has a known target.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .config import Config
from .diversity import FIELDS, PaperRecord
from .errors import ValidationError
from .flight_network import MAX_LEG_KM, Airport, great_circle_km
from .geo_mapping import City, University, university_rank_weight
from .ingest import CorpusBundle, load_north_south, make_bundle

# name, lat, lon, spread in degrees, relative size
COUNTRIES = (
    ("USA", 39.0, -95.0, 9.0, 0.20),
    ("Canada", 47.0, -80.0, 5.0, 0.05),
    ("UK", 53.0, -2.0, 1.8, 0.07),
    ("Ireland", 53.3, -7.8, 0.8, 0.01),
    ("Germany", 51.0, 10.0, 2.0, 0.07),
    ("France", 46.5, 2.5, 2.2, 0.06),
    ("Italy", 42.8, 12.5, 2.0, 0.04),
    ("Spain", 40.2, -3.7, 2.2, 0.03),
    ("Switzerland", 46.8, 8.2, 0.6, 0.02),
    ("Netherlands", 52.2, 5.3, 0.6, 0.02),
    ("Sweden", 60.0, 15.5, 2.5, 0.02),
    ("Japan", 36.0, 138.0, 2.5, 0.06),
    ("South Korea", 36.5, 127.8, 1.0, 0.03),
    ("Australia", -32.0, 147.0, 4.0, 0.03),
    ("China", 32.0, 113.0, 6.0, 0.09),
    ("India", 21.0, 78.0, 5.0, 0.04),
    ("Brazil", -15.0, -48.0, 5.0, 0.03),
    ("Mexico", 21.0, -101.0, 3.0, 0.02),
    ("South Africa", -28.0, 26.0, 3.0, 0.01),
    ("Nigeria", 8.5, 7.5, 2.0, 0.01),
)
PRESTIGE_AVERSION = 4.0


@dataclass(frozen=True)
class WorldSpec:
    n_airports: int = 400
    n_cities: int = 300
    n_universities: int = 150
    n_papers: int = 5000
    hub_fraction: float = 0.1
    x_star: float = 1.60
    b1: float = 0.25
    b2: float = -0.08
    entropy_slope: float = 0.0
    rank_slope: float = 0.0
    base_arc: float = 1.0
    sigma: float = 0.05
    nn_share: float | None = 0.94
    lam: float = 1e-4
    seed: int = 42

    def __post_init__(self):
        for name in ("n_airports", "n_cities", "n_universities", "n_papers"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.n_universities > 500:
            raise ValidationError("at most 500 ranked universities")
        if self.sigma < 0:
            raise ValidationError("sigma must be >= 0")
        if not 0 < self.hub_fraction <= 1:
            raise ValidationError("hub_fraction must lie in (0, 1]")
        if self.nn_share is not None and not 0 <= self.nn_share <= 1:
            raise ValidationError("nn_share must lie in [0, 1]")
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> "WorldSpec":
        return dataclasses.replace(self, **changes)


def load_world_spec(path, **overrides) -> WorldSpec:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    known = {f.name for f in dataclasses.fields(WorldSpec)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ValidationError(f"unknown world spec keys: {', '.join(unknown)}")
    if isinstance(raw.get("nn_share"), str) and raw["nn_share"].lower() == "none":
        raw["nn_share"] = None  # TOML has no null
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return WorldSpec(**raw)


def peak(x, x_star, b1, b2):
    """Continuous two-slope curve through the origin with its kink at ``x_star``."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= x_star, b1 * x, b1 * x_star + b2 * (x - x_star))


def _jitter(rng, lat, lon, max_km):
    r = max_km * math.sqrt(rng.random())
    theta = rng.random() * 2 * math.pi
    lat2 = float(np.clip(lat + r / 111.2 * math.cos(theta), -89.0, 89.0))
    lon2 = lon + r / (111.2 * max(math.cos(math.radians(lat2)), 0.05)) * math.sin(theta)
    lon2 = (lon2 + 180.0) % 360.0 - 180.0
    return lat2, float(lon2)


def _airports(spec, rng):
    sizes = np.array([c[4] for c in COUNTRIES])
    alloc = np.maximum(1, np.floor(sizes / sizes.sum() * spec.n_airports).astype(int))
    while alloc.sum() < spec.n_airports:
        alloc[int(rng.choice(len(COUNTRIES), p=sizes / sizes.sum()))] += 1
    while alloc.sum() > spec.n_airports:
        alloc[int(np.argmax(alloc))] -= 1
    airports, country, hub = [], [], []
    k = 0
    for (name, clat, clon, spread, _), n in zip(COUNTRIES, alloc):
        n_hubs = max(1, round(n * spec.hub_fraction)) if n else 0
        for j in range(n):
            lat = float(np.clip(clat + rng.normal(0, spread), -89, 89))
            lon = float((clon + rng.normal(0, spread * 1.3) + 180) % 360 - 180)
            airports.append(Airport(f"A{k:04d}", round(lat, 5), round(lon, 5)))
            country.append(name)
            hub.append(j < n_hubs)
            k += 1
    return airports, country, np.array(hub)


def _flights(airports, country, hub, rng):
    lat = np.array([a.lat for a in airports])
    lon = np.array([a.lon for a in airports])
    km = great_circle_km(lat[:, None], lon[:, None], lat[None, :], lon[None, :])
    ids = [a.id for a in airports]
    country = np.array(country)
    hubs = np.flatnonzero(hub)
    edges = {}

    def add(i, j, vol):
        if i != j:
            key = (min(i, j), max(i, j))
            edges[key] = max(edges.get(key, 0), int(vol))

    # spokes feed their nearest domestic hub
    for i in np.flatnonzero(~hub):
        dom = hubs[country[hubs] == country[i]]
        order = dom[np.argsort(km[i, dom])]
        add(i, order[0], rng.integers(20, 400))
        if len(order) > 1 and rng.random() < 0.3:
            add(i, order[1], rng.integers(10, 200))
        near = np.flatnonzero((km[i] < 600) & ~hub)
        for j in near[near > i]:
            if rng.random() < 0.08:
                add(i, j, rng.integers(5, 60))
    # domestic hub mesh
    for a in hubs:
        for b in hubs[hubs > a]:
            if country[a] == country[b] and rng.random() < 0.7:
                add(a, b, rng.integers(300, 3000))
    # spanning tree over hubs keeps the network connected
    in_tree = [hubs[0]]
    rest = set(hubs[1:].tolist())
    while rest:
        r = np.array(sorted(rest))
        t = np.array(in_tree)
        sub = km[np.ix_(t, r)]
        ti, ri = np.unravel_index(np.argmin(sub), sub.shape)
        add(t[ti], r[ri], rng.integers(500, 4000))
        in_tree.append(r[ri])
        rest.discard(int(r[ri]))
    # extra long-haul links
    for a in hubs:
        for b in hubs[hubs > a]:
            if country[a] != country[b] and km[a, b] <= MAX_LEG_KM and rng.random() < 0.12:
                add(a, b, rng.integers(200, 5000))
    return [(ids[i], ids[j], float(v)) for (i, j), v in sorted(edges.items())]


def _cities(spec, airports, country, hub, rng):
    weights = np.where(hub, 6.0, 1.0)
    weights /= weights.sum()
    cities = []
    for k in range(spec.n_cities):
        a = int(rng.choice(len(airports), p=weights))
        lat, lon = _jitter(rng, airports[a].lat, airports[a].lon, 140.0)
        cities.append(City(f"C{k:04d}", f"City {k:04d}", round(lat, 5), round(lon, 5), country[a]))
    return cities


def _universities(spec, cities, rng):
    ranks = rng.choice(np.arange(1, 501), size=spec.n_universities, replace=False)
    # universities cluster in the first (most popular) cities
    pop = 1.0 / np.arange(1, len(cities) + 1) ** 0.8
    pop /= pop.sum()
    out = []
    for k, r in enumerate(sorted(ranks.tolist())):
        c = cities[int(rng.choice(len(cities), p=pop))]
        lat, lon = _jitter(rng, c.lat, c.lon, 12.0)
        out.append(University(f"University {k:03d}", int(r), round(lat, 5), round(lon, 5)))
    return out


def _papers(spec, cities, prestige, classifier, rng):
    north = [i for i, c in enumerate(cities) if classifier.get(c.country) == "north"]
    south = [i for i, c in enumerate(cities) if classifier.get(c.country) == "south"]
    if spec.nn_share is not None:
        if spec.nn_share > 0 and not north:
            raise ValidationError("nn_share > 0 needs at least one north city")
        if spec.nn_share < 1 and not south:
            raise ValidationError("nn_share < 1 needs at least one south city")
    by_country: dict[str, list[int]] = {}
    for i, c in enumerate(cities):
        by_country.setdefault(c.country, []).append(i)
    pop = 1.0 / np.arange(1, len(cities) + 1) ** 0.6
    # long-range partners lean towards cities without strong universities
    reach = 1.0 / np.asarray(prestige) ** PRESTIGE_AVERSION
    nn = total = 0
    papers = []
    modes = {}
    for name, pool in (("all", list(range(len(cities)))), ("north", north), ("mixed", north + south)):
        if pool:
            modes[name] = (pool, pop[pool] / pop[pool].sum(), reach[pool] / reach[pool].sum())
    south_set = set(south)
    for k in range(spec.n_papers):
        n_auth = int(min(1 + rng.poisson(2.2), 12))
        if spec.nn_share is None:
            mode, force_south = "all", False
        elif total == 0 or nn / total < spec.nn_share:
            mode, force_south = ("north", False) if north else ("mixed", True)
        else:
            mode, force_south = "mixed", True
        pool, p, q = modes[mode]
        chosen = [pool[int(rng.choice(len(pool), p=p))]]
        for _ in range(n_auth - 1):
            u = rng.random()
            if u < 0.30:
                chosen.append(chosen[int(rng.integers(len(chosen)))])
            elif u < 0.55:
                same = by_country[cities[chosen[0]].country]
                chosen.append(same[int(rng.integers(len(same)))])
            else:
                chosen.append(pool[int(rng.choice(len(pool), p=q))])
        if force_south and n_auth > 1 and not south_set.intersection(chosen):
            chosen[int(rng.integers(n_auth))] = south[int(rng.integers(len(south)))]
        if spec.nn_share is not None:
            kn = sum(1 for i in chosen if classifier[cities[i].country] == "north")
            nn += kn * (kn - 1) // 2
            total += n_auth * (n_auth - 1) // 2
        field = FIELDS[int(rng.integers(len(FIELDS)))]
        papers.append((f"P{k:06d}", field, tuple(cities[i].id for i in chosen)))
    return papers


def generate_world(spec: WorldSpec = WorldSpec(), config: Config | None = None) -> CorpusBundle:
    """Build a reproducible corpus whose citation scores follow the planted model."""
    from .pipeline import compute_distances, compute_metrics, prepare

    rng = np.random.default_rng(spec.seed)
    classifier = load_north_south()
    airports, country, hub = _airports(spec, rng)
    flights = _flights(airports, country, hub, rng)
    cities = _cities(spec, airports, country, hub, rng)
    universities = _universities(spec, cities, rng)
    prestige = [university_rank_weight(c, universities) for c in cities]
    drafts = _papers(spec, cities, prestige, classifier, rng)
    noise = rng.normal(0.0, spec.sigma, size=len(drafts)) if spec.sigma > 0 else np.zeros(len(drafts))

    config = (config or Config()).replace(lam=spec.lam)
    papers = [PaperRecord(pid, 1.0, field, cs) for pid, field, cs in drafts]
    draft = make_bundle(airports, flights, cities, universities, papers, config, classifier)
    ctx = prepare(draft)
    m = compute_metrics(ctx, compute_distances(ctx))
    d = np.nan_to_num(m.avg_wdist, nan=0.0)
    h = np.nan_to_num(m.dist_entropy, nan=0.0)
    arc = (spec.base_arc + peak(d, spec.x_star, spec.b1, spec.b2) + spec.entropy_slope * h
           + spec.rank_slope * (m.rank_weight - 1.0) + noise)
    arc = np.maximum(arc, 0.0)
    papers = [PaperRecord(p.paper_id, float(a), p.field, p.coauthor_cities) for p, a in zip(papers, arc)]
    return make_bundle(airports, flights, cities, universities, papers, config, classifier)


def write_world_spec(spec: WorldSpec, path) -> Path:
    lines = []
    for f in dataclasses.fields(spec):
        v = getattr(spec, f.name)
        lines.append(f'{f.name} = "none"' if v is None else f"{f.name} = {v!r}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
