"""Cities, universities and the city-to-city network distance.

A city is represented on the flight network by up to ``top_k`` airports
within ``radius_km`` (busiest first). The distance between two cities is the
cheapest route between their airport sets; when the sets share an airport the
distance is instead the great-circle gap divided by 200 km, capped at 1, so a
trip without a flight is always shorter than any trip with one.
"""
from __future__ import annotations

import hashlib
import math
import multiprocessing
import threading
from collections.abc import Iterable, Mapping
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .errors import ValidationError
from .flight_network import (
    UNREACHABLE,
    FlightGraph,
    _check_coords,
    great_circle_km,
    shortest_effective_path,
)

SHARED_AIRPORT_NORM_KM = 200.0


@dataclass(frozen=True)
class City:
    id: str
    name: str
    lat: float
    lon: float
    country: str

    def __post_init__(self):
        _check_coords(self.lat, self.lon, f"city {self.id!r}")


@dataclass(frozen=True)
class University:
    name: str
    rank: int
    lat: float
    lon: float

    def __post_init__(self):
        if not 1 <= self.rank <= 500:
            raise ValidationError(f"university {self.name!r}: rank must be in [1, 500], got {self.rank}")
        _check_coords(self.lat, self.lon, f"university {self.name!r}")


@dataclass(frozen=True)
class CityProfile:
    city_id: str
    airports: tuple[str, ...]
    rank_weight: float
    centrality: float


def haversine_km(p1, p2) -> float:
    """Great-circle distance between two ``(lat, lon)`` points, Earth radius 6371 km."""
    _check_coords(p1[0], p1[1], "point")
    _check_coords(p2[0], p2[1], "point")
    return float(great_circle_km(p1[0], p1[1], p2[0], p2[1]))


def _airport_km(city: City, graph: FlightGraph) -> np.ndarray:
    return great_circle_km(city.lat, city.lon, graph.lats, graph.lons)


def map_city_to_airports(city: City, graph: FlightGraph, radius_km=100.0, top_k=5) -> list[str]:
    """Busiest airports (by weighted degree) within ``radius_km``, or the nearest one."""
    if len(graph) == 0:
        raise ValidationError("cannot map cities onto an empty graph")
    km = _airport_km(city, graph)
    ids = graph.ids
    inside = np.flatnonzero(km <= radius_km)
    if inside.size == 0:
        nearest = min(range(len(ids)), key=lambda i: (km[i], ids[i]))
        return [ids[nearest]]
    deg = graph.weighted_degrees
    ranked = sorted(inside, key=lambda i: (-deg[i], ids[i]))
    return [ids[i] for i in ranked[:top_k]]


def map_cities(cities: Iterable[City], graph: FlightGraph, radius_km=100.0, top_k=5) -> dict[str, tuple[str, ...]]:
    return {c.id: tuple(map_city_to_airports(c, graph, radius_km, top_k)) for c in cities}


def city_pair_distance(city_a: City, city_b: City, airport_map: Mapping[str, Iterable[str]],
                       graph: FlightGraph, shared_norm_km=SHARED_AIRPORT_NORM_KM) -> float:
    """Network distance between two mapped cities (``UNREACHABLE`` if no route)."""
    if city_b.id < city_a.id:
        city_a, city_b = city_b, city_a
    try:
        set_a, set_b = set(airport_map[city_a.id]), set(airport_map[city_b.id])
    except KeyError as exc:
        raise ValidationError(f"city {exc.args[0]!r} has no airport mapping") from None
    if set_a & set_b:
        km = haversine_km((city_a.lat, city_a.lon), (city_b.lat, city_b.lon))
        return min(km / shared_norm_km, 1.0)
    dist, _ = shortest_effective_path(graph, sorted(set_a), sorted(set_b))
    return dist


def city_centrality(city: City, graph: FlightGraph, centrality: Mapping[str, float],
                    radius_km=100.0, alpha=2.0, min_km=1.0) -> float:
    """Distance-decayed sum of airport centralities around ``city``.

    Every airport within ``radius_km`` contributes ``C(a) * d**-alpha`` with
    ``d`` clamped below at ``min_km``; with no airport in range the nearest one
    is used.
    """
    km = _airport_km(city, graph)
    inside = np.flatnonzero(km <= radius_km)
    if inside.size == 0:
        inside = np.array([min(range(len(km)), key=lambda i: (km[i], graph.ids[i]))])
    total = 0.0
    for i in inside:
        d = max(float(km[i]), min_km)
        total += centrality[graph.ids[i]] * d ** (-alpha)
    return total


def university_rank_weight(city: City, universities: Iterable[University], radius_km=20.0) -> float:
    """Sum of ``1 + 1/sqrt(rank)`` over ranked universities near ``city``; 1 if none."""
    universities = list(universities)
    if not universities:
        return 1.0
    km = great_circle_km(city.lat, city.lon, np.array([u.lat for u in universities]),
                         np.array([u.lon for u in universities]))
    terms = [1.0 + 1.0 / math.sqrt(u.rank) for u, d in zip(universities, km) if d <= radius_km]
    return math.fsum(terms) if terms else 1.0


def build_profiles(cities: Iterable[City], graph: FlightGraph, universities: Iterable[University],
                   centrality: Mapping[str, float], *, airport_radius_km=100.0, uni_radius_km=20.0,
                   top_k=5, alpha=2.0) -> dict[str, CityProfile]:
    universities = list(universities)
    u_lat = np.array([u.lat for u in universities])
    u_lon = np.array([u.lon for u in universities])
    u_term = np.array([1.0 + 1.0 / math.sqrt(u.rank) for u in universities])
    profiles = {}
    for c in cities:
        if universities:
            near = great_circle_km(c.lat, c.lon, u_lat, u_lon) <= uni_radius_km
            weight = math.fsum(u_term[near]) if near.any() else 1.0
        else:
            weight = 1.0
        profiles[c.id] = CityProfile(
            city_id=c.id,
            airports=tuple(map_city_to_airports(c, graph, airport_radius_km, top_k)),
            rank_weight=weight,
            centrality=city_centrality(c, graph, centrality, airport_radius_km, alpha),
        )
    return profiles


# -- distance cache -----------------------------------------------------------

@dataclass(frozen=True)
class CacheKey:
    lam: float
    graph_hash: str
    radius_km: float
    top_k: int

    def digest(self) -> str:
        text = f"{self.lam!r}|{self.graph_hash}|{float(self.radius_km)!r}|{int(self.top_k)}"
        return hashlib.sha256(text.encode()).hexdigest()[:16]


class DistanceCache:
    """Symmetric city-pair distance table over a fixed set of city ids.

    Missing entries are NaN, unreachable pairs are ``inf``. ``put_if_absent``
    is safe to call from several threads.
    """

    def __init__(self, key: CacheKey, city_ids: Iterable[str], matrix: np.ndarray | None = None):
        self.key = key
        self.city_ids = tuple(sorted(set(city_ids)))
        self.index = {c: i for i, c in enumerate(self.city_ids)}
        n = len(self.city_ids)
        if matrix is None:
            matrix = np.full((n, n), np.nan)
            np.fill_diagonal(matrix, 0.0)
        elif matrix.shape != (n, n):
            raise ValidationError(f"matrix shape {matrix.shape} does not match {n} cities")
        self._mat = matrix
        self._lock = threading.Lock()

    def __len__(self):
        iu = np.triu_indices(len(self.city_ids), k=1)
        return int(np.count_nonzero(~np.isnan(self._mat[iu])))

    def __contains__(self, pair):
        a, b = pair
        i, j = self.index.get(a), self.index.get(b)
        return i is not None and j is not None and not math.isnan(self._mat[i, j])

    def __eq__(self, other):
        if not isinstance(other, DistanceCache):
            return NotImplemented
        return (self.key == other.key and self.city_ids == other.city_ids
                and np.array_equal(self._mat, other._mat, equal_nan=True))

    @property
    def matrix(self) -> np.ndarray:
        view = self._mat.view()
        view.flags.writeable = False
        return view

    def get(self, a: str, b: str) -> float:
        d = self._mat[self.index[a], self.index[b]]
        if math.isnan(d):
            raise KeyError((a, b))
        return float(d)

    __call__ = get

    def put_if_absent(self, a: str, b: str, d: float) -> float:
        i, j = self.index[a], self.index[b]
        with self._lock:
            cur = self._mat[i, j]
            if math.isnan(cur):
                self._mat[i, j] = self._mat[j, i] = d
                return d
            return float(cur)

    def items(self):
        """Yield ``(a, b, d)`` for every stored pair with ``a < b``."""
        ids = self.city_ids
        for i, j in zip(*np.triu_indices(len(ids), k=1)):
            d = self._mat[i, j]
            if not math.isnan(d):
                yield ids[i], ids[j], float(d)

    def n_unreachable(self) -> int:
        iu = np.triu_indices(len(self.city_ids), k=1)
        return int(np.count_nonzero(np.isinf(self._mat[iu])))

    def _store_rows(self, rows: np.ndarray, block: np.ndarray):
        with self._lock:
            self._mat[rows] = block

    def _symmetrize(self):
        iu = np.triu_indices(len(self.city_ids), k=1)
        self._mat[(iu[1], iu[0])] = self._mat[iu]


def _padded_airports(ids, airport_map, graph):
    k = max(len(airport_map[c]) for c in ids)
    out = np.empty((len(ids), k), dtype=np.int64)
    for r, c in enumerate(ids):
        idx = [graph.require(a) for a in airport_map[c]]
        out[r] = idx + [idx[0]] * (k - len(idx))
    return out


def _block_rows(n_rows, n_cols, k, budget=4_000_000):
    return max(1, budget // max(1, k * k * n_cols))


def _source_rows(lengths, used, sources):
    """Effective distances from ``sources`` to the ``used`` airports only."""
    return csgraph.dijkstra(lengths, directed=False, indices=sources)[:, used]


def _min_rows(dist, pos, lat, lon, norm_km, start, stop):
    """City rows ``start:stop`` of the distance matrix from airport-level distances."""
    rows = np.arange(start, stop)
    sub = dist[pos[rows]][:, :, pos]                       # (b, k, m, k)
    block = sub.min(axis=(1, 3))
    shared = (pos[rows][:, :, None, None] == pos[None, None, :, :]).any(axis=(1, 3))
    if shared.any():
        km = great_circle_km(lat[rows][:, None], lon[rows][:, None], lat[None, :], lon[None, :])
        block = np.where(shared, np.minimum(km / norm_km, 1.0), block)
    return start, block


# Worker processes receive their inputs once through the pool initializer
# (inherited on fork) instead of with every task.
_WORKER_STATE: dict = {}


def _init_worker(state):
    _WORKER_STATE.clear()
    _WORKER_STATE.update(state)


def _worker_sources(sources):
    st = _WORKER_STATE
    return _source_rows(st["lengths"], st["used"], sources)


def _worker_rows(bounds):
    st = _WORKER_STATE
    return _min_rows(st["dist"], st["pos"], st["lat"], st["lon"], st["norm_km"], *bounds)


def _run(workers, fn, tasks, state):
    """Map ``fn`` over ``tasks``; in-process for one worker, else on a process pool."""
    if workers == 1 or len(tasks) == 1:
        _init_worker(state)
        try:
            return [fn(t) for t in tasks]
        finally:
            _WORKER_STATE.clear()
    methods = multiprocessing.get_all_start_methods()
    ctx = multiprocessing.get_context("fork" if "fork" in methods else None)
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx,
                             initializer=_init_worker, initargs=(state,)) as pool:
        return list(pool.map(fn, tasks))


def fill_distance_cache(cache: DistanceCache, cities: Mapping[str, City], airport_map: Mapping[str, Iterable[str]],
                        graph: FlightGraph, *, workers=1, shared_norm_km=SHARED_AIRPORT_NORM_KM) -> DistanceCache:
    """Compute every pair of ``cache.city_ids`` with bulk shortest-path sweeps.

    Two stages run on ``workers`` processes: shortest paths from every airport
    that serves a city, then the per-city-pair minimum over airport sets. Each
    task produces a disjoint slice, so the result does not depend on scheduling
    or on the number of workers.
    """
    ids = cache.city_ids
    if not ids:
        return cache
    if abs(graph.lam - cache.key.lam) > 0.0:
        raise ValidationError(f"graph lambda {graph.lam} does not match cache lambda {cache.key.lam}")
    workers = max(1, int(workers))
    air = _padded_airports(ids, airport_map, graph)
    used = np.unique(air)
    pos = np.searchsorted(used, air)

    chunks = np.array_split(used, min(len(used), workers * 4)) if workers > 1 else [used]
    parts = _run(workers, _worker_sources, chunks, {"lengths": graph.lengths, "used": used})
    dist = np.vstack(parts)

    m, k = air.shape
    step = _block_rows(m, m, k)
    if workers > 1:
        step = max(1, min(step, -(-m // (workers * 4))))
    state = {
        "dist": dist, "pos": pos, "norm_km": shared_norm_km,
        "lat": np.array([cities[c].lat for c in ids]), "lon": np.array([cities[c].lon for c in ids]),
    }
    for start, block in _run(workers, _worker_rows, [(s, min(s + step, m)) for s in range(0, m, step)], state):
        cache._store_rows(np.arange(start, start + len(block)), block)
    cache._symmetrize()
    np.fill_diagonal(cache._mat, 0.0)
    return cache


def city_hop_distances(pairs: np.ndarray, ids: list[str], airport_map, graph: FlightGraph) -> np.ndarray:
    """Fewest flights between the airport sets of each ``(i, j)`` index pair (0 if shared)."""
    air = _padded_airports(ids, airport_map, graph)
    used = np.unique(air)
    pos = np.searchsorted(used, air)
    hops = graph.distance_rows(used, unweighted=True)
    out = np.empty(len(pairs))
    for n, (i, j) in enumerate(pairs):
        out[n] = hops[np.ix_(pos[i], air[j])].min()
    return out


def distance_correlation_matrix(hop, weighted, euclid):
    """Pearson correlations among hop, weighted-network and great-circle distances.

    Returns ``(matrix, degenerate)``: a 3x3 array in that column order, and the
    list of column names with zero variance (their off-diagonal entries are NaN).
    Rows with any non-finite value are dropped first.
    """
    cols = np.vstack([np.asarray(hop, float), np.asarray(weighted, float), np.asarray(euclid, float)])
    keep = np.all(np.isfinite(cols), axis=0)
    cols = cols[:, keep]
    if cols.shape[1] < 3:
        raise ValidationError("need at least 3 pairs with finite distances")
    names = ("hop", "weighted", "euclidean")
    centered = cols - cols.mean(axis=1, keepdims=True)
    norms = np.sqrt(np.einsum("ij,ij->i", centered, centered))
    degenerate = [names[i] for i in range(3) if norms[i] == 0.0]
    mat = np.full((3, 3), np.nan)
    for i in range(3):
        for j in range(3):
            if norms[i] > 0 and norms[j] > 0:
                mat[i, j] = 1.0 if i == j else float(centered[i] @ centered[j] / (norms[i] * norms[j]))
    np.fill_diagonal(mat, 1.0)
    return mat, degenerate
