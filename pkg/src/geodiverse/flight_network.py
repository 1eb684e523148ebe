"""Air transport graph with effective edge lengths.

Each flight leg of great-circle length ``d`` km costs ``lam * d + (1 - lam)``.
With a small ``lam`` the cost is dominated by the number of legs and the
kilometres only break ties between routes with the same number of legs.
"""
from __future__ import annotations

import hashlib
import heapq
import math
import warnings
from collections.abc import Iterable
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import UnknownAirportError, ValidationError

EARTH_RADIUS_KM = 6371.0
MAX_LEG_KM = 9000.0
UNREACHABLE = math.inf


@dataclass(frozen=True)
class Airport:
    id: str
    lat: float
    lon: float

    def __post_init__(self):
        _check_coords(self.lat, self.lon, f"airport {self.id!r}")


@dataclass(frozen=True)
class FlightEdge:
    src: str
    dst: str
    volume: float
    euclid_km: float
    effective_len: float


@dataclass(frozen=True)
class EffectiveParams:
    lam: float = 1e-4

    def __post_init__(self):
        if not (isinstance(self.lam, (int, float)) and 0.0 < self.lam < 1.0):
            raise ValidationError(f"lambda must lie in (0, 1), got {self.lam!r}")


def _check_coords(lat, lon, what):
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValidationError(f"{what}: non-finite coordinate ({lat}, {lon})")
    if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
        raise ValidationError(f"{what}: coordinate out of range ({lat}, {lon})")


def great_circle_km(lat1, lon1, lat2, lon2):
    """Haversine distance in km; broadcasts over numpy arrays."""
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(np.asarray(lon2) - np.asarray(lon1))
    a = np.sin(dp / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * np.arcsin(np.sqrt(np.clip(a, 0.0, 1.0)))


def effective_length(d_km, params: EffectiveParams | float = EffectiveParams()):
    """Cost of a single leg of ``d_km`` kilometres."""
    lam = params.lam if isinstance(params, EffectiveParams) else EffectiveParams(params).lam
    d = np.asarray(d_km, dtype=float)
    if np.any(d < 0) or np.any(~np.isfinite(d)):
        raise ValidationError(f"leg length must be finite and >= 0, got {d_km!r}")
    out = lam * d + (1.0 - lam)
    return float(out) if out.ndim == 0 else out


class FlightGraph:
    """Immutable undirected flight network.

    Build instances with :func:`build_graph`. Airports are indexed in sorted id
    order; ``index[id]`` gives the row used by the matrix helpers.
    """

    def __init__(self, airports: tuple[Airport, ...], edges: tuple[FlightEdge, ...], lam: float):
        self.airports = airports
        self.edges = edges
        self.lam = lam
        self.ids = tuple(a.id for a in airports)
        self.index = {aid: i for i, aid in enumerate(self.ids)}
        self.lats = np.array([a.lat for a in airports], dtype=float)
        self.lons = np.array([a.lon for a in airports], dtype=float)
        n = len(airports)
        src = np.array([self.index[e.src] for e in edges], dtype=np.int64)
        dst = np.array([self.index[e.dst] for e in edges], dtype=np.int64)
        rows = np.concatenate([src, dst])
        cols = np.concatenate([dst, src])
        eff = np.array([e.effective_len for e in edges], dtype=float)
        vol = np.array([e.volume for e in edges], dtype=float)
        self.lengths = sparse.csr_matrix((np.concatenate([eff, eff]), (rows, cols)), shape=(n, n))
        self.volumes = sparse.csr_matrix((np.concatenate([vol, vol]), (rows, cols)), shape=(n, n))
        self.weighted_degrees = np.asarray(self.volumes.sum(axis=1)).ravel()
        adj: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for i, j, w in zip(src, dst, eff):
            adj[i].append((int(j), float(w)))
            adj[j].append((int(i), float(w)))
        self._adj = adj

    def __len__(self):
        return len(self.airports)

    def __repr__(self):
        return f"FlightGraph({len(self.airports)} airports, {len(self.edges)} edges, lam={self.lam:g})"

    @cached_property
    def content_hash(self) -> str:
        """SHA-256 over airports and edge volumes; independent of lambda."""
        h = hashlib.sha256()
        for a in self.airports:
            h.update(f"A|{a.id}|{a.lat!r}|{a.lon!r}\n".encode())
        for e in sorted(self.edges, key=lambda e: (e.src, e.dst)):
            h.update(f"E|{e.src}|{e.dst}|{e.volume!r}\n".encode())
        return h.hexdigest()

    def with_lambda(self, lam: float) -> "FlightGraph":
        params = EffectiveParams(lam)
        edges = tuple(
            FlightEdge(e.src, e.dst, e.volume, e.euclid_km, effective_length(e.euclid_km, params))
            for e in self.edges
        )
        return FlightGraph(self.airports, edges, params.lam)

    def require(self, airport_id: str) -> int:
        try:
            return self.index[airport_id]
        except KeyError:
            raise UnknownAirportError(f"unknown airport id {airport_id!r}") from None

    def neighbors(self, i: int):
        return self._adj[i]

    def distance_rows(self, sources, *, unweighted=False) -> np.ndarray:
        """Shortest effective (or hop) distances from each source index to every airport."""
        sources = np.asarray(sources, dtype=np.int64)
        if sources.size == 0:
            return np.empty((0, len(self)), dtype=float)
        return csgraph.dijkstra(self.lengths, directed=False, indices=sources, unweighted=unweighted)


def build_graph(airports: Iterable, edges: Iterable, params: EffectiveParams = EffectiveParams()) -> FlightGraph:
    """Validate inputs and assemble a :class:`FlightGraph`.

    ``airports`` holds :class:`Airport` objects or ``(id, lat, lon)`` tuples and
    ``edges`` holds ``(src, dst, volume)`` tuples. Repeated routes, in either
    direction, are merged into one edge carrying the largest volume.
    """
    if not isinstance(params, EffectiveParams):
        params = EffectiveParams(params)
    by_id: dict[str, Airport] = {}
    for a in airports:
        if not isinstance(a, Airport):
            a = Airport(str(a[0]), float(a[1]), float(a[2]))
        if a.id in by_id:
            raise ValidationError(f"duplicate airport id {a.id!r}")
        by_id[a.id] = a
    if not by_id:
        raise ValidationError("graph needs at least one airport")

    merged: dict[tuple[str, str], float] = {}
    for src, dst, volume in edges:
        src, dst, volume = str(src), str(dst), float(volume)
        missing = [x for x in (src, dst) if x not in by_id]
        if missing:
            raise ValidationError(f"edge {src}-{dst} references unknown airport(s) {missing}")
        if not math.isfinite(volume) or volume < 0:
            raise ValidationError(f"edge {src}-{dst}: volume must be finite and >= 0, got {volume}")
        if src == dst:
            warnings.warn(f"dropping self-loop on airport {src!r}", stacklevel=2)
            continue
        key = (src, dst) if src < dst else (dst, src)
        merged[key] = max(volume, merged.get(key, -1.0))

    built = []
    long_legs = 0
    for (src, dst) in sorted(merged):
        a, b = by_id[src], by_id[dst]
        km = float(great_circle_km(a.lat, a.lon, b.lat, b.lon))
        if km > MAX_LEG_KM:
            long_legs += 1
        built.append(FlightEdge(src, dst, merged[(src, dst)], km, effective_length(km, params)))
    if long_legs:
        warnings.warn(f"{long_legs} flight legs exceed {MAX_LEG_KM:.0f} km", stacklevel=2)
    airports_sorted = tuple(by_id[k] for k in sorted(by_id))
    return FlightGraph(airports_sorted, tuple(built), params.lam)


def shortest_effective_path(graph: FlightGraph, src_set, dst_set) -> tuple[float, list[str]]:
    """Cheapest route from any airport in ``src_set`` to any in ``dst_set``.

    Equal-cost routes are resolved by fewer legs, then by the lexicographically
    smallest sequence of airport ids. Returns ``(UNREACHABLE, [])`` when no
    route exists.
    """
    src_idx = sorted({graph.require(a) for a in src_set})
    dst_idx = {graph.require(b) for b in dst_set}
    if not src_idx or not dst_idx:
        raise ValidationError("source and destination sets must be non-empty")
    ids = graph.ids
    # label = (cost, legs, path of ids); extending two labels by the same leg keeps their order
    heap = [(0.0, 0, (ids[i],), i) for i in src_idx]
    heapq.heapify(heap)
    done = set()
    while heap:
        cost, legs, path, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u in dst_idx:
            return cost, list(path)
        for v, w in graph.neighbors(u):
            if v not in done:
                heapq.heappush(heap, (cost + w, legs + 1, path + (ids[v],), v))
    return UNREACHABLE, []


def weighted_degree(graph: FlightGraph, airport_id: str) -> float:
    """Total flight volume on legs touching ``airport_id``."""
    return float(graph.weighted_degrees[graph.require(airport_id)])


def eigenvector_centrality(graph: FlightGraph, *, tol=1e-10, max_iter=10_000, with_flags=False):
    """Principal eigenvector of the volume-weighted adjacency, max-normalised to 1.

    Power iteration starts from the all-ones vector. The matrix is shifted by
    half the largest weighted degree so bipartite structure (stars, paths)
    cannot make the iteration oscillate; the shift leaves eigenvectors intact.

    A disconnected network is solved component by component. Components other
    than the one with the largest eigenvalue are scaled by the ratio of their
    eigenvalue to the largest one, and their airports are reported as flagged
    when ``with_flags`` is set (the function then returns ``(scores, flagged)``).
    """
    if len(graph) == 0:
        raise ValidationError("graph is empty")
    n_comp, labels = csgraph.connected_components(graph.volumes, directed=False)
    scores = np.zeros(len(graph))
    eigvals = np.zeros(n_comp)
    for c in range(n_comp):
        members = np.flatnonzero(labels == c)
        sub = graph.volumes[members][:, members]
        vec, eigvals[c] = _power_iterate(sub, tol, max_iter)
        scores[members] = vec
    top = int(np.argmax(eigvals))
    if n_comp > 1:
        lam_max = eigvals[top]
        for c in range(n_comp):
            ratio = eigvals[c] / lam_max if lam_max > 0 else (1.0 if c == top else 0.0)
            scores[labels == c] *= ratio
    result = {aid: float(s) for aid, s in zip(graph.ids, scores)}
    if with_flags:
        flagged = frozenset(aid for aid, lab in zip(graph.ids, labels) if lab != top)
        return result, flagged
    return result


def _power_iterate(mat, tol, max_iter):
    n = mat.shape[0]
    x = np.ones(n)
    if mat.nnz == 0:
        return x, 0.0
    shift = 0.5 * float(np.max(np.asarray(mat.sum(axis=1))))
    for _ in range(max_iter):
        y = mat @ x + shift * x
        y /= y.max()
        if np.max(np.abs(y - x)) <= tol * np.max(np.abs(y)):
            x = y
            break
        x = y
    eigval = float(x @ (mat @ x) / (x @ x))
    return x, eigval
