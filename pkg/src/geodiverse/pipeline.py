"""End-to-end analysis: distances, per-paper scores and all model fits."""
from __future__ import annotations

import logging
import math
import os
from collections import Counter
from collections.abc import Sequence
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from . import stats
from .config import Config
from .diversity import GeoBinStats, freedman_diaconis_edges, pairwise_distances, score_papers
from .errors import InsufficientDataError, MissingCacheError, ValidationError
from .flight_network import EffectiveParams, FlightGraph, build_graph, eigenvector_centrality, great_circle_km
from .geo_mapping import CacheKey, CityProfile, DistanceCache, build_profiles, city_hop_distances, \
    distance_correlation_matrix, fill_distance_cache
from .ingest import CorpusBundle, load_cache, save_cache

log = logging.getLogger(__name__)

CACHE_ENV = "GEODIVERSE_CACHE_DIR"


@dataclass
class Context:
    """Everything derived from a bundle that does not depend on ARC values."""

    bundle: CorpusBundle
    config: Config
    graph: FlightGraph
    centrality: dict[str, float]
    profiles: dict[str, CityProfile]
    geo: GeoBinStats
    city_ids: tuple[str, ...]

    @property
    def key(self) -> CacheKey:
        return CacheKey(self.config.lam, self.graph.content_hash,
                        float(self.config.airport_radius_km), int(self.config.top_k_airports))

    @property
    def airport_map(self) -> dict[str, tuple[str, ...]]:
        return {c: p.airports for c, p in self.profiles.items()}


def used_city_ids(bundle: CorpusBundle) -> tuple[str, ...]:
    return tuple(sorted({c for p in bundle.papers for c in p.coauthor_cities}))


def prepare(bundle: CorpusBundle, config: Config | None = None, graph: FlightGraph | None = None) -> Context:
    config = config or bundle.config
    if graph is None:
        graph = build_graph(bundle.airports, bundle.flights, EffectiveParams(config.lam))
    elif graph.lam != config.lam:
        graph = graph.with_lambda(config.lam)
    centrality = eigenvector_centrality(graph)
    ids = used_city_ids(bundle)
    cities = [bundle.cities[c] for c in ids]
    profiles = build_profiles(
        cities, graph, bundle.universities, centrality,
        airport_radius_km=config.airport_radius_km, uni_radius_km=config.uni_radius_km,
        top_k=config.top_k_airports, alpha=config.alpha,
    )
    geo = GeoBinStats.from_profiles(cities, profiles, config.geo_bin_deg)
    return Context(bundle, config, graph, centrality, profiles, geo, ids)


def compute_distances(ctx: Context, workers=1) -> DistanceCache:
    cache = DistanceCache(ctx.key, ctx.city_ids)
    fill_distance_cache(cache, ctx.bundle.cities, ctx.airport_map, ctx.graph, workers=workers)
    return cache


def cache_dir(default=None) -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    if default is None:
        raise ValidationError(f"no cache directory given and {CACHE_ENV} is not set")
    return Path(default)


def cache_file(directory, key: CacheKey) -> Path:
    return Path(directory) / f"distances-{key.digest()}.npz"


def ensure_cache(ctx: Context, directory, workers=1, *, build=True) -> tuple[DistanceCache, bool]:
    """Load the cache for ``ctx`` from ``directory`` or build and save it.

    Returns ``(cache, hit)``. With ``build=False`` a missing file raises
    :class:`MissingCacheError`.
    """
    path = cache_file(directory, ctx.key)
    if path.exists():
        cache = load_cache(path, ctx.key)
        if set(ctx.city_ids) <= set(cache.city_ids):
            return cache, True
        if not build:
            raise MissingCacheError(f"{path} does not cover every corpus city; run `geodiverse build-cache`")
    elif not build:
        raise MissingCacheError(f"no distance cache at {path}; run `geodiverse build-cache` first")
    cache = compute_distances(ctx, workers)
    log.info("computed %d city-pair distances (%d unreachable)", len(cache), cache.n_unreachable())
    save_cache(cache, path)
    return cache, False


@dataclass
class PaperMetrics:
    """Column arrays, one entry per paper, in bundle order."""

    paper_id: list[str]
    field: list[str]
    arc: np.ndarray
    avg_wdist: np.ndarray
    dist_entropy: np.ndarray
    wloc_entropy: np.ndarray
    rank_weight: np.ndarray
    n_authors: np.ndarray
    n_cities: np.ndarray
    n_unreachable: int
    entropy_edges: np.ndarray
    cities: list[tuple[str, ...]] = field(repr=False, default_factory=list)

    def __len__(self):
        return len(self.paper_id)

    def subset(self, mask) -> "PaperMetrics":
        mask = np.asarray(mask, bool)
        pick = np.flatnonzero(mask)
        return PaperMetrics(
            [self.paper_id[i] for i in pick], [self.field[i] for i in pick],
            self.arc[mask], self.avg_wdist[mask], self.dist_entropy[mask], self.wloc_entropy[mask],
            self.rank_weight[mask], self.n_authors[mask], self.n_cities[mask], self.n_unreachable,
            self.entropy_edges, [self.cities[i] for i in pick],
        )

    def with_arc(self, arc) -> "PaperMetrics":
        out = self.subset(np.ones(len(self), bool))
        out.arc = np.asarray(arc, float)
        return out


def compute_metrics(ctx: Context, cache: DistanceCache, papers=None) -> PaperMetrics:
    papers = ctx.bundle.papers if papers is None else papers
    pooled = [pairwise_distances(p, cache.get).values for p in papers]
    pooled = np.concatenate(pooled) if pooled else np.empty(0)
    edges = freedman_diaconis_edges(pooled) if pooled.size else np.array([0.0, 1.0])
    scores = score_papers(papers, cache.get, edges, ctx.geo, ctx.config.log_base)
    rank = np.array([
        math.fsum(ctx.profiles[c].rank_weight for c in p.coauthor_cities) / len(p.coauthor_cities)
        for p in papers
    ])
    return PaperMetrics(
        paper_id=[p.paper_id for p in papers],
        field=[p.field for p in papers],
        arc=np.array([p.arc for p in papers], float),
        avg_wdist=np.array([s.avg_weighted_distance for s in scores]),
        dist_entropy=np.array([s.distance_entropy for s in scores]),
        wloc_entropy=np.array([s.weighted_location_entropy for s in scores]),
        rank_weight=rank,
        n_authors=np.array([s.n_authors for s in scores], dtype=int),
        n_cities=np.array([s.n_distinct_cities for s in scores], dtype=int),
        n_unreachable=sum(s.n_unreachable for s in scores),
        entropy_edges=edges,
        cities=[p.cities for p in papers],
    )


# -- analysis -----------------------------------------------------------------

@dataclass
class Table:
    header: tuple[str, ...]
    rows: list[tuple]


@dataclass
class Report:
    tables: dict[str, Table] = field(default_factory=dict)
    binned: dict[str, tuple[str, stats.BinnedSeries]] = field(default_factory=dict)
    fits: dict[str, object] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)


PIECEWISE_HEADER = ("group", "x_star", "b1", "p1", "b2", "p2", "n")
LINEAR_HEADER = ("group", "b", "p", "n")
BINNED_HEADER = ("bin_lo", "bin_hi", "mean_y", "count")
BIN_WIDTHS = {"avg_wdist": 0.1, "dist_entropy": 0.1, "wloc_entropy": 0.05, "rank_weight": 0.05}


def _pw_row(group, fit):
    if fit is None:
        return (group, None, None, None, None, None, None)
    return (group, fit.x_star, fit.b1, fit.p1, fit.b2, fit.p2, fit.n)


def _lin_row(group, fit):
    if fit is None:
        return (group, None, None, None)
    return (group, fit.b, fit.p, fit.n)


def _try(fn, *args, notes=None, label=""):
    try:
        return fn(*args)
    except InsufficientDataError as exc:
        if notes is not None:
            notes.append(f"{label}: skipped ({exc})")
        return None


def _fit_pair(m: PaperMetrics, y, notes, label):
    ok = np.isfinite(m.avg_wdist)
    pw = _try(stats.fit_piecewise, m.avg_wdist[ok], y[ok], notes=notes, label=f"{label} piecewise")
    ok = np.isfinite(m.dist_entropy)
    lin = _try(stats.fit_linear, m.dist_entropy[ok], y[ok], notes=notes, label=f"{label} linear")
    return pw, lin


def subgroup_analysis(m: PaperMetrics, y, key: str, groups: Sequence[str] | None = None,
                      city_names: dict[str, str] | None = None, min_n=stats.MIN_FIT_N):
    """Per-group ``(n, piecewise fit, linear fit, note)`` keyed by field or city.

    A city group holds every paper with at least one coauthor in that city.
    Groups with fewer than ``min_n`` papers, or degenerate data, get ``None`` fits
    and a note.
    """
    if key == "field":
        labels = groups or sorted(set(m.field))
        masks = {g: np.array([f == g for f in m.field]) for g in labels}
    elif key == "city":
        if groups is None:
            counts = Counter(c for cs in m.cities for c in cs)
            groups = [c for c, _ in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:10]]
        names = city_names or {}
        masks = {names.get(g, g): np.array([g in cs for cs in m.cities]) for g in groups}
    else:
        raise ValidationError(f"unknown subgroup key {key!r}; use 'field' or 'city'")
    out = {}
    for label, mask in masks.items():
        n = int(mask.sum())
        if n < min_n:
            out[label] = (n, None, None, f"only {n} papers")
            continue
        notes = []
        pw, lin = _fit_pair(m.subset(mask), np.asarray(y)[mask], notes, label)
        out[label] = (n, pw, lin, "; ".join(notes))
    return out


def pair_records(ctx: Context, cache: DistanceCache, papers=None):
    """One record per distinct city pair per paper: index pairs, network km-free distance, great-circle km, ARC."""
    papers = ctx.bundle.papers if papers is None else papers
    ids = list(cache.city_ids)
    index = cache.index
    pairs, net, arc = [], [], []
    for p in papers:
        for a, b in combinations(p.cities, 2):
            d = cache.get(a, b)
            if math.isfinite(d):
                pairs.append((index[a], index[b]))
                net.append(d)
                arc.append(p.arc)
    pairs = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    cities = ctx.bundle.cities
    lat = np.array([cities[c].lat for c in ids])
    lon = np.array([cities[c].lon for c in ids])
    km = great_circle_km(lat[pairs[:, 0]], lon[pairs[:, 0]], lat[pairs[:, 1]], lon[pairs[:, 1]]) \
        if len(pairs) else np.empty(0)
    return pairs, np.array(net), np.asarray(km), np.array(arc), ids


def select_papers(bundle: CorpusBundle, field_name=None, city=None):
    papers = list(bundle.papers)
    if field_name is not None:
        papers = [p for p in papers if p.field == field_name]
    if city is not None:
        wanted = {c.id for c in bundle.cities.values() if c.name == city or c.id == city}
        if not wanted:
            raise ValidationError(f"unknown city {city!r}")
        papers = [p for p in papers if wanted & set(p.coauthor_cities)]
    if not papers:
        raise ValidationError("no papers left after filtering")
    return papers


def analyze(ctx: Context, cache: DistanceCache, *, adjust=True, field_name=None, city=None) -> Report:
    """Run every table and figure of the analysis on (a filtered view of) the corpus."""
    bundle = ctx.bundle
    papers = select_papers(bundle, field_name, city)
    m = compute_metrics(ctx, cache, papers)
    rep = Report()
    notes = rep.notes
    if m.n_unreachable:
        notes.append(f"{m.n_unreachable} unreachable city pairs were left out")

    rep.tables["metrics"] = Table(
        ("paper_id", "n_authors", "n_cities", "avg_wdist", "dist_entropy", "wloc_entropy"),
        [(pid, int(na), int(nc), d, h, wl) for pid, na, nc, d, h, wl in
         zip(m.paper_id, m.n_authors, m.n_cities, m.avg_wdist, m.dist_entropy, m.wloc_entropy)],
    )
    for name in ("avg_wdist", "dist_entropy", "wloc_entropy", "rank_weight"):
        x = getattr(m, name)
        if np.isfinite(x).any():
            b = stats.bin_series(x, m.arc, BIN_WIDTHS[name])
            rep.binned[f"binned_{name}"] = (name, b)
            rep.tables[f"binned_{name}"] = Table(BINNED_HEADER, list(b.rows()))

    y_raw = m.arc
    y_adj = stats.residualize(m.arc, m.rank_weight) if adjust else None
    y_main = y_adj if adjust else y_raw

    pw_rows, lin_rows = [], []
    variants = [("before_adjusting", y_raw)] + ([("after_adjusting", y_adj)] if adjust else [])
    for label, y in variants:
        pw, lin = _fit_pair(m, y, notes, label)
        rep.fits[f"piecewise_{label}"] = pw
        rep.fits[f"linear_{label}"] = lin
        pw_rows.append(_pw_row(label, pw))
        lin_rows.append(_lin_row(label, lin))
    rep.tables["piecewise_fits"] = Table(PIECEWISE_HEADER, pw_rows)
    rep.tables["linear_fits"] = Table(LINEAR_HEADER, lin_rows)

    names = {c.id: c.name for c in bundle.cities.values()}
    for key in ("field", "city"):
        groups = subgroup_analysis(m, y_main, key, city_names=names)
        rep.tables[f"{key}_piecewise"] = Table(PIECEWISE_HEADER, [_pw_row(g, v[1]) for g, v in groups.items()])
        rep.tables[f"{key}_linear"] = Table(LINEAR_HEADER, [_lin_row(g, v[2]) for g, v in groups.items()])
        rep.tables[f"{key}_counts"] = Table(("group", "n_papers", "note"), [(g, v[0], v[3]) for g, v in groups.items()])

    strata = stats.stratified_piecewise(m.avg_wdist, y_raw, m.rank_weight, ctx.config.strata_bounds)
    rep.tables["strata"] = Table(
        PIECEWISE_HEADER + ("note",),
        [_pw_row(f"({s.lo:g},{s.hi:g}]", s.fit)[:-1] + (s.n, s.note) for s in strata],
    )

    country_of = {c.id: c.country for c in bundle.cities.values()}
    route_rows = []
    for arity in (2, 3):
        for rank, (combo, count) in enumerate(stats.top_routes(
                ({country_of[c] for c in p.coauthor_cities} for p in papers), k=5, arity=arity), 1):
            route_rows.append((arity, rank, "-".join(combo), count))
    rep.tables["top_routes"] = Table(("arity", "rank", "countries", "count"), route_rows)

    try:
        share = stats.north_south_share(
            ([country_of[c] for c in p.coauthor_cities] for p in papers), bundle.north_south or {})
        fr = share.fractions() if share.total else (math.nan,) * 3
        rep.tables["north_south"] = Table(
            ("category", "pairs", "fraction"),
            [("north-north", share.nn, float(fr[0])), ("north-south", share.ns, float(fr[1])),
             ("south-south", share.ss, float(fr[2]))],
        )
        rep.fits["north_south"] = share
    except ValidationError as exc:
        notes.append(f"north/south shares skipped: {exc}")

    pairs, net, km, parc, ids = pair_records(ctx, cache, papers)
    try:
        nd = stats.normalized_distance_difference(net, km, parc)
        rep.fits["normalized_difference"] = nd
        rep.tables["normalized_difference"] = Table(
            ("group", "mean_arc", "count"),
            [("difference<0", nd.mean_arc_below, nd.n_below), ("difference>0", nd.mean_arc_above, nd.n_above)],
        )
    except ValidationError as exc:
        notes.append(f"normalized difference skipped: {exc}")
    if len(pairs) >= 3:
        hops = city_hop_distances(pairs, ids, ctx.airport_map, ctx.graph)
        mat, degenerate = distance_correlation_matrix(hops, net, km)
        labels = ("airport_network", "weighted_airport_network", "euclidean")
        rep.tables["distance_correlations"] = Table(
            ("measure",) + labels, [(labels[i],) + tuple(mat[i]) for i in range(3)])
        if degenerate:
            notes.append(f"zero-variance distance columns: {', '.join(degenerate)}")
    return rep


@dataclass(frozen=True)
class SweepResult:
    lam: float
    binned: stats.BinnedSeries
    fit: stats.PiecewiseFit | None
    n: int


def lambda_sweep(bundle: CorpusBundle, lambdas: Sequence[float], config: Config | None = None, *,
                 workers=1, directory=None, adjust=False) -> list[SweepResult]:
    """Recompute distances, scores and the piecewise fit for each lambda."""
    config = config or bundle.config
    if not lambdas:
        raise ValidationError("need at least one lambda")
    for lam in lambdas:
        if not 0 < lam < 1:
            raise ValidationError(f"lambda must lie in (0, 1), got {lam}")
    base = build_graph(bundle.airports, bundle.flights, EffectiveParams(config.lam))
    out = []
    for lam in lambdas:
        ctx = prepare(bundle, config.replace(lam=lam), base.with_lambda(lam))
        cache = ensure_cache(ctx, directory, workers)[0] if directory else compute_distances(ctx, workers)
        m = compute_metrics(ctx, cache)
        y = stats.residualize(m.arc, m.rank_weight) if adjust else m.arc
        ok = np.isfinite(m.avg_wdist)
        fit = _try(stats.fit_piecewise, m.avg_wdist[ok], y[ok])
        out.append(SweepResult(lam, stats.bin_series(m.avg_wdist, y, BIN_WIDTHS["avg_wdist"]), fit, int(ok.sum())))
    return out
