import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geodiverse.errors import ValidationError
from geodiverse.flight_network import Airport, build_graph, shortest_effective_path
from geodiverse.geo_mapping import (
    CacheKey,
    DistanceCache,
    build_profiles,
    city_centrality,
    city_pair_distance,
    distance_correlation_matrix,
    fill_distance_cache,
    haversine_km,
    map_cities,
    map_city_to_airports,
    university_rank_weight,
)

from conftest import city, uni

KM_PER_DEG = 6371.0 * math.pi / 180.0


def north_of(km):
    """Latitude reached by walking ``km`` due north from the equator."""
    return km / KM_PER_DEG


# haversine

def test_haversine_examples():
    assert haversine_km((10, 20), (10, 20)) == 0
    assert haversine_km((0, 0), (0, 180)) == pytest.approx(math.pi * 6371.0, abs=1e-9)
    assert haversine_km((0, 0), (0, 180)) == pytest.approx(20015.1, abs=0.1)
    assert haversine_km((51.5, -0.12), (48.85, 2.35)) == pytest.approx(343, abs=2)


@given(st.floats(-90, 90), st.floats(-180, 180), st.floats(-90, 90), st.floats(-180, 180))
def test_haversine_symmetric_and_bounded(a, b, c, d):
    h = haversine_km((a, b), (c, d))
    assert h == pytest.approx(haversine_km((c, d), (a, b)), abs=1e-9)
    assert 0 <= h <= math.pi * 6371.0 + 1e-6


def test_haversine_rejects_bad_coordinates():
    with pytest.raises(ValidationError):
        haversine_km((95, 0), (0, 0))


# airport mapping

def hub_world(n_near, volumes, far=False):
    """A city at the origin with ``n_near`` airports within 100 km, each linked to a remote hub."""
    airports = [Airport("HUB", 40.0, 40.0)]
    edges = []
    for i in range(n_near):
        lat = north_of(300 + 10 * i) if far else north_of(10 + 10 * i)
        airports.append(Airport(f"P{i}", lat, 0.0))
        edges.append((f"P{i}", "HUB", volumes[i]))
    return build_graph(airports, edges)


def test_top5_of_seven_by_weighted_degree():
    vols = [5, 70, 10, 60, 20, 50, 30]
    g = hub_world(7, vols)
    got = map_city_to_airports(city("X", 0, 0), g)
    assert got == ["P1", "P3", "P5", "P6", "P4"]


def test_known_degrees_ordered():
    g = hub_world(3, [1, 9, 5])
    assert map_city_to_airports(city("X", 0, 0), g) == ["P1", "P2", "P0"]


def test_nearest_airport_fallback():
    g = hub_world(3, [1, 9, 5], far=True)
    assert map_city_to_airports(city("X", 0, 0), g) == ["P0"]


def test_degree_ties_break_on_id():
    g = hub_world(3, [4, 4, 4])
    assert map_city_to_airports(city("X", 0, 0), g, top_k=2) == ["P0", "P1"]


# city pair distance

def test_same_city_is_zero(line_graph):
    a = city("a", 0, 0)
    amap = map_cities([a], line_graph)
    assert city_pair_distance(a, a, amap, line_graph) == 0.0


def test_shared_airport_correction():
    g = build_graph([Airport("S", 0, 0), Airport("T", 10, 10)], [("S", "T", 1)])
    a, b = city("a", north_of(-50), 0), city("b", north_of(50), 0)
    amap = map_cities([a, b], g)
    assert amap == {"a": ("S",), "b": ("S",)}
    assert city_pair_distance(a, b, amap, g) == pytest.approx(0.5, abs=1e-9)


def test_shared_correction_capped_at_one():
    g = build_graph([Airport("S", 0, 0)], [])
    a, b = city("a", 0, 0), city("b", north_of(450), 0)
    amap = {"a": ("S",), "b": ("S",)}
    assert city_pair_distance(a, b, amap, g) == 1.0


def test_line_graph_cities(line_graph):
    a = city("a", 0, 0)
    c = city("c", 0, line_graph.lons[2])
    amap = map_cities([a, c], line_graph, radius_km=100)
    assert city_pair_distance(a, c, amap, line_graph) == pytest.approx(2.1498, abs=1e-9)
    assert city_pair_distance(c, a, amap, line_graph) == city_pair_distance(a, c, amap, line_graph)


def test_unreachable_cities():
    g = build_graph([Airport("S", 0, 0), Airport("T", 0, 20)], [])
    a, b = city("a", 0, 0), city("b", 0, 20)
    amap = map_cities([a, b], g)
    assert city_pair_distance(a, b, amap, g) == math.inf


# centrality and rank weight

def test_city_centrality_examples():
    g = build_graph([Airport("P", north_of(10), 0), Airport("Q", north_of(-20), 0), Airport("R", 50, 50)], [])
    x = city("x", 0, 0)
    assert city_centrality(x, g, {"P": 0.5, "Q": 0.0, "R": 1.0}) == pytest.approx(0.005, rel=1e-9)
    assert city_centrality(x, g, {"P": 1.0, "Q": 1.0, "R": 1.0}) == pytest.approx(0.0125, rel=1e-9)


def test_city_centrality_clamps_close_airports():
    g = build_graph([Airport("P", north_of(0.2), 0)], [])
    assert city_centrality(city("x", 0, 0), g, {"P": 0.7}) == pytest.approx(0.7)


def test_city_centrality_fallback_to_nearest():
    g = build_graph([Airport("P", north_of(200), 0), Airport("Q", north_of(400), 0)], [])
    got = city_centrality(city("x", 0, 0), g, {"P": 1.0, "Q": 1.0})
    assert got == pytest.approx(200.0 ** -2, rel=1e-9)


def test_rank_weight_examples():
    x = city("x", 0, 0)
    assert university_rank_weight(x, []) == 1.0
    assert university_rank_weight(x, [uni("far", 1, 5, 5)]) == 1.0
    near = [uni("u1", 1, north_of(5), 0), uni("u4", 4, north_of(-15), 0)]
    assert abs(university_rank_weight(x, near) - 3.5) <= 1e-12


def test_boston_like_city_has_highest_weight():
    cities = [city("boston", 42.36, -71.06), city("elsewhere", 40.0, -100.0), city("quiet", 10.0, 10.0)]
    unis = [uni("Harvard-like", 1, 42.37, -71.12), uni("MIT-like", 3, 42.36, -71.09),
            uni("Plains", 150, 40.01, -100.01)]
    w = {c.id: university_rank_weight(c, unis) for c in cities}
    assert max(w, key=w.get) == "boston"
    assert w["quiet"] == 1.0


def test_rank_outside_range_rejected():
    with pytest.raises(ValidationError):
        uni("bad", 0, 0, 0)


# bulk cache against single queries

def test_bulk_cache_matches_pairwise(small_world):
    ctx = small_world.ctx
    ids = list(ctx.city_ids)[:25]
    cache = DistanceCache(ctx.key, ids)
    fill_distance_cache(cache, ctx.bundle.cities, ctx.airport_map, ctx.graph)
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            expect = city_pair_distance(ctx.bundle.cities[a], ctx.bundle.cities[b], ctx.airport_map, ctx.graph)
            assert cache.get(a, b) == pytest.approx(expect, rel=1e-12, abs=1e-15)


def test_cache_same_for_any_worker_count(small_world):
    ctx = small_world.ctx
    ids = list(ctx.city_ids)[:30]
    one = fill_distance_cache(DistanceCache(ctx.key, ids), ctx.bundle.cities, ctx.airport_map, ctx.graph, workers=1)
    three = fill_distance_cache(DistanceCache(ctx.key, ids), ctx.bundle.cities, ctx.airport_map, ctx.graph, workers=3)
    assert one == three


def test_cache_refuses_other_lambda(small_world):
    ctx = small_world.ctx
    key = CacheKey(0.2, ctx.key.graph_hash, 100.0, 5)
    with pytest.raises(ValidationError):
        fill_distance_cache(DistanceCache(key, ctx.city_ids[:3]), ctx.bundle.cities, ctx.airport_map, ctx.graph)


def test_cache_put_if_absent_keeps_first():
    c = DistanceCache(CacheKey(1e-4, "h", 100.0, 5), ["a", "b"])
    assert ("a", "b") not in c
    assert c.put_if_absent("a", "b", 2.0) == 2.0
    assert c.put_if_absent("b", "a", 3.0) == 2.0
    assert c.get("b", "a") == 2.0 and len(c) == 1
    with pytest.raises(KeyError):
        DistanceCache(c.key, ["a", "b", "c"]).get("a", "c")


def test_profiles_cover_each_city(small_world):
    ctx = small_world.ctx
    profiles = build_profiles([ctx.bundle.cities[c] for c in ctx.city_ids], ctx.graph, ctx.bundle.universities,
                              ctx.centrality)
    assert set(profiles) == set(ctx.city_ids)
    assert all(1 <= len(p.airports) <= 5 and p.rank_weight >= 1 for p in profiles.values())


# correlations

def pearson(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = math.fsum((x - ma) * (y - mb) for x, y in zip(a, b))
    va = math.fsum((x - ma) ** 2 for x in a)
    vb = math.fsum((y - mb) ** 2 for y in b)
    return cov / math.sqrt(va * vb)


def test_correlation_duplicate_columns():
    x = [1.0, 2.0, 4.0, 7.0]
    mat, degenerate = distance_correlation_matrix(x, x, x)
    np.testing.assert_allclose(mat, np.ones((3, 3)), atol=1e-15)
    assert degenerate == []


def test_correlation_matches_textbook(nprng):
    hop = nprng.integers(1, 5, 200).astype(float)
    w = 1.2 * hop + nprng.normal(0, 0.3, 200)
    e = 500 * w + nprng.normal(0, 300, 200)
    mat, _ = distance_correlation_matrix(hop, w, e)
    cols = [hop.tolist(), w.tolist(), e.tolist()]
    for i in range(3):
        for j in range(3):
            assert mat[i, j] == pytest.approx(pearson(cols[i], cols[j]), abs=1e-12)


def test_correlation_flags_constant_column():
    mat, degenerate = distance_correlation_matrix([1, 1, 1, 1], [1, 2, 3, 4], [2, 4, 6, 9])
    assert degenerate == ["hop"]
    assert math.isnan(mat[0, 1])
