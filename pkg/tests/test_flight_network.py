import math
import random
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from geodiverse.errors import UnknownAirportError, ValidationError
from geodiverse.flight_network import (
    Airport,
    EffectiveParams,
    build_graph,
    effective_length,
    eigenvector_centrality,
    great_circle_km,
    shortest_effective_path,
    weighted_degree,
)
from geodiverse.oracles import oracle_shortest_path

from conftest import random_airports, random_edges


# effective lengths

@pytest.mark.parametrize("d, lam, expected", [
    (9000, 1e-4, 1.8999),
    (0, 1e-4, 0.9999),
    (1000, 1e-4, 1.0999),
    (0, 0.2, 0.8),
    (5000, 0.2, 1000.8),
])
def test_effective_length_examples(d, lam, expected):
    assert effective_length(d, EffectiveParams(lam)) == pytest.approx(expected, abs=1e-12)


def test_effective_length_rejects_negative():
    with pytest.raises(ValidationError):
        effective_length(-1.0)


@pytest.mark.parametrize("lam", [0.0, 1.0, -0.1, float("nan")])
def test_lambda_must_be_inside_unit_interval(lam):
    with pytest.raises(ValidationError):
        EffectiveParams(lam)


@given(st.floats(0, 20000), st.floats(0, 20000), st.floats(1e-6, 0.999))
def test_effective_length_monotone(d1, d2, lam):
    lo, hi = sorted((d1, d2))
    assert effective_length(lo, lam) <= effective_length(hi, lam)


# graph construction

def test_single_9000km_edge():
    # 9000 km along the equator
    lon = 9000 / 6371.0 * 180 / math.pi
    g = build_graph([Airport("X", 0, 0), Airport("Y", 0, lon)], [("X", "Y", 1)])
    assert g.edges[0].euclid_km == pytest.approx(9000, abs=1e-6)
    assert g.edges[0].effective_len == pytest.approx(1.8999, abs=1e-9)


def test_counts_and_merging():
    airports = [("A", 0, 0), ("B", 1, 1), ("C", 2, 2)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        g = build_graph(airports, [("A", "B", 3), ("B", "A", 7), ("B", "C", 1), ("C", "C", 4)])
    assert len(g) == 3
    assert len(g.edges) == 2
    assert weighted_degree(g, "A") == 7
    assert any("self-loop" in str(w.message) for w in caught)


def test_dangling_edge_names_the_edge():
    with pytest.raises(ValidationError, match="A-Z"):
        build_graph([("A", 0, 0)], [("A", "Z", 1)])


@pytest.mark.parametrize("lat, lon", [(float("nan"), 0), (0, float("inf")), (91, 0), (0, 181)])
def test_bad_coordinates_rejected(lat, lon):
    with pytest.raises(ValidationError):
        Airport("A", lat, lon)


def test_long_leg_warns():
    with pytest.warns(UserWarning, match="exceed"):
        build_graph([("A", 0, 0), ("B", 0, 179)], [("A", "B", 1)])


def test_content_hash_ignores_lambda_and_order():
    a = [("A", 0, 0), ("B", 1, 1), ("C", 2, 2)]
    g1 = build_graph(a, [("A", "B", 3), ("B", "C", 1)], EffectiveParams(1e-4))
    g2 = build_graph(a[::-1], [("C", "B", 1), ("B", "A", 3)], EffectiveParams(0.2))
    assert g1.content_hash == g2.content_hash
    g3 = build_graph(a, [("A", "B", 4), ("B", "C", 1)])
    assert g3.content_hash != g1.content_hash


# shortest paths

def test_line_graph_two_hops(line_graph):
    cost, path = shortest_effective_path(line_graph, {"A"}, {"C"})
    assert cost == pytest.approx(1e-4 * 1500 + 2 * (1 - 1e-4), abs=1e-9)
    assert cost == pytest.approx(2.1498, abs=1e-9)
    assert path == ["A", "B", "C"]


def test_identity_route(line_graph):
    assert shortest_effective_path(line_graph, {"A"}, {"A"}) == (0.0, ["A"])


def test_unreachable_and_unknown():
    g = build_graph([("A", 0, 0), ("B", 1, 1), ("C", 2, 2)], [("A", "B", 1)])
    assert shortest_effective_path(g, {"A"}, {"C"}) == (math.inf, [])
    with pytest.raises(UnknownAirportError):
        shortest_effective_path(g, {"A"}, {"Q"})


def test_oracle_single_edge_and_triangle():
    assert oracle_shortest_path(2, [("a", "b", 1.3)], ["a"], ["b"]) == (1.3, ["a", "b"])
    tri = [("a", "b", 1.0), ("b", "c", 1.0), ("a", "c", 1.5)]
    assert oracle_shortest_path(3, tri, ["a"], ["c"]) == (1.5, ["a", "c"])
    tri[2] = ("a", "c", 2.5)
    assert oracle_shortest_path(3, tri, ["a"], ["c"]) == (2.0, ["a", "b", "c"])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**9))
def test_matches_oracle_on_random_small_graphs(seed):
    rng = random.Random(seed)
    airports = random_airports(rng, rng.randint(2, 8))
    g = build_graph(airports, random_edges(rng, airports))
    ids = g.ids
    edges = [(e.src, e.dst, e.effective_len) for e in g.edges]
    src = set(rng.sample(ids, rng.randint(1, 2)))
    dst = set(rng.sample(ids, rng.randint(1, 2)))
    assert shortest_effective_path(g, src, dst) == oracle_shortest_path(len(ids), edges, src, dst)


def test_bulk_rows_agree_with_single_queries(rng):
    airports = random_airports(rng, 8)
    g = build_graph(airports, random_edges(rng, airports, 0.5))
    rows = g.distance_rows(range(len(g)))
    for i, a in enumerate(g.ids):
        for j, b in enumerate(g.ids):
            assert rows[i, j] == pytest.approx(shortest_effective_path(g, {a}, {b})[0], rel=1e-12)


# weighted degree and centrality

def test_weighted_degree_examples():
    airports = [("H", 0, 0)] + [(f"S{i}", 1, i) for i in range(5)] + [("Z", 5, 5)]
    g = build_graph(airports, [("H", f"S{i}", 1) for i in range(5)])
    assert weighted_degree(g, "H") == 5
    assert weighted_degree(g, "Z") == 0
    with pytest.raises(UnknownAirportError):
        weighted_degree(g, "nope")


def test_centrality_two_nodes():
    g = build_graph([("A", 0, 0), ("B", 1, 1)], [("A", "B", 4)])
    assert eigenvector_centrality(g) == {"A": pytest.approx(1.0), "B": pytest.approx(1.0)}


def test_centrality_path_center_dominates():
    g = build_graph([("A", 0, 0), ("B", 1, 1), ("C", 2, 2)], [("A", "B", 1), ("B", "C", 1)])
    c = eigenvector_centrality(g)
    assert c["B"] > c["A"] and c["B"] > c["C"]
    assert c["A"] == pytest.approx(c["C"])


def test_centrality_matches_dense_eigensolver(rng):
    airports = random_airports(rng, 5)
    edges = [("N0", "N1", 3), ("N1", "N2", 5), ("N2", "N3", 2), ("N3", "N4", 7), ("N0", "N2", 1), ("N1", "N4", 4)]
    g = build_graph(airports, edges)
    c = eigenvector_centrality(g, tol=1e-14)
    vals, vecs = np.linalg.eigh(g.volumes.toarray())
    v = np.abs(vecs[:, -1])
    v /= v.max()
    got = np.array([c[a] for a in g.ids])
    np.testing.assert_allclose(got, v, atol=1e-8)


def test_centrality_disconnected_components_flagged():
    airports = [("A", 0, 0), ("B", 1, 1), ("C", 2, 2), ("D", 3, 3), ("E", 4, 4)]
    g = build_graph(airports, [("A", "B", 5), ("B", "C", 5), ("D", "E", 1)])
    scores, flagged = eigenvector_centrality(g, with_flags=True)
    assert flagged == frozenset({"D", "E"})
    assert max(scores.values()) == pytest.approx(1.0)
    assert 0 < scores["D"] < 1


def test_great_circle_broadcasts():
    d = great_circle_km(0.0, 0.0, np.array([0.0, 0.0]), np.array([0.0, 180.0]))
    np.testing.assert_allclose(d, [0.0, math.pi * 6371.0])
