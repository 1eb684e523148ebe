import math
from collections import Counter
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from geodiverse.diversity import (
    FIELDS,
    GeoBinStats,
    PaperRecord,
    avg_weighted_distance,
    distance_entropy,
    freedman_diaconis_edges,
    geo_cell,
    pairwise_distances,
    shannon_entropy,
    weighted_entropy,
    weighted_location_entropy,
)
from geodiverse.errors import ValidationError
from geodiverse.geo_mapping import CityProfile, map_cities
from geodiverse.oracles import oracle_entropy, oracle_shortest_path

from conftest import city


def paper(*cities, pid="p"):
    return PaperRecord(pid, 1.0, FIELDS[0], tuple(cities))


def table(d):
    """Distance provider backed by a dict of unordered pairs."""
    def get(a, b):
        return d[(a, b)] if (a, b) in d else d[(b, a)]
    return get


def test_paper_validation():
    with pytest.raises(ValidationError):
        PaperRecord("p", -1.0, FIELDS[0], ("a",))
    with pytest.raises(ValidationError):
        PaperRecord("p", 1.0, "Astrology", ("a",))
    with pytest.raises(ValidationError):
        PaperRecord("p", 1.0, FIELDS[0], ())


def test_pair_counts():
    d = table({("A", "B"): 1.0, ("A", "C"): 2.0, ("B", "C"): 3.0})
    assert len(pairwise_distances(paper("A", "B", "C"), d).values) == 3
    assert len(pairwise_distances(paper("A", "A", "B"), d).values) == 1
    single = pairwise_distances(paper("A", "A"), d)
    assert single.too_few_cities and single.values.size == 0


def test_line_graph_pairs_match_oracle(line_graph):
    cities = [city("a", 0, 0), city("b", 0, line_graph.lons[1]), city("c", 0, line_graph.lons[2])]
    amap = map_cities(cities, line_graph, radius_km=50)
    edges = [(e.src, e.dst, e.effective_len) for e in line_graph.edges]

    def dist(x, y):
        return oracle_shortest_path(3, edges, amap[x], amap[y])[0]

    got = sorted(pairwise_distances(paper("a", "b", "c"), dist).values)
    assert got == pytest.approx(sorted([1.0999, 1.0499, 2.1498]), abs=1e-9)


def test_average_distance():
    d = table({("A", "B"): 1.0, ("A", "C"): 2.0, ("B", "C"): 3.0})
    assert avg_weighted_distance(paper("A", "B", "C"), d) == 2.0
    assert avg_weighted_distance(paper("A", "B"), table({("A", "B"): 1.0999})) == 1.0999
    assert math.isnan(avg_weighted_distance(paper("A"), d))


def test_unreachable_pairs_counted_and_skipped():
    d = table({("A", "B"): 1.0, ("A", "C"): math.inf, ("B", "C"): 3.0})
    pairs = pairwise_distances(paper("A", "B", "C"), d)
    assert pairs.n_unreachable == 1
    assert avg_weighted_distance(paper("A", "B", "C"), d) == 2.0


@given(st.lists(st.floats(0.01, 10), min_size=3, max_size=3), st.integers(2, 6))
def test_average_equals_remean(vals, n):
    ids = [f"c{i}" for i in range(n)]
    d = {pair: vals[k % 3] + k for k, pair in enumerate(combinations(ids, 2))}
    got = avg_weighted_distance(paper(*ids), table(d))
    assert got == pytest.approx(math.fsum(d.values()) / len(d), rel=1e-12)


# distance entropy

def test_two_city_entropy_is_exactly_zero():
    edges = np.linspace(0, 10, 11)
    assert distance_entropy(paper("A", "B", "B"), table({("A", "B"): 3.3}), edges) == 0.0


def test_single_city_entropy_undefined():
    assert math.isnan(distance_entropy(paper("A", "A"), table({}), np.array([0.0, 1.0])))


def test_three_bins_equiprobable():
    d = table({("A", "B"): 0.5, ("A", "C"): 1.5, ("B", "C"): 2.5})
    h = distance_entropy(paper("A", "B", "C"), d, np.array([0.0, 1.0, 2.0, 3.0]))
    assert h == pytest.approx(math.log(3), abs=1e-15)


def test_entropy_matches_hand_histograms(nprng):
    ids = [f"c{i}" for i in range(6)]
    vals = {p: float(v) for p, v in zip(combinations(ids, 2), nprng.uniform(0, 4, 15))}
    edges = freedman_diaconis_edges(list(vals.values()))
    counts = Counter()
    for v in vals.values():
        k = max(i for i in range(len(edges) - 1) if edges[i] <= v) if v < edges[-1] else len(edges) - 2
        counts[k] += 1
    got = distance_entropy(paper(*ids), table(vals), edges)
    assert got == pytest.approx(oracle_entropy(list(counts.values())), abs=1e-12)


def test_freedman_diaconis_edges_cover_data(nprng):
    v = nprng.normal(2, 0.5, 500)
    e = freedman_diaconis_edges(v)
    assert e[0] == v.min() and e[-1] == v.max()
    iqr = np.subtract(*np.percentile(v, [75, 25]))
    assert np.diff(e)[0] <= 2 * iqr * 500 ** (-1 / 3) + 1e-12
    assert len(freedman_diaconis_edges([1.0, 1.0, 1.0])) == 2


@given(st.lists(st.integers(0, 50), min_size=1, max_size=20))
def test_shannon_matches_oracle(counts):
    if sum(counts) == 0:
        assert shannon_entropy(counts) == 0.0
    else:
        assert shannon_entropy(counts) == pytest.approx(oracle_entropy(counts), abs=1e-12)


def test_shannon_bases():
    assert shannon_entropy([1, 1]) == pytest.approx(math.log(2), abs=1e-15)
    assert shannon_entropy([1, 1], base=2) == pytest.approx(1.0, abs=1e-15)
    assert oracle_entropy([1, 1]) == pytest.approx(math.log(2), abs=1e-15)


# location entropy

def test_weighted_entropy_examples():
    assert weighted_entropy([0.5, 0.5], [1, 1]) == pytest.approx(math.log(2), abs=1e-15)
    assert weighted_entropy([0.5, 0.5], [2, 1]) == pytest.approx(1.5 * math.log(2), abs=1e-15)
    assert weighted_entropy([0.5, 0.5], [2, 1]) == pytest.approx(1.0397, abs=1e-4)
    assert weighted_entropy([1.0], [3.0]) == 0.0


@given(st.lists(st.integers(1, 30), min_size=1, max_size=12))
def test_unit_weights_give_shannon(counts):
    p = np.array(counts, float) / sum(counts)
    assert abs(weighted_entropy(p, np.ones(len(p))) - shannon_entropy(counts)) <= 1e-12


@pytest.mark.parametrize("k", [1, 2, 5, 36])
def test_uniform_cells_give_log_k(k):
    p = np.full(k, 1.0 / k)
    assert abs(weighted_entropy(p, np.ones(k)) - math.log(k)) <= 1e-12


def test_geo_cells():
    assert geo_cell(-90, -180) == (0, 0)
    assert geo_cell(90, 180) == (35, 71)
    assert geo_cell(4.99, 0.0) == (18, 36)
    assert geo_cell(5.0, 0.0) == (19, 36)


def geo_for(cities, rank=None, cent=None):
    profiles = {c.id: CityProfile(c.id, ("X",), (rank or {}).get(c.id, 1.0), (cent or {}).get(c.id, 1.0))
                for c in cities}
    return GeoBinStats.from_profiles(cities, profiles, 5.0)


def test_location_entropy_one_cell_is_zero():
    cs = [city("a", 1, 1), city("b", 2, 2)]
    assert weighted_location_entropy(paper("a", "b", "b"), geo_for(cs)) == 0.0


def test_location_entropy_counts_coauthors():
    cs = [city("a", 1, 1), city("b", 31, 31)]
    geo = geo_for(cs)
    assert weighted_location_entropy(paper("a", "b"), geo) == pytest.approx(math.log(2), abs=1e-15)
    p = np.array([2, 1]) / 3
    assert weighted_location_entropy(paper("a", "a", "b"), geo) == pytest.approx(-(p * np.log(p)).sum(), abs=1e-15)


def test_location_weights_use_cell_means():
    cs = [city("a", 1, 1), city("a2", 2, 2), city("b", 31, 31)]
    geo = geo_for(cs, rank={"a": 1.0, "a2": 3.0, "b": 1.0}, cent={"a": 0.5, "a2": 1.5, "b": 1.0})
    w_a = 1.0 ** 0.05 / 2.0
    expect = -(w_a * 0.5 * math.log(0.5) + 1.0 * 0.5 * math.log(0.5))
    assert weighted_location_entropy(paper("a", "b"), geo) == pytest.approx(expect, abs=1e-15)


def test_location_entropy_skips_cells_without_centrality():
    cs = [city("a", 1, 1), city("b", 31, 31)]
    geo = geo_for(cs)
    del geo.centrality[geo.cell_of["b"]]
    with pytest.warns(UserWarning, match="no centrality"):
        h = weighted_location_entropy(paper("a", "b"), geo)
    assert h == pytest.approx(-0.5 * math.log(0.5), abs=1e-15)
