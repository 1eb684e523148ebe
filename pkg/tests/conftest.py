import math
import random

import numpy as np
import pytest

from geodiverse.flight_network import Airport, build_graph
from geodiverse.geo_mapping import City, University
from geodiverse.pipeline import compute_distances, compute_metrics, prepare
from geodiverse.synth import WorldSpec, generate_world


def random_airports(rng, n):
    """Airports spread over a region small enough that every leg stays under 9000 km."""
    return [Airport(f"N{i}", rng.uniform(-25, 25), rng.uniform(-30, 30)) for i in range(n)]


def random_edges(rng, airports, p=0.4):
    ids = [a.id for a in airports]
    return [(a, b, rng.randint(1, 100)) for i, a in enumerate(ids) for b in ids[i + 1:] if rng.random() < p]


@pytest.fixture
def line_graph():
    """A-B is 1000 km, B-C is 500 km, all on the equator."""
    deg_per_km = 180.0 / (math.pi * 6371.0)
    airports = [Airport("A", 0.0, 0.0), Airport("B", 0.0, 1000 * deg_per_km), Airport("C", 0.0, 1500 * deg_per_km)]
    return build_graph(airports, [("A", "B", 10), ("B", "C", 5)])


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def nprng():
    return np.random.default_rng(1234)


class World:
    """A generated world together with its derived context and scores."""

    def __init__(self, spec):
        self.spec = spec
        self.bundle = generate_world(spec)
        self.ctx = prepare(self.bundle)
        self.cache = compute_distances(self.ctx)
        self.metrics = compute_metrics(self.ctx, self.cache)


@pytest.fixture(scope="session")
def small_world():
    return World(WorldSpec(n_airports=120, n_cities=80, n_universities=40, n_papers=800, seed=5))


@pytest.fixture(scope="session")
def world_factory():
    made = {}

    def make(**kw):
        key = tuple(sorted(kw.items()))
        if key not in made:
            made[key] = World(WorldSpec(**kw))
        return made[key]

    return make


def city(cid, lat, lon, country="USA"):
    return City(cid, cid, lat, lon, country)


def uni(name, rank, lat, lon):
    return University(name, rank, lat, lon)


# acceptance criteria report: tests marked ``criterion(n, title)`` get one line each

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and short title")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not rep.failed:
        return
    n, title = mark.args
    detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
    if rep.when == "call" or n not in _CRITERIA:
        _CRITERIA[n] = ("PASS" if rep.passed else "FAIL", title, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {title}" + (f"  [{detail}]" if detail else ""))
