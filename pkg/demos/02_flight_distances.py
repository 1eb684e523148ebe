"""
Distances on the flight network
===============================

A toy network showing how effective edge lengths make every extra flight
count for almost a full unit, while kilometres only break ties.
"""
# %%
from geodiverse.flight_network import (
    Airport, EffectiveParams, build_graph, effective_length, eigenvector_centrality, shortest_effective_path,
)
from geodiverse.geo_mapping import City, city_pair_distance, map_cities

for km in (0, 500, 1000, 9000):
    print(f"{km:5d} km leg -> effective length {effective_length(km):.4f}")

# %% [markdown]
# Three airports in a row plus a long direct flight. The direct hop is cheaper
# than the two short legs even though it covers more ground.

# %%
airports = [Airport("LIS", 38.77, -9.13), Airport("MAD", 40.47, -3.56),
            Airport("FRA", 50.03, 8.56), Airport("JFK", 40.64, -73.78)]
flights = [("LIS", "MAD", 120), ("MAD", "FRA", 300), ("LIS", "JFK", 80), ("FRA", "JFK", 400)]
g = build_graph(airports, flights)
print(shortest_effective_path(g, {"LIS"}, {"FRA"}))
print(shortest_effective_path(g, {"MAD"}, {"JFK"}))

# %%
ranked = sorted(eigenvector_centrality(g).items(), key=lambda kv: -kv[1])
for aid, c in ranked:
    print(f"{aid}  centrality {c:.3f}")

# %% [markdown]
# Cities map to the busiest airports within 100 km. With a larger lambda the
# kilometres weigh more and the same pair moves further apart.

# %%
cities = [City("lisbon", "Lisbon", 38.72, -9.14, "Portugal"), City("frankfurt", "Frankfurt", 50.11, 8.68, "Germany")]
for lam in (1e-4, 1 / 2500, 0.2):
    graph = g.with_lambda(lam) if lam != g.lam else g
    amap = map_cities(cities, graph)
    d = city_pair_distance(cities[0], cities[1], amap, graph)
    print(f"lambda={lam:<8g} Lisbon-Frankfurt = {d:.4f}")
