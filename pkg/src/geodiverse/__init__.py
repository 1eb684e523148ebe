"""Geographic diversity of coauthorship measured over the air-transport network."""
from .config import Config, load_config
from .diversity import PaperRecord, distance_entropy, weighted_entropy, weighted_location_entropy
from .errors import (CacheError, CacheVersionError, InsufficientDataError, MissingCacheError,
                     StaleCacheError, UnknownAirportError, ValidationError)
from .flight_network import Airport, FlightGraph, build_graph, effective_length, shortest_effective_path
from .geo_mapping import City, DistanceCache, University, city_pair_distance, map_city_to_airports
from .ingest import CorpusBundle, load_bundle, load_cache, save_bundle, save_cache
from .stats import fit_linear, fit_piecewise, north_south_share, residualize

__version__ = "0.1.0"

__all__ = [
    "Airport", "CacheError", "CacheVersionError", "City", "Config", "CorpusBundle", "DistanceCache",
    "FlightGraph", "InsufficientDataError", "MissingCacheError", "PaperRecord", "StaleCacheError",
    "University", "UnknownAirportError", "ValidationError", "build_graph", "city_pair_distance",
    "distance_entropy", "effective_length", "fit_linear", "fit_piecewise", "load_bundle", "load_cache",
    "load_config", "map_city_to_airports", "north_south_share", "residualize", "save_bundle", "save_cache",
    "shortest_effective_path", "weighted_entropy", "weighted_location_entropy",
]
