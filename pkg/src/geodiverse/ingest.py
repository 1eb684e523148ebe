"""Loading, validating and persisting corpus files and distance caches.

A corpus directory holds five UTF-8 CSV files with header rows::

    airports.csv      airport_id,lat,lon
    flights.csv       src_id,dst_id,volume
    cities.csv        city_id,name,lat,lon,country
    universities.csv  name,rank,lat,lon
    papers.csv        paper_id,arc,field,city_ids      (city_ids separated by ';')

and optionally ``north_south.csv`` (``country,class`` with class ``north`` or
``south``) and ``config.toml``.

Distance caches are written either as ``.npz`` (default) or as ``.csv``. The
CSV form starts with ``#`` metadata lines (format version, lambda, graph hash,
airport radius, top-k, city id list) followed by ``city_a,city_b,lambda,distance``
rows; unreachable pairs are written as ``inf``.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .config import Config
from .diversity import PaperRecord
from .errors import CacheVersionError, StaleCacheError, ValidationError
from .flight_network import Airport
from .geo_mapping import CacheKey, City, DistanceCache, University

CACHE_VERSION = 1
FILES = {
    "airports": ("airports.csv", ("airport_id", "lat", "lon")),
    "flights": ("flights.csv", ("src_id", "dst_id", "volume")),
    "cities": ("cities.csv", ("city_id", "name", "lat", "lon", "country")),
    "universities": ("universities.csv", ("name", "rank", "lat", "lon")),
    "papers": ("papers.csv", ("paper_id", "arc", "field", "city_ids")),
}
MAX_LISTED_OFFENDERS = 20


@dataclass(frozen=True)
class Rejection:
    file: str
    line: int
    reason: str


@dataclass(frozen=True)
class CorpusBundle:
    airports: tuple[Airport, ...]
    flights: tuple[tuple[str, str, float], ...]
    cities: dict[str, City]
    universities: tuple[University, ...]
    papers: tuple[PaperRecord, ...]
    config: Config = field(default_factory=Config)
    north_south: dict[str, str] | None = None
    counts: dict[str, tuple[int, int]] = field(default_factory=dict)
    rejections: tuple[Rejection, ...] = ()
    content_hash: str = ""

    def summary(self) -> str:
        parts = [f"{len(self.papers)} papers", f"{len(self.cities)} cities",
                 f"{len(self.airports)} airports", f"{len(self.flights)} flights",
                 f"{len(self.universities)} universities"]
        if self.rejections:
            parts.append(f"{len(self.rejections)} rejected rows")
        return ", ".join(parts)


def _float(text, what):
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise ValueError(f"{what} is not a number: {text!r}") from None
    if not math.isfinite(v):
        raise ValueError(f"{what} is not finite: {text!r}")
    return v


def _read_rows(path: Path, columns):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != columns:
            raise ValidationError(f"{path}: expected header {','.join(columns)}, got {header}")
        for row in reader:
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            yield reader.line_num, row


def _parse(path: Path, columns, make, rejections):
    out = []
    total = 0
    for line, row in _read_rows(path, columns):
        total += 1
        if len(row) != len(columns):
            rejections.append(Rejection(path.name, line, f"expected {len(columns)} fields, got {len(row)}"))
            continue
        try:
            out.append(make([c.strip() for c in row]))
        except (ValueError, ValidationError) as exc:
            rejections.append(Rejection(path.name, line, str(exc)))
    return out, total


def _paper(row):
    cities = tuple(c.strip() for c in row[3].split(";") if c.strip())
    return PaperRecord(row[0], _float(row[1], "arc"), row[2], cities)


def _university(row):
    try:
        rank = int(row[1])
    except ValueError:
        raise ValueError(f"rank is not an integer: {row[1]!r}") from None
    if rank <= 0:
        raise ValueError(f"rank must be positive, got {rank}")
    return University(row[0], rank, _float(row[2], "lat"), _float(row[3], "lon"))


_MAKERS = {
    "airports": lambda r: Airport(r[0], _float(r[1], "lat"), _float(r[2], "lon")),
    "flights": lambda r: (r[0], r[1], _volume(r[2])),
    "cities": lambda r: City(r[0], r[1], _float(r[2], "lat"), _float(r[3], "lon"), r[4]),
    "universities": _university,
    "papers": _paper,
}


def _volume(text):
    v = _float(text, "volume")
    if v < 0:
        raise ValueError(f"volume must be >= 0, got {v}")
    return v


def load_north_south(path=None) -> dict[str, str]:
    """Read a ``country,class`` table; the bundled table is used when ``path`` is None."""
    if path is None:
        text = resources.files("geodiverse.data").joinpath("north_south.csv").read_text(encoding="utf-8")
        lines = text.splitlines()
    else:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    reader = csv.reader(lines)
    header = next(reader)
    if [h.strip() for h in header] != ["country", "class"]:
        raise ValidationError(f"north/south table needs header country,class, got {header}")
    table = {}
    for row in reader:
        if not row:
            continue
        country, cls = row[0].strip(), row[1].strip().lower()
        if cls not in ("north", "south"):
            raise ValidationError(f"country {country!r}: class must be north or south, got {cls!r}")
        table[country] = cls
    return table


def _resolve(paths) -> dict[str, Path]:
    if isinstance(paths, (str, Path)):
        root = Path(paths)
        return {k: root / name for k, (name, _) in FILES.items()}
    return {k: Path(v) for k, v in paths.items()}


def load_bundle(paths, config: Config | None = None, north_south=None) -> CorpusBundle:
    """Load and cross-check a corpus.

    ``paths`` is a directory with the standard file names or a mapping from
    table name to file path. Malformed rows are skipped and listed in
    ``rejections``; broken references (a flight to an unknown airport, a paper
    citing an unknown city) raise :class:`ValidationError`.
    """
    files = _resolve(paths)
    missing = [k for k in FILES if k not in files or not files[k].exists()]
    if missing:
        raise ValidationError(f"missing corpus files: {', '.join(missing)}")
    config = config or Config()
    rejections: list[Rejection] = []
    tables, counts = {}, {}
    for key, (_, columns) in FILES.items():
        rows, total = _parse(files[key], columns, _MAKERS[key], rejections)
        tables[key] = rows
        counts[key] = (len(rows), total - len(rows))

    airport_ids = {a.id for a in tables["airports"]}
    if len(airport_ids) != len(tables["airports"]):
        raise ValidationError("duplicate airport ids")
    bad = [f"{s}-{d}" for s, d, _ in tables["flights"] if s not in airport_ids or d not in airport_ids]
    if bad:
        raise ValidationError(f"flights reference unknown airports: {', '.join(bad[:MAX_LISTED_OFFENDERS])}")
    cities = {}
    for c in tables["cities"]:
        if c.id in cities:
            raise ValidationError(f"duplicate city id {c.id!r}")
        cities[c.id] = c
    unresolved = sorted({c for p in tables["papers"] for c in p.coauthor_cities if c not in cities})
    if unresolved:
        raise ValidationError(
            f"{len(unresolved)} unresolved city ids in papers, e.g. {', '.join(unresolved[:MAX_LISTED_OFFENDERS])}")

    if north_south is None:
        ns_path = config.north_south_table_path
        if ns_path is None and isinstance(paths, (str, Path)) and (Path(paths) / "north_south.csv").exists():
            ns_path = Path(paths) / "north_south.csv"
        north_south = load_north_south(ns_path)

    bundle = CorpusBundle(
        airports=tuple(sorted(tables["airports"], key=lambda a: a.id)),
        flights=tuple(tables["flights"]),
        cities=dict(sorted(cities.items())),
        universities=tuple(sorted(tables["universities"], key=lambda u: (u.rank, u.name))),
        papers=tuple(tables["papers"]),
        config=config,
        north_south=north_south,
        counts=counts,
        rejections=tuple(rejections),
    )
    return _with_hash(bundle)


def bundle_hash(bundle: CorpusBundle) -> str:
    """Order-independent content hash over every table and the config."""
    h = hashlib.sha256()

    def table(name, rows):
        h.update(f"[{name}]\n".encode())
        for r in sorted(rows):
            h.update((repr(r) + "\n").encode())

    table("airports", [(a.id, a.lat, a.lon) for a in bundle.airports])
    table("flights", [(s, d, float(v)) for s, d, v in bundle.flights])
    table("cities", [(c.id, c.name, c.lat, c.lon, c.country) for c in bundle.cities.values()])
    table("universities", [(u.name, u.rank, u.lat, u.lon) for u in bundle.universities])
    table("papers", [(p.paper_id, p.arc, p.field, p.coauthor_cities) for p in bundle.papers])
    table("north_south", list((bundle.north_south or {}).items()))
    h.update(json.dumps(bundle.config.to_dict(), sort_keys=True).encode())
    return h.hexdigest()


def _with_hash(bundle: CorpusBundle) -> CorpusBundle:
    from dataclasses import replace
    return replace(bundle, content_hash=bundle_hash(bundle))


def make_bundle(airports, flights, cities, universities, papers, config=None, north_south=None) -> CorpusBundle:
    """Assemble a bundle from in-memory objects (used by the generator and tests)."""
    cities = {c.id: c for c in cities}
    unresolved = sorted({c for p in papers for c in p.coauthor_cities if c not in cities})
    if unresolved:
        raise ValidationError(f"unresolved city ids in papers: {', '.join(unresolved[:MAX_LISTED_OFFENDERS])}")
    return _with_hash(CorpusBundle(
        airports=tuple(sorted(airports, key=lambda a: a.id)),
        flights=tuple(flights),
        cities=dict(sorted(cities.items())),
        universities=tuple(sorted(universities, key=lambda u: (u.rank, u.name))),
        papers=tuple(papers),
        config=config or Config(),
        north_south=north_south if north_south is not None else load_north_south(),
    ))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def save_bundle(bundle: CorpusBundle, directory) -> Path:
    """Write the bundle in the standard layout, rows sorted for stable output."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    _write_csv(root / "airports.csv", FILES["airports"][1], [(a.id, repr(a.lat), repr(a.lon)) for a in bundle.airports])
    _write_csv(root / "flights.csv", FILES["flights"][1],
               [(s, d, repr(float(v))) for s, d, v in sorted(bundle.flights)])
    _write_csv(root / "cities.csv", FILES["cities"][1],
               [(c.id, c.name, repr(c.lat), repr(c.lon), c.country) for c in bundle.cities.values()])
    _write_csv(root / "universities.csv", FILES["universities"][1],
               [(u.name, u.rank, repr(u.lat), repr(u.lon)) for u in bundle.universities])
    _write_csv(root / "papers.csv", FILES["papers"][1],
               [(p.paper_id, repr(p.arc), p.field, ";".join(p.coauthor_cities))
                for p in sorted(bundle.papers, key=lambda p: p.paper_id)])
    if bundle.north_south is not None:
        _write_csv(root / "north_south.csv", ("country", "class"), sorted(bundle.north_south.items()))
    return root


# -- distance cache persistence -------------------------------------------------

def _meta(key: CacheKey) -> dict:
    return {"version": CACHE_VERSION, "lambda": key.lam, "graph_hash": key.graph_hash,
            "radius_km": float(key.radius_km), "top_k": int(key.top_k)}


def save_cache(cache: DistanceCache, path) -> Path:
    """Persist a distance cache; the format follows the file suffix (.csv or .npz)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = _meta(cache.key)
    tmp = path.with_name(path.name + ".tmp")
    if path.suffix == ".csv":
        with open(tmp, "w", newline="", encoding="utf-8") as fh:
            fh.write("# geodiverse distance cache\n")
            for k, v in meta.items():
                fh.write(f"# {k}={v!r}\n" if isinstance(v, float) else f"# {k}={v}\n")
            fh.write("# city_ids=" + ";".join(cache.city_ids) + "\n")
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("city_a", "city_b", "lambda", "distance"))
            lam = repr(cache.key.lam)
            for a, b, d in cache.items():
                w.writerow((a, b, lam, repr(d)))
    else:
        n = len(cache.city_ids)
        iu = np.triu_indices(n, k=1)
        with open(tmp, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta, sort_keys=True)),
                     city_ids=np.array(cache.city_ids, dtype=str),
                     upper=cache.matrix[iu])
    tmp.replace(path)
    return path


def _check_meta(meta: dict, expected: CacheKey | None, path) -> CacheKey:
    version = int(meta.get("version", -1))
    if version != CACHE_VERSION:
        raise CacheVersionError(
            f"{path}: cache format version {version}, this library reads version {CACHE_VERSION}; "
            "delete the file and rerun `geodiverse build-cache` to regenerate it")
    key = CacheKey(float(meta["lambda"]), str(meta["graph_hash"]), float(meta["radius_km"]), int(meta["top_k"]))
    if expected is not None and key != expected:
        diffs = [f"{name}: cached {getattr(key, name)!r}, wanted {getattr(expected, name)!r}"
                 for name in ("lam", "graph_hash", "radius_km", "top_k")
                 if getattr(key, name) != getattr(expected, name)]
        raise StaleCacheError(f"{path}: cache was built for a different setup ({'; '.join(diffs)})")
    return key


def load_cache(path, expected: CacheKey | None = None) -> DistanceCache:
    """Read a cache written by :func:`save_cache`, refusing stale or foreign files."""
    path = Path(path)
    if path.suffix == ".csv":
        meta, ids, rows = {}, (), []
        with open(path, newline="", encoding="utf-8") as fh:
            lines = iter(fh)
            for line in lines:
                if not line.startswith("#"):
                    header = next(csv.reader([line]))
                    break
                body = line[1:].strip()
                if "=" in body:
                    k, v = body.split("=", 1)
                    if k == "city_ids":
                        ids = tuple(v.split(";")) if v else ()
                    else:
                        meta[k] = v
            else:
                header = None
            if header != ["city_a", "city_b", "lambda", "distance"]:
                raise ValidationError(f"{path}: unexpected cache header {header}")
            rows = list(csv.reader(lines))
        key = _check_meta(meta, expected, path)
        cache = DistanceCache(key, ids)
        for a, b, _, d in rows:
            cache.put_if_absent(a, b, float(d))
        return cache
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        key = _check_meta(meta, expected, path)
        ids = tuple(str(s) for s in data["city_ids"])
        upper = data["upper"]
    n = len(ids)
    mat = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    mat[iu] = upper
    mat[(iu[1], iu[0])] = upper
    return DistanceCache(key, ids, mat)
