"""Command line entry point: ``geodiverse <command> DATA_DIR [options]``.

Commands
--------
synth        write a synthetic corpus into DATA_DIR
build-cache  compute (or reuse) the city-pair distance cache
analyze      write every result table and chart to ``--out``
sweep        repeat the analysis for several lambda values

Exit codes are 0 on success, 2 for invalid input, 3 when the distance cache
is missing or stale and 4 for anything unexpected.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__
from .config import load_config
from .errors import CacheError, InsufficientDataError, ValidationError
from .ingest import FILES, load_bundle, save_bundle
from .pipeline import cache_dir, ensure_cache, prepare, analyze, PIECEWISE_HEADER
from .report import write_csv, write_manifest, write_report
from .synth import WorldSpec, generate_world, load_world_spec

log = logging.getLogger("geodiverse")

EXIT_OK, EXIT_INVALID, EXIT_NO_CACHE, EXIT_INTERNAL = 0, 2, 3, 4
DEFAULT_LAMBDAS = "1/10000,1/5000,1/3500,1/2500"


def _parse_lambdas(text: str) -> list[float]:
    try:
        return [float(Fraction(part.strip())) for part in text.split(",") if part.strip()]
    except (ValueError, ZeroDivisionError):
        raise ValidationError(f"cannot parse lambda list {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="TOML config file (default: DATA_DIR/config.toml if present)")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1, help="worker processes for the distance cache (default: logical cores)")
    p.add_argument("--out", type=Path, help="output directory for reports")
    p.add_argument("--lambda", dest="lam", type=lambda s: float(Fraction(s)), help="effective-length weight")
    p.add_argument("--seed", type=int, help="random seed for synth")
    p.add_argument("--adjust-ranks", choices=("on", "off"), default="on",
                   help="residualize ARC on university rank weight before fitting")
    p.add_argument("--field", help="restrict the analysis to one research field")
    p.add_argument("--city", help="restrict the analysis to papers with a coauthor in this city")
    p.add_argument("--geo-bin-deg", type=float, help="grid cell size for location entropy")
    p.add_argument("--cache-dir", type=Path, help="distance cache directory (default: DATA_DIR/cache)")
    p.add_argument("--timestamp", action="store_true", help="record the run time in manifest.json")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="geodiverse", description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    s.add_argument("data_dir", type=Path)
    s.add_argument("--spec", type=Path, help="TOML file with world spec fields")

    b = sub.add_parser("build-cache", parents=[common], help="compute the distance cache")
    b.add_argument("data_dir", type=Path)

    a = sub.add_parser("analyze", parents=[common], help="fit all models and write the report")
    a.add_argument("data_dir", type=Path)

    w = sub.add_parser("sweep", parents=[common], help="repeat the analysis across lambda values")
    w.add_argument("data_dir", type=Path)
    w.add_argument("--lambdas", default=DEFAULT_LAMBDAS, help=f"comma list, fractions allowed (default {DEFAULT_LAMBDAS})")
    return parser


def _config(args, lam=None):
    path = args.config
    if path is None and (args.data_dir / "config.toml").exists():
        path = args.data_dir / "config.toml"
    return load_config(path, lam=lam if lam is not None else args.lam, geo_bin_deg=args.geo_bin_deg)


def _cache_dir(args) -> Path:
    return cache_dir(args.cache_dir or args.data_dir / "cache")


def _input_hashes(args) -> dict[str, str]:
    names = [name for name, _ in FILES.values()] + ["north_south.csv", "config.toml"]
    out = {}
    for name in names:
        path = args.data_dir / name
        if path.exists():
            out[name] = hashlib.sha256(path.read_bytes()).hexdigest()
    if args.config is not None:
        out[str(args.config)] = hashlib.sha256(args.config.read_bytes()).hexdigest()
    return out


def cmd_synth(args):
    spec = load_world_spec(args.spec) if args.spec else WorldSpec()
    changes = {k: v for k, v in (("seed", args.seed), ("lam", args.lam)) if v is not None}
    spec = spec.replace(**changes)
    bundle = generate_world(spec)
    save_bundle(bundle, args.data_dir)
    print(f"wrote {bundle.summary()} to {args.data_dir}")


def cmd_build_cache(args):
    config = _config(args)
    bundle = load_bundle(args.data_dir, config)
    ctx = prepare(bundle)
    cache, hit = ensure_cache(ctx, _cache_dir(args), workers=args.threads)
    state = "reused" if hit else "built"
    print(f"{state} cache for {len(ctx.city_ids)} cities: {len(cache)} pairs, "
          f"{cache.n_unreachable()} unreachable (lambda={config.lam:g})")


def _analyze_into(args, config, out: Path):
    bundle = load_bundle(args.data_dir, config)
    ctx = prepare(bundle)
    cache, _ = ensure_cache(ctx, _cache_dir(args), args.threads, build=False)
    rep = analyze(ctx, cache, adjust=args.adjust_ranks == "on", field_name=args.field, city=args.city)
    written = write_report(rep, out)
    manifest = write_manifest(out, config=config.to_dict(), inputs=_input_hashes(args),
                              command=["geodiverse"] + args.argv, outputs=written, timestamp=args.timestamp)
    return rep, written + [manifest]


def cmd_analyze(args):
    out = args.out or Path("report")
    rep, written = _analyze_into(args, _config(args), out)
    for note in rep.notes:
        log.warning(note)
    print(f"wrote {len(written)} files to {out}")


def cmd_sweep(args):
    lambdas = _parse_lambdas(args.lambdas)
    if not lambdas:
        raise ValidationError("need at least one lambda")
    out = args.out or Path("sweep")
    variant = "after_adjusting" if args.adjust_ranks == "on" else "before_adjusting"
    rows = []
    for lam in lambdas:
        config = _config(args, lam=lam)
        # sweeping builds missing caches; each lambda has its own cache key
        bundle = load_bundle(args.data_dir, config)
        ensure_cache(prepare(bundle), _cache_dir(args), args.threads)
        sub = out / f"lambda-{lam:.10g}"
        rep, _ = _analyze_into(args, config, sub)
        fit = rep.fits.get(f"piecewise_{variant}")
        if fit is None:
            rows.append((lam, sub.name) + (None,) * (len(PIECEWISE_HEADER) - 1) + (None,))
        else:
            rows.append((lam, sub.name, fit.x_star, fit.b1, fit.p1, fit.b2, fit.p2, fit.n,
                         fit.significant_peak))
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "summary.csv", ("lambda", "report") + PIECEWISE_HEADER[1:] + ("significant_peak",), rows)
    print(f"swept {len(lambdas)} lambda values into {out}")


COMMANDS = {"synth": cmd_synth, "build-cache": cmd_build_cache, "analyze": cmd_analyze, "sweep": cmd_sweep}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_INVALID
    try:
        COMMANDS[args.command](args)
    except CacheError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NO_CACHE
    except (ValidationError, InsufficientDataError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except Exception as exc:  # noqa: BLE001 - last-resort reporting for the exit code contract
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
