"""Writing analysis tables as CSV and binned series as SVG charts."""
from __future__ import annotations

import csv
import io
import json
import math
import os
from datetime import datetime, timezone
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .stats import BinnedSeries


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return ""
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.10g}"
    return str(value)


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    _atomic_write(Path(path), buf.getvalue())


def binned_svg(series: BinnedSeries, xlabel: str, ylabel="mean ARC", width=640, height=400) -> str:
    """Binned means as points over a bar underlay of per-bin counts.

    The chart is drawn straight from ``series``; nothing is recomputed.
    """
    left, right, top, bottom = 60, 60, 20, 50
    pw, ph = width - left - right, height - top - bottom
    lo, hi = float(series.edges[0]), float(series.edges[-1])
    span = hi - lo or 1.0
    counts = series.counts
    cmax = max(int(counts.max()), 1)
    means = series.means[np.isfinite(series.means)]
    ylo, yhi = (float(means.min()), float(means.max())) if means.size else (0.0, 1.0)
    if yhi == ylo:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def sx(v):
        return left + (v - lo) / span * pw

    def sy(v):
        return top + (1 - (v - ylo) / (yhi - ylo)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>',
    ]
    for (blo, bhi, _, n) in series.rows():
        if n == 0:
            continue
        bh = n / cmax * ph
        out.append(f'<rect x="{sx(blo):.2f}" y="{top + ph - bh:.2f}" width="{max(sx(bhi) - sx(blo) - 1, 0.5):.2f}" '
                   f'height="{bh:.2f}" fill="#cfd8e3"/>')
    for (blo, bhi, mean, n) in series.rows():
        if n == 0 or math.isnan(mean):
            continue
        out.append(f'<circle cx="{sx((blo + bhi) / 2):.2f}" cy="{sy(mean):.2f}" r="3" fill="#1f4e79"/>')
    for i in range(5):
        xv = lo + span * i / 4
        yv = ylo + (yhi - ylo) * i / 4
        out.append(f'<text x="{sx(xv):.2f}" y="{top + ph + 15}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{left - 5}" y="{sy(yv) + 4:.2f}" text-anchor="end">{yv:.3g}</text>')
        out.append(f'<text x="{left + pw + 5}" y="{top + ph - ph * i / 4 + 4:.2f}">{round(cmax * i / 4)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="15" y="{top + ph / 2}" transform="rotate(-90 15 {top + ph / 2})" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    out.append(f'<text x="{width - 12}" y="{top + ph / 2}" transform="rotate(90 {width - 12} {top + ph / 2})" '
               f'text-anchor="middle">papers per bin</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_report(report, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, table in sorted(report.tables.items()):
        path = out / f"{name}.csv"
        write_csv(path, table.header, table.rows)
        written.append(path)
    for name, (xlabel, series) in sorted(report.binned.items()):
        path = out / f"{name}.svg"
        _atomic_write(path, binned_svg(series, xlabel))
        written.append(path)
    if report.notes:
        path = out / "notes.txt"
        _atomic_write(path, "\n".join(report.notes) + "\n")
        written.append(path)
    return written


def write_manifest(out_dir, *, config: dict, inputs: dict, command: list[str], outputs, timestamp=True) -> Path:
    manifest = {
        "command": command,
        "config": config,
        "inputs": inputs,
        "outputs": sorted(str(Path(p).relative_to(out_dir)) for p in outputs),
    }
    if timestamp:
        manifest["timestamp"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    path = Path(out_dir) / "manifest.json"
    _atomic_write(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
