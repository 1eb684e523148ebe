"""Slow reference computations used to cross-check the fast implementations.

Everything here works on plain Python lists and floats (plus ``mpmath`` for
the Student-t tail) and shares no numerical code with the main modules.
"""
from __future__ import annotations

import math

import mpmath


def oracle_shortest_path(n_nodes_or_ids, edges, sources, targets):
    """Enumerate every simple path; return ``(cost, path)`` of the best one.

    ``edges`` is a list of ``(u, v, length)`` for an undirected graph. Paths
    are ranked by cost (summed from the source end), then number of legs, then
    the id sequence. No path gives ``(inf, [])``.
    """
    adj = {}
    for u, v, w in edges:
        adj.setdefault(u, []).append((v, w))
        adj.setdefault(v, []).append((u, w))
    targets = set(targets)
    best = None

    def walk(node, cost, path, seen):
        nonlocal best
        if node in targets:
            label = (cost, len(path) - 1, tuple(path))
            if best is None or label < best:
                best = label
        for nxt, w in adj.get(node, ()):
            if nxt not in seen:
                seen.add(nxt)
                path.append(nxt)
                walk(nxt, cost + w, path, seen)
                path.pop()
                seen.discard(nxt)

    for s in sorted(set(sources)):
        walk(s, 0.0, [s], {s})
    if best is None:
        return math.inf, []
    return best[0], list(best[2])


def oracle_entropy(counts, base=math.e):
    total = sum(counts)
    h = 0.0
    for c in counts:
        if c > 0:
            p = c / total
            h -= p * math.log(p)
    return h / math.log(base)


def _student_t_sf(t, df):
    """Upper tail of Student's t via the regularised incomplete beta function."""
    with mpmath.workdps(40):
        t = mpmath.mpf(t)
        x = df / (df + t * t)
        tail = mpmath.betainc(df / 2.0, 0.5, 0, x, regularized=True) / 2
        return float(tail if t >= 0 else 1 - tail)


def oracle_ols(x, y):
    """Closed-form simple regression: ``(slope, intercept, two-sided p)``."""
    n = len(x)
    xm = math.fsum(x) / n
    ym = math.fsum(y) / n
    sxx = math.fsum((a - xm) ** 2 for a in x)
    sxy = math.fsum((a - xm) * (b - ym) for a, b in zip(x, y))
    slope = sxy / sxx
    intercept = ym - slope * xm
    rss = math.fsum((b - intercept - slope * a) ** 2 for a, b in zip(x, y))
    se = math.sqrt(rss / (n - 2) / sxx)
    if se == 0:
        p = 1.0 if slope == 0 else 0.0
    else:
        p = min(1.0, 2 * _student_t_sf(abs(slope / se), n - 2))
    return slope, intercept, p


def oracle_quantile(values, q):
    """Linear-interpolation sample quantile (the common "type 7" rule)."""
    v = sorted(values)
    h = (len(v) - 1) * q
    lo = math.floor(h)
    hi = min(lo + 1, len(v) - 1)
    return v[lo] + (h - lo) * (v[hi] - v[lo])


def _lstsq_rss(columns, y):
    """Residual sum of squares by modified Gram-Schmidt; None if rank deficient."""
    q = []
    for col in columns:
        v = list(col)
        norm0 = math.sqrt(math.fsum(a * a for a in v))
        for u in q:
            dot = math.fsum(a * b for a, b in zip(u, v))
            v = [a - dot * b for a, b in zip(v, u)]
        norm = math.sqrt(math.fsum(a * a for a in v))
        if norm0 == 0 or norm <= 1e-9 * norm0:
            return None
        q.append([a / norm for a in v])
    r = list(y)
    for u in q:
        dot = math.fsum(a * b for a, b in zip(u, r))
        r = [a - dot * b for a, b in zip(r, u)]
    return math.fsum(a * a for a in r)


def oracle_breakpoint(x, y):
    """Exhaustive breakpoint search: ``(x_star, rss)``.

    Tries every distinct ``x`` between the 5th and 95th percentiles, fits the
    hinge basis ``{1, x, max(x - c, 0)}`` from scratch each time and keeps the
    smallest residual sum of squares (earliest candidate on ties).
    """
    lo = oracle_quantile(x, 0.05)
    hi = oracle_quantile(x, 0.95)
    best = None
    for c in sorted(set(x)):
        if not lo <= c <= hi:
            continue
        if not any(a < c for a in x) or not any(a > c for a in x):
            continue
        cols = [[1.0] * len(x), list(x), [max(a - c, 0.0) for a in x]]
        rss = _lstsq_rss(cols, y)
        if rss is None:
            continue
        if best is None or rss < best[1] * (1 - 1e-12):
            best = (c, rss)
    if best is None:
        raise ValueError("no usable breakpoint candidate")
    return best
