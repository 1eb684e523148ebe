"""Regression tools relating diversity scores to citation scores.

The central piece is :func:`fit_piecewise`, a two-segment continuous linear
model whose breakpoint is chosen by exhaustive search over observed ``x``
values. For every candidate the least-squares problem on the basis
``{1, x, max(x - c, 0)}`` is solved from prefix/suffix sums, so the whole
search costs ``O(n log n)``.
"""
from __future__ import annotations

import math
import warnings
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
from scipy import stats as sps

from .errors import InsufficientDataError, ValidationError

MIN_FIT_N = 10


class DegenerateRegressorWarning(UserWarning):
    pass


@dataclass(frozen=True)
class BinnedSeries:
    edges: np.ndarray
    means: np.ndarray
    counts: np.ndarray
    n_rejected: int = 0

    def rows(self):
        for lo, hi, m, n in zip(self.edges[:-1], self.edges[1:], self.means, self.counts):
            yield float(lo), float(hi), float(m), int(n)


@dataclass(frozen=True)
class LinearFit:
    b: float
    a: float
    p: float
    n: int
    se: float = math.nan
    t: float = math.nan


@dataclass(frozen=True)
class PiecewiseFit:
    x_star: float
    a1: float
    b1: float
    b2: float
    rss: float
    p1: float
    p2: float
    n: int
    p1_two_sided: float = math.nan
    p2_two_sided: float = math.nan
    se1: float = math.nan
    se2: float = math.nan

    @property
    def a2(self) -> float:
        return self.a1 + (self.b1 - self.b2) * self.x_star

    def predict(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x <= self.x_star, self.a1 + self.b1 * x, self.a2 + self.b2 * x)

    @property
    def significant_peak(self) -> bool:
        return self.p1 < 0.05 and self.p2 < 0.05


@dataclass(frozen=True)
class Stratum:
    lo: float
    hi: float
    n: int
    fit: PiecewiseFit | None
    note: str = ""


def _finite_xy(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"x and y must be 1-D of equal length, got {x.shape} and {y.shape}")
    keep = np.isfinite(x) & np.isfinite(y)
    return x[keep], y[keep], int((~keep).sum())


def bin_series(x, y, width=1.0, origin=0.0) -> BinnedSeries:
    """Mean of ``y`` in half-open bins ``[origin + k*width, origin + (k+1)*width)``.

    Rows with non-finite values are dropped and counted in ``n_rejected``.
    Empty bins inside the covered range have count 0 and mean NaN.
    """
    if not width > 0:
        raise ValidationError("bin width must be positive")
    x, y, rejected = _finite_xy(x, y)
    if x.size == 0:
        raise ValidationError("no finite rows to bin")
    k = np.floor((x - origin) / width).astype(np.int64)
    k0, k1 = int(k.min()), int(k.max())
    idx = k - k0
    nbins = k1 - k0 + 1
    counts = np.bincount(idx, minlength=nbins)
    sums = np.bincount(idx, weights=y, minlength=nbins)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    edges = origin + width * np.arange(k0, k1 + 2, dtype=float)
    return BinnedSeries(edges, means, counts, rejected)


def _t_pvalues(t, df):
    """(upper one-sided, lower one-sided, two-sided) p-values of a t statistic."""
    if math.isnan(t):
        return math.nan, math.nan, math.nan
    upper = float(sps.t.sf(t, df))
    lower = float(sps.t.cdf(t, df))
    two = float(min(1.0, 2.0 * sps.t.sf(abs(t), df)))
    return upper, lower, two


def _safe_t(coef, se):
    if se > 0:
        return coef / se
    if coef == 0:
        return 0.0
    return math.copysign(math.inf, coef)


def fit_linear(x, y) -> LinearFit:
    """Ordinary least squares ``y = a + b x`` with a two-sided slope p-value."""
    x, y, _ = _finite_xy(x, y)
    n = x.size
    if n < 3:
        raise InsufficientDataError(f"need n >= 3 for a linear fit, got {n}")
    xm, ym = x.mean(), y.mean()
    dx, dy = x - xm, y - ym
    sxx = float(dx @ dx)
    if sxx == 0:
        raise InsufficientDataError("x has zero variance")
    b = float(dx @ dy) / sxx
    a = float(ym - b * xm)
    resid = y - (a + b * x)
    s2 = float(resid @ resid) / (n - 2)
    se = math.sqrt(s2 / sxx)
    t = _safe_t(b, se)
    p = _t_pvalues(t, n - 2)[2]
    return LinearFit(b=b, a=a, p=p, n=n, se=se, t=t)


def residualize(y, w) -> np.ndarray:
    """Remove the least-squares linear effect of ``w`` from ``y``.

    With constant ``w`` the result is ``y - mean(y)`` and a
    :class:`DegenerateRegressorWarning` is issued.
    """
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if y.shape != w.shape:
        raise ValidationError("y and w must have equal length")
    dw = w - w.mean()
    dy = y - y.mean()
    sww = float(dw @ dw)
    if sww == 0:
        warnings.warn("regressor has zero variance; only the mean was removed",
                      DegenerateRegressorWarning, stacklevel=2)
        return dy
    return dy - (float(dw @ dy) / sww) * dw


def breakpoint_grid(x) -> np.ndarray:
    """Distinct observed ``x`` values inside the central 90% quantile range."""
    x = np.asarray(x, dtype=float)
    lo, hi = np.quantile(x, [0.05, 0.95])
    u = np.unique(x)
    return u[(u >= lo) & (u <= hi)]


def _candidate_rss(xs, ys, cands):
    """RSS of the hinge model at each candidate breakpoint (NaN if degenerate).

    ``xs`` must be sorted. The intercept is profiled out by centring, leaving a
    2x2 system in (slope, hinge coefficient) per candidate.
    """
    n = xs.size
    xm, ym = xs.mean(), ys.mean()
    x = xs - xm
    y = ys - ym
    c = cands - xm
    sxx = float(x @ x)
    sxy = float(x @ y)
    syy = float(y @ y)
    # suffix sums over x > c
    rx = np.concatenate([np.cumsum(x[::-1])[::-1], [0.0]])
    rxx = np.concatenate([np.cumsum((x * x)[::-1])[::-1], [0.0]])
    ry = np.concatenate([np.cumsum(y[::-1])[::-1], [0.0]])
    rxy = np.concatenate([np.cumsum((x * y)[::-1])[::-1], [0.0]])
    k = np.searchsorted(xs, cands, side="right")
    left_strict = np.searchsorted(xs, cands, side="left")
    m = n - k
    sx_s, sxx_s, sy_s, sxy_s = rx[k], rxx[k], ry[k], rxy[k]
    sh = sx_s - m * c
    shh = sxx_s - 2 * c * sx_s + m * c * c
    sxh = sxx_s - c * sx_s
    syh = sxy_s - c * sy_s
    shh_c = shh - sh * sh / n
    det = sxx * shh_c - sxh * sxh
    ok = (m > 0) & (left_strict > 0) & (det > 1e-12 * sxx * np.maximum(shh_c, 0.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        beta = (shh_c * sxy - sxh * syh) / det
        delta = (sxx * syh - sxh * sxy) / det
        rss = syy - beta * sxy - delta * syh
    return np.where(ok, np.maximum(rss, 0.0), np.nan)


def _hinge_design(x, c):
    return np.column_stack([np.ones_like(x), x, np.maximum(x - c, 0.0)])


def _exact_rss(x, y, c):
    X = _hinge_design(x, c)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 3:
        return math.nan
    r = y - X @ coef
    return float(r @ r)


def _refine_between(xs, ys, lo_idx):
    """Continuous optimum of the breakpoint strictly between neighbouring data.

    For a breakpoint in the open gap ``(xs[k-1], xs[k])`` the two segments are
    fitted independently; when the lines cross inside the gap the crossing is
    the optimum for that gap. Returns ``(c, rss)`` candidates.
    """
    n = xs.size
    out = []
    cx, cy = np.cumsum(xs), np.cumsum(ys)
    cxx, cxy, cyy = np.cumsum(xs * xs), np.cumsum(xs * ys), np.cumsum(ys * ys)

    def seg(i, j):
        # least-squares line on xs[i:j]
        cnt = j - i
        sx = cx[j - 1] - (cx[i - 1] if i else 0.0)
        sy = cy[j - 1] - (cy[i - 1] if i else 0.0)
        sxx = cxx[j - 1] - (cxx[i - 1] if i else 0.0) - sx * sx / cnt
        sxy = cxy[j - 1] - (cxy[i - 1] if i else 0.0) - sx * sy / cnt
        syy = cyy[j - 1] - (cyy[i - 1] if i else 0.0) - sy * sy / cnt
        if sxx <= 1e-14 * max(1.0, abs(cxx[j - 1])):
            return None
        b = sxy / sxx
        return sy / cnt - b * sx / cnt, b, max(syy - b * sxy, 0.0)

    for k in lo_idx:
        if k < 2 or k > n - 2 or xs[k - 1] == xs[k]:
            continue
        left, right = seg(0, k), seg(k, n)
        if left is None or right is None or left[1] == right[1]:
            continue
        c = (right[0] - left[0]) / (left[1] - right[1])
        if xs[k - 1] < c < xs[k]:
            out.append((float(c), left[2] + right[2]))
    return out


def fit_piecewise(x, y, *, refine=False) -> PiecewiseFit:
    """Two-segment continuous linear fit with the breakpoint chosen by minimum RSS.

    Candidates are the distinct ``x`` values between the 5th and 95th
    percentiles; ties in RSS go to the smaller breakpoint. With ``refine`` the
    open gaps between consecutive data points are searched as well, which lets
    a breakpoint that falls between observations be recovered exactly.

    ``p1`` tests ``b1 > 0`` and ``p2`` tests ``b2 < 0`` (one-sided t-tests,
    ``n - 3`` degrees of freedom, breakpoint treated as known).
    """
    x, y, _ = _finite_xy(x, y)
    n = x.size
    if n < MIN_FIT_N:
        raise InsufficientDataError(f"need n >= {MIN_FIT_N} for a piecewise fit, got {n}")
    if np.unique(x).size < 3:
        raise InsufficientDataError("need at least 3 distinct x values")
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    cands = breakpoint_grid(xs)
    rss = _candidate_rss(xs, ys, cands)
    if cands.size == 0 or np.all(np.isnan(rss)):
        raise InsufficientDataError("every breakpoint candidate gives a degenerate design")

    # re-check near-ties with an exact solve; prefix sums lose a few digits
    best = np.nanmin(rss)
    scale = max(best, 1e-300)
    near = np.flatnonzero(rss <= best + 1e-7 * scale + 1e-12 * float(np.var(ys) * n))
    scored = []
    for i in near:
        r = _exact_rss(xs, ys, cands[i])
        if not math.isnan(r):
            scored.append((r, float(cands[i])))
    if refine:
        lo, hi = cands.min(), cands.max()
        gaps = np.flatnonzero((xs[:-1] < xs[1:]) & (xs[:-1] >= lo) & (xs[1:] <= hi)) + 1
        scored.extend((r, c) for c, r in _refine_between(xs, ys, gaps) if lo <= c <= hi)
    if not scored:
        raise InsufficientDataError("every breakpoint candidate gives a degenerate design")
    min_rss = min(r for r, _ in scored)
    tol = 1e-12 * max(min_rss, 1e-300)
    x_star = min(c for r, c in scored if r <= min_rss + tol)
    return _piecewise_stats(xs, ys, x_star)


def _piecewise_stats(x, y, c) -> PiecewiseFit:
    n = x.size
    X = _hinge_design(x, c)
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < 3:
        raise InsufficientDataError(f"degenerate design at breakpoint {c}")
    resid = y - X @ coef
    rss = float(resid @ resid)
    df = n - 3
    s2 = rss / df if df > 0 else math.nan
    cov = s2 * np.linalg.inv(X.T @ X)
    a1, b1, delta = (float(v) for v in coef)
    b2 = b1 + delta
    se1 = math.sqrt(max(cov[1, 1], 0.0))
    se2 = math.sqrt(max(cov[1, 1] + cov[2, 2] + 2 * cov[1, 2], 0.0))
    p1, _, p1_two = _t_pvalues(_safe_t(b1, se1), df)
    _, p2, p2_two = _t_pvalues(_safe_t(b2, se2), df)
    return PiecewiseFit(
        x_star=float(c), a1=a1, b1=b1, b2=b2, rss=rss, p1=p1, p2=p2, n=n,
        p1_two_sided=p1_two, p2_two_sided=p2_two, se1=se1, se2=se2,
    )


def stratified_piecewise(x, y, w, bounds: Sequence[float]) -> list[Stratum]:
    """Piecewise fits within each ``(lo, hi]`` slice of ``w``."""
    bounds = [float(b) for b in bounds]
    if len(bounds) < 2:
        raise ValidationError("need at least two stratum bounds")
    if any(b >= c for b, c in zip(bounds, bounds[1:])):
        raise ValidationError("stratum bounds must be strictly increasing")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.asarray(w, float)
    out = []
    for lo, hi in zip(bounds, bounds[1:]):
        sel = (w > lo) & (w <= hi) & np.isfinite(x) & np.isfinite(y)
        n = int(sel.sum())
        if n < MIN_FIT_N:
            out.append(Stratum(lo, hi, n, None, "insufficient data"))
            continue
        try:
            out.append(Stratum(lo, hi, n, fit_piecewise(x[sel], y[sel])))
        except InsufficientDataError as exc:
            out.append(Stratum(lo, hi, n, None, f"insufficient data: {exc}"))
    return out


def top_routes(country_sets: Iterable[Iterable[str]], k=5, arity=2) -> list[tuple[tuple[str, ...], int]]:
    """Most frequent unordered country pairs (``arity=2``) or triples (``arity=3``).

    Each element of ``country_sets`` is one paper's coauthor countries; a paper
    adds one count to every combination of its distinct countries.
    """
    if arity not in (2, 3):
        raise ValidationError("arity must be 2 or 3")
    counter: Counter = Counter()
    for countries in country_sets:
        counter.update(combinations(sorted(set(countries)), arity))
    ranked = sorted(counter.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:k]


@dataclass(frozen=True)
class NorthSouthShare:
    nn: int
    ns: int
    ss: int

    @property
    def total(self) -> int:
        return self.nn + self.ns + self.ss

    def fractions(self) -> tuple[Fraction, Fraction, Fraction]:
        if self.total == 0:
            raise ValidationError("no coauthor pairs")
        t = self.total
        return Fraction(self.nn, t), Fraction(self.ns, t), Fraction(self.ss, t)

    @property
    def nn_share(self) -> float:
        return float(self.fractions()[0])


def north_south_share(coauthor_countries: Iterable[Sequence[str]], classifier: Mapping[str, str]) -> NorthSouthShare:
    """Count coauthor pairs by north/south class of their two countries.

    ``coauthor_countries`` holds one country per coauthor for each paper, so a
    paper with ``n`` authors contributes ``n*(n-1)/2`` pairs.
    """
    papers = [list(p) for p in coauthor_countries]
    unknown = sorted({c for p in papers for c in p if classifier.get(c) not in ("north", "south")})
    if unknown:
        raise ValidationError(f"countries without north/south class: {', '.join(unknown)}")
    nn = ns = ss = 0
    for p in papers:
        kn = sum(1 for c in p if classifier[c] == "north")
        ks = len(p) - kn
        nn += kn * (kn - 1) // 2
        ss += ks * (ks - 1) // 2
        ns += kn * ks
    return NorthSouthShare(nn, ns, ss)


@dataclass(frozen=True)
class NormalizedDifference:
    diff: np.ndarray
    mean_arc_below: float
    mean_arc_above: float
    n_below: int
    n_above: int
    degenerate: bool = False


def normalized_distance_difference(network, euclid, arc) -> NormalizedDifference:
    """Standardised (network - great-circle) difference after min-max scaling each.

    Reports the mean ARC where the difference is below and above zero. When the
    two scaled distances coincide the difference is identically zero and the
    result is flagged ``degenerate``.
    """
    network = np.asarray(network, float)
    euclid = np.asarray(euclid, float)
    arc = np.asarray(arc, float)
    if not (network.shape == euclid.shape == arc.shape):
        raise ValidationError("inputs must have equal length")

    def unit(v, name):
        span = v.max() - v.min()
        if not span > 0:
            raise ValidationError(f"{name} distance has zero range")
        return (v - v.min()) / span

    d = unit(network, "network") - unit(euclid, "euclidean")
    sd = d.std()
    if sd == 0:
        return NormalizedDifference(np.zeros_like(d), math.nan, math.nan, 0, 0, True)
    z = (d - d.mean()) / sd
    below, above = z < 0, z > 0
    return NormalizedDifference(
        diff=z,
        mean_arc_below=float(arc[below].mean()) if below.any() else math.nan,
        mean_arc_above=float(arc[above].mean()) if above.any() else math.nan,
        n_below=int(below.sum()),
        n_above=int(above.sum()),
    )
