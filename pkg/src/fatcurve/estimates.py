"""Brute-force checks of the quantitative estimates on the arc."""

from __future__ import annotations

import json
import math
import random
import time
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .arc import (
    THREES,
    ZEROS,
    CantorPoint,
    DomainError,
    PolylineCurve,
    build_J,
    build_tree,
    common_depth,
    fraction_str,
    index_address,
    leaf_anchor_indices,
    locate,
    separation_formula,
    side,
)
from .functions import CurveFunction, G_n_anchor, H_at, approximant

LEMMA_MIN_DEPTH = 6
DEFAULT_SEED = 20240601


class HypothesisError(ValueError):
    pass


@dataclass
class VerificationReport:
    check: str
    params: dict
    seed: int | None
    count: int
    violations: int
    witness: dict | None = None
    M_table: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    runtime: float = 0.0
    normative: bool = True

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_dict(self, with_runtime: bool = True) -> dict:
        d = asdict(self)
        if not with_runtime:
            d.pop("runtime")
        return d

    def to_json(self, with_runtime: bool = True) -> str:
        return json.dumps(self.to_dict(with_runtime), indent=1, sort_keys=True, default=str)


@dataclass
class ModulusSample:
    p: CantorPoint
    q: CantorPoint
    delta: Fraction
    residual: Fraction
    epsilon: float | None = None


# ---------------------------------------------------------------------------
# Lemma (chord estimate)


def _anchor_table(n: int):
    """Arc-ordered depth-n anchors: integer coords, G_n numerators, labels."""
    tree = build_tree(n)
    curve = build_J(tree)
    prefix = curve.line_integral_prefix()
    start, end = leaf_anchor_indices(curve)
    idx = np.empty(2 * len(start), np.int64)
    idx[0::2] = start
    idx[1::2] = end
    return tree, curve, curve.vertices[idx], prefix[idx]


def check_lemma1(
    n: int,
    m: int,
    budget: int | None = None,
    seed: int = DEFAULT_SEED,
    exploratory: bool = False,
) -> VerificationReport:
    """|G_n(q) - G_n(p) - chord integral| < Area(Q_w) for anchors in depth-m squares.

    Pairs are all depth-n anchors inside a common depth-m square. With a
    ``budget`` (pair count) smaller than the exhaustive total, a seeded
    random subset of squares is checked instead.
    """
    if not m < n:
        raise DomainError(f"need m < n, got m={m}, n={n}")
    if m < LEMMA_MIN_DEPTH and not exploratory:
        raise HypothesisError(f"the estimate is only claimed for m >= {LEMMA_MIN_DEPTH}")
    t0 = time.perf_counter()
    tree, curve, xy, g = _anchor_table(n)
    D = curve.denom
    per = 2 * 4 ** (n - m)
    squares = 4**m
    per_pairs = per * (per - 1) // 2
    total_pairs = squares * per_pairs
    sampled = budget is not None and total_pairs > budget
    if total_pairs > 50_000_000 and not sampled:
        raise DomainError(f"{total_pairs} pairs is too many for an exhaustive check; pass a budget")
    L = int(side(m) * D)
    bound2 = 2 * L * L  # 2 D^2 Area(Q_w)
    X, Y = xy[:, 0], xy[:, 1]
    worst_ratio = 0.0
    worst = None
    violations = 0
    count = 0
    for sq, i, j in _lemma_pairs(squares, per, budget if sampled else None, seed):
        gi, gj = sq * per + i, sq * per + j
        dX = X[gj] - X[gi]
        dY = Y[gj] - Y[gi]
        resid = 2 * (g[gj] - g[gi]) - 2 * Y[gi] * dX - dX * dY
        a = np.abs(resid)
        violations += int(np.count_nonzero(a >= bound2))
        count += a.size
        k = int(np.argmax(a))
        ratio = float(a[k]) / bound2
        if ratio > worst_ratio:
            worst_ratio = ratio
            worst = (int(sq[k]), int(i[k]), int(j[k]), int(resid[k]))
    witness = None
    if worst is not None:
        sq, i, j, r = worst
        witness = {
            "square": "".join(map(str, index_address(sq, m))),
            "p": _anchor_label(sq, i, n, m),
            "q": _anchor_label(sq, j, n, m),
            "residual": fraction_str(Fraction(r, 2 * D * D)),
            "bound": fraction_str(side(m) ** 2),
        }
    return VerificationReport(
        check="lemma1",
        params={"n": n, "m": m, "budget": budget},
        seed=seed if sampled else None,
        count=count,
        violations=violations,
        witness=witness,
        extra={"max_ratio": worst_ratio, "exhaustive": not sampled},
        runtime=time.perf_counter() - t0,
        normative=m >= LEMMA_MIN_DEPTH,
    )


def _lemma_pairs(squares: int, per: int, budget: int | None, seed: int, chunk: int = 1 << 20):
    """Yield (square, i, j) index arrays with i < j, all pairs or a seeded sample."""
    if budget is None:
        iu, ju = np.triu_indices(per, k=1)
        step = max(1, chunk // len(iu))
        for s0 in range(0, squares, step):
            sq = np.arange(s0, min(squares, s0 + step))
            yield np.repeat(sq, len(iu)), np.tile(iu, len(sq)), np.tile(ju, len(sq))
        return
    rng = np.random.default_rng(seed)
    left = budget
    while left > 0:
        k = min(chunk, left)
        sq = rng.integers(0, squares, k)
        a = rng.integers(0, per, k)
        b = rng.integers(0, per - 1, k)
        b = b + (b >= a)
        yield sq, np.minimum(a, b), np.maximum(a, b)
        left -= k


def _anchor_label(square: int, local: int, n: int, m: int) -> str:
    leaf = square * 4 ** (n - m) + local // 2
    return str(CantorPoint(index_address(leaf, n), ZEROS if local % 2 == 0 else THREES))


def lemma_residual(p: CantorPoint, q: CantorPoint, n: int) -> Fraction:
    """Exact left side of the chord estimate for two anchors, via descent."""
    (px, py), (qx, qy) = _xy(p), _xy(q)
    dx, dy = qx - px, qy - py
    chord = py * dx + dx * dy / 2
    return G_n_anchor(q, n) - G_n_anchor(p, n) - chord


def _xy(p: CantorPoint):
    node = locate(p.address)
    return node.entry if p.tail == ZEROS else node.exit


# ---------------------------------------------------------------------------
# separation


def _digits(idx: np.ndarray, depth: int) -> np.ndarray:
    out = np.empty((len(idx), depth), np.int64)
    v = idx.copy()
    for k in range(depth - 1, -1, -1):
        out[:, k] = v % 4
        v //= 4
    return out


def check_separation(
    depth: int = 10, pairs: int = 100_000, seed: int = DEFAULT_SEED, tree=None
) -> VerificationReport:
    """Exact distance between random depth-n anchors against the separation formula."""
    t0 = time.perf_counter()
    tree = tree if tree is not None and tree.depth == depth else build_tree(depth)
    D = tree.denom
    rng = np.random.default_rng(seed)
    nleaf = 4**depth
    i = rng.integers(0, nleaf, pairs)
    j = rng.integers(0, nleaf, pairs)
    ti = rng.integers(0, 2, pairs)  # 0 -> entry A, 1 -> exit B
    tj = rng.integers(0, 2, pairs)
    same = (i == j) & (ti == tj)
    i, j, ti, tj = i[~same], j[~same], ti[~same], tj[~same]
    entries, exits = tree.entries(depth), tree.exits(depth)
    P = np.where(ti[:, None] == 0, entries[i], exits[i])
    Q = np.where(tj[:, None] == 0, entries[j], exits[j])
    # infinite addresses: the tail digit repeats forever
    di = np.concatenate([_digits(i, depth), np.where(ti == 0, 0, 3)[:, None]], axis=1)
    dj = np.concatenate([_digits(j, depth), np.where(tj == 0, 0, 3)[:, None]], axis=1)
    differ = di != dj
    m = np.argmax(differ, axis=1)
    dX = (Q[:, 0] - P[:, 0]).astype(object)
    dY = (Q[:, 1] - P[:, 1]).astype(object)
    dist2 = dX * dX + dY * dY
    q = [2 ** (k + 1) * (k + 1) * (k + 2) for k in range(depth + 2)]
    qm = np.array([q[k] for k in m], dtype=object)
    # |p - q| >= 1/q_m  <=>  dist2 * q_m^2 >= D^2
    ok = dist2 * qm * qm >= D * D
    violations = int(np.count_nonzero(~ok.astype(bool)))
    ratio = np.sqrt(dist2.astype(float)) / D * qm.astype(float)
    k = int(np.argmin(ratio))

    def label(idx, tail):
        return str(CantorPoint(index_address(int(idx), depth), ZEROS if tail == 0 else THREES))

    witness = {
        "p": label(i[k], ti[k]),
        "q": label(j[k], tj[k]),
        "m": int(m[k]),
        "distance_over_bound": float(ratio[k]),
    }
    return VerificationReport(
        check="separation",
        params={"depth": depth, "pairs": pairs},
        seed=seed,
        count=len(i),
        violations=violations,
        witness=witness,
        extra={"min_ratio": float(ratio[k])},
        runtime=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Hoelder modulus


def sample_anchor_pairs(depth: int, count: int, seed: int = DEFAULT_SEED):
    """Pairs of anchors split at a uniformly drawn common depth m < depth.

    Addresses are at most ``depth - 1`` digits long so that every point lies
    strictly above the evaluation depth.
    """
    rng = random.Random(seed)
    out = []
    top = depth - 1
    for _ in range(count):
        m = rng.randrange(0, top)
        prefix = tuple(rng.randrange(4) for _ in range(m))
        a, b = rng.sample(range(4), 2)
        pts = []
        for first in (a, b):
            length = rng.randint(m + 1, top)
            tail = tuple(rng.randrange(4) for _ in range(length - m - 1))
            pts.append(CantorPoint(prefix + (first,) + tail, rng.choice((ZEROS, THREES))))
        p, q = pts
        if p.canonical() == q.canonical():
            continue
        out.append((p, q))
    return out


def _mpf(x: Fraction):
    return mpmath.mpf(x.numerator) / x.denominator


def closed_form_ratio(m: int, eps: float):
    """(3/2) l_m^2 over (separation at depth m) ** (2 - eps), in 128-bit floats."""
    with mpmath.workprec(128):
        num = mpmath.mpf(3) / 2 * _mpf(side(m)) ** 2
        return num / _mpf(separation_formula(m)) ** (2 - mpmath.mpf(eps))


def closed_form_sup(eps: float) -> tuple[float, int, int]:
    """Supremum over m of ``closed_form_ratio``; returns (M, argmax, m scanned).

    The ratio is eventually decreasing; the scan runs well past the peak of
    its logarithmic derivative, near 2 (2 - eps) / (eps ln 2).
    """
    stop = int(8 / (eps * math.log(2))) + 64
    best, arg = mpmath.mpf(0), 0
    for m in range(stop + 1):
        r = closed_form_ratio(m, eps)
        if r > best:
            best, arg = r, m
    return float(best), arg, stop


def _fit_slope(logd: np.ndarray, logr: np.ndarray) -> float:
    if len(logd) < 2:
        return float("nan")
    slope, _ = np.polyfit(logd, logr, 1)
    return float(slope)


def _evaluate_pairs(pairs, depth: int):
    cache: dict = {}

    def values(p: CantorPoint):
        key = p.canonical()
        if key not in cache:
            xy = _xy(key)
            cache[key] = (xy, G_n_anchor(approximant(key, depth), depth), H_at(key))
        return cache[key]

    gb = G_n_anchor(CantorPoint((), THREES), depth)
    rows = []
    for p, q in pairs:
        (pxy, gp, hp), (qxy, gq, hq) = values(p), values(q)
        dx, dy = qxy[0] - pxy[0], qxy[1] - pxy[1]
        rows.append(
            {
                "p": p,
                "q": q,
                "m": common_depth(p, q),
                "delta": abs(dx) + abs(dy),
                "G": abs(gq - gp - pxy[1] * dx),
                "H": abs(hq - hp),
                "F": abs((gq - gb * hq) - (gp - gb * hp) - pxy[1] * dx),
            }
        )
    return rows


def check_holder(
    fn: str | list[str] = ("G", "H", "F"),
    epsilons=(0.5, 0.25, 0.1),
    pairs: int = 10_000,
    depth: int = 12,
    seed: int = DEFAULT_SEED,
    slope_slack: float = 0.05,
    samples=None,
) -> VerificationReport:
    """Empirical modulus for the jets (y, 0) of G and F and (0, 0) of H.

    For each function and epsilon: the least M with residual <= M delta^(2-eps)
    over the sample, the log-log regression slope of residual against delta,
    and the closed-form supremum built from the separation and chord bounds.
    Violations count H pairs breaking |dH| <= 4^-m, slopes below
    2 - eps - slack, and G pairs (m >= 6) above (3/2) l_m^2.
    """
    fns = [fn] if isinstance(fn, str) else list(fn)
    for f in fns:
        if f not in ("G", "H", "F"):
            raise DomainError(f"unknown function {f!r}")
    t0 = time.perf_counter()
    pair_list = samples if samples is not None else sample_anchor_pairs(depth, pairs, seed)
    if not pair_list:
        raise DomainError("empty sample")
    rows = _evaluate_pairs(pair_list, depth)
    violations = 0
    h_violations = 0
    g_chord_violations = 0
    for r in rows:
        if r["H"] > Fraction(1, 4 ** r["m"]):
            h_violations += 1
        if r["m"] >= LEMMA_MIN_DEPTH and r["G"] > Fraction(3, 2) * side(r["m"]) ** 2:
            g_chord_violations += 1
    violations += h_violations + g_chord_violations

    table: dict = {}
    slopes: dict = {}
    witness = None
    with mpmath.workprec(128):
        delta = [_mpf(r["delta"]) for r in rows]
        logd_all = np.array([float(mpmath.log(d)) for d in delta])
        for f in fns:
            res = [_mpf(r[f]) for r in rows]
            pos = np.array([r[f] > 0 for r in rows])
            logr = np.array([float(mpmath.log(x)) if x > 0 else -np.inf for x in res])
            slope = _fit_slope(logd_all[pos], logr[pos])
            slopes[f] = {"slope": slope, "points": int(pos.sum()), "zero_residuals": int((~pos).sum())}
            table[f] = {}
            for eps in epsilons:
                e = mpmath.mpf(eps)
                ratios = [x / d ** (2 - e) for x, d in zip(res, delta)]
                k = max(range(len(ratios)), key=lambda i: ratios[i])
                M = float(ratios[k])
                closed, m_peak, m_scan = closed_form_sup(eps)
                ok_slope = slope >= 2 - eps - slope_slack
                if not ok_slope:
                    violations += 1
                table[f][str(eps)] = {
                    "M": M,
                    "finite": math.isfinite(M),
                    "slope_ok": ok_slope,
                    "witness": [str(rows[k]["p"]), str(rows[k]["q"])],
                }
                if f == "G":
                    table[f][str(eps)].update(
                        {
                            "M_closed_form": closed,
                            "closed_form_peak_m": m_peak,
                            "closed_form_scanned_to": m_scan,
                            "m6_suffices_to_30": all(
                                closed_form_ratio(m, eps) <= closed_form_ratio(6, eps)
                                for m in range(6, 31)
                            ),
                        }
                    )
    if h_violations or g_chord_violations:
        bad = next(
            r
            for r in rows
            if r["H"] > Fraction(1, 4 ** r["m"])
            or (r["m"] >= LEMMA_MIN_DEPTH and r["G"] > Fraction(3, 2) * side(r["m"]) ** 2)
        )
        witness = {"p": str(bad["p"]), "q": str(bad["q"]), "m": bad["m"]}
    return VerificationReport(
        check="holder",
        params={"fn": fns, "epsilons": list(epsilons), "pairs": len(rows), "depth": depth},
        seed=seed,
        count=len(rows),
        violations=violations,
        witness=witness,
        M_table=table,
        extra={
            "slopes": slopes,
            "h_bound_violations": h_violations,
            "g_chord_violations": g_chord_violations,
        },
        runtime=time.perf_counter() - t0,
    )


def modulus_samples(rows_or_pairs, fn: str, depth: int = 12) -> list[ModulusSample]:
    rows = _evaluate_pairs(rows_or_pairs, depth)
    return [ModulusSample(r["p"], r["q"], r["delta"], r[fn]) for r in rows]


def samples_csv(samples: list[ModulusSample]) -> str:
    lines = ["p,q,delta,residual"]
    for s in samples:
        lines.append(f"{s.p},{s.q},{float(s.delta)!r},{float(s.residual)!r}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Green's theorem on J_n


def shoelace(points) -> Fraction:
    """Signed area of a closed polygon, counter-clockwise positive."""
    total = Fraction(0)
    k = len(points)
    for i in range(k):
        x0, y0 = points[i]
        x1, y1 = points[(i + 1) % k]
        total += x0 * y1 - x1 * y0
    return total / 2


@dataclass(frozen=True)
class CurvePoint:
    """A point on a polyline: segment index plus position in [0, 1)."""

    segment: int
    t: Fraction

    def coords(self, curve: PolylineCurve):
        D = curve.denom
        (x0, y0), (x1, y1) = curve.vertices[self.segment], curve.vertices[self.segment + 1]
        return (
            Fraction(int(x0), D) + self.t * Fraction(int(x1 - x0), D),
            Fraction(int(y0), D) + self.t * Fraction(int(y1 - y0), D),
        )


def green_sides(curve: PolylineCurve, fn: CurveFunction, p: CurvePoint, q: CurvePoint):
    """(G_n(q) - G_n(p) - chord integral, -shoelace of the closed loop).

    The loop runs along J_n from p to q and back along the chord; the two
    sides agree by Green's theorem.
    """
    if (q.segment, q.t) <= (p.segment, p.t):
        raise DomainError("q must follow p along the curve")
    pp, qq = p.coords(curve), q.coords(curve)
    D = curve.denom
    gp = fn.at_vertex(p.segment) + Fraction(int(curve.vertices[p.segment][1]), D) * (pp[0] - Fraction(int(curve.vertices[p.segment][0]), D))
    gq = fn.at_vertex(q.segment) + Fraction(int(curve.vertices[q.segment][1]), D) * (qq[0] - Fraction(int(curve.vertices[q.segment][0]), D))
    dx, dy = qq[0] - pp[0], qq[1] - pp[1]
    lhs = gq - gp - (pp[1] * dx + dx * dy / 2)
    loop = [pp] + [
        (Fraction(int(x), D), Fraction(int(y), D))
        for x, y in curve.vertices[p.segment + 1 : q.segment + 1]
    ] + [qq]
    return lhs, -shoelace(loop)


def chord_is_admissible(curve: PolylineCurve, p: CurvePoint, q: CurvePoint) -> bool:
    """True when the open chord (p, q) misses J_n and is not along it."""
    pp, qq = p.coords(curve), q.coords(curve)
    if pp == qq:
        return False
    D = curve.denom
    v = curve.vertices
    lo_x, hi_x = sorted((pp[0] * D, qq[0] * D))
    lo_y, hi_y = sorted((pp[1] * D, qq[1] * D))
    x0, y0, x1, y1 = v[:-1, 0], v[:-1, 1], v[1:, 0], v[1:, 1]
    cand = np.nonzero(
        (np.maximum(x0, x1) >= float(lo_x) - 1)
        & (np.minimum(x0, x1) <= float(hi_x) + 1)
        & (np.maximum(y0, y1) >= float(lo_y) - 1)
        & (np.minimum(y0, y1) <= float(hi_y) + 1)
    )[0]
    for i in cand:
        a = (Fraction(int(v[i][0]), D), Fraction(int(v[i][1]), D))
        b = (Fraction(int(v[i + 1][0]), D), Fraction(int(v[i + 1][1]), D))
        for pt in _segment_intersections(pp, qq, a, b):
            if pt != pp and pt != qq:
                return False
    return True


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segment_intersections(p, q, a, b):
    """Intersection points of segments [p, q] and [a, b]; overlaps yield a midpoint too."""
    d1, d2 = _cross(p, q, a), _cross(p, q, b)
    d3, d4 = _cross(a, b, p), _cross(a, b, q)
    if d1 == 0 and d2 == 0:
        # collinear: report the overlap's endpoints and midpoint
        def on(pt, s, e):
            return min(s[0], e[0]) <= pt[0] <= max(s[0], e[0]) and min(s[1], e[1]) <= pt[1] <= max(s[1], e[1])

        pts = [pt for pt in (a, b) if on(pt, p, q)] + [pt for pt in (p, q) if on(pt, a, b)]
        if len(pts) >= 2:
            lo, hi = min(pts), max(pts)
            return [lo, hi, ((lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2)]
        return pts
    if (d1 > 0) == (d2 > 0) and d1 != 0 and d2 != 0:
        return []
    if (d3 > 0) == (d4 > 0) and d3 != 0 and d4 != 0:
        return []
    t = d3 / (d3 - d4)
    return [(p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1]))]


def sample_admissible_chords(curve: PolylineCurve, count: int, seed: int = DEFAULT_SEED, window: int = 12):
    """Seeded admissible chords between nearby points of the curve."""
    rng = random.Random(seed)
    nseg = len(curve) - 1
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > 200 * count:
            raise RuntimeError("could not find enough admissible chords")
        s = rng.randrange(nseg)
        p = CurvePoint(s, Fraction(rng.randrange(4), 4))
        s2 = min(nseg - 1, s + rng.randint(1, window))
        q = CurvePoint(s2, Fraction(rng.randrange(4), 4))
        if (q.segment, q.t) <= (p.segment, p.t):
            continue
        if chord_is_admissible(curve, p, q):
            out.append((p, q))
    return out
