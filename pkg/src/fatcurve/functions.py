"""The functions G, H and F on the arc.

``G_n(p)`` is the integral of ``y dx`` along J_n from A to p. It is
evaluated either from a materialised polyline (prefix sums) or, for
anchors, by descending the address and adding whole sub-arcs whose
integrals depend only on depth, remaining refinement and orientation.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .arc import (
    DIGIT_FRAMES,
    ROOT,
    THREES,
    ZEROS,
    CantorPoint,
    DomainError,
    PolylineCurve,
    SquareNode,
    alpha,
    area_En,
    frame_det,
    locate,
    side,
    template_anchors,
)

DEFAULT_DEPTH = 12


@dataclass(frozen=True)
class CertifiedValue:
    value: Fraction
    error_bound: Fraction
    depth_used: int

    def contains(self, x) -> bool:
        return abs(Fraction(x) - self.value) <= self.error_bound

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class Jet1:
    f: Fraction
    fx: Fraction
    fy: Fraction
    at: tuple[Fraction, Fraction]


@dataclass(frozen=True)
class ConnectorPoint:
    """Point on the straight piece [B_{w i}, A_{w (i+1)}] of the arc.

    ``address`` is ``w + (i,)`` with ``i`` in 0..2 and ``t`` in [0, 1] is the
    position from B towards A.
    """

    address: tuple[int, ...]
    t: Fraction = Fraction(1, 2)

    def __post_init__(self):
        object.__setattr__(self, "address", tuple(self.address))
        object.__setattr__(self, "t", Fraction(self.t))
        if not self.address or self.address[-1] not in (0, 1, 2):
            raise DomainError(f"connector address must end in 0, 1 or 2: {self.address}")
        if not 0 <= self.t <= 1:
            raise DomainError(f"connector parameter outside [0, 1]: {self.t}")

    @property
    def start(self) -> CantorPoint:
        return CantorPoint(self.address, THREES)

    @property
    def end(self) -> CantorPoint:
        return CantorPoint(self.address[:-1] + (self.address[-1] + 1,), ZEROS)

    def coords(self) -> tuple[Fraction, Fraction]:
        b = locate(self.address).exit
        a = locate(self.end.address).entry
        return (b[0] + self.t * (a[0] - b[0]), b[1] + self.t * (a[1] - b[1]))


# ---------------------------------------------------------------------------
# G via address descent


@lru_cache(maxsize=None)
def local_integral(depth: int, remaining: int, orientation: int) -> Fraction:
    """Integral of u2 du1 along the local curve of a depth-``depth`` square.

    ``remaining`` is the number of further refinements, ``orientation`` the
    determinant of the square's frame (it decides which side the curve hugs).
    """
    if remaining == 0:
        return Fraction(0) if orientation > 0 else Fraction(1)
    a = alpha(depth + 1)
    s = (1 - a) / 2
    anchors = template_anchors(a)
    total = (1 - s) * a  # the horizontal connector [B1, A2]
    for j, frame in enumerate(DIGIT_FRAMES):
        det = frame_det(frame)
        total += anchors[j][0][1] * s * frame[0]
        total += s * s * det * local_integral(depth + 1, remaining - 1, orientation * det)
    return total


def node_integral(node: SquareNode, n: int) -> Fraction:
    """Integral of y dx along the part of J_n inside ``node``, from A to B."""
    det = frame_det(node.frame)
    l = node.side
    return node.corner[1] * l * node.frame[0] + l * l * det * local_integral(
        node.depth, n - node.depth, det
    )


def _segment_integral(p, q) -> Fraction:
    # axis-parallel pieces only: vertical pieces contribute nothing
    return p[1] * (q[0] - p[0])


def G_n_entry(address, n: int) -> Fraction:
    """G_n at the entry anchor A_w, ``len(w) <= n``."""
    address = tuple(address)
    if len(address) > n:
        raise DomainError(f"A_{address} is not a vertex of J_{n}")
    total = Fraction(0)
    node = ROOT
    for digit in address:
        a = alpha(node.depth + 1)
        anchors = template_anchors(a)
        for j in range(digit):
            total += node_integral(node.child(j), n)
            b = node.local_to_global(anchors[j][1])
            nxt = node.local_to_global(anchors[j + 1][0])
            total += _segment_integral(b, nxt)
        node = node.child(digit)
    return total


def G_n_anchor(point: CantorPoint, n: int) -> Fraction:
    """G_n at a resolved anchor whose address has length <= n."""
    if not point.resolved:
        raise DomainError(f"{point} has no exact coordinates")
    if len(point.address) > n:
        raise DomainError(f"{point} is not a vertex of J_{n}")
    value = G_n_entry(point.address, n)
    if point.tail == THREES:
        value += node_integral(locate(point.address), n)
    return value


def approximant(point: CantorPoint, n: int) -> CantorPoint:
    """The depth-n anchor standing in for a deeper point."""
    if len(point.address) <= n:
        return point
    return CantorPoint(point.address[:n], point.tail)


# ---------------------------------------------------------------------------
# G via a materialised polyline


class CurveFunction:
    """Exact G_n on a polyline J_n via prefix sums of y dx."""

    def __init__(self, curve: PolylineCurve):
        self.curve = curve
        self.prefix = curve.line_integral_prefix()
        self._verts = curve.vertices

    def at_vertex(self, i: int) -> Fraction:
        return Fraction(int(self.prefix[i]), self.curve.denom**2)

    def locate_point(self, p) -> tuple[int, Fraction]:
        """Index of the segment holding p and the fractional position on it."""
        D = self.curve.denom
        x, y = Fraction(p[0]) * D, Fraction(p[1]) * D
        v = self._verts
        x0, y0, x1, y1 = v[:-1, 0], v[:-1, 1], v[1:, 0], v[1:, 1]
        fx, fy = float(x), float(y)
        near = np.nonzero(
            (np.minimum(x0, x1) - 1 <= fx)
            & (fx <= np.maximum(x0, x1) + 1)
            & (np.minimum(y0, y1) - 1 <= fy)
            & (fy <= np.maximum(y0, y1) + 1)
        )[0]
        for i in near:
            a0, b0, a1, b1 = (int(t) for t in (x0[i], y0[i], x1[i], y1[i]))
            if a0 == a1 == x and min(b0, b1) <= y <= max(b0, b1):
                return int(i), (y - b0) / (b1 - b0)
            if b0 == b1 == y and min(a0, a1) <= x <= max(a0, a1):
                return int(i), (x - a0) / (a1 - a0)
        raise DomainError(f"point {p} is not on J_n")

    def at(self, p) -> Fraction:
        i, t = self.locate_point(p)
        D = self.curve.denom
        x0, y0 = (int(c) for c in self._verts[i])
        x1 = int(self._verts[i + 1][0])
        start = Fraction(int(self.prefix[i]), D * D)
        return start + Fraction(y0, D) * t * Fraction(x1 - x0, D)


def G_n_at(curve_fn: CurveFunction, p) -> Fraction:
    return curve_fn.at(p)


# ---------------------------------------------------------------------------
# certified values


def g_error_bound(n: int) -> Fraction:
    """Certificate 3 l_n + (Area(E_n) - 1/4) for depth-n values of G."""
    return 3 * side(n) + (area_En(n) - Fraction(1, 4))


def anchor_tail(n: int) -> Fraction:
    """G(p) - G_n(p) divided by H(p) for anchors shallower than n."""
    if n < 1:
        raise DomainError("tail identity needs n >= 1")
    return (area_En(n) - Fraction(1, 4)) / 2


def _resolve(p):
    if isinstance(p, (CantorPoint, ConnectorPoint)):
        return p
    raise DomainError(f"cannot evaluate at {p!r}; pass a CantorPoint or ConnectorPoint")


def G_at(p, n: int = DEFAULT_DEPTH) -> CertifiedValue:
    p = _resolve(p)
    if isinstance(p, ConnectorPoint):
        if len(p.address) > n:
            raise DomainError(f"connector {p.address} is not part of J_{n}")
        b = p.coords()
        start = locate(p.address).exit
        value = G_n_anchor(p.start, n) + _segment_integral(start, b)
        return CertifiedValue(value, g_error_bound(n), n)
    if not p.resolved:
        raise DomainError(f"{p} is an unresolved point; only anchors have exact values")
    value = G_n_anchor(approximant(p, n), n)
    return CertifiedValue(value, g_error_bound(n), n)


def G_limit(p: CantorPoint) -> Fraction:
    """Exact limit value of G at an anchor."""
    if not p.resolved:
        raise DomainError(f"{p} is unresolved")
    p = p.canonical()
    n = len(p.address) + 1
    return G_n_anchor(p, n) + H_at(p) * anchor_tail(n)


def H_at(p) -> Fraction:
    p = _resolve(p)
    if isinstance(p, ConnectorPoint):
        return H_at(p.start)
    total = Fraction(0)
    for k, d in enumerate(p.address, start=1):
        total += Fraction(d, 4**k)
    if p.tail == THREES:
        total += Fraction(1, 4 ** len(p.address))
    elif p.tail is None:
        raise DomainError(f"{p} is unresolved; H is only pinned to within 4^-{len(p.address)}")
    return total


def constant_C(n: int = DEFAULT_DEPTH) -> CertifiedValue:
    """C = -G(B), so that F = G + C H vanishes at both endpoints."""
    gb = G_n_anchor(CantorPoint((), THREES), n)
    return CertifiedValue(-gb, anchor_tail(n) if n >= 1 else Fraction(1), n)


def F_at(p, n: int = DEFAULT_DEPTH) -> CertifiedValue:
    """F = G + C H evaluated at depth n with C taken at the same depth.

    Shifting from depth n to the limit moves G at every anchor shallower
    than n by H times a depth-only constant, so for those points the depth-n
    combination is already exact.
    """
    p = _resolve(p)
    g = G_at(p, n)
    h = H_at(p)
    c = constant_C(n)
    value = g.value + c.value * h
    anchor = p if isinstance(p, CantorPoint) else p.start
    depth = len(anchor.canonical().address)
    if depth < n:
        err = Fraction(0)
    else:
        err = g.error_bound + c.error_bound
    return CertifiedValue(value, err, n)


def coords(p) -> tuple[Fraction, Fraction]:
    if isinstance(p, ConnectorPoint):
        return p.coords()
    node = locate(p.address)
    if p.tail == ZEROS:
        return node.entry
    if p.tail == THREES:
        return node.exit
    raise DomainError(f"{p} is unresolved")


def jet_at(p, n: int = DEFAULT_DEPTH) -> Jet1:
    xy = coords(p)
    return Jet1(F_at(p, n).value, xy[1], Fraction(0), xy)


# ---------------------------------------------------------------------------
# CSV


def _decimal(v: Fraction, digits: int) -> str:
    v = Fraction(v)
    sign = "-" if v < 0 else ""
    v = abs(v)
    scaled = (v.numerator * 10**digits * 2 + v.denominator) // (2 * v.denominator)
    whole, frac = divmod(scaled, 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}" if digits else f"{sign}{whole}"


def csv_rows(points, n: int = DEFAULT_DEPTH, digits: int = 12) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["address", "x", "y", "G", "H", "F", "error_bound"])
    for p in points:
        x, y = coords(p)
        g = G_at(p, n)
        f = F_at(p, n)
        label = str(p) if isinstance(p, CantorPoint) else f"S{''.join(map(str, p.address))}@{p.t}"
        w.writerow(
            [label]
            + [_decimal(v, digits) for v in (x, y, g.value, H_at(p), f.value, g.error_bound)]
        )
    return buf.getvalue()
