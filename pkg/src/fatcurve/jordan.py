"""The closed curve made of four isometric copies of the arc, and its jets.

Copy i is the image of the arc under p -> L_i p + t_i. Pulling y dx back
through that map gives y dx = u2 du1 + d(P_i) for an explicit polynomial
P_i of the arc coordinates u, so the line integral along a copy is the arc's
G plus P_i(u) - P_i(A).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .arc import (
    THREES,
    ZEROS,
    CantorPoint,
    DomainError,
    PolylineCurve,
    area_En,
    build_J,
    build_tree,
    fraction_str,
    index_address,
    leaf_anchor_indices,
)
from .functions import (
    DEFAULT_DEPTH,
    CertifiedValue,
    ConnectorPoint,
    G_at,
    H_at,
    Jet1,
    anchor_tail,
    coords,
)

A_MATRIX = ((0, 1), (-1, 0))


def apply_matrix(m, v):
    return (m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1])


@dataclass(frozen=True)
class CurveCopySpec:
    """Copy ``index`` is p -> linear @ p + translation (column vectors)."""

    index: int
    linear: tuple
    translation: tuple

    def apply(self, p):
        x, y = apply_matrix(self.linear, p)
        return (x + self.translation[0], y + self.translation[1])

    def apply_array(self, v: np.ndarray, unit: int = 1) -> np.ndarray:
        """Map integer coordinates over a common denominator (``unit`` = one)."""
        L = np.array(self.linear, dtype=np.int64)
        return v @ L.T + unit * np.array(self.translation, dtype=np.int64)

    def potential(self, u) -> Fraction:
        """P_i(u) with (L u + t)_y d(L u + t)_x = u2 du1 + dP_i."""
        u1, u2 = Fraction(u[0]), Fraction(u[1])
        return {1: u1, 2: u2 - u1 * u2, 3: Fraction(0), 4: -u1 * u2}[self.index]


# The arc copies act on row vectors, p -> p A: that sends e_x to e_y, which
# is what makes the four pieces chain up into a closed curve.
COPIES = (
    CurveCopySpec(1, ((1, 0), (0, 1)), (0, 1)),
    CurveCopySpec(2, A_MATRIX, (1, 1)),
    CurveCopySpec(3, ((-1, 0), (0, -1)), (1, 0)),
    CurveCopySpec(4, ((0, -1), (1, 0)), (0, 0)),
)

ARC_START = (Fraction(0), Fraction(0))
ARC_END = (Fraction(1), Fraction(0))


class ConstructionError(RuntimeError):
    pass


def copy_spec(i: int) -> CurveCopySpec:
    if i not in (1, 2, 3, 4):
        raise DomainError(f"copy index must be 1..4, got {i}")
    return COPIES[i - 1]


@dataclass
class ClosedCurve:
    depth: int
    curves: list[PolylineCurve]  # transformed J_n, one per copy
    boxes: list[np.ndarray]  # transformed squares (xmin, ymin, xmax, ymax)
    denom: int

    def endpoints(self):
        D = self.denom
        out = []
        for c in self.curves:
            a, b = c.vertices[0], c.vertices[-1]
            out.append(
                (
                    (Fraction(int(a[0]), D), Fraction(int(a[1]), D)),
                    (Fraction(int(b[0]), D), Fraction(int(b[1]), D)),
                )
            )
        return out

    def area(self) -> Fraction:
        D = self.denom
        total = 0
        for b in self.boxes:
            total += int(np.sum((b[:, 2] - b[:, 0]) * (b[:, 3] - b[:, 1])))
        return Fraction(total, D * D)


def build_Etilde(depth: int, tree=None) -> ClosedCurve:
    """Four transformed depth-n approximations, checked to form a closed chain."""
    tree = tree if tree is not None and tree.depth >= depth else build_tree(depth)
    J = build_J(tree, depth)
    D = tree.denom
    boxes = tree.boxes(depth)
    curves, tboxes = [], []
    for c in COPIES:
        curves.append(PolylineCurve(c.apply_array(J.vertices, D), D, J.leaf_start))
        lo = c.apply_array(boxes[:, :2], D)
        hi = c.apply_array(boxes[:, 2:], D)
        tboxes.append(np.concatenate([np.minimum(lo, hi), np.maximum(lo, hi)], axis=1))
    out = ClosedCurve(depth, curves, tboxes, D)
    ends = out.endpoints()
    for i in range(4):
        if ends[i][1] != ends[(i + 1) % 4][0]:
            raise ConstructionError(
                f"copy {i + 1} ends at {ends[i][1]} but copy {(i + 1) % 4 + 1} starts at {ends[(i + 1) % 4][0]}"
            )
    if out.area() != 4 * area_En(depth):
        raise ConstructionError("copies overlap")
    return out


@dataclass
class CopyFunction:
    """F^i = G^i + C_i H on copy i, evaluated through the arc's address."""

    spec: CurveCopySpec
    depth: int = DEFAULT_DEPTH

    def __post_init__(self):
        if H_at(CantorPoint((), THREES)) == H_at(CantorPoint((), ZEROS)):
            raise ConstructionError("transported H has equal endpoint values")
        gb = self.G(CantorPoint((), THREES))
        self._c = CertifiedValue(-gb.value, anchor_tail(self.depth), self.depth)

    def point(self, p):
        return self.spec.apply(coords(p))

    def G(self, p) -> CertifiedValue:
        g = G_at(p, self.depth)
        shift = self.spec.potential(coords(p)) - self.spec.potential(ARC_START)
        return CertifiedValue(g.value + shift, g.error_bound, g.depth_used)

    @property
    def C(self) -> CertifiedValue:
        return self._c

    def F(self, p) -> CertifiedValue:
        g = self.G(p)
        value = g.value + self._c.value * H_at(p)
        anchor = p if isinstance(p, CantorPoint) else p.start
        if len(anchor.canonical().address) < self.depth:
            # the depth shift is H times a constant, and C absorbs it
            err = Fraction(0)
        else:
            err = g.error_bound + self._c.error_bound
        return CertifiedValue(value, err, self.depth)

    def jet(self, p) -> Jet1:
        xy = self.point(p)
        return Jet1(self.F(p).value, xy[1], Fraction(0), xy)


def build_Fi(i: int, depth: int = DEFAULT_DEPTH) -> CopyFunction:
    return CopyFunction(copy_spec(i), depth)


# ---------------------------------------------------------------------------
# jet field


@dataclass
class JetField:
    """Sample of (point, jet) pairs on the closed curve."""

    depth: int
    x: list[Fraction]
    y: list[Fraction]
    f: list[Fraction]
    err: list[Fraction]
    copy: list[int]
    address: list[str]

    def __len__(self) -> int:
        return len(self.x)

    def jets(self) -> list[Jet1]:
        return [Jet1(f, y, Fraction(0), (x, y)) for x, y, f in zip(self.x, self.y, self.f)]

    def arrays(self):
        """Float64 (points, values, fx, fy)."""
        pts = np.array([[float(a), float(b)] for a, b in zip(self.x, self.y)]).reshape(-1, 2)
        f = np.array([float(v) for v in self.f])
        return pts, f, pts[:, 1].copy(), np.zeros(len(f))

    def to_json(self) -> str:
        rows = [
            {
                "x": fraction_str(x),
                "y": fraction_str(y),
                "f": fraction_str(f),
                "fx": fraction_str(y),
                "fy": "0",
                "err": fraction_str(e),
                "copy": c,
                "address": a,
            }
            for x, y, f, e, c, a in zip(self.x, self.y, self.f, self.err, self.copy, self.address)
        ]
        return json.dumps({"depth": self.depth, "jets": rows}, indent=1)


def _anchor_values(depth: int):
    """Arc-ordered anchors of depth ``depth`` with exact coordinates, G, H.

    Values come from the polyline one level deeper: for anchors shallower
    than the evaluation depth, G_{n+1} - H G_{n+1}(B) is already the limit F.
    """
    tree = build_tree(depth + 1)
    J = build_J(tree)
    D = tree.denom
    prefix = J.line_integral_prefix()
    start, end = leaf_anchor_indices(J)
    k = 4**depth
    a_idx = start[0::4][:k]
    b_idx = end[3::4][:k]
    idx = np.empty(2 * k, np.int64)
    idx[0::2] = a_idx
    idx[1::2] = b_idx
    return J.vertices[idx], prefix[idx], D, int(prefix[-1])


def sample_jet_field(
    depth: int, k: int | None = None, copies=(1, 2, 3, 4), connector_step=None
) -> JetField:
    """Jets at depth-``depth`` anchors of every copy, exact values.

    ``k`` anchors per copy are taken evenly along the arc (the initial
    endpoint for k = 1); ``None`` keeps all 2 * 4**depth of them. Points
    shared by adjacent copies appear once.

    With ``connector_step`` (and k = None) every connector between
    consecutive depth-n squares also gets interior points at most that far
    apart. F is affine along a straight connector (dF = y dx there and H is
    constant), so those values are exact too.
    """
    if depth < 0:
        raise DomainError("depth must be >= 0")
    verts, g, D, gB = _anchor_values(depth)
    N = len(verts)
    if k is None or k >= N:
        pick = np.arange(N)
    elif k <= 0:
        raise DomainError("k must be positive")
    elif k == 1:
        pick = np.array([0])
    else:
        pick = np.unique(np.round(np.linspace(0, N - 1, k)).astype(np.int64))
    if connector_step is not None:
        if len(pick) != N:
            raise DomainError("connector samples need the full anchor set")
        connector_step = Fraction(connector_step)
        if connector_step <= 0:
            raise DomainError("connector_step must be positive")
    D2 = D * D
    field = JetField(depth, [], [], [], [], [], [])
    seen: set = set()

    def emit(xy, f, c, label):
        if xy in seen:
            return
        seen.add(xy)
        field.x.append(xy[0])
        field.y.append(xy[1])
        field.f.append(f)
        field.err.append(Fraction(0))
        field.copy.append(c)
        field.address.append(label)

    for c in COPIES:
        if c.index not in copies:
            continue
        p0 = c.potential(ARC_START)
        GB = Fraction(gB, D2) + c.potential(ARC_END) - p0
        last = None
        for j in pick:
            j = int(j)
            leaf, tail = divmod(j, 2)
            u = (Fraction(int(verts[j][0]), D), Fraction(int(verts[j][1]), D))
            xy = c.apply(u)
            h = Fraction(leaf + tail, 4**depth)
            f = Fraction(int(g[j]), D2) + c.potential(u) - p0 - GB * h
            if connector_step is not None and tail == 0 and last is not None:
                _connector_points(last, (xy, f), connector_step, leaf - 1, depth, c.index, emit)
            emit(xy, f, c.index, str(CantorPoint(index_address(leaf, depth), THREES if tail else ZEROS)))
            last = (xy, f)
    return field


def _connector_points(start, end, step, leaf, depth, copy, emit):
    (b, fb), (a, _) = start, end
    length = abs(a[0] - b[0]) + abs(a[1] - b[1])
    pieces = -(-length // step)  # ceil
    addr = index_address(leaf, depth)
    while addr and addr[-1] == 3:
        addr = addr[:-1]
    tag = "S" + "".join(map(str, addr))
    for r in range(1, int(pieces)):
        t = Fraction(r, int(pieces))
        p = (b[0] + t * (a[0] - b[0]), b[1] + t * (a[1] - b[1]))
        emit(p, fb + b[1] * (p[0] - b[0]), copy, f"{tag}@{t}")


def connector_jets(depth: int, per_connector: int = 1, eval_depth: int = DEFAULT_DEPTH) -> JetField:
    """Jets at interior points of the connectors of depth <= ``depth`` squares."""
    field = JetField(depth, [], [], [], [], [], [])
    funcs = {c.index: CopyFunction(c, eval_depth) for c in COPIES}
    ts = [Fraction(j + 1, per_connector + 1) for j in range(per_connector)]
    for k in range(1, depth + 1):
        for idx in range(4**k):
            addr = index_address(idx, k)
            if addr[-1] == 3:
                continue
            for t in ts:
                p = ConnectorPoint(addr, t)
                for c in COPIES:
                    fn = funcs[c.index]
                    v = fn.F(p)
                    xy = fn.point(p)
                    field.x.append(xy[0])
                    field.y.append(xy[1])
                    field.f.append(v.value)
                    field.err.append(v.error_bound)
                    field.copy.append(c.index)
                    field.address.append(f"S{''.join(map(str, addr))}@{t}")
    return field


def render_svg(curve: ClosedCurve, size: int = 800) -> str:
    D = curve.denom
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="-1 -1 3 3">',
        '<g transform="matrix(1 0 0 -1 0 1)">',
    ]
    for b in curve.boxes:
        for x0, y0, x1, y1 in b / D:
            parts.append(
                f'<rect x="{x0:.9g}" y="{y0:.9g}" width="{x1 - x0:.9g}" height="{y1 - y0:.9g}" fill="#222"/>'
            )
    for c in curve.curves:
        pts = " ".join(f"{x / D:.9g},{y / D:.9g}" for x, y in c.vertices)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#d33" stroke-width="{1.5 / size:.3g}"/>')
    parts.append("</g></svg>")
    return "\n".join(parts)
