"""Exact construction of the fractal arc E.

Every square Q_w of the construction is the image of the unit square under
an affine map ``u -> A_w + l_n * M_w u`` where ``A_w`` is the entry anchor,
``l_n`` the side length at depth ``n = len(w)`` and ``M_w`` one of four
orthogonal frames. Child squares reuse the template set for
``alpha_{n+1}``; children 0 and 3 are mirrored so that the template's
A and B land on the required anchors.

Coordinates are exact. The vectorised tree stores integer numerators over a
common denominator ``D`` (the lcm of the side-length denominators), which
is small enough for int64 at every depth this package materialises.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import lcm
from typing import Iterable, Sequence

import numpy as np

Point = tuple[Fraction, Fraction]
Frame = tuple[int, int, int, int]  # row-major [[a, b], [c, d]]

IDENTITY: Frame = (1, 0, 0, 1)
SWAP: Frame = (0, 1, 1, 0)
ANTISWAP: Frame = (0, -1, -1, 0)
NEGATE: Frame = (-1, 0, 0, -1)

# frame codes used by the vectorised tree
FRAMES: tuple[Frame, ...] = (IDENTITY, SWAP, ANTISWAP, NEGATE)
FRAME_CODE = {f: i for i, f in enumerate(FRAMES)}

# isometry applied to the template when it is placed into child square j
DIGIT_FRAMES: tuple[Frame, ...] = (SWAP, IDENTITY, IDENTITY, ANTISWAP)

DEFAULT_MAX_NODES = 4**10


class DomainError(ValueError):
    pass


class ResourceError(RuntimeError):
    pass


class SeparationError(ValueError):
    pass


def alpha(n: int) -> Fraction:
    """Gap parameter used when refining depth ``n - 1`` squares."""
    if n < 1:
        raise DomainError(f"alpha index must be >= 1, got {n}")
    return Fraction(1, (n + 1) ** 2)


@lru_cache(maxsize=None)
def side(n: int) -> Fraction:
    """Side length l_n of a depth-n square (closed form of the product)."""
    if n < 0:
        raise DomainError(f"depth must be >= 0, got {n}")
    return Fraction(n + 2, 2 ** (n + 1) * (n + 1))


def side_product(n: int) -> Fraction:
    out = Fraction(1)
    for i in range(1, n + 1):
        out *= (1 - alpha(i)) / 2
    return out


@lru_cache(maxsize=None)
def denominator(n: int) -> int:
    """Common denominator of every coordinate at depth <= n."""
    d = 1
    for k in range(n + 1):
        d = lcm(d, side(k).denominator)
    return d


def frame_mul(p: Frame, q: Frame) -> Frame:
    a, b, c, d = p
    e, f, g, h = q
    return (a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)


def frame_apply(m: Frame, u) -> tuple:
    a, b, c, d = m
    return (a * u[0] + b * u[1], c * u[0] + d * u[1])


def frame_det(m: Frame) -> int:
    return m[0] * m[3] - m[1] * m[2]


_FRAME_MUL_TABLE = np.array(
    [[FRAME_CODE[frame_mul(p, q)] for q in FRAMES] for p in FRAMES], dtype=np.int8
)
_FRAME_ARRAY = np.array(FRAMES, dtype=np.int64)
_FRAME_DET = np.array([frame_det(f) for f in FRAMES], dtype=np.int64)


# ---------------------------------------------------------------------------
# template


@dataclass(frozen=True)
class Template:
    """The set E^alpha: four corner squares, eight anchors, three connectors."""

    alpha: Fraction
    squares: tuple[tuple[Point, Fraction], ...]  # (lower-left corner, side)
    anchors: tuple[tuple[Point, Point], ...]  # (A_j, B_j)
    connectors: tuple[tuple[Point, Point], ...]

    @property
    def small_side(self) -> Fraction:
        return (1 - self.alpha) / 2


def template_anchors(a: Fraction) -> tuple[tuple[Point, Point], ...]:
    s = (1 - a) / 2
    t = (1 + a) / 2
    z, one = Fraction(0), Fraction(1)
    return (
        ((z, z), (z, s)),
        ((z, t), (s, t)),
        ((t, t), (one, t)),
        ((one, s), (one, z)),
    )


def build_template(a) -> Template:
    a = Fraction(a)
    if not 0 < a < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {a}")
    s = (1 - a) / 2
    t = (1 + a) / 2
    z = Fraction(0)
    squares = (((z, z), s), ((z, t), s), ((t, t), s), ((t, z), s))
    anchors = template_anchors(a)
    connectors = tuple((anchors[j][1], anchors[j + 1][0]) for j in range(3))
    return Template(a, squares, anchors, connectors)


# ---------------------------------------------------------------------------
# exact nodes


@dataclass(frozen=True)
class SquareNode:
    address: tuple[int, ...]
    corner: Point  # image of the template origin, equal to the entry anchor
    side: Fraction
    frame: Frame

    @property
    def depth(self) -> int:
        return len(self.address)

    @property
    def entry(self) -> Point:
        return self.corner

    @property
    def exit(self) -> Point:
        return self.local_to_global((1, 0))

    def local_to_global(self, u) -> Point:
        v = frame_apply(self.frame, u)
        return (self.corner[0] + self.side * v[0], self.corner[1] + self.side * v[1])

    def box(self) -> tuple[Fraction, Fraction, Fraction, Fraction]:
        pts = [self.local_to_global(u) for u in ((0, 0), (1, 1))]
        return (
            min(p[0] for p in pts),
            min(p[1] for p in pts),
            max(p[0] for p in pts),
            max(p[1] for p in pts),
        )

    def contains(self, p) -> bool:
        x0, y0, x1, y1 = self.box()
        return x0 <= p[0] <= x1 and y0 <= p[1] <= y1

    def child(self, j: int) -> "SquareNode":
        if j not in (0, 1, 2, 3):
            raise DomainError(f"digit must be in 0..3, got {j}")
        a = alpha(self.depth + 1)
        anchor = template_anchors(a)[j][0]
        v = frame_apply(self.frame, anchor)
        corner = (self.corner[0] + self.side * v[0], self.corner[1] + self.side * v[1])
        return SquareNode(
            self.address + (j,),
            corner,
            self.side * (1 - a) / 2,
            frame_mul(self.frame, DIGIT_FRAMES[j]),
        )


ROOT = SquareNode((), (Fraction(0), Fraction(0)), Fraction(1), IDENTITY)


def _check_address(address: Iterable[int]) -> tuple[int, ...]:
    address = tuple(int(d) for d in address)
    if any(d not in (0, 1, 2, 3) for d in address):
        raise DomainError(f"address digits must be in 0..3: {address}")
    return address


def locate(address: Sequence[int]) -> SquareNode:
    """Exact node for an address, replaying the isometry chain from the root."""
    node = ROOT
    for d in _check_address(address):
        node = node.child(d)
    return node


# ---------------------------------------------------------------------------
# Cantor points

ZEROS = "zeros"
THREES = "threes"


@dataclass(frozen=True)
class CantorPoint:
    """A point of the Cantor part named by a finite address and a tail rule.

    ``tail='zeros'`` is the entry anchor A_w, ``tail='threes'`` the exit
    anchor B_w; ``tail=None`` leaves the point undetermined inside Q_w.
    """

    address: tuple[int, ...]
    tail: str | None = ZEROS

    def __post_init__(self):
        object.__setattr__(self, "address", _check_address(self.address))
        if self.tail not in (ZEROS, THREES, None):
            raise DomainError(f"unknown tail convention {self.tail!r}")

    @property
    def resolved(self) -> bool:
        return self.tail is not None

    def digit(self, k: int) -> int:
        if k < len(self.address):
            return self.address[k]
        if self.tail is None:
            raise DomainError("digit beyond the address of an unresolved point")
        return 0 if self.tail == ZEROS else 3

    def canonical(self) -> "CantorPoint":
        """Shortest address naming the same point."""
        pad = 0 if self.tail == ZEROS else 3
        addr = self.address
        if self.tail is not None:
            while addr and addr[-1] == pad:
                addr = addr[:-1]
        return CantorPoint(addr, self.tail)

    def __str__(self) -> str:
        digits = "".join(map(str, self.address))
        return {ZEROS: "A", THREES: "B", None: "Q"}[self.tail] + (digits or "_")


def coord_of(point: CantorPoint):
    """Exact coordinates of a resolved point, or its square when unresolved."""
    node = locate(point.address)
    if point.tail == ZEROS:
        return node.entry
    if point.tail == THREES:
        return node.exit
    return node


def common_depth(p: CantorPoint, q: CantorPoint) -> int:
    """Depth of the smallest square holding both points."""
    if not (p.resolved and q.resolved):
        raise DomainError("separation needs resolved points")
    limit = max(len(p.address), len(q.address)) + 1
    for k in range(limit):
        if p.digit(k) != q.digit(k):
            return k
    raise SeparationError(f"{p} and {q} are the same point")


def separation_formula(m: int) -> Fraction:
    return Fraction(1, 2 ** (m + 1) * (m + 1) * (m + 2))


def separation_bound(p: CantorPoint, q: CantorPoint) -> tuple[int, Fraction]:
    m = common_depth(p, q)
    return m, separation_formula(m)


# ---------------------------------------------------------------------------
# areas


def area_closed_form(n: int) -> Fraction:
    return Fraction(n + 2, 2 * (n + 1)) ** 2


def area_En(n: int) -> Fraction:
    """Area of E_n, checked against the square count 4^n * l_n^2."""
    if n < 0:
        raise DomainError(f"depth must be >= 0, got {n}")
    closed = area_closed_form(n)
    counted = 4**n * side(n) ** 2
    if closed != counted:  # pragma: no cover - would be an arithmetic bug
        raise AssertionError(f"area mismatch at depth {n}: {closed} != {counted}")
    return closed


# ---------------------------------------------------------------------------
# vectorised tree


@dataclass
class Level:
    ax: np.ndarray  # entry anchor numerators (int64)
    ay: np.ndarray
    frame: np.ndarray  # frame codes (int8)


@dataclass
class SquareTree:
    """All squares down to ``depth`` as integer arrays over ``denom``.

    Nodes of level k are stored in base-4 address order, which is also the
    order in which the arc visits them.
    """

    depth: int
    denom: int
    levels: list[Level] = field(repr=False)

    def side_units(self, k: int) -> int:
        return int(side(k) * self.denom)

    def size(self, k: int) -> int:
        return 4**k

    def entries(self, k: int) -> np.ndarray:
        lv = self.levels[k]
        return np.stack([lv.ax, lv.ay], axis=1)

    def exits(self, k: int) -> np.ndarray:
        lv = self.levels[k]
        m = _FRAME_ARRAY[lv.frame]
        L = self.side_units(k)
        return np.stack([lv.ax + L * m[:, 0], lv.ay + L * m[:, 2]], axis=1)

    def orientation(self, k: int) -> np.ndarray:
        return _FRAME_DET[self.levels[k].frame]

    def boxes(self, k: int) -> np.ndarray:
        """(xmin, ymin, xmax, ymax) numerators for every level-k square."""
        lv = self.levels[k]
        m = _FRAME_ARRAY[lv.frame]
        L = self.side_units(k)
        fx = lv.ax + L * (m[:, 0] + m[:, 1])
        fy = lv.ay + L * (m[:, 2] + m[:, 3])
        return np.stack(
            [np.minimum(lv.ax, fx), np.minimum(lv.ay, fy), np.maximum(lv.ax, fx), np.maximum(lv.ay, fy)],
            axis=1,
        )

    def node(self, address: Sequence[int]) -> SquareNode:
        address = _check_address(address)
        k = len(address)
        if k > self.depth:
            return locate(address)
        idx = address_index(address)
        lv = self.levels[k]
        D = self.denom
        return SquareNode(
            address,
            (Fraction(int(lv.ax[idx]), D), Fraction(int(lv.ay[idx]), D)),
            side(k),
            FRAMES[int(lv.frame[idx])],
        )

    def to_fraction(self, v) -> Fraction:
        return Fraction(int(v), self.denom)


def address_index(address: Sequence[int]) -> int:
    idx = 0
    for d in address:
        idx = 4 * idx + d
    return idx


def index_address(idx: int, depth: int) -> tuple[int, ...]:
    out = []
    for _ in range(depth):
        out.append(idx % 4)
        idx //= 4
    return tuple(reversed(out))


def build_tree(max_depth: int, max_nodes: int = DEFAULT_MAX_NODES) -> SquareTree:
    if max_depth < 0:
        raise DomainError(f"depth must be >= 0, got {max_depth}")
    if 4**max_depth > max_nodes:
        raise ResourceError(
            f"depth {max_depth} needs {4**max_depth} nodes, limit is {max_nodes}"
        )
    D = denominator(max_depth + 1)
    if 4 * D * D >= 2**62:  # pragma: no cover - unreachable below depth 13
        raise ResourceError("coordinate denominator too large for int64 storage")
    levels = [Level(np.zeros(1, np.int64), np.zeros(1, np.int64), np.zeros(1, np.int8))]
    for k in range(max_depth):
        parent = levels[-1]
        L = int(side(k) * D)
        Ls = int(side(k + 1) * D)  # l_k * s
        # template anchors A_j in units of l_k: 0, s, 1 - s, 1
        unit = {0: 0, 1: Ls, 2: L - Ls, 3: L}
        a_codes = [(0, 0), (0, 2), (2, 2), (3, 1)]
        m = _FRAME_ARRAY[parent.frame]
        ax = np.empty(4 * len(parent.ax), np.int64)
        ay = np.empty_like(ax)
        fr = np.empty(len(ax), np.int8)
        for j, (cx, cy) in enumerate(a_codes):
            ux, uy = unit[cx], unit[cy]
            ax[j::4] = parent.ax + m[:, 0] * ux + m[:, 1] * uy
            ay[j::4] = parent.ay + m[:, 2] * ux + m[:, 3] * uy
            fr[j::4] = _FRAME_MUL_TABLE[parent.frame, FRAME_CODE[DIGIT_FRAMES[j]]]
        levels.append(Level(ax, ay, fr))
    return SquareTree(max_depth, D, levels)


# ---------------------------------------------------------------------------
# the approximating curves J_n


@dataclass
class PolylineCurve:
    """Axis-parallel polyline with integer vertices over ``denom``."""

    vertices: np.ndarray  # (N, 2) int64
    denom: int
    # index of the first vertex belonging to each leaf, when built from a tree
    leaf_start: np.ndarray | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.vertices)

    def points(self) -> list[Point]:
        D = self.denom
        return [(Fraction(int(x), D), Fraction(int(y), D)) for x, y in self.vertices]

    def segments(self) -> np.ndarray:
        v = self.vertices
        return np.concatenate([v[:-1], v[1:]], axis=1)

    def line_integral_prefix(self) -> np.ndarray:
        """Prefix sums of the integral of y dx, in units of 1/denom**2."""
        v = self.vertices.astype(object) if self.denom**2 * 4 >= 2**62 else self.vertices
        dx = v[1:, 0] - v[:-1, 0]
        terms = v[:-1, 1] * dx
        out = np.zeros(len(v), dtype=terms.dtype)
        out[1:] = np.cumsum(terms)
        return out

    def check_axis_parallel(self) -> bool:
        d = np.diff(self.vertices, axis=0)
        nonzero = (d != 0).sum(axis=1)
        return bool(np.all(nonzero == 1))


def build_J(tree: SquareTree, depth: int | None = None) -> PolylineCurve:
    """Boundary trace of Omega_n inside the unit square, from A to B.

    Inside a depth-n square the curve keeps the outside region on its right:
    for positively oriented frames that is the square's edge from A to B,
    for mirrored frames it is the other three edges.
    """
    n = tree.depth if depth is None else depth
    if n > tree.depth:
        raise DomainError(f"tree only built to depth {tree.depth}")
    lv = tree.levels[n]
    L = tree.side_units(n)
    m = _FRAME_ARRAY[lv.frame]
    mirrored = _FRAME_DET[lv.frame] < 0
    a = np.stack([lv.ax, lv.ay], axis=1)
    c1 = a + L * np.stack([m[:, 1], m[:, 3]], axis=1)
    c2 = a + L * np.stack([m[:, 0] + m[:, 1], m[:, 2] + m[:, 3]], axis=1)
    b = a + L * np.stack([m[:, 0], m[:, 2]], axis=1)
    stacked = np.stack([a, c1, c2, b], axis=1)  # (leaves, 4, 2)
    keep = np.ones((len(a), 4), bool)
    keep[:, 1] = mirrored
    keep[:, 2] = mirrored
    counts = keep.sum(axis=1)
    leaf_start = np.zeros(len(a), np.int64)
    leaf_start[1:] = np.cumsum(counts)[:-1]
    verts = stacked[keep]
    return PolylineCurve(verts, tree.denom, leaf_start)


def leaf_anchor_indices(curve: PolylineCurve) -> tuple[np.ndarray, np.ndarray]:
    """Vertex indices of each leaf's entry and exit anchor inside ``curve``."""
    start = curve.leaf_start
    end = np.empty_like(start)
    end[:-1] = start[1:] - 1
    end[-1] = len(curve) - 1
    return start, end


# ---------------------------------------------------------------------------
# exports


def fraction_str(v: Fraction) -> str:
    v = Fraction(v)
    return f"{v.numerator}/{v.denominator}"


def parse_fraction(s: str) -> Fraction:
    return Fraction(s)


def node_record(node: SquareNode) -> dict:
    return {
        "address": "".join(map(str, node.address)),
        "corner": [fraction_str(c) for c in node.corner],
        "side": fraction_str(node.side),
        "frame": list(node.frame),
        "entry": [fraction_str(c) for c in node.entry],
        "exit": [fraction_str(c) for c in node.exit],
    }


def tree_json(tree: SquareTree, depth: int | None = None) -> str:
    depth = tree.depth if depth is None else depth
    nodes = []
    for k in range(depth + 1):
        for idx in range(4**k):
            nodes.append(node_record(tree.node(index_address(idx, k))))
    return json.dumps({"depth": depth, "nodes": nodes}, indent=1)


def render_svg(tree: SquareTree, depth: int | None = None, size: int = 800) -> str:
    """SVG of E_n (squares and connectors) with J_n overlaid, viewBox [0,1]^2."""
    n = tree.depth if depth is None else depth
    D = tree.denom
    boxes = tree.boxes(n) / D
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        'viewBox="0 0 1 1">',
        '<g transform="matrix(1 0 0 -1 0 1)">',
    ]
    for x0, y0, x1, y1 in boxes:
        parts.append(
            f'<rect x="{x0:.9g}" y="{y0:.9g}" width="{x1 - x0:.9g}" height="{y1 - y0:.9g}" '
            'fill="#222" stroke="none"/>'
        )
    # connectors: exit of each leaf to the entry of the next one
    ent, ext = tree.entries(n) / D, tree.exits(n) / D
    for (x0, y0), (x1, y1) in zip(ext[:-1], ent[1:]):
        parts.append(
            f'<line x1="{x0:.9g}" y1="{y0:.9g}" x2="{x1:.9g}" y2="{y1:.9g}" '
            f'stroke="#222" stroke-width="{1.5 / size:.3g}"/>'
        )
    curve = build_J(tree, n)
    pts =" ".join(f"{x / D:.9g},{y / D:.9g}" for x, y in curve.vertices)
    parts.append(
        f'<polyline points="{pts}" fill="none" stroke="#d33" stroke-width="{0.6 / size:.3g}"/>'
    )
    parts.append("</g></svg>")
    return "\n".join(parts)
