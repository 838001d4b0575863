from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from fatcurve.arc import (
    ROOT,
    THREES,
    ZEROS,
    CantorPoint,
    DomainError,
    ResourceError,
    SeparationError,
    alpha,
    area_En,
    build_J,
    build_template,
    build_tree,
    common_depth,
    coord_of,
    leaf_anchor_indices,
    locate,
    render_svg,
    separation_bound,
    side,
    tree_json,
)

F = Fraction


def test_template_quarter():
    t = build_template(F(1, 4))
    (corner, s) = t.squares[0]
    assert corner == (0, 0) and s == F(3, 8)
    assert t.anchors[0][1] == (0, F(3, 8))  # B_0
    assert t.anchors[1][0] == (0, F(5, 8))  # A_1


def test_template_connector_gap():
    t = build_template(F(1, 4))
    b1, a2 = t.connectors[1]
    assert b1[1] == a2[1] == F(5, 8)
    assert a2[0] - b1[0] == F(1, 4)


@pytest.mark.parametrize("a", [F(1, 3), F(1, 9), F(7, 8)])
def test_template_endpoints_fixed(a):
    t = build_template(a)
    assert t.anchors[0][0] == (0, 0)
    assert t.anchors[3][1] == (1, 0)


@pytest.mark.parametrize("a", [0, 1, -1, F(3, 2)])
def test_template_alpha_range(a):
    with pytest.raises(DomainError):
        build_template(a)


def test_depth_one_nodes():
    sides = {locate((j,)).side for j in range(4)}
    assert sides == {F(3, 8)}
    n2 = locate((2,))
    assert n2.entry == (F(5, 8), F(5, 8))
    assert n2.exit == (1, F(5, 8))


def test_fig2_labels():
    assert locate((3, 3)).exit == (1, 0)
    assert locate((2, 0)).entry == locate((2,)).entry


def test_side_closed_form():
    for m in range(0, 15):
        prod = F(1)
        for i in range(1, m + 1):
            prod *= (1 - F(1, (i + 1) ** 2)) / 2
        assert side(m) == prod == F(m + 2, 2 ** (m + 1) * (m + 1))
    assert side(1) == F(3, 8)
    assert alpha(1) == F(1, 4)


def test_tree_matches_exact_nodes():
    tree = build_tree(4)
    rng = np.random.default_rng(3)
    for _ in range(40):
        k = int(rng.integers(0, 5))
        addr = tuple(int(d) for d in rng.integers(0, 4, k))
        exact = locate(addr)
        node = tree.node(addr)
        assert node == exact
        idx = 0
        for d in addr:
            idx = 4 * idx + d
        ex = tree.exits(k)[idx]
        assert (F(int(ex[0]), tree.denom), F(int(ex[1]), tree.denom)) == exact.exit


def test_tree_resource_limit():
    with pytest.raises(ResourceError):
        build_tree(6, max_nodes=4**5)
    with pytest.raises(DomainError):
        build_tree(-1)


def test_children_inside_parent():
    tree = build_tree(5)
    for k in range(1, 6):
        child = tree.boxes(k)
        parent = np.repeat(tree.boxes(k - 1), 4, axis=0)
        assert np.all(child[:, :2] >= parent[:, :2])
        assert np.all(child[:, 2:] <= parent[:, 2:])


def test_squares_disjoint():
    tree = build_tree(4)
    b = tree.boxes(4)
    # sort by xmin and check pairwise overlaps among neighbours in a sweep
    order = np.argsort(b[:, 0])
    b = b[order]
    for i in range(len(b)):
        j = i + 1
        while j < len(b) and b[j, 0] < b[i, 2]:
            overlap_y = min(b[i, 3], b[j, 3]) - max(b[i, 1], b[j, 1])
            assert overlap_y <= 0
            j += 1


def test_J1_passes_through_anchors():
    tree = build_tree(1)
    J = build_J(tree)
    pts = J.points()
    anchors = []
    for j in range(4):
        node = locate((j,))
        anchors += [node.entry, node.exit]
    pos = [pts.index(a) for a in anchors]
    assert pos == sorted(pos)
    assert pts[0] == (0, 0) and pts[-1] == (1, 0)


def test_J2_visits_A20_before_B20():
    J = build_J(build_tree(2))
    pts = J.points()
    assert pts.index(locate((2,)).entry) < pts.index(locate((2, 0)).exit)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
def test_J_simple_and_axis_parallel(n):
    J = build_J(build_tree(n))
    assert J.check_axis_parallel()
    v = [tuple(p) for p in J.vertices.tolist()]
    assert len(set(v)) == len(v)
    # no two non-adjacent segments meet: check via the raster of unit cells
    seg = J.segments()
    horiz = seg[seg[:, 1] == seg[:, 3]]
    vert = seg[seg[:, 0] == seg[:, 2]]
    for hs in horiz[:200]:
        y = hs[1]
        lo, hi = sorted((hs[0], hs[2]))
        cross = vert[
            (vert[:, 0] > lo) & (vert[:, 0] < hi)
            & (np.minimum(vert[:, 1], vert[:, 3]) < y) & (np.maximum(vert[:, 1], vert[:, 3]) > y)
        ]
        assert len(cross) == 0


def test_leaf_anchor_indices():
    tree = build_tree(3)
    J = build_J(tree)
    start, end = leaf_anchor_indices(J)
    assert np.array_equal(J.vertices[start], tree.entries(3))
    assert np.array_equal(J.vertices[end], tree.exits(3))


def _raster_region_below(n, N=2**11):
    """Pixels connected to y < 0 once squares and connectors are blocked."""
    t = build_tree(n)
    D = t.denom
    blocked = np.zeros((2 * N, N), bool)
    for x0, y0, x1, y1 in t.boxes(n):
        c0, c1 = int(np.floor(x0 * N / D)), int(np.ceil(x1 * N / D))
        r0, r1 = int(np.floor(y0 * N / D)) + N, int(np.ceil(y1 * N / D)) + N
        blocked[r0:r1, c0:c1] = True
    for (bx, by), (ax, ay) in zip(t.exits(n)[:-1], t.entries(n)[1:]):
        x0, x1 = sorted((bx, ax))
        y0, y1 = sorted((by, ay))
        c0 = int(np.floor(x0 * N / D))
        c1 = max(int(np.ceil(x1 * N / D)), c0 + 1)
        r0 = int(np.floor(y0 * N / D)) + N
        r1 = max(int(np.ceil(y1 * N / D)) + N, r0 + 1)
        if x0 == x1 and (x0 * N) % D == 0:
            c0 -= 1
            c1 = c0 + 2
        if y0 == y1 and (y0 * N) % D == 0:
            r0 -= 1
            r1 = r0 + 2
        blocked[r0:r1, c0:c1] = True
    lab, _ = ndimage.label(~blocked)
    return lab == lab[0, N // 2], N


@pytest.mark.parametrize("n", [1, 2, 3])
def test_J_is_boundary_of_lower_region(n):
    # independent oracle: flood-fill the complement of E_n and its connectors
    omega, N = _raster_region_below(n)
    J = build_J(build_tree(n))
    D = J.denom
    area = omega[N:].sum() / N**2
    g = J.line_integral_prefix()[-1] / D**2
    assert abs(area - g) < 4e-3
    v = J.vertices / D
    bad = 0
    for (x0, y0), (x1, y1) in zip(v[:-1], v[1:]):
        d = np.array([x1 - x0, y1 - y0])
        L = np.abs(d).sum()
        d /= L
        right = np.array([d[1], -d[0]])
        for t in (0.25, 0.5, 0.75):
            p = np.array([x0, y0]) + t * L * d
            for sgn, want in ((1, True), (-1, False)):
                q = p + sgn * right * 3 / N
                if 0 < q[0] < 1 and -1 < q[1] < 1:
                    got = omega[int(np.floor(q[1] * N)) + N, int(np.floor(q[0] * N))]
                    bad += got != want
    assert bad == 0


def test_area_examples():
    assert area_En(1) == F(9, 16)
    assert area_En(2) == (F(3, 4) * F(8, 9)) ** 2 == F(4, 9)
    assert area_En(0) == 1
    with pytest.raises(DomainError):
        area_En(-1)


def test_area_decreases_to_quarter():
    vals = [area_En(n) for n in range(1, 200)]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert all(v > F(1, 4) for v in vals)
    assert vals[-1] - F(1, 4) < F(1, 300)


def test_cantor_points():
    assert coord_of(CantorPoint(())) == (0, 0)
    assert coord_of(CantorPoint((0, 0, 0))) == (0, 0)
    assert coord_of(CantorPoint((3, 3, 3), THREES)) == (1, 0)
    unresolved = coord_of(CantorPoint((1,), None))
    assert unresolved == locate((1,))
    assert CantorPoint((2, 0, 0)).canonical() == CantorPoint((2,))
    assert str(CantorPoint((0, 1), THREES)) == "B01"
    with pytest.raises(DomainError):
        CantorPoint((4,))
    with pytest.raises(DomainError):
        CantorPoint((), "ones")


def test_separation_examples():
    A, B = CantorPoint(()), CantorPoint((), THREES)
    assert separation_bound(A, B) == (0, F(1, 4))
    p, q = CantorPoint((1, 0), ZEROS), CantorPoint((1, 2), THREES)
    m, bound = separation_bound(p, q)
    assert m == 1 and bound == F(1, 24) == alpha(2) * side(1)
    with pytest.raises(SeparationError):
        common_depth(CantorPoint((2,)), CantorPoint((2, 0, 0)))


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 3), max_size=6),
    st.lists(st.integers(0, 3), max_size=6),
    st.booleans(),
    st.booleans(),
)
def test_separation_property(a, b, ta, tb):
    p = CantorPoint(tuple(a), THREES if ta else ZEROS)
    q = CantorPoint(tuple(b), THREES if tb else ZEROS)
    try:
        m, bound = separation_bound(p, q)
    except SeparationError:
        assert coord_of(p) == coord_of(q)
        return
    (x0, y0), (x1, y1) = coord_of(p), coord_of(q)
    assert (x1 - x0) ** 2 + (y1 - y0) ** 2 >= bound**2
    # the same m, with the shared bound, for the mirrored pair
    assert separation_bound(q, p) == (m, bound)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=7))
def test_child_anchor_inheritance(addr):
    node = locate(addr)
    assert node.child(0).entry == node.entry
    assert node.child(3).exit == node.exit
    assert node.side == side(len(addr))


def test_exports():
    doc = tree_json(build_tree(1))
    assert '"3/8"' in doc
    svg = render_svg(build_tree(2))
    assert svg.startswith("<svg") and svg.count("<rect") >= 16
    assert ROOT.box() == (0, 0, 1, 1)
