import json
from fractions import Fraction

import numpy as np
import pytest

from fatcurve.arc import THREES, ZEROS, CantorPoint, DomainError, build_J, build_tree, side
from fatcurve.estimates import (
    CurvePoint,
    HypothesisError,
    chord_is_admissible,
    check_holder,
    check_lemma1,
    check_separation,
    closed_form_sup,
    green_sides,
    lemma_residual,
    modulus_samples,
    sample_admissible_chords,
    sample_anchor_pairs,
    samples_csv,
    shoelace,
)
from fatcurve.functions import ConnectorPoint, CurveFunction, G_at, H_at

F = Fraction


def test_lemma_residual_same_point():
    p = CantorPoint((0, 1, 2, 3, 0, 1, 2))
    assert lemma_residual(p, p, 8) == 0


def test_lemma_one_refinement_step():
    rep = check_lemma1(7, 6)
    assert rep.violations == 0
    assert rep.count == 4**6 * (8 * 7 // 2)
    assert rep.witness["bound"] == "1/16384" or F(rep.witness["bound"]) == side(6) ** 2


def test_lemma_bound_value():
    assert side(6) ** 2 == F(1, 2**14) * F(8, 7) ** 2


def test_lemma_hypothesis():
    with pytest.raises(HypothesisError):
        check_lemma1(8, 5)
    rep = check_lemma1(7, 5, exploratory=True)
    assert not rep.normative
    with pytest.raises(DomainError):
        check_lemma1(6, 6)


def test_lemma_budget_is_seeded():
    a = check_lemma1(9, 6, budget=20_000, seed=4)
    b = check_lemma1(9, 6, budget=20_000, seed=4)
    assert a.to_json(False) == b.to_json(False)
    assert a.extra["exhaustive"] is False
    assert a.violations == 0


def test_lemma_matches_exact_residual():
    rep = check_lemma1(7, 6)
    w = rep.witness
    p = CantorPoint(tuple(int(c) for c in w["p"][1:]), ZEROS if w["p"][0] == "A" else THREES)
    q = CantorPoint(tuple(int(c) for c in w["q"][1:]), ZEROS if w["q"][0] == "A" else THREES)
    assert abs(lemma_residual(p, q, 7)) == abs(F(w["residual"]))


def test_separation_small():
    rep = check_separation(depth=6, pairs=5000, seed=1)
    assert rep.violations == 0
    assert rep.extra["min_ratio"] >= 1


def test_holder_H_bound_and_chords():
    rep = check_holder(["G", "H", "F"], epsilons=(0.5,), pairs=150, depth=10, seed=2)
    assert rep.extra["h_bound_violations"] == 0
    assert rep.extra["g_chord_violations"] == 0
    for fn in ("G", "H", "F"):
        assert np.isfinite(rep.M_table[fn]["0.5"]["M"])


def test_holder_M_grows_as_eps_shrinks():
    rep = check_holder(["G"], epsilons=(0.5, 0.25, 0.1), pairs=150, depth=10, seed=2)
    M = [rep.M_table["G"][k]["M"] for k in ("0.5", "0.25", "0.1")]
    # delta < 1, so a smaller epsilon needs a larger constant
    assert M[0] <= M[1] <= M[2]


def test_holder_H_on_same_square():
    rng = np.random.default_rng(0)
    for _ in range(50):
        m = int(rng.integers(0, 8))
        prefix = tuple(int(d) for d in rng.integers(0, 4, m))
        a, b = rng.choice(4, 2, replace=False)
        p = CantorPoint(prefix + (int(a),), ZEROS)
        q = CantorPoint(prefix + (int(b), 2), THREES)
        assert abs(H_at(p) - H_at(q)) <= F(1, 4**m)


def test_horizontal_chord_residual_zero():
    # G along a horizontal connector: the chord is the curve itself
    c0, c1 = ConnectorPoint((1,), F(1, 4)), ConnectorPoint((1,), F(3, 4))
    (x0, y0), (x1, y1) = c0.coords(), c1.coords()
    assert y0 == y1
    resid = G_at(c1, 8).value - G_at(c0, 8).value - (y0 * (x1 - x0) + (x1 - x0) * (y1 - y0) / 2)
    assert resid == 0


def test_empty_sample_rejected():
    with pytest.raises(DomainError):
        check_holder(["G"], pairs=0, depth=8)


def test_sample_pairs_deterministic():
    a = sample_anchor_pairs(10, 50, seed=9)
    b = sample_anchor_pairs(10, 50, seed=9)
    assert a == b
    assert all(len(p.address) <= 9 and len(q.address) <= 9 for p, q in a)


def test_modulus_samples_csv():
    pairs = sample_anchor_pairs(8, 5, seed=1)
    rows = modulus_samples(pairs, "H", depth=8)
    text = samples_csv(rows)
    assert text.startswith("p,q,delta,residual")
    assert len(text.strip().splitlines()) == len(rows) + 1


def test_closed_form_peak():
    M, peak, scanned = closed_form_sup(0.5)
    assert peak == 6 and scanned > peak
    assert closed_form_sup(0.1)[1] > 30


def test_shoelace_unit_square():
    sq = [(F(0), F(0)), (F(1), F(0)), (F(1), F(1)), (F(0), F(1))]
    assert shoelace(sq) == 1
    assert shoelace(sq[::-1]) == -1


def test_green_manual_chord():
    J = build_J(build_tree(1))
    fn = CurveFunction(J)
    pts = J.points()
    i, j = pts.index((0, F(3, 8))), pts.index((0, F(5, 8)))
    p, q = CurvePoint(i, F(0)), CurvePoint(j, F(0))
    assert chord_is_admissible(J, p, q) is False  # the chord is the connector itself
    lhs, rhs = green_sides(J, fn, CurvePoint(0, F(1, 2)), CurvePoint(len(J) - 2, F(1, 2)))
    assert lhs == rhs


@pytest.mark.parametrize("n", [1, 2, 3])
def test_green_random_chords(n):
    J = build_J(build_tree(n))
    fn = CurveFunction(J)
    for p, q in sample_admissible_chords(J, 60, seed=n):
        lhs, rhs = green_sides(J, fn, p, q)
        assert lhs == rhs


def test_report_json_roundtrip():
    rep = check_separation(depth=5, pairs=100, seed=3)
    d = json.loads(rep.to_json())
    assert d["check"] == "separation" and d["violations"] == 0
    assert "runtime" not in json.loads(rep.to_json(False))
