import itertools
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cbnlearn.errors import CardinalityMismatch, ScopeNotCovered, StateOutOfRange, TooLarge, ZeroProbabilityEvidence
from cbnlearn.factor import Factor, factor_marginalize, factor_product, factor_restrict
from cbnlearn.inference import (
    brute_force_marginal,
    eliminate,
    full_joint,
    induced_width,
    marginal,
    min_fill_order,
)
from cbnlearn.model import Cbn, CausalDiagram, Cpt
from cbnlearn.structures import chain, cone_cloud, diamond

from conftest import enumerate_joint, random_cbn, random_diagram


def test_factor_scope_is_sorted():
    f = Factor([2, 0], np.arange(6.0).reshape(2, 3))
    assert f.scope == (0, 2)
    assert f.cards == (3, 2)
    assert f.values[2, 1] == 5.0


def test_product_identity_and_elementwise():
    a = Factor([0], [0.3, 0.7])
    assert np.array_equal(factor_product(Factor.scalar(1.0), a).values, a.values)
    out = factor_product(a, Factor([0], [0.5, 0.5]))
    assert np.allclose(out.values, [0.15, 0.35])
    outer = factor_product(Factor([0], [0.5, 0.5]), Factor([1], [0.5, 0.5]))
    assert outer.scope == (0, 1) and np.allclose(outer.values, 0.25)


def test_product_cardinality_mismatch():
    with pytest.raises(CardinalityMismatch):
        factor_product(Factor([0], [0.5, 0.5]), Factor([0], [0.2, 0.3, 0.5]))


def test_marginalize(rng):
    f = Factor([0, 1], np.full((2, 2), 0.25))
    assert factor_marginalize(f, []).values is f.values or np.array_equal(factor_marginalize(f, []).values, f.values)
    assert np.allclose(factor_marginalize(f, [1]).values, [0.5, 0.5])
    g = Factor([0, 1, 2], rng.random((2, 3, 4)))
    out = factor_marginalize(g, [0, 2])
    expected = [sum(g.values[a, b, c] for a in range(2) for c in range(4)) for b in range(3)]
    assert np.allclose(out.values, expected, rtol=0, atol=1e-12)
    assert abs(out.total() - g.total()) < 1e-12


def test_restrict(rng):
    f = Factor([0], [0.2, 0.8])
    assert np.array_equal(factor_restrict(f, {}).values, f.values)
    assert factor_restrict(f, {0: 1}).scope == ()
    assert float(factor_restrict(f, {0: 1}).values) == 0.8
    g = Factor([0, 1, 2], rng.random((2, 3, 2)))
    out = factor_restrict(g, {0: 1, 2: 0})
    assert out.scope == (1,)
    assert np.array_equal(out.values, [g.values[1, b, 0] for b in range(3)])
    with pytest.raises(StateOutOfRange):
        factor_restrict(f, {0: 2})


def _random_factor(rng, scope, cards):
    return Factor(scope, rng.random([cards[v] for v in sorted(scope)]))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_product_commutative_associative(seed):
    rng = np.random.default_rng(seed)
    cards = {v: int(rng.integers(1, 4)) for v in range(5)}
    scopes = [sorted(rng.choice(5, size=rng.integers(0, 4), replace=False).tolist()) for _ in range(3)]
    a, b, c = (_random_factor(rng, s, cards) for s in scopes)
    ab = factor_product(a, b)
    ba = factor_product(b, a)
    assert ab.scope == ba.scope and np.allclose(ab.values, ba.values, rtol=1e-12, atol=0)
    left = factor_product(ab, c)
    right = factor_product(a, factor_product(b, c))
    assert np.allclose(left.values, right.values, rtol=1e-12, atol=0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_marginalize_restrict_commute(seed):
    rng = np.random.default_rng(seed)
    f = Factor([0, 1, 2, 3], rng.random((2, 3, 2, 2)))
    one = factor_restrict(factor_marginalize(f, [1]), {2: 1})
    two = factor_marginalize(factor_restrict(f, {2: 1}), [1])
    assert one.scope == two.scope and np.allclose(one.values, two.values, rtol=1e-12)


def test_tsv_dump():
    f = Factor([3, 1], np.array([[0.1, 0.2], [0.3, 0.4]]))
    text = f.to_tsv({1: "A", 3: "B"})
    assert text.splitlines()[1] == "A=0,B=1\t0.3"


def test_min_fill_tree_width():
    d = CausalDiagram.from_edges(["A", "B", "C", "D"], [("A", "B"), ("A", "C"), ("C", "D")])
    assert min_fill_order(d).induced_width <= 1


def test_induced_width_is_recomputable(rng):
    for _ in range(20):
        d = random_diagram(rng, 10, 3)
        order = min_fill_order(d)
        scopes = [ps + (i,) for i, ps in enumerate(d.parents)]
        assert induced_width(scopes, order.order) == order.induced_width
        assert sorted(order.order) == list(range(len(d)))


@pytest.mark.parametrize("n", [3, 7, 9, 25, 49, 99])
def test_chain_width(n):
    assert min_fill_order(chain(n).diagram()).induced_width <= 3


@pytest.mark.parametrize("n", [5, 9, 17, 65])
def test_diamond_width(n):
    assert min_fill_order(diamond(n).diagram()).induced_width <= 5


def test_cone_cloud_width_sublinear():
    widths = [min_fill_order(cone_cloud(n).diagram()).induced_width for n in (6, 15, 45)]
    assert widths == sorted(widths)
    ratios = [w / n for w, n in zip(widths, (6, 15, 45))]
    assert ratios == sorted(ratios, reverse=True)
    assert widths[-1] <= 2 * np.sqrt(45)


def test_eliminate_single_factor_and_total(rng):
    f = Factor([0, 1], rng.random((2, 2)))
    assert np.array_equal(eliminate([f], []).values, f.values)
    cbn = random_cbn(rng, random_diagram(rng, 8, 2))
    total = eliminate(cbn.factors(), min_fill_order(cbn.diagram))
    assert total.scope == () and abs(float(total.values) - 1) < 1e-9


def test_eliminate_rejects_unknown_scope():
    f = Factor([0, 5], np.ones((2, 2)))
    with pytest.raises(ScopeNotCovered):
        eliminate([f], [0], variables={0, 1})
    with pytest.raises(ScopeNotCovered):
        eliminate([f], [0], evidence={0: 1})


def test_eliminate_matches_enumeration(rng):
    for _ in range(10):
        d = random_diagram(rng, 9, 3)
        cbn = random_cbn(rng, d)
        y = int(rng.integers(0, 9))
        order = min_fill_order(d, keep=[y])
        got = eliminate(cbn.factors(), order)
        expected = np.zeros(2)
        for a, p in enumerate_joint(cbn):
            expected[a[y]] += p
        assert got.scope == (y,)
        assert np.abs(got.values - expected).max() < 1e-9


def test_eliminate_order_invariance(rng):
    d = random_diagram(rng, 9, 2)
    cbn = random_cbn(rng, d)
    ev = {0: 1}
    keep = [4]
    base = eliminate(cbn.factors(), min_fill_order(d, keep=keep + [0]), ev)
    others = [v for v in range(len(d)) if v not in (0, 4)]
    for _ in range(5):
        perm = rng.permutation(others).tolist()
        out = eliminate(cbn.factors(), perm, ev)
        assert np.abs(out.values - base.values).max() < 1e-9


def test_marginal_single_variable():
    d = CausalDiagram.from_edges(["V"], [])
    cbn = Cbn(d, [Cpt.from_rows(d, 0, [[0.4, 0.6]])])
    assert np.allclose(marginal(cbn, [0]).values, [0.4, 0.6])


def test_marginal_chain7_matches_enumeration(rng):
    d = chain(7).diagram()
    cbn = random_cbn(rng, d)
    got = marginal(cbn, [6])
    expected = np.zeros(2)
    for a, p in enumerate_joint(cbn):
        expected[a[6]] += p
    assert np.abs(got.values - expected).max() < 1e-12


def test_marginal_with_evidence_matches_enumeration(rng):
    d = random_diagram(rng, 7, 2)
    cbn = random_cbn(rng, d)
    got = marginal(cbn, [5, 2], {0: 1, 3: 0})
    table = np.zeros((2, 2))
    for a, p in enumerate_joint(cbn):
        if a[0] == 1 and a[3] == 0:
            table[a[2], a[5]] += p
    assert np.abs(got.values - table / table.sum()).max() < 1e-12


def test_zero_probability_evidence():
    d = CausalDiagram.from_edges(["A", "B"], [("A", "B")])
    cbn = Cbn(d, [Cpt.from_rows(d, 0, [[1.0, 0.0]]), Cpt.from_rows(d, 1, [[1.0, 0.0], [0.0, 1.0]])])
    with pytest.raises(ZeroProbabilityEvidence):
        marginal(cbn, [0], {1: 1})
    with pytest.raises(ZeroProbabilityEvidence):
        brute_force_marginal(cbn, [0], {1: 1})


def test_brute_force_full_joint_and_point_mass(rng):
    d = random_diagram(rng, 5)
    cbn = random_cbn(rng, d)
    joint = brute_force_marginal(cbn, range(5))
    for a, p in enumerate_joint(cbn):
        assert abs(joint.values[a] - p) < 1e-15
    det = CausalDiagram.from_edges(["A", "B", "C"], [("A", "B"), ("B", "C")])
    flip = [[0.0, 1.0], [1.0, 0.0]]
    cbn = Cbn(det, [Cpt.from_rows(det, 0, [[0.0, 1.0]]), Cpt.from_rows(det, 1, flip), Cpt.from_rows(det, 2, flip)])
    out = brute_force_marginal(cbn, [0, 1, 2])
    assert out.values[1, 0, 1] == 1.0 and out.values.sum() == 1.0


def test_brute_force_guard():
    d = CausalDiagram.from_edges([f"V{i}" for i in range(25)], [])
    cbn = Cbn(d, [Cpt.from_rows(d, i, [[0.5, 0.5]]) for i in range(25)])
    with pytest.raises(TooLarge):
        full_joint(cbn)


def test_underflow_guard_keeps_ratios():
    # 400 independent parents of a single child: the product of their
    # evidence probabilities underflows float64 without rescaling
    n = 400
    names = [f"P{i}" for i in range(n)] + ["C"]
    d = CausalDiagram.from_edges(names, [])
    cpts = [Cpt.from_rows(d, i, [[1e-3, 1 - 1e-3]]) for i in range(n)]
    cpts.append(Cpt.from_rows(d, n, [[0.3, 0.7]]))
    cbn = Cbn(d, cpts)
    evidence = {i: 0 for i in range(n)}
    out = marginal(cbn, [n], evidence)
    assert np.allclose(out.values, [0.3, 0.7])
    joint = eliminate(cbn.factors(), [], evidence)
    assert joint.values.sum() == 0.0 or np.isfinite(joint.values).all()


def test_chain_runtime_is_roughly_linear(rng):
    def best_time(n):
        d = chain(n).diagram()
        cbn = random_cbn(rng, d)
        best = np.inf
        for _ in range(5):
            start = time.perf_counter()
            marginal(cbn, [n - 1], {0: 1})
            best = min(best, time.perf_counter() - start)
        return best

    assert best_time(99) / best_time(9) <= 25
