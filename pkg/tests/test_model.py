import itertools
import json

import numpy as np
import pytest

from cbnlearn.errors import CyclicGraph, InvalidModel, LatentWithParents, StateOutOfRange, UnknownVariable
from cbnlearn.model import (
    CausalDiagram,
    Cpt,
    Kind,
    Query,
    Variable,
    cbn_from_json,
    cbn_to_json,
    diagram_from_json,
    latentify_sources,
    load_model,
    project_to_admg,
    save_model,
    topological_order,
    truncate,
)
from cbnlearn.structures import chain

from conftest import random_cbn, random_diagram


def test_topological_order_empty():
    assert topological_order(CausalDiagram([], [])) == []


def test_topological_order_latent_first():
    d = CausalDiagram.from_edges(["V0", "V1", "U0"], [("U0", "V0"), ("V0", "V1")], latent=["U0"])
    assert [d.names[i] for i in topological_order(d)] == ["U0", "V0", "V1"]


def test_two_cycle_rejected():
    with pytest.raises(CyclicGraph):
        CausalDiagram.from_edges(["V0", "V1"], [("V0", "V1"), ("V1", "V0")])


def test_topological_order_breaks_ties_by_id():
    d = CausalDiagram.from_edges(["A", "B", "C", "D"], [("C", "A")])
    assert topological_order(d) == [1, 2, 0, 3]


def test_latent_with_parents_rejected():
    with pytest.raises(LatentWithParents):
        CausalDiagram.from_edges(["A", "U"], [("A", "U")], latent=["U"])


def test_duplicate_parents_and_bad_ids_rejected():
    vs = [Variable(0, "A", 2), Variable(1, "B", 2)]
    with pytest.raises(InvalidModel):
        CausalDiagram(vs, [[], [0, 0]])
    with pytest.raises(InvalidModel):
        CausalDiagram(vs, [[], [5]])
    with pytest.raises(InvalidModel):
        CausalDiagram([Variable(1, "A", 2)], [[]])


def test_truncate():
    d = chain(7).diagram()
    assert truncate(d, []) is d
    cut = truncate(d, [0])
    assert cut.parents[0] == ()
    assert all(cut.parents[i] == d.parents[i] for i in range(1, len(d)))
    # the latent confounding V0 and V2 keeps its edge into V2 only
    assert d.id_of("U0") in cut.parents[2]
    assert truncate(cut, [0]) == cut


def test_truncate_middle_of_chain():
    d = CausalDiagram.from_edges(["V0", "V1", "V2"], [("V0", "V1"), ("V1", "V2")])
    cut = truncate(d, ["V1"])
    assert cut.parents == ((), (), (1,))


def test_truncate_unknown_variable():
    with pytest.raises(UnknownVariable):
        truncate(chain(3).diagram(), ["nope"])


def test_project_chain7():
    admg = project_to_admg(chain(7).diagram())
    assert admg.nodes == tuple(f"V{i}" for i in range(7))
    assert admg.directed == frozenset((f"V{i}", f"V{i + 1}") for i in range(6))
    assert admg.bidirected == frozenset(
        {frozenset({"V0", "V2"}), frozenset({"V2", "V4"}), frozenset({"V4", "V6"})}
    )


def test_project_no_latents_and_clique():
    d = CausalDiagram.from_edges(["A", "B"], [("A", "B")])
    assert project_to_admg(d).bidirected == frozenset()
    d = CausalDiagram.from_edges(
        ["A", "B", "C", "U", "W"], [("U", "A"), ("U", "B"), ("U", "C"), ("W", "A")], latent=["U", "W"]
    )
    admg = project_to_admg(d)
    assert admg.bidirected == frozenset(frozenset(p) for p in [("A", "B"), ("A", "C"), ("B", "C")])
    assert admg.nodes == ("A", "B", "C")


def test_latentify_sources():
    d = CausalDiagram.from_edges(["S", "A", "B", "C"], [("S", "A"), ("S", "B"), ("A", "C")])
    out = latentify_sources(d)
    assert [v.kind for v in out.variables] == [Kind.LATENT, Kind.OBSERVED, Kind.OBSERVED, Kind.OBSERVED]
    plain = CausalDiagram.from_edges(["A", "B"], [("A", "B")])
    assert latentify_sources(plain) == plain
    two = CausalDiagram.from_edges(
        ["S", "T", "A", "B"], [("S", "A"), ("S", "B"), ("T", "A"), ("T", "B")]
    )
    assert latentify_sources(two).latents == (0, 1)


def test_latentify_then_project_matches_children_pairs(rng):
    for _ in range(30):
        n = int(rng.integers(3, 16))
        d = random_diagram(rng, n, edge_prob=0.3)
        lat = latentify_sources(d)
        kids = lat.children()
        expected = set()
        for u in lat.latents:
            for a, b in itertools.combinations(kids[u], 2):
                if not lat.variables[a].latent and not lat.variables[b].latent:
                    expected.add(frozenset((lat.names[a], lat.names[b])))
        assert project_to_admg(lat).bidirected == expected


def test_cpt_validation():
    d = CausalDiagram.from_edges(["A", "B"], [("A", "B")])
    with pytest.raises(InvalidModel):
        Cpt.from_rows(d, 1, [[0.5, 0.5], [0.7, 0.4]]).validate()
    with pytest.raises(InvalidModel):
        Cpt.from_rows(d, 1, [[0.5, 0.5]])
    Cpt.from_rows(d, 1, [[0.5, 0.5], [0.1, 0.9]]).validate()


def test_joint_sums_to_one(rng):
    from conftest import enumerate_joint

    d = random_diagram(rng, 6, 2)
    cbn = random_cbn(rng, d)
    total = sum(p for _, p in enumerate_joint(cbn))
    assert abs(total - 1) < 1e-6


def test_query_validation():
    d = chain(3).diagram()
    Query({2}, {0: 1}).validate(d)
    with pytest.raises(InvalidModel):
        Query({2}, {2: 0}).validate(d)
    with pytest.raises(InvalidModel):
        Query({d.id_of("U0")}).validate(d)
    with pytest.raises(StateOutOfRange):
        Query({2}, {0: 2}).validate(d)


def test_json_roundtrip(tmp_path, rng):
    d = random_diagram(rng, 5, 2, card=3)
    cbn = random_cbn(rng, d)
    path = tmp_path / "m.json"
    save_model(cbn, path)
    back = load_model(path)
    assert back.diagram == d
    for a, b in zip(cbn.cpts, back.cpts):
        assert np.array_equal(a.table.values, b.table.values)


def test_json_layout_rows_are_parent_configs():
    d = CausalDiagram.from_edges(["A", "B", "C"], [("A", "C"), ("B", "C")], cards={"A": 2, "B": 3, "C": 2})
    rows = [[i / 10, 1 - i / 10] for i in range(6)]
    cpt = Cpt.from_rows(d, 2, rows)
    # row index = a * 3 + b
    assert cpt.table.values[1, 2, 0] == rows[5][0]
    from cbnlearn.model import Cbn

    unif = [Cpt.from_rows(d, 0, [[0.5, 0.5]]), Cpt.from_rows(d, 1, [[1 / 3] * 3]), cpt]
    doc = cbn_to_json(Cbn(d, unif))
    assert doc["cpts"][2] == {"child": "C", "rows": rows}
    assert doc["variables"][2] == {"name": "C", "kind": "observed", "cardinality": 2, "parents": ["A", "B"]}


def test_json_rejects_unknown_fields():
    doc = {"variables": [{"name": "A", "kind": "observed", "cardinality": 2, "parents": [], "x": 1}]}
    with pytest.raises(InvalidModel):
        diagram_from_json(doc)
    doc = {"variables": [{"name": "A", "kind": "observed", "cardinality": 2, "parents": []}],
           "cpts": [{"child": "A", "rows": [[0.5, 0.5]], "note": ""}]}
    with pytest.raises(InvalidModel):
        cbn_from_json(doc)
    with pytest.raises(InvalidModel):
        diagram_from_json({"variables": [], "extra": 1})


def test_json_float_precision(tmp_path):
    d = CausalDiagram.from_edges(["A"], [])
    from cbnlearn.model import Cbn

    p = 0.1234567890123456789
    cbn = Cbn(d, [Cpt.from_rows(d, 0, [[p, 1 - p]])])
    text = json.dumps(cbn_to_json(cbn))
    assert repr(p) in text
    assert cbn_from_json(json.loads(text)).cpts[0].rows()[0, 0] == p
