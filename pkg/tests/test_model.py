import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st

from pdg.model import (
    MAX_WORLDS,
    UNIT,
    UNIT_NAME,
    Cpd,
    Edge,
    Pdg,
    PdgError,
    Variable,
    WorldSpace,
    add_hyperedge,
    build,
    product_variable,
    projection_cpd,
    restrict,
    union,
    validate,
)


def small_pdg():
    return build(
        {"1": ["⋆"], "A": ["a0", "a1"], "B": ["b0", "b1", "b2"]},
        [
            ("pA", "1", "A", [[0.4, 0.6]]),
            ("pB", "A", "B", [[0.2, 0.3, 0.5], [0.1, 0.1, 0.8]], 0.5, 2.0),
        ],
        name="small",
    )


class TestCpd:
    def test_vector_becomes_one_row(self):
        c = Cpd([0.3, 0.7])
        assert c.table.shape == (1, 2)
        assert (c.source_arity, c.target_arity) == (1, 2)

    def test_table_is_read_only(self):
        c = Cpd([[0.5, 0.5]])
        with pytest.raises(ValueError):
            c.table[0, 0] = 1.0

    @pytest.mark.parametrize(
        "table, fragment",
        [
            ([[0.5, 0.49]], "row 0 sums to 0.99"),
            ([[1.0, 0.0], [0.3, 0.6]], "row 1 sums"),
            ([[1.2, -0.2]], "negative entry at row 0, column 1"),
            ([[np.nan, 1.0]], "non-finite"),
        ],
    )
    def test_violations_name_the_row(self, table, fragment):
        assert any(fragment in m for m in Cpd(table).violations())

    def test_row_sum_tolerance(self):
        assert Cpd([[0.5, 0.5 + 5e-10]]).violations() == []
        assert Cpd([[0.5, 0.5 + 5e-9]]).violations()

    def test_point_and_uniform(self):
        assert Cpd.point(3, 1).table.tolist() == [[0, 1, 0]]
        assert Cpd.point(3, 1).is_deterministic()
        assert not Cpd.uniform(2, 4).is_deterministic()
        np.testing.assert_allclose(Cpd.uniform(2, 4).table, 0.25)

    def test_equality_is_by_value(self):
        assert Cpd([[0.5, 0.5]]) == Cpd(np.array([0.5, 0.5]))
        assert hash(Cpd([[0.5, 0.5]])) == hash(Cpd([[0.5, 0.5]]))
        assert Cpd([[0.5, 0.5]]) != Cpd([[0.4, 0.6]])


class TestWorldSpace:
    def test_first_variable_most_significant(self):
        space = WorldSpace((Variable("A", ("0", "1")), Variable("B", ("0", "1", "2"))))
        assert space.size == 6
        assert space.decode(4) == (1, 1)
        assert space.encode((1, 1)) == 4
        assert space.value_indices.tolist() == [[0, 0], [0, 1], [0, 2], [1, 0], [1, 1], [1, 2]]

    def test_column_joint_index(self):
        space = WorldSpace((Variable("A", ("0", "1")), Variable("B", ("0", "1", "2"))))
        idx, arity = space.column(["B", "A"])
        assert arity == 6
        assert idx.tolist() == [0, 2, 4, 1, 3, 5]

    def test_empty_space_has_one_world(self):
        space = WorldSpace(())
        assert space.size == 1
        assert space.column(())[0].tolist() == [0]

    def test_world_cap(self):
        big = tuple(Variable(f"X{i}", ("0", "1")) for i in range(23))
        with pytest.raises(PdgError, match="cap"):
            WorldSpace(big).value_indices
        assert 2**22 == MAX_WORLDS

    @given(st.lists(st.integers(1, 4), min_size=1, max_size=4), st.data())
    def test_encode_decode_roundtrip(self, radices, data):
        space = WorldSpace(tuple(Variable(f"V{i}", tuple(map(str, range(r)))) for i, r in enumerate(radices)))
        i = data.draw(st.integers(0, space.size - 1))
        assert space.encode(space.decode(i)) == i


class TestPdgConstruction:
    def test_build_and_lookup(self):
        pdg = small_pdg()
        assert [v.name for v in pdg.variables] == ["1", "A", "B"]
        assert pdg.labels == ("pA", "pB")
        e = pdg.edge("pB")
        assert (e.alpha, e.beta) == (0.5, 2.0)
        assert validate(pdg) == []

    def test_duplicate_label_rejected(self):
        with pytest.raises(PdgError, match="duplicate"):
            small_pdg().add_edge("pA", "1", "A", [[0.5, 0.5]])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(PdgError, match="shape"):
            small_pdg().add_edge("bad", "A", "B", [[0.5, 0.5]])

    def test_unknown_variable_rejected(self):
        with pytest.raises(PdgError, match="not a declared variable"):
            small_pdg().add_edge("bad", "Z", "B", [[0.2, 0.3, 0.5]])

    @pytest.mark.parametrize("alpha, beta", [(-0.1, 1.0), (1.0, 0.0), (1.0, -1.0), (np.inf, 1.0)])
    def test_weights_validated(self, alpha, beta):
        with pytest.raises(PdgError):
            small_pdg().add_edge("w", "1", "A", [[0.5, 0.5]], alpha, beta)

    def test_alpha_above_one_warns(self):
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            small_pdg().add_edge("w", "1", "A", [[0.5, 0.5]], 1.5, 1.0)
        assert any("alpha" in str(w.message) for w in caught)

    def test_self_loop_allowed(self):
        pdg = small_pdg().add_edge("loop", "A", "A", [[1.0, 0.0], [0.0, 1.0]])
        assert validate(pdg) == []

    def test_removing_an_edge_is_exact_inverse(self):
        pdg = small_pdg()
        grown = pdg.add_edge("extra", "B", "A", [[0.5, 0.5]] * 3)
        assert grown.without_edge("extra") == pdg

    def test_validate_collects_every_problem(self):
        bad = Pdg(
            variables=(UNIT, Variable("A", ("0", "1")), Variable("A", ("0", "1"))),
            edges=(
                Edge("e", UNIT_NAME, "A", Cpd([[0.5, 0.4]])),
                Edge("e", UNIT_NAME, "Q", Cpd([[1.0]]), 1.0, 0.0),
            ),
        )
        messages = [str(v) for v in validate(bad)]
        assert any("declared twice" in m for m in messages)
        assert any("duplicate label" in m for m in messages)
        assert any("row 0 sums" in m for m in messages)
        assert any("'Q' is not a declared variable" in m for m in messages)
        assert any("beta" in m for m in messages)

    def test_weighted_copy(self):
        pdg = small_pdg().weighted(alpha={"pA": 0.0}, beta=3.0)
        assert pdg.edge("pA").alpha == 0.0
        assert pdg.edge("pB").alpha == 0.5
        assert all(e.beta == 3.0 for e in pdg.edges)
        assert not pdg.is_unweighted


class TestHyperedges:
    def test_product_values_and_projections(self):
        a, b = Variable("A", ("0", "1")), Variable("B", ("x", "y", "z"))
        prod = product_variable([a, b])
        assert prod.name == "A×B"
        assert prod.values[:4] == ("0,x", "0,y", "0,z", "1,x")
        proj_b = projection_cpd([a, b], 1)
        assert proj_b.is_deterministic()
        assert proj_b.table.argmax(axis=1).tolist() == [0, 1, 2, 0, 1, 2]

    def test_two_sources_go_through_a_product(self):
        pdg = build({"A": ["0", "1"], "B": ["0", "1"], "C": ["0", "1"]}, [])
        pdg = add_hyperedge(pdg, "c", ["A", "B"], "C", [[0.1, 0.9], [0.2, 0.8], [0.3, 0.7], [0.4, 0.6]])
        assert pdg.products == {"A×B": ("A", "B")}
        assert set(pdg.labels) == {"A×B->>A", "A×B->>B", "c"}
        assert pdg.edge("c").source == "A×B"

    def test_shared_product_is_not_duplicated(self):
        pdg = build({"A": ["0", "1"], "B": ["0", "1"], "C": ["0", "1"], "D": ["0", "1"]}, [])
        pdg = add_hyperedge(pdg, "c", ["A", "B"], "C", [[0.5, 0.5]] * 4)
        pdg = add_hyperedge(pdg, "d", ["A", "B"], "D", [[0.5, 0.5]] * 4)
        assert len(pdg.labels) == 4

    def test_no_sources_means_unit(self):
        pdg = add_hyperedge(build({"A": ["0", "1"]}, []), "p", [], "A", [[0.5, 0.5]])
        assert pdg.edge("p").source == UNIT_NAME
        assert pdg.has_var(UNIT_NAME)

    def test_wrong_row_count(self):
        pdg = build({"A": ["0", "1"], "B": ["0", "1"], "C": ["0", "1"]}, [])
        with pytest.raises(PdgError, match="rows"):
            add_hyperedge(pdg, "c", ["A", "B"], "C", [[0.5, 0.5]] * 3)


class TestUnionRestrict:
    def test_union_merges_variables_and_keeps_both_edges(self):
        a = build({"1": ["⋆"], "X": ["0", "1"]}, [("p", "1", "X", [[0.5, 0.5]])], name="a")
        b = build({"1": ["⋆"], "X": ["0", "1"], "Y": ["0", "1"]}, [("p", "1", "X", [[0.9, 0.1]])], name="b")
        u = union(a, b)
        assert [v.name for v in u.variables] == ["1", "X", "Y"]
        assert u.labels == ("p", "p@b")
        assert u.edge("p@b").cpd == Cpd([[0.9, 0.1]])

    def test_union_rejects_conflicting_values(self):
        a = build({"X": ["0", "1"]}, [])
        b = build({"X": ["0", "1", "2"]}, [])
        with pytest.raises(PdgError, match="different values"):
            union(a, b)

    def test_union_is_commutative_up_to_labels(self):
        a = build({"1": ["⋆"], "X": ["0", "1"]}, [("p", "1", "X", [[0.5, 0.5]])], name="a")
        b = build({"1": ["⋆"], "Y": ["0", "1"]}, [("q", "1", "Y", [[0.2, 0.8]])], name="b")
        ab, ba = union(a, b), union(b, a)
        assert {v.name for v in ab.variables} == {v.name for v in ba.variables}
        assert {(e.label, e.source, e.target, e.cpd) for e in ab.edges} == {
            (e.label, e.source, e.target, e.cpd) for e in ba.edges
        }

    def test_union_is_associative(self):
        parts = [
            build({"1": ["⋆"], n: ["0", "1"]}, [(f"p{n}", "1", n, [[0.5, 0.5]])], name=n) for n in "XYZ"
        ]
        left = union(union(parts[0], parts[1]), parts[2])
        right = union(parts[0], union(parts[1], parts[2]))
        assert left.variables == right.variables
        assert left.edges == right.edges

    def test_restrict_drops_edges_touching_removed_variables(self):
        pdg = small_pdg()
        r = restrict(pdg, ["A", "B"])
        assert [v.name for v in r.variables] == ["A", "B"]
        assert r.labels == ("pB",)
        assert validate(r) == []

    def test_restrict_drops_orphaned_products(self):
        pdg = build({"A": ["0", "1"], "B": ["0", "1"], "C": ["0", "1"]}, [("c", ["A", "B"], "C", [[0.5, 0.5]] * 4)])
        r = restrict(pdg, ["A", "C", "A×B"])
        assert r.products == {}
        # the product node survives as an ordinary variable, its B projection does not
        assert r.labels == ("A×B->>A", "c")
