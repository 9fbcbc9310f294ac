import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from instances import random_complex, random_graph
from pliso import (
    CarrierMap,
    ComplexError,
    build_complex,
    closed_star,
    schedule_value,
    shell_decomposition,
    subdivide_edges,
    subdivide_params,
)


def path(n):
    return build_complex(range(n), [[i, i + 1] for i in range(n - 1)])


class TestBuild:
    def test_triangle_closure(self):
        X = build_complex([0, 1, 2], [[0, 1, 2]])
        assert X.n_vertices == 3
        assert len(X.edges) == 3
        assert X.simplices_of_dim(2) == [(0, 1, 2)]

    def test_single_point(self):
        X = build_complex([0], [[0]])
        assert X.n_vertices == 1
        assert X.dimension == 0
        assert X.simplices == frozenset({(0,)})

    def test_path_dimension(self):
        X = path(4)
        assert X.dimension == 1
        assert X.edges == ((0, 1), (1, 2), (2, 3))

    def test_labels_are_normalized(self):
        X = build_complex(["a", "b", "c"], [["c", "a"]])
        assert X.edges == ((0, 2),)
        assert X.relabeled_simplices()[-1] == ["a", "c"]

    @pytest.mark.parametrize(
        "verts, simplices",
        [([0, 0], [[0]]), ([0, 1], [[0, 2]]), ([0, 1], []), ([0, 1], [[]]), ([0, 1], [[0, 0]])],
    )
    def test_rejects_bad_input(self, verts, simplices):
        with pytest.raises(ComplexError):
            build_complex(verts, simplices)

    def test_closure_idempotent(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            X = random_complex(rng)
            Y = build_complex(range(X.n_vertices), X.simplices)
            assert Y == X


class TestStarsAndShells:
    def test_star_of_middle_vertex(self):
        assert closed_star(path(4), 1) == {(0,), (1,), (2,), (0, 1), (1, 2)}

    def test_star_of_isolated_vertex(self):
        X = build_complex([0, 1], [[0]])
        assert closed_star(X, 1) == {(1,)}

    @pytest.mark.parametrize("v", [0, 1, 2])
    def test_star_of_triangle_is_everything(self, v):
        X = build_complex([0, 1, 2], [[0, 1, 2]])
        assert closed_star(X, v) == X.simplices

    def test_path_shells(self):
        sh = shell_decomposition(path(4), 0)
        assert sh.shells == (
            frozenset({(0,), (1,), (0, 1)}),
            frozenset({(2,), (1, 2)}),
            frozenset({(3,), (2, 3)}),
        )
        assert sh.shell_of((2, 3)) == 2

    def test_triangle_one_shell(self):
        X = build_complex([0, 1, 2], [[0, 1, 2]])
        for v in range(3):
            assert len(shell_decomposition(X, v)) == 1

    def test_star_graph_center_one_shell(self):
        X = build_complex(range(6), [[0, i] for i in range(1, 6)])
        assert len(shell_decomposition(X, 0)) == 1

    def test_disconnected_continues_from_smallest_uncovered(self):
        X = build_complex(range(4), [[0, 1], [2, 3]])
        sh = shell_decomposition(X, 1)
        assert sh.shells[1] == frozenset({(2,), (3,), (2, 3)})

    def test_unknown_vertex(self):
        with pytest.raises(ComplexError):
            shell_decomposition(path(3), 7)

    def test_random_partition_and_star(self):
        rng = np.random.default_rng(11)
        for _ in range(100):
            X = random_complex(rng)
            for v in range(X.n_vertices):
                sh = shell_decomposition(X, v)
                assert sh.shells[0] == closed_star(X, v)
                assert sum(len(s) for s in sh.shells) == len(X.simplices)
                assert frozenset().union(*sh.shells) == X.simplices

    def test_schedule_value_repeats_last(self):
        assert schedule_value([0.5, 0.2], 0) == 0.5
        assert schedule_value([0.5, 0.2], 5) == 0.2
        with pytest.raises(ValueError):
            schedule_value([], 0)


class TestSubdivision:
    def test_single_edge_midpoint(self):
        X = build_complex([0, 1], [[0, 1]])
        child, carrier = subdivide_edges(X, {(0, 1): 2})
        assert child.edges == ((0, 2), (1, 2))
        simplex, weights = carrier.entries[2]
        assert simplex == (0, 1)
        assert weights == (0.5, 0.5)

    def test_identity_plan(self):
        X = path(3)
        child, carrier = subdivide_edges(X, {e: 1 for e in X.edges})
        assert child.simplices == X.simplices
        assert np.array_equal(carrier.weights_matrix(), np.eye(3))

    def test_path_of_two_into_six(self):
        X = path(3)
        child, _ = subdivide_edges(X, {e: 3 for e in X.edges})
        assert len(child.edges) == 6
        assert child.n_vertices == 7

    def test_parent_vertices_reproduced_exactly(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            X = random_graph(rng)
            P = rng.normal(size=(X.n_vertices, 3))
            plan = {e: int(rng.integers(1, 5)) for e in X.edges}
            child, carrier = subdivide_edges(X, plan)
            Q = carrier.evaluate(P)
            assert np.array_equal(Q[: X.n_vertices], P)
            assert len(child.edges) == sum(plan.values())

    def test_params_validation(self):
        X = path(2)
        for bad in ([0.0], [0.5, 0.4], [1.0]):
            with pytest.raises(ComplexError):
                subdivide_params(X, {(0, 1): bad})
        with pytest.raises(ComplexError):
            subdivide_edges(X, {(0, 1): 0})

    def test_higher_simplex_edge_cannot_split(self):
        X = build_complex([0, 1, 2], [[0, 1, 2]])
        with pytest.raises(ComplexError):
            subdivide_edges(X, {(0, 1): 2})

    def test_edge_map_parameters(self):
        X = path(2)
        child, carrier = subdivide_params(X, {(0, 1): [0.25, 0.75]})
        idx, t0, t1 = carrier.edge_map
        spans = sorted(zip(np.minimum(t0, t1), np.maximum(t0, t1)))
        assert spans == [(0.0, 0.25), (0.25, 0.75), (0.75, 1.0)]
        assert np.all(idx == 0)

    def test_compose_matches_direct_evaluation(self):
        rng = np.random.default_rng(9)
        X = random_graph(rng)
        P = rng.normal(size=(X.n_vertices, 2))
        c1, k1 = subdivide_edges(X, {e: 3 for e in X.edges})
        c2, k2 = subdivide_edges(c1, {e: 2 for e in c1.edges})
        direct = k2.evaluate(k1.evaluate(P))
        assert np.allclose(k1.compose(k2).evaluate(P), direct, atol=1e-14)

    def test_from_entries_round_trip(self):
        X = path(2)
        child, carrier = subdivide_edges(X, {(0, 1): 4})
        again = CarrierMap.from_entries(X, child, carrier.entries)
        assert np.array_equal(again.support, carrier.support)
        assert np.allclose(again.t, carrier.t)

    def test_rejects_non_edge_support(self):
        X = path(3)
        child, _ = subdivide_edges(X, {(0, 1): 2})
        with pytest.raises(ComplexError):
            CarrierMap(X, child, [[0, 0], [1, 1], [2, 2], [0, 2]], [0, 0, 0, 0.5])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=1, max_size=6))
def test_subdivided_path_length_property(counts):
    X = path(len(counts) + 1)
    child, carrier = subdivide_edges(X, dict(zip(X.edges, counts)))
    assert len(child.edges) == sum(counts)
    idx, t0, t1 = carrier.edge_map
    assert np.isclose(np.sum(np.abs(t1 - t0)), len(counts))
