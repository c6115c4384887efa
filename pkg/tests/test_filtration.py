from itertools import combinations

import numpy as np
import pytest

from topopath.filtration import (
    Filtration,
    FiltrationError,
    Simplex,
    build_vr,
    simplex_sort_key,
)

from oracles import brute_force_vr


def random_distance_matrix(rng, n, scale=1.0):
    upper = rng.uniform(0.05, scale, size=(n, n))
    d = np.triu(upper, k=1)
    return d + d.T


class TestSimplex:
    def test_dim(self):
        assert Simplex((3,), 0.0).dim == 0
        assert Simplex((1, 4, 6), 0.5).dim == 2

    def test_vertices_must_increase(self):
        with pytest.raises(FiltrationError):
            Simplex((2, 1), 0.1)
        with pytest.raises(FiltrationError):
            Simplex((1, 1), 0.1)

    def test_faces(self):
        assert set(Simplex((0, 2, 5), 0.3).faces()) == {(2, 5), (0, 5), (0, 2)}
        assert list(Simplex((4,), 0.0).faces()) == []


class TestBuildVR:
    def test_single_edge(self):
        d = np.array([[0.0, 0.4], [0.4, 0.0]])
        filtration = build_vr(d, threshold=0.5, max_dim=2)
        assert [(s.vertices, s.value) for s in filtration] == [
            ((0,), 0.0), ((1,), 0.0), ((0, 1), 0.4),
        ]

    def test_triangle_tie_break_by_dimension(self):
        d = np.full((3, 3), 0.2)
        np.fill_diagonal(d, 0.0)
        filtration = build_vr(d, threshold=0.5, max_dim=2)
        kinds = [(s.dim, s.value) for s in filtration]
        assert kinds == [(0, 0.0)] * 3 + [(1, 0.2)] * 3 + [(2, 0.2)]

    def test_threshold_cut(self):
        d = np.array([[0.0, 0.6], [0.6, 0.0]])
        filtration = build_vr(d, threshold=0.5, max_dim=2)
        assert [s.vertices for s in filtration] == [(0,), (1,)]

    def test_edge_at_threshold_included(self):
        d = np.array([[0.0, 0.5], [0.5, 0.0]])
        filtration = build_vr(d, threshold=0.5, max_dim=1)
        assert (0, 1) in [s.vertices for s in filtration]

    def test_counts_match_clique_oracle(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            n = int(rng.integers(3, 16))
            d = random_distance_matrix(rng, n)
            threshold = float(rng.uniform(0.2, 0.9))
            max_dim = int(rng.integers(1, 4))
            filtration = build_vr(d, threshold, max_dim)
            expected = brute_force_vr(d, threshold, max_dim)
            got = sorted((s.vertices, s.value) for s in filtration)
            assert got == sorted(expected)

    def test_diameter_recomputed(self):
        rng = np.random.default_rng(5)
        d = random_distance_matrix(rng, 10)
        filtration = build_vr(d, 0.8, 3)
        for s in filtration:
            expected = max(
                (d[a, b] for a, b in combinations(s.vertices, 2)), default=0.0
            )
            assert s.value == expected

    def test_monotone_under_faces(self):
        rng = np.random.default_rng(6)
        d = random_distance_matrix(rng, 12)
        filtration = build_vr(d, 0.7, 2)
        for s in filtration:
            for face in s.faces():
                assert filtration[filtration.position(face)].value <= s.value

    def test_face_closure_and_order(self):
        rng = np.random.default_rng(9)
        d = random_distance_matrix(rng, 14)
        filtration = build_vr(d, 0.6, 2)
        filtration.validate()
        keys = [simplex_sort_key(s) for s in filtration]
        assert keys == sorted(keys)

    def test_zero_distance_pairs_produce_zero_value_edges(self):
        d = np.zeros((2, 2))
        filtration = build_vr(d, 0.5, 1)
        edge = filtration[filtration.position((0, 1))]
        assert edge.value == 0.0

    def test_parameter_validation(self):
        d = np.zeros((2, 2))
        with pytest.raises(ValueError):
            build_vr(d, 0.0, 1)
        with pytest.raises(ValueError):
            build_vr(d, 0.5, 0)
        with pytest.raises(ValueError):
            build_vr(d, 0.5, 4)


class TestFiltrationStructure:
    def test_validate_rejects_missing_face(self):
        filtration = Filtration(
            simplexes=(Simplex((0,), 0.0), Simplex((1,), 0.0), Simplex((0, 2), 0.1)),
            threshold=0.5,
            max_dim=1,
        )
        with pytest.raises(FiltrationError, match="missing face"):
            filtration.validate()

    def test_validate_rejects_face_after_coface(self):
        filtration = Filtration(
            simplexes=(Simplex((0,), 0.0), Simplex((0, 1), 0.1), Simplex((1,), 0.0)),
            threshold=0.5,
            max_dim=1,
        )
        with pytest.raises(FiltrationError):
            filtration.validate()

    def test_validate_rejects_value_above_threshold(self):
        filtration = Filtration(
            simplexes=(Simplex((0,), 0.0), Simplex((1,), 0.0), Simplex((0, 1), 0.9)),
            threshold=0.5,
            max_dim=1,
        )
        with pytest.raises(FiltrationError, match="threshold"):
            filtration.validate()

    def test_text_export_format(self):
        d = np.array([[0.0, 0.25], [0.25, 0.0]])
        filtration = build_vr(d, 0.5, 1)
        lines = filtration.to_text().splitlines()
        assert lines[0] == "0.0\t0"
        assert lines[2] == "0.25\t0,1"
