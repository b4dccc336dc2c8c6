import math

import numpy as np
import pytest

from mtmctrack.assignment import matching_total_weight, solve_max_weight_matching

INF = math.inf


def brute_force_total(w) -> float:
    """Exhaustive enumeration of every matching; the accumulator adds weights
    in row order so the optimum is summed exactly like matching_total_weight."""
    w = np.asarray(w, dtype=float)
    n_rows = w.shape[0] if w.size else 0
    edges = [
        [(j, w[i, j]) for j in range(w.shape[1]) if math.isfinite(w[i, j])]
        for i in range(n_rows)
    ]
    best = 0.0
    stack = [(0, 0, 0.0)]
    while stack:
        i, used, acc = stack.pop()
        while i < n_rows:
            for j, wij in edges[i]:
                if not used & (1 << j):
                    stack.append((i + 1, used | (1 << j), acc + wij))
            i += 1
        if acc > best:
            best = acc
    return best


class TestExamples:
    def test_single_positive_edge(self):
        assert solve_max_weight_matching([[2.0]]) == [(0, 0)]

    def test_two_by_two_diagonal(self):
        w = [[2.0, 1.0], [1.0, 2.0]]
        m = solve_max_weight_matching(w)
        assert m == [(0, 0), (1, 1)]
        assert matching_total_weight(w, m) == 4.0

    def test_all_forbidden(self):
        assert solve_max_weight_matching([[-INF, -INF], [-INF, -INF]]) == []

    def test_negative_edge_skipped_for_better_column(self):
        assert solve_max_weight_matching([[-1.0, 3.0]]) == [(0, 1)]

    def test_negative_edges_never_matched(self):
        assert solve_max_weight_matching([[-1.0]]) == []
        assert solve_max_weight_matching([[-5.0, -2.0], [-3.0, -4.0]]) == []

    def test_empty_matrix(self):
        assert solve_max_weight_matching(np.zeros((0, 4))) == []
        assert solve_max_weight_matching(np.zeros((4, 0))) == []

    def test_rectangular(self):
        assert solve_max_weight_matching([[1.0, 2.0, 3.0]]) == [(0, 2)]
        assert solve_max_weight_matching([[1.0], [2.0], [3.0]]) == [(2, 0)]

    def test_rejects_positive_infinity(self):
        with pytest.raises(ValueError):
            solve_max_weight_matching([[INF]])

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            solve_max_weight_matching([[math.nan]])


class TestTieBreaking:
    def test_equal_columns_pick_smallest(self):
        assert solve_max_weight_matching([[1.0, 1.0]]) == [(0, 0)]

    def test_zero_weight_edges_dropped_when_trailing(self):
        assert solve_max_weight_matching([[0.0]]) == []
        assert solve_max_weight_matching([[5.0, -INF], [-INF, 0.0]]) == [(0, 0)]

    def test_zero_weight_edge_kept_when_lexicographically_earlier(self):
        # {(0,0),(1,1)} and {(1,1)} tie on weight; the former sorts first.
        m = solve_max_weight_matching([[0.0, -INF], [-INF, 5.0]])
        assert m == [(0, 0), (1, 1)]

    def test_swap_tie(self):
        m = solve_max_weight_matching([[1.0, 1.0], [1.0, 1.0]])
        assert m == [(0, 0), (1, 1)]


class TestAgainstBruteForce:
    def test_random_instances_exact(self):
        rng = np.random.default_rng(1234)
        for _ in range(400):
            r = int(rng.integers(1, 8))
            c = int(rng.integers(1, 8))
            w = rng.normal(0.0, 3.0, (r, c))
            w[rng.random((r, c)) < 0.2] = -INF
            m = solve_max_weight_matching(w)
            assert matching_total_weight(w, m) == brute_force_total(w)
            for i, j in m:
                assert math.isfinite(w[i, j])

    def test_matching_is_injective(self):
        rng = np.random.default_rng(77)
        for _ in range(100):
            w = rng.normal(0.0, 2.0, (6, 6))
            w[rng.random((6, 6)) < 0.3] = -INF
            m = solve_max_weight_matching(w)
            rows = [i for i, _ in m]
            cols = [j for _, j in m]
            assert len(set(rows)) == len(rows)
            assert len(set(cols)) == len(cols)

    def test_row_permutation_consistency(self):
        # continuous weights make the optimum unique almost surely, so the
        # solution must map through any row permutation
        rng = np.random.default_rng(99)
        for _ in range(100):
            r, c = int(rng.integers(2, 7)), int(rng.integers(2, 7))
            w = rng.normal(0.0, 3.0, (r, c))
            w[rng.random((r, c)) < 0.2] = -INF
            perm = rng.permutation(r)
            m_perm = solve_max_weight_matching(w[perm])
            mapped = sorted((int(perm[i]), j) for i, j in m_perm)
            assert mapped == solve_max_weight_matching(w)

    def test_large_component_fallback(self):
        # more columns than the DP limit exercises the scipy value fallback
        rng = np.random.default_rng(5)
        w = rng.normal(0.0, 3.0, (4, 24))
        m = solve_max_weight_matching(w)
        assert matching_total_weight(w, m) == pytest.approx(brute_force_total(w), rel=1e-12)
