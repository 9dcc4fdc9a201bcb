import itertools

import numpy as np
import pytest

from objaware.assignment import (assignment_cost, box_match_cost, hungarian_solve, match_nouns,
                                 noun_align_cost)

from conftest import random_boxes


def brute_force(cost):
    n, m = cost.shape
    return min(sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))


def test_one_by_one():
    cols = hungarian_solve(np.array([[3.5]]))
    assert list(cols) == [0]


def test_diagonal_zero():
    cost = np.full((3, 3), 100.0)
    np.fill_diagonal(cost, 0.0)
    assert list(hungarian_solve(cost)) == [0, 1, 2]


@pytest.mark.parametrize("n, m", [(1, 4), (2, 2), (3, 5), (4, 4), (5, 7), (6, 6)])
def test_matches_brute_force(rng, n, m):
    for _ in range(50):
        cost = rng.normal(size=(n, m))
        cols = hungarian_solve(cost)
        assert len(set(cols)) == n
        assert assignment_cost(cost, cols) == pytest.approx(brute_force(cost), abs=1e-12)


def test_row_shift_shifts_cost(rng):
    cost = rng.normal(size=(4, 6))
    shifted = cost.copy()
    shifted[2] += 3.25
    a = assignment_cost(cost, hungarian_solve(cost))
    b = assignment_cost(shifted, hungarian_solve(shifted))
    assert b == pytest.approx(a + 3.25, abs=1e-12)
    assert b == pytest.approx(brute_force(shifted), abs=1e-12)


def test_ties_prefer_lowest_column():
    assert list(hungarian_solve(np.zeros((2, 4)))) == [0, 1]


@pytest.mark.parametrize("bad", [np.array([[1.0, np.inf]]), np.array([[np.nan]]), np.zeros((3, 2))])
def test_rejects_bad_input(bad):
    with pytest.raises(ValueError):
        hungarian_solve(bad)


def test_box_match_cost_exact_copies(rng):
    gt = random_boxes(rng, 2)
    pred = random_boxes(rng, 4)
    pred[3], pred[1] = gt[0], gt[1]
    cost = box_match_cost(gt, pred)
    cols = hungarian_solve(cost)
    assert list(cols) == [3, 1]
    assert assignment_cost(cost, cols) == 0.0


def test_box_match_cost_edges(rng):
    assert box_match_cost(np.zeros((0, 4)), random_boxes(rng, 3)).shape == (0, 3)
    with pytest.raises(ValueError):
        box_match_cost(random_boxes(rng, 1), np.zeros((0, 4)))
    b = random_boxes(rng, 1)
    assert box_match_cost(b, b).tolist() == [[0.0]]


def test_box_match_random_brute_force(rng):
    for _ in range(20):
        cost = box_match_cost(random_boxes(rng, 3), random_boxes(rng, 6))
        assert assignment_cost(cost, hungarian_solve(cost)) == pytest.approx(brute_force(cost), abs=1e-12)


def test_noun_align_identity_on_orthonormal():
    basis = np.eye(5)
    cost = noun_align_cost(basis[:3], basis)
    cols = hungarian_solve(cost)
    assert list(cols) == [0, 1, 2]
    assert assignment_cost(cost, cols) == pytest.approx(-3.0)


def test_noun_align_scale_invariant(rng):
    nouns, names = rng.normal(size=(3, 8)), rng.normal(size=(5, 8))
    scaled = nouns * rng.uniform(0.1, 10, size=(3, 1))
    np.testing.assert_allclose(noun_align_cost(nouns, names), noun_align_cost(scaled, names * 7.0), atol=1e-14)


def test_noun_align_random_brute_force(rng):
    for _ in range(20):
        nouns = rng.normal(size=(3, 16))
        names = rng.normal(size=(12, 16))
        cost = noun_align_cost(nouns, names)
        _, cols = match_nouns(nouns, names)
        assert assignment_cost(cost, cols) == pytest.approx(brute_force(cost), abs=1e-12)


def test_noun_align_rejects_zero_vector():
    with pytest.raises(ValueError):
        noun_align_cost(np.zeros((1, 3)), np.ones((2, 3)))


def test_match_nouns_truncates_to_first_k(rng):
    ni, qi = match_nouns(rng.normal(size=(6, 4)), rng.normal(size=(4, 4)))
    assert list(ni) == [0, 1, 2, 3]
    assert sorted(qi) == [0, 1, 2, 3]
