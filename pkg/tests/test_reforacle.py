import numpy as np
import pytest

from nbmatch.cgd import fw_solve
from nbmatch.certify import nash_objective
from nbmatch.instance import Kind, MarketInstance, gen_random, gen_tightness, normalize
from nbmatch.reforacle import grid_solve


def linear(u, c=None):
    return MarketInstance(Kind.ONE_SIDED_LINEAR, np.array(u, dtype=float), c)


def test_two_by_two_near_identity():
    for res in (1e-3, 1e-4):
        r = grid_solve(linear([[1, 0.5], [0.5, 1]]), res)
        np.testing.assert_allclose(r.x, np.eye(2), atol=1e-9)
        assert r.objective == pytest.approx(0.0, abs=1e-12)


def test_two_by_two_antidiagonal():
    r = grid_solve(linear([[1, 1], [1, 0]]))
    np.testing.assert_allclose(r.x, [[0, 1], [1, 0]], atol=1e-9)
    np.testing.assert_allclose(r.utilities, [1, 1], atol=1e-9)


def test_identity_exact():
    for n in (2, 3):
        r = grid_solve(linear(np.eye(n)), 0.1)
        np.testing.assert_array_equal(r.x, np.eye(n))


def test_non_bipartite_small():
    r = grid_solve(gen_tightness(1), 1e-2, 1e-6)
    # with one middle agent the optimum puts b on edge {1,3} and c on {2,3}, maximizing log b + 2 log c
    assert r.utilities[2] == pytest.approx(2 / 3, abs=1e-4)
    assert r.utilities[0] == pytest.approx(1 / 3, abs=1e-4)


def test_size_and_kind_limits():
    with pytest.raises(ValueError):
        grid_solve(gen_random(4, Kind.ONE_SIDED_LINEAR, 0))
    with pytest.raises(ValueError):
        grid_solve(gen_random(5, Kind.NON_BIPARTITE_LINEAR, 0))
    with pytest.raises(ValueError):
        grid_solve(gen_random(2, Kind.ONE_SIDED_SPLC, 0))


@pytest.mark.parametrize("n", [2, 3])
def test_output_feasible(n):
    for seed in range(5):
        r = grid_solve(gen_random(n, Kind.ONE_SIDED_LINEAR, seed, endowment_delta=0.5))
        assert np.all(r.x >= -1e-12)
        assert np.all(r.x.sum(axis=0) <= 1 + 1e-12) and np.all(r.x.sum(axis=1) <= 1 + 1e-12)


def test_refinement_monotone():
    for seed in range(5):
        inst = gen_random(2, Kind.ONE_SIDED_LINEAR, seed, endowment_delta=0.7)
        coarse = grid_solve(inst, 2e-3, 2e-3)
        fine = grid_solve(inst, 1e-3, 1e-3)
        assert fine.objective >= coarse.objective - coarse.error_bound


@pytest.mark.parametrize("n", [2, 3])
def test_brackets_fw_objective(n):
    eps = 1e-5
    for seed in range(4):
        inst, _ = normalize(gen_random(n, Kind.ONE_SIDED_LINEAR, seed))
        r = grid_solve(inst)
        x, rep = fw_solve(inst, eps)
        fw_obj = nash_objective(x, inst)
        assert r.objective <= fw_obj + eps + r.error_bound
        assert r.objective >= fw_obj - r.error_bound
