import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nbmatch.instance import InfeasibleInstanceError, Kind, MarketInstance, gen_random, normalize
from nbmatch.mwu import (
    DualState,
    best_bundle,
    cp_values,
    default_iterations,
    rescale,
    solve_liad,
    solve_sad,
)


def linear(u, c=None):
    return MarketInstance(Kind.ONE_SIDED_LINEAR, np.array(u, dtype=float), c)


def bang_denominators(inst, d):
    return (d.p[None, :] + d.q[:, None]) / np.where(inst.u > 0, inst.u, np.nan)


class TestRescale:
    def test_fisher_two_agents(self):
        d = rescale(DualState(np.ones(2), np.ones(2)), linear(np.eye(2)))
        np.testing.assert_allclose(d.p, [0.5, 0.5])
        np.testing.assert_allclose(d.q, [0.5, 0.5])

    def test_single_agent_with_disagreement(self):
        d = rescale(DualState(np.ones(1), np.ones(1)), linear([[1.0]], [0.5]))
        np.testing.assert_allclose(d.p, [1.0])
        np.testing.assert_allclose(d.q, [1.0])

    def test_idempotent(self):
        inst = gen_random(5, Kind.ONE_SIDED_LINEAR, 2, endowment_delta=1.0)
        rng = np.random.default_rng(0)
        d = rescale(DualState(1 + rng.random(5), 1 + rng.random(5)), inst)
        dd = rescale(d, inst)
        np.testing.assert_allclose(dd.p, d.p, rtol=1e-14)
        np.testing.assert_allclose(dd.q, d.q, rtol=1e-14)

    def test_infeasible_signalled(self):
        with pytest.raises(InfeasibleInstanceError):
            rescale(DualState(np.ones(1), np.ones(1)), linear([[1.0]], [2.0]))

    @given(st.integers(0, 2**32 - 1), st.integers(2, 6))
    def test_price_sum_identity(self, seed, n):
        rng = np.random.default_rng(seed)
        inst = gen_random(n, Kind.ONE_SIDED_LINEAR, seed % 1000, endowment_delta=0.5 + rng.random())
        d = rescale(DualState(1 + 5 * rng.random(n), 1 + 5 * rng.random(n)), inst)
        target = n + float(inst.c @ np.nanmin(bang_denominators(inst, d), axis=1))
        total = d.p.sum() + d.q.sum()
        assert abs(total - target) <= 1e-12 * target

    def test_price_sum_identity_splc(self):
        inst = gen_random(4, Kind.ONE_SIDED_SPLC, 3, endowment_delta=1.0)
        rng = np.random.default_rng(1)
        h = 1 + rng.random(inst.u.shape)
        d = rescale(DualState(1 + rng.random(4), 1 + rng.random(4), h), inst)
        # h holds per-unit segment prices; the corresponding expert weight is l * h
        grid = d.p[None, :, None] + d.q[:, None, None] + d.h
        with np.errstate(divide="ignore"):
            ratio = np.where(inst.u > 0, grid / np.where(inst.u > 0, inst.u, 1), np.inf)
        target = 4 + float(inst.c @ ratio.reshape(4, -1).min(axis=1))
        total = d.p.sum() + d.q.sum() + (d.h * inst.lengths).sum()
        assert total == pytest.approx(target, rel=1e-12)


class TestBestBundle:
    inst = linear([[3, 4], [1, 1]])

    def test_bang_per_buck(self):
        y, cp = best_bundle(0, DualState(np.array([1.0, 2.0]), np.array([0.5, 0.5])), self.inst)
        np.testing.assert_allclose(y, [2 / 3, 0])
        assert cp == pytest.approx(2.0)

    def test_with_disagreement(self):
        inst = linear([[3, 4], [1, 1]], [1.0, 0.0])
        y, cp = best_bundle(0, DualState(np.array([1.0, 2.0]), np.array([0.5, 0.5])), inst)
        np.testing.assert_allclose(y, [1, 0])
        assert cp == pytest.approx(3.0)

    def test_tie_goes_to_lowest_index(self):
        inst = linear([[1, 1], [1, 1]])
        y, cp = best_bundle(0, DualState(np.ones(2), np.zeros(2)), inst)
        np.testing.assert_array_equal(y, [1, 0])
        assert cp == 1.0

    @given(st.integers(0, 2**32 - 1))
    def test_spends_exact_budget(self, seed):
        rng = np.random.default_rng(seed)
        inst = gen_random(4, Kind.ONE_SIDED_LINEAR, seed % 997, endowment_delta=1.0)
        d = DualState(rng.uniform(0.1, 2, 4), rng.uniform(0.1, 2, 4))
        for i in range(4):
            y, cp = best_bundle(i, d, inst)
            spend = float(((d.p + d.q[i]) * y).sum())
            budget = 1 + inst.c[i] * np.nanmin(bang_denominators(inst, d)[i])
            assert spend == pytest.approx(budget, rel=1e-12)
            assert cp == pytest.approx(cp_values(d, inst)[i], rel=1e-12)


def test_default_iterations():
    assert default_iterations(10, 0.1) == math.ceil(8 * 20 * math.log(20) / 0.01)
    assert default_iterations(10, 0.1) == 47932


class TestSolveLiad:
    def test_identity(self):
        res = solve_liad(linear(np.eye(4)), 0.1)
        assert res.overload <= 0.3
        u = np.einsum("ij,ij->i", np.eye(4), res.x)
        assert np.all(u >= 1 - 0.3)

    def test_uniform(self):
        res = solve_liad(linear(np.ones((4, 4))), 0.1)
        assert np.all(np.abs(res.utilities - 1) <= 0.3)

    def test_random_certificates(self):
        inst = gen_random(10, Kind.ONE_SIDED_LINEAR, 3, endowment_delta=1.0)
        res = solve_liad(inst, 0.1)
        assert res.iterations == default_iterations(10, 0.1)
        assert res.overload <= 0.3
        assert np.all(res.cp <= res.utilities + 1e-9)

    def test_trace_invariants(self):
        inst = gen_random(6, Kind.ONE_SIDED_LINEAR, 5, endowment_delta=0.5)
        res = solve_liad(inst, 0.2, T=3000)
        tr = res.trace
        assert np.all(tr.sigma > 0)
        # update factors bounded by 1 + eps
        assert np.all(tr.sigma * np.maximum(tr.max_row, tr.max_col) <= 1 + 1e-12)
        assert np.all(np.diff(tr.log_phi) >= 0)
        lo, mid, hi = tr.sandwich()
        assert np.all(lo <= mid * (1 + 1e-9))
        assert np.all(mid <= hi * (1 + 1e-9))

    def test_rejects_other_kinds(self):
        with pytest.raises(ValueError, match="mwu unsupported for kind"):
            solve_liad(gen_random(3, Kind.TWO_SIDED_SPLC, 0), 0.1)
        with pytest.raises(ValueError):
            solve_liad(linear(np.eye(2)), 1.5)

    def test_infeasible(self):
        with pytest.raises(InfeasibleInstanceError):
            solve_liad(linear(np.eye(2), [1.0, 1.0]), 0.1)

    def test_trace_csv(self, tmp_path):
        res = solve_liad(linear(np.eye(2)), 0.3, T=10)
        path = tmp_path / "t.csv"
        res.trace.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,sigma,phi,max_row_overload,max_col_overload,objective_of_running_average"
        assert len(lines) == 11


class TestSolveSad:
    def test_single_segment_reproduces_liad(self):
        lin = gen_random(5, Kind.ONE_SIDED_LINEAR, 7, endowment_delta=1.0)
        splc = MarketInstance(Kind.ONE_SIDED_SPLC, lin.u[..., None], lin.c, np.ones(lin.u.shape + (1,)))
        a = solve_liad(lin, 0.15, T=4000)
        b = solve_sad(splc, 0.15, T=4000)
        np.testing.assert_allclose(b.x_bar[..., 0], a.x_bar, atol=1e-9)
        np.testing.assert_allclose(b.p, a.p, rtol=1e-9)
        np.testing.assert_allclose(b.q, a.q, rtol=1e-9)

    def test_single_agent_two_segments(self):
        inst = MarketInstance(Kind.ONE_SIDED_SPLC, [[[1.0, 0.5]]], None, [[[0.5, 0.5]]])
        res = solve_sad(inst, 0.1)
        np.testing.assert_allclose(res.x_bar[0, 0], [0.5, 0.5], atol=0.05)
        assert res.utilities[0] == pytest.approx(0.75, abs=0.03)

    def test_segment_caps(self):
        inst = gen_random(6, Kind.ONE_SIDED_SPLC, 1)
        res = solve_sad(inst, 0.1)
        assert res.segment_overload <= 0.3
        assert np.all(res.x <= inst.lengths + 1e-12)
        assert np.all(res.cp <= res.utilities + 1e-9)
        lo, mid, hi = res.trace.sandwich()
        assert np.all(lo <= mid * (1 + 1e-9)) and np.all(mid <= hi * (1 + 1e-9))

    def test_scaled_output_is_feasible(self):
        inst, _ = normalize(gen_random(5, Kind.ONE_SIDED_SPLC, 9, endowment_delta=1.0))
        res = solve_sad(inst, 0.2)
        assert res.x.sum(axis=(1, 2)).max() <= 1 + 1e-12
        assert res.x.sum(axis=(0, 2)).max() <= 1 + 1e-12
