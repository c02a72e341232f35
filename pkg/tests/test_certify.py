import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from reference import slsqp_optimum

from nbmatch.certify import (
    approx_feasibility,
    best_response_gain,
    fit_duals,
    kkt_residual,
    nash_objective,
    proportionality_bounds,
    proportionality_check,
)
from nbmatch.cgd import fw_solve
from nbmatch.instance import Kind, MarketInstance, gen_random, gen_tightness, normalize
from nbmatch.mwu import DualState, solve_liad
from nbmatch.reforacle import grid_solve


def linear(u, c=None):
    return MarketInstance(Kind.ONE_SIDED_LINEAR, np.array(u, dtype=float), c)


class TestNashObjective:
    def test_identity(self):
        assert nash_objective(np.eye(3), linear(np.eye(3))) == 0.0

    def test_boundary_is_minus_inf(self):
        assert nash_objective(np.zeros((2, 2)), linear(np.eye(2))) == -math.inf
        assert nash_objective(np.eye(2), linear(np.eye(2), [1.0, 0.0])) == -math.inf

    def test_uniform_half(self):
        assert nash_objective(np.full((2, 2), 0.5), linear(np.ones((2, 2)))) == 0.0

    def test_two_sided_adds_job_terms(self):
        inst = gen_random(3, Kind.TWO_SIDED_SPLC, 0)
        x = np.zeros(inst.u.shape)
        x[np.arange(3), np.arange(3), 0] = inst.lengths[np.arange(3), np.arange(3), 0]
        expect = np.log(inst.agent_utilities(x)).sum() + np.log(inst.job_utilities(x)).sum()
        assert nash_objective(x, inst) == pytest.approx(expect)

    @given(st.integers(0, 2**32 - 1))
    def test_permutation_symmetry(self, seed):
        rng = np.random.default_rng(seed)
        u = rng.uniform(0.1, 1, (4, 4))
        x = rng.dirichlet(np.ones(4), 4) * 0.9
        perm = rng.permutation(4)
        a = nash_objective(x, linear(u))
        b = nash_objective(x[perm], linear(u[perm]))
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)

    @given(st.integers(0, 2**32 - 1), st.floats(0.1, 10))
    def test_scale_covariance(self, seed, s):
        rng = np.random.default_rng(seed)
        u = rng.uniform(0.1, 1, (3, 3))
        c = np.array([0.05, 0.0, 0.02])
        x = np.full((3, 3), 1 / 3)
        u2, c2 = u.copy(), c.copy()
        u2[0] *= s
        c2[0] *= s
        assert nash_objective(x, linear(u2, c2)) == pytest.approx(nash_objective(x, linear(u, c)) + math.log(s))


def test_scale_invariance_of_optimal_allocation():
    rng = np.random.default_rng(4)
    for _ in range(5):
        u = rng.uniform(0.1, 1, (2, 2))
        s = rng.uniform(0.2, 5, 2)
        a = grid_solve(linear(u), 1e-3, 1e-7)
        b = grid_solve(linear(u * s[:, None]), 1e-3, 1e-7)
        np.testing.assert_allclose(a.x, b.x, atol=1e-5)


class TestApproxFeasibility:
    def test_exact_matching(self):
        rep = approx_feasibility(np.eye(3), 0.0)
        assert rep.overload == 0.0 and rep.ok

    def test_scaled_identity(self):
        rep = approx_feasibility(1.25 * np.eye(3), 0.25)
        assert rep.overload == 0.25 and rep.ok
        assert not approx_feasibility(1.25 * np.eye(3), 0.2).ok

    def test_segment_caps(self):
        x = np.zeros((1, 1, 2))
        x[0, 0] = [0.6, 0.2]
        rep = approx_feasibility(x, 0.05, np.full((1, 1, 2), 0.5))
        assert rep.segment_overload == pytest.approx(0.1)
        assert not rep.ok

    def test_mwu_output(self):
        inst = gen_random(8, Kind.ONE_SIDED_LINEAR, 1)
        res = solve_liad(inst, 0.1)
        assert approx_feasibility(res.x_bar, 0.3).ok
        assert approx_feasibility(res.x, 1e-12).ok


class TestKkt:
    def test_two_by_two_oracle(self):
        inst = linear([[1, 0.5], [0.5, 1]])
        x = grid_solve(inst, 1e-3, 1e-9).x
        cert = kkt_residual(x, None, inst)
        assert cert.duals_fitted
        assert max(cert.stationarity, cert.complementarity, cert.price_slackness) <= 1e-6

    def test_zero_allocation_zero_prices(self):
        inst = linear(np.eye(2))
        cert = kkt_residual(np.zeros((2, 2)), DualState(np.zeros(2), np.zeros(2)), inst)
        assert cert.stationarity > 0

    def test_fields_nonnegative(self, rng):
        inst = gen_random(4, Kind.ONE_SIDED_SPLC, 0)
        x = np.minimum(rng.dirichlet(np.ones(4), (4,))[..., None] * inst.lengths, inst.lengths)
        cert = kkt_residual(x, None, inst)
        for key, value in cert.to_dict().items():
            if isinstance(value, float) and key != "objective":
                assert value >= 0

    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("endow", [None, 0.8])
    def test_linear_grid_optima(self, n, endow):
        for seed in range(4):
            inst, _ = normalize(gen_random(n, Kind.ONE_SIDED_LINEAR, seed, endowment_delta=endow))
            x = grid_solve(inst, 1e-3, 1e-9).x
            cert = kkt_residual(x, None, inst)
            assert max(cert.stationarity, cert.complementarity, cert.price_slackness) <= 1e-6

    @pytest.mark.parametrize("kind", [Kind.ONE_SIDED_SPLC, Kind.TWO_SIDED_SPLC])
    @pytest.mark.parametrize("endow", [None, 1.0])
    def test_splc_reference_optima(self, kind, endow):
        for seed in range(5):
            for n in (2, 3):
                inst, _ = normalize(gen_random(n, kind, seed, endowment_delta=endow))
                start, _ = fw_solve(inst, 1e-6, step="line_search", max_iters=2000)
                x = slsqp_optimum(inst, start)
                cert = kkt_residual(x, None, inst, tight=1e-7)
                assert max(cert.stationarity, cert.complementarity, cert.price_slackness) <= 1e-6

    def test_mwu_with_own_prices(self):
        inst = gen_random(10, Kind.ONE_SIDED_LINEAR, 3, endowment_delta=1.0)
        res = solve_liad(inst, 0.1)
        cert = kkt_residual(res.x_bar, res.duals, inst)
        assert not cert.duals_fitted
        assert cert.stationarity <= 0.3
        assert cert.complementarity_weighted <= 0.3

    def test_non_bipartite_reports_gap_only(self):
        inst = gen_tightness(1)
        cert = kkt_residual(np.zeros((3, 3)), None, inst, fw_gap=0.5)
        assert cert.fw_gap == 0.5 and cert.stationarity == 0.0

    def test_fit_duals_on_exact_optimum(self):
        inst = linear(np.eye(2))
        d = fit_duals(np.eye(2), inst)
        np.testing.assert_allclose(d.p + d.q, [1, 1], atol=1e-9)


class TestProportionality:
    def test_identity(self):
        rep = proportionality_check(np.eye(3), linear(np.eye(3)))
        np.testing.assert_allclose(rep.margins, 1 - 1 / 6)
        assert rep.ok()

    def test_uniform(self):
        rep = proportionality_check(np.full((4, 4), 0.25), linear(np.ones((4, 4))))
        np.testing.assert_allclose(rep.margins, 0.5)

    def test_tightness_margin_is_small(self):
        ell = 3
        inst = gen_tightness(ell)
        x, _ = fw_solve(inst, 1e-7, step="line_search")
        rep = proportionality_check(x, inst)
        expect = 1 / (ell + 1) - ell / (2 * (2 * ell + 1) ** 2)
        assert rep.margins[-1] == pytest.approx(expect, abs=2e-3)
        assert rep.ok()

    def test_endowment_bound_needs_delta(self):
        with pytest.raises(ValueError):
            proportionality_bounds(gen_random(3, Kind.ONE_SIDED_LINEAR, 0, endowment_delta=1.0))

    def test_endowment_bound_value(self):
        inst = gen_random(3, Kind.ONE_SIDED_LINEAR, 0, endowment_delta=1.0)
        b = proportionality_bounds(inst, delta=1.0, kappa=2.0)
        np.testing.assert_allclose(b, 1 / (2 * 9 * 2 * 2))


class TestBestResponse:
    def test_zero_allocation(self):
        u = np.array([[0.3, 1.0], [1.0, 0.2]])
        rep = best_response_gain(np.zeros((2, 2)), linear(u))
        np.testing.assert_allclose(rep.feasible_gain, [1.0, 1.0])
        assert rep.price_gain is None

    def test_mwu_price_gain(self):
        inst = gen_random(6, Kind.ONE_SIDED_LINEAR, 2)
        res = solve_liad(inst, 0.1)
        rep = best_response_gain(res.x_bar, inst, res.duals)
        assert rep.max_price_gain <= 1e-9

    def test_feasible_gain_nonnegative_when_capacity_left(self):
        inst = linear(np.eye(3))
        rep = best_response_gain(0.5 * np.eye(3), inst)
        np.testing.assert_allclose(rep.feasible_gain, 0.5)
