import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icr.model import ProblemInstance
from icr.subproblems import (
    SubproblemSpec,
    kkt_residual,
    soft_threshold,
    solve_nonneg_weighted_qp,
    solve_weighted_l1_ridge,
)


def inst_1d(y=1.0, lam=0.25):
    return ProblemInstance(A=np.array([[1.0]]), y=np.array([float(y)]), lam=lam,
                           rho=np.array([1.0]))


def spec_for(inst, weights, nonneg=False, **kw):
    return SubproblemSpec(inst=inst, weights=np.asarray(weights, float), nonneg=nonneg, **kw)


def grid_min_1d(objective, lo=-4.0, hi=4.0, n=160_001):
    """Independent scalar oracle: dense grid argmin with one refinement pass."""
    xs = np.linspace(lo, hi, n)
    vals = objective(xs)
    i = int(np.argmin(vals))
    lo2, hi2 = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
    xs2 = np.linspace(lo2, hi2, 10_001)
    return float(xs2[np.argmin(objective(xs2))])


class TestSoftThreshold:
    @pytest.mark.parametrize(
        "v,t,want", [(3.0, 1.0, 2.0), (-0.5, 1.0, 0.0), (-2.5, 1.0, -1.5), (0.0, 0.0, 0.0)]
    )
    def test_examples(self, v, t, want):
        assert soft_threshold(v, t) == want

    def test_negative_threshold_rejected(self):
        with pytest.raises(ValueError):
            soft_threshold(1.0, -0.1)

    @given(v=st.floats(-1e6, 1e6), t=st.floats(0, 1e6))
    def test_piecewise_definition(self, v, t):
        out = soft_threshold(v, t)
        if abs(v) <= t:
            assert out == 0.0
        else:
            assert out == pytest.approx(np.sign(v) * (abs(v) - t))

    @given(v=st.floats(-1e3, 1e3), t=st.floats(0, 1e3))
    def test_never_increases_magnitude_or_flips_sign(self, v, t):
        out = soft_threshold(v, t)
        assert abs(out) <= abs(v) + 1e-12
        assert out * v >= 0.0


class TestUnconstrainedSolver:
    def test_one_dimensional_closed_form(self):
        # x = (|y| - w/2) / (1 + lam) when positive
        inst = inst_1d(y=1.0, lam=0.25)
        sol = solve_weighted_l1_ridge(spec_for(inst, [0.5]))
        assert sol.converged
        assert sol.x[0] == pytest.approx(0.6, abs=1e-8)
        oracle = grid_min_1d(lambda x: (1.0 - x) ** 2 + 0.25 * x**2 + 0.5 * np.abs(x))
        assert sol.x[0] == pytest.approx(oracle, abs=1e-3)

    def test_zero_observation_gives_zero(self):
        inst = ProblemInstance(A=np.eye(3), y=np.zeros(3), lam=0.1, rho=np.ones(3))
        sol = solve_weighted_l1_ridge(spec_for(inst, [0.2, 0.2, 0.2]))
        assert sol.converged
        assert np.all(sol.x == 0.0)

    def test_subgradient_boundary_zero(self):
        # |2 A^T y| = w holds with equality: minimizer is 0
        inst = inst_1d(y=1.0, lam=0.7)
        sol = solve_weighted_l1_ridge(spec_for(inst, [2.0]))
        assert sol.converged
        assert sol.x[0] == 0.0
        oracle = grid_min_1d(lambda x: (1.0 - x) ** 2 + 0.7 * x**2 + 2.0 * np.abs(x))
        assert abs(oracle) < 1e-3

    def test_orthonormal_closed_form(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            theta = rng.uniform(0, 2 * np.pi)
            A = np.array([[np.cos(theta), -np.sin(theta)],
                          [np.sin(theta), np.cos(theta)]])
            y = rng.standard_normal(2) * 2
            lam = float(rng.uniform(0.0, 1.0))
            w = rng.uniform(0.0, 1.5, 2)
            inst = ProblemInstance(A=A, y=y, lam=lam, rho=np.ones(2))
            sol = solve_weighted_l1_ridge(spec_for(inst, w))
            want = soft_threshold(A.T @ y, w / 2.0) / (1.0 + lam)
            assert sol.converged
            assert sol.x == pytest.approx(want, abs=1e-8)

    def test_frozen_coordinates_bit_exact_zero(self):
        rng = np.random.default_rng(9)
        A = rng.standard_normal((5, 6))
        inst = ProblemInstance(A=A, y=rng.standard_normal(5) * 2, lam=0.05,
                               rho=np.ones(6))
        sol = solve_weighted_l1_ridge(
            spec_for(inst, np.full(6, 0.01), frozen=frozenset({1, 4}))
        )
        assert sol.converged
        assert sol.x[1] == 0.0 and sol.x[4] == 0.0

    def test_objective_no_regression_past_warm_start(self):
        rng = np.random.default_rng(12)
        for _ in range(15):
            q, p = 6, 10
            A = rng.standard_normal((q, p)) / np.sqrt(q)
            y = rng.standard_normal(q)
            lam = float(rng.uniform(1e-3, 0.5))
            w = rng.uniform(0.0, 0.3, p)
            inst = ProblemInstance(A=A, y=y, lam=lam, rho=np.ones(p))
            warm = rng.standard_normal(p)
            spec = spec_for(inst, w, warm_start=warm)
            sol = solve_weighted_l1_ridge(spec)

            def obj(x):
                return float(np.sum((y - A @ x) ** 2) + lam * x @ x + w @ np.abs(x))

            assert obj(sol.x) <= obj(warm) + spec.tol * (1 + np.sum(np.abs(warm)))


class TestNonNegativeSolver:
    def test_negative_observation_pins_to_zero(self):
        inst = inst_1d(y=-1.0, lam=0.0)
        sol = solve_nonneg_weighted_qp(spec_for(inst, [0.5], nonneg=True))
        assert sol.converged
        assert sol.x[0] == 0.0

    def test_one_dimensional_stationarity(self):
        # 2(x - 1) + 1 = 0 at x = 0.5
        inst = inst_1d(y=1.0, lam=0.0)
        sol = solve_nonneg_weighted_qp(spec_for(inst, [1.0], nonneg=True))
        assert sol.converged
        assert sol.x[0] == pytest.approx(0.5, abs=1e-8)
        oracle = grid_min_1d(lambda x: (1.0 - x) ** 2 + 1.0 * x, lo=0.0)
        assert sol.x[0] == pytest.approx(oracle, abs=1e-3)

    def test_heavy_weight_pins_to_zero(self):
        inst = inst_1d(y=1.0, lam=0.0)
        sol = solve_nonneg_weighted_qp(spec_for(inst, [4.0], nonneg=True))
        assert sol.converged
        assert sol.x[0] == 0.0
        oracle = grid_min_1d(lambda x: (1.0 - x) ** 2 + 4.0 * x, lo=0.0)
        assert abs(oracle) < 1e-3

    def test_output_exactly_nonnegative(self):
        rng = np.random.default_rng(21)
        for _ in range(10):
            A = rng.standard_normal((4, 7))
            inst = ProblemInstance(A=A, y=rng.standard_normal(4) * 2, lam=0.05,
                                   rho=np.ones(7))
            sol = solve_nonneg_weighted_qp(spec_for(inst, rng.uniform(0, 0.5, 7), nonneg=True))
            assert sol.converged
            assert np.all(sol.x >= 0.0)

    def test_variant_flag_enforced(self):
        inst = inst_1d()
        with pytest.raises(ValueError):
            solve_nonneg_weighted_qp(spec_for(inst, [0.5], nonneg=False))
        with pytest.raises(ValueError):
            solve_weighted_l1_ridge(spec_for(inst, [0.5], nonneg=True))


class TestKktResidual:
    def test_exact_minimizer_near_zero(self):
        inst = inst_1d(y=1.0, lam=0.25)
        res = kkt_residual(inst, np.array([0.5]), frozenset(), False, np.array([0.6]))
        assert res <= 1e-12

    def test_zero_with_huge_weights(self):
        rng = np.random.default_rng(2)
        A = rng.standard_normal((3, 4))
        inst = ProblemInstance(A=A, y=rng.standard_normal(3), lam=0.1, rho=np.ones(4))
        assert kkt_residual(inst, np.full(4, 1e6), frozenset(), False, np.zeros(4)) == 0.0
        assert kkt_residual(inst, np.full(4, 1e6), frozenset(), True, np.zeros(4)) == 0.0

    def test_perturbation_grows_residual(self):
        inst = inst_1d(y=1.0, lam=0.25)
        w = np.array([0.5])
        base = kkt_residual(inst, w, frozenset(), False, np.array([0.6]))
        bumped = kkt_residual(inst, w, frozenset(), False, np.array([0.6 + 1e-3]))
        assert bumped > base

    def test_agrees_with_reported_residual(self):
        rng = np.random.default_rng(17)
        for nonneg in (False, True):
            A = rng.standard_normal((5, 8)) / np.sqrt(5)
            inst = ProblemInstance(A=A, y=rng.standard_normal(5), lam=0.02,
                                   rho=np.ones(8))
            spec = spec_for(inst, rng.uniform(0, 0.2, 8), nonneg=nonneg)
            sol = (solve_nonneg_weighted_qp if nonneg else solve_weighted_l1_ridge)(spec)
            again = kkt_residual(inst, spec.weights, spec.frozen, nonneg, sol.x)
            assert sol.converged
            assert again == pytest.approx(sol.kkt_residual, abs=1e-12)


class TestSpecValidation:
    def test_warm_start_must_respect_frozen(self):
        inst = inst_1d()
        with pytest.raises(ValueError):
            SubproblemSpec(inst=inst, weights=np.array([0.5]), frozen=frozenset({0}),
                           warm_start=np.array([1.0]))

    def test_warm_start_must_respect_sign_constraint(self):
        inst = inst_1d()
        with pytest.raises(ValueError):
            SubproblemSpec(inst=inst, weights=np.array([0.5]), nonneg=True,
                           warm_start=np.array([-1.0]))

    def test_active_weights_must_be_finite_nonnegative(self):
        inst = inst_1d()
        with pytest.raises(ValueError):
            SubproblemSpec(inst=inst, weights=np.array([-0.5]))
        with pytest.raises(ValueError):
            SubproblemSpec(inst=inst, weights=np.array([np.inf]))
        # infinite weight is fine on a frozen coordinate
        SubproblemSpec(inst=ProblemInstance(A=np.eye(2), y=np.zeros(2), lam=0.1,
                                            rho=np.ones(2)),
                       weights=np.array([0.1, np.inf]), frozen=frozenset({1}))
