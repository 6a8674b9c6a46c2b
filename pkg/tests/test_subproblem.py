import numpy as np
from scipy.optimize import minimize
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asyflexa.exceptions import ConvergenceError, InvariantViolation
from asyflexa.oracle import brute_force_best_response, reference_solve
from asyflexa.problem import (Ball, BlockPartition, Box, CallableConstraint, CallableSmooth, GroupL2Reg, L1Reg,
                              LeastSquares, ProblemSpec, QuadraticConstraint, WholeSpace, ZeroReg)
from asyflexa.subproblem import (BestResponseRequest, best_response, best_response_ncc, optimality_residual,
                                 prox_on_set, solve_block, verify_best_response_properties)
from asyflexa.surrogate import build_constraint_surrogate, build_surrogate


def one_dim_spec(value, grad, L, reg=None, set_=None):
    part = BlockPartition([1])
    f = CallableSmooth(value, grad, L, part, hess=lambda x: np.array([[L]]), convex=True)
    return ProblemSpec(part, f, regs=[reg or ZeroReg()], sets=[set_ or WholeSpace()])


def test_soft_threshold_best_response():
    spec = one_dim_spec(lambda x: 0.5 * (x[0] - 3) ** 2, lambda x: x - 3, 1.0, reg=L1Reg(1.0))
    z, _ = solve_block(spec, "prox_linear", 0, np.zeros(1), beta=0.5)
    assert z[0] == 2.0


def test_unconstrained_prox_linear_is_gradient_step(lasso_small):
    part = lasso_small.partition
    spec = ProblemSpec(part, lasso_small.smooth)
    y = np.random.default_rng(0).standard_normal(spec.n)
    z, m = solve_block(spec, "prox_linear", 2, y, beta=0.8)
    assert np.allclose(z, y[part.slices[2]] - spec.smooth.grad_block(y, 2) / 1.6, atol=1e-14)


def test_stationary_point_is_fixed(lasso_small):
    ref = reference_solve(lasso_small, tol=1e-10)
    assert not ref.censored
    for kind in ("prox_linear", "second_order", "partial_convexity"):
        for i in range(lasso_small.N):
            z, _ = solve_block(lasso_small, kind, i, ref.x)
            assert np.linalg.norm(z - ref.x[lasso_small.partition.slices[i]]) <= 1e-6


def test_iterative_solver_matches_brute_force():
    # 2-D block, l1 plus box, second-order model (no closed form)
    part = BlockPartition([2, 1])
    rng = np.random.default_rng(3)
    A = rng.standard_normal((4, 3))
    spec = ProblemSpec(part, LeastSquares(A, rng.standard_normal(4), part), regs=[L1Reg(0.3), L1Reg(0.3)],
                       sets=[Box(-np.ones(2), np.ones(2)), Box(-np.ones(1), np.ones(1))])
    y = rng.uniform(-1, 1, 3)
    model = build_surrogate("second_order", spec, 0, y, beta=0.1)
    req = BestResponseRequest(0, y, y[:2], model, spec.regs[0], spec.sets[0])
    z = best_response(req)
    zb = brute_force_best_response(req, resolution=1e-5)
    assert np.linalg.norm(z - zb) <= 1e-4
    assert optimality_residual(model, spec.regs[0], spec.sets[0], z) <= 1e-8


def test_group_reg_on_ball_uses_splitting():
    v = np.array([2.0, 1.5, -0.3])
    reg, S = GroupL2Reg(0.5), Ball(np.array([1.0, 0.0, 0.0]), 1.0)
    z = prox_on_set(reg, S, v, 0.7)
    obj = lambda w: reg.value(w) + (w - v) @ (w - v) / 1.4
    rng = np.random.default_rng(0)
    assert S.contains(z, 1e-9)
    for _ in range(200):
        w = S.project(z + 0.3 * rng.standard_normal(3))
        assert obj(z) <= obj(w) + 1e-9


@settings(max_examples=30)
@given(st.lists(st.floats(-5, 5), min_size=2, max_size=2), st.floats(0.05, 3), st.floats(0, 2))
def test_joint_prox_l1_box_is_optimal(v, t, lam):
    v = np.array(v)
    reg, S = L1Reg(lam), Box(np.array([-1.0, 0.5]), np.array([2.0, 3.0]))
    z = prox_on_set(reg, S, v, t)
    obj = lambda w: reg.value(w) + (w - v) @ (w - v) / (2 * t)
    for w in np.stack(np.meshgrid(np.linspace(-1, 2, 31), np.linspace(0.5, 3, 26)), -1).reshape(-1, 2):
        assert obj(z) <= obj(w) + 1e-12


def test_inner_solver_reports_non_convergence(lasso_small):
    y = np.random.default_rng(0).standard_normal(lasso_small.n)
    model = build_surrogate("second_order", lasso_small, 0, y, beta=1e-3)
    req = BestResponseRequest(0, y, y[:5], model, lasso_small.regs[0], lasso_small.sets[0], max_iter=1,
                              inner_tol=1e-15)
    with pytest.raises(ConvergenceError) as err:
        best_response(req)
    assert err.value.best is not None


def test_ncc_boundary_base_is_surrogate_feasible():
    c = QuadraticConstraint.ball(1.0, np.zeros(2))
    y = np.array([0.6, 0.8])
    s = build_constraint_surrogate("descent_lemma", c, 0, y)
    assert s.value(y) == pytest.approx(0.0, abs=1e-15)


def test_ncc_one_dim_root():
    part = BlockPartition([1])
    f = CallableSmooth(lambda x: x[0], lambda x: np.ones(1), 1.0, part, convex=True)
    c = CallableConstraint(lambda x: 1 - x @ x, lambda x: -2 * x, curvature=2.0)
    spec = ProblemSpec(part, f, sets=[Box(np.array([-10.0]), np.array([10.0]))], constraints=[[c]], x0=np.array([2.0]))
    y = np.array([2.0])
    model = build_surrogate("prox_linear", spec, 0, y, beta=0.1)
    cs = [build_constraint_surrogate("descent_lemma", c, 0, y)]
    req = BestResponseRequest(0, y, y, model, ZeroReg(), spec.sets[0], cs)
    z = best_response_ncc(req)
    assert z[0] == pytest.approx(4 - np.sqrt(7), abs=1e-12)
    zb = brute_force_best_response(req)
    assert abs(zb[0] - z[0]) <= 1e-4
    req.method = "barrier"
    zbar = best_response_ncc(req)
    assert abs(zbar[0] - z[0]) <= 1e-4


def test_barrier_matches_projection(ncc_small):
    rng = np.random.default_rng(0)
    for i in range(ncc_small.N):
        sl = ncc_small.partition.slices[i]
        y = ncc_small.x0.copy()
        y += 0.1 * rng.standard_normal(y.size)
        y[sl] = ncc_small.x0[sl]
        model = build_surrogate("prox_linear", ncc_small, i, y)
        cs = [build_constraint_surrogate("descent_lemma", c, j, y[sl], block=i)
              for j, c in enumerate(ncc_small.block_constraints(i))]
        req = BestResponseRequest(i, y, y[sl], model, ZeroReg(), ncc_small.sets[i], cs)
        zp = best_response_ncc(req)
        req.method = "barrier"
        zb = best_response_ncc(req)
        assert np.linalg.norm(zp - zb) <= 1e-4
        assert all(c.value(zb) <= 1e-9 for c in cs)


def test_ncc_without_constraints_reduces(lasso_small):
    y = np.random.default_rng(1).standard_normal(lasso_small.n)
    model = build_surrogate("prox_linear", lasso_small, 1, y)
    req = BestResponseRequest(1, y, y[5:10], model, lasso_small.regs[1], lasso_small.sets[1])
    assert np.array_equal(best_response(req), best_response(req))


def test_ncc_rejects_infeasible_current(ncc_small):
    y = ncc_small.x0.copy()
    y[:2] = 0.0
    model = build_surrogate("prox_linear", ncc_small, 0, y)
    cs = [build_constraint_surrogate("descent_lemma", c, 0, ncc_small.x0[:2]) for c in ncc_small.block_constraints(0)]
    req = BestResponseRequest(0, y, y[:2], model, ZeroReg(), ncc_small.sets[0], cs)
    with pytest.raises(InvariantViolation):
        best_response_ncc(req)


def test_lasso_best_response_properties(lasso_small):
    rep = verify_best_response_properties(lasso_small, "prox_linear", trials=300, seed=0)
    assert rep.descent_violations == 0
    assert rep.ratio_bound == pytest.approx(1.0)
    assert rep.ratio_violations == 0


@pytest.mark.parametrize("kind", ["second_order", "partial_convexity"])
def test_other_models_best_response_properties(lasso_small, kind):
    rep = verify_best_response_properties(lasso_small, kind, trials=100, seed=1)
    assert rep.descent_violations == 0
    assert rep.ratio_violations == 0


def test_ncc_best_response_properties(ncc_small):
    rep = verify_best_response_properties(ncc_small, "prox_linear", trials=100, seed=0, scale=0.3)
    assert rep.descent_violations == 0
    assert rep.holder


def test_general_constraint_surrogate_with_l1_is_optimal():
    # an anisotropic convex part leaves no closed-form sublevel set, so the barrier path runs
    part = BlockPartition([2])
    P = np.diag([2.0, -1.0])
    c = QuadraticConstraint(P, np.array([0.0, 0.0]), -1.0, surrogate="dc_split")
    f = CallableSmooth(lambda x: 0.5 * (x - 2) @ (x - 2), lambda x: x - 2, 1.0, part, convex=True)
    x0 = np.array([0.2, 0.3])
    spec = ProblemSpec(part, f, regs=[L1Reg(0.2)], sets=[Box(-2 * np.ones(2), 2 * np.ones(2))],
                       constraints=[[c]], x0=x0)
    model = build_surrogate("prox_linear", spec, 0, x0, beta=0.5)
    cs = [build_constraint_surrogate("dc_split", c, 0, x0)]
    assert cs[0].convex_set is None
    req = BestResponseRequest(0, x0, x0, model, spec.regs[0], spec.sets[0], cs)
    z = best_response_ncc(req)
    assert cs[0].value(z) <= 1e-9
    assert spec.sets[0].contains(z, 1e-12)
    total = lambda v: model.value(v) + spec.regs[0].value(v)
    # the optimum lies on a curved boundary, so compare values with the grid
    zb = brute_force_best_response(req, resolution=1e-5)
    assert total(z) <= total(zb) + 1e-10
    # the solution has no zero coordinate, so SLSQP on the smooth piece is a valid reference
    ref = minimize(total, z + 0.05, method="SLSQP", bounds=[(-2, 2)] * 2,
                   constraints=[{"type": "ineq", "fun": lambda v: -cs[0].value(v)}],
                   options={"ftol": 1e-15, "maxiter": 1000})
    assert np.all(np.abs(ref.x) > 0.1)
    assert np.linalg.norm(z - ref.x) <= 1e-4
