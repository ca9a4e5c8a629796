"""Unit tests for L-BFGS, truncated CG and the trust-region Newton loop."""

import numpy as np
import pytest

from goal_tensor_cli.core.errors import NumericError
from goal_tensor_cli.core.models import OptConfig
from goal_tensor_cli.core.optimize import lbfgs_minimize, steihaug_tcg, tr_newton_minimize


def identity(r):
    return r


def rosenbrock(x):
    return float(100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2)


def rosenbrock_grad(x):
    return np.array(
        [
            -400.0 * x[0] * (x[1] - x[0] ** 2) - 2.0 * (1.0 - x[0]),
            200.0 * (x[1] - x[0] ** 2),
        ]
    )


@pytest.fixture
def spd_quadratic():
    """f(x) = 1/2 x^T A x - b^T x with a fixed SPD matrix."""
    gen = np.random.default_rng(0)
    Q = np.linalg.qr(gen.standard_normal((6, 6)))[0]
    A = Q @ np.diag([1.0, 2.0, 3.0, 5.0, 8.0, 13.0]) @ Q.T
    b = 3.0 * gen.standard_normal(6)
    return A, b


# --- L-BFGS ---------------------------------------------------------------------------


def test_lbfgs_quadratic_in_two_iterations():
    """Test that ||v - c||^2 is minimized within two iterations."""
    c = np.array([1.0, 2.0, -2.0])

    result = lbfgs_minimize(
        lambda v: float(np.sum((v - c) ** 2)),
        lambda v: 2.0 * (v - c),
        np.zeros(3),
        OptConfig(max_outer_iterations=2),
    )

    np.testing.assert_allclose(result.x, c, atol=1e-10)
    assert len(result.trace) <= 3


def test_lbfgs_rosenbrock():
    """Test the standard Rosenbrock start point."""
    result = lbfgs_minimize(
        rosenbrock, rosenbrock_grad, np.array([-1.2, 1.0]), OptConfig(max_outer_iterations=100)
    )

    assert result.objective < 1e-8
    assert result.objective == pytest.approx(rosenbrock(result.x))


def test_lbfgs_trace_records_every_iteration(spd_quadratic):
    """Test the trace layout: initial record plus one per iteration."""
    A, b = spd_quadratic

    result = lbfgs_minimize(
        lambda x: float(0.5 * x @ A @ x - b @ x),
        lambda x: A @ x - b,
        np.zeros(6),
        OptConfig(max_outer_iterations=3),
        describe=lambda x: (1.0, (2.0,)),
    )

    assert [r.iteration for r in result.trace] == [0, 1, 2, 3]
    assert result.trace[0].step_norm == 0.0
    assert all(r.accepted for r in result.trace)
    assert result.trace[-1].frobenius_term == 1.0
    assert result.trace[-1].qoi_terms == (2.0,)
    objectives = [r.objective for r in result.trace]
    assert all(b <= a for a, b in zip(objectives, objectives[1:], strict=False))


def test_lbfgs_line_search_failure_is_flagged():
    """Test that a gradient pointing uphill ends the run with a trace note."""
    x0 = np.array([1.0, 1.0])

    result = lbfgs_minimize(
        lambda x: float(x @ x),
        lambda x: -2.0 * x,
        x0,
        OptConfig(max_outer_iterations=5),
    )

    assert result.trace[-1].note == "line-search-failed"
    assert not result.trace[-1].accepted
    np.testing.assert_array_equal(result.x, x0)


def test_lbfgs_rejects_non_finite_start():
    """Test that a non-finite initial objective raises NumericError."""
    with pytest.raises(NumericError):
        lbfgs_minimize(lambda x: float("nan"), lambda x: x, np.zeros(2), OptConfig())


# --- truncated CG ---------------------------------------------------------------------


def test_tcg_solves_newton_system_inside_region(spd_quadratic):
    """Test that a large radius gives the Newton step."""
    A, b = spd_quadratic
    g = -b

    result = steihaug_tcg(lambda p: A @ p, g, identity, 1e6, 1e-12, 50)

    assert result.reason == "converged"
    np.testing.assert_allclose(result.step, np.linalg.solve(A, b), rtol=1e-8)
    np.testing.assert_allclose(result.hessian_step, A @ result.step, rtol=1e-8, atol=1e-10)


def test_tcg_stops_on_boundary(spd_quadratic):
    """Test that the step is cut at the trust-region radius."""
    A, b = spd_quadratic

    result = steihaug_tcg(lambda p: A @ p, -b, identity, 0.1, 1e-12, 50)

    assert result.reason == "boundary"
    assert result.on_boundary
    assert np.linalg.norm(result.step) == pytest.approx(0.1, abs=1e-10)


def test_tcg_negative_curvature_hits_boundary():
    """Test that a saddle exits along the negative-curvature ray at the radius."""
    H = np.diag([1.0, -2.0])
    g = np.array([1.0, 1.0])

    result = steihaug_tcg(lambda p: H @ p, g, identity, 2.0, 1e-10, 10)

    assert result.reason == "negative-curvature"
    assert np.linalg.norm(result.step) == pytest.approx(2.0, abs=1e-10)


def test_tcg_preconditioner_norm(spd_quadratic):
    """Test that the boundary is measured in the preconditioner norm."""
    A, b = spd_quadratic
    D = np.diag(A).copy()

    result = steihaug_tcg(lambda p: A @ p, -b, lambda r: r / D, 0.1, 1e-12, 50)

    assert result.reason == "boundary"
    assert np.sqrt(result.step @ (D * result.step)) == pytest.approx(0.1, abs=1e-10)


def test_tcg_model_decreases(spd_quadratic):
    """Test that the returned step lowers the quadratic model."""
    A, b = spd_quadratic
    g = -b

    for radius in (0.01, 0.5, 100.0):
        result = steihaug_tcg(lambda p: A @ p, g, identity, radius, 1e-10, 50)
        s = result.step
        assert g @ s + 0.5 * s @ (A @ s) < 0.0
        assert np.linalg.norm(s) <= radius + 1e-10


def test_tcg_rejects_non_finite_products():
    """Test that a NaN Hessian product raises NumericError."""
    with pytest.raises(NumericError):
        steihaug_tcg(lambda p: p * np.nan, np.ones(2), identity, 1.0, 0.1, 5)


# --- trust-region Newton --------------------------------------------------------------


def test_tr_newton_quadratic(spd_quadratic):
    """Test convergence to the minimizer of an SPD quadratic."""
    A, b = spd_quadratic

    result = tr_newton_minimize(
        lambda x: float(0.5 * x @ A @ x - b @ x),
        lambda x: A @ x - b,
        lambda x, w: A @ w,
        lambda x: identity,
        np.zeros(6),
        OptConfig(max_outer_iterations=15, tcg_tolerance=1e-12),
    )

    np.testing.assert_allclose(result.x, np.linalg.solve(A, b), rtol=1e-8, atol=1e-10)
    assert result.trace[0].radius == 1.0


def test_tr_newton_accepted_steps_decrease(spd_quadratic):
    """Test that the objective strictly decreases across accepted steps."""
    A, b = spd_quadratic

    result = tr_newton_minimize(
        lambda x: float(0.5 * x @ A @ x - b @ x),
        lambda x: A @ x - b,
        lambda x, w: A @ w,
        lambda x: identity,
        np.zeros(6),
        OptConfig(max_outer_iterations=10),
    )

    accepted = [r.objective for r in result.trace if r.accepted]
    assert all(later < earlier for earlier, later in zip(accepted, accepted[1:], strict=False))


def test_tr_newton_rosenbrock_with_exact_hessian():
    """Test the trust-region loop on Rosenbrock, including rejected steps."""

    def hvp(x, w):
        H = np.array(
            [
                [1200.0 * x[0] ** 2 - 400.0 * x[1] + 2.0, -400.0 * x[0]],
                [-400.0 * x[0], 200.0],
            ]
        )
        return H @ w

    result = tr_newton_minimize(
        rosenbrock,
        rosenbrock_grad,
        hvp,
        lambda x: identity,
        np.array([-1.2, 1.0]),
        OptConfig(max_outer_iterations=100),
    )

    assert result.objective < 1e-8
    assert result.rejected_steps == sum(1 for r in result.trace if not r.accepted)
    assert len(result.trace) <= 101


def test_tr_newton_respects_initial_radius(spd_quadratic):
    """Test the configured initial radius and the expansion cap."""
    A, b = spd_quadratic
    cfg = OptConfig(max_outer_iterations=3, initial_radius=0.01, max_radius_factor=2.0)

    result = tr_newton_minimize(
        lambda x: float(0.5 * x @ A @ x - b @ x),
        lambda x: A @ x - b,
        lambda x, w: A @ w,
        lambda x: identity,
        np.zeros(6),
        cfg,
    )

    assert result.trace[0].radius == 0.01
    assert max(r.radius for r in result.trace) <= 0.02
