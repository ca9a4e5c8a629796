"""Unit tests for the sum-type quantities of interest."""

import numpy as np
import pytest

from goal_tensor_cli.core.errors import QoIError
from goal_tensor_cli.core.models import DenseTensor
from goal_tensor_cli.core.qoi import (
    qoi_kinetic_energy,
    qoi_relative_error,
    qoi_residual_sq,
    qoi_variable_sum,
)

DIMS = (3, 3, 4, 2)


def finite_difference_derivative(qdef, X, step=1e-6):
    """Central differences of sum_t g(X_t) for every entry of X."""
    base = X.values.copy()
    scale = max(1.0, float(np.abs(base).max()))
    h = step * scale
    grad = np.empty(base.size)
    for i in range(base.size):
        plus, minus = base.copy(), base.copy()
        plus[i] += h
        minus[i] -= h
        f_plus = qdef.values(DenseTensor.from_values(X.dims, plus)).sum()
        f_minus = qdef.values(DenseTensor.from_values(X.dims, minus)).sum()
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def test_variable_sum_matches_loop(rng):
    """Test the variable-sum QoI against explicit loops."""
    X = DenseTensor(rng.standard_normal(DIMS))
    qdef = qoi_variable_sum((0, 2), 2.5, variable_mode=2)

    values = qdef.values(X)

    for t in range(DIMS[-1]):
        oracle = 0.0
        for i in range(DIMS[0]):
            for j in range(DIMS[1]):
                oracle += 2.5 * (X.data[i, j, 0, t] + X.data[i, j, 2, t])
        assert values[t] == pytest.approx(oracle, rel=1e-13)


def test_kinetic_energy_matches_loop(rng):
    """Test the sum-type kinetic energy against explicit loops."""
    X = DenseTensor(rng.uniform(0.5, 1.5, size=DIMS))
    qdef = qoi_kinetic_energy((0, 3), 1, 2, variable_mode=2)

    values = qdef.values(X)

    for t in range(DIMS[-1]):
        oracle = 0.0
        for i in range(DIMS[0]):
            for j in range(DIMS[1]):
                density = X.data[i, j, 0, t] + X.data[i, j, 3, t]
                oracle += density * (X.data[i, j, 1, t] ** 2 + X.data[i, j, 2, t] ** 2)
        assert values[t] == pytest.approx(oracle, rel=1e-13)


@pytest.mark.parametrize("seed", range(20))
def test_derivatives_match_finite_differences(seed):
    """Test both QoI derivatives against central differences."""
    gen = np.random.default_rng(seed)
    X = DenseTensor(gen.uniform(0.5, 1.5, size=DIMS))
    qois = (
        qoi_variable_sum((1, 3), 0.5, variable_mode=2),
        qoi_kinetic_energy((0,), 1, 2, variable_mode=2),
    )

    for qdef in qois:
        analytic = qdef.derivative(X).values
        numeric = finite_difference_derivative(qdef, X)

        assert np.linalg.norm(analytic - numeric) <= 1e-6 * np.linalg.norm(analytic)


def test_repeated_density_variable_counts_twice(rng):
    """Test that a density listed twice doubles both the value and its derivative."""
    X = DenseTensor(rng.uniform(0.5, 1.5, size=DIMS))
    once = qoi_kinetic_energy((0,), 1, 2, variable_mode=2)
    twice = qoi_kinetic_energy((0, 0), 1, 2, variable_mode=2)

    np.testing.assert_allclose(twice.values(X), 2.0 * once.values(X), rtol=1e-13)
    analytic = twice.derivative(X).values
    numeric = finite_difference_derivative(twice, X)
    assert np.linalg.norm(analytic - numeric) <= 1e-6 * np.linalg.norm(analytic)
    np.testing.assert_allclose(analytic, 2.0 * once.derivative(X).values, rtol=1e-13)


def test_derivative_is_zero_outside_variables_and_times(rng):
    """Test the zero padding of Z outside the used variables and times."""
    X = DenseTensor(rng.uniform(size=DIMS))
    qdef = qoi_kinetic_energy((0,), 1, 2, variable_mode=2, time_set=(1,))

    Z = qdef.derivative(X).data

    assert np.all(Z[:, :, 3, :] == 0.0)
    assert np.all(Z[..., 0] == 0.0)
    assert np.any(Z[..., 1] != 0.0)


def test_evaluate_and_derivative_at_single_time(rng):
    """Test that per-time evaluation agrees with the full trajectory."""
    X = DenseTensor(rng.uniform(size=DIMS))
    qdef = qoi_kinetic_energy((0,), 1, 2, variable_mode=2)

    assert qdef.evaluate(X, 1) == pytest.approx(qdef.values(X)[1])
    Z_t = qdef.derivative_at(X, 1)
    assert Z_t.dims == DIMS[:-1]
    np.testing.assert_allclose(Z_t.data, qdef.derivative(X).data[..., 1])


def test_time_set_restricts_trajectory(rng):
    """Test that only the configured times are evaluated, sorted."""
    X = DenseTensor(rng.uniform(size=(2, 3, 5)))
    qdef = qoi_variable_sum((0,), variable_mode=1, time_set=(4, 1))

    assert qdef.resolve_times(X) == (1, 4)
    assert qdef.values(X).shape == (2,)


def test_time_out_of_range(rng):
    """Test that a time index beyond the time mode raises QoIError."""
    X = DenseTensor(rng.uniform(size=DIMS))
    qdef = qoi_variable_sum((0,), variable_mode=2, time_set=(5,))

    with pytest.raises(QoIError):
        qdef.values(X)


def test_evaluate_outside_time_set(rng):
    """Test that evaluate refuses a time outside the set."""
    X = DenseTensor(rng.uniform(size=DIMS))
    qdef = qoi_variable_sum((0,), variable_mode=2, time_set=(0,))

    with pytest.raises(QoIError):
        qdef.evaluate(X, 1)


def test_variable_out_of_range(rng):
    """Test that an unknown variable index raises QoIError."""
    X = DenseTensor(rng.uniform(size=DIMS))

    with pytest.raises(QoIError):
        qoi_variable_sum((7,), variable_mode=2).values(X)


def test_variable_mode_cannot_be_time_mode(rng):
    """Test that the variable mode must precede the time mode."""
    X = DenseTensor(rng.uniform(size=DIMS))

    with pytest.raises(QoIError):
        qoi_variable_sum((0,), variable_mode=3).values(X)


def test_kinetic_energy_construction_errors():
    """Test the argument checks of the kinetic-energy QoI."""
    with pytest.raises(QoIError):
        qoi_kinetic_energy((), 1, 2)
    with pytest.raises(QoIError):
        qoi_kinetic_energy((0,), 1, 1)
    with pytest.raises(QoIError):
        qoi_kinetic_energy((0, 1), 1, 2)


def test_variable_sum_needs_variables():
    """Test that an empty variable list is rejected."""
    with pytest.raises(QoIError):
        qoi_variable_sum(())


def test_residual_sq(rng):
    """Test the squared trajectory residual."""
    X = DenseTensor(rng.uniform(size=DIMS))
    M = DenseTensor(X.data + 0.1)
    qdef = qoi_variable_sum((0,), variable_mode=2)

    diff = qdef.values(X) - qdef.values(M)

    assert qoi_residual_sq(qdef, X, M) == pytest.approx(float(diff @ diff))
    assert qoi_residual_sq(qdef, X, X) == 0.0


def test_relative_error():
    """Test the relative trajectory error and its zero-reference fallback."""
    assert qoi_relative_error(np.array([1.0, 2.0]), np.array([1.0, 1.0])) == pytest.approx(0.2)
    assert qoi_relative_error(np.zeros(2), np.array([1.0, 1.0])) == pytest.approx(2.0)
