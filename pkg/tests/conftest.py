"""Shared fixtures: small random tensors and assembled goal-oriented problems."""

import numpy as np
import pytest

from goal_tensor_cli.core.classic import cp_als, sthosvd
from goal_tensor_cli.core.goal import (
    GoalProblem,
    ParamLayout,
    apply_scaling,
    choose_weights,
    compute_scaling,
)
from goal_tensor_cli.core.models import AlsConfig, DenseTensor, SthosvdConfig
from goal_tensor_cli.core.qoi import qoi_kinetic_energy, qoi_variable_sum

# (space, space, variable, time)
GOAL_DIMS = (6, 5, 4, 7)
VARIABLE_MODE = 2


@pytest.fixture
def rng():
    """Seeded generator, one per test."""
    return np.random.default_rng(1234)


@pytest.fixture
def sim_tensor():
    """Positive 4-way tensor shaped like a small simulation output."""
    gen = np.random.default_rng(7)
    return DenseTensor(gen.uniform(0.5, 1.5, size=GOAL_DIMS))


@pytest.fixture
def goal_qois():
    """One linear and one nonlinear QoI on the variable mode."""
    return (
        qoi_variable_sum((3,), name="mass", variable_mode=VARIABLE_MODE),
        qoi_kinetic_energy((0,), 1, 2, variable_mode=VARIABLE_MODE),
    )


def build_problem(X, qois, kind, scaling_method="mean-std"):
    """GoalProblem and initial parameter vector for a CP rank-3 or Tucker (2,2,2,3) fit."""
    scaling = compute_scaling(X, VARIABLE_MODE, scaling_method)
    X_scaled = apply_scaling(X, scaling)
    if kind == "cp":
        model0 = cp_als(X_scaled, AlsConfig(rank=3, max_iterations=5, init_seed=3)).model
    else:
        model0 = sthosvd(X_scaled, SthosvdConfig(ranks=(2, 2, 2, 3)))
    selection = choose_weights(X_scaled, model0, qois, scaling)
    layout = ParamLayout.for_model(model0)
    problem = GoalProblem.from_selection(X_scaled, scaling, selection, layout)
    return problem, layout.pack(model0)


@pytest.fixture(params=["cp", "tucker"])
def goal_problem(request, sim_tensor, goal_qois):
    """(problem, v0) for CP and for Tucker."""
    return build_problem(sim_tensor, goal_qois, request.param)
