from itertools import product

import numpy as np
import pytest
import scipy.sparse as sp
from numpy.testing import assert_allclose

from mppi.chain_analysis import mean_payoff_fixed_pair
from mppi.exceptions import InvariantViolation
from mppi.game_model import OnePlayerGame, fix_pair, restrict_min
from mppi.generators import EXAMPLE5_SIGMA0, make_rng
from mppi.models import SolveOptions
from mppi.one_player_solver import StoppedProblem, howard_stopped, multichain_pi
from mppi.shapley_operator import apply_g, residual_g


def random_one_player(seed, n=4, actions=2, deficit=0.0):
    rng = make_rng(seed)
    rows = rng.random((n * actions, n)) * (rng.random((n * actions, n)) < 0.6)
    rows[np.arange(n * actions), rng.integers(0, n, size=n * actions)] += 0.2
    rows /= rows.sum(axis=1, keepdims=True)
    rows *= 1.0 - deficit
    act_ptr = np.arange(n + 1) * actions
    return OnePlayerGame(n, act_ptr, rng.integers(-2, 3, size=n * actions).astype(float), sp.csr_matrix(rows))


def exhaustive_gain(op):
    best = np.full(op.n, -np.inf)
    for delta in product(*(range(c) for c in op.counts)):
        P, r = fix_pair(op, delta)
        best = np.maximum(best, mean_payoff_fixed_pair(P, r))
    return best


@pytest.mark.parametrize("seed", range(12))
def test_multichain_pi_matches_exhaustive(seed):
    op = random_one_player(seed)
    opts = SolveOptions.from_settings(check_invariants=True)
    result = multichain_pi(op, opts=opts)
    assert_allclose(result.eta, exhaustive_gain(op), atol=1e-9)
    assert residual_g(op, result.eta, result.v, opts.eps_eta) <= 1e-9


@pytest.mark.parametrize("solver, final_method", [("lu", "A"), ("lu", "B"), ("sor", "A")])
def test_multichain_pi_backends_agree(solver, final_method):
    op = random_one_player(99, n=6, actions=3)
    reference = multichain_pi(op)
    other = multichain_pi(op, opts=SolveOptions.from_settings(solver=solver, final_method=final_method))
    assert_allclose(other.eta, reference.eta, atol=1e-9)


def test_multichain_pi_five_node_sigma0(five_node):
    op = restrict_min(five_node, EXAMPLE5_SIGMA0)
    result = multichain_pi(op, opts=SolveOptions.from_settings(check_invariants=True))
    assert_allclose(result.eta, np.zeros(5), atol=1e-12)
    assert_allclose(result.v, [0.0, 0.0, -1.0, -1.0, 0.0], atol=1e-12)


def test_multichain_pi_warm_start_keeps_optimum():
    op = random_one_player(5, n=5, actions=3)
    cold = multichain_pi(op)
    warm = multichain_pi(op, cold.delta)
    assert_allclose(warm.eta, cold.eta, atol=1e-12)
    assert residual_g(op, warm.eta, warm.v, 1e-10) <= 1e-9


def test_multichain_pi_rejects_substochastic():
    with pytest.raises(InvariantViolation):
        multichain_pi(random_one_player(1, deficit=0.1))


def test_howard_stopped_matches_value_iteration():
    op = random_one_player(7, n=4, actions=2, deficit=0.2)
    problem = StoppedProblem(op, [], np.zeros(4))
    v, _ = howard_stopped(problem, opts=SolveOptions.from_settings(check_invariants=True))
    x = np.zeros(4)
    for _ in range(2000):
        x = apply_g(op, x)
    assert_allclose(v, x, atol=1e-9)


def test_howard_stopped_keeps_boundary(five_node):
    op = restrict_min(five_node, (1, 1, 3, 3, 3))
    u = np.array([0.0, 0.0, -0.5, -0.5, 0.0])
    problem = StoppedProblem(op, [0, 1, 2, 3], u)
    v, delta = howard_stopped(problem, np.zeros(5, dtype=int))
    assert_allclose(v, [0.0, 0.0, -0.5, -0.5, -0.5], atol=1e-12)
    assert delta.actions[4] == 4


def test_howard_stopped_detects_missing_critical_node(five_node):
    op = restrict_min(five_node, EXAMPLE5_SIGMA0)
    problem = StoppedProblem(op, [4], np.zeros(5))
    with pytest.raises(InvariantViolation):
        howard_stopped(problem)
