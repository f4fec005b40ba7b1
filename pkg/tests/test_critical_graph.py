import numpy as np
import pytest
from numpy.testing import assert_allclose

from mppi.critical_graph import RowFamily, critical_graph, spectral_projection, tilde_family
from mppi.exceptions import InvariantViolation
from mppi.game_model import restrict_min
from mppi.generators import random_row_family
from mppi.models import SolveOptions
from mppi.oracles import brute_force_critical
from mppi.shapley_operator import apply_g, tangent_game

HALF = [(0, 0.5), (1, 0.5)]


def five_node_family():
    """Two closed pairs and a state whose rows both lead into them."""
    return RowFamily.from_lists(5, [
        [HALF],
        [HALF],
        [[(2, 0.5), (3, 0.5)]],
        [[(2, 0.5), (3, 0.5)]],
        [[(3, 0.5), (4, 0.5)], [(2, 0.5), (3, 0.5)]],
    ])


def test_row_family_validation():
    with pytest.raises(ValueError):
        RowFamily.from_lists(2, [[[(0, 0.5)]], [[(1, 1.0)]]])
    with pytest.raises(ValueError):
        RowFamily.from_lists(2, [[[(0, 1.0)]]])
    family = five_node_family()
    assert family.sizes().tolist() == [1, 1, 1, 1, 2]
    assert family.members(4)[0] == [(3, 0.5), (4, 0.5)]


def test_five_node_critical_graph():
    result = critical_graph(five_node_family())
    assert result.components == [[0, 1], [2, 3]]
    assert result.nodes == [0, 1, 2, 3]
    assert result.scc_count == 2
    assert result.arc_set == {(0, 0), (0, 1), (1, 0), (1, 1), (2, 2), (2, 3), (3, 2), (3, 3)}


def test_singleton_family_is_final_graph():
    family = RowFamily.from_lists(3, [[[(1, 1.0)]], [[(0, 1.0)]], [[(0, 0.5), (2, 0.5)]]])
    result = critical_graph(family)
    assert result.arcs == [(0, 1), (1, 0)]
    assert result.components == [[0, 1]]


def test_peeling_finds_second_round_class():
    # state 2 leaks into {0} with its first row only
    family = RowFamily.from_lists(3, [
        [[(0, 1.0)]],
        [[(0, 0.5), (1, 0.5)], [(1, 0.5), (2, 0.5)]],
        [[(0, 0.5), (2, 0.5)], [(1, 1.0)]],
    ])
    result = critical_graph(family)
    assert result.components == [[0], [1, 2]]
    assert result.arc_set == brute_force_critical(family).arc_set


@pytest.mark.parametrize("seed", range(40))
def test_critical_graph_matches_enumeration(seed):
    family = random_row_family(seed)
    fast = critical_graph(family)
    slow = brute_force_critical(family)
    assert fast.arc_set == slow.arc_set
    assert fast.nodes == slow.nodes
    assert sorted(fast.components) == sorted(slow.components)


@pytest.mark.slow
def test_critical_graph_matches_enumeration_many():
    children = np.random.SeedSequence(2024).spawn(200)
    for child in children:
        family = random_row_family(np.random.Generator(np.random.PCG64(child)))
        assert critical_graph(family).arc_set == brute_force_critical(family).arc_set


def test_tilde_family_membership(five_node):
    op = restrict_min(five_node, (1, 1, 3, 3, 3))
    gbar = tangent_game(op, np.zeros(5))
    u = np.array([0.0, 0.0, 0.5, 0.5, 0.5])
    family = tilde_family(gbar, u, 1e-10)
    values = gbar.trans @ u + gbar.reward
    expected = np.abs(values - u[gbar.action_state]) <= 1e-10
    assert family.rows.shape[0] == int(expected.sum())
    assert critical_graph(family).scc_count == 2


def test_tilde_family_rejects_non_harmonic(five_node):
    gbar = tangent_game(restrict_min(five_node, (1, 1, 3, 3, 3)), np.zeros(5))
    with pytest.raises(InvariantViolation):
        tilde_family(gbar, np.array([0.0, 0.0, 0.5, 0.5, 2.0]), 1e-10)


def test_spectral_projection_five_node(five_node):
    gbar = tangent_game(restrict_min(five_node, (1, 1, 3, 3, 3)), np.zeros(5))
    u = np.array([0.0, 0.0, -0.5, -0.5, 0.0])
    opts = SolveOptions.from_settings(check_invariants=True)
    v = spectral_projection(gbar, [0, 1, 2, 3], u, np.zeros(5, dtype=int), opts)
    assert_allclose(v, [0.0, 0.0, -0.5, -0.5, -0.5], atol=1e-12)
    assert_allclose(apply_g(gbar, v), v, atol=1e-12)


def test_spectral_projection_matches_iteration(five_node):
    gbar = tangent_game(restrict_min(five_node, (1, 1, 3, 3, 3)), np.zeros(5))
    u = np.array([0.0, 0.0, -1.0, -1.0, 0.0])
    x = u.copy()
    for _ in range(10000):
        x = apply_g(gbar, x)
    v = spectral_projection(gbar, critical_graph(tilde_family(gbar, x, 1e-9)).nodes, u)
    assert_allclose(v, x, atol=1e-9)


def test_spectral_projection_requires_super_harmonic(five_node):
    gbar = tangent_game(restrict_min(five_node, (1, 1, 3, 3, 3)), np.zeros(5))
    with pytest.raises(InvariantViolation):
        spectral_projection(gbar, [0, 1, 2, 3], np.array([0.0, 0.0, -0.5, -0.5, -3.0]))
