"""
Shared fixtures: the 5-node game, tiny hand-made games and seeded random games.
"""
import numpy as np
import pytest
import scipy.sparse as sp

from mppi.game_model import Game, parse_game
from mppi.generators import example_5node, random_small_game
from mppi.models import SolveOptions


def single_state_game(reward: float) -> Game:
    return parse_game(f"zsg 1 1\n0 0 0 {reward!r} 0:1\n")


def chain_game(P, r) -> Game:
    """A game with one MIN and one MAX action per state."""
    P = sp.csr_matrix(np.asarray(P, dtype=float))
    n = P.shape[0]
    return Game(n, np.arange(n + 1), np.arange(n + 1), np.asarray(r, dtype=float), P)


@pytest.fixture
def five_node():
    return example_5node()


@pytest.fixture
def checked_options():
    return SolveOptions.from_settings(check_invariants=True)


@pytest.fixture
def random_games():
    def factory(count: int, seed: int = 0, **kwargs):
        children = np.random.SeedSequence(seed).spawn(count)
        return [random_small_game(np.random.Generator(np.random.PCG64(c)), **kwargs) for c in children]
    return factory


@pytest.fixture
def make_single():
    return single_state_game


@pytest.fixture
def make_chain():
    return chain_game
