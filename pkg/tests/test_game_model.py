import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from mppi.exceptions import GameFormatError, InvalidStrategyError
from mppi.game_model import (canonicalize, fix_pair, parse_game, read_game, restrict_min,
                             serialize_game, write_game)
from mppi.generators import EXAMPLE5_SIGMA0, random_small_game
from mppi.models import MinStrategy
from mppi.shapley_operator import apply_F, apply_g


def test_parse_minimal_game():
    game = parse_game("zsg 1 1\n0 0 0 2 0:1\n")
    assert game.n == 1
    assert_array_equal(game.reward, [2.0])
    assert_array_equal(game.trans.toarray(), [[1.0]])


def test_parse_ignores_comments_and_blank_lines():
    text = "# a game\nzsg 1 2   # two states\n\n0 0 0 1 1:1\n1 0 0 -1 0:0.25 1:0.75\n"
    game = parse_game(text)
    assert game.n == 2
    assert game.row(1) == [(0, 0.25), (1, 0.75)]


def test_row_sum_error_reports_line():
    with pytest.raises(GameFormatError, match="row sum") as info:
        parse_game("zsg 1 2\n0 0 0 1 0:0.6 1:0.5\n1 0 0 0 1:1\n")
    assert info.value.line == 2


@pytest.mark.parametrize("text, line", [
    ("zsg 2 1\n0 0 0 0 0:1\n", 1),
    ("game 1 1\n", 1),
    ("zsg 1 1\n0 0 0 0 1:1\n", 2),
    ("zsg 1 1\n0 0 0 0 0:1 0:0\n", 2),
    ("zsg 1 1\n0 0 0 zero 0:1\n", 2),
    ("zsg 1 1\n0 0 0 0 0=1\n", 2),
    ("zsg 1 1\n0 0 0 0 0:1\n0 0 0 1 0:1\n", 3),
])
def test_malformed_input(text, line):
    with pytest.raises(GameFormatError) as info:
        parse_game(text)
    assert info.value.line == line


def test_non_contiguous_actions():
    with pytest.raises(GameFormatError, match="MIN actions"):
        parse_game("zsg 1 1\n0 0 0 0 0:1\n0 2 0 0 0:1\n")
    with pytest.raises(GameFormatError, match="MAX actions"):
        parse_game("zsg 1 1\n0 0 1 0 0:1\n")


def test_state_without_records():
    with pytest.raises(GameFormatError, match="state 1"):
        parse_game("zsg 1 2\n0 0 0 0 0:1\n")


def test_round_trip_five_node(five_node):
    text = serialize_game(five_node)
    assert serialize_game(parse_game(text)) == text
    shuffled = "\n".join([text.splitlines()[0]] + text.splitlines()[1:][::-1]) + "\n"
    assert canonicalize(shuffled) == text


def test_write_and_read(tmp_path, five_node):
    path = tmp_path / "sub" / "five.zsg"
    write_game(five_node, path)
    assert serialize_game(read_game(path)) == serialize_game(five_node)


def test_restrict_min_five_node_last_coordinate(five_node):
    op = restrict_min(five_node, EXAMPLE5_SIGMA0)
    assert op.stochastic
    rng = np.random.default_rng(3)
    for _ in range(20):
        v = rng.normal(size=5)
        expected = 0.5 * (-1 + v[1] + max(v[0], -1 + v[1], v[2], -1 + v[3], 1 + v[4]))
        assert_allclose(apply_g(op, v)[4], expected, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_restrict_min_matches_apply_F(seed):
    game = random_small_game(seed, max_min_actions=3, max_max_actions=3)
    rng = np.random.default_rng(seed)
    sigma = (rng.random(game.n) * game.min_counts).astype(int)
    v = rng.normal(size=game.n)
    op = restrict_min(game, MinStrategy(actions=sigma))
    expected = [apply_F(game, v, i, int(sigma[i])) for i in range(game.n)]
    assert_allclose(apply_g(op, v), expected, atol=1e-12)


def test_fix_pair_five_node(five_node):
    op = restrict_min(five_node, (1, 1, 3, 3, 3))
    P, r = fix_pair(op, (0, 0, 2, 2, 4))
    assert_allclose(P.toarray(), [
        [0.5, 0.5, 0, 0, 0],
        [0.5, 0.5, 0, 0, 0],
        [0, 0, 0.5, 0.5, 0],
        [0, 0, 0.5, 0.5, 0],
        [0, 0, 0, 0.5, 0.5],
    ])
    assert_allclose(r, [0.0, 0.0, 0.0, 0.0, 0.0])


def test_fix_pair_is_affine_map(random_games):
    for game in random_games(10, seed=5):
        op = restrict_min(game, np.zeros(game.n, dtype=int))
        delta = np.zeros(game.n, dtype=int)
        P, r = fix_pair(op, delta)
        v = np.linspace(-1, 1, game.n)
        rows = op.act_ptr[:-1]
        assert_allclose(P @ v + r, (op.trans @ v + op.reward)[rows])


def test_invalid_strategies(five_node):
    with pytest.raises(InvalidStrategyError):
        restrict_min(five_node, (0, 0, 0, 0, 5))
    with pytest.raises(InvalidStrategyError):
        restrict_min(five_node, (0, 0, 0))
    op = restrict_min(five_node, EXAMPLE5_SIGMA0)
    with pytest.raises(InvalidStrategyError):
        fix_pair(op, (0, 0, 0, 0, -1))
    with pytest.raises(InvalidStrategyError):
        five_node.pair_index(0, 7)
