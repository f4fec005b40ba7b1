import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from mppi.game_model import serialize_game
from mppi.generators import (MOUSE_STILL, example_5node, gen_catmouse, gen_richman, random_row_family,
                             random_sigma, random_small_game, read_coords, richman_from_graph, write_coords)
from mppi.models import CatMouseConfig, RichmanConfig
from mppi.shapley_operator import apply_f
from mppi.two_player_solver import solve


def richman_formula(targets, weights, v):
    values = weights + v[targets]
    return 0.5 * (values.max(axis=1) + values.min(axis=1))


def test_richman_single_node():
    game = gen_richman(RichmanConfig(n=1, out_degree=10, seed=0))
    assert game.n == 1
    c = float(game.reward[0])
    assert_allclose(solve(game).eta, [c])


@pytest.mark.parametrize("seed", range(20))
def test_richman_matches_formula(seed):
    rng = np.random.default_rng(seed)
    n, d = 12, 4
    targets = np.sort(np.stack([rng.permutation(n)[:d] for _ in range(n)]), axis=1)
    weights = rng.integers(0, 2, size=(n, d)).astype(float)
    game = richman_from_graph(targets, weights)
    for _ in range(5):
        v = rng.normal(size=n)
        assert_allclose(apply_f(game, v), richman_formula(targets, weights, v), atol=1e-12)


def test_richman_shape_and_determinism():
    cfg = RichmanConfig(n=50, out_degree=10, seed=7)
    game = gen_richman(cfg)
    assert game.n == 50
    assert np.all(game.min_counts == 10)
    assert np.all(game.max_counts == 10)
    assert serialize_game(gen_richman(cfg)) == serialize_game(game)
    assert serialize_game(gen_richman(RichmanConfig(n=50, seed=8))) != serialize_game(game)


def test_richman_degree_clipped():
    game = gen_richman(RichmanConfig(n=3, out_degree=10, seed=1))
    assert np.all(game.min_counts == 3)


def test_example_5node_entries(five_node):
    # MIN arc 0->1, MAX arc 0->0
    m = five_node.triple_index(0, 1, 0)
    assert five_node.reward[m] == 0.0
    assert five_node.row(m) == [(0, 0.5), (1, 0.5)]
    assert five_node.row(five_node.triple_index(4, 4, 4)) == [(4, 1.0)]
    assert serialize_game(example_5node()) == serialize_game(five_node)


def test_catmouse_rows():
    cfg = CatMouseConfig(grid=9, speed=1.0)
    game, dt, coords = gen_catmouse(cfg)
    assert game.n == 81
    assert dt == pytest.approx(cfg.h / 4.0)
    sums = np.asarray(game.trans.sum(axis=1)).reshape(-1)
    assert np.max(np.abs(sums - 1.0)) <= 1e-15
    assert game.trans.data.min() > 0
    inside = np.flatnonzero(np.hypot(coords[:, 0], coords[:, 1]) < 0.1)
    assert inside.size > 0
    for i in inside:
        for a in range(game.num_min_actions(i)):
            assert game.num_max_actions(i, a) == 1


def test_catmouse_drift_probabilities():
    # center state: cat +1 and mouse +1 on the first axis
    cfg = CatMouseConfig(grid=5, speed=1.0, freeze_radius=0.0)
    game, _, _ = gen_catmouse(cfg)
    center = 12
    cat, mouse = 7, 7
    assert MOUSE_STILL == 4
    row = dict(game.row(game.triple_index(center, cat, mouse)))
    assert row == {center + 5: 0.5, center: 0.5}


def test_catmouse_boundary_keeps_mass_inside():
    game, _, coords = gen_catmouse(CatMouseConfig(grid=7, speed=0.5))
    assert game.trans.indices.max() < game.n
    corner = 0
    assert game.num_min_actions(corner) == 4


def test_catmouse_config_validation():
    with pytest.raises(ValidationError):
        CatMouseConfig(grid=8, speed=1.0)
    with pytest.raises(ValidationError):
        CatMouseConfig(grid=9, speed=0.0)
    with pytest.raises(ValidationError):
        RichmanConfig(n=0)


def test_coords_sidecar(tmp_path):
    _, _, coords = gen_catmouse(CatMouseConfig(grid=5, speed=1.0))
    path = tmp_path / "grid.coords"
    write_coords(coords, path)
    assert_array_equal(read_coords(path), coords)
    assert path.read_text().splitlines()[0] == "0 -0.5 -0.5"


def test_random_instances_are_seeded():
    a = random_small_game(5)
    b = random_small_game(5)
    assert serialize_game(a) == serialize_game(b)
    family = random_row_family(5)
    assert family.n >= 1 and family.sizes().min() >= 1
    sigma = random_sigma(a, 3)
    assert np.all(sigma < a.min_counts)
