"""
Benchmark and test instances.

Richman-type games on random graphs, the fixed 5-node game with its
reference trace biases, the cat-and-mouse pursuit game on a grid, and seeded
random small instances for the oracle cross-checks.
"""
from itertools import product
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .critical_graph import RowFamily
from .game_model import Game
from .logger import logger
from .models import CatMouseConfig, RichmanConfig

Seed = Union[int, np.random.Generator, None]


def make_rng(seed: Seed) -> np.random.Generator:
    """PCG64 generator from an integer seed; generators pass through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


# Richman / tug-of-war

def richman_from_graph(targets: np.ndarray, weights: np.ndarray) -> Game:
    """Game of f_i(x) = 1/2 (max_j (r_ij + x_j) + min_j (r_ij + x_j)).

    ``targets[i]`` lists the out-neighbors of i and ``weights[i]`` the arc
    rewards. MIN action a and MAX action b both pick an arc; the triple
    moves with probability 1/2 along each (1 when they coincide).
    """
    targets = np.asarray(targets, dtype=np.int64)
    weights = np.asarray(weights, dtype=float)
    n, d = targets.shape
    if weights.shape != (n, d):
        raise ValueError("targets and weights must have the same shape")

    ta = np.broadcast_to(targets[:, :, None], (n, d, d)).reshape(-1)
    tb = np.broadcast_to(targets[:, None, :], (n, d, d)).reshape(-1)
    reward = 0.5 * (weights[:, :, None] + weights[:, None, :]).reshape(-1)
    m = np.arange(n * d * d)
    trans = sp.csr_matrix((np.full(2 * m.size, 0.5), (np.concatenate((m, m)), np.concatenate((ta, tb)))),
                          shape=(m.size, n))
    trans.sum_duplicates()
    min_ptr = np.arange(n + 1) * d
    max_ptr = np.arange(n * d + 1) * d
    return Game(n, min_ptr, max_ptr, reward, trans)


def _distinct_targets(rng: np.random.Generator, n: int, d: int) -> np.ndarray:
    if d == n:
        return np.tile(np.arange(n), (n, 1))
    if 2 * d > n:
        return np.sort(np.stack([rng.permutation(n)[:d] for _ in range(n)]), axis=1)
    targets = rng.integers(0, n, size=(n, d))
    while True:
        ordered = np.sort(targets, axis=1)
        repeated = np.any(np.diff(ordered, axis=1) == 0, axis=1)
        if not repeated.any():
            return ordered
        targets[repeated] = rng.integers(0, n, size=(int(repeated.sum()), d))


def gen_richman(cfg: RichmanConfig) -> Game:
    rng = make_rng(cfg.seed)
    d = min(cfg.out_degree, cfg.n)
    if d < cfg.out_degree:
        logger.debug(f"gen_richman: out_degree {cfg.out_degree} clipped to {d}")
    targets = _distinct_targets(rng, cfg.n, d)
    weights = rng.integers(0, 2, size=(cfg.n, d)).astype(float)
    return richman_from_graph(targets, weights)


# The 5-node game

EXAMPLE5_WEIGHTS = np.array([
    [1, -1, 0, 0, 0],
    [1, -1, 0, 0, 0],
    [0, 0, 1, -1, 0],
    [0, 0, 1, -1, 0],
    [0, -1, 0, -1, 1],
], dtype=float)

# MIN starts on arcs 1->2, 2->2, 3->4, 4->4, 5->2 (nodes numbered from 1)
EXAMPLE5_SIGMA0 = (1, 1, 3, 3, 1)


def example_5node() -> Game:
    return richman_from_graph(np.tile(np.arange(5), (5, 1)), EXAMPLE5_WEIGHTS)


def example_5node_trace() -> Dict[Tuple[int, ...], np.ndarray]:
    """Biases of the reference trace, keyed by MIN strategy.

    With these injected the first iteration is strongly degenerate and,
    without projection, the MIN strategy returns to its start.
    """
    return {
        EXAMPLE5_SIGMA0: np.array([0.0, 0.0, -0.5, -0.5, 0.0]),
        (1, 1, 3, 3, 3): np.array([0.0, 0.0, 0.5, 0.5, 0.5]),
    }


# Cat and mouse

MOUSE_STEPS = np.array(list(product((-1.0, 0.0, 1.0), repeat=2)))
MOUSE_STILL = 4


def gen_catmouse(cfg: CatMouseConfig) -> Tuple[Game, float, np.ndarray]:
    """Pursuit game on the m x m grid of [-0.5, 0.5]^2.

    The state is the relative position x; MIN (the cat) and MAX (the
    mouse) add velocities. Transitions follow an upwind scheme with the
    uniform normalizer Q = 2(1 + speed) and time step dt = h / Q; the
    reward of a step is |x|^2 dt. Returns the game, dt and the (n, 2)
    array of coordinates.
    """
    m, speed, h = cfg.grid, cfg.speed, cfg.h
    n = m * m
    ix, iy = np.divmod(np.arange(n), m)
    coords = np.column_stack((-0.5 + ix * h, -0.5 + iy * h))
    Q = 2.0 * (1.0 + speed)
    dt = h / Q

    cat_steps = speed * MOUSE_STEPS
    # drop components pointing out of the domain
    low = np.column_stack((ix == 0, iy == 0))
    high = np.column_stack((ix == m - 1, iy == m - 1))

    def allowed(steps: np.ndarray) -> np.ndarray:
        out = (low[:, None, :] & (steps[None, :, :] < 0)) | (high[:, None, :] & (steps[None, :, :] > 0))
        return ~np.any(out, axis=2)

    min_mask = allowed(cat_steps)
    max_mask = allowed(MOUSE_STEPS)
    frozen = np.hypot(coords[:, 0], coords[:, 1]) < cfg.freeze_radius
    max_mask[frozen] = False
    max_mask[frozen, MOUSE_STILL] = True

    state, a, b = np.nonzero(min_mask[:, :, None] & max_mask[:, None, :])
    min_counts = min_mask.sum(axis=1)
    max_counts = np.repeat(max_mask.sum(axis=1), min_counts)
    min_ptr = np.concatenate(([0], np.cumsum(min_counts)))
    max_ptr = np.concatenate(([0], np.cumsum(max_counts)))

    drift = cat_steps[a] + MOUSE_STEPS[b]
    g1, g2 = drift[:, 0], drift[:, 1]
    stay = np.maximum(1.0 - (np.abs(g1) + np.abs(g2)) / Q, 0.0)
    probs = np.column_stack((np.maximum(-g1, 0), np.maximum(-g2, 0), np.zeros_like(g1),
                             np.maximum(g2, 0), np.maximum(g1, 0))) / Q
    probs[:, 2] = stay
    cols = state[:, None] + np.array([-m, -1, 0, 1, m])[None, :]

    keep = probs > 0
    indptr = np.concatenate(([0], np.cumsum(keep.sum(axis=1))))
    trans = sp.csr_matrix((probs[keep], cols[keep], indptr), shape=(state.size, n))
    reward = (coords[state, 0] ** 2 + coords[state, 1] ** 2) * dt
    logger.debug(f"gen_catmouse: {n} states, {state.size} triples, {int(frozen.sum())} frozen")
    return Game(n, min_ptr, max_ptr, reward, trans), dt, coords


def write_coords(coords: np.ndarray, path: Union[str, Path]) -> None:
    """Sidecar file, one ``state_index x y`` line per state."""
    with open(path, "w", encoding="utf-8") as f:
        for i, (x, y) in enumerate(coords):
            f.write(f"{i} {x:.17g} {y:.17g}\n")


def read_coords(path: Union[str, Path]) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            parts = line.split()
            if parts:
                rows.append((int(parts[0]), float(parts[1]), float(parts[2])))
    rows.sort()
    return np.array([(x, y) for _, x, y in rows], dtype=float).reshape(-1, 2)


# Random small instances

def _random_row(rng: np.random.Generator, n: int, max_arcs: int) -> Tuple[np.ndarray, np.ndarray]:
    k = int(rng.integers(1, min(max_arcs, n) + 1))
    cols = np.sort(rng.choice(n, size=k, replace=False))
    weights = rng.integers(1, 4, size=k).astype(float)
    return cols, weights / weights.sum()


def _rows_to_csr(rows, n: int) -> sp.csr_matrix:
    indptr = np.concatenate(([0], np.cumsum([cols.size for cols, _ in rows]))).astype(np.int64)
    indices = np.concatenate([cols for cols, _ in rows]) if rows else np.zeros(0, dtype=np.int64)
    data = np.concatenate([p for _, p in rows]) if rows else np.zeros(0)
    return sp.csr_matrix((data, indices, indptr), shape=(len(rows), n))


def random_small_game(seed: Seed = None, n: Optional[int] = None, max_states: int = 5,
                      max_min_actions: int = 2, max_max_actions: int = 2, max_arcs: int = 3) -> Game:
    """Random game with rewards in {-1, 0, 1} and rational probabilities."""
    rng = make_rng(seed)
    n = int(n if n is not None else rng.integers(1, max_states + 1))
    min_counts = rng.integers(1, max_min_actions + 1, size=n)
    max_counts = rng.integers(1, max_max_actions + 1, size=int(min_counts.sum()))
    n_triples = int(max_counts.sum())
    rows = [_random_row(rng, n, max_arcs) for _ in range(n_triples)]
    reward = rng.integers(-1, 2, size=n_triples).astype(float)
    min_ptr = np.concatenate(([0], np.cumsum(min_counts)))
    max_ptr = np.concatenate(([0], np.cumsum(max_counts)))
    return Game(n, min_ptr, max_ptr, reward, _rows_to_csr(rows, n))


def random_row_family(seed: Seed = None, n: Optional[int] = None, max_states: int = 6,
                      max_members: int = 3, max_arcs: int = 3) -> RowFamily:
    rng = make_rng(seed)
    n = int(n if n is not None else rng.integers(1, max_states + 1))
    sizes = rng.integers(1, max_members + 1, size=n)
    rows = [_random_row(rng, n, max_arcs) for _ in range(int(sizes.sum()))]
    return RowFamily(n, np.concatenate(([0], np.cumsum(sizes))), _rows_to_csr(rows, n))


def random_sigma(game: Game, seed: Seed = None) -> np.ndarray:
    rng = make_rng(seed)
    return (rng.random(game.n) * game.min_counts).astype(np.int64)
