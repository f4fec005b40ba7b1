"""
Shapley operator of a game and of a one-player game.

f_i(v) = min_a max_b (P v + r), its recession function (rewards dropped),
the tangent at infinity f_eta (actions restricted to the slope-optimal sets)
and the residual of a half-line. Ties always resolve to the lowest index.
"""
import numpy as np

from .game_model import Game, OnePlayerGame
from .models import HalfLine


# Segment reductions over the flat layout

def segment_owner(ptr: np.ndarray) -> np.ndarray:
    return np.repeat(np.arange(len(ptr) - 1), np.diff(ptr))


def segment_max(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    if len(ptr) <= 1:
        return np.zeros(0)
    return np.maximum.reduceat(values, ptr[:-1])


def segment_min(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    if len(ptr) <= 1:
        return np.zeros(0)
    return np.minimum.reduceat(values, ptr[:-1])


def segment_first(mask: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    """Local index of the first True entry of each segment (segment length if none)."""
    if len(ptr) <= 1:
        return np.zeros(0, dtype=np.int64)
    idx = np.where(mask, np.arange(mask.size), mask.size)
    first = np.minimum.reduceat(idx, ptr[:-1])
    return np.minimum(first, ptr[1:]) - ptr[:-1]


def segment_argmax(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    best = segment_max(values, ptr)
    return segment_first(values >= best[segment_owner(ptr)], ptr)


def segment_argmin(values: np.ndarray, ptr: np.ndarray) -> np.ndarray:
    best = segment_min(values, ptr)
    return segment_first(values <= best[segment_owner(ptr)], ptr)


def near_max_mask(values: np.ndarray, ptr: np.ndarray, eps: float) -> np.ndarray:
    return values >= segment_max(values, ptr)[segment_owner(ptr)] - eps


def near_min_mask(values: np.ndarray, ptr: np.ndarray, eps: float) -> np.ndarray:
    return values <= segment_min(values, ptr)[segment_owner(ptr)] + eps


# Two-player operator

def triple_values(game: Game, v: np.ndarray) -> np.ndarray:
    """P v + r for every (i, a, b)."""
    return game.trans @ v + game.reward


def apply_F(game: Game, v: np.ndarray, i: int, a: int) -> float:
    """F(v; i, a) = max over b of (P v + r)."""
    k = game.pair_index(i, a)
    start, end = game.max_ptr[k], game.max_ptr[k + 1]
    values = game.trans[start:end] @ v + game.reward[start:end]
    return float(values.max())


def pair_values(game: Game, v: np.ndarray) -> np.ndarray:
    """F(v; i, a) for every pair (i, a)."""
    return segment_max(triple_values(game, v), game.max_ptr)


def apply_f(game: Game, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return segment_min(pair_values(game, v), game.min_ptr)


def recession(game: Game, eta: np.ndarray) -> np.ndarray:
    eta = np.asarray(eta, dtype=float)
    return segment_min(segment_max(game.trans @ eta, game.max_ptr), game.min_ptr)


class SlopeSets:
    """Argmin/argmax action sets of the recession function at a slope.

    ``max_mask`` flags the triples in B̄_i(a, eta), ``min_mask`` the pairs in Ā_i(eta).
    """

    def __init__(self, game: Game, eta: np.ndarray, eps_eta: float = 0.0):
        eta = np.asarray(eta, dtype=float)
        rec_triples = game.trans @ eta
        self.rec_pairs = segment_max(rec_triples, game.max_ptr)
        self.rec_states = segment_min(self.rec_pairs, game.min_ptr)
        self.max_mask = rec_triples >= self.rec_pairs[game.triple_pair] - eps_eta
        self.min_mask = self.rec_pairs <= self.rec_states[game.pair_state] + eps_eta

    def tangent_pairs(self, game: Game, v: np.ndarray) -> np.ndarray:
        """F_eta(v; i, a), the max over B̄ only; +inf outside Ā."""
        values = np.where(self.max_mask, triple_values(game, v), -np.inf)
        return np.where(self.min_mask, segment_max(values, game.max_ptr), np.inf)


def min_action_set(game: Game, eta: np.ndarray, i: int, eps_eta: float = 0.0) -> np.ndarray:
    """Ā_i(eta): MIN actions within eps_eta of the recession minimum."""
    start, end = game.min_ptr[i], game.min_ptr[i + 1]
    rec = np.array([_rec_pair(game, eta, k) for k in range(start, end)])
    return np.flatnonzero(rec <= rec.min() + eps_eta)


def max_action_set(game: Game, eta: np.ndarray, i: int, a: int, eps_eta: float = 0.0) -> np.ndarray:
    """B̄_i(a, eta): MAX actions within eps_eta of the recession maximum."""
    k = game.pair_index(i, a)
    start, end = game.max_ptr[k], game.max_ptr[k + 1]
    rec = game.trans[start:end] @ np.asarray(eta, dtype=float)
    return np.flatnonzero(rec >= rec.max() - eps_eta)


def _rec_pair(game: Game, eta: np.ndarray, k: int) -> float:
    start, end = game.max_ptr[k], game.max_ptr[k + 1]
    return float((game.trans[start:end] @ np.asarray(eta, dtype=float)).max())


def tangent(game: Game, eta: np.ndarray, v: np.ndarray, eps_eta: float = 0.0) -> np.ndarray:
    sets = SlopeSets(game, eta, eps_eta)
    return segment_min(sets.tangent_pairs(game, np.asarray(v, dtype=float)), game.min_ptr)


def residual(game: Game, hl: HalfLine, eps_eta: float = 0.0) -> float:
    """0.5 (||f̂(eta) - eta|| + ||f_eta(v) - eta - v||), sup norms."""
    eta, v = hl.eta, hl.v
    slope_part = np.max(np.abs(recession(game, eta) - eta))
    bias_part = np.max(np.abs(tangent(game, eta, v, eps_eta) - eta - v))
    return float(0.5 * (slope_part + bias_part))


def halfline_defect(game: Game, eta: np.ndarray, v: np.ndarray, t: float) -> float:
    """||f(t eta + v) - (t f̂(eta) + f_eta(v))||, zero for t large enough."""
    eta = np.asarray(eta, dtype=float)
    v = np.asarray(v, dtype=float)
    lhs = apply_f(game, t * eta + v)
    rhs = t * recession(game, eta) + tangent(game, eta, v)
    return float(np.max(np.abs(lhs - rhs)))


# One-player operator

def action_values(op: OnePlayerGame, v: np.ndarray) -> np.ndarray:
    return op.trans @ v + op.reward


def apply_g(op: OnePlayerGame, v: np.ndarray) -> np.ndarray:
    return segment_max(action_values(op, np.asarray(v, dtype=float)), op.act_ptr)


def recession_g(op: OnePlayerGame, eta: np.ndarray) -> np.ndarray:
    return segment_max(op.trans @ np.asarray(eta, dtype=float), op.act_ptr)


def slope_mask_g(op: OnePlayerGame, eta: np.ndarray, eps_eta: float = 0.0) -> np.ndarray:
    """Flags the actions of B̄(eta) for every state."""
    return near_max_mask(op.trans @ np.asarray(eta, dtype=float), op.act_ptr, eps_eta)


def max_action_set_g(op: OnePlayerGame, eta: np.ndarray, i: int, eps_eta: float = 0.0) -> np.ndarray:
    start, end = op.act_ptr[i], op.act_ptr[i + 1]
    rec = op.trans[start:end] @ np.asarray(eta, dtype=float)
    return np.flatnonzero(rec >= rec.max() - eps_eta)


def tangent_g(op: OnePlayerGame, eta: np.ndarray, v: np.ndarray, eps_eta: float = 0.0) -> np.ndarray:
    mask = slope_mask_g(op, eta, eps_eta)
    values = np.where(mask, action_values(op, np.asarray(v, dtype=float)), -np.inf)
    return segment_max(values, op.act_ptr)


def residual_g(op: OnePlayerGame, eta: np.ndarray, v: np.ndarray, eps_eta: float = 0.0) -> float:
    eta = np.asarray(eta, dtype=float)
    v = np.asarray(v, dtype=float)
    if op.n == 0:
        return 0.0
    slope_part = np.max(np.abs(recession_g(op, eta) - eta))
    bias_part = np.max(np.abs(tangent_g(op, eta, v, eps_eta) - eta - v))
    return float(0.5 * (slope_part + bias_part))


def tangent_game(op: OnePlayerGame, eta: np.ndarray, eps_eta: float = 0.0) -> OnePlayerGame:
    """The one-player game of v -> tangent_g(op, eta, v) - eta.

    Only the actions of B̄(eta) are kept; rewards are shifted by -eta.
    """
    eta = np.asarray(eta, dtype=float)
    mask = slope_mask_g(op, eta, eps_eta)
    reward = op.reward - eta[op.action_state]
    return op.with_rewards(reward).select(mask)
