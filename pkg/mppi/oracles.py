"""
Brute-force verifiers: value iteration and exhaustive enumeration.

Nothing here shares the solvers' improvement logic; the chain solves of
a fixed strategy pair come from chain_analysis.
"""
from itertools import combinations, product
from typing import List, Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .chain_analysis import mean_payoff_fixed_pair
from .config import settings
from .critical_graph import RowFamily
from .exceptions import CapExceeded, SingularSystemError
from .game_model import Game, OnePlayerGame, fix_pair, restrict_min
from .logger import logger
from .models import CriticalResult
from .shapley_operator import apply_f

# above this many MAX strategies the one-player value comes from the LP
EXHAUSTIVE_DELTA_LIMIT = 512
CRITICAL_MAX_STATES = 8
CRITICAL_MAX_MEMBERS = 4


def value_iteration_slope(game: Game, T: int) -> np.ndarray:
    """f^T(0) / T."""
    if T < 1:
        raise ValueError("T must be at least 1")
    v = np.zeros(game.n)
    for _ in range(T):
        v = apply_f(game, v)
    return v / T


def _one_player_exhaustive(op: OnePlayerGame) -> np.ndarray:
    best = np.full(op.n, -np.inf)
    for delta in product(*(range(c) for c in op.counts)):
        P, r = fix_pair(op, delta)
        best = np.maximum(best, mean_payoff_fixed_pair(P, r))
    return best


def _one_player_lp(op: OnePlayerGame) -> np.ndarray:
    """Multichain LP: min sum(eta) with eta >= P eta and eta + v >= r + P v."""
    n = op.n
    E = sp.csr_matrix((np.ones(op.n_actions), (np.arange(op.n_actions), op.action_state)),
                      shape=(op.n_actions, n))
    D = op.trans - E
    A_ub = sp.vstack([sp.hstack([D, sp.csr_matrix(D.shape)]), sp.hstack([-E, D])]).tocsr()
    b_ub = np.concatenate((np.zeros(op.n_actions), -op.reward))
    result = linprog(np.concatenate((np.ones(n), np.zeros(n))), A_ub=A_ub, b_ub=b_ub,
                     bounds=[(None, None)] * (2 * n), method="highs")
    if not result.success:
        raise SingularSystemError(f"mean-payoff LP failed: {result.message}")
    return result.x[:n]


def one_player_value(op: OnePlayerGame) -> np.ndarray:
    if int(np.prod(op.counts.astype(float))) <= EXHAUSTIVE_DELTA_LIMIT:
        return _one_player_exhaustive(op)
    return _one_player_lp(op)


def brute_force_value(game: Game, cap: Optional[int] = None) -> np.ndarray:
    """Componentwise min over MIN strategies of the one-player values.

    The cap bounds the number of strategy pairs enumerated; an inner LP
    solve counts as one.
    """
    cap = cap or settings.brute_force_cap
    n_sigma = float(np.prod(game.min_counts.astype(float)))
    widest = np.maximum.reduceat(game.max_counts, game.min_ptr[:-1]) if game.n else np.ones(0)
    n_delta = float(np.prod(widest.astype(float)))
    if n_sigma * (n_delta if n_delta <= EXHAUSTIVE_DELTA_LIMIT else 1.0) > cap:
        raise CapExceeded(f"{n_sigma:.0f} MIN strategies exceed the enumeration cap {cap}")

    value = np.full(game.n, np.inf)
    for sigma in product(*(range(c) for c in game.min_counts)):
        value = np.minimum(value, one_player_value(restrict_min(game, sigma)))
    logger.debug(f"brute_force_value: {n_sigma:.0f} MIN strategies on {game.n} states")
    return value


# Critical graph by enumeration

def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _support_masks(family: RowFamily, i: int) -> List[int]:
    """Supports of the averages over every nonempty subset of the rows of i."""
    rows = [sum(1 << j for j, p in row if p > 0) for row in family.members(i)]
    masks = set()
    for k in range(1, len(rows) + 1):
        for subset in combinations(rows, k):
            acc = 0
            for mask in subset:
                acc |= mask
            masks.add(acc)
    return sorted(masks)


def _closure(adj: List[int]) -> List[int]:
    reach = list(adj)
    changed = True
    while changed:
        changed = False
        for i, mask in enumerate(reach):
            acc = mask
            for j in _bits(mask):
                acc |= reach[j]
            if acc != mask:
                reach[i] = acc
                changed = True
    return reach


def brute_force_critical(family: RowFamily, cap: Optional[int] = None) -> CriticalResult:
    """Union of the final-class subgraphs over all subset-average selections."""
    cap = cap or settings.brute_force_cap
    n = family.n
    if n > CRITICAL_MAX_STATES or (n and family.sizes().max() > CRITICAL_MAX_MEMBERS):
        raise CapExceeded(f"brute_force_critical handles n <= {CRITICAL_MAX_STATES} "
                          f"with at most {CRITICAL_MAX_MEMBERS} rows per state")
    if n and family.sizes().min() == 0:
        raise CapExceeded("brute_force_critical needs at least one row per state")
    choices = [_support_masks(family, i) for i in range(n)]
    count = float(np.prod([len(c) for c in choices])) if n else 1.0
    if count > cap:
        raise CapExceeded(f"{count:.0f} selections exceed the enumeration cap {cap}")

    critical = [0] * n
    for adj in product(*choices):
        reach = _closure(list(adj))
        for i in range(n):
            own = reach[i]
            if (own >> i) & 1 and all(reach[j] == own for j in _bits(own)):
                critical[i] |= adj[i]

    arcs = sorted((i, j) for i in range(n) for j in _bits(critical[i]))
    nodes = [i for i in range(n) if critical[i]]
    components = _components(critical, nodes)
    return CriticalResult(arcs=arcs, nodes=nodes, components=components)


def _components(adj: List[int], nodes: List[int]) -> List[List[int]]:
    reach = _closure(adj)
    seen = 0
    components = []
    for i in nodes:
        if (seen >> i) & 1:
            continue
        members = [j for j in _bits(reach[i]) if (reach[j] >> i) & 1]
        for j in members:
            seen |= 1 << j
        components.append(sorted(members))
    return sorted(components, key=lambda c: c[0])
