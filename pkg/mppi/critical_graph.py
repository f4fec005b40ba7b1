"""
Critical graph of a one-player operator at a harmonic vector, and the
spectral projection of a super-harmonic vector.
"""
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from .chain_analysis import tarjan_scc
from .exceptions import InvariantViolation
from .game_model import ROW_SUM_TOL, OnePlayerGame
from .logger import logger
from .models import CriticalResult, SolveOptions, StrategyLike
from .one_player_solver import StoppedProblem, howard_stopped
from .shapley_operator import action_values, apply_g, segment_max


class RowFamily:
    """For each state i a finite set of stochastic rows, kept as one csr block.

    The rows of state ``i`` are ``rows[ptr[i]:ptr[i+1]]``; a state may have none.
    """

    def __init__(self, n: int, ptr, rows):
        self.n = int(n)
        self.ptr = np.asarray(ptr, dtype=np.int64)
        self.rows = sp.csr_matrix(rows, dtype=float)
        if self.ptr.shape != (self.n + 1,) or self.ptr[0] != 0 or np.any(np.diff(self.ptr) < 0):
            raise ValueError("ptr must be a nondecreasing array of n+1 offsets from 0")
        if self.rows.shape != (int(self.ptr[-1]), self.n):
            raise ValueError(f"expected {int(self.ptr[-1])} rows of length {self.n}")
        if self.rows.nnz and self.rows.data.min() < 0:
            raise ValueError("family rows must be nonnegative")
        sums = np.asarray(self.rows.sum(axis=1)).reshape(-1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            raise ValueError("family rows must be stochastic")
        self.row_state = np.repeat(np.arange(self.n), np.diff(self.ptr))

    @classmethod
    def from_lists(cls, n: int, members: Sequence[Sequence[Iterable[Tuple[int, float]]]]) -> "RowFamily":
        """Build from per-state lists of rows, each row a list of (j, p) pairs."""
        if len(members) != n:
            raise ValueError(f"expected {n} member lists, got {len(members)}")
        indptr, indices, data, counts = [0], [], [], []
        for rows in members:
            counts.append(len(rows))
            for row in rows:
                for j, p in row:
                    indices.append(int(j))
                    data.append(float(p))
                indptr.append(len(indices))
        ptr = np.concatenate(([0], np.cumsum(counts))).astype(np.int64)
        rows = sp.csr_matrix((data, indices, indptr), shape=(int(ptr[-1]), n))
        return cls(n, ptr, rows)

    def sizes(self) -> np.ndarray:
        return np.diff(self.ptr)

    def members(self, i: int) -> List[List[Tuple[int, float]]]:
        result = []
        for m in range(self.ptr[i], self.ptr[i + 1]):
            start, end = self.rows.indptr[m], self.rows.indptr[m + 1]
            result.append([(int(j), float(p)) for j, p in
                           zip(self.rows.indices[start:end], self.rows.data[start:end])])
        return result


def tilde_family(g: OnePlayerGame, u: np.ndarray, eps: float) -> RowFamily:
    """Rows of the actions b with |G(u; i, b) - u_i| <= eps."""
    u = np.asarray(u, dtype=float)
    values = action_values(g, u)
    gap = np.max(np.abs(segment_max(values, g.act_ptr) - u)) if g.n else 0.0
    slack = 1e-12 * max(1.0, float(np.max(np.abs(u))) if u.size else 1.0)
    if gap > eps + slack:
        raise InvariantViolation(f"vector is not harmonic within {eps:g} (gap {gap:.3e})")
    mask = np.abs(values - u[g.action_state]) <= eps
    counts = np.add.reduceat(mask.astype(np.int64), g.act_ptr[:-1]) if g.n else np.zeros(0, dtype=np.int64)
    ptr = np.concatenate(([0], np.cumsum(counts)))
    return RowFamily(g.n, ptr, g.trans[np.flatnonzero(mask)])


def _support_arcs(rows: sp.csr_matrix, owners: np.ndarray, n: int) -> sp.csr_matrix:
    """0/1 adjacency with an arc i -> j when some row of i has p_j > 0."""
    rows = sp.csr_matrix(rows)
    positive = rows.data > 0
    heads = np.repeat(owners, np.diff(rows.indptr))[positive]
    tails = rows.indices[positive]
    graph = sp.csr_matrix((np.ones(heads.size), (heads, tails)), shape=(n, n))
    graph.sum_duplicates()
    graph.data[:] = 1.0
    return graph


def final_components(graph: sp.csr_matrix) -> List[np.ndarray]:
    """Nontrivial strongly connected components with no arc leaving them."""
    graph = sp.csr_matrix(graph)
    n = graph.shape[0]
    components = tarjan_scc(graph)
    labels = np.empty(n, dtype=np.int64)
    for position, states in enumerate(components):
        labels[states] = position
    heads = np.repeat(np.arange(n), np.diff(graph.indptr))
    tails = graph.indices
    leaving = np.zeros(len(components), dtype=bool)
    leaving[labels[heads[labels[heads] != labels[tails]]]] = True
    has_loop = np.zeros(n, dtype=bool)
    has_loop[heads[heads == tails]] = True

    result = []
    for position, states in enumerate(components):
        if leaving[position]:
            continue
        if len(states) == 1 and not has_loop[states[0]]:
            continue
        result.append(np.array(sorted(states), dtype=np.int64))
    return result


def critical_graph(family: RowFamily) -> CriticalResult:
    """Peel final classes of the support graph until no row is left.

    Each round builds the graph of the remaining rows on the remaining
    states, collects the union F of its final classes with their arcs,
    removes F and drops every row that puts mass on F.
    """
    n = family.n
    alive = np.ones(n, dtype=bool)
    row_alive = np.ones(family.rows.shape[0], dtype=bool)
    support = sp.csr_matrix((family.rows.data > 0, family.rows.indices, family.rows.indptr),
                            shape=family.rows.shape, dtype=float)
    arcs: List[Tuple[int, int]] = []
    components: List[List[int]] = []

    for round_index in range(n + 1):
        active = np.flatnonzero(row_alive & alive[family.row_state])
        if active.size == 0:
            break
        graph = _support_arcs(family.rows[active], family.row_state[active], n)
        finals = final_components(graph)
        if not finals:
            logger.debug(f"critical_graph: round {round_index} found no final class")
            break
        for states in finals:
            components.append(states.tolist())
            block = graph[states]
            heads = np.repeat(states, np.diff(block.indptr))
            arcs.extend(zip(heads.tolist(), block.indices.tolist()))
            alive[states] = False
        # rows keeping all their mass on the remaining states
        row_alive &= (support @ (~alive).astype(float)) == 0

    nodes = sorted({i for component in components for i in component})
    components.sort(key=lambda c: c[0])
    return CriticalResult(arcs=sorted(arcs), nodes=nodes, components=components)


def spectral_projection(g: OnePlayerGame, C: Sequence[int], u: np.ndarray,
                        delta0: Optional[StrategyLike] = None,
                        opts: Optional[SolveOptions] = None) -> np.ndarray:
    """The harmonic vector of g that agrees with the super-harmonic u on C.

    On N = [n] minus C it is the fixed point of the problem stopped on C
    with boundary values u_C.
    """
    opts = opts or SolveOptions.from_settings()
    u = np.asarray(u, dtype=float)
    excess = float(np.max(apply_g(g, u) - u)) if g.n else 0.0
    if excess > opts.eps_v + 1e-12 * max(1.0, float(np.max(np.abs(u)))):
        raise InvariantViolation(f"vector is not super-harmonic (excess {excess:.3e})")
    C = np.asarray(C, dtype=np.int64)
    if C.size == g.n:
        return u.copy()
    v, _ = howard_stopped(StoppedProblem(g, C, u), delta0, opts)

    if opts.check_invariants:
        defect = float(np.max(np.abs(apply_g(g, v) - v)))
        if defect > max(opts.eps_g, 1e-12 * max(1.0, float(np.max(np.abs(v))))) + opts.eps_v:
            raise InvariantViolation(f"projection is not harmonic (defect {defect:.3e})")
    return v
