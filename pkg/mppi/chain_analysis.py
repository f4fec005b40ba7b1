"""
Markov chain structure and the linear solves of a fixed strategy pair.

Classes are found with an iterative Tarjan, ordered so that no arc goes
from a later class to an earlier one. For a stochastic P and reward r,
``solve_eta_v`` returns the gain eta (eta = P eta) and a bias v
(eta + v = P v + r) pinned to zero on one state of each final class:
final classes first, then the transient states with two solves.
"""
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .exceptions import ConvergenceError, InvariantViolation, SingularSystemError
from .logger import logger
from .models import ClassDecomposition, LinearOptions

FINAL_ESCAPE_TOL = 1e-12
FINAL_DEFICIT_TOL = 1e-9


class StronglyConnectedComponents(object):
    """Tarjan's algorithm over a csr adjacency structure.

    Iterative, with an explicit recursion stack (iter_stack), since the
    recursive version exceeds Python's recursion limit on long chains.
    ``get_result`` lists the components in topological order of the
    condensed graph: every arc between two components goes from an
    earlier one to a later one.
    """

    def __init__(self, indptr: Sequence[int], indices: Sequence[int]):
        self.indptr = list(indptr)
        self.successors = list(indices)
        self.n = len(self.indptr) - 1
        self.BEGIN, self.CONTINUE, self.RETURN = 0, 1, 2  # "recursion" handling

    def get_result(self) -> List[List[int]]:
        self.indices = [-1] * self.n
        self.lowlinks = [-1] * self.n
        self.on_stack = [False] * self.n
        self.current_index = 0
        self.stack: List[int] = []
        self.sccs: List[List[int]] = []

        for i in range(self.n):
            if self.indices[i] < 0:
                self.visit(i)
        self.sccs.reverse()
        return self.sccs

    def visit(self, vertex: int) -> None:
        indptr, successors = self.indptr, self.successors
        indices, lowlinks, on_stack = self.indices, self.lowlinks, self.on_stack
        iter_stack = [(vertex, -1, 0, self.BEGIN)]
        while iter_stack:
            v, w, succ_index, state = iter_stack.pop()

            if state == self.BEGIN:
                indices[v] = lowlinks[v] = self.current_index
                self.current_index += 1
                self.stack.append(v)
                on_stack[v] = True
                iter_stack.append((v, -1, indptr[v], self.CONTINUE))
            elif state == self.CONTINUE:
                if succ_index == indptr[v + 1]:
                    if lowlinks[v] == indices[v]:
                        scc = []
                        while True:
                            u = self.stack.pop()
                            on_stack[u] = False
                            scc.append(u)
                            if u == v:
                                break
                        self.sccs.append(scc)
                else:
                    w = successors[succ_index]
                    if indices[w] < 0:
                        iter_stack.append((v, w, succ_index, self.RETURN))
                        iter_stack.append((w, -1, 0, self.BEGIN))
                    else:
                        if on_stack[w]:
                            lowlinks[v] = min(lowlinks[v], indices[w])
                        iter_stack.append((v, -1, succ_index + 1, self.CONTINUE))
            elif state == self.RETURN:
                lowlinks[v] = min(lowlinks[v], lowlinks[w])
                iter_stack.append((v, -1, succ_index + 1, self.CONTINUE))


def support_graph(P) -> sp.csr_matrix:
    """Arcs (i, j) with P[i, j] > 0."""
    P = sp.csr_matrix(P)
    graph = sp.csr_matrix((P.data > 0, P.indices, P.indptr), shape=P.shape)
    graph.eliminate_zeros()
    return graph


def tarjan_scc(graph) -> List[List[int]]:
    graph = sp.csr_matrix(graph)
    return StronglyConnectedComponents(graph.indptr, graph.indices).get_result()


def decompose(P) -> ClassDecomposition:
    """Irreducible classes of P, topologically ordered, with final flags.

    A class is final when no row of it sends mass outside the class
    (escape at most 1e-12) and no row has a deficit beyond 1e-9.
    """
    P = sp.csr_matrix(P, dtype=float)
    n = P.shape[0]
    components = tarjan_scc(support_graph(P))
    classes = [np.array(sorted(c), dtype=np.int64) for c in components]
    labels = np.empty(n, dtype=np.int64)
    for position, states in enumerate(classes):
        labels[states] = position

    rows = np.repeat(np.arange(n), np.diff(P.indptr))
    outside = labels[rows] != labels[P.indices]
    escape = np.bincount(rows, weights=P.data * outside, minlength=n)
    deficit = 1.0 - np.asarray(P.sum(axis=1)).reshape(-1)
    leaking = (escape > FINAL_ESCAPE_TOL) | (deficit > FINAL_DEFICIT_TOL)
    leaking_class = np.zeros(len(classes), dtype=bool)
    leaking_class[labels[leaking]] = True

    return ClassDecomposition(classes=classes, final=[not x for x in leaking_class], labels=labels)


# Linear solvers

def _factorize(A: sp.spmatrix, what: str):
    try:
        return splu(sp.csc_matrix(A))
    except RuntimeError as e:
        raise SingularSystemError(f"{what}: {e}") from e


def _direct_solve(A: sp.spmatrix, b: np.ndarray, what: str) -> np.ndarray:
    if A.shape[0] == 1:
        a = float(A.toarray()[0, 0])
        if a == 0.0:
            raise SingularSystemError(f"{what}: singular 1x1 system")
        return np.array([b[0] / a])
    x = _factorize(A, what).solve(np.asarray(b, dtype=float))
    if not np.all(np.isfinite(x)):
        raise SingularSystemError(f"{what}: non-finite solution")
    return x


def _sor(A: sp.spmatrix, b: np.ndarray, x0: np.ndarray, opts: LinearOptions, what: str,
         project: Optional[Callable[[np.ndarray], np.ndarray]] = None) -> np.ndarray:
    """SOR sweeps for A x = b with A = D - L - U.

    M = D - omega L is solved by a triangular factorization, N = (1 - omega) D + omega U,
    x <- M^{-1} (N x + omega b), followed by ``project`` when given.
    """
    A = sp.csr_matrix(A)
    omega = opts.sor_omega
    diag = A.diagonal()
    if np.any(diag <= 0):
        raise SingularSystemError(f"{what}: nonpositive diagonal, SOR is not applicable")
    lower = sp.tril(A, k=-1)
    upper = sp.triu(A, k=1)
    M = sp.diags(diag) + omega * lower
    N = sp.diags((1.0 - omega) * diag) - omega * upper
    lu = splu(sp.csc_matrix(M), permc_spec="NATURAL", diag_pivot_thresh=0.0)
    N = sp.csr_matrix(N)
    rhs = omega * np.asarray(b, dtype=float)

    x = np.asarray(x0, dtype=float).copy()
    max_sweeps = opts.sor_max_sweeps_factor * A.shape[0]
    for sweep in range(1, max_sweeps + 1):
        x_new = lu.solve(N @ x + rhs)
        if project is not None:
            x_new = project(x_new)
        change = np.max(np.abs(x_new - x))
        x = x_new
        if change <= opts.sor_tol:
            logger.debug(f"{what}: SOR converged in {sweep} sweeps")
            return x
    raise ConvergenceError(f"{what}: SOR did not converge in {max_sweeps} sweeps (last change {change:.3e})")


def stationary(P_FF, method: str = "direct", opts: Optional[LinearOptions] = None) -> np.ndarray:
    """Stationary distribution pi (pi P = pi, sum 1) of an irreducible stochastic block."""
    opts = opts or LinearOptions.from_settings()
    P_FF = sp.csr_matrix(P_FF, dtype=float)
    k = P_FF.shape[0]
    if k == 1:
        return np.ones(1)
    A = sp.identity(k, format="csr") - P_FF.T.tocsr()

    if method == "direct":
        # the equation of the minimal state is replaced by sum(pi) = 1
        bordered = sp.vstack([sp.csr_matrix(np.ones((1, k))), A[1:]])
        rhs = np.zeros(k)
        rhs[0] = 1.0
        pi = _direct_solve(bordered, rhs, "stationary distribution")
    elif method == "sor":
        pi = _sor(A, np.zeros(k), np.full(k, 1.0 / k), opts, "stationary distribution",
                  project=lambda x: x / x.sum())
    else:
        raise ValueError(f"unknown method {method!r}")
    return pi / pi.sum()


def solve_transient(P_TT, c: np.ndarray, method: str = "direct",
                    opts: Optional[LinearOptions] = None) -> np.ndarray:
    """The unique x with x = P_TT x + c, for a block without final class."""
    opts = opts or LinearOptions.from_settings()
    P_TT = sp.csr_matrix(P_TT, dtype=float)
    k = P_TT.shape[0]
    c = np.asarray(c, dtype=float)
    if k == 0:
        return np.zeros(0)
    A = sp.identity(k, format="csr") - P_TT
    if method == "direct":
        return _direct_solve(A, c, "transient system")
    if method == "sor":
        return _sor(A, c, c.copy(), opts, "transient system")
    raise ValueError(f"unknown method {method!r}")


def with_fallback(solve: Callable[[str], np.ndarray], method: str, what: str):
    if method == "direct":
        return solve("direct")
    try:
        return solve(method)
    except ConvergenceError as e:
        logger.warning(f"{what}: {e}; falling back to the direct solver")
        return solve("direct")


def _final_method(opts: LinearOptions, size: int) -> Tuple[str, str]:
    """(method letter, backend) for a final class of ``size`` states."""
    backend = "sor" if opts.solver == "sor" else "direct"
    if opts.final_method == "A":
        return "A", backend
    if opts.final_method == "B":
        return "B", "direct"
    if backend == "sor" and size > opts.sor_class_threshold:
        return "A", "sor"
    return "B", "direct"


def _solve_final_class(P_FF: sp.csr_matrix, r_F: np.ndarray, pin: int,
                       opts: LinearOptions) -> Tuple[float, np.ndarray]:
    """(eta_bar, v_F) on one final class with v_F[pin] = 0."""
    k = P_FF.shape[0]
    if k == 1:
        return float(r_F[0]), np.zeros(1)
    letter, backend = _final_method(opts, k)
    A = sp.identity(k, format="csr") - P_FF

    if letter == "B":
        # column of the pinned state carries the unknown eta_bar
        A = sp.csc_matrix(A)
        bordered = sp.hstack([A[:, :pin], sp.csc_matrix(np.ones((k, 1))), A[:, pin + 1:]])
        z = _direct_solve(bordered, r_F, "bordered final-class system")
        eta_bar = float(z[pin])
        v = z.copy()
        v[pin] = 0.0
        return eta_bar, v

    pi = with_fallback(lambda m: stationary(P_FF, m, opts), backend, "stationary distribution")
    eta_bar = float(pi @ r_F)
    rhs = r_F - eta_bar
    if backend == "sor":
        def pin_to_zero(x):
            return x - x[pin]
        try:
            return eta_bar, _sor(A, rhs, np.zeros(k), opts, "final-class bias", project=pin_to_zero)
        except ConvergenceError as e:
            logger.warning(f"final-class bias: {e}; falling back to the direct solver")
    # redundant equation of the minimal state dropped, v[pin] = 0
    keep = np.flatnonzero(np.arange(k) != pin)
    reduced = sp.csr_matrix(A)[1:][:, keep]
    v = np.zeros(k)
    v[keep] = _direct_solve(reduced, rhs[1:], "final-class bias")
    return eta_bar, v


def _check_pins(decomposition: ClassDecomposition, S: np.ndarray) -> List[Tuple[np.ndarray, int]]:
    finals = decomposition.final_classes()
    if S.size != len(finals):
        raise InvariantViolation(f"S has {S.size} states but P has {len(finals)} final classes")
    labels = decomposition.labels
    pinned = {}
    for s in S.tolist():
        if not 0 <= s < decomposition.n:
            raise InvariantViolation(f"pinned state {s} out of range")
        pinned.setdefault(int(labels[s]), []).append(s)
    result = []
    for states in finals:
        pins = pinned.get(int(labels[states[0]]), [])
        if len(pins) != 1:
            raise InvariantViolation(f"final class starting at state {int(states[0])} "
                                     f"holds {len(pins)} pinned states")
        result.append((states, int(np.searchsorted(states, pins[0]))))
    return result


def minimal_pins(decomposition: ClassDecomposition) -> np.ndarray:
    """The minimal state of each final class."""
    return np.array([int(c[0]) for c in decomposition.final_classes()], dtype=np.int64)


def solve_eta_v(P, r: np.ndarray, S: Sequence[int], opts: Optional[LinearOptions] = None,
                decomposition: Optional[ClassDecomposition] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Gain and bias of the chain (P, r) with v = 0 on the states of S."""
    opts = opts or LinearOptions.from_settings()
    P = sp.csr_matrix(P, dtype=float)
    r = np.asarray(r, dtype=float)
    n = P.shape[0]
    decomposition = decomposition or decompose(P)
    S = np.unique(np.asarray(S, dtype=np.int64))
    eta = np.zeros(n)
    v = np.zeros(n)

    for states, pin in _check_pins(decomposition, S):
        P_FF = P[states][:, states]
        eta_bar, v_F = _solve_final_class(P_FF, r[states], pin, opts)
        eta[states] = eta_bar
        v[states] = v_F

    T = decomposition.transient_states()
    if T.size:
        backend = "sor" if opts.solver == "sor" else "direct"
        R = np.flatnonzero(~np.isin(np.arange(n), T))
        P_T = P[T]
        P_TT = P_T[:, T]
        P_TR = P_T[:, R]
        eta_T = with_fallback(lambda m: solve_transient(P_TT, P_TR @ eta[R], m, opts),
                               backend, "transient gain")
        eta[T] = eta_T
        v[T] = with_fallback(lambda m: solve_transient(P_TT, P_TR @ v[R] + r[T] - eta_T, m, opts),
                              backend, "transient bias")
    return eta, v


def mean_payoff_fixed_pair(P, r: np.ndarray, opts: Optional[LinearOptions] = None) -> np.ndarray:
    """Gain only: pi_F r_F on each final class, then one transient solve."""
    opts = opts or LinearOptions.from_settings(solver="lu")
    P = sp.csr_matrix(P, dtype=float)
    r = np.asarray(r, dtype=float)
    n = P.shape[0]
    decomposition = decompose(P)
    eta = np.zeros(n)
    for states in decomposition.final_classes():
        pi = stationary(P[states][:, states], "direct", opts)
        eta[states] = pi @ r[states]
    T = decomposition.transient_states()
    if T.size:
        R = np.flatnonzero(~np.isin(np.arange(n), T))
        P_T = P[T]
        eta[T] = solve_transient(P_T[:, T], P_T[:, R] @ eta[R], "direct", opts)
    return eta
