"""
Policy iteration for one-player (MAX) problems.

``howard_stopped`` solves a problem stopped on a set C (every chain
leaves the free states), ``multichain_pi`` is the Denardo-Fox multichain
mean-payoff iteration with lexicographic, conservative improvement.
"""
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .chain_analysis import decompose, minimal_pins, solve_eta_v, solve_transient, with_fallback
from .exceptions import ConvergenceError, InvariantViolation
from .game_model import OnePlayerGame, fix_pair
from .logger import logger
from .models import ClassDecomposition, MaxStrategy, SolveOptions, StrategyLike, as_actions
from .shapley_operator import action_values, segment_argmax, segment_max


class PolicyResult(NamedTuple):
    eta: np.ndarray
    v: np.ndarray
    delta: MaxStrategy
    iterations: int


def _initial_delta(g: OnePlayerGame, delta0: Optional[StrategyLike]) -> np.ndarray:
    if delta0 is None:
        return np.zeros(g.n, dtype=np.int64)
    delta = np.array(as_actions(delta0), dtype=np.int64)
    if delta.shape != (g.n,) or np.any(delta < 0) or np.any(delta >= g.counts):
        raise InvariantViolation("initial MAX strategy does not fit the game")
    return delta


def _scale(*vectors: np.ndarray) -> float:
    return max([1.0] + [float(np.max(np.abs(x))) for x in vectors if x.size])


class StoppedProblem:
    """A one-player game restricted to the free states N = [n] minus C.

    Transitions into C are folded into the rewards using the boundary
    values ``u`` on C, so rows of the restricted game are substochastic.
    """

    def __init__(self, g: OnePlayerGame, critical: Sequence[int], u: np.ndarray):
        self.parent = g
        self.boundary = np.array(u, dtype=float)
        is_free = np.ones(g.n, dtype=bool)
        is_free[np.asarray(critical, dtype=np.int64)] = False
        self.free = np.flatnonzero(is_free)
        self.critical = np.flatnonzero(~is_free)

        rows = np.flatnonzero(is_free[g.action_state])
        sub = g.trans[rows]
        reward = g.reward[rows] + sub[:, self.critical] @ self.boundary[self.critical]
        act_ptr = np.concatenate(([0], np.cumsum(g.counts[self.free])))
        self.game = OnePlayerGame(self.free.size, act_ptr, reward, sub[:, self.free])

    def lift(self, v_free: np.ndarray) -> np.ndarray:
        v = self.boundary.copy()
        v[self.free] = v_free
        return v


def howard_stopped(problem: StoppedProblem, delta0: Optional[StrategyLike] = None,
                   opts: Optional[SolveOptions] = None):
    """Howard's policy iteration for the stopped problem.

    Returns the full vector (boundary values on C, the fixed point on N)
    and the full-length MAX strategy.
    """
    opts = opts or SolveOptions.from_settings()
    lin = opts.linear()
    sub = problem.game
    delta_full = _initial_delta(problem.parent, delta0)
    if sub.n == 0:
        return problem.boundary.copy(), MaxStrategy(actions=delta_full)

    delta = delta_full[problem.free]
    backend = "sor" if lin.solver == "sor" else "direct"
    prev_v = None
    for iteration in range(1, opts.max_inner + 1):
        P, r = fix_pair(sub, delta)
        decomposition = decompose(P)
        if any(decomposition.final):
            states = problem.free[decomposition.final_classes()[0]]
            raise InvariantViolation(f"final class {states.tolist()} inside the free states; "
                                     f"the stopping set misses a critical node")
        v = with_fallback(lambda m: solve_transient(P, r, m, lin), backend, "stopped system")

        if opts.check_invariants and prev_v is not None:
            drop = float(np.max(prev_v - v))
            if drop > 1e-12 * _scale(v):
                raise InvariantViolation(f"Howard values decreased by {drop:.3e}")

        values = action_values(sub, v)
        best = segment_max(values, sub.act_ptr)
        current = values[sub.act_ptr[:-1] + delta]
        improve = best > current + opts.eps_v
        if not improve.any():
            logger.debug(f"howard_stopped: {iteration} iterations on {sub.n} free states")
            delta_full = delta_full.copy()
            delta_full[problem.free] = delta
            return problem.lift(v), MaxStrategy(actions=delta_full)
        delta = np.where(improve, segment_argmax(values, sub.act_ptr), delta)
        prev_v = v

    raise ConvergenceError(f"howard_stopped: no convergence in {opts.max_inner} iterations")


def _select_pins(decomposition: ClassDecomposition, previous: Optional[np.ndarray]) -> np.ndarray:
    """Minimal index per final class, unless the class holds exactly one previous pin."""
    if previous is None or previous.size == 0:
        return minimal_pins(decomposition)
    labels = decomposition.labels
    pins = []
    for states in decomposition.final_classes():
        held = previous[labels[previous] == labels[states[0]]]
        pins.append(int(held[0]) if held.size == 1 else int(states[0]))
    return np.array(pins, dtype=np.int64)


def multichain_pi(g: OnePlayerGame, delta0: Optional[StrategyLike] = None,
                  opts: Optional[SolveOptions] = None) -> PolicyResult:
    """Multichain mean-payoff policy iteration (Denardo-Fox).

    Each iteration solves (eta, v) for the current MAX strategy with v = 0
    on one state per final class, then switches a state only when another
    action improves the slope by more than eps_eta, or keeps the slope and
    improves the bias by more than eps_v.
    """
    opts = opts or SolveOptions.from_settings()
    lin = opts.linear()
    if not g.stochastic:
        raise InvariantViolation("multichain_pi needs a game with stochastic rows")
    ptr = g.act_ptr
    delta = _initial_delta(g, delta0)
    pins = None
    seen = set()
    previous = None

    for iteration in range(1, opts.max_inner + 1):
        key = delta.tobytes()
        if key in seen:
            message = "multichain_pi selected a MAX strategy twice"
            if opts.check_invariants:
                raise InvariantViolation(message)
            raise ConvergenceError(message)
        seen.add(key)

        P, r = fix_pair(g, delta)
        decomposition = decompose(P)
        previous_pins = pins
        pins = _select_pins(decomposition, pins)
        eta, v = solve_eta_v(P, r, pins, lin, decomposition)

        if opts.check_invariants and previous is not None:
            same_pins = previous_pins is not None and np.array_equal(np.sort(pins), np.sort(previous_pins))
            _check_lexicographic(previous[0], previous[1], eta, v, opts.eps_eta, same_pins)

        rec = g.trans @ eta
        rec_best = segment_max(rec, ptr)
        current = ptr[:-1] + delta
        slope_ok = rec >= rec_best[g.action_state] - opts.eps_eta
        values = np.where(slope_ok, action_values(g, v), -np.inf)
        best = segment_max(values, ptr)
        improve = (rec_best > rec[current] + opts.eps_eta) | (best > values[current] + opts.eps_v)
        if not improve.any():
            logger.debug(f"multichain_pi: {iteration} iterations, "
                         f"{len(decomposition.final_classes())} final classes")
            return PolicyResult(eta, v, MaxStrategy(actions=delta), iteration)
        delta = np.where(improve, segment_argmax(values, ptr), delta)
        previous = (eta, v)

    raise ConvergenceError(f"multichain_pi: no convergence in {opts.max_inner} iterations")


def _check_lexicographic(eta0, v0, eta1, v1, eps_eta: float, same_pins: bool) -> None:
    """Gain never decreases; with the same pins the bias does not decrease where the gain is kept."""
    tol = 1e-10 * _scale(v0, v1)
    if np.any(eta1 < eta0 - tol):
        raise InvariantViolation(f"gain decreased by {float(np.max(eta0 - eta1)):.3e}")
    if not same_pins:
        return
    same = np.abs(eta1 - eta0) <= eps_eta
    if np.any(v1[same] < v0[same] - tol):
        raise InvariantViolation(f"bias decreased by {float(np.max((v0 - v1)[same])):.3e} "
                                 f"on states with unchanged gain")
