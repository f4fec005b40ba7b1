"""
Two-player driver: policy iteration on MIN's strategies.

Each outer iteration fixes MIN's strategy sigma, solves the one-player
problem for MAX (multichain policy iteration), and then improves sigma
against the tangent operator. When the slope does not move, the bias is
pushed through the spectral projection on the critical graph so that the
sequence of biases keeps decreasing and the iteration cannot cycle.
"""
import time
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np

from .critical_graph import critical_graph, spectral_projection, tilde_family
from .exceptions import ConvergenceError, CycleDetected, InvariantViolation
from .game_model import Game, OnePlayerGame, _validate_choice, restrict_min
from .logger import logger
from .models import (HalfLine, IterationRecord, MaxStrategy, MinStrategy, SolveOptions,
                     SolveReport, StrategyLike, as_actions)
from .one_player_solver import multichain_pi
from .shapley_operator import (SlopeSets, residual, residual_g, segment_argmin, segment_min,
                               slope_mask_g, tangent_game)

NEAR_DEGENERATE_FACTOR = 100.0
INJECTED_BIAS_TOL = 1e-9
MONOTONE_BIAS_TOL = 1e-10


def improve_min(game: Game, sigma: np.ndarray, eta: np.ndarray, v: np.ndarray,
                opts: SolveOptions) -> Tuple[np.ndarray, np.ndarray]:
    """One MIN improvement step against the tangent operator at eta.

    The current action is kept when it is slope-optimal and its tangent
    value is within eps_v of the minimum; otherwise the lowest-index
    minimizer over the slope-optimal actions is taken.
    """
    sets = SlopeSets(game, eta, opts.eps_eta)
    values = sets.tangent_pairs(game, v)
    best = segment_min(values, game.min_ptr)
    current = game.min_ptr[:-1] + sigma
    keep = sets.min_mask[current] & (values[current] <= best + opts.eps_v)
    new_sigma = np.where(keep, sigma, segment_argmin(values, game.min_ptr))
    return new_sigma, new_sigma != sigma


def _delta_on_tangent(op: OnePlayerGame, eta: np.ndarray, eps_eta: float,
                      delta: np.ndarray) -> np.ndarray:
    """Re-index a MAX strategy of op into the actions kept by tangent_game."""
    mask = slope_mask_g(op, eta, eps_eta)
    kept_before = np.cumsum(mask) - mask
    chosen = op.act_ptr[:-1] + delta
    local = kept_before[chosen] - kept_before[op.act_ptr[:-1]]
    return np.where(mask[chosen], local, 0).astype(np.int64)


def _bias_table(trace_biases: Optional[Mapping[Sequence[int], Sequence[float]]]) -> Dict[tuple, np.ndarray]:
    if not trace_biases:
        return {}
    return {tuple(int(a) for a in key): np.asarray(value, dtype=float)
            for key, value in trace_biases.items()}


def _report(sigma, delta, eta, v, res, trace, started, converged=True, cycle=False) -> SolveReport:
    return SolveReport(
        halfline=HalfLine(eta=eta, v=v),
        sigma=MinStrategy(actions=sigma),
        delta=MaxStrategy(actions=delta),
        residual=float(res),
        trace=list(trace),
        wall_seconds=time.perf_counter() - started,
        converged=converged,
        cycle=cycle,
    )


def solve(game: Game, sigma0: Optional[StrategyLike] = None, opts: Optional[SolveOptions] = None,
          trace_biases: Optional[Mapping[Sequence[int], Sequence[float]]] = None) -> SolveReport:
    """Invariant half-line (eta, v) of the Shapley operator of ``game``.

    ``trace_biases`` maps a MIN strategy to the bias to use in place of the
    one computed by the inner solve; each injected bias must be an invariant
    bias of the one-player problem at the computed slope.

    Raises CycleDetected when a MIN strategy repeats in naive mode and
    ConvergenceError when max_outer is reached.
    """
    opts = opts or SolveOptions.from_settings()
    started = time.perf_counter()
    if sigma0 is None:
        sigma = np.zeros(game.n, dtype=np.int64)
    else:
        sigma = _validate_choice(np.array(as_actions(sigma0), dtype=np.int64), game.min_counts,
                                 "initial MIN strategy")
    injected = _bias_table(trace_biases)

    trace = []
    history = set()
    delta = None
    prev_eta = prev_v = prev_critical = None
    prev_degenerate = False
    eta = v = None
    res = np.inf

    for k in range(opts.max_outer):
        if sigma.tobytes() in history:
            report = _report(sigma, delta, eta, v, res, trace, started, converged=False, cycle=True)
            message = f"MIN strategy {sigma.tolist()} repeated at outer iteration {k}"
            if opts.naive:
                logger.warning(message)
                raise CycleDetected(message, report)
            if opts.check_invariants:
                raise InvariantViolation(message)
            raise ConvergenceError(message, report)
        history.add(sigma.tobytes())

        op = restrict_min(game, sigma)
        inner = multichain_pi(op, delta if (opts.use_warm_start and delta is not None) else None, opts)
        eta, v, delta = inner.eta, inner.v, inner.delta.actions
        record = {"outer_index": k, "inner_iterations": inner.iterations}

        bias = injected.get(tuple(sigma.tolist()))
        if bias is not None:
            if bias.shape != v.shape or residual_g(op, eta, bias, opts.eps_eta) > INJECTED_BIAS_TOL:
                raise InvariantViolation(f"injected bias for {sigma.tolist()} is not an invariant bias")
            v = bias.copy()
            record["injected_bias"] = True

        critical = None
        if prev_eta is not None:
            change = float(np.max(np.abs(eta - prev_eta))) if game.n else 0.0
            record["eta_change"] = change
            if opts.check_invariants and np.any(eta > prev_eta + opts.eps_eta):
                raise InvariantViolation(f"slope increased at outer iteration {k}")

            if change <= opts.eps_eta:
                record["degenerate"] = True
                if not opts.naive:
                    v, critical = _degenerate_step(op, eta, v, prev_v, delta, opts, record)
                    if opts.check_invariants and prev_degenerate and prev_critical is not None:
                        if not set(critical) <= set(prev_critical):
                            raise InvariantViolation(f"critical nodes grew at outer iteration {k}")
            elif change < NEAR_DEGENERATE_FACTOR * opts.eps_eta:
                logger.warning(f"outer iteration {k}: slope change {change:.3e} is close to eps_eta")

        res = residual(game, HalfLine(eta=eta, v=v), opts.eps_eta)
        new_sigma, changed = improve_min(game, sigma, eta, v, opts)
        record["residual"] = res
        record["changed_states"] = int(changed.sum())
        trace.append(IterationRecord(**record))
        logger.debug(f"outer {k}: residual={res:.3e} changed={int(changed.sum())} "
                     f"inner={inner.iterations} degenerate={record.get('degenerate', False)}")

        stable = not changed.any()
        if stable or res <= opts.eps_g:
            if stable != (res <= opts.eps_g):
                logger.warning(f"stopping with residual {res:.3e} and {int(changed.sum())} "
                               f"pending MIN switches")
            logger.info(f"solved n={game.n} in {k + 1} outer iterations, residual {res:.3e}")
            return _report(sigma, delta, eta, v, res, trace, started)

        prev_eta, prev_v = eta, v
        prev_critical = critical
        prev_degenerate = record.get("degenerate", False)
        sigma = new_sigma

    report = _report(sigma, delta, eta, v, res, trace, started, converged=False)
    raise ConvergenceError(f"no convergence in {opts.max_outer} outer iterations "
                           f"(residual {res:.3e})", report)


def _degenerate_step(op: OnePlayerGame, eta: np.ndarray, v: np.ndarray, prev_v: np.ndarray,
                     delta: np.ndarray, opts: SolveOptions, record: dict):
    """Critical graph at the new bias, then projection of the previous bias."""
    gbar = tangent_game(op, eta, opts.eps_eta)
    crit = critical_graph(tilde_family(gbar, v, opts.eps_v))
    record["critical_scc_count"] = crit.scc_count
    record["strongly_degenerate"] = crit.scc_count >= 2
    if crit.scc_count < 2 and opts.use_shortcut:
        return v, crit.nodes

    delta0 = _delta_on_tangent(op, eta, opts.eps_eta, delta)
    projected = spectral_projection(gbar, crit.nodes, prev_v, delta0, opts)
    record["projection_applied"] = True

    if opts.check_invariants:
        nodes = np.asarray(crit.nodes, dtype=np.int64)
        if nodes.size and np.max(np.abs(projected[nodes] - prev_v[nodes])) > 1e-12:
            raise InvariantViolation("projection moved the bias on critical nodes")
        scale = max(1.0, float(np.max(np.abs(prev_v))))
        if np.any(projected > prev_v + MONOTONE_BIAS_TOL * scale):
            raise InvariantViolation("projected bias exceeds the previous bias")
    return projected, crit.nodes


def check_invariant_halfline(game: Game, hl: HalfLine, opts: Optional[SolveOptions] = None) -> bool:
    """True iff the residual of hl is at most eps_g."""
    opts = opts or SolveOptions.from_settings()
    return residual(game, hl, opts.eps_eta) <= opts.eps_g
