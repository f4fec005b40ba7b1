"""
Game representation and the ZSG v1 text format.

A ``Game`` stores every (state, MIN action, MAX action) triple in flat
arrays: the MIN actions of state ``i`` are the pairs
``min_ptr[i]:min_ptr[i+1]``, the MAX actions of pair ``k`` are the triples
``max_ptr[k]:max_ptr[k+1]``, and triple ``m`` carries ``reward[m]`` and the
transition row ``trans[m]``. States and actions are 0-based.
"""
from pathlib import Path
from typing import IO, Dict, Iterator, List, Tuple, Union

import numpy as np
import scipy.sparse as sp

from .exceptions import GameFormatError, InvalidStrategyError
from .logger import logger
from .models import StrategyLike, as_actions

ROW_SUM_TOL = 1e-9

Row = List[Tuple[int, float]]


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _canonical_rows(trans, n: int) -> sp.csr_matrix:
    """Copy ``trans`` into a csr matrix with sorted column indices."""
    trans = sp.csr_matrix(trans, dtype=float, copy=True)
    if trans.shape[1] != n:
        raise GameFormatError(f"transition matrix has {trans.shape[1]} columns, expected {n}")
    trans.sort_indices()
    return trans


def _check_rows(trans: sp.csr_matrix, stochastic: bool) -> np.ndarray:
    """Validate probabilities and return the row sums."""
    if trans.nnz and (not np.all(np.isfinite(trans.data)) or trans.data.min() < 0):
        raise GameFormatError("transition probabilities must be finite and nonnegative")
    rows = np.repeat(np.arange(trans.shape[0]), np.diff(trans.indptr))
    same_row = np.diff(rows) == 0
    if np.any(same_row & (np.diff(trans.indices) == 0)):
        m = int(rows[1:][same_row & (np.diff(trans.indices) == 0)][0])
        raise GameFormatError(f"duplicate target in transition row {m}")
    sums = np.asarray(trans.sum(axis=1)).reshape(-1)
    if stochastic:
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
    else:
        bad = np.flatnonzero(sums > 1.0 + ROW_SUM_TOL)
    if bad.size:
        m = int(bad[0])
        raise GameFormatError(f"row {m} sums to {sums[m]!r}, outside tolerance {ROW_SUM_TOL}")
    return sums


class Game:
    """Finite two-player zero-sum stochastic game with perfect information."""

    def __init__(self, n: int, min_ptr, max_ptr, reward, trans):
        if n < 1:
            raise GameFormatError("a game needs at least one state")
        self.n = int(n)
        self.min_ptr = _readonly(np.asarray(min_ptr, dtype=np.int64).copy())
        self.max_ptr = _readonly(np.asarray(max_ptr, dtype=np.int64).copy())
        self.reward = _readonly(np.asarray(reward, dtype=float).copy())
        self.trans = _canonical_rows(trans, self.n)

        if self.min_ptr.shape != (self.n + 1,) or self.min_ptr[0] != 0:
            raise GameFormatError("min_ptr must have n+1 entries starting at 0")
        if np.any(np.diff(self.min_ptr) < 1):
            raise GameFormatError("every state needs at least one MIN action")
        n_pairs = int(self.min_ptr[-1])
        if self.max_ptr.shape != (n_pairs + 1,) or self.max_ptr[0] != 0:
            raise GameFormatError("max_ptr must have one entry per pair plus one")
        if np.any(np.diff(self.max_ptr) < 1):
            raise GameFormatError("every MIN action needs at least one MAX action")
        n_triples = int(self.max_ptr[-1])
        if self.reward.shape != (n_triples,) or not np.all(np.isfinite(self.reward)):
            raise GameFormatError("one finite reward per triple is required")
        if self.trans.shape[0] != n_triples:
            raise GameFormatError("one transition row per triple is required")
        _check_rows(self.trans, stochastic=True)

        self.pair_state = _readonly(np.repeat(np.arange(self.n), np.diff(self.min_ptr)))
        self.triple_pair = _readonly(np.repeat(np.arange(n_pairs), np.diff(self.max_ptr)))

    @property
    def n_pairs(self) -> int:
        return int(self.min_ptr[-1])

    @property
    def n_triples(self) -> int:
        return int(self.max_ptr[-1])

    @property
    def min_counts(self) -> np.ndarray:
        return np.diff(self.min_ptr)

    @property
    def max_counts(self) -> np.ndarray:
        return np.diff(self.max_ptr)

    def num_min_actions(self, i: int) -> int:
        return int(self.min_ptr[i + 1] - self.min_ptr[i])

    def num_max_actions(self, i: int, a: int) -> int:
        k = self.pair_index(i, a)
        return int(self.max_ptr[k + 1] - self.max_ptr[k])

    def pair_index(self, i: int, a: int) -> int:
        if not 0 <= i < self.n:
            raise InvalidStrategyError(f"state {i} out of range")
        if not 0 <= a < self.num_min_actions(i):
            raise InvalidStrategyError(f"state {i} has no MIN action {a}")
        return int(self.min_ptr[i] + a)

    def triple_index(self, i: int, a: int, b: int) -> int:
        k = self.pair_index(i, a)
        if not 0 <= b < self.max_ptr[k + 1] - self.max_ptr[k]:
            raise InvalidStrategyError(f"state {i}, MIN action {a} has no MAX action {b}")
        return int(self.max_ptr[k] + b)

    def row(self, m: int) -> Row:
        start, end = self.trans.indptr[m], self.trans.indptr[m + 1]
        return [(int(j), float(p)) for j, p in zip(self.trans.indices[start:end],
                                                   self.trans.data[start:end])]

    def records(self) -> Iterator[Tuple[int, int, int, float, Row]]:
        """Yield (i, a, b, reward, row) sorted by (i, a, b)."""
        for i in range(self.n):
            for a in range(self.num_min_actions(i)):
                k = int(self.min_ptr[i] + a)
                for b in range(int(self.max_ptr[k + 1] - self.max_ptr[k])):
                    m = int(self.max_ptr[k] + b)
                    yield i, a, b, float(self.reward[m]), self.row(m)

    def with_rewards(self, reward) -> "Game":
        return Game(self.n, self.min_ptr, self.max_ptr, reward, self.trans)

    def __repr__(self):
        return f"Game(n={self.n}, pairs={self.n_pairs}, triples={self.n_triples})"


class OnePlayerGame:
    """One-player (MAX) problem: per-state actions with rewards and rows.

    Rows may be substochastic (stopped problems); ``stochastic`` records
    whether all of them sum to one.
    """

    def __init__(self, n: int, act_ptr, reward, trans):
        self.n = int(n)
        self.act_ptr = _readonly(np.asarray(act_ptr, dtype=np.int64).copy())
        self.reward = _readonly(np.asarray(reward, dtype=float).copy())
        self.trans = _canonical_rows(trans, self.n)
        if self.act_ptr.shape != (self.n + 1,) or self.act_ptr[0] != 0:
            raise GameFormatError("act_ptr must have n+1 entries starting at 0")
        if self.n and np.any(np.diff(self.act_ptr) < 1):
            raise GameFormatError("every state needs at least one action")
        if self.reward.shape != (int(self.act_ptr[-1]),) or self.trans.shape[0] != self.reward.size:
            raise GameFormatError("one reward and one row per action is required")
        sums = _check_rows(self.trans, stochastic=False)
        self.stochastic = bool(np.all(np.abs(sums - 1.0) <= ROW_SUM_TOL))
        self.action_state = _readonly(np.repeat(np.arange(self.n), np.diff(self.act_ptr)))

    @property
    def n_actions(self) -> int:
        return int(self.act_ptr[-1])

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.act_ptr)

    def num_actions(self, i: int) -> int:
        return int(self.act_ptr[i + 1] - self.act_ptr[i])

    def select(self, mask: np.ndarray) -> "OnePlayerGame":
        """Keep the actions where ``mask`` holds; every state must keep one."""
        mask = np.asarray(mask, dtype=bool)
        kept = np.add.reduceat(mask.astype(np.int64), self.act_ptr[:-1]) if self.n else np.zeros(0)
        if np.any(kept < 1):
            raise InvalidStrategyError("action selection leaves a state without actions")
        act_ptr = np.concatenate(([0], np.cumsum(kept)))
        return OnePlayerGame(self.n, act_ptr, self.reward[mask], self.trans[np.flatnonzero(mask)])

    def with_rewards(self, reward) -> "OnePlayerGame":
        return OnePlayerGame(self.n, self.act_ptr, reward, self.trans)

    def __repr__(self):
        return f"OnePlayerGame(n={self.n}, actions={self.n_actions}, stochastic={self.stochastic})"


def _validate_choice(actions: np.ndarray, counts: np.ndarray, what: str) -> np.ndarray:
    if actions.shape != counts.shape:
        raise InvalidStrategyError(f"{what} has {actions.size} entries, expected {counts.size}")
    bad = np.flatnonzero((actions < 0) | (actions >= counts))
    if bad.size:
        i = int(bad[0])
        raise InvalidStrategyError(f"{what} selects action {int(actions[i])} at state {i}, "
                                   f"which has {int(counts[i])} actions")
    return actions


def restrict_min(game: Game, sigma: StrategyLike) -> OnePlayerGame:
    """The one-player game f^(sigma) obtained by fixing MIN's strategy."""
    sigma = _validate_choice(as_actions(sigma), game.min_counts, "MIN strategy")
    pairs = game.min_ptr[:-1] + sigma
    starts = game.max_ptr[pairs]
    counts = game.max_ptr[pairs + 1] - starts
    act_ptr = np.concatenate(([0], np.cumsum(counts)))
    idx = np.repeat(starts - act_ptr[:-1], counts) + np.arange(int(act_ptr[-1]))
    return OnePlayerGame(game.n, act_ptr, game.reward[idx], game.trans[idx])


def fix_pair(op_game: OnePlayerGame, delta: StrategyLike) -> Tuple[sp.csr_matrix, np.ndarray]:
    """Affine map v -> P v + r of a fixed MAX strategy."""
    delta = _validate_choice(as_actions(delta), op_game.counts, "MAX strategy")
    rows = op_game.act_ptr[:-1] + delta
    return op_game.trans[rows], op_game.reward[rows].copy()


def lowest_strategy(counts: np.ndarray) -> np.ndarray:
    return np.zeros(len(counts), dtype=np.int64)


# ZSG v1 codec

def _format_real(x: float) -> str:
    return "%.17g" % x


def serialize_game(game: Game) -> str:
    """Canonical ZSG v1 text: records sorted by (i, a, b), 17 significant digits."""
    lines = [f"zsg 1 {game.n}"]
    for i, a, b, reward, row in game.records():
        targets = " ".join(f"{j}:{_format_real(p)}" for j, p in row)
        lines.append(f"{i} {a} {b} {_format_real(reward)} {targets}")
    return "\n".join(lines) + "\n"


def _parse_int(token: str, what: str, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise GameFormatError(f"{what} {token!r} is not an integer", line)


def _parse_real(token: str, what: str, line: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise GameFormatError(f"{what} {token!r} is not a real number", line)
    if not np.isfinite(value):
        raise GameFormatError(f"{what} {token!r} is not finite", line)
    return value


def _check_contiguous(indices: List[Tuple[int, int]], what: str) -> None:
    """``indices`` is a sorted list of (index, line); indices must be 0..k-1."""
    for expected, (index, line) in enumerate(indices):
        if index != expected:
            raise GameFormatError(f"{what}: expected index {expected}, found {index}", line)


def parse_game(source: Union[str, IO[str]]) -> Game:
    """Parse ZSG v1 text (a string or an open text stream)."""
    text = source.read() if hasattr(source, "read") else source
    n = None
    records: Dict[Tuple[int, int, int], Tuple[float, Row, int]] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        content = raw.split("#", 1)[0].strip()
        if not content:
            continue
        fields = content.split()
        if n is None:
            if len(fields) != 3 or fields[0] != "zsg" or fields[1] != "1":
                raise GameFormatError("header must be 'zsg 1 <n>'", lineno)
            n = _parse_int(fields[2], "state count", lineno)
            if n < 1:
                raise GameFormatError("state count must be positive", lineno)
            continue

        if len(fields) < 5:
            raise GameFormatError("record needs '<i> <a> <b> <reward> <j>:<p> ...'", lineno)
        i = _parse_int(fields[0], "state", lineno)
        a = _parse_int(fields[1], "MIN action", lineno)
        b = _parse_int(fields[2], "MAX action", lineno)
        if not 0 <= i < n:
            raise GameFormatError(f"state {i} out of range [0, {n})", lineno)
        if a < 0 or b < 0:
            raise GameFormatError("action indices must be nonnegative", lineno)
        reward = _parse_real(fields[3], "reward", lineno)

        row: Row = []
        seen = set()
        for token in fields[4:]:
            parts = token.split(":")
            if len(parts) != 2:
                raise GameFormatError(f"transition {token!r} must be '<j>:<p>'", lineno)
            j = _parse_int(parts[0], "target state", lineno)
            p = _parse_real(parts[1], "probability", lineno)
            if not 0 <= j < n:
                raise GameFormatError(f"target state {j} out of range [0, {n})", lineno)
            if p < 0:
                raise GameFormatError(f"negative probability {p!r}", lineno)
            if j in seen:
                raise GameFormatError(f"duplicate target {j}", lineno)
            seen.add(j)
            row.append((j, p))
        total = sum(p for _, p in row)
        if abs(total - 1.0) > ROW_SUM_TOL:
            raise GameFormatError(
                f"row sum {total!r} differs from 1 by more than {ROW_SUM_TOL}", lineno)
        if (i, a, b) in records:
            raise GameFormatError(f"duplicate record ({i}, {a}, {b})", lineno)
        records[(i, a, b)] = (reward, sorted(row), lineno)

    if n is None:
        raise GameFormatError("missing header 'zsg 1 <n>'", None)

    keys = sorted(records)
    by_state: Dict[int, Dict[int, List[Tuple[int, int]]]] = {}
    for i, a, b in keys:
        by_state.setdefault(i, {}).setdefault(a, []).append((b, records[(i, a, b)][2]))
    for i in range(n):
        if i not in by_state:
            raise GameFormatError(f"state {i} has no records", None)
        actions = sorted(by_state[i].items())
        _check_contiguous([(a, bs[0][1]) for a, bs in actions], f"MIN actions of state {i}")
        for a, bs in actions:
            _check_contiguous(bs, f"MAX actions of state {i}, MIN action {a}")

    min_counts = [len(by_state[i]) for i in range(n)]
    max_counts = [len(by_state[i][a]) for i in range(n) for a in range(len(by_state[i]))]
    min_ptr = np.concatenate(([0], np.cumsum(min_counts)))
    max_ptr = np.concatenate(([0], np.cumsum(max_counts)))

    reward = np.empty(len(keys))
    indptr = [0]
    indices: List[int] = []
    data: List[float] = []
    for m, key in enumerate(keys):
        r, row, _ = records[key]
        reward[m] = r
        indices.extend(j for j, _ in row)
        data.extend(p for _, p in row)
        indptr.append(len(indices))
    trans = sp.csr_matrix((np.array(data, dtype=float), np.array(indices, dtype=np.int64),
                           np.array(indptr, dtype=np.int64)), shape=(len(keys), n))
    game = Game(n, min_ptr, max_ptr, reward, trans)
    logger.debug(f"parsed {game!r}")
    return game


def read_game(path: Union[str, Path]) -> Game:
    with open(path, "r", encoding="utf-8") as f:
        return parse_game(f)


def write_game(game: Game, path: Union[str, Path]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_game(game), encoding="utf-8")


def canonicalize(text: str) -> str:
    return serialize_game(parse_game(text))

