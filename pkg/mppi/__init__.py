"""
Mean-payoff policy iteration for zero-sum stochastic games.
"""
from .exceptions import (CapExceeded, ConvergenceError, CycleDetected, GameFormatError,
                         InvalidStrategyError, InvariantViolation, MppiError, SingularSystemError)
from .game_model import Game, OnePlayerGame, parse_game, read_game, restrict_min, serialize_game, write_game
from .models import HalfLine, MaxStrategy, MinStrategy, SolveOptions, SolveReport
from .two_player_solver import check_invariant_halfline, solve

__version__ = "1.0.0"
