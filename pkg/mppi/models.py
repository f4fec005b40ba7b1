from typing import ClassVar, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator, model_validator

from .config import settings


class ArrayModel(BaseModel):
    """Immutable model that may hold numpy arrays."""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# Half-lines and strategies

class HalfLine(ArrayModel):
    """The map t -> t*eta + v."""
    eta: np.ndarray
    v: np.ndarray

    @field_validator("eta", "v", mode="before")
    @classmethod
    def validate_vector(cls, value):
        array = np.array(value, dtype=float).reshape(-1)
        if not np.all(np.isfinite(array)):
            raise ValueError("half-line entries must be finite")
        return _frozen(array)

    @model_validator(mode="after")
    def validate_lengths(self):
        if self.eta.shape != self.v.shape:
            raise ValueError(f"eta has length {self.eta.size}, v has length {self.v.size}")
        return self

    @property
    def n(self) -> int:
        return int(self.eta.size)

    def at(self, t: float) -> np.ndarray:
        return t * self.eta + self.v


class _Strategy(ArrayModel):
    actions: np.ndarray

    @field_validator("actions", mode="before")
    @classmethod
    def validate_actions(cls, value):
        array = np.array(value).reshape(-1)
        if array.size and not np.issubdtype(array.dtype, np.integer):
            if not np.all(np.equal(np.mod(array, 1), 0)):
                raise ValueError("actions must be integers")
        array = array.astype(np.int64)
        if np.any(array < 0):
            raise ValueError("actions must be nonnegative")
        return _frozen(array)

    @property
    def n(self) -> int:
        return int(self.actions.size)

    def key(self) -> bytes:
        return self.actions.tobytes()

    def as_tuple(self) -> Tuple[int, ...]:
        return tuple(int(a) for a in self.actions)

    def __eq__(self, other):
        if not isinstance(other, _Strategy):
            return NotImplemented
        return type(self) is type(other) and np.array_equal(self.actions, other.actions)

    def __hash__(self):
        return hash((type(self).__name__, self.key()))


class MinStrategy(_Strategy):
    """sigma: state -> MIN action index (0-based, local to the state)."""


class MaxStrategy(_Strategy):
    """delta: state -> MAX action index, relative to a fixed MIN strategy."""


StrategyLike = Union[_Strategy, Sequence[int], np.ndarray]


def as_actions(strategy: Optional[StrategyLike]) -> Optional[np.ndarray]:
    if strategy is None:
        return None
    if isinstance(strategy, _Strategy):
        return strategy.actions
    return np.asarray(strategy, dtype=np.int64).reshape(-1)


# Options

class Tolerances(BaseModel):
    eps_g: float = Field(..., gt=0, description="global residual threshold")
    eps_eta: float = Field(..., gt=0, description="slope comparison tolerance")
    eps_v: float = Field(..., gt=0, description="bias comparison tolerance")

    @classmethod
    def from_settings(cls) -> "Tolerances":
        return cls(eps_g=settings.eps_g, eps_eta=settings.eps_eta, eps_v=settings.eps_v)


class LinearOptions(BaseModel):
    """Backend choices for the chain solves."""
    solver: Literal["lu", "sor"] = "lu"
    sor_omega: float = Field(1.2, gt=0, lt=2)
    sor_tol: float = Field(1e-13, gt=0)
    sor_max_sweeps_factor: int = Field(100, gt=0)
    final_method: Literal["auto", "A", "B"] = "auto"
    sor_class_threshold: int = Field(64, ge=1)

    @classmethod
    def from_settings(cls, **overrides) -> "LinearOptions":
        values = dict(
            solver=settings.solver,
            sor_omega=settings.sor_omega,
            sor_tol=settings.sor_tol,
            sor_max_sweeps_factor=settings.sor_max_sweeps_factor,
            final_method=settings.final_method,
            sor_class_threshold=settings.sor_class_threshold,
        )
        values.update(overrides)
        return cls(**values)


class SolveOptions(BaseModel):
    """Per-run options of the two-player driver."""
    eps_g: float = Field(1e-12, gt=0)
    eps_eta: float = Field(1e-10, gt=0)
    eps_v: float = Field(1e-10, gt=0)
    max_outer: int = Field(200, gt=0)
    max_inner: int = Field(1000, gt=0)
    naive: bool = False  # skip the projection at degenerate iterations
    strict_trace: bool = False  # no warm start, no single-SCC shortcut
    warm_start: bool = True
    single_scc_shortcut: bool = True
    check_invariants: bool = False
    solver: Literal["lu", "sor"] = "lu"
    sor_omega: float = Field(1.2, gt=0, lt=2)
    sor_tol: float = Field(1e-13, gt=0)
    sor_max_sweeps_factor: int = Field(100, gt=0)
    final_method: Literal["auto", "A", "B"] = "auto"
    sor_class_threshold: int = Field(64, ge=1)

    @classmethod
    def from_settings(cls, **overrides) -> "SolveOptions":
        values = {name: getattr(settings, name) for name in cls.model_fields
                  if hasattr(settings, name)}
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)

    @property
    def tolerances(self) -> Tolerances:
        return Tolerances(eps_g=self.eps_g, eps_eta=self.eps_eta, eps_v=self.eps_v)

    @property
    def use_warm_start(self) -> bool:
        return self.warm_start and not self.strict_trace

    @property
    def use_shortcut(self) -> bool:
        return self.single_scc_shortcut and not self.strict_trace

    def linear(self) -> LinearOptions:
        return LinearOptions(
            solver=self.solver,
            sor_omega=self.sor_omega,
            sor_tol=self.sor_tol,
            sor_max_sweeps_factor=self.sor_max_sweeps_factor,
            final_method=self.final_method,
            sor_class_threshold=self.sor_class_threshold,
        )


# Reports

class IterationRecord(BaseModel):
    """One outer (MIN player) iteration."""
    outer_index: int
    inner_iterations: int
    eta_change: Optional[float] = None  # None at the first iteration
    residual: float
    degenerate: bool = False
    strongly_degenerate: bool = False
    critical_scc_count: int = 0
    projection_applied: bool = False
    injected_bias: bool = False
    changed_states: int = 0


class SolveReport(ArrayModel):
    halfline: HalfLine
    sigma: MinStrategy
    delta: MaxStrategy
    residual: float
    trace: List[IterationRecord] = Field(default_factory=list)
    wall_seconds: float = 0.0
    converged: bool = True
    cycle: bool = False

    @computed_field
    @property
    def iterations_outer(self) -> int:
        return len(self.trace)

    @computed_field
    @property
    def iterations_inner_total(self) -> int:
        return sum(r.inner_iterations for r in self.trace)

    @computed_field
    @property
    def degenerate(self) -> int:
        return sum(1 for r in self.trace if r.degenerate)

    @computed_field
    @property
    def strongly_degenerate(self) -> int:
        return sum(1 for r in self.trace if r.strongly_degenerate)

    @property
    def eta(self) -> np.ndarray:
        return self.halfline.eta

    @property
    def v(self) -> np.ndarray:
        return self.halfline.v

    def to_json_dict(self) -> dict:
        """Stable-ordered, JSON-serializable view."""
        return {
            "eta": self.halfline.eta.tolist(),
            "v": self.halfline.v.tolist(),
            "sigma": self.sigma.actions.tolist(),
            "delta": self.delta.actions.tolist(),
            "iterations_outer": self.iterations_outer,
            "iterations_inner_total": self.iterations_inner_total,
            "degenerate": self.degenerate,
            "strongly_degenerate": self.strongly_degenerate,
            "residual": self.residual,
            "wall_seconds": self.wall_seconds,
            "converged": self.converged,
            "cycle": self.cycle,
            "trace": [r.model_dump() for r in self.trace],
        }


class ClassDecomposition(ArrayModel):
    """Irreducible classes in topological order, with final flags."""
    classes: List[np.ndarray]
    final: List[bool]
    labels: np.ndarray  # class position of each state

    @model_validator(mode="after")
    def validate_partition(self):
        if len(self.classes) != len(self.final):
            raise ValueError("one final flag per class is required")
        return self

    @property
    def n(self) -> int:
        return int(self.labels.size)

    @property
    def permutation(self) -> np.ndarray:
        if not self.classes:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate(self.classes)

    def final_classes(self) -> List[np.ndarray]:
        return [c for c, f in zip(self.classes, self.final) if f]

    def transient_states(self) -> np.ndarray:
        parts = [c for c, f in zip(self.classes, self.final) if not f]
        if not parts:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(parts))


class CriticalResult(BaseModel):
    arcs: List[Tuple[int, int]]
    nodes: List[int]
    components: List[List[int]]

    @property
    def arc_set(self) -> set:
        return set(self.arcs)

    @property
    def scc_count(self) -> int:
        return len(self.components)


# Generators and bench

class RichmanConfig(BaseModel):
    n: int = Field(..., ge=1, description="node count")
    out_degree: int = Field(10, ge=1, description="arcs per node, clipped to n")
    seed: int = Field(0, ge=0)


class CatMouseConfig(BaseModel):
    grid: int = Field(..., ge=3, description="grid points per axis")
    speed: float = Field(..., gt=0, description="cat speed")
    freeze_radius: float = Field(0.1, ge=0)

    @field_validator("grid")
    @classmethod
    def validate_grid(cls, v):
        if v % 2 == 0:
            raise ValueError("grid must be odd so that the origin is a grid point")
        return v

    @property
    def h(self) -> float:
        return 1.0 / (self.grid - 1)


class BenchRow(BaseModel):
    csv_fields: ClassVar[Tuple[str, ...]] = (
        "size", "seed", "iter_outer", "iter_inner", "degenerate",
        "strongly_degenerate", "residual", "seconds",
    )

    size: int
    seed: int
    iter_outer: int = -1
    iter_inner: int = -1
    degenerate: int = -1
    strongly_degenerate: int = -1
    residual: float = float("nan")
    seconds: float = 0.0
    error: Optional[str] = None

    def to_csv_row(self) -> List[str]:
        return [
            str(self.size), str(self.seed), str(self.iter_outer), str(self.iter_inner),
            str(self.degenerate), str(self.strongly_degenerate),
            f"{self.residual:.3e}", f"{self.seconds:.4f}",
        ]
