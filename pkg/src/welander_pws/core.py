"""
Planar piecewise-smooth systems and the shared numeric types.

A :class:`PwsSystem` bundles two smooth vector fields with a scalar
switching function ``h``. The lower field acts where ``h < 0``, the upper
field where ``h > 0``; on ``h = 0`` the Filippov convex combination

    f(s, lam) = (1 - lam) * field_lower(s) + lam * field_upper(s)

is used (``lambda_dependence == "affine"``). Systems with a nonlinear
dependence on ``lam`` supply ``field_lambda`` and use the ``"general"`` tag.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import DomainError

#: default half-width of the band treated as "on the manifold"
TOL_H = 1e-10

VectorField = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class State:
    """A point of the plane in shifted model coordinates."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DomainError(f"non-finite state ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)

    @classmethod
    def from_array(cls, arr) -> "State":
        return cls(float(arr[0]), float(arr[1]))

    def distance(self, other: "State") -> float:
        return math.hypot(self.x - other.x, self.y - other.y)


@dataclass(frozen=True)
class Params:
    """Welander parameters; ``epsilon`` is the bifurcation parameter."""

    epsilon: float
    alpha: float = 0.8
    beta: float = 0.5

    def __post_init__(self):
        for name in ("epsilon", "alpha", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.alpha <= 0 or self.beta <= 0:
            raise DomainError("alpha and beta must be positive")


class RegionLabel(str, enum.Enum):
    LOWER = "Lower"
    UPPER = "Upper"
    MANIFOLD = "Manifold"


class EventKind(str, enum.Enum):
    CROSSING = "Crossing"
    SLIDE_START = "SlideStart"
    SLIDE_EXIT = "SlideExit"
    ESCAPE = "Escape"
    EQUILIBRIUM_REACHED = "EquilibriumReached"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class Event:
    time: float
    state: State
    kind: EventKind
    index: int  # position of the matching sample in the trajectory


@dataclass(frozen=True)
class KnownEquilibrium:
    """An equilibrium the integrator may stop at, and the regions whose flow it belongs to."""

    state: State
    regions: frozenset


@dataclass(frozen=True)
class PwsSystem:
    field_lower: VectorField
    field_upper: VectorField
    switching_fn: Callable[[np.ndarray], float]
    switching_grad: Callable[[np.ndarray], np.ndarray]
    manifold_point: Callable[[float], np.ndarray]
    manifold_coord: Callable[[np.ndarray], float]
    lambda_dependence: str = "affine"
    field_lambda: Optional[Callable[[np.ndarray, float], np.ndarray]] = None
    equilibria: tuple = ()
    jac_lower: Optional[Callable[[np.ndarray], np.ndarray]] = None
    jac_upper: Optional[Callable[[np.ndarray], np.ndarray]] = None
    manifold_window: tuple = (-1.0, 3.0)
    params: Optional[Params] = None
    #: closed form of ``field_upper - field_lower``, free of cancellation
    field_jump: Optional[VectorField] = None

    def __post_init__(self):
        if self.lambda_dependence not in ("affine", "general"):
            raise ValueError(f"unknown lambda_dependence {self.lambda_dependence!r}")
        if self.lambda_dependence == "general" and self.field_lambda is None:
            raise ValueError("general systems need field_lambda")

    def h(self, s) -> float:
        return float(self.switching_fn(_arr(s)))

    def field(self, s, lam: float) -> np.ndarray:
        arr = _arr(s)
        if self.lambda_dependence == "general":
            return np.asarray(self.field_lambda(arr, lam), dtype=float)
        if lam == 0.0:
            return np.asarray(self.field_lower(arr), dtype=float)
        if lam == 1.0:
            return np.asarray(self.field_upper(arr), dtype=float)
        return (1.0 - lam) * self.field_lower(arr) + lam * self.field_upper(arr)


@dataclass
class Trajectory:
    """Time-ordered samples with region labels and an event log."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    regions: list = field(default_factory=list)
    events: list = field(default_factory=list)

    def append(self, t: float, s, region: RegionLabel) -> int:
        if self.times and not t > self.times[-1]:
            # coincident sample (event on a step boundary); overwrite
            self.states[-1] = _state(s)
            self.regions[-1] = region
            return len(self.times) - 1
        self.times.append(float(t))
        self.states.append(_state(s))
        self.regions.append(region)
        return len(self.times) - 1

    def log(self, kind: EventKind, t: float, s, region: RegionLabel) -> Event:
        idx = self.append(t, s, region)
        ev = Event(time=float(t), state=_state(s), kind=kind, index=idx)
        self.events.append(ev)
        return ev

    def extend(self, other: "Trajectory", t_offset: float = 0.0) -> None:
        index_map = [
            self.append(t + t_offset, s, r)
            for t, s, r in zip(other.times, other.states, other.regions)
        ]
        for ev in other.events:
            self.events.append(
                Event(ev.time + t_offset, ev.state, ev.kind, index_map[ev.index])
            )

    @property
    def t(self) -> np.ndarray:
        return np.asarray(self.times, dtype=float)

    @property
    def xy(self) -> np.ndarray:
        return np.array([[s.x, s.y] for s in self.states], dtype=float).reshape(-1, 2)

    @property
    def final_state(self) -> State:
        return self.states[-1]

    @property
    def termination(self) -> Optional[EventKind]:
        return self.events[-1].kind if self.events else None

    def events_of(self, *kinds: EventKind) -> list:
        return [e for e in self.events if e.kind in kinds]

    def __len__(self):
        return len(self.times)


def eval_field(sys: PwsSystem, s, lam: float) -> np.ndarray:
    """Velocity of the Filippov family at ``s`` for ``lam`` in [0, 1]."""
    arr = _arr(s)
    if not np.all(np.isfinite(arr)):
        raise DomainError("non-finite state")
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda={lam} outside [0, 1]")
    return sys.field(arr, lam)


def region_of(sys: PwsSystem, s, tol_h: float = TOL_H) -> RegionLabel:
    if tol_h <= 0:
        raise ValueError("tol_h must be positive")
    h = sys.h(s)
    if h > tol_h:
        return RegionLabel.UPPER
    if h < -tol_h:
        return RegionLabel.LOWER
    return RegionLabel.MANIFOLD


def _arr(s) -> np.ndarray:
    if isinstance(s, State):
        return s.as_array()
    return np.asarray(s, dtype=float)


def _state(s) -> State:
    return s if isinstance(s, State) else State.from_array(s)


def as_state(s: "State | Sequence[float]") -> State:
    return _state(s)
