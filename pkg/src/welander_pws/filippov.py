"""
Filippov analysis on the switching manifold and an event-driven integrator.

Points of the manifold ``h = 0`` are classified from the normal projections
``S(lam) = f(s, lam) . grad h(s)`` at ``lam = 0`` and ``lam = 1``:

- same strict sign: the orbit crosses;
- opposite signs: sliding, stable when ``dS/dlam < 0`` and unstable when
  ``dS/dlam > 0``;
- a vanishing projection: tangency.

:func:`integrate` advances an initial state through smooth regions with an
adaptive embedded Runge-Kutta 8(5,3) scheme, locates manifold hits on the
dense output and continues with either the other field or the sliding flow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq

from ._stepping import march
from .core import (
    TOL_H,
    EventKind,
    KnownEquilibrium,
    PwsSystem,
    RegionLabel,
    State,
    Trajectory,
    as_state,
    region_of,
)
from .exceptions import DegenerateError, DomainError, TangencyError

#: |S| below this is treated as a tangency
TANGENCY_TOL = 1e-12


class ManifoldPointClass(str, enum.Enum):
    CROSSING = "Crossing"
    STABLE_SLIDING = "StableSliding"
    UNSTABLE_SLIDING = "UnstableSliding"
    TANGENCY = "Tangency"


class SlidePolicy(str, enum.Enum):
    ESCAPE_UPPER = "escape_upper"
    ESCAPE_LOWER = "escape_lower"
    HOLD = "hold"


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float = 0.5
    t_max: float = 100.0
    event_tol: float = 1e-12
    unstable_slide_policy: SlidePolicy = SlidePolicy.ESCAPE_UPPER
    equilibrium_radius: float = 1e-7

    def __post_init__(self):
        for name in ("rel_tol", "abs_tol", "max_step", "t_max", "event_tol", "equilibrium_radius"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        object.__setattr__(
            self, "unstable_slide_policy", SlidePolicy(self.unstable_slide_policy)
        )

    def with_(self, **changes) -> "IntegratorOptions":
        return replace(self, **changes)


@dataclass(frozen=True)
class SlidingAnalysis:
    lambda_star: Callable[[float], Optional[float]]
    bounds: list
    stability_sign: float
    degenerate: bool


def _require_on_manifold(sys: PwsSystem, s, tol_h: float) -> np.ndarray:
    arr = as_state(s).as_array()
    if abs(sys.h(arr)) > tol_h:
        raise DomainError(f"state {tuple(arr)} is not on the switching manifold")
    return arr


def normal_projection(sys: PwsSystem, s, lam: float, tol_h: float = TOL_H) -> float:
    """``S = f(s, lam) . grad h(s)`` for a state on the manifold."""
    arr = _require_on_manifold(sys, s, tol_h)
    return float(np.dot(sys.field(arr, lam), sys.switching_grad(arr)))


def sliding_lambda(sys: PwsSystem, s, tol_h: float = TOL_H) -> Optional[float]:
    """The convex-combination weight solving ``S(lam) = 0`` in [0, 1], or None.

    Raises :class:`DegenerateError` when ``S`` does not depend on ``lam``.
    """
    arr = _require_on_manifold(sys, s, tol_h)
    s0 = normal_projection(sys, arr, 0.0, tol_h)
    s1 = normal_projection(sys, arr, 1.0, tol_h)
    if sys.lambda_dependence == "affine":
        slope = s1 - s0
        if slope == 0.0:
            raise DegenerateError("S is independent of lambda on the manifold")
        lam = -s0 / slope
        return float(lam) if 0.0 <= lam <= 1.0 else None
    if s0 == 0.0:
        return 0.0
    if s1 == 0.0:
        return 1.0
    if s0 * s1 > 0:
        return None
    return float(brentq(lambda l: normal_projection(sys, arr, l, tol_h), 0.0, 1.0, xtol=1e-15))


def classify_manifold_point(sys: PwsSystem, s, tol: float = TANGENCY_TOL) -> ManifoldPointClass:
    s0 = normal_projection(sys, s, 0.0)
    s1 = normal_projection(sys, s, 1.0)
    if abs(s0) <= tol or abs(s1) <= tol:
        return ManifoldPointClass.TANGENCY
    if s0 * s1 > 0:
        return ManifoldPointClass.CROSSING
    # lower field points up and upper points down: attracting
    if s0 > 0 > s1:
        return ManifoldPointClass.STABLE_SLIDING
    return ManifoldPointClass.UNSTABLE_SLIDING


def sliding_stability_sign(sys: PwsSystem, s) -> float:
    """``dS/dlam`` on the manifold (negative: stable sliding)."""
    if sys.lambda_dependence == "affine":
        if sys.field_jump is not None:
            arr = _require_on_manifold(sys, s, TOL_H)
            return float(np.dot(sys.field_jump(arr), sys.switching_grad(arr)))
        return normal_projection(sys, s, 1.0) - normal_projection(sys, s, 0.0)
    lam = sliding_lambda(sys, s)
    lam = 0.5 if lam is None else lam
    d = 1e-6
    lo, hi = max(lam - d, 0.0), min(lam + d, 1.0)
    return (normal_projection(sys, s, hi) - normal_projection(sys, s, lo)) / (hi - lo)


def _tangent(sys: PwsSystem, arr: np.ndarray) -> np.ndarray:
    g = sys.switching_grad(arr)
    return np.array([g[1], -g[0]]) / math.hypot(g[0], g[1])


def sliding_vector_field(sys: PwsSystem, u: float) -> float:
    """Tangential velocity of the sliding flow at manifold coordinate ``u``."""
    arr = sys.manifold_point(u)
    lam = sliding_lambda(sys, arr)
    if lam is None:
        raise DomainError(f"manifold coordinate {u} is outside the sliding region")
    return float(np.dot(sys.field(arr, lam), _tangent(sys, arr)))


def _sliding_rate(sys: PwsSystem, u: float) -> float:
    # du/dt: tangential speed divided by |d point / du|
    arr = sys.manifold_point(u)
    lam = _lambda_unclipped(sys, arr)
    step = 1e-7
    dp = (sys.manifold_point(u + step) - sys.manifold_point(u - step)) / (2 * step)
    v = sys.field(arr, min(max(lam, 0.0), 1.0))
    return float(np.dot(v, dp) / np.dot(dp, dp))


def _lambda_unclipped(sys: PwsSystem, arr: np.ndarray) -> float:
    grad = sys.switching_grad(arr)
    s0 = float(np.dot(sys.field(arr, 0.0), grad))
    s1 = float(np.dot(sys.field(arr, 1.0), grad))
    if sys.lambda_dependence == "affine":
        return -s0 / (s1 - s0) if s1 != s0 else math.nan
    lam = sliding_lambda(sys, arr, tol_h=math.inf)
    return math.nan if lam is None else lam


def sliding_region_bounds(sys: PwsSystem, n_grid: int = 4001) -> list:
    """Intervals of manifold coordinate where ``lambda*`` lies in [0, 1].

    A zero-width interval ``(u, u)`` flags the degenerate case in which both
    projections coincide and vanish together (a fused focus).
    """
    lo, hi = sys.manifold_window
    us = np.linspace(lo, hi, n_grid)

    def proj(u, lam):
        arr = sys.manifold_point(u)
        return float(np.dot(sys.field(arr, lam), sys.switching_grad(arr)))

    s0 = np.array([proj(u, 0.0) for u in us])
    s1 = np.array([proj(u, 1.0) for u in us])
    if np.allclose(s0, s1, rtol=0.0, atol=1e-15):
        return [(r, r) for r in _roots(lambda u: proj(u, 0.0), us, s0)]
    edges = sorted(
        _roots(lambda u: proj(u, 0.0), us, s0) + _roots(lambda u: proj(u, 1.0), us, s1)
    )
    cuts = [lo] + edges + [hi]
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        m = 0.5 * (a + b)
        if proj(m, 0.0) * proj(m, 1.0) < 0:
            out.append((a, b))
    return out


def _roots(fn, us, vals) -> list:
    roots = []
    for i in range(len(us) - 1):
        if vals[i] == 0.0:
            roots.append(float(us[i]))
        elif vals[i] * vals[i + 1] < 0:
            roots.append(float(brentq(fn, us[i], us[i + 1], xtol=1e-15, rtol=1e-15)))
    return roots


def analyze_sliding(sys: PwsSystem, u: float) -> SlidingAnalysis:
    def lam_star(v):
        try:
            return sliding_lambda(sys, sys.manifold_point(v))
        except DegenerateError:
            return None

    sign = sliding_stability_sign(sys, sys.manifold_point(u))
    return SlidingAnalysis(
        lambda_star=lam_star,
        bounds=sliding_region_bounds(sys),
        stability_sign=sign,
        degenerate=sign == 0.0,
    )


# --------------------------------------------------------------- integration


def integrate(
    sys: PwsSystem,
    s0,
    opts: Optional[IntegratorOptions] = None,
    *,
    equilibria=None,
    stop_after_crossings: Optional[int] = None,
    stop_on_slide: bool = False,
) -> Trajectory:
    """Filippov trajectory from ``s0``.

    ``equilibria`` overrides ``sys.equilibria``. ``stop_after_crossings``
    ends the run right after that many Crossing events. ``stop_on_slide``
    ends it at the first SlideStart.
    """
    opts = opts or IntegratorOptions()
    eqs = tuple(sys.equilibria if equilibria is None else equilibria)
    s = as_state(s0)
    traj = Trajectory()
    region = region_of(sys, s)
    traj.append(0.0, s, region)

    if _at_rest(sys, s, region, eqs, opts):
        traj.log(EventKind.EQUILIBRIUM_REACHED, 0.0, s, region)
        return traj

    t = 0.0
    mode = _entry_mode(sys, s, region, opts, traj, t)
    n_cross = 0
    stalled, t_last = 0, -1.0
    while True:
        stalled, t_last = (stalled + 1 if t <= t_last else 0), t
        if stalled > 50:
            raise TangencyError("no progress at the manifold", last_state=s, time=t)
        if t >= opts.t_max:
            traj.log(EventKind.TIMEOUT, t, s, traj.regions[-1])
            return traj
        if mode in (RegionLabel.UPPER, RegionLabel.LOWER):
            res = _run_region(sys, mode, t, s, opts, eqs)
        else:
            res = _run_sliding(sys, t, s, opts, eqs)
        label = mode if mode != "slide" else RegionLabel.MANIFOLD
        for tt, arr in zip(res.times[1:], res.states[1:]):
            traj.append(tt, arr, region_of(sys, arr) if mode != "slide" else label)
        t = res.times[-1]
        s = State.from_array(res.states[-1])
        if res.status == "t_end":
            traj.log(EventKind.TIMEOUT, t, s, traj.regions[-1])
            return traj
        if res.status == "stop":
            traj.log(EventKind.EQUILIBRIUM_REACHED, t, s, traj.regions[-1])
            return traj
        if mode == "slide":
            mode = _leave_sliding(sys, s, traj, t)
            continue
        # manifold hit from a smooth region
        s = State.from_array(res.event_state)
        t = res.event_time
        cls = classify_manifold_point(sys, s)
        if res.status == "unarmed_event" and cls is not ManifoldPointClass.STABLE_SLIDING:
            raise TangencyError(
                "trajectory returned to the manifold without leaving it", last_state=s, time=t
            )
        if cls is ManifoldPointClass.CROSSING:
            traj.log(EventKind.CROSSING, t, s, RegionLabel.MANIFOLD)
            n_cross += 1
            if stop_after_crossings is not None and n_cross >= stop_after_crossings:
                return traj
            mode = RegionLabel.LOWER if mode is RegionLabel.UPPER else RegionLabel.UPPER
        elif cls is ManifoldPointClass.STABLE_SLIDING:
            traj.log(EventKind.SLIDE_START, t, s, RegionLabel.MANIFOLD)
            if stop_on_slide:
                return traj
            s = _snap(sys, s)
            mode = "slide"
        elif cls is ManifoldPointClass.TANGENCY:
            mode = _tangency_mode(sys, s, mode, traj, t)
            if mode == "slide" and stop_on_slide:
                return traj
        else:
            # repelling sliding cannot be reached forward in time; treat as escape
            mode = _unstable_mode(sys, s, opts, traj, t)


def _snap(sys: PwsSystem, s: State) -> State:
    return State.from_array(sys.manifold_point(sys.manifold_coord(s.as_array())))


def _at_rest(sys, s, region, eqs, opts) -> bool:
    for eq in eqs:
        if region in eq.regions and s.distance(eq.state) <= opts.equilibrium_radius:
            lam = 1.0 if region is RegionLabel.UPPER else 0.0
            if region is RegionLabel.MANIFOLD:
                return s.distance(eq.state) <= 1e-14
            return float(np.linalg.norm(sys.field(s.as_array(), lam))) <= 1e-12
    return False


def _entry_mode(sys, s, region, opts, traj, t):
    if region is not RegionLabel.MANIFOLD:
        return region
    cls = classify_manifold_point(sys, s)
    if cls is ManifoldPointClass.CROSSING:
        return RegionLabel.UPPER if normal_projection(sys, s, 1.0) > 0 else RegionLabel.LOWER
    if cls is ManifoldPointClass.STABLE_SLIDING:
        traj.log(EventKind.SLIDE_START, t, s, RegionLabel.MANIFOLD)
        return "slide"
    if cls is ManifoldPointClass.UNSTABLE_SLIDING:
        return _unstable_mode(sys, s, opts, traj, t)
    return _tangency_mode(sys, s, None, traj, t)


def _unstable_mode(sys, s, opts, traj, t):
    policy = opts.unstable_slide_policy
    if policy is SlidePolicy.HOLD:
        traj.log(EventKind.SLIDE_START, t, s, RegionLabel.MANIFOLD)
        return "slide"
    traj.log(EventKind.ESCAPE, t, s, RegionLabel.MANIFOLD)
    return RegionLabel.UPPER if policy is SlidePolicy.ESCAPE_UPPER else RegionLabel.LOWER


def _tangency_mode(sys, s, came_from, traj, t):
    s0 = normal_projection(sys, s, 0.0)
    s1 = normal_projection(sys, s, 1.0)
    if s1 > TANGENCY_TOL:
        return RegionLabel.UPPER
    if s0 < -TANGENCY_TOL:
        return RegionLabel.LOWER
    # both projections point at (or along) the manifold
    traj.log(EventKind.SLIDE_START, t, s, RegionLabel.MANIFOLD)
    return "slide"


def _leave_sliding(sys, s, traj, t):
    arr = s.as_array()
    lam = _lambda_unclipped(sys, arr)
    traj.log(EventKind.SLIDE_EXIT, t, s, RegionLabel.MANIFOLD)
    grad = sys.switching_grad(arr)
    if lam >= 0.5:
        # upper field tangent: the lower field decides the side
        s0 = float(np.dot(sys.field(arr, 0.0), grad))
        return RegionLabel.UPPER if s0 > 0 else RegionLabel.LOWER
    s1 = float(np.dot(sys.field(arr, 1.0), grad))
    return RegionLabel.LOWER if s1 < 0 else RegionLabel.UPPER


def _eq_stop(eqs, regions, radius):
    targets = [e.state.as_array() for e in eqs if e.regions & regions]
    if not targets:
        return None

    def stop(prev, cur):
        for p in targets:
            if np.hypot(*(prev - p)) <= radius and np.hypot(*(cur - p)) <= radius:
                return True
        return False

    return stop


def _run_region(sys, region, t, s, opts, eqs):
    lam = 1.0 if region is RegionLabel.UPPER else 0.0
    side = 1.0 if region is RegionLabel.UPPER else -1.0
    fun = sys.field_upper if lam == 1.0 else sys.field_lower
    return march(
        lambda y: np.asarray(fun(y), dtype=float),
        t, s.as_array(), opts.t_max,
        rtol=opts.rel_tol, atol=opts.abs_tol, max_step=opts.max_step,
        guard=lambda y: side * sys.switching_fn(y),
        arm_level=2.0 * opts.event_tol,
        stop=_eq_stop(eqs, frozenset({region}), opts.equilibrium_radius),
    )


def _run_sliding(sys, t, s, opts, eqs):
    u0 = sys.manifold_coord(s.as_array())
    eq_stop = _eq_stop(eqs, frozenset({RegionLabel.MANIFOLD}), opts.equilibrium_radius)

    def guard(v):
        lam = _lambda_unclipped(sys, sys.manifold_point(v[0]))
        return min(lam, 1.0 - lam)

    stop = None
    if eq_stop is not None:
        def stop(prev, cur):
            return eq_stop(sys.manifold_point(prev[0]), sys.manifold_point(cur[0]))

    res = march(
        lambda v: np.array([_sliding_rate(sys, v[0])]),
        t, [u0], opts.t_max,
        rtol=opts.rel_tol, atol=opts.abs_tol, max_step=opts.max_step,
        guard=guard, stop=stop,
    )
    res.states = [sys.manifold_point(v[0]) for v in res.states]
    if res.event_state is not None:
        res.event_state = sys.manifold_point(res.event_state[0])
    if res.status in ("event", "unarmed_event"):
        res.status = "exit"
    return res
