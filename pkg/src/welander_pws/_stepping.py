"""Adaptive Runge-Kutta marching with dense-output event location."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from .exceptions import TangencyError

#: interior points of a step probed for a guard sign change
_PROBES = np.linspace(0.0, 1.0, 9)[1:-1]


@dataclass
class MarchResult:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    status: str = "t_end"  # t_end | event | unarmed_event | stop
    event_time: Optional[float] = None
    event_state: Optional[np.ndarray] = None


def march(
    fun: Callable[[np.ndarray], np.ndarray],
    t0: float,
    y0,
    t_end: float,
    *,
    rtol: float,
    atol: float,
    max_step: float = np.inf,
    guard: Optional[Callable[[np.ndarray], float]] = None,
    arm_level: float = 0.0,
    stop: Optional[Callable[[np.ndarray, np.ndarray], bool]] = None,
    step_cap: Optional[Callable[[np.ndarray], float]] = None,
    first_step: Optional[float] = None,
) -> MarchResult:
    """Integrate ``y' = fun(y)`` from ``t0`` until ``t_end``, a guard event or ``stop``.

    ``guard(y) >= 0`` marks the admissible domain. The first time it turns
    negative the crossing time is located by Brent's method on the step's
    dense output. The event is reported as ``unarmed_event`` if the guard
    never exceeded ``arm_level`` beforehand.
    """
    y0 = np.array(y0, dtype=float)
    out = MarchResult(times=[float(t0)], states=[y0.copy()])
    if t_end <= t0:
        return out
    solver = DOP853(
        lambda t, y: fun(y), t0, y0, t_end,
        rtol=rtol, atol=atol, max_step=max_step, first_step=first_step,
    )
    armed = guard is None or guard(y0) > arm_level
    while solver.status == "running":
        if step_cap is not None:
            solver.max_step = max(min(max_step, step_cap(solver.y)), 1e-12)
        msg = solver.step()
        if solver.status == "failed":
            raise TangencyError(
                f"step-size underflow: {msg}",
                last_state=out.states[-1].copy(),
                time=out.times[-1],
            )
        t_old, t_new, y_new = solver.t_old, solver.t, solver.y
        if guard is not None:
            dense = solver.dense_output()
            hit = _first_exit(guard, dense, t_old, t_new, y_new)
            if hit is not None:
                y_hit = dense(hit)
                out.status = "event" if armed else "unarmed_event"
                out.event_time = float(hit)
                out.event_state = y_hit
                if hit > out.times[-1]:
                    out.times.append(float(hit))
                    out.states.append(y_hit.copy())
                return out
            if not armed and guard(y_new) > arm_level:
                armed = True
        out.times.append(float(t_new))
        out.states.append(y_new.copy())
        if stop is not None and stop(out.states[-2], y_new):
            out.status = "stop"
            return out
    return out


def _first_exit(guard, dense, t_old, t_new, y_new):
    """Earliest time in (t_old, t_new] where ``guard`` turns negative, or None."""
    ts = t_old + _PROBES * (t_new - t_old)
    gs = [guard(dense(t)) for t in ts] + [guard(y_new)]
    ts = list(ts) + [t_new]
    g_prev, t_prev = guard(dense(t_old)), t_old
    for t, g in zip(ts, gs):
        if g < 0:
            if g_prev <= 0:
                # the step started on the boundary: the contact is at its start
                return t_prev if t_prev > t_old else t_old
            return brentq(lambda tt: guard(dense(tt)), t_prev, t, xtol=1e-15, rtol=1e-15)
        g_prev, t_prev = g, t
    return None
