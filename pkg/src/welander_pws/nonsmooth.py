"""
Bifurcations of the nonsmooth Welander model.

Covers the pseudoequilibrium of the sliding segment, the border collisions
of the two branch equilibria, the return map on the crossing interval
``I = (1/2, 3/4 + 15 eps/4)``, the periodic orbit it carries, and the
homoclinic orbits at the collision value ``eps_0 = -1/15``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence

import numpy as np

from .core import EventKind, Params, State, Trajectory
from .exceptions import (
    ConvergenceError,
    DomainError,
    IntegrationError,
    SlidingEncountered,
)
from .filippov import IntegratorOptions, SlidePolicy, integrate, sliding_stability_sign
from .welander import (
    branch_equilibrium,
    build_nonsmooth,
    pseudo_candidates,
    sliding_interval,
    sliding_lambda_closed,
)

EPS0 = -1.0 / 15.0
BOUNDARY_EQ = State(0.5, 0.0)

#: integrator settings for return-map and homoclinic work
RETURN_OPTS = IntegratorOptions(rel_tol=1e-12, abs_tol=1e-14, max_step=0.25, t_max=80.0)


@dataclass(frozen=True)
class PseudoEquilibrium:
    x: float
    lambda_star: float
    flow_derivative: float
    sliding_stability: float
    classification: str  # pseudonode | pseudosaddle | degenerate

    @property
    def stable(self) -> bool:
        return self.flow_derivative < 0 and self.sliding_stability < 0


@dataclass(frozen=True)
class BifurcationRecord:
    kind: str  # border_collision | fused_focus | hopf | snpo
    epsilon: float
    witness: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ReturnMapSample:
    x_in: float
    x_out: float
    crossings: tuple
    flight_time: float


@dataclass
class PeriodicOrbitRecord:
    epsilon: float
    x_left: float
    x_right: float
    period: float
    samples: Trajectory
    residual: float
    multiplier: float

    @property
    def amplitude(self) -> float:
        return self.x_right - self.x_left


@dataclass
class HomoclinicReport:
    launch: State
    crossing_x: Optional[float]
    return_distance: float
    verified: bool
    epsilon: float = EPS0
    slide_time: float = 0.0
    escape: str = "lower"
    termination: Optional[str] = None
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "launch": [self.launch.x, self.launch.y],
            "slide_time": self.slide_time,
            "escape": self.escape,
            "crossing_x": self.crossing_x,
            "return_distance": self.return_distance,
            "termination": self.termination,
            "verified": self.verified,
        }


# -------------------------------------------------------- pseudoequilibria


def pseudoeq_condition(x: float, epsilon: float) -> float:
    """Residual ``-10 eps - 3x + 5 x eps + 4x^2`` (default alpha, beta)."""
    return -10.0 * epsilon - 3.0 * x + 5.0 * x * epsilon + 4.0 * x * x


def epsilon_of_pseudo_x(x: float) -> float:
    """Parameter value at which ``x`` is a pseudoequilibrium: ``(4x^2 - 3x)/(10 - 5x)``."""
    if x == 2:
        raise DomainError("x = 2 is a pole of the pseudoequilibrium relation")
    return (4.0 * x * x - 3.0 * x) / (10.0 - 5.0 * x)


def flow_derivative(x: float, p: Params) -> float:
    """Derivative of the sliding flow ``1 - x - lambda*(x) x`` in ``x``."""
    a, b, e = p.alpha, p.beta, p.epsilon
    lam = sliding_lambda_closed(p, x)
    dlam = -(a * b - a) / e
    return -1.0 - lam - x * dlam


def find_pseudoequilibria(epsilon: float, alpha: float = 0.8, beta: float = 0.5) -> list:
    if epsilon == 0:
        raise DomainError("pseudoequilibria are undefined at the fused focus eps = 0")
    p = Params(epsilon, alpha, beta)
    out = []
    for x in pseudo_candidates(p):
        lam = sliding_lambda_closed(p, x)
        if not 0.0 <= lam <= 1.0:
            continue
        fp = flow_derivative(x, p)
        ds = -epsilon  # dS/dlambda on y = 0
        if abs(fp) < 1e-12:
            kind = "degenerate"
        elif math.copysign(1.0, fp) == math.copysign(1.0, ds):
            kind = "pseudonode"
        else:
            kind = "pseudosaddle"
        out.append(PseudoEquilibrium(x, lam, fp, ds, kind))
    return out


# -------------------------------------------------------- border collisions


def detect_border_collisions(epsilon_range, n_steps: int = 1000, xtol: float = 1e-15) -> list:
    """Sweep ``epsilon`` and bisect sign changes of each branch equilibrium's ``y``."""
    lo, hi = epsilon_range
    if not lo < hi:
        raise DomainError("epsilon range must be increasing")
    grid = np.linspace(lo, hi, n_steps + 1)
    records = []
    for k in (1, 0):
        def y_of(e, k=k):
            return branch_equilibrium(k, Params(float(e))).location.y

        ys = [y_of(e) for e in grid]
        for i in range(n_steps):
            a, b = grid[i], grid[i + 1]
            ya, yb = ys[i], ys[i + 1]
            if ya == 0.0 and i > 0:
                continue  # counted with the previous interval
            if ya == 0.0:
                root = a
            elif yb == 0.0:
                root = b
            elif ya * yb < 0:
                while b - a > xtol:
                    m = 0.5 * (a + b)
                    ym = y_of(m)
                    if ym == 0.0:
                        a = b = m
                        break
                    if ya * ym < 0:
                        b = m
                    else:
                        a, ya = m, ym
                root = 0.5 * (a + b)
            else:
                continue
            records.append(BifurcationRecord("border_collision", float(root), {"branch": k}))
    return sorted(records, key=lambda r: r.epsilon)


# -------------------------------------------------------------- return map


def crossing_interval(epsilon: float) -> tuple:
    """``I = (1/2, 3/4 + 15 eps/4)``: downward crossings left of the sliding segment."""
    return 0.5, sliding_interval(Params(epsilon))[1]


def return_map(epsilon: float, x0: float, opts: IntegratorOptions = RETURN_OPTS) -> ReturnMapSample:
    """Second transversal crossing of ``y = 0`` of the orbit through ``(x0, 0)``."""
    if not EPS0 < epsilon < 0:
        raise DomainError(f"return map needs eps in (-1/15, 0), got {epsilon}")
    lo, hi = crossing_interval(epsilon)
    if not lo < x0 < hi:
        raise DomainError(f"x0={x0} outside I=({lo}, {hi})")
    sys = build_nonsmooth(Params(epsilon))
    traj = integrate(sys, (x0, 0.0), opts, stop_after_crossings=2, stop_on_slide=True)
    kinds = [e.kind for e in traj.events]
    if EventKind.SLIDE_START in kinds:
        ev = traj.events_of(EventKind.SLIDE_START)[0]
        raise SlidingEncountered("orbit reached a sliding segment", ev.state, ev.time)
    crossings = traj.events_of(EventKind.CROSSING)
    if len(crossings) < 2:
        raise IntegrationError("no return within t_max", traj.final_state, traj.times[-1])
    return ReturnMapSample(
        x_in=x0,
        x_out=crossings[1].state.x,
        crossings=tuple(e.state for e in crossings),
        flight_time=crossings[1].time,
    )


def _displacement(epsilon, x):
    return return_map(epsilon, x).x_out - x


def find_periodic_orbit(epsilon: float, tol: float = 1e-10) -> PeriodicOrbitRecord:
    """Fixed point of the return map on ``I`` by bisection on ``R(x) - x``."""
    lo, hi = crossing_interval(epsilon)
    if not EPS0 < epsilon < 0:
        raise DomainError("periodic orbit exists only for eps in (-1/15, 0)")
    pad = min(1e-9, 1e-3 * (hi - lo))
    a, b = lo + pad, hi - pad
    da, db = _displacement(epsilon, a), _displacement(epsilon, b)
    if not (da > 0 > db):
        raise ConvergenceError(f"R(x) - x has no sign change on I ({da}, {db})", (a, b))
    while b - a > tol:
        m = 0.5 * (a + b)
        dm = _displacement(epsilon, m)
        if dm == 0.0:
            a = b = m
            break
        if dm > 0:
            a = m
        else:
            b = m
    x_star = 0.5 * (a + b)
    sample = return_map(epsilon, x_star)
    h = min(1e-6, 0.25 * (x_star - lo), 0.25 * (hi - x_star))
    mult = (return_map(epsilon, x_star + h).x_out - return_map(epsilon, x_star - h).x_out) / (2 * h)
    sys = build_nonsmooth(Params(epsilon))
    orbit = integrate(sys, (x_star, 0.0), RETURN_OPTS, stop_after_crossings=2)
    return PeriodicOrbitRecord(
        epsilon=epsilon,
        x_left=x_star,
        x_right=sample.crossings[0].x,
        period=sample.flight_time,
        samples=orbit,
        residual=abs(sample.x_out - x_star),
        multiplier=mult,
    )


# ---------------------------------------------------------------- homoclinic


def _report(traj, launch, epsilon, tol, slide_time, escape) -> HomoclinicReport:
    crossings = traj.events_of(EventKind.CROSSING)
    crossing_x = crossings[0].state.x if crossings else None
    dist = traj.final_state.distance(BOUNDARY_EQ)
    # a return into y > 0 is only possible across the crossing segment
    verified = dist <= tol and (escape == "upper" or crossing_x is not None)
    return HomoclinicReport(
        launch=launch,
        crossing_x=crossing_x,
        return_distance=dist,
        verified=bool(verified),
        epsilon=epsilon,
        slide_time=slide_time,
        escape=escape,
        termination=traj.termination.value if traj.termination else None,
        trajectory=traj,
    )


def verify_homoclinic(
    delta: float = 1e-8,
    tol: float = 1e-5,
    epsilon: float = EPS0,
    opts: IntegratorOptions = RETURN_OPTS,
) -> HomoclinicReport:
    """Follow the lower-field orbit leaving ``(1/2, 0)`` and measure its return."""
    if not 0 < delta < 1e-2:
        raise DomainError("delta must be small and positive")
    sys = build_nonsmooth(Params(epsilon))
    launch = State(0.5, -delta)
    traj = integrate(sys, launch, opts)
    return _report(traj, launch, epsilon, tol, 0.0, "lower")


def homoclinic_family(
    slide_times: Sequence[float],
    tol: float = 1e-4,
    seed_offset: float = 1e-6,
    opts: IntegratorOptions = RETURN_OPTS,
) -> list:
    """Orbits that slide away from the boundary equilibrium, then escape.

    The sliding flow is at rest at ``x = 1/2`` itself, so every orbit starts
    ``seed_offset`` to its right. Each slide time is followed once by an
    escape into ``y > 0`` and once into ``y < 0``.
    """
    sys = build_nonsmooth(Params(EPS0))
    x_cap = sliding_interval(Params(EPS0))[0]  # lambda* = 0 end, x = 2/3
    start = State(0.5 + seed_offset, 0.0)
    reports = []
    for t_slide in slide_times:
        if t_slide < 0:
            raise DomainError("slide times must be non-negative")
        if t_slide > 0:
            held = integrate(sys, start, opts.with_(t_max=t_slide, unstable_slide_policy=SlidePolicy.HOLD))
            left_segment = bool(
                held.events_of(EventKind.SLIDE_EXIT, EventKind.ESCAPE, EventKind.CROSSING)
            ) or held.final_state.y != 0.0
            if held.termination is not EventKind.TIMEOUT or left_segment or held.final_state.x >= x_cap:
                raise DomainError(f"slide time {t_slide} runs past the sliding segment")
            s_exit = held.final_state
        else:
            held, s_exit = None, start
        for policy, name in ((SlidePolicy.ESCAPE_UPPER, "upper"), (SlidePolicy.ESCAPE_LOWER, "lower")):
            tail = integrate(sys, s_exit, opts.with_(unstable_slide_policy=policy))
            traj = Trajectory()
            if held is not None:
                traj.extend(held)
                traj.events.pop()  # the Timeout that ended the slide
            traj.extend(tail, t_offset=t_slide)
            reports.append(_report(tail, s_exit, EPS0, tol, float(t_slide), name))
            reports[-1].trajectory = traj
    return reports


# ---------------------------------------------------------- fused focus etc.


def fused_focus_check(epsilon_range=(-0.02, 0.02), x_probe: float = 0.75) -> BifurcationRecord:
    """Locate the sign change of ``dS/dlambda`` and check the attractors on both sides."""
    lo, hi = epsilon_range
    if not lo < 0 < hi:
        raise DomainError("range must straddle 0")

    def sign(e):
        return sliding_stability_sign(build_nonsmooth(Params(e)), (x_probe, 0.0))

    a, b = lo, hi
    sa = sign(a)
    root = None
    while b - a > 1e-15:
        m = 0.5 * (a + b)
        sm = sign(m)
        if sm == 0.0:
            root = m
            break
        if sm * sa > 0:
            a, sa = m, sm
        else:
            b = m
    if root is None:
        root = 0.5 * (a + b)
    probe = 0.5 * min(-lo, hi)
    orbit = find_periodic_orbit(-probe)
    sys = build_nonsmooth(Params(probe))
    traj = integrate(sys, (0.9, 0.2), IntegratorOptions(t_max=400.0))
    pseudo = [p for p in find_pseudoequilibria(probe) if p.stable]
    landed = (
        traj.termination is EventKind.EQUILIBRIUM_REACHED
        and bool(pseudo)
        and abs(traj.final_state.x - pseudo[0].x) < 1e-6
        and traj.final_state.y == 0.0
    )
    return BifurcationRecord(
        "fused_focus",
        float(root),
        {
            "orbit_epsilon": -probe,
            "orbit_amplitude": orbit.amplitude,
            "pseudo_epsilon": probe,
            "pseudo_x": pseudo[0].x if pseudo else None,
            "terminal_state": (traj.final_state.x, traj.final_state.y),
            "terminal_event": traj.termination.value,
            "converged_to_pseudoequilibrium": landed,
        },
    )


@dataclass(frozen=True)
class DiagramRow:
    epsilon: float
    attractor: str  # real_equilibrium | pseudoequilibrium | periodic_orbit
    x_left: float
    x_right: float

    @property
    def amplitude(self) -> float:
        return self.x_right - self.x_left


def attractor_at(epsilon: float) -> DiagramRow:
    for k in (1, 0):
        info = branch_equilibrium(k, Params(epsilon))
        if not info.is_virtual:
            x = info.location.x
            return DiagramRow(epsilon, "real_equilibrium", x, x)
    if epsilon == 0.0:
        x = sliding_interval(Params(0.0))[0]
        return DiagramRow(epsilon, "pseudoequilibrium", x, x)
    stable = [p for p in find_pseudoequilibria(epsilon) if p.stable]
    if stable:
        return DiagramRow(epsilon, "pseudoequilibrium", stable[0].x, stable[0].x)
    orbit = find_periodic_orbit(epsilon)
    return DiagramRow(epsilon, "periodic_orbit", orbit.x_left, orbit.x_right)


def iter_diagram(epsilon_range, n: int, workers: int = 1) -> Iterator[DiagramRow]:
    """Yield diagram rows in epsilon order as they become available."""
    lo, hi = epsilon_range
    if n < 2:
        raise DomainError("n must be at least 2")
    if not lo < hi:
        raise DomainError("epsilon range must be increasing")
    eps = [float(e) for e in np.linspace(lo, hi, n)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(attractor_at, eps)
    else:
        for e in eps:
            yield attractor_at(e)


def bifurcation_diagram(epsilon_range, n: int, workers: int = 1) -> list:
    """Attractor per epsilon on ``n`` evenly spaced values; rows in epsilon order."""
    return list(iter_diagram(epsilon_range, n, workers))
