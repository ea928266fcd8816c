"""
Bifurcations of the smooth (arctan) Welander model.

The equilibrium is continued in ``epsilon`` with Newton's method. Hopf points
are sign changes of the Jacobian trace with positive determinant. Periodic
orbits are fixed points of the first-return map to the horizontal line
through the equilibrium, taken to the right of it. The saddle-node of
periodic orbits is bracketed by whether that map has any fixed point at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from ._stepping import march
from .core import TOL_H, EventKind, Params, RegionLabel, State, Trajectory
from .exceptions import ConvergenceError, DomainError, IntegrationError
from .welander import SmoothSystem, build_smooth

EPS0 = -1.0 / 15.0

RTOL = 1e-11
ATOL = 1e-13
#: y-distance per step allowed inside the arctan layer, in units of a
LAYER_CAP = 2.0


@dataclass(frozen=True)
class SmoothEquilibrium:
    location: State
    jacobian: np.ndarray
    trace: float
    det: float
    stable: bool
    residual: float


@dataclass(frozen=True)
class SmoothOrbit:
    epsilon: float
    a: float
    section_x: float
    section_y: float
    period: float
    floquet_multiplier: float
    stable: bool


@dataclass(frozen=True)
class LimitStudyRow:
    a: float
    eps_hopf: float
    eps_snpo: float
    gap: float


def _system(epsilon, a) -> SmoothSystem:
    return build_smooth(Params(epsilon), a)


def _graph_guess(sys: SmoothSystem) -> np.ndarray:
    # on the nullcline x = 1/(1+k(y)) the remaining equation is scalar in y
    def g(y):
        k = sys.k(y)
        return sys.field(np.array([1.0 / (1.0 + k), y]))[1]

    lo, hi = -1.0, 1.0
    if g(lo) * g(hi) > 0:
        raise ConvergenceError("no sign change of the reduced equilibrium equation")
    y = brentq(g, lo, hi, xtol=1e-16, rtol=1e-15)
    return np.array([1.0 / (1.0 + sys.k(y)), y])


def smooth_equilibrium(
    epsilon: float, a: float, guess=None, tol: float = 1e-12, max_iter: int = 50
) -> SmoothEquilibrium:
    """Newton iteration with the analytic Jacobian and residual backtracking."""
    sys = _system(epsilon, a)
    z = _graph_guess(sys) if guess is None else np.array(
        guess.as_array() if isinstance(guess, State) else guess, dtype=float
    )
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite initial guess")
    f = sys.field(z)
    res = float(np.linalg.norm(f))
    for _ in range(max_iter):
        if res < tol:
            break
        step = np.linalg.solve(sys.jacobian(z), -f)
        t = 1.0
        while True:
            z_new = z + t * step
            f_new = sys.field(z_new)
            r_new = float(np.linalg.norm(f_new))
            if r_new < res or t < 1e-6:
                break
            t *= 0.5
        z, f, res = z_new, f_new, r_new
    if not res < tol:
        raise ConvergenceError(f"Newton did not converge (residual {res:.3e})", z)
    jac = sys.jacobian(z)
    tr, det = float(np.trace(jac)), float(np.linalg.det(jac))
    return SmoothEquilibrium(State.from_array(z), jac, tr, det, tr < 0 and det > 0, res)


def hopf_scan(a: float, epsilon_lo: float, epsilon_hi: float, n: int = 41, tol: float = 1e-10) -> list:
    """Values of epsilon where the equilibrium's trace changes sign with det > 0."""
    if not a > 0 or not epsilon_lo < epsilon_hi:
        raise DomainError("need a > 0 and epsilon_lo < epsilon_hi")
    grid = np.linspace(epsilon_lo, epsilon_hi, n)
    branch = []
    guess = None
    for e in grid:
        eq = smooth_equilibrium(float(e), a, guess)
        guess = eq.location
        branch.append(eq)
    out = []
    for i in range(n - 1):
        e0, e1 = float(grid[i]), float(grid[i + 1])
        q0, q1 = branch[i], branch[i + 1]
        if q0.trace * q1.trace > 0:
            continue
        guess = q0.location
        t0 = q0.trace
        while e1 - e0 > tol:
            m = 0.5 * (e0 + e1)
            qm = smooth_equilibrium(m, a, guess)
            guess = qm.location
            if qm.trace == 0.0:
                e0 = e1 = m
                break
            if qm.trace * t0 > 0:
                e0, t0 = m, qm.trace
            else:
                e1 = m
        e_h = 0.5 * (e0 + e1)
        if smooth_equilibrium(e_h, a, guess).det > 0:
            out.append(e_h)
    return out


# ------------------------------------------------------------ return map


def _layer_cap(sys: SmoothSystem):
    a = sys.a

    def cap(s):
        vy = abs(sys.field(s)[1]) + 1e-300
        return max(0.5 * abs(s[1]), LAYER_CAP * a) / vy

    return cap


def smooth_return_map(
    epsilon: float,
    a: float,
    x0: float,
    section_y: float = 0.0,
    t_max: float = 200.0,
    with_time: bool = False,
):
    """First return of ``(x0, section_y)`` to the same line, crossing upward."""
    sys = _system(epsilon, a)
    s0 = np.array([x0, section_y], dtype=float)
    if not sys.field(s0)[1] > 0:
        raise DomainError(f"flow at ({x0}, {section_y}) does not cross the section upward")
    fun = sys.field
    cap = _layer_cap(sys)
    down = march(
        fun, 0.0, s0, t_max, rtol=RTOL, atol=ATOL, max_step=0.5,
        guard=lambda s: s[1] - section_y, step_cap=cap,
    )
    if down.status != "event":
        raise IntegrationError("no downward crossing within t_max", down.states[-1], down.times[-1])
    up = march(
        fun, down.event_time, down.event_state, t_max, rtol=RTOL, atol=ATOL, max_step=0.5,
        guard=lambda s: section_y - s[1], step_cap=cap,
    )
    if up.status != "event":
        raise IntegrationError("no return within t_max", up.states[-1], up.times[-1])
    x1 = float(up.event_state[0])
    return (x1, up.event_time) if with_time else x1


def _label(y: float) -> RegionLabel:
    if y > TOL_H:
        return RegionLabel.UPPER
    if y < -TOL_H:
        return RegionLabel.LOWER
    return RegionLabel.MANIFOLD


def simulate_smooth(
    epsilon: float,
    a: float,
    s0,
    t_max: float = 100.0,
    rtol: float = RTOL,
    atol: float = ATOL,
    max_step: float = 0.5,
) -> Trajectory:
    """Trajectory of the smooth model with ``y = 0`` crossings logged as events.

    Region labels refer to the sign of ``y`` only; the smooth field itself
    does not switch.
    """
    sys = _system(epsilon, a)
    z = np.array(s0.as_array() if isinstance(s0, State) else s0, dtype=float)
    if not np.all(np.isfinite(z)):
        raise DomainError("non-finite initial state")
    cap = _layer_cap(sys)
    traj = Trajectory()
    traj.append(0.0, z, _label(z[1]))
    t = 0.0
    side = 1.0 if z[1] > 0 or (z[1] == 0 and sys.field(z)[1] > 0) else -1.0
    while t < t_max:
        res = march(
            sys.field, t, z, t_max, rtol=rtol, atol=atol, max_step=max_step,
            guard=lambda s, side=side: side * s[1], step_cap=cap,
        )
        for tt, arr in zip(res.times[1:], res.states[1:]):
            traj.append(tt, arr, _label(arr[1]))
        if res.status == "t_end":
            break
        t, z = res.event_time, np.array([res.event_state[0], 0.0])
        traj.log(EventKind.CROSSING, t, z, RegionLabel.MANIFOLD)
        side = -side
    traj.log(EventKind.TIMEOUT, traj.times[-1], traj.final_state, traj.regions[-1])
    return traj


# ---------------------------------------------------------------- orbits


class _Displacement:
    """``R(x) - x`` on the ray right of the equilibrium, memoised."""

    def __init__(self, epsilon, a, eq: SmoothEquilibrium):
        self.epsilon, self.a = epsilon, a
        self.xe, self.ye = eq.location.x, eq.location.y
        self.cache = {}

    def __call__(self, x):
        x = float(x)
        if x not in self.cache:
            self.cache[x] = smooth_return_map(self.epsilon, self.a, x, self.ye) - x
        return self.cache[x]


def _grid(xe, x_max, n):
    return xe + np.geomspace(1e-5, x_max - xe, n)


def _zoom_max(d, lo, hi, levels=2, n=9):
    """Maximise ``d`` on [lo, hi] by nested sampling, then Brent on the best cell."""
    for _ in range(levels):
        xs = np.linspace(lo, hi, n)
        vs = [d(x) for x in xs]
        i = int(np.argmax(vs))
        lo, hi = xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]
    r = minimize_scalar(lambda x: -d(x), bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    x_best = max([lo, hi, float(r.x)], key=d)
    return x_best, d(x_best)


def _fixed_points(d, xs, vs):
    roots = []
    for i in range(len(xs) - 1):
        if vs[i] == 0.0:
            roots.append(float(xs[i]))
        elif vs[i] * vs[i + 1] < 0:
            roots.append(float(brentq(d, xs[i], xs[i + 1], xtol=1e-12, rtol=1e-14)))
    # humps that stay below the grid resolution
    for i in range(1, len(xs) - 1):
        if vs[i] < 0 and vs[i] >= vs[i - 1] and vs[i] >= vs[i + 1]:
            x_m, v_m = _zoom_max(d, xs[i - 1], xs[i + 1])
            if v_m > 0:
                roots.append(float(brentq(d, xs[i - 1], x_m, xtol=1e-12, rtol=1e-14)))
                roots.append(float(brentq(d, x_m, xs[i + 1], xtol=1e-12, rtol=1e-14)))
    return sorted(set(roots))


def find_smooth_orbits(
    epsilon: float, a: float, n_grid: int = 40, x_max: float = 1.2, eq: Optional[SmoothEquilibrium] = None
) -> list:
    """All periodic orbits met by the section ray right of the equilibrium."""
    if not a > 0:
        raise DomainError("a must be positive")
    eq = eq or smooth_equilibrium(epsilon, a)
    d = _Displacement(epsilon, a, eq)
    xs = _grid(d.xe, x_max, n_grid)
    vs = [d(x) for x in xs]
    orbits = []
    for x_star in _fixed_points(d, xs, vs):
        h = min(1e-6, 0.1 * (x_star - d.xe))
        mult = (
            smooth_return_map(epsilon, a, x_star + h, d.ye)
            - smooth_return_map(epsilon, a, x_star - h, d.ye)
        ) / (2 * h)
        _, period = smooth_return_map(epsilon, a, x_star, d.ye, with_time=True)
        orbits.append(SmoothOrbit(epsilon, a, x_star, d.ye, period, mult, abs(mult) < 1))
    return orbits


def max_displacement(epsilon: float, a: float, window=None, n_grid: int = 40) -> tuple:
    """Largest ``R(x) - x`` right of the equilibrium, away from the equilibrium itself.

    Periodic orbits exist on the stable side of the Hopf point exactly when
    this is positive. Returns ``(value, x)``.
    """
    eq = smooth_equilibrium(epsilon, a)
    d = _Displacement(epsilon, a, eq)
    if window is None:
        xs = _grid(d.xe, 1.2, n_grid)
    else:
        xs = np.linspace(max(window[0], d.xe + 1e-5), window[1], n_grid)
    vs = [d(x) for x in xs]
    best = None
    for i in range(1, len(xs) - 1):
        if vs[i] >= vs[i - 1] and vs[i] >= vs[i + 1]:
            cand = _zoom_max(d, xs[i - 1], xs[i + 1])
            if best is None or cand[1] > best[1]:
                best = cand
    if best is None:
        i = int(np.argmax(vs))
        best = (float(xs[i]), vs[i])
    return best[1], best[0]


def snpo_locate(a: float, eps_lo: float, eps_hi: float, tol: float = 1e-8) -> float:
    """Root in epsilon of the largest displacement, between ``eps_lo`` (no orbit)
    and ``eps_hi`` (two orbits)."""
    if not eps_lo < eps_hi:
        raise DomainError("eps_lo must be below eps_hi")
    n_hi = len(find_smooth_orbits(eps_hi, a))
    n_lo = len(find_smooth_orbits(eps_lo, a))
    if n_hi < 2 or n_lo != 0:
        raise DomainError(f"invalid bracket: {n_hi} orbits at eps_hi, {n_lo} at eps_lo")
    return float(brentq(lambda e: max_displacement(e, a)[0], eps_lo, eps_hi, xtol=tol, rtol=1e-14))


def _snpo_bracket(a, eps_hopf, step):
    hi = eps_hopf - 0.1 * step
    while len(find_smooth_orbits(hi, a)) < 2:
        hi = 0.5 * (hi + eps_hopf)
        if eps_hopf - hi < 1e-9:
            raise ConvergenceError("no bistable window below the Hopf point")
    lo = hi - step
    while find_smooth_orbits(lo, a):
        hi, lo = lo, lo - step
        if lo < eps_hopf - 0.05:
            raise ConvergenceError("periodic orbits persist far below the Hopf point")
    return lo, hi


def limit_study(a_values: Sequence[float], window=(-0.072, -0.060)) -> list:
    """Subcritical Hopf and SNPO values as the smoothing width shrinks."""
    a_values = list(a_values)
    if any(v <= 0 for v in a_values) or any(
        x <= y for x, y in zip(a_values[:-1], a_values[1:])
    ):
        raise DomainError("a values must be positive and strictly decreasing")
    rows = []
    for a in a_values:
        hopfs = hopf_scan(a, *window)
        if not hopfs:
            raise ConvergenceError(f"no Hopf point in {window} for a={a}")
        e_h = min(hopfs, key=lambda e: abs(e - EPS0))
        lo, hi = _snpo_bracket(a, e_h, step=max(2.0 * a, 2e-4))
        e_sn = snpo_locate(a, lo, hi)
        rows.append(LimitStudyRow(a, e_h, e_sn, e_h - e_sn))
    return rows
