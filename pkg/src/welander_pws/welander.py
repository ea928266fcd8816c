"""
Welander's ocean-convection model in shifted coordinates ``x = T``,
``y = S - alpha*T - epsilon``:

    x' = 1 - x - k x
    y' = beta - beta*eps - k*eps - alpha - (beta + k) y - (alpha*beta - alpha) x

with ``k`` the Heaviside step of ``y`` (nonsmooth model) or
``arctan(y/a)/pi + 1/2`` (smooth model). Closed forms accept
:class:`fractions.Fraction` arguments, so the border-collision values can be
checked as exact rationals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .core import KnownEquilibrium, Params, PwsSystem, RegionLabel, State
from .exceptions import DomainError

ALPHA = Fraction(4, 5)
BETA = Fraction(1, 2)
#: the k = 1 border collision at the default parameters
EPSILON_0 = Fraction(-1, 15)


@dataclass(frozen=True)
class OriginalState:
    T: float
    S: float
    alpha: float = 0.8

    @property
    def rho(self):
        return -self.alpha * self.T + self.S


@dataclass(frozen=True)
class EquilibriumInfo:
    branch: int
    location: State
    region: RegionLabel
    is_virtual: bool
    eigenvalues: tuple
    eigenvectors: tuple


def branch_rhs(k: float, p: Params, s) -> np.ndarray:
    x, y = s[0], s[1]
    a, b, e = p.alpha, p.beta, p.epsilon
    return np.array([
        1.0 - x - k * x,
        b - b * e - k * e - a - (b + k) * y - (a * b - a) * x,
    ])


def branch_jacobian(k: float, p: Params) -> np.ndarray:
    a, b = p.alpha, p.beta
    return np.array([[-(1.0 + k), 0.0], [-(a * b - a), -(b + k)]])


def build_nonsmooth(p: Params) -> PwsSystem:
    """Heaviside model as a Filippov system with ``h(x, y) = y``."""
    grad = np.array([0.0, 1.0])
    jl, ju = branch_jacobian(0.0, p), branch_jacobian(1.0, p)
    return PwsSystem(
        field_lower=lambda s: branch_rhs(0.0, p, s),
        field_upper=lambda s: branch_rhs(1.0, p, s),
        switching_fn=lambda s: float(s[1]),
        switching_grad=lambda s: grad,
        manifold_point=lambda u: np.array([float(u), 0.0]),
        manifold_coord=lambda s: float(s[0]),
        lambda_dependence="affine",
        equilibria=_known_equilibria(p),
        jac_lower=lambda s: jl,
        jac_upper=lambda s: ju,
        manifold_window=(-1.0, 3.0),
        params=p,
        field_jump=lambda s: np.array([-s[0], -p.epsilon - s[1]]),
    )


def _known_equilibria(p: Params) -> tuple:
    out = []
    for k, side in ((1, RegionLabel.UPPER), (0, RegionLabel.LOWER)):
        info = branch_equilibrium(k, p)
        if info.is_virtual and abs(info.location.y) > 1e-13:
            continue
        loc, regions = info.location, {side}
        if abs(loc.y) <= 1e-13:
            # boundary equilibrium up to rounding in epsilon
            loc = State(loc.x, 0.0)
            regions.add(RegionLabel.MANIFOLD)
        out.append(KnownEquilibrium(loc, frozenset(regions)))
    lo, hi = sliding_interval(p)
    lo, hi = min(lo, hi), max(lo, hi)
    for x in pseudo_candidates(p):
        if lo <= x <= hi:
            out.append(KnownEquilibrium(State(x, 0.0), frozenset({RegionLabel.MANIFOLD})))
    return tuple(out)


def equilibrium_location(k, alpha, beta, epsilon):
    """Fixed point of branch ``k``; exact for Fraction inputs."""
    x = 1 / (1 + k)
    y = (beta - (beta + k) * epsilon - alpha - (alpha * beta - alpha) * x) / (beta + k)
    return x, y


def branch_equilibrium(k: int, p: Params) -> EquilibriumInfo:
    if k not in (0, 1):
        raise DomainError("branch must be 0 or 1")
    x, y = equilibrium_location(k, p.alpha, p.beta, p.epsilon)
    region = RegionLabel.UPPER if k == 1 else RegionLabel.LOWER
    virtual = y < 0 if k == 1 else y > 0
    # lower-triangular Jacobian: eigenvalues are the diagonal
    mu_x, mu_y = -(1.0 + k), -(p.beta + k)
    v_x = np.array([1.0 - p.beta, p.alpha * p.beta - p.alpha])
    v_x = v_x / np.hypot(*v_x)
    return EquilibriumInfo(
        branch=k,
        location=State(float(x), float(y)),
        region=region,
        is_virtual=bool(virtual),
        eigenvalues=(mu_x, mu_y),
        eigenvectors=(tuple(v_x), (0.0, 1.0)),
    )


def border_collision_epsilons(alpha=ALPHA, beta=BETA) -> tuple:
    """Values of epsilon at which the k=0 and k=1 equilibria sit on ``y = 0``.

    Returned as ``(eps_k0, eps_k1)``; ``(1/5, -1/15)`` at the defaults.
    """
    out = []
    for k in (0, 1):
        x = Fraction(1, 1 + k) if isinstance(alpha, Fraction) else 1.0 / (1 + k)
        out.append((beta - alpha - (alpha * beta - alpha) * x) / (beta + k))
    return tuple(out)


def sliding_interval(p: Params) -> tuple:
    """Manifold abscissae where ``lambda* = 0`` and ``lambda* = 1``.

    ``(3/4 + 5 eps/4, 3/4 + 15 eps/4)`` at the default alpha, beta.
    """
    a, b, e = p.alpha, p.beta, p.epsilon
    c = a - a * b
    x_lam0 = (a + b * e - b) / c
    x_lam1 = (a + b * e - b + e) / c
    return x_lam0, x_lam1


def sliding_lambda_closed(p: Params, x: float) -> float:
    """Unclipped ``lambda*(x)``; ``(-3 - 5 eps + 4x) / (10 eps)`` at the defaults."""
    a, b, e = p.alpha, p.beta, p.epsilon
    s0 = b - b * e - a - (a * b - a) * x
    return s0 / e


def pseudo_candidates(p: Params) -> list:
    """Real roots of the pseudoequilibrium quadratic (sliding flow at rest).

    At the defaults this is ``4x^2 + (5 eps - 3) x - 10 eps = 0``.
    """
    a, b, e = p.alpha, p.beta, p.epsilon
    if e == 0:
        return []
    qa = a * b - a
    qb = -(e + b - b * e - a)
    qc = e
    disc = qb * qb - 4 * qa * qc
    if disc < 0:
        return []
    r = math.sqrt(disc)
    # cancellation-free pair
    q = -0.5 * (qb + math.copysign(r, qb))
    roots = {q / qa, qc / q} if q != 0 else {-qb / (2 * qa)}
    return sorted(float(v) for v in roots)


def coordinate_change(os: OriginalState, p: Params) -> State:
    return State(os.T, os.S - p.alpha * os.T - p.epsilon)


def inverse_coordinate_change(s: State, p: Params) -> OriginalState:
    return OriginalState(s.x, s.y + p.alpha * s.x + p.epsilon, p.alpha)


# ------------------------------------------------------------------ smooth


@dataclass(frozen=True)
class SmoothSystem:
    """Welander right-hand side with ``k(y) = arctan(y/a)/pi + 1/2``."""

    params: Params
    a: float

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError("smoothing width a must be positive")

    def k(self, y):
        return np.arctan(y / self.a) / np.pi + 0.5

    def dk(self, y):
        return (self.a / (self.a * self.a + y * y)) / np.pi

    def field(self, s) -> np.ndarray:
        return branch_rhs(self.k(s[1]), self.params, s)

    def jacobian(self, s) -> np.ndarray:
        x, y = s[0], s[1]
        p = self.params
        k, dk = self.k(y), self.dk(y)
        return np.array([
            [-1.0 - k, -x * dk],
            [-(p.alpha * p.beta - p.alpha), -(p.beta + k) - (p.epsilon + y) * dk],
        ])


def build_smooth(p: Params, a: float) -> SmoothSystem:
    return SmoothSystem(p, float(a))
