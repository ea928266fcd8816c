import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm
from scipy.optimize import brentq

from welander_pws import (
    DomainError,
    EventKind,
    Params,
    bifurcation_diagram,
    crossing_interval,
    detect_border_collisions,
    epsilon_of_pseudo_x,
    find_periodic_orbit,
    find_pseudoequilibria,
    fused_focus_check,
    homoclinic_family,
    pseudoeq_condition,
    return_map,
    verify_homoclinic,
)
from welander_pws.nonsmooth import attractor_at, flow_derivative
from welander_pws.welander import branch_jacobian, branch_rhs, sliding_interval

EPS0 = -1 / 15


def quad_roots(eps):
    b = 5 * eps - 3
    d = np.sqrt(b * b + 160 * eps)
    return (-b - d) / 8, (-b + d) / 8


def lower_flow_crossing(eps=EPS0):
    """Where the lower-field orbit from (1/2, 0) next meets y = 0, by matrix exponential."""
    p = Params(eps)
    A = branch_jacobian(0, p)
    zs = np.array([1.0, 0.2 - eps])
    z0 = np.array([0.5, 0.0])

    def z(t):
        return zs + expm(A * t) @ (z0 - zs)

    t = brentq(lambda t: z(t)[1], 0.1, 5.0, xtol=1e-15)
    return z(t)[0]


class TestPseudoCondition:
    def test_quadratic_root(self):
        x = quad_roots(-0.05)[1]
        assert x == pytest.approx(0.60635, abs=1e-5)
        assert pseudoeq_condition(x, -0.05) == pytest.approx(0.0, abs=1e-12)

    def test_fused_focus_point(self):
        assert pseudoeq_condition(0.75, 0.0) == 0.0

    def test_collision_point(self):
        assert pseudoeq_condition(0.5, -1 / 15) == pytest.approx(0.0, abs=1e-15)


class TestEpsilonOfPseudoX:
    def test_half(self):
        assert epsilon_of_pseudo_x(0.5) == pytest.approx(-1 / 15, abs=1e-16)

    def test_three_quarters(self):
        assert epsilon_of_pseudo_x(0.75) == 0.0

    def test_arithmetic(self):
        assert epsilon_of_pseudo_x(0.6) == pytest.approx(-0.36 / 7, abs=1e-16)

    def test_pole(self):
        with pytest.raises(DomainError):
            epsilon_of_pseudo_x(2)


class TestFindPseudoequilibria:
    def test_unstable_pseudonode(self):
        (pe,) = find_pseudoequilibria(-0.05)
        assert pe.x == pytest.approx(quad_roots(-0.05)[1], abs=1e-13)
        assert pe.flow_derivative > 0
        assert pe.classification == "pseudonode" and not pe.stable

    def test_none_below_collision(self):
        assert find_pseudoequilibria(-0.1) == []

    def test_small_negative(self):
        (pe,) = find_pseudoequilibria(-0.01)
        assert 0.5 < pe.x < 0.75

    def test_stable_for_positive(self):
        (pe,) = find_pseudoequilibria(0.1)
        assert pe.stable and pe.classification == "pseudonode"

    def test_zero_rejected(self):
        with pytest.raises(DomainError):
            find_pseudoequilibria(0.0)

    @given(st.floats(-0.0666, -1e-4))
    def test_consistency_and_derivative(self, eps):
        (pe,) = find_pseudoequilibria(eps)
        assert epsilon_of_pseudo_x(pe.x) == pytest.approx(eps, abs=1e-10)
        closed = (-3 + 5 * eps + 8 * pe.x) / (-10 * eps)
        assert pe.flow_derivative == pytest.approx(closed, rel=1e-9)
        h = 1e-6
        p = Params(eps)
        # finite difference of the sliding flow 1 - x - lambda*(x) x
        def g(x):
            return 1 - x - (-3 - 5 * eps + 4 * x) / (10 * eps) * x
        assert flow_derivative(pe.x, p) == pytest.approx((g(pe.x + h) - g(pe.x - h)) / (2 * h), rel=1e-5)

    def test_collision_coincidence(self):
        for eps in (-0.0666, -0.06666, -0.066666):
            (pe,) = find_pseudoequilibria(eps)
            left = sliding_interval(Params(eps))[1]
            gap = eps + 1 / 15
            assert abs(pe.x - 0.5) < 20 * gap
            assert abs(left - 0.5) < 4 * gap


class TestBorderCollisions:
    def test_full_range(self):
        recs = detect_border_collisions((-0.2, 0.3), 1000)
        assert [r.witness["branch"] for r in recs] == [1, 0]
        assert recs[0].epsilon == pytest.approx(-1 / 15, abs=1e-12)
        assert recs[1].epsilon == pytest.approx(0.2, abs=1e-12)
        assert all(r.kind == "border_collision" for r in recs)

    def test_empty(self):
        assert detect_border_collisions((0.0, 0.1), 100) == []

    def test_narrow(self):
        (rec,) = detect_border_collisions((-0.07, -0.06), 10)
        assert rec.epsilon == pytest.approx(-1 / 15, abs=1e-12)

    def test_reversed(self):
        with pytest.raises(DomainError):
            detect_border_collisions((0.1, 0.0))


class TestReturnMap:
    @pytest.mark.parametrize("x0", [0.51, 0.57, 0.63])
    def test_maps_into_interval(self, x0):
        lo, hi = crossing_interval(-0.03)
        assert (lo, hi) == pytest.approx((0.5, 0.6375))
        r = return_map(-0.03, x0)
        assert lo < r.x_out < hi
        assert len(r.crossings) == 2 and r.flight_time > 0

    def test_right_exit(self):
        r = return_map(-0.03, 0.5 + 1e-4)
        assert r.crossings[0].x > 0.6375

    def test_outside_interval(self):
        with pytest.raises(DomainError):
            return_map(-0.03, 0.49)

    def test_parameter_precondition(self):
        with pytest.raises(DomainError):
            return_map(0.01, 0.6)


class TestPeriodicOrbit:
    def test_minus_0_03(self):
        orb = find_periodic_orbit(-0.03)
        assert 0.5 < orb.x_left < 0.6375
        assert orb.residual < 1e-9
        assert orb.x_right > 0.75 and orb.period > 0
        assert 0 < abs(orb.multiplier) < 1
        # dense-sampling oracle: the fixed point sits in the sign-change cell
        xs = np.linspace(0.505, 0.635, 27)
        d = [return_map(-0.03, x).x_out - x for x in xs]
        i = next(i for i in range(len(xs) - 1) if d[i] > 0 >= d[i + 1])
        assert xs[i] <= orb.x_left <= xs[i + 1]

    def test_minus_0_01(self):
        orb = find_periodic_orbit(-0.01)
        assert 0.5 < orb.x_left < 0.7125

    def test_orbit_trajectory_closes(self):
        orb = find_periodic_orbit(-0.04)
        assert orb.samples.final_state.x == pytest.approx(orb.x_left, abs=1e-9)
        assert len(orb.samples.events_of(EventKind.CROSSING)) == 2

    def test_encloses_pseudoequilibrium(self):
        orb = find_periodic_orbit(-0.05)
        (pe,) = find_pseudoequilibria(-0.05)
        assert orb.x_left < pe.x < orb.x_right

    def test_outside_range(self):
        with pytest.raises(DomainError):
            find_periodic_orbit(-0.1)


class TestHomoclinic:
    def test_verified(self):
        rep = verify_homoclinic(1e-8, 1e-5)
        assert rep.verified and rep.return_distance < 1e-5
        assert rep.termination == "EquilibriumReached"

    def test_crossing_matches_closed_form_flow(self):
        oracle = lower_flow_crossing()
        assert oracle == pytest.approx(7 / 9, abs=1e-12)
        assert verify_homoclinic(1e-8).crossing_x == pytest.approx(oracle, abs=1e-6)

    def test_delta_halving(self):
        a = verify_homoclinic(1e-8).crossing_x
        b = verify_homoclinic(5e-9).crossing_x
        assert abs(a - b) < 1e-6

    def test_no_homoclinic_off_collision(self):
        rep = verify_homoclinic(1e-8, 1e-5, epsilon=-0.05)
        assert not rep.verified and rep.return_distance > 0.1

    def test_bad_delta(self):
        with pytest.raises(DomainError):
            verify_homoclinic(0.0)

    def test_family_zero_slide_matches_single(self):
        upper, lower = homoclinic_family([0.0])
        single = verify_homoclinic(1e-8)
        assert lower.escape == "lower" and lower.verified
        assert lower.crossing_x == pytest.approx(single.crossing_x, abs=1e-5)

    def test_upper_escapes_never_cross(self):
        reps = homoclinic_family([2.0, 6.0])
        for r in reps:
            assert r.verified
            if r.escape == "upper":
                assert r.crossing_x is None
                assert not r.trajectory.events_of(EventKind.CROSSING)

    def test_family_time_offsets(self):
        (up, _) = homoclinic_family([3.0])
        esc = up.trajectory.events_of(EventKind.ESCAPE)[0]
        assert esc.time == pytest.approx(3.0)
        assert np.all(np.diff(up.trajectory.t) > 0)

    def test_slide_past_segment(self):
        with pytest.raises(DomainError):
            homoclinic_family([20.0])

    def test_report_dict(self):
        d = verify_homoclinic().as_dict()
        assert set(d) >= {"launch", "crossing_x", "return_distance", "verified"}


class TestFusedFocus:
    def test_record(self):
        rec = fused_focus_check((-0.02, 0.02))
        assert rec.kind == "fused_focus" and rec.epsilon == 0.0
        assert rec.witness["orbit_amplitude"] > 0
        assert rec.witness["converged_to_pseudoequilibrium"]

    def test_range_must_straddle(self):
        with pytest.raises(DomainError):
            fused_focus_check((0.01, 0.02))


class TestDiagram:
    def test_rows(self):
        a, b, c = (attractor_at(e) for e in (-0.1, 0.1, -0.03))
        assert a.attractor == "real_equilibrium" and a.x_left == 0.5
        assert b.attractor == "pseudoequilibrium"
        assert c.attractor == "periodic_orbit" and c.amplitude > 0

    def test_regimes(self):
        rows = bifurcation_diagram((-0.1, 0.25), 36, workers=2)
        labels = [r.attractor for r in rows]
        changes = [
            (rows[i].epsilon, rows[i + 1].epsilon)
            for i in range(len(rows) - 1) if labels[i] != labels[i + 1]
        ]
        assert len(changes) == 3
        for (lo, hi), edge in zip(changes, (-1 / 15, 0.0, 0.2)):
            assert lo < edge <= hi + 1e-12

    def test_two_rows(self):
        assert len(bifurcation_diagram((-0.1, 0.25), 2)) == 2

    def test_validation(self):
        with pytest.raises(DomainError):
            bifurcation_diagram((0.1, -0.1), 5)
        with pytest.raises(DomainError):
            bifurcation_diagram((-0.1, 0.1), 1)
