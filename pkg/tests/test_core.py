import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from welander_pws import (
    TOL_H,
    DomainError,
    EventKind,
    Params,
    RegionLabel,
    State,
    Trajectory,
    build_nonsmooth,
    eval_field,
    region_of,
)

finite = st.floats(-5, 5, allow_nan=False)
unit = st.floats(0, 1)


def hand_field(k, eps, x, y, alpha=0.8, beta=0.5):
    # written out term by term from the model equations
    xdot = 1 - x - k * x
    ydot = beta - beta * eps - k * eps - alpha - (beta + k) * y - (alpha * beta - alpha) * x
    return xdot, ydot


class TestState:
    def test_rejects_nan(self):
        with pytest.raises(DomainError):
            State(math.nan, 0.0)

    def test_rejects_inf(self):
        with pytest.raises(DomainError):
            State(0.0, math.inf)

    def test_roundtrip(self):
        s = State(0.25, -1.5)
        assert State.from_array(s.as_array()) == s


class TestParams:
    def test_defaults(self):
        p = Params(0.1)
        assert (p.alpha, p.beta) == (0.8, 0.5)

    @pytest.mark.parametrize("alpha,beta", [(0.0, 0.5), (0.8, -1.0)])
    def test_positive_coefficients(self, alpha, beta):
        with pytest.raises(DomainError):
            Params(0.0, alpha, beta)


class TestEvalField:
    def test_upper_field_vertical_at_half(self):
        sys = build_nonsmooth(Params(-1 / 15))
        v = eval_field(sys, State(0.5, 0.1), 1.0)
        assert v[0] == 0.0

    def test_lambda_zero_is_lower_field(self):
        sys = build_nonsmooth(Params(-0.03))
        s = np.array([0.7, -0.2])
        assert np.array_equal(eval_field(sys, s, 0.0), sys.field_lower(s))

    def test_lower_field_at_one_zero(self):
        sys = build_nonsmooth(Params(0.0))
        v = eval_field(sys, (1.0, 0.0), 0.0)
        assert v[0] == 0.0
        assert v[1] == pytest.approx(0.1, abs=1e-15)

    def test_non_finite_state(self):
        sys = build_nonsmooth(Params(0.0))
        with pytest.raises(DomainError):
            eval_field(sys, np.array([np.nan, 0.0]), 0.5)

    def test_lambda_outside_unit_interval(self):
        sys = build_nonsmooth(Params(0.0))
        with pytest.raises(DomainError):
            eval_field(sys, (0.5, 0.0), 1.5)

    @given(finite, finite, st.floats(-0.3, 0.3), st.sampled_from([0.0, 1.0]))
    def test_matches_hand_expansion(self, x, y, eps, k):
        sys = build_nonsmooth(Params(eps))
        v = eval_field(sys, (x, y), k)
        assert v == pytest.approx(hand_field(k, eps, x, y), abs=1e-12)

    @given(finite, finite, st.floats(-0.3, 0.3), unit)
    def test_affine_consistency(self, x, y, eps, lam):
        sys = build_nonsmooth(Params(eps))
        s = (x, y)
        mix = (1 - lam) * eval_field(sys, s, 0.0) + lam * eval_field(sys, s, 1.0)
        assert np.allclose(eval_field(sys, s, lam), mix, rtol=0, atol=1e-14)


class TestRegionOf:
    sys = build_nonsmooth(Params(0.0))

    def test_upper(self):
        assert region_of(self.sys, (0.6, 0.5)) is RegionLabel.UPPER

    def test_lower(self):
        assert region_of(self.sys, (0.6, -0.5)) is RegionLabel.LOWER

    def test_manifold_within_tol(self):
        assert region_of(self.sys, (0.6, 1e-12), tol_h=1e-10) is RegionLabel.MANIFOLD

    def test_bad_tolerance(self):
        with pytest.raises(ValueError):
            region_of(self.sys, (0.6, 0.0), tol_h=0.0)

    @given(finite, finite)
    def test_odd_in_h(self, x, y):
        a = region_of(self.sys, (x, y))
        b = region_of(self.sys, (x, -y))
        swap = {RegionLabel.UPPER: RegionLabel.LOWER, RegionLabel.LOWER: RegionLabel.UPPER,
                RegionLabel.MANIFOLD: RegionLabel.MANIFOLD}
        assert b is swap[a]

    def test_default_tolerance(self):
        assert region_of(self.sys, (0.0, 0.5 * TOL_H)) is RegionLabel.MANIFOLD
        assert region_of(self.sys, (0.0, 2 * TOL_H)) is RegionLabel.UPPER


class TestTrajectory:
    def test_coincident_time_overwrites(self):
        tr = Trajectory()
        tr.append(0.0, (0, 1), RegionLabel.UPPER)
        tr.append(1.0, (0, 0.5), RegionLabel.UPPER)
        tr.log(EventKind.CROSSING, 1.0, (0, 0.0), RegionLabel.MANIFOLD)
        assert len(tr) == 2
        assert tr.regions[-1] is RegionLabel.MANIFOLD
        assert tr.events[0].index == 1

    def test_extend_offsets_time_and_indices(self):
        a, b = Trajectory(), Trajectory()
        a.append(0.0, (0, 0), RegionLabel.MANIFOLD)
        a.append(1.0, (1, 1), RegionLabel.UPPER)
        b.append(0.0, (1, 1), RegionLabel.UPPER)
        b.log(EventKind.TIMEOUT, 2.0, (2, 2), RegionLabel.UPPER)
        a.extend(b, t_offset=1.0)
        assert a.times == [0.0, 1.0, 3.0]
        assert a.events[0].index == 2 and a.events[0].time == 3.0
        assert a.termination is EventKind.TIMEOUT
