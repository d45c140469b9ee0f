import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from fpt_fredholm import (
    Boundary,
    bl_cdf,
    bl_density,
    closed_form_for,
    ig_cdf,
    ig_density,
    std_normal_cdf,
)
from fpt_fredholm.errors import DomainError, ValidationError

mp.mp.dps = 40


def mp_phi(x):
    return mp.ncdf(x)


@given(st.floats(-37.0, 8.0))
def test_normal_cdf_matches_mpmath(x):
    ref = float(mp_phi(mp.mpf(x)))
    # the relative condition number of Phi in the lower tail grows like x^2
    assert abs(std_normal_cdf(x) - ref) <= 1e-15 * max(1.0, x * x) * ref + 1e-300


def test_ig_cdf_reflection_value():
    # P(tau <= 1) = 2 Phi(-1) for the level-1 boundary
    assert ig_cdf(1.0, 1.0) == pytest.approx(float(2 * mp_phi(-1)), rel=1e-14)
    assert ig_cdf(1.0, 1.0) == pytest.approx(0.3173, abs=5e-5)


@given(st.floats(0.1, 4.0), st.floats(-2.0, 2.0), st.floats(1e-3, 50.0))
def test_bl_density_matches_mpmath(b0, slope, s):
    b0m, mm, sm = mp.mpf(b0), mp.mpf(slope), mp.mpf(s)
    ref = float(b0m / mp.sqrt(2 * mp.pi * sm**3) * mp.exp(-(b0m + mm * sm) ** 2 / (2 * sm)))
    assert bl_density(b0, slope, s) == pytest.approx(ref, rel=1e-12, abs=1e-300)


@given(st.floats(0.1, 4.0), st.floats(-2.0, 2.0), st.floats(1e-3, 50.0))
def test_bl_cdf_matches_mpmath(b0, slope, t):
    b0m, mm, tm = mp.mpf(b0), mp.mpf(slope), mp.mpf(t)
    ref = mp_phi(-(b0m + mm * tm) / mp.sqrt(tm)) \
        + mp.exp(-2 * b0m * mm) * mp_phi((mm * tm - b0m) / mp.sqrt(tm))
    assert bl_cdf(b0, slope, t) == pytest.approx(float(ref), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("b0, slope", [(1.0, 0.0), (1.0, 0.5), (0.5, -1.0), (2.0, 1.5)])
def test_cdf_is_integral_of_density(b0, slope):
    for t in (0.1, 1.0, 7.5):
        val, _ = quad(lambda s: bl_density(b0, slope, s), 0.0, t, epsabs=1e-13, epsrel=1e-12)
        assert bl_cdf(b0, slope, t) == pytest.approx(val, abs=1e-11)


@pytest.mark.parametrize("b0, slope", [(1.0, 0.0), (1.0, 0.5), (1.0, 1.0), (0.7, -0.4)])
def test_total_mass(b0, slope):
    exact = closed_form_for(Boundary.linear(b0, slope))
    val, _ = quad(exact.density, 0.0, np.inf, epsabs=1e-13, limit=200)
    assert exact.total_mass() == pytest.approx(math.exp(-2 * b0 * max(slope, 0.0)))
    assert val == pytest.approx(exact.total_mass(), abs=1e-8)


def test_large_negative_slope_does_not_overflow():
    # exp(-2 b0 m) alone would overflow here
    val = bl_cdf(1.0, -400.0, 0.01)
    assert math.isfinite(val) and 0.0 <= val <= 1.0


def test_density_is_zero_at_origin_and_vectorised():
    s = np.array([0.0, 0.5, 2.0])
    out = ig_density(1.0, s)
    assert out[0] == 0.0 and out.shape == (3,)
    assert out[1] == ig_density(1.0, 0.5)


def test_negative_time_rejected():
    with pytest.raises(DomainError):
        ig_density(1.0, -1.0)
    with pytest.raises(DomainError):
        bl_cdf(1.0, 0.5, np.array([0.1, -0.1]))


def test_no_closed_form_for_sqrt_boundary():
    with pytest.raises(ValidationError):
        closed_form_for(Boundary.sqrt_shift(0.5, 1.0))


def test_closed_form_for_constant_is_ig():
    exact = closed_form_for(Boundary.constant(1.5))
    assert exact.density(0.8) == ig_density(1.5, 0.8)
    assert exact.cdf(0.8) == ig_cdf(1.5, 0.8)
