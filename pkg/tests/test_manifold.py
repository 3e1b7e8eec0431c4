import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hourglass.errors import DegeneratePoleError, DomainError
from hourglass.manifold import (
    DEFAULT_OMEGA,
    GOLDEN_OMEGA,
    MERIDIAN_LENGTH,
    ChartPoint,
    ManifoldParams,
    TangentState,
    deck_transform,
    fiber_diameter,
    hourglass_profile,
    meridian_length,
    parallel_circumference,
    parse_omega,
    principal_angle,
    speed,
)

finite = st.floats(-5.0, 5.0, allow_nan=False)
height = st.floats(-0.99, 0.99, allow_nan=False)


def test_speed_oracles():
    assert speed(TangentState.at(0, 0, 0, 1, 0, 0)) == pytest.approx(1.0, abs=1e-15)
    assert speed(TangentState.at(0, 0, 0, 0, 0, 1)) == pytest.approx(1.0, abs=1e-15)
    assert speed(TangentState.at(0, 0.3, 0, 1, 0, 0)) == pytest.approx(1.09, abs=1e-14)


def test_speed_at_pole_needs_ambient():
    with pytest.raises(DegeneratePoleError):
        speed(TangentState.at(0, 1.0, 0, 1, 0, 0))
    s = TangentState.from_ambient(0.0, (1.0, 0.0, 0.0), 1.0, (0.0, 0.0, 0.0))
    assert speed(s) == pytest.approx(2.0)


def test_deck_transform_oracles():
    p = ChartPoint(0.3, 0.2, 0.7)
    assert deck_transform(p, 0) == p
    q = deck_transform(ChartPoint(0, 0, 0), 1, DEFAULT_OMEGA)
    assert (q.x, q.y, q.sigma) == pytest.approx((1.0, 0.0, -1.0), abs=1e-15)


@given(height, finite, finite, finite, finite, st.integers(-20, 20))
def test_speed_invariant_under_deck_transform(y, sigma, vx, vy, vs, m):
    s = TangentState.at(0.0, y, sigma, vx, vy, vs)
    moved = TangentState(deck_transform(s.point, m), vx, vy, vs)
    assert abs(speed(moved) - speed(s)) < 1e-12


@given(height, finite, finite, finite)
def test_speed_reflection_symmetry(y, vx, vy, vs):
    a = TangentState.at(0.0, y, 0.0, vx, vy, vs)
    b = TangentState.at(0.0, -y, 0.0, vx, -vy, vs)
    assert speed(a) == pytest.approx(speed(b), rel=1e-15, abs=1e-15)


def test_parallel_circumference_oracles():
    assert parallel_circumference(0.0) == pytest.approx(2 * math.pi)
    assert parallel_circumference(1.0) == 0.0
    assert parallel_circumference(math.sqrt(1 / 3)) == pytest.approx(2 * math.pi * 4 / 3 * math.sqrt(2 / 3), rel=1e-14)
    with pytest.raises(DomainError):
        parallel_circumference(1.5)


def test_parallel_circumference_expanded_form():
    ys = np.linspace(-1, 1, 2001)
    lhs = np.array([parallel_circumference(y) ** 2 for y in ys])
    rhs = (2 * math.pi) ** 2 * (1 + ys**2 - ys**4 - ys**6)
    assert np.max(np.abs(lhs - rhs)) < 1e-12 * (2 * math.pi) ** 2


def test_hourglass_profile_oracles():
    assert hourglass_profile(0.0) == pytest.approx((1.0, 0.5))
    f, fp = hourglass_profile(1 / 3)
    assert f == pytest.approx(4 / 3 * math.sqrt(2 / 3))
    assert fp == pytest.approx(0.0, abs=1e-15)
    assert hourglass_profile(1.0) == (0.0, 0.0)


def test_hourglass_profile_sign_pattern():
    u = np.linspace(0.0, 1.0, 10_000)
    _, fp = hourglass_profile(u)
    assert np.all(fp[u < 1 / 3 - 1e-12] > 0)
    inner = (u > 1 / 3 + 1e-12) & (u < 1.0)
    assert np.all(fp[inner] < 0)


def test_fiber_diameter_brackets():
    B = fiber_diameter()
    assert math.pi - 1e-9 <= B <= 1.5 * math.pi + 1e-9
    assert B == pytest.approx(MERIDIAN_LENGTH, abs=1e-6)
    assert 2 * meridian_length(1.0) == pytest.approx(MERIDIAN_LENGTH, abs=1e-14)


def test_meridian_length_quadrature():
    from scipy.integrate import quad

    y0 = 0.7
    ref, _ = quad(lambda y: (1 + y * y) / math.sqrt(1 - y * y), 0.0, y0)
    assert meridian_length(y0) == pytest.approx(ref, abs=1e-12)


@given(height, st.floats(-50, 50, allow_nan=False))
def test_chart_round_trip(y, sigma):
    p = ChartPoint(1.0, y, sigma)
    yy, z1, z2 = p.ambient()
    back = ChartPoint.from_ambient(1.0, yy, z1, z2)
    assert back.y == pytest.approx(y, abs=1e-12)
    assert abs(math.remainder(back.sigma - sigma, 2 * math.pi)) < 1e-10


def test_chart_point_validation():
    with pytest.raises(DomainError):
        ChartPoint(0, 1.5, 0)
    with pytest.raises(DomainError):
        ChartPoint(float("nan"), 0, 0)
    assert ChartPoint(0, 1.0, 3.0).degenerate


def test_principal_angle_convention():
    assert principal_angle(math.pi) == pytest.approx(math.pi)
    assert principal_angle(-math.pi) == pytest.approx(math.pi)
    assert principal_angle(6.0) == pytest.approx(6.0 - 2 * math.pi)


def test_manifold_params(tmp_path):
    assert ManifoldParams().omega == DEFAULT_OMEGA
    assert parse_omega("golden") == GOLDEN_OMEGA
    assert parse_omega("1/7") == pytest.approx(1 / 7)
    assert ManifoldParams(omega=0.5).rational_flag
    assert not ManifoldParams().rational_flag
    cfg = tmp_path / "m.ini"
    cfg.write_text("[manifold]\nomega = golden\npole_switch = 0.8\n")
    p = ManifoldParams.from_config(cfg)
    assert (p.omega, p.pole_switch) == (GOLDEN_OMEGA, 0.8)
    with pytest.raises(DomainError):
        ManifoldParams(pole_switch=1.2)


@settings(max_examples=50)
@given(height, finite)
def test_csv_round_trip(y, s):
    p = ChartPoint(0.25, y, s)
    assert ChartPoint.from_csv_row(p.csv_row()) == p
