import math

import numpy as np
import pytest

from hourglass.classa_audit import (
    audit_tonelli,
    best_return_times,
    crossing_flatten_check,
    crossing_flatten_gain,
    default_n_list,
    equator_chord_length,
    limit_geodesic,
    nonzero_L_exclusion,
    oscillation_measure,
    rearrange_flatten,
    subadditivity_violations,
    trial_path,
    trial_path_bound,
)
from hourglass.errors import DomainError, PreconditionError
from hourglass.geodesic_flow import Invariants
from hourglass.manifold import DEFAULT_OMEGA, GOLDEN_OMEGA, fiber_diameter, principal_angle
from hourglass.variational import ClosedInClass, DiscreteCurve, FixedEndpoints, psi_from_y

SQRT_THIRD = math.sqrt(1 / 3)


def band_curve(y, x=None, sigma=None):
    y = np.asarray(y, float)
    x = np.linspace(0, 1, len(y)) if x is None else x
    sigma = np.zeros(len(y)) if sigma is None else sigma
    return DiscreteCurve(np.column_stack([x, np.arcsin(y), sigma]), FixedEndpoints(), refine=False)


def test_equator_chord_oracles():
    assert equator_chord_length(0) == (0.0, 0.0)
    L, th = equator_chord_length(1, DEFAULT_OMEGA)
    assert L == pytest.approx(math.sqrt(2))
    assert abs(th) == pytest.approx(1.0)
    L, th = equator_chord_length(6, DEFAULT_OMEGA)
    assert abs(th) == pytest.approx(abs(6 - 2 * math.pi), abs=1e-12)
    assert L == pytest.approx(6.00668, abs=1e-5)


@pytest.mark.parametrize("m", range(1, 30))
def test_equator_chord_excess(m):
    L, th = equator_chord_length(m, DEFAULT_OMEGA)
    assert L > m
    assert L - m <= th * th / (2 * m) + 1e-12


def test_return_times():
    assert [n for n, _ in best_return_times(1, GOLDEN_OMEGA, 5)] == [1, 2, 3, 5, 8]
    ns = [n for n, _ in best_return_times(1, DEFAULT_OMEGA, 5)]
    assert ns[:2] == [6, 19]
    angles = [a for _, a in best_return_times(1, DEFAULT_OMEGA, 5)]
    assert all(b < a for a, b in zip(angles, angles[1:]))
    for n, a in best_return_times(2, DEFAULT_OMEGA, 5):
        assert a == pytest.approx(abs(principal_angle(2 * math.pi * 2 * n * DEFAULT_OMEGA)), abs=1e-9)
    with pytest.raises(DomainError):
        best_return_times(1, 0.25, 3)


def test_default_n_list():
    ns = default_n_list(1, DEFAULT_OMEGA)
    assert set(range(1, 11)) <= set(ns)
    assert 19 in ns and 44 in ns


def test_trial_path_bounds():
    for m, n in [(1, 1), (1, 5), (2, 3)]:
        L = trial_path(m, n, 0.0).length
        assert n * m <= L <= math.hypot(n * m, math.pi) + 1e-12
    B = fiber_diameter()
    assert trial_path_bound(1, 1, 1.0) <= 1 + 2 * B
    c = trial_path(1, 3, 0.4, 0.2)
    assert c.boundary == ClosedInClass(3, c.boundary.winding)


@pytest.fixture(scope="module")
def audit_default():
    return audit_tonelli(1, list(range(1, 11)) + [19, 25, 44], tol=1e-8)


def test_audit_report_invariants(audit_default):
    rep = audit_default
    for r in rep.rows:
        assert r.cover_length == pytest.approx(r.n * rep.tonelli_length, rel=1e-10)
        assert r.minimized_length <= r.cover_length + 1e-9
        assert r.minimized_length <= r.trial_bound + 1e-9
        assert r.minimized_length >= r.n * rep.class_m - 1e-9
        assert -math.pi < r.theta <= math.pi
    assert rep.verdict is not None
    assert rep.row(rep.verdict).shortening > 10 * rep.tol
    assert subadditivity_violations(rep) == []


def test_audit_serialization(audit_default):
    import json

    d = json.loads(audit_default.to_json())
    assert d["verdict"] == audit_default.verdict
    lines = audit_default.rows_csv().splitlines()
    assert lines[0] == "n,cover_length,minimized_length,trial_bound,theta"
    assert len(lines) == len(audit_default.rows) + 1


def test_oscillation_on_audit_curves(audit_default):
    for c in audit_default.curves.values():
        for delta in (0.1, 0.2, 0.3):
            rec = oscillation_measure(c, delta)
            assert rec.within_bound


def test_audit_rejects_bad_input():
    with pytest.raises(DomainError):
        audit_tonelli(0, [1])
    with pytest.raises(DomainError):
        audit_tonelli(1, [0])


def test_oscillation_oracles():
    eq = band_curve(np.zeros(9))
    assert oscillation_measure(eq, 0.3).measure == 0.0
    pole = DiscreteCurve(np.array([[0, math.pi / 2, 0], [1, math.pi / 2, -1.0]]), ClosedInClass(1))
    assert oscillation_measure(pole, 0.5).measure == pytest.approx(1.0)
    with pytest.raises(DomainError):
        oscillation_measure(eq, 0.0)


def test_rearrange_flatten_oracles():
    c = band_curve(0.3 * np.ones(5))
    flat = rearrange_flatten(c, 0.1)
    assert c.length == pytest.approx(1.09, abs=1e-12)
    assert flat.length == pytest.approx(1.01, abs=1e-12)
    same = band_curve(0.1 * np.ones(5))
    assert rearrange_flatten(same, 0.1).length == pytest.approx(same.length, abs=1e-15)
    with pytest.raises(DomainError):
        rearrange_flatten(band_curve([0.1, 0.9, 0.1]), 0.1)


def test_rearrange_flatten_shortens_random_bands(rng):
    delta = 0.1
    for _ in range(50):
        n = 17
        t = np.linspace(0, 1, n)
        amp = rng.uniform(0.01, SQRT_THIRD - delta)
        y = delta + amp * np.sin(math.pi * t) ** rng.uniform(1, 3)
        c = band_curve(y, sigma=rng.uniform(-0.5, 0.5) * t)
        assert rearrange_flatten(c, delta).length < c.length


def test_crossing_flatten():
    alpha = 0.05
    flat = band_curve(alpha * np.ones(7))
    assert not crossing_flatten_check(flat, alpha)
    bump = band_curve(alpha + 0.02 * np.sin(np.linspace(0, math.pi, 9)))
    assert crossing_flatten_check(bump, alpha)
    assert crossing_flatten_gain(bump, alpha) > 0
    with pytest.raises(PreconditionError):
        crossing_flatten_gain(band_curve([0.2, 0.3, 0.2]), alpha)


def test_nonzero_L_exclusion():
    rep = nonzero_L_exclusion(Invariants(1.0, 0.0, 1.0), 0.1)
    assert rep.winding_rate == pytest.approx(1.0, abs=1e-9)
    assert rep.horizon is not None
    assert rep.competitor_length < rep.orbit_length
    assert rep.sigma_star_ok
    with pytest.raises(PreconditionError):
        nonzero_L_exclusion(Invariants(1.0, 1.0, 0.0), 0.1)


def test_limit_geodesic_converges():
    c = limit_geodesic(n_max=8, tol=1e-6)
    d = c.meta["window_distances"]
    assert len(d) == 7
    assert d[-1] < 1e-6
    assert c.meta["window_max_abs_y"] < 1e-3
    assert c.meta["window_max_vx_error"] < 1e-3


def test_limit_geodesic_family():
    a = limit_geodesic(n_max=4, tol=1e-6, sigma0=0.0)
    b = limit_geodesic(n_max=4, tol=1e-6, sigma0=1.3)
    for c in (a, b):
        assert c.meta["window_max_abs_y"] < 1e-3
    shift = b.meta["window_sigma_mean"] - a.meta["window_sigma_mean"]
    assert shift == pytest.approx(1.3, abs=1e-3)
    with pytest.raises(DomainError):
        limit_geodesic(n_max=1)
