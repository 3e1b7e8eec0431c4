"""Geodesic flow of the energy Lagrangian g(v, v) on the universal cover.

Two charts are used.  Away from the poles the state is (x, y, sigma) with
velocities; once |y| passes the pole-switch threshold the sphere factor is
written in ambient coordinates w = (y, z1, z2) on the unit sphere and the
constraint force is added explicitly.  With phi = (1 + y^2)^2 and a = phi'/phi:

longitude chart
    x''     = -a y' x'
    sigma'' = -(a - 2y/(1-y^2)) y' sigma'
    y''     = [a(1-y^2) x'^2 - (a + 2y/(1-y^2)) y'^2 + (1-y^2)(a(1-y^2) - 2y) sigma'^2] / 2

ambient chart
    x'' = -a y' x'
    w'' = -a y' w' + (a/2) K e_y - (|w'|^2 + (a/2) K y) w,   K = x'^2 + |w'|^2
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import (
    ChartSwitchError,
    DomainError,
    InconsistentInvariantsError,
    StepSizeUnderflowError,
)
from .manifold import POLE_SWITCH, TangentState, fmt, speed

EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Invariants:
    """Speed E, x-momentum P and angular momentum L of a geodesic."""

    E: float
    P: float
    L: float

    def __post_init__(self):
        if not (math.isfinite(self.E) and math.isfinite(self.P) and math.isfinite(self.L)):
            raise DomainError("invariants must be finite")
        if self.E < 0.0:
            raise DomainError("E must be non-negative")

    def as_tuple(self):
        return (self.E, self.P, self.L)


def lagrangian_L2(state: TangentState) -> float:
    return speed(state) ** 2


def conserved_quantities(state: TangentState) -> Invariants:
    E = speed(state)
    if E == 0.0:
        raise DomainError("P and L are undefined at zero speed")
    y = state.point.y
    phi = (1.0 + y * y) ** 2
    if state.ambient is not None:
        _, z1, z2, _, vz1, vz2 = state.ambient
        ang = z1 * vz2 - z2 * vz1
    else:
        ang = (1.0 - y * y) * state.vsigma
    return Invariants(E, phi * state.vx / E, phi * ang / E)


def ydot_from_invariants(y: float, inv: Invariants, tol: float | None = None) -> float:
    """|y'| at height y for a geodesic with the given invariants.

    From E^2 = phi (x'^2 + y'^2/(1-y^2) + (1-y^2) sigma'^2) with x' = PE/phi and
    sigma' = LE/(phi(1-y^2)).
    """
    if abs(y) >= 1.0:
        raise DomainError("ydot_from_invariants needs |y| < 1")
    if inv.E <= 0.0:
        raise DomainError("ydot_from_invariants needs E > 0")
    E2 = inv.E * inv.E
    phi = (1.0 + y * y) ** 2
    one_m = 1.0 - y * y
    vy2 = one_m * E2 / phi - one_m * inv.P**2 * E2 / phi**2 - inv.L**2 * E2 / phi**2
    if tol is None:
        tol = 1e-12 * E2
    if vy2 < -tol:
        raise InconsistentInvariantsError(f"invariants not attainable at y={y!r} (y'^2={vy2:.3g})")
    return math.sqrt(max(vy2, 0.0))


# ---------------------------------------------------------------------------------
# vector fields


def _rhs_sigma(u):
    x, y, s, vx, vy, vs = u
    one_m = 1.0 - y * y
    a = 4.0 * y / (1.0 + y * y)
    b = 2.0 * y / one_m
    ay = 0.5 * (a * one_m * vx * vx - (a + b) * vy * vy + one_m * (a * one_m - 2.0 * y) * vs * vs)
    return np.array([vx, vy, vs, -a * vy * vx, ay, -(a - b) * vy * vs])


def _rhs_ambient(u):
    # u = x, w0, w1, w2, vx, u0, u1, u2
    w = u[1:4]
    wd = u[5:8]
    vx = u[4]
    y = w[0]
    a = 4.0 * y / (1.0 + y * y)
    ww = float(wd @ wd)
    K = vx * vx + ww
    acc = -a * wd[0] * wd - (ww + 0.5 * a * K * y) * w
    acc[0] += 0.5 * a * K
    out = np.empty(8)
    out[0] = vx
    out[1:4] = wd
    out[4] = -a * wd[0] * vx
    out[5:8] = acc
    return out


def _project_ambient(u):
    u = u.copy()
    w = u[1:4] / np.linalg.norm(u[1:4])
    u[1:4] = w
    u[5:8] -= (u[5:8] @ w) * w
    return u


def _sigma_to_ambient(u):
    x, y, s, vx, vy, vs = u
    r = math.sqrt(max(0.0, 1.0 - y * y))
    c, sn = math.cos(s), math.sin(s)
    dr = -y * vy / r
    return np.array([x, y, r * c, r * sn, vx, vy, dr * c - r * sn * vs, dr * sn + r * c * vs])


def _ambient_to_sigma(u, sigma_ref):
    x, y, z1, z2, vx, vy, vz1, vz2 = u
    s = math.atan2(z2, z1)
    s += 2.0 * math.pi * round((sigma_ref - s) / (2.0 * math.pi))
    r2 = z1 * z1 + z2 * z2
    vs = (z1 * vz2 - z2 * vz1) / r2
    return np.array([x, y, s, vx, vy, vs])


# Dormand-Prince 5(4)
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = np.zeros((7, 7))
_A[1, :1] = [1 / 5]
_A[2, :2] = [3 / 40, 9 / 40]
_A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
_A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
_A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
_A[6, :6] = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_BE = _B5 - _B4


def _dp_step(f, u, h, k0):
    k = np.empty((7, u.size))
    k[0] = k0
    for i in range(1, 7):
        k[i] = f(u + h * (_A[i, :i] @ k[:i]))
    # the last stage is evaluated at the 5th-order solution (FSAL)
    u_new = u + h * (_B5 @ k)
    err = h * (_BE @ k)
    return u_new, err, k[6]


def _err_norm(err, u0, u1, rtol, atol):
    sc = atol + rtol * np.maximum(np.abs(u0), np.abs(u1))
    return float(np.max(np.abs(err / sc)))


# ---------------------------------------------------------------------------------
# trajectory


class Trajectory:
    """Sampled geodesic: times plus chart and ambient state arrays.

    ``chart`` rows are (x, y, sigma, vx, vy, vsigma); ``ambient`` rows are
    (y, z1, z2, vy, vz1, vz2); ``pole_chart`` marks samples taken in the ambient chart.
    """

    def __init__(self, t, chart, ambient, pole_chart, tolerance_used: float):
        self.t = np.asarray(t, dtype=float)
        self.chart = np.asarray(chart, dtype=float)
        self.ambient = np.asarray(ambient, dtype=float)
        self.pole_chart = np.asarray(pole_chart, dtype=bool)
        self.tolerance_used = float(tolerance_used)
        if np.any(np.diff(self.t) <= 0.0):
            raise DomainError("sample times must be strictly increasing")
        if np.any(np.abs(self.chart[:, 1]) > 1.0 + 1e-12):
            raise DomainError("trajectory left |y| <= 1")

    def __len__(self):
        return len(self.t)

    def state(self, i: int) -> TangentState:
        x, y, s, vx, vy, vs = self.chart[i]
        if self.pole_chart[i]:
            w = self.ambient[i, :3]
            wd = self.ambient[i, 3:]
            return TangentState.from_ambient(x, w, vx, wd, sigma_ref=s)
        return TangentState.at(x, y, s, vx, vy, vs)

    @cached_property
    def samples(self) -> list[tuple[float, TangentState]]:
        return [(float(t), self.state(i)) for i, t in enumerate(self.t)]

    @property
    def final(self) -> TangentState:
        return self.state(len(self.t) - 1)

    @cached_property
    def invariant_series(self) -> np.ndarray:
        """(N, 3) array of E, P, L at every sample."""
        y = self.ambient[:, 0]
        z1, z2 = self.ambient[:, 1], self.ambient[:, 2]
        wd = self.ambient[:, 3:]
        vx = self.chart[:, 3]
        phi = (1.0 + y * y) ** 2
        E = (1.0 + y * y) * np.sqrt(vx * vx + np.sum(wd * wd, axis=1))
        with np.errstate(divide="ignore", invalid="ignore"):
            P = np.where(E > 0, phi * vx / E, 0.0)
            L = np.where(E > 0, phi * (z1 * wd[:, 2] - z2 * wd[:, 1]) / E, 0.0)
        return np.column_stack([E, P, L])

    @cached_property
    def invariant_drift(self) -> Invariants:
        """Largest drift from the initial value: relative for E, relative with a floor of 1 for P and L."""
        inv = self.invariant_series
        d = np.abs(inv - inv[0])
        scale = np.array([max(inv[0, 0], 1e-300), max(1.0, abs(inv[0, 1])), max(1.0, abs(inv[0, 2]))])
        m = (d / scale).max(axis=0)
        return Invariants(float(m[0]), float(m[1]), float(m[2]))

    def lagrangian_series(self) -> np.ndarray:
        return self.invariant_series[:, 0] ** 2

    def to_csv(self) -> str:
        inv = self.invariant_series
        lines = ["t,x,y,sigma,vx,vy,vsigma,E,P,L"]
        for i in range(len(self.t)):
            vals = [self.t[i], *self.chart[i], *inv[i]]
            lines.append(",".join(fmt(v) for v in vals))
        return "\n".join(lines) + "\n"


def _row_from_sigma(u):
    amb = _sigma_to_ambient(u)
    return u.copy(), np.concatenate([amb[1:4], amb[5:8]])


def _row_from_ambient(u, sigma_ref):
    w = u[1:4]
    wd = u[5:8]
    r2 = w[1] ** 2 + w[2] ** 2
    if r2 > 1e-28:
        s = math.atan2(w[2], w[1])
        s += 2.0 * math.pi * round((sigma_ref - s) / (2.0 * math.pi))
        vs = (w[1] * wd[2] - w[2] * wd[1]) / r2
    else:
        s, vs = sigma_ref, 0.0
    chart = np.array([u[0], w[0], s, u[4], wd[0], vs])
    return chart, np.concatenate([w, wd])


def integrate_geodesic(initial: TangentState, t_end: float, tol: float = 1e-10,
                       pole_switch: float = POLE_SWITCH, max_steps: int = 2_000_000) -> Trajectory:
    """Adaptive Dormand-Prince integration from ``initial`` over [0, t_end].

    Negative t_end integrates backwards.  Every accepted step is kept as a sample.
    """
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    if not math.isfinite(t_end):
        raise DomainError("t_end must be finite")
    p = initial.point
    pole = abs(p.y) > pole_switch
    if pole:
        u = np.array([p.x, *initial.to_ambient()[:3], initial.vx, *initial.to_ambient()[3:]])
        u = _project_ambient(u)
        sig = p.sigma
        chart, amb = _row_from_ambient(u, sig)
    else:
        u = initial.as_array()
        chart, amb = _row_from_sigma(u)
    ts, charts, ambs, flags = [0.0], [chart], [amb], [pole]
    if t_end == 0.0:
        return Trajectory(ts, charts, ambs, flags, tol)
    if t_end < 0.0:
        fwd = integrate_geodesic(_reversed(initial), -t_end, tol, pole_switch, max_steps)
        flip = np.array([1, 1, 1, -1, -1, -1], dtype=float)
        return Trajectory(-fwd.t[::-1], fwd.chart[::-1] * flip, fwd.ambient[::-1] * flip,
                          fwd.pole_chart[::-1], tol)

    T = t_end
    t = 0.0
    rtol = atol = tol

    def field(pole_mode):
        return _rhs_ambient if pole_mode else _rhs_sigma

    f = field(pole)
    k0 = f(u)
    scale = max(1.0, float(np.linalg.norm(u)))
    h = min(T, 0.01 * scale / max(float(np.linalg.norm(k0)), 1e-12)) if np.any(k0) else T
    h = max(h, 1e-6 * T)
    err_prev = 1.0
    steps = 0
    while t < T:
        steps += 1
        if steps > max_steps:
            raise StepSizeUnderflowError("maximum number of steps exceeded")
        if h <= 16.0 * EPS * max(1.0, t):
            raise StepSizeUnderflowError(f"step size underflow at t={t!r}")
        last = h >= T - t
        if last:
            h = T - t
        u1, e, k_last = _dp_step(f, u, h, k0)
        if pole:
            u1 = _project_ambient(u1)
        en = _err_norm(e, u, u1, rtol, atol)
        if not np.isfinite(en) or en > 1.0:
            fac = 0.2 if not np.isfinite(en) else max(0.2, 0.9 * en ** -0.2)
            h *= fac
            continue
        # chart switch detection
        yy = u1[1]
        crossed = (not pole and abs(yy) > pole_switch) or (pole and abs(yy) < pole_switch)
        if crossed:
            h_sw, u1 = _locate_switch(f, u, h, k0, pole, pole_switch)
            t_new = t + h_sw
            if pole:
                u = _ambient_to_sigma(u1, charts[-1][2])
                chart, amb = _row_from_sigma(u)
            else:
                u = _project_ambient(_sigma_to_ambient(u1))
                chart, amb = _row_from_ambient(u, charts[-1][2])
            pole = not pole
            ts.append(t_new)
            charts.append(chart)
            ambs.append(amb)
            flags.append(pole)
            t = t_new
            f = field(pole)
            k0 = f(u)
            err_prev = 1.0
            continue
        t = T if last else t + h
        u = u1
        k0 = f(u) if pole else k_last
        if pole:
            chart, amb = _row_from_ambient(u, charts[-1][2])
        else:
            chart, amb = _row_from_sigma(u)
        ts.append(t)
        charts.append(chart)
        ambs.append(amb)
        flags.append(pole)
        en = max(en, 1e-10)
        fac = 0.9 * en ** (-0.7 / 5.0) * err_prev ** (0.4 / 5.0)
        h *= min(5.0, max(0.2, fac))
        err_prev = en
    return Trajectory(ts, charts, ambs, flags, tol)


def _reversed(state: TangentState) -> TangentState:
    amb = state.ambient
    if amb is not None:
        amb = (*amb[:3], -amb[3], -amb[4], -amb[5])
    return TangentState(state.point, -state.vx, -state.vy, -state.vsigma, amb)


def _locate_switch(f, u, h, k0, pole, threshold, land_tol=1e-10, max_iter=60):
    """Step size from u at which |y| crosses the threshold, plus the state there.

    A cubic Hermite interpolant of y over the step gives the first guess; it is
    refined by secant/bisection on re-taken Runge-Kutta steps.  The returned state
    lies on the far side of the threshold (the chart being entered) within
    ``land_tol``.
    """

    def g(hh):
        v = _dp_step(f, u, hh, k0)[0]
        if pole:
            v = _project_ambient(v)
        return abs(v[1]) - threshold, v

    sign = -1.0 if pole else 1.0  # g * sign > 0 means beyond the threshold
    lo, glo = 0.0, abs(u[1]) - threshold
    hi = h
    ghi, vhi = g(h)

    y0, y1 = u[1], vhi[1]
    d0, d1 = k0[1] * h, f(vhi)[1] * h

    def herm(s):
        return ((2 * s**3 - 3 * s**2 + 1) * y0 + (s**3 - 2 * s**2 + s) * d0
                + (-2 * s**3 + 3 * s**2) * y1 + (s**3 - s**2) * d1)

    a, b = 0.0, 1.0
    for _ in range(50):
        mid = 0.5 * (a + b)
        if (abs(herm(mid)) - threshold) * sign > 0.0:
            b = mid
        else:
            a = mid
    if 0.0 < b < 1.0:
        gg, vg = g(b * h)
        if gg * sign > 0.0:
            hi, ghi, vhi = b * h, gg, vg
        else:
            lo, glo = b * h, gg

    for _ in range(max_iter):
        if abs(ghi) <= land_tol:
            return hi, vhi
        trial = hi - ghi * (hi - lo) / (ghi - glo) if ghi != glo else 0.5 * (lo + hi)
        if not (lo < trial < hi):
            trial = 0.5 * (lo + hi)
        gt, vt = g(trial)
        if gt * sign > 0.0:
            hi, ghi, vhi = trial, gt, vt
        else:
            lo, glo = trial, gt
        if hi - lo <= 4.0 * EPS * max(1.0, hi):
            return hi, vhi
    if abs(ghi) <= 1e3 * land_tol:
        return hi, vhi
    raise ChartSwitchError("could not locate the pole-chart threshold crossing")


def reparametrization_check(traj: Trajectory) -> float:
    if len(traj) < 2:
        return 0.0
    L2 = traj.lagrangian_series()
    return float(np.max(np.abs(L2 - L2[0])))
