"""Numerical audit of minimising orbits: cover shortening, trial paths, return
times, oscillation budgets, flattening moves and the limit of long minimisers.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DomainError, PreconditionError
from .geodesic_flow import Invariants, integrate_geodesic, ydot_from_invariants
from .manifold import (
    DEFAULT_OMEGA,
    TWO_PI,
    TangentState,
    fiber_diameter,
    fmt,
    meridian_length,
    principal_angle,
)
from .variational import (
    HALF_PI,
    ClosedInClass,
    DiscreteCurve,
    FreeSlices,
    _legs,
    curve_length,
    equator_winding,
    n_cover,
    psi_from_y,
    relax_curve,
    tonelli_minimize,
)

SQRT_THIRD = math.sqrt(1.0 / 3.0)
MAX_AUDIT_NODES = 20_001


def equator_chord_length(m: int, omega: float = DEFAULT_OMEGA) -> tuple[float, float]:
    """Flat-cylinder distance from an equator point to its m-th deck translate."""
    if m == 0:
        return 0.0, 0.0
    theta = principal_angle(TWO_PI * m * omega)
    return math.hypot(m, theta), theta


def _convergent_denominators(value: float, cap: int):
    """Continued-fraction convergent denominators of ``value`` (exact double) below ``cap``.

    The second element is True when the expansion terminated below the cap.
    """
    frac = Fraction(value)
    q_prev, q = 1, 0
    out = []
    rest = frac
    while True:
        a = math.floor(rest)
        q_prev, q = q, a * q + q_prev
        if q > cap:
            return out, False
        out.append(q)
        rest = rest - a
        if rest == 0:
            return out, True
        rest = 1 / rest


def best_return_times(m: int, omega: float = DEFAULT_OMEGA, count: int = 5,
                      cap: int = 10**6) -> list[tuple[int, float]]:
    """Convergent denominators n of m*omega with |theta_{nm}|, in order of decreasing |theta|."""
    if count < 1:
        raise DomainError("count must be >= 1")
    if m == 0:
        raise DomainError("return times need m != 0")
    dens, terminated = _convergent_denominators(abs(m * omega) % 1.0, cap)
    if terminated:
        raise DomainError(f"m*omega = {m * omega!r} looks rational (denominator {dens[-1]})")
    out: list[tuple[int, float]] = []
    # skip the zeroth convergent (integer part), whose denominator is always 1
    for n in dens[1:]:
        if n < 1 or any(n == k for k, _ in out):
            continue
        th = abs(principal_angle(TWO_PI * n * m * omega))
        if out and th >= out[-1][1]:
            continue
        out.append((n, th))
        if len(out) == count:
            break
    return out


def trial_path(m: int, n: int, y0: float, sigma0: float = 0.0, omega: float = DEFAULT_OMEGA,
               spacing: float = 1.0 / 16.0, max_nodes: int | None = None) -> DiscreteCurve:
    """Meridian down to the equator, principal equator chord, meridian back up.

    The result is a closed curve of class n*m starting at (0, y0, sigma0).
    """
    if abs(y0) > 1.0:
        raise DomainError("|y0| must be <= 1")
    k = n * m
    psi0 = psi_from_y(y0)
    bnd = ClosedInClass(k, equator_winding(k, omega))
    twist = bnd.shift(omega)[2]  # minus the principal angle of 2 pi k omega
    chord = math.hypot(k, twist)
    chord_spacing = spacing
    if max_nodes is not None and chord / spacing > max_nodes:
        chord_spacing = chord / max_nodes
    up = _legs([(0.0, psi0, sigma0), (0.0, 0.0, sigma0)], spacing) if psi0 != 0.0 else np.array([[0.0, 0.0, sigma0]])
    run = _legs([(0.0, 0.0, sigma0), (k, 0.0, sigma0 + twist)], chord_spacing)
    down = _legs([(k, 0.0, sigma0 + twist), (k, psi0, sigma0 + twist)], spacing)
    q = np.concatenate([up, run[1:], down[1:]]) if psi0 != 0.0 else run
    return DiscreteCurve(q, bnd, omega, meta={"seed": f"trial(y0={y0:g})"}, refine=chord_spacing == spacing)


def trial_path_bound(m: int, n: int, y0: float, omega: float = DEFAULT_OMEGA) -> float:
    """Length of the trial path, checked against n*m + 2B."""
    L = trial_path(m, n, y0, omega=omega).length
    B = fiber_diameter()
    if L > abs(n * m) + 2.0 * B + 1e-9:
        raise AssertionError(f"trial path {L} exceeds n*m + 2B = {abs(n * m) + 2 * B}")
    return L


def cover_seed(c: DiscreteCurve, n: int, max_nodes: int = MAX_AUDIT_NODES) -> DiscreteCurve:
    """n-fold cover of a closed curve, resampled uniformly in chart arclength when too long.

    The resampled cover lies on the same polyline; segments may then exceed the
    chart-step bound, which is harmless for chart-straight curves (exact quadrature
    on the equator and on the pole line).
    """
    total = n * (c.n_nodes - 1) + 1
    if total <= max_nodes:
        return n_cover(c, n)
    d = np.linalg.norm(np.diff(c.q, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(d)])
    S = s[-1]
    shift = c.boundary.shift(c.omega)
    t = np.linspace(0.0, n * S, max_nodes)
    j = np.minimum(np.floor(t / S), n - 1)
    r = t - j * S
    q = np.column_stack([np.interp(r, s, c.q[:, i]) for i in range(3)]) + j[:, None] * shift
    bnd = ClosedInClass(n * c.boundary.m, n * c.boundary.winding)
    return DiscreteCurve(q, bnd, c.omega, meta={"cover_of": c.boundary.m, "n": n, "resampled": True},
                         refine=False)


@dataclass
class AuditRow:
    n: int
    cover_length: float
    minimized_length: float
    trial_bound: float
    shortening: float
    theta: float
    converged: bool
    best_seed: str


@dataclass
class AuditReport:
    class_m: int
    omega: float
    tol: float
    tonelli_length: float
    rows: list[AuditRow]
    theta: list[tuple[int, float]]
    verdict: int | None
    curves: dict = field(default_factory=dict, repr=False)

    def row(self, n: int) -> AuditRow:
        return next(r for r in self.rows if r.n == n)

    def to_dict(self) -> dict:
        return {
            "class_m": self.class_m,
            "omega": self.omega,
            "tol": self.tol,
            "tonelli_length": self.tonelli_length,
            "rows": [asdict(r) for r in self.rows],
            "theta": [list(t) for t in self.theta],
            "verdict": self.verdict,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def rows_csv(self) -> str:
        lines = ["n,cover_length,minimized_length,trial_bound,theta"]
        for r in self.rows:
            lines.append(",".join([str(r.n), fmt(r.cover_length), fmt(r.minimized_length), fmt(r.trial_bound),
                                   fmt(r.theta)]))
        return "\n".join(lines) + "\n"


def default_n_list(m: int, omega: float = DEFAULT_OMEGA) -> list[int]:
    return sorted(set(range(1, 11)) | {n for n, _ in best_return_times(m, omega, 5)})


def _audit_row(args):
    tonelli, n, tol, max_nodes, max_iter = args
    m = tonelli.boundary.m
    omega = tonelli.omega
    y0, sigma0 = float(tonelli.y[0]), float(tonelli.sigma[0])
    cover = cover_seed(tonelli, n, max_nodes)
    cover_len = curve_length(n_cover(tonelli, n)) if cover.meta.get("resampled") is None else n * tonelli.length
    trial = trial_path(m, n, y0, sigma0, omega, max_nodes=max_nodes)
    seeds = {"cover": cover, "trial": trial}
    if abs(y0) > 1e-12:
        seeds["trial-equator"] = trial_path(m, n, 0.0, sigma0, omega, max_nodes=max_nodes)
    candidates = []
    for name, seed in seeds.items():
        candidates.append((seed.length, name + "(seed)", True, seed))
        r = relax_curve(seed, tol=tol, max_iter=max_iter, label=name)
        candidates.append((r.length, name, bool(r.meta["converged"]), r))
    L, name, conv, curve = min(candidates, key=lambda c: c[0])
    theta = principal_angle(TWO_PI * n * m * omega)
    row = AuditRow(n, cover_len, L, trial.length, n * tonelli.length - L, theta, conv, name)
    return row, curve


def audit_tonelli(m: int, n_list=None, tol: float = 1e-8, omega: float = DEFAULT_OMEGA, workers: int = 1,
                  max_nodes: int = MAX_AUDIT_NODES, max_iter: int = 100_000,
                  tonelli: DiscreteCurve | None = None) -> AuditReport:
    """Compare n-fold covers of the class-m minimiser with minimisers of class n*m."""
    if m == 0:
        raise DomainError("audit needs m != 0")
    if n_list is None:
        n_list = default_n_list(m, omega)
    n_list = sorted(set(int(n) for n in n_list))
    if not n_list or n_list[0] < 1:
        raise DomainError("n_list entries must be >= 1")
    if tonelli is None:
        tonelli = tonelli_minimize(m, tol=tol, omega=omega)
    jobs = [(tonelli, n, tol, max_nodes, max_iter) for n in n_list]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_audit_row, jobs))
    else:
        results = [_audit_row(j) for j in jobs]
    rows = [r for r, _ in results]
    curves = {r.n: c for r, c in results}
    verdict = next((r.n for r in rows if r.shortening > 10.0 * tol), None)
    thetas = [(r.n, r.theta) for r in rows]
    return AuditReport(m, omega, tol, tonelli.length, rows, thetas, verdict, curves)


def subadditivity_violations(report: AuditReport, slack: float = 1e-6) -> list[tuple[int, int]]:
    """Pairs (d, n) with d | n where minimized(n)/n exceeds minimized(d)/d by more than slack."""
    per = {r.n: r.minimized_length / r.n for r in report.rows}
    bad = []
    for d in per:
        for n in per:
            if n > d and n % d == 0 and per[n] > per[d] + slack:
                bad.append((d, n))
    return bad


# ---------------------------------------------------------------------------------
# band moves and oscillation


def rearrange_flatten(c: DiscreteCurve, delta: float) -> DiscreteCurve:
    """Move every node to height delta, keeping x and sigma."""
    y = c.y
    if np.any(y < delta - 1e-12) or np.any(y > SQRT_THIRD + 1e-12):
        raise DomainError("rearrange_flatten needs delta <= y <= 1/sqrt(3) at every node")
    if np.any(np.cos(c.psi) < 0.0):
        raise DomainError("curve crosses a pole")
    q = np.array(c.q)
    q[:, 1] = psi_from_y(delta)
    return c.with_nodes(q, meta={"flattened_to": delta}, refine=False)


@dataclass(frozen=True)
class OscillationRecord:
    delta: float
    measure: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.measure <= self.bound + 1e-9


def _fraction_above(ya, yb, level):
    """Fraction of [0, 1] on which the linear interpolant from ya to yb is >= level."""
    dy = yb - ya
    with np.errstate(divide="ignore", invalid="ignore"):
        tau = np.where(dy != 0.0, (level - ya) / dy, 0.0)
    tau = np.clip(tau, 0.0, 1.0)
    frac = np.where(dy > 0.0, 1.0 - tau, np.where(dy < 0.0, tau, (ya >= level).astype(float)))
    return frac


def oscillation_measure(c: DiscreteCurve, delta: float) -> OscillationRecord:
    """Parameter measure of {|y| >= delta}.

    The parameter is arclength rescaled so that its total equals the x-extent of
    the curve (the length when the extent is zero).
    """
    if delta <= 0.0:
        raise DomainError("delta must be positive")
    ell = c.segment_lengths()
    L = float(ell.sum())
    extent = abs(float(c.x[-1] - c.x[0])) or L
    dt = ell * (extent / L) if L > 0 else np.zeros_like(ell)
    y = c.y
    ya, yb = y[:-1], y[1:]
    frac = _fraction_above(ya, yb, delta) + _fraction_above(-ya, -yb, delta)
    measure = float(np.sum(np.minimum(frac, 1.0) * dt))
    return OscillationRecord(delta, measure, 2.0 * fiber_diameter() / delta**2)


def crossing_flatten_gain(c: DiscreteCurve, alpha: float, atol: float = 1e-9) -> float:
    """Length saved by clamping an excursion above y = alpha back to alpha."""
    y = c.y
    if abs(y[0] - alpha) > atol or abs(y[-1] - alpha) > atol:
        raise PreconditionError("excursion must start and end at y = alpha")
    if np.any(y < alpha - atol):
        raise PreconditionError("excursion must stay at or above y = alpha")
    if np.any(np.cos(c.psi) < 0.0):
        raise PreconditionError("excursion crosses a pole")
    q = np.array(c.q)
    q[:, 1] = psi_from_y(alpha)
    return c.length - curve_length(c.with_nodes(q, refine=False))


def crossing_flatten_check(c: DiscreteCurve, alpha: float) -> bool:
    return crossing_flatten_gain(c, alpha) > 0.0


# ---------------------------------------------------------------------------------
# rotating orbits near the equator


@dataclass
class NonzeroLReport:
    sigma_star: float
    min_abs_sigma_dot: float
    winding_rate: float
    sigma_star_ok: bool
    left_band: bool
    horizon: float | None
    orbit_length: float | None
    competitor_length: float | None


def nonzero_L_exclusion(inv: Invariants, delta: float, sigma_star_check: bool = True, t_max: float = 100.0,
                        tol: float = 1e-10) -> NonzeroLReport:
    """Integrate an orbit with L != 0 from the equator and find when a detour beats it.

    The competitor drops to the equator along meridians, runs straight there and
    climbs back, joining the same end points.
    """
    if inv.E <= 0.0:
        raise DomainError("E must be positive")
    if inv.L == 0.0:
        raise PreconditionError("L = 0 orbits are not rotating; use limit_geodesic")
    vy = ydot_from_invariants(0.0, inv)
    state = TangentState.at(0.0, 0.0, 0.0, inv.P * inv.E, vy, inv.L * inv.E)
    traj = integrate_geodesic(state, t_max, tol)
    y = traj.chart[:, 1]
    outside = np.abs(y) >= delta
    left = bool(outside.any())
    stop = int(np.argmax(outside)) if left else len(y)
    t = traj.t[:stop]
    chart = traj.chart[:stop]
    sigma_star = abs(inv.L * inv.E) / (1.0 + delta * delta) ** 2
    sdot = np.abs(chart[:, 5])
    min_sdot = float(sdot.min())
    ok = min_sdot >= sigma_star - 1e-9
    if sigma_star_check and not ok:
        raise AssertionError(f"|sigma'| dropped to {min_sdot} below sigma* = {sigma_star}")
    winding = float((chart[-1, 2] - chart[0, 2]) / t[-1]) if t[-1] > 0 else float(chart[0, 5])
    horizon = orbit_len = comp_len = None
    for i in range(1, len(t)):
        L_orbit = inv.E * t[i]
        x, yy, s = chart[i, :3]
        comp = meridian_length(0.0) + meridian_length(yy) + math.hypot(x - chart[0, 0],
                                                                       principal_angle(s - chart[0, 2]))
        if comp < L_orbit - 1e-12:
            horizon, orbit_len, comp_len = float(t[i]), float(L_orbit), float(comp)
            break
    return NonzeroLReport(sigma_star, min_sdot, winding, ok, left, horizon, orbit_len, comp_len)


# ---------------------------------------------------------------------------------
# limit of long free-boundary minimisers


def _window(c: DiscreteCurve, grid: np.ndarray) -> np.ndarray:
    x = c.x
    if np.any(np.diff(x) <= 0.0):
        raise DomainError("window restriction needs x increasing along the curve")
    return np.column_stack([np.interp(grid, x, c.y), np.interp(grid, x, c.sigma)])


def limit_geodesic(n_max: int = 8, tol: float = 1e-6, sigma0: float = 0.0, amplitude: float = 0.5,
                   nodes_per_unit: int = 16, max_iter: int = 100_000) -> DiscreteCurve:
    """Minimise curves between the slices x = -n and x = +n and watch the window x in [-1, 1].

    Returns the n = n_max minimiser; ``meta`` holds the sup-distances between
    consecutive window restrictions, the window max |y| and the largest |vx - 1|.
    """
    if n_max < 2:
        raise DomainError("n_max must be >= 2")
    grid = np.linspace(-1.0, 1.0, 201)
    prev = None
    distances = []
    curve = None
    for n in range(1, n_max + 1):
        K = 2 * n * nodes_per_unit
        x = np.linspace(-n, n, K + 1)
        u = x / n
        psi = amplitude * np.cos(HALF_PI * u)
        sig = sigma0 + 0.3 * np.sin(math.pi * u)
        seed = DiscreteCurve(np.column_stack([x, psi, sig]), FreeSlices(), refine=False)
        curve = relax_curve(seed, tol=tol, max_iter=max_iter, label=f"slab-{n}")
        w = _window(curve, grid)
        if prev is not None:
            distances.append(float(np.abs(w - prev).max()))
        prev = w
    inside = (curve.x >= -1.0) & (curve.x <= 1.0)
    ell = curve.segment_lengths()
    vx = np.diff(curve.x) / ell
    seg_in = inside[:-1] & inside[1:]
    meta = {
        **curve.meta,
        "window_distances": distances,
        "window_max_abs_y": float(np.abs(curve.y[inside]).max()),
        "window_max_vx_error": float(np.abs(vx[seg_in] - 1.0).max()),
        "window_sigma_mean": float(curve.sigma[inside].mean()),
    }
    return curve.with_nodes(curve.q, meta=meta, refine=False)
