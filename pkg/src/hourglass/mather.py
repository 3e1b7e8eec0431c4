"""Minimising measures for the cohomology class c dx.

With the closed form eta = c dx the action of an invariant measure is the
average of g(v, v) - c vx.  Its infimum alpha(c) = -c^2/4 is attained by
measures on equator lines travelled at x-velocity c/2; the effective
Hamiltonian used for calibration is the opposite, +c^2/4.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geodesic_flow import Trajectory, lagrangian_L2
from .manifold import TangentState, fmt


@dataclass(frozen=True)
class CohomologyClass:
    c: float

    def __post_init__(self):
        if not math.isfinite(self.c):
            raise DomainError("cohomology class must be finite")


@dataclass(frozen=True)
class GridSpec:
    """Resolution of the brute-force search over (height, direction, speed)."""

    n_y: int = 128
    n_direction: int = 128
    n_speed: int = 128

    def __post_init__(self):
        if min(self.n_y, self.n_direction, self.n_speed) < 32:
            raise DomainError("grid resolution must be at least 32 per axis")

    @classmethod
    def cube(cls, n: int) -> "GridSpec":
        return cls(n, n, n)


@dataclass(frozen=True)
class AlphaResult:
    """Analytic alpha(c) with its minimiser (y0, vx, E2), plus grid results when computed."""

    c: float
    analytic: float
    minimizer: tuple[float, float, float]
    grid_value: float | None = None
    grid_minimizer: tuple[float, float, float] | None = None
    grid_bound: float | None = None
    grid_spacing: tuple[float, float, float] | None = None

    def csv_row(self) -> str:
        y0, vx, e2 = self.grid_minimizer if self.grid_minimizer is not None else self.minimizer
        spacing = max(self.grid_spacing) if self.grid_spacing is not None else float("nan")
        grid = self.grid_value if self.grid_value is not None else float("nan")
        return ",".join(fmt(v) for v in (self.c, self.analytic, grid, y0, vx, e2, spacing))


CSV_HEADER = "c,analytic,grid_value,y0,vx,E2,grid_spacing"


def effective_hamiltonian(c: float) -> float:
    """H(c) = -inf A_c = c^2 / 4."""
    return 0.25 * c * c


def measure_action_integrand(state: TangentState, c: float) -> float:
    return lagrangian_L2(state) - c * state.vx


def alpha_analytic(c: float) -> AlphaResult:
    """-c^2/4, attained on the equator at x-velocity c/2.

    For c = 0 the minimising measures are the zero-velocity ones with arbitrary
    support; (0, 0, 0) is reported as a representative.
    """
    c = float(c)
    if c == 0.0:
        return AlphaResult(0.0, 0.0, (0.0, 0.0, 0.0))
    return AlphaResult(c, -0.25 * c * c, (0.0, 0.5 * c, 0.25 * c * c))


def grid_axes(c: float, spec: GridSpec = GridSpec()):
    ys = np.linspace(-1.0, 1.0, spec.n_y)
    betas = np.linspace(0.0, math.pi, spec.n_direction)
    speeds = np.linspace(0.0, max(1.0, abs(c)), spec.n_speed)
    return ys, betas, speeds


def grid_values(c: float, spec: GridSpec = GridSpec()) -> np.ndarray:
    """Integrand phi(y) s^2 - c s cos(beta) on the (y, beta, s) grid.

    beta is the angle between the velocity and the x-axis; the sphere part of the
    velocity only enters through its length, so one angle is enough.
    """
    ys, betas, speeds = grid_axes(c, spec)
    phi = (1.0 + ys * ys) ** 2
    s = speeds[None, None, :]
    return phi[:, None, None] * s * s - c * np.cos(betas)[None, :, None] * s


def _lipschitz_bound(c: float, ys, betas, speeds) -> float:
    """Half-spacing times the largest partial derivative on each axis."""
    smax = speeds[-1]
    hy, hb, hs = ys[1] - ys[0], betas[1] - betas[0], speeds[1] - speeds[0]
    dy = 8.0 * smax * smax  # |phi'(y)| <= 8 on [-1, 1]
    db = abs(c) * smax
    ds = 8.0 * smax + abs(c)
    return 0.5 * (hy * dy + hb * db + hs * ds)


def alpha_grid_search(c: float, spec: GridSpec = GridSpec()) -> AlphaResult:
    """Brute-force minimum of the action integrand over point states.

    A point-state minimum is a valid stand-in for the minimum over invariant
    measures here: the pointwise minimiser sits on an equator line with constant
    velocity, along which the integrand is constant, so its orbit measure has
    the same action.  Ties go to the smallest |y0|, then the smallest |vx|.
    """
    c = float(c)
    ys, betas, speeds = grid_axes(c, spec)
    vals = grid_values(c, spec)
    best = vals.min()
    iy, ib, isp = np.nonzero(vals == best)
    vx = speeds[isp] * np.cos(betas[ib])
    order = np.lexsort((np.abs(vx), np.abs(ys[iy])))
    k = order[0]
    y0 = float(ys[iy[k]])
    s = float(speeds[isp[k]])
    vxk = float(vx[k])
    e2 = float((1.0 + y0 * y0) ** 2 * s * s)
    base = alpha_analytic(c)
    spacing = (float(ys[1] - ys[0]), float(betas[1] - betas[0]), float(speeds[1] - speeds[0]))
    return AlphaResult(c, base.analytic, base.minimizer, float(best), (y0, vxk, e2),
                       float(_lipschitz_bound(c, ys, betas, speeds)), spacing)


def alpha_grid_oracle(c: float, grid_spec: GridSpec = GridSpec()) -> float:
    return alpha_grid_search(c, grid_spec).grid_value


def alpha_concavity_check(c_samples, atol: float = 1e-12) -> bool:
    """Concavity of alpha on every consecutive triple of the sorted distinct samples."""
    cs = sorted(set(float(c) for c in c_samples))
    if len(list(c_samples)) < 3:
        raise DomainError("need at least three samples")
    for a, b, d in zip(cs, cs[1:], cs[2:]):
        fa, fb, fd = (alpha_analytic(v).analytic for v in (a, b, d))
        chord = fa + (fd - fa) * (b - a) / (d - a)
        if fb < chord - atol:
            return False
    return True


def calibration_check(traj: Trajectory, c: float) -> float:
    """Largest |int_t^t' (L2 - c vx) dt + H(c)(t' - t)| over sample pairs, with u = 0."""
    if len(traj) < 2:
        return 0.0
    f = traj.lagrangian_series() - c * traj.chart[:, 3] + effective_hamiltonian(c)
    G = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(traj.t))])
    return float(G.max() - G.min())


def alpha_table_csv(results) -> str:
    return CSV_HEADER + "\n" + "\n".join(r.csv_row() for r in results) + "\n"
