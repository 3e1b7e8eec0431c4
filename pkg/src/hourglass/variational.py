"""Discrete curves, their length, and length minimisation per homotopy class.

Curves are polylines in the latitude chart (x, psi, sigma) with y = sin(psi).  In
these coordinates the metric reads

    (1 + sin^2 psi) * sqrt(dx^2 + dpsi^2 + cos^2 psi dsigma^2),

which stays smooth at the poles, so psi is left unconstrained: a polyline may run
through psi = pi/2 and continue on the far side of the pole.  Each segment is
interpolated linearly in the chart and integrated with 5-point Gauss-Legendre.

Minimisers are found by nonlinear CG on the discrete action
J = sqrt(K * sum(l_i^2)) (K segments), which equals the length when all segments
are equal and, unlike the length, has no reparametrisation null directions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import splu

from .errors import ConvergenceError, DomainError
from .manifold import (
    DEFAULT_OMEGA,
    TWO_PI,
    ChartPoint,
    TangentState,
    fmt,
    principal_angle,
    unwrap_near,
)
from .optimize import ncg_minimize

HALF_PI = 0.5 * math.pi
MAX_CHART_STEP = 0.5

_gl_t, _gl_w = np.polynomial.legendre.leggauss(5)
GL_T = 0.5 * (_gl_t + 1.0)
GL_W = 0.5 * _gl_w


@dataclass(frozen=True)
class HomotopyClass:
    m: int

    def __post_init__(self):
        if int(self.m) != self.m:
            raise DomainError("homotopy class must be an integer")


@dataclass(frozen=True)
class ClosedInClass:
    """Last node = deck_transform(first node, m), with sigma shifted by 2 pi * winding.

    The winding is homotopically trivial in the universal cover; it only selects the
    sheet of the longitude lift the polyline is drawn on.
    """

    m: int
    winding: int = 0
    kind = "closed"

    def shift(self, omega: float) -> np.ndarray:
        return np.array([float(self.m), 0.0, -TWO_PI * self.m * omega + TWO_PI * self.winding])

    def to_dict(self):
        return {"kind": self.kind, "m": self.m, "winding": self.winding}


@dataclass(frozen=True)
class FixedEndpoints:
    kind = "fixed"

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class FreeSlices:
    """Endpoints keep their x but may slide anywhere on their fiber."""

    kind = "free"

    def to_dict(self):
        return {"kind": self.kind}


def boundary_from_dict(data):
    kind = data["kind"]
    if kind == "closed":
        return ClosedInClass(int(data["m"]), int(data.get("winding", 0)))
    if kind == "fixed":
        return FixedEndpoints()
    if kind == "free":
        return FreeSlices()
    raise DomainError(f"unknown boundary kind {kind!r}")


def _refine(q: np.ndarray, max_step: float) -> np.ndarray:
    d = np.linalg.norm(np.diff(q, axis=0), axis=1)
    pieces = np.maximum(1, np.ceil(d / (0.98 * max_step)).astype(int))
    if np.all(pieces == 1):
        return q
    out = [q[:1]]
    for i, k in enumerate(pieces):
        t = np.arange(1, k + 1)[:, None] / k
        out.append(q[i] + t * (q[i + 1] - q[i]))
    res = np.concatenate(out)
    res[-1] = q[-1]
    return res


def psi_from_y(y: float) -> float:
    return math.asin(max(-1.0, min(1.0, y)))


def chart_point_from_latitude(x: float, psi: float, sigma: float) -> ChartPoint:
    """Map a latitude-chart triple (psi unrestricted) to a ChartPoint."""
    y = math.sin(psi)
    if math.cos(psi) < 0.0:
        sigma = sigma + math.pi
    return ChartPoint(x, max(-1.0, min(1.0, y)), sigma)


class DiscreteCurve:
    """Polyline lift of a curve in the universal cover.

    ``q`` is an (N, 3) array of latitude-chart nodes (x, psi, sigma).  For a closed
    curve the last node is always recomputed from the first one, so the class
    constraint holds exactly.  Segments longer than ``MAX_CHART_STEP`` in the chart
    are subdivided on construction; subdivision does not change the polyline.
    """

    def __init__(self, q, boundary, omega: float = DEFAULT_OMEGA, meta: dict | None = None, refine: bool = True):
        q = np.array(q, dtype=float).reshape(-1, 3)
        if len(q) < 2:
            raise DomainError("a discrete curve needs at least two nodes")
        if not np.all(np.isfinite(q)):
            raise DomainError("non-finite node coordinates")
        self.boundary = boundary
        self.omega = float(omega)
        if boundary.kind == "closed":
            q[-1] = q[0] + boundary.shift(self.omega)
        if refine:
            q = _refine(q, MAX_CHART_STEP)
        q.flags.writeable = False
        self._q = q
        self.meta = dict(meta or {})
        self._length = None

    # --- construction helpers -------------------------------------------------
    @classmethod
    def from_chart_points(cls, points, boundary, omega: float = DEFAULT_OMEGA, **kw) -> "DiscreteCurve":
        """Build from ChartPoints, choosing latitude branches continuously."""
        rows = []
        prev = None
        for p in points:
            psi = psi_from_y(p.y)
            if prev is None:
                rows.append((p.x, psi, p.sigma))
            else:
                cands = []
                for base, dsig in ((psi, 0.0), (math.pi - psi, math.pi), (-math.pi - psi, math.pi)):
                    s = unwrap_near(p.sigma + dsig, prev[2]) if abs(math.cos(base)) > 1e-12 else prev[2]
                    cands.append((p.x, base, s))
                rows.append(min(cands, key=lambda c: (c[1] - prev[1]) ** 2 + (c[2] - prev[2]) ** 2))
            prev = rows[-1]
        return cls(np.array(rows), boundary, omega, **kw)

    def with_nodes(self, q, meta: dict | None = None, refine: bool = True) -> "DiscreteCurve":
        return DiscreteCurve(q, self.boundary, self.omega, meta if meta is not None else self.meta, refine)

    # --- views ------------------------------------------------------------------
    @property
    def q(self) -> np.ndarray:
        return self._q

    @property
    def n_nodes(self) -> int:
        return len(self._q)

    @property
    def x(self):
        return self._q[:, 0]

    @property
    def psi(self):
        return self._q[:, 1]

    @property
    def sigma(self):
        return self._q[:, 2]

    @property
    def y(self):
        return np.sin(self._q[:, 1])

    @property
    def nodes(self) -> list[ChartPoint]:
        return [chart_point_from_latitude(*row) for row in self._q]

    @property
    def length(self) -> float:
        if self._length is None:
            self._length = curve_length(self)
        return self._length

    def segment_lengths(self) -> np.ndarray:
        return _segment_terms(self._q, grad=False)[0]

    def __repr__(self):
        return f"DiscreteCurve(n_nodes={self.n_nodes}, boundary={self.boundary}, length={self.length:.12g})"

    # --- resampling -------------------------------------------------------------
    def resampled(self, n_nodes: int) -> "DiscreteCurve":
        """Linear resampling at equal chart-arclength spacing (exact for chart-straight curves)."""
        d = np.linalg.norm(np.diff(self._q, axis=0), axis=1)
        s = np.concatenate([[0.0], np.cumsum(d)])
        if s[-1] == 0.0:
            return self.with_nodes(np.repeat(self._q[:1], n_nodes, axis=0), refine=False)
        t = np.linspace(0.0, s[-1], n_nodes)
        q = np.column_stack([np.interp(t, s, self._q[:, k]) for k in range(3)])
        q[0], q[-1] = self._q[0], self._q[-1]
        return self.with_nodes(q)

    # --- serialisation ------------------------------------------------------------
    def to_csv(self) -> str:
        lines = ["idx,x,y,sigma"]
        for i, p in enumerate(self.nodes):
            lines.append(f"{i},{p.csv_row()}")
        return "\n".join(lines) + "\n"

    def sidecar(self) -> dict:
        return {
            "class_m": self.boundary.m if self.boundary.kind == "closed" else None,
            "boundary": self.boundary.to_dict(),
            "omega": self.omega,
            "length": self.length,
            "grad_norm": self.meta.get("grad_norm"),
            "seeds_tried": self.meta.get("seeds_tried"),
        }

    def write(self, path) -> tuple[Path, Path]:
        path = Path(path)
        csv_path = path.with_suffix(".csv")
        json_path = path.with_suffix(".json")
        csv_path.write_text(self.to_csv())
        json_path.write_text(json.dumps(self.sidecar(), indent=2))
        return csv_path, json_path

    @classmethod
    def read(cls, path) -> "DiscreteCurve":
        path = Path(path)
        side = json.loads(path.with_suffix(".json").read_text())
        rows = path.with_suffix(".csv").read_text().strip().splitlines()[1:]
        pts = [ChartPoint.from_csv_row(r.split(",", 1)[1]) for r in rows]
        meta = {k: side.get(k) for k in ("grad_norm", "seeds_tried")}
        return cls.from_chart_points(pts, boundary_from_dict(side["boundary"]), side.get("omega", DEFAULT_OMEGA),
                                     meta=meta, refine=False)


# ---------------------------------------------------------------------------------
# length and gradient


def _segment_terms(q: np.ndarray, grad: bool = True):
    """Segment lengths and their partial derivatives w.r.t. both end nodes."""
    qa = q[:-1]
    d = q[1:] - qa
    psi_g = qa[:, 1:2] + GL_T * d[:, 1:2]
    s = np.sin(psi_g)
    c = np.cos(psi_g)
    c2 = c * c
    factor = 1.0 + s * s
    dx2 = d[:, 0:1] ** 2
    dp2 = d[:, 1:2] ** 2
    ds2 = d[:, 2:3] ** 2
    Q = np.sqrt(dx2 + dp2 + c2 * ds2)
    ell = (GL_W * factor * Q).sum(axis=1)
    if not grad:
        return ell, None, None
    with np.errstate(divide="ignore", invalid="ignore"):
        invQ = np.where(Q > 0.0, 1.0 / Q, 0.0)
    A = GL_W * factor * invQ
    sA = A.sum(axis=1)
    dl_ddx = d[:, 0] * sA
    dl_ddp = d[:, 1] * sA
    dl_dds = d[:, 2] * (A * c2).sum(axis=1)
    sc = s * c
    dl_dpsig = GL_W * (2.0 * sc * Q - factor * sc * ds2 * invQ)
    dpa = ((1.0 - GL_T) * dl_dpsig).sum(axis=1)
    dpb = (GL_T * dl_dpsig).sum(axis=1)
    ga = np.column_stack([-dl_ddx, dpa - dl_ddp, -dl_dds])
    gb = np.column_stack([dl_ddx, dpb + dl_ddp, dl_dds])
    return ell, ga, gb


def curve_length(c: DiscreteCurve) -> float:
    return float(_segment_terms(c.q, grad=False)[0].sum())


def _scatter(ga, gb, weights=None):
    n = len(ga) + 1
    G = np.zeros((n, 3))
    if weights is not None:
        ga = ga * weights[:, None]
        gb = gb * weights[:, None]
    G[:-1] += ga
    G[1:] += gb
    return G


def length_gradient(c: DiscreteCurve, raw: bool = False) -> np.ndarray:
    """Gradient of curve_length w.r.t. node coordinates (x, psi, sigma).

    With ``raw=True`` every node is treated as independent.  Otherwise rows of
    nodes that are not free are zero: fixed endpoints, the x of free-slice
    endpoints, and the last node of a closed curve, whose contribution is folded
    into the first node (the two move together under the deck constraint).
    """
    _, ga, gb = _segment_terms(c.q)
    G = _scatter(ga, gb)
    if raw:
        return G
    mask = _free_mask(c)
    if c.boundary.kind == "closed":
        G[0] += G[-1]
    G[~mask] = 0.0
    return G


def _free_mask(c: DiscreteCurve, freeze_x: bool = False) -> np.ndarray:
    mask = np.ones((c.n_nodes, 3), dtype=bool)
    kind = c.boundary.kind
    if kind == "closed":
        mask[-1] = False
    elif kind == "fixed":
        mask[0] = False
        mask[-1] = False
        # longitude of an endpoint sitting at a pole does not move the point
        for i in (0, -1):
            if abs(math.cos(c.q[i, 1])) < 1e-12:
                mask[i, 2] = True
    elif kind == "free":
        mask[0, 0] = False
        mask[-1, 0] = False
    if freeze_x:
        mask[:, 0] = False
    return mask


# ---------------------------------------------------------------------------------
# minimisation


def _laplacian_preconditioner(q: np.ndarray, closed: bool, mask: np.ndarray, scale: float):
    """Inverse of a scaled, metric-weighted path (or cycle) Laplacian on the free coordinates.

    The Hessian of the discrete action along a nearly uniform curve is close to
    (K / J) times a graph Laplacian of the node chain whose edge weights are the
    metric coefficients at the segment midpoints: (1 + sin^2 psi)^2 for x and
    psi, times cos^2 psi for sigma.  Fixed coordinates act as Dirichlet
    conditions.  A small shift keeps the matrix definite along translations.
    """
    n_nodes = len(q)
    a = np.arange(n_nodes - 1)
    b = (a + 1) % (n_nodes - 1) if closed else a + 1
    K = n_nodes - 1
    psi_mid = 0.5 * (q[:-1, 1] + q[1:, 1])
    conf = (1.0 + np.sin(psi_mid) ** 2) ** 2
    weights = [conf, conf, conf * np.maximum(np.cos(psi_mid) ** 2, 1e-2)]
    free = np.argwhere(mask)
    index = -np.ones(mask.shape, dtype=int)
    index[mask] = np.arange(len(free))
    shift = 0.1 * (math.pi / K) ** 2
    diag = np.zeros((n_nodes, 3))
    rows, cols, vals = [], [], []
    for k in range(3):
        np.add.at(diag[:, k], a, weights[k])
        np.add.at(diag[:, k], b, weights[k])
        ia, ib = index[a, k], index[b, k]
        ok = (ia >= 0) & (ib >= 0) & (ia != ib)
        rows += [ia[ok], ib[ok]]
        cols += [ib[ok], ia[ok]]
        vals += [-weights[k][ok], -weights[k][ok]]
    node, col = free[:, 0], free[:, 1]
    rows.append(np.arange(len(free)))
    cols.append(np.arange(len(free)))
    vals.append(diag[node, col] + shift)
    n = len(free)
    M = coo_matrix((np.concatenate(vals) * scale, (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    lu = splu(M.tocsc())
    return lu.solve


def relax_curve(c: DiscreteCurve, tol: float = 1e-8, max_iter: int = 100_000, freeze_x: bool = False,
                label: str | None = None) -> DiscreteCurve:
    """Minimise the discrete action of ``c`` over its free coordinates."""
    q0 = np.array(c.q)
    mask = _free_mask(c, freeze_x)
    closed = c.boundary.kind == "closed"
    shift = c.boundary.shift(c.omega) if closed else None
    K = len(q0) - 1

    def fg(v):
        q = q0.copy()
        q[mask] = v
        if closed:
            q[-1] = q[0] + shift
        ell, ga, gb = _segment_terms(q)
        J = math.sqrt(K * float(ell @ ell))
        if J == 0.0:
            return 0.0, np.zeros(v.shape)
        G = _scatter(ga, gb, (K / J) * ell)
        if closed:
            G[0] += G[-1]
        return J, G[mask]

    if not mask.any():
        return c.with_nodes(q0, meta={**c.meta, "grad_norm": 0.0, "converged": True, "iterations": 0})
    J0 = max(c.length, 1e-12)
    precond = _laplacian_preconditioner(q0, closed, mask, K / J0) if K > 2 else None
    res = ncg_minimize(fg, q0[mask], tol=tol, max_iter=max_iter, precond=precond)
    q = q0.copy()
    q[mask] = res.x
    meta = {
        **c.meta,
        "grad_norm": res.grad_norm,
        "converged": res.converged,
        "iterations": res.iterations,
        "message": res.message,
    }
    if label is not None:
        meta["seed"] = label
    return c.with_nodes(q, meta=meta, refine=False)


def _legs(waypoints, spacing: float) -> np.ndarray:
    """Polyline through waypoints with nodes at most ``spacing`` apart in the chart."""
    w = np.asarray(waypoints, dtype=float)
    out = [w[:1]]
    for a, b in zip(w[:-1], w[1:]):
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / spacing)))
        t = np.arange(1, k + 1)[:, None] / k
        out.append(a + t * (b - a))
    return np.concatenate(out)


def _uniform(a, b, n_nodes: int) -> np.ndarray:
    t = np.linspace(0.0, 1.0, n_nodes)[:, None]
    return np.asarray(a, float) + t * (np.asarray(b, float) - np.asarray(a, float))


def _first_node_key(c: DiscreteCurve) -> tuple:
    """First node as (x, y, sigma mod 2 pi) on a 1e-9 grid, then the largest |psi| (flatter wins)."""
    p = chart_point_from_latitude(*c.q[0])
    sigma = 0.0 if p.degenerate else math.remainder(p.sigma, TWO_PI)
    return tuple(round(v, 9) + 0.0 for v in (p.x, p.y, sigma)) + (float(np.abs(c.psi).max()),)


def _pick(results: list[DiscreteCurve]) -> DiscreteCurve:
    """Shortest; lengths within 1e-10 are broken by the lexicographically smallest first node."""
    best = min(r.length for r in results)
    close = [r for r in results if r.length - best < 1e-10]
    return min(close, key=_first_node_key)


def _distinct_minima(results: list[DiscreteCurve], tol: float = 1e-6) -> list[float]:
    out: list[float] = []
    for L in sorted(r.length for r in results):
        if not out or L - out[-1] > tol * max(1.0, L):
            out.append(L)
    return out


def equator_winding(m: int, omega: float) -> int:
    """Winding k for which the closed equator chord of class m twists by the principal angle."""
    theta = principal_angle(TWO_PI * m * omega)
    return int(round((TWO_PI * m * omega - theta) / TWO_PI))


def closed_seeds(m: int, n_nodes: int, omega: float, sigma0: float = 0.0) -> dict[str, DiscreteCurve]:
    """Seed loops for class m: pole dip (default), two equator chords, pole line."""
    k = equator_winding(m, omega)
    t = np.linspace(0.0, 1.0, n_nodes)
    seeds = {}
    principal = ClosedInClass(m, k)
    dsig = principal.shift(omega)[2]
    dip = np.column_stack([m * t, HALF_PI * np.sin(math.pi * t) ** 2,
                           sigma0 + dsig * (t - np.sin(TWO_PI * t) / TWO_PI)])
    seeds["pole-dip"] = DiscreteCurve(dip, principal, omega)
    seeds["equator"] = DiscreteCurve(_uniform((0, 0, sigma0), (m, 0, sigma0 + dsig), n_nodes), principal, omega)
    theta = principal_angle(TWO_PI * m * omega)
    k_alt = k + (1 if theta > 0 else -1)
    alt = ClosedInClass(m, k_alt)
    seeds["equator-alt"] = DiscreteCurve(
        _uniform((0, 0, sigma0), (m, 0, sigma0 + alt.shift(omega)[2]), n_nodes), alt, omega)
    seeds["pole-line"] = DiscreteCurve(
        _uniform((0, HALF_PI, sigma0), (m, HALF_PI, sigma0 + dsig), n_nodes), principal, omega)
    return seeds


def tonelli_minimize(m, n_nodes: int | None = None, tol: float = 1e-8, seed: DiscreteCurve | None = None,
                     omega: float = DEFAULT_OMEGA, max_iter: int = 100_000) -> DiscreteCurve:
    """Shortest closed curve found in homotopy class m, over several seeds.

    Every seed is relaxed independently; the shortest result is returned with
    ``meta["seeds_tried"]`` and ``meta["local_minima"]`` (all distinct lengths found,
    no uniqueness is claimed).
    """
    m = m.m if isinstance(m, HomotopyClass) else int(m)
    if m == 0:
        p = seed.q[0] if seed is not None else np.zeros(3)
        return DiscreteCurve(np.array([p, p]), ClosedInClass(0), omega,
                             meta={"grad_norm": 0.0, "seeds_tried": ["constant"], "local_minima": [0.0],
                                   "converged": True})
    if n_nodes is None:
        n_nodes = 16 * abs(m) + 1
    if n_nodes < 16 * abs(m):
        raise DomainError("n_nodes must be at least 16*|m|")
    seeds = closed_seeds(m, n_nodes, omega)
    if seed is not None:
        seeds = {"user": seed, **{k: v for k, v in seeds.items() if k != "pole-dip"}}
    results = [relax_curve(c, tol=tol, max_iter=max_iter, label=name) for name, c in seeds.items()]
    best = _pick(results)
    meta = {
        **best.meta,
        "seeds_tried": list(seeds),
        "local_minima": _distinct_minima(results),
        "seed_lengths": {r.meta["seed"]: r.length for r in results},
    }
    best = best.with_nodes(best.q, meta=meta, refine=False)
    if not best.meta.get("converged", False) and best.meta.get("message") == "maximum iterations reached":
        raise ConvergenceError(f"class {m} minimisation did not converge (|grad|={best.meta['grad_norm']:.3g})",
                               best=best)
    return best


def _to_latitude(p: ChartPoint) -> np.ndarray:
    return np.array([p.x, psi_from_y(p.y), p.sigma])


def bvp_seeds(a: np.ndarray, b: np.ndarray, n_nodes: int) -> dict[str, np.ndarray]:
    """Seeds between latitude-chart points a and b."""
    b_near = b.copy()
    if abs(math.cos(b[1])) > 1e-12:
        b_near[2] = unwrap_near(b[2], a[2])
    else:
        b_near[2] = a[2]
    seeds = {"straight": _uniform(a, b_near, n_nodes)}
    b_alt = b_near.copy()
    b_alt[2] += TWO_PI if b_near[2] <= a[2] else -TWO_PI
    if abs(math.cos(b[1])) > 1e-12:
        seeds["straight-alt"] = _uniform(a, b_alt, n_nodes)
    spacing = max(1e-3, (np.linalg.norm(b_near - a) + 2.0 * math.pi) / max(2, n_nodes - 1))
    seeds["equator"] = _legs([a, (a[0], 0.0, a[2]), (b[0], 0.0, b_near[2]), b_near], spacing)
    for name, pole in (("north", HALF_PI), ("south", -HALF_PI)):
        seeds[name] = _legs([a, (a[0], pole, a[2]), (b[0], pole, b_near[2]), b_near], spacing)
    return seeds


def geodesic_bvp(p: ChartPoint, q: ChartPoint, n_nodes: int = 33, tol: float = 1e-9,
                 omega: float = DEFAULT_OMEGA, seeds: dict | None = None, max_iter: int = 100_000,
                 freeze_x: bool = False) -> DiscreteCurve:
    """Shortest fixed-endpoint curve from p to q over straight, equator and pole seeds."""
    a, b = _to_latitude(p), _to_latitude(q)
    return _bvp_latitude(a, b, n_nodes, tol, omega, seeds, max_iter, freeze_x)


def _bvp_latitude(a, b, n_nodes=33, tol=1e-9, omega=DEFAULT_OMEGA, seeds=None, max_iter=100_000,
                  freeze_x=False) -> DiscreteCurve:
    same_point = a[0] == b[0] and math.sin(a[1]) == math.sin(b[1]) and (
        abs(math.cos(a[1])) < 1e-12 or math.remainder(a[2] - b[2], TWO_PI) == 0.0)
    if same_point:
        return DiscreteCurve(np.array([a, a]), FixedEndpoints(), omega,
                             meta={"grad_norm": 0.0, "seeds_tried": ["trivial"], "converged": True})
    if seeds is None:
        seeds = bvp_seeds(a, b, n_nodes)
    results = []
    for name, nodes in seeds.items():
        nodes = np.array(nodes, dtype=float)
        nodes[0] = a
        # keep the endpoint's point but allow the seed's own longitude branch
        c = DiscreteCurve(nodes, FixedEndpoints(), omega)
        results.append(relax_curve(c, tol=tol, max_iter=max_iter, freeze_x=freeze_x, label=name))
    best = _pick(results)
    meta = {**best.meta, "seeds_tried": list(seeds), "local_minima": _distinct_minima(results)}
    best = best.with_nodes(best.q, meta=meta, refine=False)
    if not best.meta.get("converged", False) and best.meta.get("message") == "maximum iterations reached":
        raise ConvergenceError("geodesic boundary value problem did not converge", best=best)
    return best


def fiber_distance(y1: float, sigma1: float, y2: float, sigma2: float, n_nodes: int = 33,
                   tol: float = 1e-9) -> float:
    """Distance inside the fiber {x = 0} between (y1, sigma1) and (y2, sigma2)."""
    a = np.array([0.0, psi_from_y(y1), sigma1])
    b = np.array([0.0, psi_from_y(y2), sigma2])
    if abs(math.cos(b[1])) > 1e-12:
        b[2] = unwrap_near(b[2], a[2])
    else:
        b[2] = a[2]
    seeds = {"straight": _uniform(a, b, n_nodes)}
    # the same end point seen from across either pole
    for name, sign in (("north", 1.0), ("south", -1.0)):
        far = np.array([0.0, sign * math.pi - b[1], b[2] + math.pi])
        if abs(math.cos(a[1])) < 1e-12:
            far[2] = a[2]
        seeds[name] = _uniform(a, far, n_nodes)
    curve = _bvp_latitude(a, b, n_nodes, tol, seeds=seeds, freeze_x=True)
    return curve.length


def n_cover(c: DiscreteCurve, n: int) -> DiscreteCurve:
    """Concatenate n deck-translated copies of a closed curve (class n*m)."""
    if c.boundary.kind != "closed":
        raise DomainError("n_cover needs a closed-in-class curve")
    if n < 1:
        raise DomainError("n must be >= 1")
    if n == 1:
        return c
    shift = c.boundary.shift(c.omega)
    body = c.q[:-1]
    q = np.concatenate([body + j * shift for j in range(n)] + [c.q[:1] + n * shift])
    bnd = ClosedInClass(n * c.boundary.m, n * c.boundary.winding)
    return DiscreteCurve(q, bnd, c.omega, meta={"cover_of": c.boundary.m, "n": n}, refine=False)


def curve_initial_state(c: DiscreteCurve) -> TangentState:
    """Unit-speed tangent state at the first node, from a centred difference when possible."""
    q = c.q
    ell = c.segment_lengths()
    if c.boundary.kind == "closed" and c.n_nodes > 2:
        prev = q[-2] - c.boundary.shift(c.omega)
        d = (q[1] - prev) / (ell[0] + ell[-1])
    else:
        d = (q[1] - q[0]) / ell[0]
    x, psi, sig = q[0]
    dx, dpsi, dsig = d
    cp, sp = math.cos(psi), math.sin(psi)
    # the latitude direction flips once psi has crossed a pole
    if abs(cp) > 1e-9:
        state = TangentState(chart_point_from_latitude(x, psi, sig), dx, cp * dpsi, dsig)
    else:
        w = (sp, 0.0, 0.0)
        wdot = (0.0, -sp * dpsi * math.cos(sig), -sp * dpsi * math.sin(sig))
        state = TangentState.from_ambient(x, w, dx, wdot, sigma_ref=sig)
    return state
