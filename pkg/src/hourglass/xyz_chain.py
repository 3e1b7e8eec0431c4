"""Chains of sphere-valued spins whose bond energy is the hourglass distance.

Site j sits on the fiber {x = j}.  The bond between neighbouring sites a, b is
the distance from (0, a) to (1, R b), where R rotates the sphere by 2 pi omega
about the y-axis.  Ground states of the chain play the role of minimising
geodesics; periodic chains are the analogue of covers of a closed orbit.
"""
from __future__ import annotations

import functools
import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DomainError
from .manifold import DEFAULT_OMEGA, TWO_PI, ChartPoint, fmt, principal_angle
from .variational import DiscreteCurve, geodesic_bvp, length_gradient, psi_from_y

KEY_QUANTUM = 1e-9
POLE_EPS = 1e-9


# ---------------------------------------------------------------------------------
# sites


def site_from_angles(psi: float, sigma: float) -> np.ndarray:
    return np.array([math.sin(psi), math.cos(psi) * math.cos(sigma), math.cos(psi) * math.sin(sigma)])


def site_angles(u) -> tuple[float, float]:
    """(psi, sigma) of a unit vector (y, z1, z2); sigma = 0 at the poles."""
    y, z1, z2 = (float(v) for v in u)
    psi = psi_from_y(y)
    sigma = math.atan2(z2, z1) if (z1 or z2) else 0.0
    return psi, sigma


def rotate(u, angle: float) -> np.ndarray:
    """Rotation about the y-axis: sigma -> sigma + angle."""
    c, s = math.cos(angle), math.sin(angle)
    y, z1, z2 = u
    return np.array([y, c * z1 - s * z2, s * z1 + c * z2])


@dataclass(frozen=True)
class Periodic:
    period: int
    kind = "periodic"


@dataclass(frozen=True)
class FixedEnds:
    kind = "fixed"


@dataclass
class Configuration:
    """Sites u_j for j = j0, j0+1, ... as rows (y, z1, z2)."""

    sites: np.ndarray
    boundary: object = FixedEnds()
    j0: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sites = np.array(self.sites, dtype=float).reshape(-1, 3)
        norms = np.linalg.norm(self.sites, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-12):
            raise DomainError("every site must be a unit vector")
        if self.boundary.kind == "periodic":
            p = self.boundary.period
            if p < 1 or len(self.sites) % p:
                raise DomainError("periodic window length must be a multiple of the period")
            if not np.array_equal(self.sites, np.tile(self.sites[:p], (len(self.sites) // p, 1))):
                raise DomainError("periodic sites must repeat exactly")

    @classmethod
    def from_angles(cls, psi, sigma, boundary=FixedEnds(), j0: int = 0) -> "Configuration":
        return cls(np.array([site_from_angles(a, b) for a, b in zip(psi, sigma)]), boundary, j0)

    def __len__(self):
        return len(self.sites)

    def bonds(self) -> list[tuple[int, int]]:
        n = len(self.sites)
        if self.boundary.kind == "periodic":
            return [(j, (j + 1) % n) for j in range(n)]
        return [(j, j + 1) for j in range(n - 1)]

    def to_csv(self) -> str:
        lines = ["j,y,sigma"]
        for k, u in enumerate(self.sites):
            _, s = site_angles(u)
            lines.append(f"{self.j0 + k},{fmt(u[0])},{fmt(s)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str, boundary=FixedEnds()) -> "Configuration":
        rows = [r.split(",") for r in text.strip().splitlines()[1:]]
        j0 = int(rows[0][0]) if rows else 0
        pts = [ChartPoint(0.0, float(y), float(s)) for _, y, s in rows]
        return cls(np.array([p.ambient() for p in pts]), boundary, j0)


# ---------------------------------------------------------------------------------
# bond energy


@dataclass(frozen=True)
class InteractionValue:
    value: float
    segment: DiscreteCurve
    grad_a: tuple[float, float]  # d value / d(psi_a, sigma_a)
    grad_b: tuple[float, float]


def _quantize(v: float) -> float:
    return round(v / KEY_QUANTUM) * KEY_QUANTUM


@functools.lru_cache(maxsize=200_000)
def _bond(psi_a: float, psi_b: float, dsigma: float, omega: float, tol: float) -> InteractionValue:
    p = ChartPoint(0.0, math.sin(psi_a), 0.0)
    q = ChartPoint(1.0, math.sin(psi_b), dsigma)
    seg = geodesic_bvp(p, q, n_nodes=33, tol=tol, omega=omega)
    G = length_gradient(seg, raw=True)
    # endpoint nodes may sit on another latitude branch; map back through the chart
    ga = _branch_grad(seg.q[0], G[0])
    gb = _branch_grad(seg.q[-1], G[-1])
    return InteractionValue(seg.length, seg, ga, gb)


def _branch_grad(node, g) -> tuple[float, float]:
    psi = node[1]
    # psi' = pi - psi on the far side of a pole flips the latitude direction
    sign = 1.0 if math.cos(psi) >= 0.0 else -1.0
    return (sign * float(g[1]), float(g[2]))


def _bond_key(a, b, omega: float):
    psi_a, s_a = site_angles(a)
    psi_b, s_b = site_angles(b)
    if abs(abs(psi_a) - math.pi / 2) < POLE_EPS or abs(abs(psi_b) - math.pi / 2) < POLE_EPS:
        d = 0.0
    else:
        d = principal_angle(s_b + TWO_PI * omega - s_a)
    return _quantize(psi_a), _quantize(psi_b), _quantize(d)


def interaction(a, b, omega: float = DEFAULT_OMEGA, tol: float = 1e-9) -> InteractionValue:
    """Distance from (0, a) to (1, R b), R = rotation by 2 pi omega; memoised per relative position."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    for u in (a, b):
        if abs(float(np.linalg.norm(u)) - 1.0) > 1e-12:
            raise DomainError("sites must be unit vectors")
    return _bond(*_bond_key(a, b, omega), float(omega), float(tol))


def clear_interaction_cache():
    _bond.cache_clear()


def window_energy(cfg: Configuration, omega: float = DEFAULT_OMEGA, tol: float = 1e-9) -> float:
    return float(sum(interaction(cfg.sites[i], cfg.sites[k], omega, tol).value for i, k in cfg.bonds()))


def bond_energies(cfg: Configuration, omega: float = DEFAULT_OMEGA, tol: float = 1e-9) -> np.ndarray:
    return np.array([interaction(cfg.sites[i], cfg.sites[k], omega, tol).value for i, k in cfg.bonds()])


# ---------------------------------------------------------------------------------
# relaxation


def _tangent_basis(u):
    psi, s = site_angles(u)
    e_psi = np.array([math.cos(psi), -math.sin(psi) * math.cos(s), -math.sin(psi) * math.sin(s)])
    e_sig = np.array([0.0, -math.sin(s), math.cos(s)])
    return psi, e_psi, e_sig


def _site_energy(u, left, right, omega, tol):
    e = 0.0
    if left is not None:
        e += interaction(left, u, omega, tol).value
    if right is not None:
        e += interaction(u, right, omega, tol).value
    return e


def _site_gradient(u, left, right, omega, tol, h=1e-5):
    """Gradient of the site energy in the tangent plane, as an ambient vector."""
    psi, e_psi, e_sig = _tangent_basis(u)
    c = math.cos(psi)
    if c > 1e-6:
        g_psi = g_sig = 0.0
        if left is not None:
            b = interaction(left, u, omega, tol)
            g_psi += b.grad_b[0]
            g_sig += b.grad_b[1]
        if right is not None:
            b = interaction(u, right, omega, tol)
            g_psi += b.grad_a[0]
            g_sig += b.grad_a[1]
        return g_psi * e_psi + (g_sig / c) * e_sig
    # pole: central differences along an orthonormal tangent basis
    g = np.zeros(3)
    for e in (np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0])):
        up = u + h * e
        dn = u - h * e
        fp = _site_energy(up / np.linalg.norm(up), left, right, omega, tol)
        fm = _site_energy(dn / np.linalg.norm(dn), left, right, omega, tol)
        g += (fp - fm) / (2 * h) * e
    return g


def _update_site(u, left, right, omega, tol, max_steps=2):
    """A couple of Armijo gradient steps on one site; the sweep loop does the rest."""
    f0 = _site_energy(u, left, right, omega, tol)
    for _ in range(max_steps):
        g = _site_gradient(u, left, right, omega, tol)
        gn = float(np.linalg.norm(g))
        if gn < tol:
            return u, f0, gn
        # two unit bonds pull on a site, so the tangent Hessian is about 2
        step = 0.5
        while step > 1e-12:
            v = u - step * g
            v /= np.linalg.norm(v)
            f1 = _site_energy(v, left, right, omega, tol)
            if f1 <= f0 - 1e-4 * step * gn * gn:
                break
            step *= 0.5
        else:
            return u, f0, gn
        u, f0 = v, f1
    return u, f0, float(np.linalg.norm(_site_gradient(u, left, right, omega, tol)))


def relax_ground_state(cfg: Configuration, tol: float = 1e-8, omega: float = DEFAULT_OMEGA,
                       max_sweeps: int = 500, bond_tol: float = 1e-9) -> Configuration:
    """Symmetric Gauss-Seidel descent over the free sites.

    Fixed-ends windows keep their first and last site; periodic windows relax one
    period with wrapped neighbours.  Stops when a sweep lowers the energy by less
    than ``tol``.  ``meta`` records the per-sweep energies and a ``stalled`` flag set
    when the last sweep stalled with a site gradient above 10 * sqrt(tol); an
    energy decrease below tol only pins the gradient down to about sqrt(tol).
    """
    periodic = cfg.boundary.kind == "periodic"
    if periodic:
        p = cfg.boundary.period
        sites = [np.array(u) for u in cfg.sites[:p]]
        free = list(range(p))
    else:
        if len(cfg) < 2:
            return cfg
        sites = [np.array(u) for u in cfg.sites]
        free = list(range(1, len(sites) - 1))

    def neighbours(j):
        if periodic:
            n = len(sites)
            return sites[(j - 1) % n], sites[(j + 1) % n]
        return sites[j - 1], sites[j + 1]

    def energy():
        if periodic:
            n = len(sites)
            return sum(interaction(sites[j], sites[(j + 1) % n], omega, bond_tol).value for j in range(n))
        return sum(interaction(sites[j], sites[j + 1], omega, bond_tol).value for j in range(len(sites) - 1))

    history = [energy()]
    gmax = 0.0
    order = free + free[::-1]
    for _ in range(max_sweeps):
        gmax = 0.0
        for j in order:
            left, right = neighbours(j)
            sites[j], _, gn = _update_site(sites[j], left, right, omega, bond_tol)
            gmax = max(gmax, gn)
        history.append(energy())
        if history[-2] - history[-1] < tol:
            break
    stalled = history[-2] - history[-1] < tol and gmax > 10.0 * math.sqrt(tol) if len(history) > 1 else False
    if stalled:
        warnings.warn(f"relaxation stalled with site gradient {gmax:.3g}", RuntimeWarning, stacklevel=2)
    arr = np.array(sites)
    if periodic:
        arr = np.tile(arr, (len(cfg) // cfg.boundary.period, 1))
    meta = {**cfg.meta, "energies": history, "max_site_gradient": gmax, "stalled": bool(stalled)}
    return Configuration(arr, cfg.boundary, cfg.j0, meta)


# ---------------------------------------------------------------------------------
# periodic destabilisation


@dataclass
class DestabilizationRow:
    n: int
    periodic_energy: float
    relaxed_energy: float
    drop: float
    best_seed: str


@dataclass
class DestabilizationReport:
    period: int
    omega: float
    tol: float
    period_energy: float
    rows: list[DestabilizationRow]
    verdict: int | None
    periodic_sites: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "period": self.period,
            "omega": self.omega,
            "tol": self.tol,
            "period_energy": self.period_energy,
            "rows": [asdict(r) for r in self.rows],
            "verdict": self.verdict,
            "periodic_sites": [list(map(float, u)) for u in self.periodic_sites],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def rows_csv(self) -> str:
        lines = ["n,periodic_energy,relaxed_energy,drop"]
        for r in self.rows:
            lines.append(",".join([str(r.n), fmt(r.periodic_energy), fmt(r.relaxed_energy), fmt(r.drop)]))
        return "\n".join(lines) + "\n"


def twisted_equator(n_sites: int, sigma0: float, total_twist: float, omega: float) -> np.ndarray:
    """Equator sites whose bonds all advance sigma by total_twist / (n_sites - 1) after R."""
    k = np.arange(n_sites)
    steps = max(n_sites - 1, 1)
    sig = sigma0 + k * (total_twist / steps - TWO_PI * omega)
    return np.array([site_from_angles(0.0, s) for s in sig])


def best_periodic(p: int, tol: float = 1e-8, omega: float = DEFAULT_OMEGA) -> Configuration:
    """Lowest-energy period-p configuration over equator, twisted-equator and pole starts."""
    seeds = {
        "equator": np.array([site_from_angles(0.0, 0.0)] * p),
        "twisted": twisted_equator(p + 1, 0.0, principal_angle(TWO_PI * p * omega), omega)[:p],
        "pole": np.array([site_from_angles(math.pi / 2, 0.0)] * p),
        "mid": np.array([site_from_angles(0.6, 0.0)] * p),
    }
    best = None
    for name, s in seeds.items():
        cfg = relax_ground_state(Configuration(s, Periodic(p)), tol, omega)
        e = window_energy(cfg, omega)
        if best is None or e < best[0] - 1e-12:
            best = (e, name, cfg)
    e, name, cfg = best
    cfg.meta["seed"] = name
    cfg.meta["energy"] = e
    return cfg


def periodic_destabilization(p: int = 1, n_list=None, tol: float = 1e-8, omega: float = DEFAULT_OMEGA,
                             n_max: int = 200) -> DestabilizationReport:
    """Relax windows of n periods with ends pinned to the best periodic configuration."""
    if p < 1:
        raise DomainError("period must be >= 1")
    if n_list is None:
        from .classa_audit import best_return_times

        n_list = set(range(1, 11)) | {n for n, _ in best_return_times(p, omega, 8) if n <= n_max}
    n_list = sorted(set(int(n) for n in n_list))
    per = best_periodic(p, tol, omega)
    base = per.sites[:p]
    e_per = window_energy(Configuration(base, Periodic(p)), omega)
    rows = []
    for n in n_list:
        N = n * p + 1
        tiled = np.concatenate([np.tile(base, (n, 1)), base[:1]])
        psi0, s0 = site_angles(tiled[0])
        _, sN = site_angles(tiled[-1])
        twist = principal_angle(sN - s0 + TWO_PI * omega * (N - 1))
        trial = twisted_equator(N, s0, twist, omega)
        trial[0], trial[-1] = tiled[0], tiled[-1]
        best = None
        for name, s in (("periodic", tiled), ("trial", trial)):
            seed = Configuration(s, FixedEnds())
            for cand_name, cand in ((name + "(seed)", seed), (name, relax_ground_state(seed, tol, omega))):
                e = window_energy(cand, omega)
                if best is None or e < best[0]:
                    best = (e, cand_name)
        e, name = best
        rows.append(DestabilizationRow(n, n * e_per, e, n * e_per - e, name))
    verdict = next((r.n for r in rows if r.drop > 10.0 * tol), None)
    return DestabilizationReport(p, omega, tol, e_per, rows, verdict, list(base))
