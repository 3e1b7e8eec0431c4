"""The hourglass manifold: S^1 x S^2 glued by an irrational rotation.

Points of the universal cover R x S^2 are written (x, y, z) with y in [-1, 1] and
z = sqrt(1 - y^2) e^{i sigma}.  The metric is

    (1 + y^2) * sqrt(dx^2 + dy^2 + |dz|^2),

so for a fixed x the sphere has an "hourglass" profile: the parallel at height y has
length 2 pi (1 + y^2) sqrt(1 - y^2), largest at y^2 = 1/3.

The quotient identifies (x + 1, y, sigma - 2 pi omega) with (x, y, sigma), see
:func:`deck_transform`.
"""
from __future__ import annotations

import configparser
import functools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .errors import DegeneratePoleError, DomainError

TWO_PI = 2.0 * math.pi
DEFAULT_OMEGA = 1.0 / TWO_PI
GOLDEN_OMEGA = (math.sqrt(5.0) - 1.0) / 2.0
OMEGA_PRESETS = {"default": DEFAULT_OMEGA, "federer": DEFAULT_OMEGA, "golden": GOLDEN_OMEGA}

POLE_SWITCH = 0.9
QUADRATURE_POINTS = 5

# full meridian (pole to pole) length: int_{-1}^{1} (1 + y^2) / sqrt(1 - y^2) dy
MERIDIAN_LENGTH = 1.5 * math.pi


def looks_rational(omega: float, max_denominator: int = 10**6, eps: float = 1e-12) -> bool:
    """True when omega agrees with a fraction of denominator <= max_denominator to ~eps."""
    frac = Fraction(omega).limit_denominator(max_denominator)
    return abs(omega - frac.numerator / frac.denominator) <= eps * max(1.0, abs(omega))


@dataclass(frozen=True)
class ManifoldParams:
    """Gluing rotation number plus the numerical chart/quadrature policy."""

    omega: float = DEFAULT_OMEGA
    pole_switch: float = POLE_SWITCH
    quadrature_points: int = QUADRATURE_POINTS
    rational_flag: bool = field(init=False)

    def __post_init__(self):
        if not math.isfinite(self.omega):
            raise DomainError(f"omega must be finite, got {self.omega!r}")
        if not 0.0 < self.pole_switch < 1.0:
            raise DomainError("pole_switch must lie in (0, 1)")
        if self.quadrature_points < 1:
            raise DomainError("quadrature_points must be positive")
        object.__setattr__(self, "rational_flag", looks_rational(self.omega))

    @functools.cached_property
    def fiber_diameter_B(self) -> float:
        return fiber_diameter()

    @classmethod
    def from_config(cls, path) -> "ManifoldParams":
        """Read an INI-style file with a ``[manifold]`` section."""
        parser = configparser.ConfigParser()
        with open(Path(path)) as fh:
            parser.read_file(fh)
        return cls.from_mapping(parser["manifold"] if parser.has_section("manifold") else {})

    @classmethod
    def from_mapping(cls, data) -> "ManifoldParams":
        kwargs = {}
        if "omega" in data:
            kwargs["omega"] = parse_omega(data["omega"])
        if "pole_switch" in data:
            kwargs["pole_switch"] = float(data["pole_switch"])
        if "quadrature_points" in data:
            kwargs["quadrature_points"] = int(data["quadrature_points"])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        return {
            "omega": self.omega,
            "pole_switch": self.pole_switch,
            "quadrature_points": self.quadrature_points,
            "rational_flag": self.rational_flag,
        }


def parse_omega(value) -> float:
    """Accept a float, a preset name ("golden", "default") or a fraction string like "1/7"."""
    if isinstance(value, (int, float)):
        return float(value)
    text = str(value).strip()
    if text.lower() in OMEGA_PRESETS:
        return OMEGA_PRESETS[text.lower()]
    if "/" in text:
        num, den = text.split("/", 1)
        return float(num) / float(den)
    return float(text)


@dataclass(frozen=True)
class ChartPoint:
    """A point of the universal cover in (x, y, sigma) coordinates.

    sigma is a continuous lift (not reduced mod 2 pi).  At the poles (|y| = 1) sigma
    carries no information and is flagged as degenerate.
    """

    x: float
    y: float
    sigma: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.sigma)):
            raise DomainError(f"non-finite chart point {self!r}")
        if abs(self.y) > 1.0 + 1e-12:
            raise DomainError(f"|y| must be <= 1, got y={self.y!r}")
        if abs(self.y) > 1.0:
            object.__setattr__(self, "y", math.copysign(1.0, self.y))

    @property
    def degenerate(self) -> bool:
        return abs(self.y) >= 1.0

    @property
    def z(self) -> complex:
        r = math.sqrt(max(0.0, 1.0 - self.y * self.y))
        return complex(r * math.cos(self.sigma), r * math.sin(self.sigma))

    def ambient(self) -> tuple[float, float, float]:
        """(y, z1, z2) on the unit sphere."""
        z = self.z
        return (self.y, z.real, z.imag)

    @classmethod
    def from_ambient(cls, x: float, y: float, z1: float, z2: float, sigma_ref: float | None = None) -> "ChartPoint":
        """Recover sigma from z; when sigma_ref is given pick the lift nearest to it."""
        sigma = math.atan2(z2, z1) if (z1 or z2) else (sigma_ref if sigma_ref is not None else 0.0)
        if sigma_ref is not None:
            sigma = unwrap_near(sigma, sigma_ref)
        return cls(x, max(-1.0, min(1.0, y)), sigma)

    def csv_row(self) -> str:
        return ",".join(fmt(v) for v in (self.x, self.y, self.sigma))

    @classmethod
    def from_csv_row(cls, row: str) -> "ChartPoint":
        x, y, s = (float(v) for v in row.split(","))
        return cls(x, y, s)


@dataclass(frozen=True)
class TangentState:
    """A point with coordinate velocities (per unit parameter time).

    ``ambient`` optionally holds (y, z1, z2, vy, vz1, vz2), the representation used
    near the poles where the longitude chart degenerates.
    """

    point: ChartPoint
    vx: float
    vy: float
    vsigma: float
    ambient: tuple | None = None

    def __post_init__(self):
        vals = (self.vx, self.vy, self.vsigma)
        if not all(math.isfinite(v) for v in vals):
            raise DomainError("velocity components must be finite")
        if self.ambient is not None:
            y, z1, z2, *_ = self.ambient
            if abs(y * y + z1 * z1 + z2 * z2 - 1.0) > 1e-9:
                raise DomainError("ambient representation is off the unit sphere")

    @classmethod
    def at(cls, x, y, sigma, vx, vy, vsigma) -> "TangentState":
        return cls(ChartPoint(x, y, sigma), vx, vy, vsigma)

    @classmethod
    def from_ambient(cls, x, w, vx, wdot, sigma_ref: float | None = None) -> "TangentState":
        """Build from ambient position w = (y, z1, z2) and velocity wdot."""
        y, z1, z2 = (float(v) for v in w)
        vy, vz1, vz2 = (float(v) for v in wdot)
        point = ChartPoint.from_ambient(x, y, z1, z2, sigma_ref)
        r2 = z1 * z1 + z2 * z2
        vsigma = (z1 * vz2 - z2 * vz1) / r2 if r2 > 0.0 else 0.0
        return cls(point, float(vx), vy, vsigma, (y, z1, z2, vy, vz1, vz2))

    def to_ambient(self) -> tuple:
        """(y, z1, z2, vy, vz1, vz2), computed from the chart if not stored."""
        if self.ambient is not None:
            return self.ambient
        p = self.point
        if p.degenerate:
            raise DegeneratePoleError("pole state without ambient representation")
        r = math.sqrt(1.0 - p.y * p.y)
        c, s = math.cos(p.sigma), math.sin(p.sigma)
        dr = -p.y * self.vy / r
        return (p.y, r * c, r * s, self.vy, dr * c - r * s * self.vsigma, dr * s + r * c * self.vsigma)

    def as_array(self) -> np.ndarray:
        p = self.point
        return np.array([p.x, p.y, p.sigma, self.vx, self.vy, self.vsigma])


def speed(state: TangentState) -> float:
    """ds/dt = (1 + y^2) sqrt(vx^2 + vy^2 / (1 - y^2) + (1 - y^2) vsigma^2)."""
    y = state.point.y
    if abs(y) < 1.0 and state.ambient is None:
        one_m = 1.0 - y * y
        q = state.vx**2 + state.vy**2 / one_m + one_m * state.vsigma**2
        return (1.0 + y * y) * math.sqrt(q)
    if state.ambient is None:
        raise DegeneratePoleError("speed at a pole needs the ambient representation")
    ya, _, _, vy, vz1, vz2 = state.ambient
    return (1.0 + ya * ya) * math.sqrt(state.vx**2 + vy * vy + vz1 * vz1 + vz2 * vz2)


def deck_transform(p: ChartPoint, m: int, omega: float = DEFAULT_OMEGA) -> ChartPoint:
    """(x, y, sigma) -> (x + m, y, sigma - 2 pi m omega)."""
    if m == 0:
        return p
    return ChartPoint(p.x + m, p.y, p.sigma - TWO_PI * m * omega)


def parallel_circumference(y: float) -> float:
    if abs(y) > 1.0:
        raise DomainError(f"|y| must be <= 1, got {y!r}")
    return TWO_PI * (1.0 + y * y) * math.sqrt(1.0 - y * y)


def hourglass_profile(u):
    """f(u) = (1 + u) sqrt(1 - u) and f'(u) for u = y^2 in [0, 1].

    Works elementwise on arrays.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0.0) | (u_arr > 1.0)):
        raise DomainError("hourglass_profile needs 0 <= u <= 1")
    root = np.sqrt(1.0 - u_arr)
    f = (1.0 + u_arr) * root
    fprime = root * (0.5 - 1.5 * u_arr)
    if np.ndim(u) == 0:
        return float(f), float(fprime)
    return f, fprime


def meridian_length(y0: float) -> float:
    """Length of the meridian arc from the equator to height y0 (same longitude)."""
    if abs(y0) > 1.0:
        raise DomainError(f"|y0| must be <= 1, got {y0!r}")
    psi = abs(math.asin(y0))
    return 1.5 * psi - 0.25 * math.sin(2.0 * psi)


def principal_angle(theta: float) -> float:
    """Representative of theta mod 2 pi in (-pi, pi]; ties go to +pi."""
    r = math.remainder(theta, TWO_PI)
    if r <= -math.pi:
        r += TWO_PI
    return r


def unwrap_near(sigma: float, ref: float) -> float:
    """sigma + 2 pi k closest to ref."""
    return sigma + TWO_PI * round((ref - sigma) / TWO_PI)


def fmt(v: float) -> str:
    return format(float(v), ".17g")


@functools.lru_cache(maxsize=None)
def fiber_diameter(n_nodes: int = 33, tol: float = 1e-9, samples: int = 5) -> float:
    """Diameter of one fiber {x = 0} under the induced hourglass metric.

    Every sampled pair (psi1, psi2, dsigma) is joined by a minimised fiber-internal
    path (x frozen); B is the largest of these distances.  Rotational symmetry lets
    the first longitude be 0.
    """
    from .variational import fiber_distance

    half = math.pi / 2.0
    lats = np.linspace(-half, half, samples)
    dsig = np.linspace(0.0, math.pi, samples)
    best = 0.0
    for i, a in enumerate(lats):
        for b in lats[i:]:
            for ds in dsig:
                if (abs(a) == half or abs(b) == half) and ds > 0.0:
                    continue
                d = fiber_distance(math.sin(a), 0.0, math.sin(b), float(ds), n_nodes=n_nodes, tol=tol)
                best = max(best, d)
    return best
