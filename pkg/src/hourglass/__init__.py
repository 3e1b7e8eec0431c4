"""Geodesics and minimising orbits on the hourglass suspension of a circle rotation."""

__version__ = "0.1.0"

from .manifold import (  # noqa: E402
    DEFAULT_OMEGA,
    GOLDEN_OMEGA,
    ChartPoint,
    ManifoldParams,
    TangentState,
    deck_transform,
    fiber_diameter,
    hourglass_profile,
    parallel_circumference,
    speed,
)
from .geodesic_flow import (  # noqa: E402
    Invariants,
    Trajectory,
    conserved_quantities,
    integrate_geodesic,
    lagrangian_L2,
    reparametrization_check,
    ydot_from_invariants,
)
from .variational import (  # noqa: E402
    DiscreteCurve,
    HomotopyClass,
    curve_length,
    geodesic_bvp,
    length_gradient,
    n_cover,
    tonelli_minimize,
)

__all__ = [
    "DEFAULT_OMEGA",
    "GOLDEN_OMEGA",
    "ChartPoint",
    "ManifoldParams",
    "TangentState",
    "deck_transform",
    "fiber_diameter",
    "hourglass_profile",
    "parallel_circumference",
    "speed",
    "Invariants",
    "Trajectory",
    "conserved_quantities",
    "integrate_geodesic",
    "lagrangian_L2",
    "reparametrization_check",
    "ydot_from_invariants",
    "DiscreteCurve",
    "HomotopyClass",
    "curve_length",
    "geodesic_bvp",
    "length_gradient",
    "n_cover",
    "tonelli_minimize",
]
