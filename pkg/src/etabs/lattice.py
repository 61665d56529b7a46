"""Uniform log-price lattices with Dirichlet boundaries and trapezoid quadrature.

Everything downstream (operators, metrics, spectral expansions, prices) lives on
the interior points of a truncated log-price window. The window edges carry
homogeneous Dirichlet conditions and are never stored as unknowns, which keeps
all operators square and makes barrier walls a special case of the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Lattice",
    "make_lattice",
    "centered_window",
    "trapezoid_weights",
    "cumulative_trapezoid",
]


@dataclass(frozen=True, eq=False)
class Lattice:
    """Interior points of a uniform grid on [x_min, x_max].

    With n interior points the spacing is dx = (x_max - x_min)/(n + 1) and
    points[i] = x_min + (i + 1) dx. The boundary nodes x_min and x_max belong
    to the Dirichlet data, not to the unknowns.
    """

    x_min: float
    x_max: float
    n: int
    dx: float
    points: np.ndarray

    def __post_init__(self) -> None:
        self.points.setflags(write=False)

    def __repr__(self) -> str:
        return (
            f"Lattice(x_min={self.x_min!r}, x_max={self.x_max!r}, "
            f"n={self.n}, dx={self.dx!r})"
        )


def _raw_lattice(x_min: float, dx: float, n: int) -> Lattice:
    """Build a lattice from stored (x_min, dx, n) without re-deriving dx.

    Used by deserialization so that a round-trip reproduces every float
    bit-exactly; x_max is derived and may differ from an original bound by
    one rounding.
    """
    points = x_min + dx * np.arange(1, n + 1, dtype=float)
    return Lattice(x_min=x_min, x_max=x_min + (n + 1) * dx, n=n, dx=dx, points=points)


def make_lattice(x_min: float, x_max: float, n: int) -> Lattice:
    """Uniform lattice of n interior points on (x_min, x_max)."""
    x_min = float(x_min)
    x_max = float(x_max)
    n = int(n)
    if not (math.isfinite(x_min) and math.isfinite(x_max)):
        raise ValueError(f"make_lattice: bounds must be finite, got [{x_min}, {x_max}]")
    if not x_min < x_max:
        raise ValueError(
            f"make_lattice: need x_min < x_max, got x_min={x_min}, x_max={x_max}"
        )
    if n < 3:
        raise ValueError(f"make_lattice: need at least 3 interior points, got n={n}")
    dx = (x_max - x_min) / (n + 1)
    points = x_min + dx * np.arange(1, n + 1, dtype=float)
    return Lattice(x_min=x_min, x_max=x_max, n=n, dx=dx, points=points)


def centered_window(
    x_center: float,
    sigma: float,
    tau: float,
    half_width_sigmas: float,
    n: int,
) -> Lattice:
    """Lattice centered at x_center with half-width = half_width_sigmas * sigma * sqrt(tau).

    This is the standard diffusion-scale truncation: the transition kernel over
    horizon tau has standard deviation sigma * sqrt(tau) in log-price, so the
    window captures half_width_sigmas standard deviations on each side.
    """
    if sigma <= 0:
        raise ValueError(f"centered_window: sigma must be positive, got {sigma}")
    if tau <= 0:
        raise ValueError(f"centered_window: tau must be positive, got {tau}")
    if half_width_sigmas <= 0:
        raise ValueError(
            f"centered_window: half_width_sigmas must be positive, got {half_width_sigmas}"
        )
    half = half_width_sigmas * sigma * math.sqrt(tau)
    return make_lattice(x_center - half, x_center + half, n)


def trapezoid_weights(lat: Lattice) -> np.ndarray:
    """Trapezoid quadrature weights on the interior points.

    With Dirichlet endpoints excluded every interior weight is dx, so the rule
    degenerates to a Riemann sum; the name records the convention rather than
    any nonuniformity.
    """
    w = np.full(lat.n, lat.dx)
    w.setflags(write=False)
    return w


def cumulative_trapezoid(values: np.ndarray, lat: Lattice) -> np.ndarray:
    """Cumulative trapezoid integral of nodal values, zero at the first node.

    Returns T with T[0] = 0 and T[i] the trapezoid approximation of the
    integral from points[0] to points[i]. Anchoring at the first interior node
    shifts any antiderivative by a constant only, which similarity maps and
    metrics absorb into a harmless global factor.
    """
    v = np.asarray(values, dtype=float)
    if v.shape != (lat.n,):
        raise ValueError(
            f"cumulative_trapezoid: expected {lat.n} values, got shape {v.shape}"
        )
    return np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * lat.dx)))
