"""Metric operators certifying pseudo-Hermiticity of the lattice Hamiltonians.

Two constructions of the diagonal metric eta are first-class and
cross-validate each other:

* the continuum formulas, exponential weights sampled at the nodes, faithful
  to the operator theory but only O(dx^2)-accurate on the lattice (the
  pseudo-Hermiticity defect decays even faster, see the tests), and
* a detailed-balance recurrence driven by the matrix entries themselves,
  which makes eta H exactly symmetric and therefore drives the residual to
  round-off.

The recurrence is the workhorse: exact symmetrizability is what lets the
spectral module use a symmetric eigensolver without losing the physics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .hamiltonian import MarketParams, PotentialSpec, TridiagonalOperator
from .lattice import Lattice, cumulative_trapezoid

__all__ = [
    "MetricOperator",
    "eta_exponent",
    "continuum_metric_BS",
    "continuum_metric_generalized",
    "detailed_balance_metric",
    "pseudo_hermiticity_residual",
]

DEFAULT_EXPONENT_CAP = 300.0


@dataclass(frozen=True, eq=False)
class MetricOperator:
    """Strictly positive diagonal weights eta(x_i) defining the modified inner product."""

    eta: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.eta)) or not np.all(self.eta > 0):
            raise ValueError("MetricOperator: eta must be strictly positive and finite")
        self.eta.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.eta.shape[0])

    @property
    def condition_number(self) -> float:
        """max(eta)/min(eta); grows exponentially with the window width."""
        return float(self.eta.max() / self.eta.min())

    @classmethod
    def identity(cls, n: int) -> "MetricOperator":
        return cls(eta=np.ones(n))


def eta_exponent(params: MarketParams) -> float:
    """Decay coefficient of the plain metric: eta(x) = exp(-(1 - 2r/sigma^2) x).

    The same number is the reflection exponent of the image-method barrier
    formulas, which is the algebraic link between the metric and down-and-out
    pricing; tests assert the identity exactly.
    """
    return 1.0 - 2.0 * params.r / params.sigma**2


def _guard_exponent(expo: np.ndarray, cap: float, where: str) -> None:
    worst = float(np.abs(expo).max())
    if worst > cap:
        raise ValueError(
            f"{where}: metric overflow: shrink window or renormalize "
            f"(max |exponent| = {worst:.3g} exceeds cap {cap:.3g})"
        )


def continuum_metric_BS(
    params: MarketParams, lat: Lattice, cap: float = DEFAULT_EXPONENT_CAP
) -> MetricOperator:
    """Sampled continuum metric eta(x_i) = exp(-(1 - 2r/sigma^2) x_i)."""
    expo = -eta_exponent(params) * lat.points
    _guard_exponent(expo, cap, "continuum_metric_BS")
    return MetricOperator(eta=np.exp(expo))


def continuum_metric_generalized(
    sigma: float, V: PotentialSpec, lat: Lattice, cap: float = DEFAULT_EXPONENT_CAP
) -> MetricOperator:
    """Sampled metric exp((2/sigma^2) int V dy - x) for the generalized Hamiltonian.

    Shares its antiderivative anchor (the first interior node) with
    build_rho_generalized, so eta = rho^2 holds entrywise.
    """
    if sigma <= 0 or not math.isfinite(sigma):
        raise ValueError(
            f"continuum_metric_generalized: sigma must be positive and finite, got {sigma}"
        )
    v = V.realize(lat)
    expo = 2.0 * cumulative_trapezoid(v, lat) / sigma**2 - lat.points
    _guard_exponent(expo, cap, "continuum_metric_generalized")
    return MetricOperator(eta=np.exp(expo))


def detailed_balance_metric(H: TridiagonalOperator, eta0: float = 1.0) -> MetricOperator:
    """Discrete metric from the detailed-balance recurrence eta[i+1] = eta[i] upper[i]/lower[i].

    The resulting diagonal metric satisfies eta[i] upper[i] = eta[i+1] lower[i]
    identically, i.e. eta H is exactly symmetric, which is the lattice version
    of pseudo-Hermiticity with equality instead of an O(dx^2) defect.

    The recurrence only sees matrix entries, so the overall scale is free;
    eta0 sets eta at the first interior node. Callers who want the continuum
    normalization pass the continuum formula's value there. The
    pseudo-Hermiticity residual is invariant under the choice.

    Preconditions: every upper[i], lower[i] pair nonzero with matching signs.
    For the operators built here that holds whenever dx is below
    sigma^2 / max|sigma^2/2 - V|; the error message reports the estimated
    bound when the grid is too coarse.
    """
    if not (math.isfinite(eta0) and eta0 > 0):
        raise ValueError(f"detailed_balance_metric: eta0 must be positive, got {eta0}")
    u = H.upper
    lo = H.lower
    bad = (u == 0) | (lo == 0) | (np.sign(u) != np.sign(lo))
    if np.any(bad):
        i = int(np.argmax(bad))
        dx = H.lattice.dx
        # estimate the dx bound from the stencil entries at the offending index:
        # a = sigma^2/(2 dx^2) ~ -(upper+lower)/2, |b| = |sigma^2/2 - V|/(2 dx)
        # ~ |upper - lower|/2, and the sign condition is |b| < a, i.e.
        # dx < dx * a/|b|.
        a_est = -(u[i] + lo[i]) / 2.0
        b_est = abs(u[i] - lo[i]) / 2.0
        hint = ""
        if a_est > 0 and b_est > 0:
            hint = f"; need dx < {dx * a_est / b_est:.3g} (dx = {dx:.3g})"
        raise ValueError(
            "detailed_balance_metric: grid too coarse for symmetrization at "
            f"index {i}: upper={u[i]:.6g}, lower={lo[i]:.6g} must be nonzero "
            f"with matching signs{hint}"
        )
    # log-space accumulation keeps wide windows from overflowing the running
    # product before the final exponential
    log_eta = np.concatenate(([0.0], np.cumsum(np.log(u / lo)))) + math.log(eta0)
    with np.errstate(over="ignore"):
        eta = np.exp(log_eta)
    if not np.all(np.isfinite(eta)) or not np.all(eta > 0):
        raise ValueError(
            "detailed_balance_metric: metric overflow: shrink window or renormalize "
            f"(log eta spans [{log_eta.min():.3g}, {log_eta.max():.3g}])"
        )
    return MetricOperator(eta=eta)


def pseudo_hermiticity_residual(H: TridiagonalOperator, metric: MetricOperator) -> float:
    """Scaled residual ||eta H eta^{-1} - H^T||_inf / ||H||_inf.

    All operators here are real, so the adjoint is the transpose. This is a
    pure measurement: large residuals are reported, never raised. The value is
    invariant under rescaling eta by any positive constant.
    """
    eta = metric.eta
    if eta.shape != (H.n,):
        raise ValueError(
            f"pseudo_hermiticity_residual: metric length {eta.shape[0]} "
            f"does not match operator n={H.n}"
        )
    # conjugation leaves the diagonal alone; only the off-diagonal bands differ
    d_up = eta[:-1] * H.upper / eta[1:] - H.lower
    d_lo = eta[1:] * H.lower / eta[:-1] - H.upper
    rows = np.zeros(H.n)
    rows[:-1] += np.abs(d_up)
    rows[1:] += np.abs(d_lo)
    return float(rows.max() / H.infinity_norm())
