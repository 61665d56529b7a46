"""Discretized Black-Scholes Hamiltonians and similarity maps.

The four operators built here share one discretization: centered 3-point
second derivatives, centered 2-point first derivatives, Dirichlet boundaries
dropped from the stencil. The log-price substitution S = e^x turns the pricing
PDE into a non-Hermitian Schroedinger problem; the builders below produce

* H_BS, the plain Black-Scholes Hamiltonian,
* h_BS, its Hermitian similarity partner (free Laplacian plus a constant),
* the generalized H with a security-dependent potential in drift and diagonal,
* H_eff, the plain Hamiltonian with a potential added to the diagonal only,

together with the similarity maps rho that connect them to symmetric form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .lattice import Lattice, _raw_lattice, cumulative_trapezoid

__all__ = [
    "MarketParams",
    "PotentialSpec",
    "TridiagonalOperator",
    "SimilarityMap",
    "build_H_BS",
    "build_h_BS",
    "build_H_generalized",
    "build_H_eff",
    "build_rho",
    "build_rho_generalized",
    "conjugate",
    "operator_to_dict",
    "operator_from_dict",
]

DEFAULT_WALL_HEIGHT = 1.0e6


@dataclass(frozen=True)
class MarketParams:
    """Market inputs: volatility sigma (per sqrt-year) and risk-free rate r (per year)."""

    sigma: float
    r: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"MarketParams: sigma must be positive and finite, got {self.sigma}")
        if not (math.isfinite(self.r) and self.r >= 0):
            raise ValueError(f"MarketParams: r must be finite and nonnegative, got {self.r}")


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """A security-dependent potential V(x), realized on a lattice on demand.

    kind is one of "zero", "constant", "tabulated", "barrier_mask". The
    barrier_mask kind is a large finite wall outside an active interval; it
    exists to cross-check the domain-restriction barrier pricers and is not
    the production barrier path.
    """

    kind: str
    c: float = 0.0
    values: np.ndarray | None = None
    x_lo: float = -math.inf
    x_hi: float = math.inf
    wall: float = DEFAULT_WALL_HEIGHT

    def __post_init__(self) -> None:
        if self.kind not in ("zero", "constant", "tabulated", "barrier_mask"):
            raise ValueError(f"PotentialSpec: unknown kind {self.kind!r}")
        if self.values is not None:
            self.values.setflags(write=False)

    @staticmethod
    def zero() -> "PotentialSpec":
        return PotentialSpec(kind="zero")

    @staticmethod
    def constant(c: float) -> "PotentialSpec":
        if not math.isfinite(c):
            raise ValueError(f"PotentialSpec.constant: value must be finite, got {c}")
        return PotentialSpec(kind="constant", c=float(c))

    @staticmethod
    def tabulated(values: np.ndarray) -> "PotentialSpec":
        v = np.array(values, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("PotentialSpec.tabulated: all values must be finite")
        return PotentialSpec(kind="tabulated", values=v)

    @staticmethod
    def barrier_mask(x_lo: float, x_hi: float, wall: float = DEFAULT_WALL_HEIGHT) -> "PotentialSpec":
        if not x_lo < x_hi:
            raise ValueError(
                f"PotentialSpec.barrier_mask: need x_lo < x_hi, got [{x_lo}, {x_hi}]"
            )
        if not (math.isfinite(wall) and wall > 0):
            raise ValueError(f"PotentialSpec.barrier_mask: wall must be positive, got {wall}")
        return PotentialSpec(kind="barrier_mask", x_lo=float(x_lo), x_hi=float(x_hi), wall=float(wall))

    def realize(self, lat: Lattice) -> np.ndarray:
        """Sample the potential at the lattice nodes (no cell averaging)."""
        if self.kind == "zero":
            return np.zeros(lat.n)
        if self.kind == "constant":
            return np.full(lat.n, self.c)
        if self.kind == "tabulated":
            assert self.values is not None
            if self.values.shape != (lat.n,):
                raise ValueError(
                    f"PotentialSpec.realize: tabulated length {self.values.shape[0]} "
                    f"does not match lattice n={lat.n}"
                )
            return self.values.copy()
        inside = (lat.points >= self.x_lo) & (lat.points <= self.x_hi)
        return np.where(inside, 0.0, self.wall)


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Real tridiagonal matrix tied to a lattice.

    diag has length n; upper[i] = H[i, i+1] and lower[i] = H[i+1, i] have
    length n - 1. First-order operators are stored in the same container with
    one band identically zero.
    """

    diag: np.ndarray
    upper: np.ndarray
    lower: np.ndarray
    lattice: Lattice

    def __post_init__(self) -> None:
        n = self.lattice.n
        if self.diag.shape != (n,) or self.upper.shape != (n - 1,) or self.lower.shape != (n - 1,):
            raise ValueError(
                "TridiagonalOperator: band shapes "
                f"{self.diag.shape}, {self.upper.shape}, {self.lower.shape} "
                f"inconsistent with lattice n={n}"
            )
        for name, band in (("diag", self.diag), ("upper", self.upper), ("lower", self.lower)):
            if not np.all(np.isfinite(band)):
                raise ValueError(f"TridiagonalOperator: non-finite entries in {name}")
            band.setflags(write=False)

    @property
    def n(self) -> int:
        return self.lattice.n

    def apply(self, vec: np.ndarray) -> np.ndarray:
        """Matrix-vector product H @ vec."""
        v = np.asarray(vec, dtype=float)
        if v.shape != (self.n,):
            raise ValueError(f"apply: expected vector of length {self.n}, got shape {v.shape}")
        out = self.diag * v
        out[:-1] += self.upper * v[1:]
        out[1:] += self.lower * v[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return (
            np.diag(self.diag)
            + np.diag(self.upper, 1)
            + np.diag(self.lower, -1)
        )

    def infinity_norm(self) -> float:
        rows = np.abs(self.diag).copy()
        rows[:-1] += np.abs(self.upper)
        rows[1:] += np.abs(self.lower)
        return float(rows.max())

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.upper, self.lower))


@dataclass(frozen=True, eq=False)
class SimilarityMap:
    """Positive nodal weights rho with rho H rho^{-1} symmetric in the continuum."""

    rho: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.rho)) or not np.all(self.rho > 0):
            raise ValueError("SimilarityMap: rho must be strictly positive and finite")
        self.rho.setflags(write=False)

    def inverse(self) -> "SimilarityMap":
        return SimilarityMap(rho=1.0 / self.rho)


def build_H_BS(params: MarketParams, lat: Lattice) -> TridiagonalOperator:
    """Plain Black-Scholes Hamiltonian: -(sigma^2/2) d2/dx2 + (sigma^2/2 - r) d/dx + r."""
    sig2 = params.sigma**2
    a = sig2 / (2 * lat.dx**2)
    b = (sig2 / 2 - params.r) / (2 * lat.dx)
    diag = np.full(lat.n, sig2 / lat.dx**2 + params.r)
    upper = np.full(lat.n - 1, -a + b)
    lower = np.full(lat.n - 1, -a - b)
    return TridiagonalOperator(diag=diag, upper=upper, lower=lower, lattice=lat)


def build_h_BS(params: MarketParams, lat: Lattice) -> TridiagonalOperator:
    """Hermitian similarity partner of H_BS: free Laplacian plus (sigma^2/2 + r)^2/(2 sigma^2)."""
    sig2 = params.sigma**2
    a = sig2 / (2 * lat.dx**2)
    const = (sig2 / 2 + params.r) ** 2 / (2 * sig2)
    diag = np.full(lat.n, 2 * a + const)
    off = np.full(lat.n - 1, -a)
    return TridiagonalOperator(diag=diag, upper=off, lower=off.copy(), lattice=lat)


def build_H_generalized(sigma: float, V: PotentialSpec, lat: Lattice) -> TridiagonalOperator:
    """Generalized Hamiltonian with V(x) replacing the rate in drift and diagonal.

    Row k discretizes -(sigma^2/2) u'' + (sigma^2/2 - V(x_k)) u' + V(x_k) u at
    x_k, so each band entry carries the V sample of its own row: upper[i] uses
    V(x_i) and lower[i], which sits in row i + 1, uses V(x_{i+1}).
    """
    if sigma <= 0 or not math.isfinite(sigma):
        raise ValueError(f"build_H_generalized: sigma must be positive and finite, got {sigma}")
    v = V.realize(lat)
    sig2 = sigma**2
    a = sig2 / (2 * lat.dx**2)
    b = (sig2 / 2 - v) / (2 * lat.dx)
    diag = sig2 / lat.dx**2 + v
    upper = -a + b[:-1]
    lower = -a - b[1:]
    return TridiagonalOperator(diag=diag, upper=upper, lower=lower, lattice=lat)


def build_H_eff(params: MarketParams, V: PotentialSpec, lat: Lattice) -> TridiagonalOperator:
    """Effective Hamiltonian H_BS + V(x): potential on the diagonal, drift untouched."""
    H = build_H_BS(params, lat)
    v = V.realize(lat)
    return TridiagonalOperator(
        diag=H.diag + v,
        upper=H.upper,
        lower=H.lower,
        lattice=lat,
    )


def build_rho(params: MarketParams, lat: Lattice) -> SimilarityMap:
    """Similarity map rho(x) = exp(-(1/2 - r/sigma^2) x) for the plain Hamiltonian."""
    expo = -(0.5 - params.r / params.sigma**2) * lat.points
    return SimilarityMap(rho=np.exp(expo))


def build_rho_generalized(sigma: float, V: PotentialSpec, lat: Lattice) -> SimilarityMap:
    """Similarity map exp((1/sigma^2) int V dy - x/2) for the generalized Hamiltonian.

    The antiderivative is the cumulative trapezoid anchored at the first
    interior node; any other anchor multiplies rho by a harmless global
    constant.
    """
    if sigma <= 0 or not math.isfinite(sigma):
        raise ValueError(f"build_rho_generalized: sigma must be positive and finite, got {sigma}")
    v = V.realize(lat)
    integral = cumulative_trapezoid(v, lat)
    expo = integral / sigma**2 - lat.points / 2
    return SimilarityMap(rho=np.exp(expo))


def conjugate(H: TridiagonalOperator, rho: SimilarityMap) -> TridiagonalOperator:
    """Entrywise similarity transform (rho H rho^{-1})_{ij} = rho_i H_{ij} / rho_j."""
    r = rho.rho
    if r.shape != (H.n,):
        raise ValueError(
            f"conjugate: rho length {r.shape[0]} does not match operator n={H.n}"
        )
    return TridiagonalOperator(
        diag=H.diag.copy(),
        upper=r[:-1] * H.upper / r[1:],
        lower=r[1:] * H.lower / r[:-1],
        lattice=H.lattice,
    )


def operator_to_dict(H: TridiagonalOperator) -> dict:
    """JSON-ready document {n, dx, x_min, diag, upper, lower}.

    Floats serialize via repr (shortest round-trip decimal), so a dump/load
    cycle reproduces every entry bit-exactly.
    """
    return {
        "n": H.n,
        "dx": H.lattice.dx,
        "x_min": H.lattice.x_min,
        "diag": H.diag.tolist(),
        "upper": H.upper.tolist(),
        "lower": H.lower.tolist(),
    }


def operator_from_dict(doc: dict) -> TridiagonalOperator:
    """Inverse of operator_to_dict; rebuilds the lattice from (x_min, dx, n)."""
    required = ("n", "dx", "x_min", "diag", "upper", "lower")
    missing = [k for k in required if k not in doc]
    if missing:
        raise ValueError(f"operator_from_dict: missing keys {missing}")
    n = int(doc["n"])
    lat = _raw_lattice(float(doc["x_min"]), float(doc["dx"]), n)
    return TridiagonalOperator(
        diag=np.array(doc["diag"], dtype=float),
        upper=np.array(doc["upper"], dtype=float),
        lower=np.array(doc["lower"], dtype=float),
        lattice=lat,
    )
