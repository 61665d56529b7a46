"""Spectral decomposition of the pseudo-Hermitian Hamiltonians and pricing kernels.

Pipeline: conjugate the operator to exactly symmetric form with the square
root of the detailed-balance metric, diagonalize with an in-repo implicit
shift QL solver, then undo the scaling so the eigenfunctions are orthonormal
and complete in the eta-weighted inner product. The pricing kernel is the
matrix of exp(-tau H) composed with the quadrature, so a price is literally
kernel @ payoff.

The eigensolver is deliberately self-contained (no external linear-algebra
dependency on the core path): symmetric tridiagonal QL with implicit shifts,
eigenvectors accumulated alongside. It runs serially and is bitwise
deterministic for identical inputs.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit

from .hamiltonian import TridiagonalOperator
from .lattice import Lattice, trapezoid_weights
from .metric import MetricOperator, detailed_balance_metric

__all__ = [
    "SpectralDecomposition",
    "KernelMatrix",
    "symmetrize",
    "eigendecompose",
    "eigenvalues_only",
    "eta_normalize",
    "decompose",
    "pricing_kernel",
    "pseudo_inner_product",
]

_MAX_QL_ITERATIONS = 50
_DECAY_WARN_THRESHOLD = 30.0


@njit(cache=True)
def _ql_implicit_shift(d, e, V, want_vectors):
    """Implicit-shift QL sweep for a symmetric tridiagonal matrix.

    d: diagonal (modified in place, becomes eigenvalues, unsorted).
    e: off-diagonal padded to length n with a trailing zero (destroyed).
    V: workspace whose rows accumulate eigenvectors when want_vectors is set.
    Returns 0 on success, or 1 + (index of the eigenvalue that failed to
    converge within the iteration limit).
    """
    n = d.shape[0]
    eps = 2.220446049250313e-16
    for l in range(n):
        iteration = 0
        while True:
            # find the first negligible off-diagonal at or after l
            m = n - 1
            for mm in range(l, n - 1):
                dd = abs(d[mm]) + abs(d[mm + 1])
                if abs(e[mm]) <= eps * dd:
                    m = mm
                    break
            if m == l:
                break
            iteration += 1
            if iteration > _MAX_QL_ITERATIONS:
                return l + 1
            # implicit shift from the 2x2 block at l
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            rh = np.hypot(g, 1.0)
            if g >= 0.0:
                g = d[m] - d[l] + e[l] / (g + rh)
            else:
                g = d[m] - d[l] + e[l] / (g - rh)
            s = 1.0
            c = 1.0
            p = 0.0
            underflow = False
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                rh = np.hypot(f, g)
                e[i + 1] = rh
                if rh == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    underflow = True
                    break
                s = f / rh
                c = g / rh
                g = d[i + 1] - p
                rh = (d[i] - g) * s + 2.0 * c * b
                p = s * rh
                d[i + 1] = g + p
                g = c * rh - b
                if want_vectors:
                    for k in range(n):
                        fv = V[i + 1, k]
                        V[i + 1, k] = s * V[i, k] + c * fv
                        V[i, k] = c * V[i, k] - s * fv
            if not underflow:
                d[l] -= p
                e[l] = g
                e[m] = 0.0
    return 0


def symmetrize(
    H: TridiagonalOperator, metric: MetricOperator
) -> tuple[TridiagonalOperator, np.ndarray]:
    """Conjugate H by diag(sqrt(eta)): S_ij = sqrt(eta_i) H_ij / sqrt(eta_j).

    With the detailed-balance metric the two off-diagonal bands of S agree to
    round-off; they are averaged so the stored operator is exactly symmetric.
    Returns (S, scaling) with scaling = sqrt(eta).
    """
    eta = metric.eta
    if eta.shape != (H.n,):
        raise ValueError(
            f"symmetrize: metric length {eta.shape[0]} does not match operator n={H.n}"
        )
    ratio = np.sqrt(eta[:-1] / eta[1:])
    s_up = ratio * H.upper
    s_lo = H.lower / ratio
    off = 0.5 * (s_up + s_lo)
    S = TridiagonalOperator(
        diag=H.diag.copy(), upper=off, lower=off.copy(), lattice=H.lattice
    )
    return S, np.sqrt(eta)


def eigendecompose(S: TridiagonalOperator) -> tuple[np.ndarray, np.ndarray]:
    """Full eigensystem of a symmetric tridiagonal operator.

    Returns (eigenvalues ascending, vectors) where vectors[k] is the unit
    eigenvector of eigenvalues[k]; the rows are mutually orthonormal in the
    plain unweighted sense.
    """
    if not S.is_symmetric():
        dev = float(np.abs(S.upper - S.lower).max())
        raise ValueError(
            f"eigendecompose: operator is not symmetric (max |upper - lower| = {dev:.3g})"
        )
    n = S.n
    d = S.diag.copy()
    e = np.concatenate((S.upper, [0.0]))
    V = np.eye(n)
    status = _ql_implicit_shift(d, e, V, True)
    if status != 0:
        raise RuntimeError(
            f"eigendecompose: QL failed to converge for eigenvalue index {status - 1} "
            f"within {_MAX_QL_ITERATIONS} iterations"
        )
    order = np.argsort(d, kind="stable")
    return d[order], V[order]


def eigenvalues_only(S: TridiagonalOperator) -> np.ndarray:
    """Eigenvalues of a symmetric tridiagonal operator without eigenvectors.

    Same QL iteration as eigendecompose with the O(n^2) rotation replay
    skipped; used where only the spectrum matters (refinement ladders,
    spectral pairing summaries).
    """
    if not S.is_symmetric():
        dev = float(np.abs(S.upper - S.lower).max())
        raise ValueError(
            f"eigenvalues_only: operator is not symmetric (max |upper - lower| = {dev:.3g})"
        )
    d = S.diag.copy()
    e = np.concatenate((S.upper, [0.0]))
    V = np.zeros((1, 1))
    status = _ql_implicit_shift(d, e, V, False)
    if status != 0:
        raise RuntimeError(
            f"eigenvalues_only: QL failed to converge for eigenvalue index {status - 1} "
            f"within {_MAX_QL_ITERATIONS} iterations"
        )
    return np.sort(d)


def eta_normalize(
    vectors: np.ndarray, metric: MetricOperator, weights: np.ndarray
) -> np.ndarray:
    """Rescale unit eigenvectors into eta-orthonormal eigenfunctions.

    psi_k[i] = v_k[i] / sqrt(eta_i w_i) turns plain orthonormality of the
    rows into sum_i w_i eta_i psi_m[i] psi_n[i] = delta_mn with no further
    normalization sweep.
    """
    scale = np.sqrt(metric.eta * weights)
    return vectors / scale[None, :]


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Real eigenvalues with eta-orthonormal eigenfunctions on a lattice."""

    eigenvalues: np.ndarray
    eigenfunctions: np.ndarray  # row k is psi_k sampled on the lattice
    metric: MetricOperator
    weights: np.ndarray
    lattice: Lattice

    def __post_init__(self) -> None:
        self.eigenvalues.setflags(write=False)
        self.eigenfunctions.setflags(write=False)

    @property
    def n(self) -> int:
        return self.lattice.n

    def gram_deviation(self) -> float:
        """Max deviation of the eta-Gram matrix from the identity."""
        psi = self.eigenfunctions
        weighted = psi * (self.metric.eta * self.weights)[None, :]
        gram = psi @ weighted.T
        return float(np.abs(gram - np.eye(self.n)).max())

    def completeness_deviation(self) -> float:
        """Max deviation of sum_k psi_k[i] psi_k[j] eta_j w_j from delta_ij."""
        psi = self.eigenfunctions
        weighted = psi * (self.metric.eta * self.weights)[None, :]
        resolution = psi.T @ weighted
        return float(np.abs(resolution - np.eye(self.n)).max())

    def propagate(self, tau: float, g: np.ndarray) -> np.ndarray:
        """Apply exp(-tau H) to nodal values g via the eigenfunction expansion.

        Two O(n^2) passes; never materializes the kernel matrix.
        """
        coeff = (self.eigenfunctions * (self.metric.eta * self.weights)[None, :]) @ g
        return self.eigenfunctions.T @ (np.exp(-tau * self.eigenvalues) * coeff)


def decompose(
    H: TridiagonalOperator, metric: MetricOperator | None = None
) -> SpectralDecomposition:
    """Symmetrize, diagonalize and eta-normalize in one step.

    When no metric is passed the detailed-balance recurrence supplies one,
    which is the choice that makes every identity below exact to round-off.
    """
    if metric is None:
        metric = detailed_balance_metric(H)
    S, _ = symmetrize(H, metric)
    eigenvalues, vectors = eigendecompose(S)
    weights = trapezoid_weights(H.lattice)
    psi = eta_normalize(vectors, metric, weights)
    return SpectralDecomposition(
        eigenvalues=eigenvalues,
        eigenfunctions=psi,
        metric=metric,
        weights=weights,
        lattice=H.lattice,
    )


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Discrete pricing kernel: values[i][j] approximates p(x_i, tau, x_j) w_j."""

    tau: float
    values: np.ndarray
    lattice: Lattice

    def __post_init__(self) -> None:
        self.values.setflags(write=False)

    def density(self, weights: np.ndarray) -> np.ndarray:
        """Strip the quadrature factor: values / w_j, the transition density itself."""
        return self.values / weights[None, :]


def pricing_kernel(decomp: SpectralDecomposition, tau: float) -> KernelMatrix:
    """Matrix of exp(-tau H) composed with the quadrature.

    values[i][j] = sum_k exp(-tau eps_k) psi_k[i] eta_j w_j psi_k[j]. The
    metric and weight appear exactly once, so price = kernel @ payoff with no
    further factors.
    """
    if tau <= 0:
        raise ValueError(f"pricing_kernel: tau must be positive, got {tau}")
    eps_max = float(decomp.eigenvalues.max())
    if tau * eps_max < _DECAY_WARN_THRESHOLD:
        warnings.warn(
            f"pricing_kernel: tau * eps_max = {tau * eps_max:.3g} < "
            f"{_DECAY_WARN_THRESHOLD:g}; top modes barely decay and "
            "truncation-window artifacts may dominate",
            stacklevel=2,
        )
    psi = decomp.eigenfunctions
    decay = np.exp(-tau * decomp.eigenvalues)
    base = psi.T @ (decay[:, None] * psi)
    values = base * (decomp.metric.eta * decomp.weights)[None, :]
    return KernelMatrix(tau=tau, values=values, lattice=decomp.lattice)


def pseudo_inner_product(
    f: np.ndarray, g: np.ndarray, metric: MetricOperator, weights: np.ndarray
) -> float:
    """Discrete eta-weighted inner product sum_i w_i eta_i f_i g_i."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape or f.shape != metric.eta.shape:
        raise ValueError(
            f"pseudo_inner_product: length mismatch f={f.shape}, g={g.shape}, "
            f"eta={metric.eta.shape}"
        )
    return float(np.sum(weights * metric.eta * f * g))
