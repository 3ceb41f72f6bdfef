"""Quadrature and collocation grids.

Fourier axes use Gauss-Kronrod nodes/weights; parameter axes (volatility,
spot) use Chebyshev-Lobatto nodes together with the spectral differentiation
matrix for computing sensitivities by collocation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "AxisGrid",
    "DiffMatrix",
    "gauss_kronrod_axis",
    "chebyshev_lobatto_axis",
    "chebyshev_diff_matrix",
]

AXIS_KINDS = ("fourier-z", "volatility", "spot")


@dataclass(frozen=True)
class AxisGrid:
    """One discretized axis: ordered nodes, optional quadrature weights.

    Fourier axes carry weights; parameter axes do not.  Nodes are strictly
    monotone (ascending for Fourier axes, descending cosine order for
    Chebyshev axes) and consumers address them purely by index.
    """

    kind: str
    nodes: np.ndarray
    bounds: tuple[float, float]
    weights: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in AXIS_KINDS:
            raise ValueError(f"unknown axis kind {self.kind!r}")
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        diffs = np.diff(nodes)
        if not (np.all(diffs > 0) or np.all(diffs < 0)):
            raise ValueError("axis nodes must be strictly monotone")
        lo, hi = self.bounds
        if nodes.min() < lo - 1e-12 * (1 + abs(lo)) or nodes.max() > hi + 1e-12 * (1 + abs(hi)):
            raise ValueError("axis nodes fall outside declared bounds")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != nodes.shape:
                raise ValueError("weights length must match nodes length")
            object.__setattr__(self, "weights", w)
        elif self.kind == "fourier-z":
            raise ValueError("fourier-z axes require quadrature weights")

    @property
    def size(self) -> int:
        return self.nodes.size

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "bounds": [float(self.bounds[0]), float(self.bounds[1])],
            "n": int(self.size),
            "nodes": self.nodes.tolist(),
        }
        if self.weights is not None:
            d["weights"] = self.weights.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AxisGrid":
        w = np.asarray(d["weights"]) if "weights" in d else None
        return cls(kind=d["kind"], nodes=np.asarray(d["nodes"]),
                   bounds=(d["bounds"][0], d["bounds"][1]), weights=w)


@dataclass(frozen=True)
class DiffMatrix:
    """Spectral differentiation matrix on a Chebyshev-Lobatto axis."""

    entries: np.ndarray
    interval: tuple[float, float]

    @property
    def size(self) -> int:
        return self.entries.shape[0]


def _legendre_beta(k: np.ndarray | int):
    """Monic Legendre recurrence coefficients b_k (a_k = 0); b_0 = 2."""
    k = np.asarray(k, dtype=float)
    return np.where(k == 0, 2.0, k**2 / (4.0 * k**2 - 1.0))


def _stieltjes_coefficients(n: int) -> np.ndarray:
    """Orthonormal-Legendre coefficients of the degree-(n+1) Stieltjes polynomial.

    The polynomial E_{n+1} is orthogonal to all polynomials of degree <= n
    with respect to the signed measure P_n(x) dx; its roots supply the n+1
    added Kronrod nodes.  Coefficients are found from the triple-product
    table T[j,k] = int p_j p_k p_n dx built by the three-term recurrence.
    """
    jmax = 2 * n + 2
    sb = np.sqrt(_legendre_beta(np.arange(jmax + 2)))

    # T[j, k]; base column k=0 is delta_{jn} / sqrt(b_0).
    T = np.zeros((jmax + 1, n + 2))
    T[n, 0] = 1.0 / sb[0]
    if n + 1 >= 1:
        # k=1 from x p_0 = sqrt(b_1) p_1: T[j,1] = (sb[j+1] T[j+1,0] + sb[j] T[j-1,0]) / sb[1]
        for j in range(jmax):
            up = sb[j + 1] * T[j + 1, 0]
            down = sb[j] * T[j - 1, 0] if j >= 1 else 0.0
            T[j, 1] = (up + down) / sb[1]
    for k in range(1, n + 1):
        for j in range(jmax):
            up = sb[j + 1] * T[j + 1, k]
            down = sb[j] * T[j - 1, k] if j >= 1 else 0.0
            T[j, k + 1] = (up + down - sb[k] * T[j, k - 1]) / sb[k + 1]

    # Solve sum_{j<=n} gamma_j T[j,k] = -T[n+1,k], k = 0..n.  Parity zeroes
    # half of the system; lstsq returns the minimum-norm (zero) components.
    A = T[: n + 1, : n + 1].T
    rhs = -T[n + 1, : n + 1]
    gamma, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return np.concatenate([gamma, [1.0]])


def _stieltjes_roots(n: int, gamma: np.ndarray) -> np.ndarray:
    """Roots of the Stieltjes polynomial via its comrade matrix."""
    m = n + 1
    sb = np.sqrt(_legendre_beta(np.arange(m + 1)))
    C = np.diag(sb[1:m], 1) + np.diag(sb[1:m], -1)
    C[m - 1, :] -= sb[m] * gamma[:m] / gamma[m]
    ev = np.linalg.eigvals(C)
    scale = max(1.0, np.abs(ev).max())
    if np.abs(ev.imag).max() > 1e-8 * scale:
        raise RuntimeError(
            f"Gauss-Kronrod extension failed for n_gauss={n}: non-real Kronrod nodes")
    return np.sort(ev.real)


def _orthonormal_legendre_table(degree: int, x: np.ndarray) -> np.ndarray:
    """Rows j = 0..degree of orthonormal Legendre values at points x."""
    sb = np.sqrt(_legendre_beta(np.arange(degree + 1)))
    P = np.zeros((degree + 1, x.size))
    P[0] = 1.0 / sb[0]
    if degree >= 1:
        P[1] = x * P[0] / sb[1]
    for j in range(1, degree):
        P[j + 1] = (x * P[j] - sb[j] * P[j - 1]) / sb[j + 1]
    return P


def gauss_legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Golub-Welsch nodes/weights of the n-point Gauss-Legendre rule on [-1,1]."""
    if n < 1:
        raise ValueError("need n >= 1 Gauss nodes")
    if n == 1:
        return np.array([0.0]), np.array([2.0])
    off = np.sqrt(_legendre_beta(np.arange(1, n)))
    nodes, vecs = eigh_tridiagonal(np.zeros(n), off)
    weights = 2.0 * vecs[0] ** 2
    return nodes, weights


def gauss_kronrod_rule(n_gauss: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the (2n+1)-point Gauss-Kronrod rule on [-1,1].

    The n Gauss nodes are extended by the n+1 roots of the Stieltjes
    polynomial; weights follow from exactness on the orthonormal Legendre
    basis up to degree 2n.
    """
    if n_gauss < 1:
        raise ValueError("need n_gauss >= 1")
    gamma = _stieltjes_coefficients(n_gauss)
    new_nodes = _stieltjes_roots(n_gauss, gamma)
    gauss_nodes, _ = gauss_legendre_rule(n_gauss)
    nodes = np.sort(np.concatenate([gauss_nodes, new_nodes]))

    m = nodes.size  # 2n+1
    P = _orthonormal_legendre_table(m - 1, nodes)
    rhs = np.zeros(m)
    rhs[0] = np.sqrt(2.0)  # int p_0 dx = sqrt(b_0)
    weights = np.linalg.solve(P, rhs)
    if np.any(weights <= 0):
        raise RuntimeError(
            f"Gauss-Kronrod extension failed for n_gauss={n_gauss}: non-positive weights")
    return nodes, weights


def gauss_kronrod_axis(n_gauss: int, bounds: tuple[float, float]) -> AxisGrid:
    """Gauss-Kronrod quadrature axis with 2*n_gauss+1 nodes scaled to bounds."""
    lo, hi = float(bounds[0]), float(bounds[1])
    if hi <= lo:
        raise ValueError("bounds must satisfy lo < hi")
    x, w = gauss_kronrod_rule(n_gauss)
    mid, half = 0.5 * (hi + lo), 0.5 * (hi - lo)
    return AxisGrid(kind="fourier-z", nodes=mid + half * x,
                    bounds=(lo, hi), weights=half * w)


def chebyshev_lobatto_nodes(n: int) -> np.ndarray:
    """Chebyshev-Lobatto nodes cos(pi*(k-1)/(n-1)), k = 1..n (descending)."""
    if n < 2:
        raise ValueError("need at least 2 Chebyshev-Lobatto nodes")
    return np.cos(np.pi * np.arange(n) / (n - 1))


def chebyshev_lobatto_axis(n: int, bounds: tuple[float, float],
                           kind: str = "spot") -> AxisGrid:
    """Chebyshev-Lobatto parameter axis; index 0 maps to the upper bound."""
    lo, hi = float(bounds[0]), float(bounds[1])
    if hi <= lo:
        raise ValueError("bounds must satisfy lo < hi")
    L = chebyshev_lobatto_nodes(n)
    nodes = 0.5 * (hi + lo) + 0.5 * (hi - lo) * L
    return AxisGrid(kind=kind, nodes=nodes, bounds=(lo, hi))


def chebyshev_diff_matrix(n: int, bounds: tuple[float, float]) -> DiffMatrix:
    """First-derivative collocation matrix on the scaled Lobatto grid.

    Standard entries for the descending cosine ordering, with corner values
    +-(2(n-1)^2+1)/6 and boundary weights c = 2; the unit-interval matrix is
    scaled by 2/(hi-lo) to act on functions sampled over [lo, hi].
    """
    if n < 2:
        raise ValueError("need at least 2 nodes for differentiation")
    lo, hi = float(bounds[0]), float(bounds[1])
    L = chebyshev_lobatto_nodes(n)
    c = np.ones(n)
    c[0] = c[-1] = 2.0

    D = np.zeros((n, n))
    diff = L[:, None] - L[None, :]
    np.fill_diagonal(diff, 1.0)  # avoid divide-by-zero; diagonal set below
    signs = (-1.0) ** (np.arange(n)[:, None] + np.arange(n)[None, :])
    D = (c[:, None] / c[None, :]) * signs / diff
    np.fill_diagonal(D, 0.0)
    interior = np.arange(1, n - 1)
    D[interior, interior] = -L[interior] / (2.0 * (1.0 - L[interior] ** 2))
    corner = (2.0 * (n - 1) ** 2 + 1.0) / 6.0
    D[0, 0] = corner
    D[-1, -1] = -corner

    return DiffMatrix(entries=(2.0 / (hi - lo)) * D, interval=(lo, hi))
