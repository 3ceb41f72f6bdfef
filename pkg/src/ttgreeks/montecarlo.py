"""Monte Carlo benchmarks: pricing, fixed-seed finite-difference Greeks,
and Malliavin-weight Greeks.

Normals come from a counter-based generator (Philox) through the inverse
CDF, so a fixed seed reproduces the identical normal draws across bumped
re-runs; finite differences therefore use common random numbers.  Paths
are processed in fixed-size batches with independent substreams and a
deterministic reduction order, so results are bit-reproducible for a
given seed regardless of path count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import ndtri

from .blackscholes import ModelSpec

__all__ = ["McConfig", "MalliavinContext", "mc_price", "mc_greek_fd", "mv_greeks"]

_BATCH = 1 << 17  # fixed so path index -> normal draw is seed-determined
_UNIFORM_EPS = 1e-15

GREEKS = ("vega", "delta", "gamma")


@dataclass(frozen=True)
class McConfig:
    n_paths: int = 1_000_000
    seed: int = 20240 | 1
    h_vega: float = 0.001
    h_spot: float = 0.3

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be >= 1")
        if self.h_vega <= 0 or self.h_spot <= 0:
            raise ValueError("finite-difference steps must be positive")


@dataclass(frozen=True)
class MalliavinContext:
    """Volatility-scaled Cholesky frame G = diag(sigma) @ chol(rho)."""

    G: np.ndarray
    R: np.ndarray

    @classmethod
    def build(cls, spec: ModelSpec, sigma) -> "MalliavinContext":
        sigma = np.asarray(sigma, dtype=float)
        R = spec.cholesky()
        G = np.diag(sigma) @ R
        cov = G @ G.T
        target = np.outer(sigma, sigma) * spec.rho
        if np.abs(cov - target).max() > 1e-12 * max(1.0, np.abs(target).max()):
            raise ValueError("G G^T does not reproduce the covariance")
        return cls(G=G, R=R)


def _normal_batches(seed: int, n_paths: int, d: int):
    """Yield inverse-CDF standard-normal blocks of shape (m, d)."""
    n_batches = (n_paths + _BATCH - 1) // _BATCH
    for b in range(n_batches):
        m = min(_BATCH, n_paths - b * _BATCH)
        gen = np.random.Generator(np.random.Philox(key=seed).jumped(b))
        u = gen.random((m, d))
        np.clip(u, _UNIFORM_EPS, 1.0 - _UNIFORM_EPS, out=u)
        yield ndtri(u)


def _terminal_log_prices(z: np.ndarray, spec: ModelSpec, sigma, s0,
                         G: np.ndarray) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    s0 = np.asarray(s0, dtype=float)
    mu = np.log(s0) + (spec.r - 0.5 * sigma**2) * spec.T
    return mu + np.sqrt(spec.T) * (z @ G.T)


def _min_call_payoff(x: np.ndarray, strike: float) -> np.ndarray:
    return np.maximum(np.exp(x).min(axis=1) - strike, 0.0)


class _MeanAccumulator:
    """Running mean / standard error with deterministic accumulation order."""

    def __init__(self):
        self.n = 0
        self.total = 0.0
        self.total_sq = 0.0

    def add(self, values: np.ndarray):
        self.n += values.size
        self.total += float(values.sum())
        self.total_sq += float(np.square(values).sum())

    def mean(self) -> float:
        return self.total / self.n

    def std_error(self) -> float:
        if self.n < 2:
            return 0.0
        var = max(self.total_sq / self.n - self.mean() ** 2, 0.0)
        var *= self.n / (self.n - 1)
        return float(np.sqrt(var / self.n))


def _validate(spec: ModelSpec, sigma, s0):
    sigma = np.asarray(sigma, dtype=float)
    s0 = np.asarray(s0, dtype=float)
    if sigma.shape != (spec.d,) or s0.shape != (spec.d,):
        raise ValueError(f"sigma and s0 must have {spec.d} components")
    if np.any(sigma <= 0) or np.any(s0 <= 0):
        raise ValueError("sigma and s0 must be positive")
    return sigma, s0


def mc_price(spec: ModelSpec, sigma, s0, cfg: McConfig) -> tuple[float, float]:
    """Discounted mean payoff and its standard error."""
    sigma, s0 = _validate(spec, sigma, s0)
    ctx = MalliavinContext.build(spec, sigma)
    acc = _MeanAccumulator()
    disc = spec.discount
    for z in _normal_batches(cfg.seed, cfg.n_paths, spec.d):
        x = _terminal_log_prices(z, spec, sigma, s0, ctx.G)
        acc.add(disc * _min_call_payoff(x, spec.K))
    return acc.mean(), acc.std_error()


def mc_greek_fd(spec: ModelSpec, sigma, s0, cfg: McConfig, greek: str,
                kappa: int) -> tuple[float, float]:
    """Central finite differences on common-random-number price estimates.

    Two-point stencil for vega/delta, three-point for gamma; the seed is
    reused across the bumped runs so the difference is taken path by path.
    """
    if greek not in GREEKS:
        raise ValueError(f"unknown greek {greek!r}")
    if not 1 <= kappa <= spec.d:
        raise ValueError(f"kappa must be in 1..{spec.d}")
    sigma, s0 = _validate(spec, sigma, s0)
    k = kappa - 1
    disc = spec.discount

    if greek == "vega":
        h = cfg.h_vega
        if sigma[k] - h <= 0:
            raise ValueError("vega bump would make the volatility non-positive")
    else:
        h = cfg.h_spot
        if s0[k] - h <= 0:
            raise ValueError("spot bump would make the spot non-positive")
        if greek == "gamma" and h < 1e-3 * s0[k]:
            warnings.warn(
                f"gamma step h={h} is small relative to the spot; the "
                "finite-difference variance grows like 1/h", RuntimeWarning)

    def bumped(eps):
        sig, spot = sigma.copy(), s0.copy()
        if greek == "vega":
            sig[k] += eps
        else:
            spot[k] += eps
        return sig, spot

    acc = _MeanAccumulator()
    for z in _normal_batches(cfg.seed, cfg.n_paths, spec.d):
        payoffs = []
        bumps = (h, -h) if greek != "gamma" else (h, 0.0, -h)
        for eps in bumps:
            sig, spot = bumped(eps)
            ctx = MalliavinContext.build(spec, sig)
            x = _terminal_log_prices(z, spec, sig, spot, ctx.G)
            payoffs.append(_min_call_payoff(x, spec.K))
        if greek == "gamma":
            g = (payoffs[0] - 2.0 * payoffs[1] + payoffs[2]) / h**2
        else:
            g = (payoffs[0] - payoffs[1]) / (2.0 * h)
        acc.add(disc * g)
    return acc.mean(), acc.std_error()


def mv_greeks(spec: ModelSpec, sigma, s0, cfg: McConfig, greek: str,
              kappa: int) -> tuple[float, float]:
    """Single-expectation Malliavin-weight estimators for vega/delta/gamma."""
    if greek not in GREEKS:
        raise ValueError(f"unknown greek {greek!r}")
    if not 1 <= kappa <= spec.d:
        raise ValueError(f"kappa must be in 1..{spec.d}")
    sigma, s0 = _validate(spec, sigma, s0)
    k = kappa - 1
    ctx = MalliavinContext.build(spec, sigma)
    G = ctx.G
    ginv_col = solve_triangular(G, np.eye(spec.d)[:, k], lower=True)
    g_kk = G[k, k]
    T = spec.T

    if greek == "vega":
        prefactor = spec.discount * g_kk / sigma[k]
    else:
        prefactor = spec.discount / (T * s0[k])

    drift = (spec.r - 0.5 * np.sum(G**2, axis=1)) * T
    mu_log = np.log(s0)

    acc = _MeanAccumulator()
    for z in _normal_batches(cfg.seed, cfg.n_paths, spec.d):
        x = _terminal_log_prices(z, spec, sigma, s0, G)
        v = _min_call_payoff(x, spec.K)
        y = x - mu_log - drift
        u = solve_triangular(G, y.T, lower=True).T
        theta = u @ ginv_col
        if greek == "delta":
            weight = theta
        elif greek == "vega":
            weight = theta * (u[:, k] / T - g_kk) - ginv_col[k]
        else:
            weight = (-theta / s0[k]
                      + (theta**2 - T * float(ginv_col @ ginv_col)) / (s0[k] * T))
        acc.add(prefactor * v * weight)
    return acc.mean(), acc.std_error()
