"""Offline construction of the parameter-indexed price tensor and its Greek
variants; online evaluation by chain contraction.

The offline phase learns the weighted characteristic-function train and the
payoff train by cross interpolation, pads the payoff with identity cores,
multiplies elementwise, sums out the Fourier axes (before any large SVD,
which keeps the compression cheap), compresses, and merges each parameter
pair into one 4-way core.  Greeks come either from applying the spectral
differentiation matrix to a single core (ND) or from multiplying the
closed-form sensitivity factors into the cached pre-summation train (AN).
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import tensor_train as tt_ops
from .blackscholes import (ModelSpec, payoff_fourier_min_call_batch, psi_delta,
                           psi_gamma, psi_vega_batch)
from .cross import BlackBoxTensor, TciConfig, tci_learn
from .grids import AxisGrid, DiffMatrix, chebyshev_diff_matrix, chebyshev_lobatto_axis, gauss_kronrod_axis
from .kernels import char_fn_batch, contract_chain, prepare_cores4
from .tensor_train import TensorTrain

__all__ = [
    "ToleranceSet",
    "GridSet",
    "PriceTensor",
    "GreekTensor",
    "BuildResult",
    "BondCapExceeded",
    "FlopCounter",
    "interleave_ordering",
    "reorder_assets",
    "build_price_tt",
    "greeks_nd",
    "greeks_an",
    "evaluate_at",
]

GREEKS = ("vega", "delta", "gamma")

IMAG_TOL_REL = 1e-8
IMAG_TOL_ABS = 1e-12


class BondCapExceeded(RuntimeError):
    """Raised when an elementwise product would exceed the bond budget."""


@dataclass(frozen=True)
class ToleranceSet:
    """Compression thresholds, one per pipeline stage, plus learner limits."""

    tci: float = 1e-6
    svd_phi: float = 1e-10
    svd_payoff: float = 1e-10
    svd_price_jkl: float = 1e-10
    svd_price_kl: float = 1e-10
    svd_greeks: float = 1e-10
    max_bond: int = 256
    max_sweeps: int = 12

    def __post_init__(self):
        for name in ("tci", "svd_phi", "svd_payoff", "svd_price_jkl",
                     "svd_price_kl", "svd_greeks"):
            if getattr(self, name) <= 0:
                raise ValueError(f"tolerance {name} must be positive")


@dataclass(frozen=True)
class GridSet:
    """Per-asset axes: Fourier z, volatility, and spot."""

    z_axes: tuple
    sigma_axes: tuple
    s0_axes: tuple

    @classmethod
    def build(cls, spec: ModelSpec, n_gauss: int, r_z: float, n_p: int) -> "GridSet":
        z = tuple(gauss_kronrod_axis(n_gauss, (-r_z, r_z)) for _ in range(spec.d))
        sig = tuple(chebyshev_lobatto_axis(n_p, rng, kind="volatility")
                    for rng in spec.sigma_range)
        s0 = tuple(chebyshev_lobatto_axis(n_p, rng, kind="spot")
                   for rng in spec.s0_range)
        return cls(z_axes=z, sigma_axes=sig, s0_axes=s0)

    @property
    def d(self) -> int:
        return len(self.z_axes)

    def permuted(self, perm) -> "GridSet":
        return GridSet(z_axes=tuple(self.z_axes[p] for p in perm),
                       sigma_axes=tuple(self.sigma_axes[p] for p in perm),
                       s0_axes=tuple(self.s0_axes[p] for p in perm))


def interleave_ordering(d: int, layout: str = "interleaved"):
    """Core layout: (kind, asset) per chain position.

    The interleaved arrangement groups each asset's (z, sigma, s0) cores
    contiguously; the separated variant lists all z cores, then all sigma,
    then all s0 (kept for ablation).
    """
    if layout == "interleaved":
        return [(kind, a) for a in range(d) for kind in ("z", "sigma", "s0")]
    if layout == "separated":
        return ([("z", a) for a in range(d)] + [("sigma", a) for a in range(d)]
                + [("s0", a) for a in range(d)])
    raise ValueError(f"unknown layout {layout!r}")


def reorder_assets(rho: np.ndarray) -> np.ndarray:
    """Greedy chain ordering placing strongly correlated assets adjacently.

    Starts from the strongest |rho| pair and extends whichever chain end
    has the strongest link to an unused asset; all ties resolve to the
    lowest index, so a constant matrix yields the identity permutation.
    """
    rho = np.asarray(rho, dtype=float)
    d = rho.shape[0]
    if d == 1:
        return np.array([0])
    absr = np.abs(rho)

    best, best_pair = -1.0, (0, 1)
    for i in range(d):
        for j in range(i + 1, d):
            if absr[i, j] > best + 1e-15:
                best, best_pair = absr[i, j], (i, j)
    chain = list(best_pair)
    used = set(chain)
    while len(chain) < d:
        cand_best, cand = -1.0, None
        for c in range(d):
            if c in used:
                continue
            for endpoint, side in ((chain[-1], "right"), (chain[0], "left")):
                score = absr[endpoint, c]
                if score > cand_best + 1e-15:
                    cand_best, cand = score, (c, side)
        c, side = cand
        if side == "right":
            chain.append(c)
        else:
            chain.insert(0, c)
        used.add(c)
    perm = np.array(chain)
    if _chain_score(absr, perm) <= _chain_score(absr, np.arange(d)) + 1e-15:
        return np.arange(d)
    return perm


def _chain_score(absr: np.ndarray, perm: np.ndarray) -> float:
    return float(sum(absr[perm[i], perm[i + 1]] for i in range(len(perm) - 1)))


class FlopCounter:
    """Accumulates instrumented multiply-add counts from contraction kernels."""

    def __init__(self):
        self.total = 0
        self.calls = 0

    def add(self, flops: int):
        self.total += int(flops)
        self.calls += 1

    @property
    def per_call(self) -> float:
        return self.total / self.calls if self.calls else 0.0


class _MergedParamTensor:
    """d merged 4-way cores indexed (k_i, l_i) plus a scalar prefactor."""

    def __init__(self, cores, prefactor: complex, sigma_axes, s0_axes, ordering):
        self.cores = [np.ascontiguousarray(c, dtype=np.complex128) for c in cores]
        d = len(self.cores)
        for i, c in enumerate(self.cores):
            if c.ndim != 4:
                raise ValueError(f"core {i} must be 4-way")
            if not np.all(np.isfinite(c)):
                raise ValueError(f"core {i} contains non-finite entries")
        if self.cores[0].shape[0] != 1 or self.cores[-1].shape[3] != 1:
            raise ValueError("boundary bonds must be 1")
        for i in range(d - 1):
            if self.cores[i].shape[3] != self.cores[i + 1].shape[0]:
                raise ValueError(f"bond mismatch between cores {i} and {i + 1}")
        self.prefactor = complex(prefactor)
        self.sigma_axes = tuple(sigma_axes)
        self.s0_axes = tuple(s0_axes)
        self.ordering = np.asarray(ordering, dtype=int)
        if len(self.sigma_axes) != d or len(self.s0_axes) != d:
            raise ValueError("need one sigma and one s0 axis per asset")
        self._chain_of_asset = np.argsort(self.ordering)
        self._prepared = None
        self._imag_warned = False

    @property
    def d(self) -> int:
        return len(self.cores)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        return tuple(c.shape[3] for c in self.cores[:-1])

    @property
    def n_p(self) -> tuple[tuple[int, int], ...]:
        return tuple((c.shape[1], c.shape[2]) for c in self.cores)

    def _prepare(self):
        if self._prepared is None:
            self._prepared = prepare_cores4(self.cores)
        return self._prepared


class PriceTensor(_MergedParamTensor):
    quantity = "price"


class GreekTensor(_MergedParamTensor):
    def __init__(self, cores, prefactor, sigma_axes, s0_axes, ordering,
                 greek: str, kappa: int, method: str):
        super().__init__(cores, prefactor, sigma_axes, s0_axes, ordering)
        if greek not in GREEKS:
            raise ValueError(f"unknown greek {greek!r}")
        if method not in ("nd", "an"):
            raise ValueError(f"unknown method {method!r}")
        self.greek = greek
        self.kappa = int(kappa)
        self.method = method

    @property
    def quantity(self) -> str:
        return self.greek


def evaluate_at(tensor: _MergedParamTensor, k_idx, l_idx,
                counter: FlopCounter | None = None) -> float:
    """Price or Greek at grid node (k, l); indices are per original asset.

    Contracts the d fixed slices left to right, applies the prefactor, and
    returns the real part after checking the imaginary residual.
    """
    k_idx = np.asarray(k_idx, dtype=np.int64)
    l_idx = np.asarray(l_idx, dtype=np.int64)
    d = tensor.d
    if k_idx.shape != (d,) or l_idx.shape != (d,):
        raise IndexError(f"need {d} sigma indices and {d} spot indices")
    for a in range(d):
        pos = tensor._chain_of_asset[a]
        core = tensor.cores[pos]
        if not 0 <= k_idx[a] < core.shape[1] or not 0 <= l_idx[a] < core.shape[2]:
            raise IndexError(f"grid index out of range for asset {a + 1}")
    chain_k = k_idx[tensor.ordering]
    chain_l = l_idx[tensor.ordering]
    raw, flops = contract_chain(tensor._prepare(), chain_k, chain_l)
    if counter is not None:
        counter.add(flops)
    value = tensor.prefactor * raw
    if abs(value.imag) > IMAG_TOL_REL * abs(value.real) + IMAG_TOL_ABS \
            and not tensor._imag_warned:
        tensor._imag_warned = True  # report the first offender only
        warnings.warn(f"imaginary residual {value.imag:.3e} exceeds tolerance "
                      f"(real part {value.real:.3e})", RuntimeWarning)
    return float(value.real)


@dataclass
class BuildResult:
    """Offline-phase output: the price tensor, cached pre-summation train
    for analytic Greeks, and a build report."""

    price: PriceTensor
    intermediates: TensorTrain | None
    spec: ModelSpec
    grids: GridSet
    tols: ToleranceSet
    layout: str
    ordering: np.ndarray
    report: dict = field(default_factory=dict)

    def nd_greek(self, greek: str, kappa: int) -> GreekTensor:
        return nd_greek_from_price(self.price, greek, kappa)

    def an_greek(self, greek: str, kappa: int) -> GreekTensor:
        if self.intermediates is None:
            raise ValueError("build ran without keep_intermediates=True")
        return greeks_an(self.spec, self.grids, self.tols, self.intermediates,
                         greek, kappa, layout=self.layout, ordering=self.ordering)


def _axes_for_chain(spec: ModelSpec, grids: GridSet, layout: str):
    """AxisGrid per chain position for the (already permuted) spec/grids."""
    chain = interleave_ordering(spec.d, layout)
    table = {"z": grids.z_axes, "sigma": grids.sigma_axes, "s0": grids.s0_axes}
    return chain, [table[kind][a] for kind, a in chain]


def _split_columns(chain):
    z_cols, sigma_cols, s0_cols = {}, {}, {}
    for pos, (kind, a) in enumerate(chain):
        {"z": z_cols, "sigma": sigma_cols, "s0": s0_cols}[kind][a] = pos
    d = len(z_cols)
    return ([z_cols[a] for a in range(d)], [sigma_cols[a] for a in range(d)],
            [s0_cols[a] for a in range(d)])


def _weighted_phi_blackbox(spec: ModelSpec, grids: GridSet, chain) -> BlackBoxTensor:
    z_pos, sig_pos, s0_pos = _split_columns(chain)
    z_nodes = [ax.nodes for ax in grids.z_axes]
    z_weights = [ax.weights for ax in grids.z_axes]
    sig_nodes = [ax.nodes for ax in grids.sigma_axes]
    s0_nodes = [ax.nodes for ax in grids.s0_axes]
    alpha = spec.alpha

    def fn(idx: np.ndarray) -> np.ndarray:
        d = spec.d
        z = np.empty((idx.shape[0], d))
        wt = np.ones(idx.shape[0])
        sig = np.empty_like(z)
        s0 = np.empty_like(z)
        for a in range(d):
            jz = idx[:, z_pos[a]]
            z[:, a] = z_nodes[a][jz]
            wt *= z_weights[a][jz]
            sig[:, a] = sig_nodes[a][idx[:, sig_pos[a]]]
            s0[:, a] = s0_nodes[a][idx[:, s0_pos[a]]]
        w = -(z + 1j * alpha)
        return wt * char_fn_batch(w, sig, s0, spec.rho, spec.r, spec.T)

    dims = tuple(len(z_nodes[a]) if kind == "z"
                 else len(sig_nodes[a]) if kind == "sigma" else len(s0_nodes[a])
                 for kind, a in chain)
    return BlackBoxTensor(dims, fn)


def _payoff_blackbox(spec: ModelSpec, grids: GridSet) -> BlackBoxTensor:
    z_nodes = [ax.nodes for ax in grids.z_axes]
    alpha = spec.alpha

    def fn(idx: np.ndarray) -> np.ndarray:
        z = np.column_stack([z_nodes[a][idx[:, a]] for a in range(spec.d)])
        return payoff_fourier_min_call_batch(z + 1j * alpha, spec)

    return BlackBoxTensor(tuple(len(n) for n in z_nodes), fn)


def _check_bond_cap(a: TensorTrain, b: TensorTrain, cap: int, stage: str):
    prods = [x * y for x, y in zip(a.bond_dims, b.bond_dims)]
    if prods and max(prods) > cap:
        raise BondCapExceeded(
            f"{stage}: elementwise product would reach bond {max(prods)} "
            f"(cap {cap}); tighten tolerances or raise the cap")


def _payoff_dummy_inserts(chain, grids: GridSet):
    """Gap positions/dims extending the payoff train to the full chain."""
    z_seen = 0
    positions, dims = [], []
    for kind, a in chain:
        if kind == "z":
            z_seen += 1
        elif kind == "sigma":
            positions.append(z_seen)
            dims.append(grids.sigma_axes[a].size)
        else:
            positions.append(z_seen)
            dims.append(grids.s0_axes[a].size)
    return positions, dims


def build_price_tt(spec: ModelSpec, grids: GridSet, tols: ToleranceSet,
                   layout: str = "interleaved", reorder: bool = False,
                   bond_cap: int = 4096, keep_intermediates: bool = False,
                   tci_seed: int = 7) -> BuildResult:
    """Offline phase: learn, multiply, sum the Fourier axes, compress, merge.

    Returns the merged price tensor together with diagnostics; with
    keep_intermediates the pre-summation train is cached (compressed once)
    for reuse by all analytic-differentiation Greeks.
    """
    if grids.d != spec.d:
        raise ValueError("grid set does not match asset count")
    t_start = time.perf_counter()
    perm = reorder_assets(spec.rho) if reorder else np.arange(spec.d)
    pspec = spec.permuted(perm)
    pgrids = grids.permuted(perm)
    chain, chain_axes = _axes_for_chain(pspec, pgrids, layout)
    report: dict = {"ordering": perm.tolist(), "layout": layout}

    cfg = TciConfig(tol=tols.tci, max_bond=tols.max_bond,
                    max_sweeps=tols.max_sweeps, probe_seed=tci_seed)

    t0 = time.perf_counter()
    phi_bb = _weighted_phi_blackbox(pspec, pgrids, chain)
    phi_tt, phi_diag = tci_learn(phi_bb, cfg)
    phi_tt = tt_ops.svd_truncate(phi_tt, tols.svd_phi)
    report["phi"] = {"tci": phi_diag.to_dict(), "bonds": list(phi_tt.bond_dims),
                     "seconds": time.perf_counter() - t0}

    t0 = time.perf_counter()
    payoff_bb = _payoff_blackbox(pspec, pgrids)
    payoff_tt, payoff_diag = tci_learn(payoff_bb, cfg)
    payoff_tt = tt_ops.svd_truncate(payoff_tt, tols.svd_payoff)
    report["payoff"] = {"tci": payoff_diag.to_dict(),
                        "bonds": list(payoff_tt.bond_dims),
                        "seconds": time.perf_counter() - t0}

    positions, dims = _payoff_dummy_inserts(chain, pgrids)
    payoff_ext = tt_ops.insert_identity_cores(payoff_tt, positions, dims)

    t0 = time.perf_counter()
    report["product_bonds"] = [x * y for x, y in
                               zip(phi_tt.bond_dims, payoff_ext.bond_dims)]
    z_positions = [pos for pos, (kind, _) in enumerate(chain) if kind == "z"]

    intermediates = None
    if keep_intermediates:
        # the pre-summation train is materialized and compressed once, for
        # reuse by every analytic-differentiation Greek
        _check_bond_cap(phi_tt, payoff_ext, bond_cap, "price integrand")
        v_jkl = tt_ops.elementwise_multiply(phi_tt, payoff_ext)
        intermediates = tt_ops.svd_truncate(v_jkl, tols.svd_price_jkl)
        report["intermediates_bonds"] = list(intermediates.bond_dims)
        del v_jkl

    # multiply and sum the Fourier axes in one fused pass (never holding
    # the product cores), then compress the small parameter-only train
    v_kl = tt_ops.multiply_and_sum_fused(phi_tt, payoff_ext, z_positions)
    v_kl = tt_ops.svd_truncate(v_kl, tols.svd_price_kl)
    report["price_bonds"] = list(v_kl.bond_dims)
    report["contract_seconds"] = time.perf_counter() - t0

    merged = _merge_param_pairs(v_kl, pspec.d, layout)
    prefactor = pspec.discount / (2.0 * np.pi) ** pspec.d
    price = PriceTensor(merged.cores, prefactor,
                        sigma_axes=grids.sigma_axes, s0_axes=grids.s0_axes,
                        ordering=perm)
    report["total_seconds"] = time.perf_counter() - t_start
    return BuildResult(price=price, intermediates=intermediates, spec=spec,
                       grids=grids, tols=tols, layout=layout, ordering=perm,
                       report=report)


def _merge_param_pairs(v_kl: TensorTrain, d: int, layout: str):
    """Pair each asset's (sigma, s0) cores into one 4-way core, chain order."""
    if layout == "interleaved":
        return tt_ops.merge_pairs_to_operator(v_kl)
    # separated layout: cores are sigma_1..sigma_d, s0_1..s0_d; regroup by
    # swapping each s0 core next to its sigma core via dense permutation of
    # the small remaining train (only used for ablation runs).
    dense = v_kl.to_dense()
    axes = list(range(2 * d))
    order = [val for pair in zip(axes[:d], axes[d:]) for val in pair]
    tt = tt_ops.from_dense(np.transpose(dense, order), eps=0.0)
    return tt_ops.merge_pairs_to_operator(tt)


def nd_greek_from_price(pt, greek: str, kappa: int) -> GreekTensor:
    """Greek by spectral differentiation, with the matrix built to match
    the relevant axis of asset kappa."""
    axis = (pt.sigma_axes if greek == "vega" else pt.s0_axes)[kappa - 1]
    diff = chebyshev_diff_matrix(axis.size, axis.bounds)
    return greeks_nd(pt, greek, kappa, diff)


def greeks_nd(pt: PriceTensor, greek: str, kappa: int,
              diff: DiffMatrix) -> GreekTensor:
    """Greek tensor by applying the differentiation matrix to core kappa.

    Vega differentiates the sigma leg, delta the spot leg, gamma applies
    the first-order operator twice; bond dimensions are untouched.
    """
    if greek not in GREEKS:
        raise ValueError(f"unknown greek {greek!r}")
    if not 1 <= kappa <= pt.d:
        raise ValueError(f"kappa must be in 1..{pt.d}")
    axis = (pt.sigma_axes if greek == "vega" else pt.s0_axes)[kappa - 1]
    if diff.size != axis.size or not np.allclose(diff.interval, axis.bounds):
        raise ValueError("differentiation matrix does not match the "
                         f"{'sigma' if greek == 'vega' else 'spot'} axis of asset {kappa}")
    pos = int(np.argsort(pt.ordering)[kappa - 1])
    cores = [c.copy() for c in pt.cores]
    dmat = np.asarray(diff.entries, dtype=np.complex128)
    if greek == "vega":
        cores[pos] = np.einsum("kt,atlb->aklb", dmat, cores[pos], optimize=True)
    elif greek == "delta":
        cores[pos] = np.einsum("lt,aktb->aklb", dmat, cores[pos], optimize=True)
    else:  # gamma: first-order operator applied twice
        for _ in range(2):
            cores[pos] = np.einsum("lt,aktb->aklb", dmat, cores[pos], optimize=True)
    return GreekTensor(cores, pt.prefactor, pt.sigma_axes, pt.s0_axes,
                       pt.ordering, greek=greek, kappa=kappa, method="nd")


def _psi_vega_tt(spec: ModelSpec, grids: GridSet, kappa_chain: int,
                 layout: str, cfg: TciConfig) -> TensorTrain:
    """Cross-interpolated volatility factor on the (z, sigma) sub-chain."""
    d = spec.d
    if layout == "interleaved":
        sub = [(kind, a) for a in range(d) for kind in ("z", "sigma")]
    else:
        sub = [("z", a) for a in range(d)] + [("sigma", a) for a in range(d)]
    z_pos = {a: p for p, (kind, a) in enumerate(sub) if kind == "z"}
    s_pos = {a: p for p, (kind, a) in enumerate(sub) if kind == "sigma"}
    alpha = spec.alpha

    def fn(idx: np.ndarray) -> np.ndarray:
        z = np.column_stack([grids.z_axes[a].nodes[idx[:, z_pos[a]]]
                             for a in range(d)])
        sig = np.column_stack([grids.sigma_axes[a].nodes[idx[:, s_pos[a]]]
                               for a in range(d)])
        return psi_vega_batch(z + 1j * alpha, sig, kappa_chain, spec)

    dims = tuple(grids.z_axes[a].size if kind == "z" else grids.sigma_axes[a].size
                 for kind, a in sub)
    bb = BlackBoxTensor(dims, fn)
    tt, diag = tci_learn(bb, cfg)
    if not diag.converged:
        warnings.warn("volatility-factor cross interpolation did not converge: "
                      + "; ".join(diag.warnings), RuntimeWarning)
    # extend with identity cores on the spot legs
    if layout == "interleaved":
        positions = [2 * (a + 1) for a in range(d)]
    else:
        positions = [2 * d] * d
    dims_s0 = [grids.s0_axes[a].size for a in range(d)]
    return tt_ops.insert_identity_cores(tt, positions, dims_s0)


def _psi_rank_one_tt(spec: ModelSpec, grids: GridSet, greek: str,
                     kappa_chain: int, layout: str) -> TensorTrain:
    """Bond-1 spot-sensitivity factor: nontrivial z and s0 cores for asset
    kappa, ones elsewhere."""
    d = spec.d
    chain = interleave_ordering(d, layout)
    a = kappa_chain - 1
    zs = grids.z_axes[a].nodes + 1j * spec.alpha[a]
    s0 = grids.s0_axes[a].nodes
    if greek == "delta":
        z_vec = 1j * (-zs)
        s_vec = 1.0 / s0
    else:
        z_vec = 1j * zs - zs**2
        s_vec = 1.0 / s0**2
    vectors = []
    for kind, asset in chain:
        n = {"z": grids.z_axes, "sigma": grids.sigma_axes,
             "s0": grids.s0_axes}[kind][asset].size
        if kind == "z" and asset == a:
            vectors.append(z_vec)
        elif kind == "s0" and asset == a:
            vectors.append(s_vec)
        else:
            vectors.append(np.ones(n))
    return tt_ops.rank_one_tt(vectors)


def greeks_an(spec: ModelSpec, grids: GridSet, tols: ToleranceSet,
              intermediates: TensorTrain, greek: str, kappa: int,
              layout: str = "interleaved", ordering=None,
              bond_cap: int = 4096) -> GreekTensor:
    """Greek tensor from the closed-form sensitivity factor.

    Multiplies the factor train into the cached pre-summation train, sums
    the Fourier axes, compresses, and merges.  The spot factors are exact
    bond-1 trains; the volatility factor is cross-interpolated.
    """
    if greek not in GREEKS:
        raise ValueError(f"unknown greek {greek!r}")
    if not 1 <= kappa <= spec.d:
        raise ValueError(f"kappa must be in 1..{spec.d}")
    if ordering is None:
        ordering = np.arange(spec.d)
    ordering = np.asarray(ordering, dtype=int)
    pspec = spec.permuted(ordering)
    pgrids = grids.permuted(ordering)
    kappa_chain = int(np.argsort(ordering)[kappa - 1]) + 1

    if greek == "vega":
        cfg = TciConfig(tol=tols.tci, max_bond=tols.max_bond,
                        max_sweeps=tols.max_sweeps)
        psi_tt = _psi_vega_tt(pspec, pgrids, kappa_chain, layout, cfg)
    else:
        psi_tt = _psi_rank_one_tt(pspec, pgrids, greek, kappa_chain, layout)

    chain = interleave_ordering(pspec.d, layout)
    z_positions = [pos for pos, (kind, _) in enumerate(chain) if kind == "z"]
    summed = tt_ops.multiply_and_sum_fused(psi_tt, intermediates, z_positions)
    summed = tt_ops.svd_truncate(summed, tols.svd_greeks)
    merged = _merge_param_pairs(summed, pspec.d, layout)
    prefactor = pspec.discount / (2.0 * np.pi) ** pspec.d
    return GreekTensor(merged.cores, prefactor, grids.sigma_axes, grids.s0_axes,
                       ordering, greek=greek, kappa=kappa, method="an")
