"""Tensor cross interpolation (TCI).

Learns a tensor-train approximation of a black-box tensor from adaptively
chosen samples.  The sweeping scheme factorizes the 2-site unfolding at
each bond with full-search rank-revealing LU restricted to the row/column
index sets accumulated so far; pivots are added while the residual exceeds
tol * max|F| (running estimate).  Convergence is declared when the
normalized maximum error over sampled entries stays below tol for two
consecutive sweeps, guarding against premature stops in flat regions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import zgeru

from .kernels import eval_tt_batch, prepare_cores3
from .tensor_train import TensorTrain

__all__ = ["TciConfig", "BlackBoxTensor", "TciDiagnostics", "tci_learn", "sample_budget"]

_PIVOT_COND_LIMIT = 1e12
_ROW_CHUNK = 512
_PROBE_CAP = 4096
_ESTIMATE_CAP = 200_000


@dataclass
class TciConfig:
    """Knobs for one cross-interpolation run."""

    tol: float = 1e-8
    max_bond: int = 200
    max_sweeps: int = 12
    initial_pivot: tuple[int, ...] | None = None
    probe_seed: int = 7

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_bond < 1:
            raise ValueError("max_bond must be >= 1")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")


class BlackBoxTensor:
    """Adapter around a pure function multi-index -> complex.

    The callable must be deterministic.  Vectorized callables receive an
    (n, d) int64 index array and return n complex values; scalar callables
    receive one tuple.  With cache="auto" evaluations are deduplicated
    through a dict for small grids; large grids skip the cache since the
    per-row bookkeeping costs more than re-evaluating a cheap integrand.
    """

    AUTO_CACHE_LIMIT = 1 << 22

    def __init__(self, dims, fn, vectorized=True, cache="auto",
                 max_cache_entries=2_000_000):
        self.dims = tuple(int(n) for n in dims)
        if any(n < 1 for n in self.dims):
            raise ValueError("all local dimensions must be >= 1")
        self.fn = fn
        self.vectorized = vectorized
        self.n_evals = 0
        if cache == "auto":
            cache = math.prod(self.dims) <= self.AUTO_CACHE_LIMIT
        self._cache_enabled = bool(cache) and math.prod(self.dims) < 2**62
        self._cache: dict[int, complex] = {}
        self._max_cache = int(max_cache_entries)
        self._strides = None
        if self._cache_enabled:
            strides = np.ones(len(self.dims), dtype=np.int64)
            for i in range(len(self.dims) - 2, -1, -1):
                strides[i] = strides[i + 1] * self.dims[i + 1]
            self._strides = strides

    @property
    def full_grid_size(self) -> int:
        return math.prod(self.dims)

    def _raw_eval(self, idx: np.ndarray) -> np.ndarray:
        if self.vectorized:
            vals = np.asarray(self.fn(idx), dtype=np.complex128)
        else:
            vals = np.array([self.fn(tuple(row)) for row in idx],
                            dtype=np.complex128)
        self.n_evals += idx.shape[0]
        bad = ~np.isfinite(vals)
        if np.any(bad):
            where = tuple(int(x) for x in idx[np.argmax(bad)])
            raise ValueError(f"black box returned non-finite value at index {where}")
        return vals

    def eval_batch(self, idx) -> np.ndarray:
        idx = np.ascontiguousarray(idx, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] != len(self.dims):
            raise ValueError("index block must have shape (n, d)")
        if idx.shape[0] == 0:
            return np.empty(0, dtype=np.complex128)
        if not self._cache_enabled:
            return self._raw_eval(idx)

        keys = idx @ self._strides
        out = np.empty(idx.shape[0], dtype=np.complex128)
        miss_rows = []
        cache = self._cache
        for i, k in enumerate(keys):
            v = cache.get(int(k))
            if v is None:
                miss_rows.append(i)
            else:
                out[i] = v
        if miss_rows:
            miss_rows = np.asarray(miss_rows)
            vals = self._raw_eval(idx[miss_rows])
            out[miss_rows] = vals
            if len(cache) < self._max_cache:
                for i, v in zip(miss_rows, vals):
                    cache[int(keys[i])] = complex(v)
        return out


@dataclass
class TciDiagnostics:
    """Run report: sampling effort, bond profile, and error history."""

    n_samples: int = 0
    bond_dims: tuple[int, ...] = ()
    error_trace: list[float] = field(default_factory=list)
    error_estimate: float = float("nan")
    max_abs: float = 0.0
    converged: bool = False
    n_sweeps: int = 0
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "bond_dims": list(self.bond_dims),
            "error_trace": self.error_trace,
            "error_estimate": self.error_estimate,
            "max_abs": self.max_abs,
            "converged": self.converged,
            "n_sweeps": self.n_sweeps,
            "warnings": self.warnings,
        }


def sample_budget(diag: TciDiagnostics) -> dict:
    """Sampling-effort summary used by the adaptivity checks."""
    chi_max = max(diag.bond_dims) if diag.bond_dims else 1
    return {
        "n_samples": diag.n_samples,
        "chi_max": chi_max,
        "bond_dims": list(diag.bond_dims),
    }


def _full_pivot_lu(mat: np.ndarray, thresh: float, max_rank: int):
    """Greedy full-search LU: returns pivot rows/cols and leftover residual.

    Pivots are accepted while the largest residual magnitude exceeds
    thresh; ties resolve to the lowest flattened position.  Rank-1 Schur
    updates run in place through BLAS on a Fortran-ordered copy.
    """
    resid = np.asfortranarray(mat, dtype=np.complex128)
    if resid is mat:
        resid = mat.copy(order="F")
    n_rows, n_cols = resid.shape
    rows: list[int] = []
    cols: list[int] = []
    limit = min(max_rank, n_rows, n_cols)
    leftover = 0.0
    while True:
        flat = np.argmax(np.abs(resid))
        i, j = divmod(int(flat), n_cols)
        piv = resid[i, j]
        if abs(piv) <= thresh or len(rows) >= limit:
            leftover = abs(piv)
            break
        rows.append(i)
        cols.append(j)
        zgeru(-1.0 / piv, resid[:, j].copy(), resid[i, :].copy(),
              a=resid, overwrite_a=1)
    return rows, cols, leftover


class _Sweeper:
    def __init__(self, f: BlackBoxTensor, cfg: TciConfig):
        self.f = f
        self.cfg = cfg
        self.dims = f.dims
        self.d = len(f.dims)
        self.max_abs = 0.0
        self.warnings: list[str] = []
        pivot = cfg.initial_pivot
        if pivot is None:
            pivot = tuple(n // 2 for n in self.dims)
        pivot = tuple(int(p) for p in pivot)
        if len(pivot) != self.d or any(not 0 <= p < n for p, n in zip(pivot, self.dims)):
            raise ValueError(f"initial pivot {pivot} outside grid {self.dims}")
        # I[b]: left multi-indices covering cores 0..b; J[b]: right ones.
        self.I = [np.array([pivot[: b + 1]], dtype=np.int64) for b in range(self.d - 1)]
        self.J = [np.array([pivot[b + 1:]], dtype=np.int64) for b in range(self.d - 1)]

    def _eval(self, idx: np.ndarray) -> np.ndarray:
        vals = self.f.eval_batch(idx)
        if vals.size:
            m = float(np.abs(vals).max())
            if m > self.max_abs:
                self.max_abs = m
        return vals

    def _pi_block(self, b: int):
        """Sample the 2-site unfolding at bond b over the current index sets."""
        ileft = self.I[b - 1] if b > 0 else np.zeros((1, 0), dtype=np.int64)
        jright = self.J[b + 1] if b + 1 < self.d - 1 else np.zeros((1, 0), dtype=np.int64)
        nb, nb1 = self.dims[b], self.dims[b + 1]
        r, c = ileft.shape[0], jright.shape[0]

        rows = np.column_stack([np.repeat(ileft, nb, axis=0),
                                np.tile(np.arange(nb, dtype=np.int64), r)])
        cols = np.column_stack([np.repeat(np.arange(nb1, dtype=np.int64), c),
                                np.tile(jright, (nb1, 1))])
        n_rows, n_cols = rows.shape[0], cols.shape[0]

        pi = np.empty((n_rows, n_cols), dtype=np.complex128)
        for start in range(0, n_rows, _ROW_CHUNK):
            stop = min(start + _ROW_CHUNK, n_rows)
            block_rows = rows[start:stop]
            idx = np.concatenate(
                [np.repeat(block_rows, n_cols, axis=0),
                 np.tile(cols, (stop - start, 1))], axis=1)
            pi[start:stop] = self._eval(idx).reshape(stop - start, n_cols)
        return rows, cols, pi

    def update_bond(self, b: int) -> float:
        rows, cols, pi = self._pi_block(b)
        if self.max_abs == 0.0:
            return 0.0
        thresh = self.cfg.tol * self.max_abs
        prow, pcol, leftover = _full_pivot_lu(pi, thresh, self.cfg.max_bond)
        if prow:
            self.I[b] = rows[prow]
            self.J[b] = cols[pcol]
        return leftover

    def build_cores(self) -> TensorTrain:
        cores = []
        for p in range(self.d):
            ileft = self.I[p - 1] if p > 0 else np.zeros((1, 0), dtype=np.int64)
            jright = self.J[p] if p < self.d - 1 else np.zeros((1, 0), dtype=np.int64)
            n = self.dims[p]
            r, c = ileft.shape[0], jright.shape[0]
            idx = np.concatenate(
                [np.repeat(np.repeat(ileft, n, axis=0), c, axis=0),
                 np.tile(np.repeat(np.arange(n, dtype=np.int64), c), r)[:, None],
                 np.tile(jright, (r * n, 1))], axis=1)
            t_block = self._eval(idx).reshape(r * n, c)
            if p < self.d - 1:
                pidx = np.concatenate(
                    [np.repeat(self.I[p], c, axis=0), np.tile(jright, (c, 1))], axis=1)
                pmat = self._eval(pidx).reshape(c, c)
                cond = np.linalg.cond(pmat)
                if not np.isfinite(cond) or cond > _PIVOT_COND_LIMIT:
                    self.warnings.append(
                        f"pivot matrix at bond {p} ill-conditioned (cond={cond:.2e})")
                try:
                    core = np.linalg.solve(pmat.T, t_block.T).T
                except np.linalg.LinAlgError:
                    core = np.linalg.lstsq(pmat.T, t_block.T, rcond=None)[0].T
            else:
                core = t_block
            cores.append(core.reshape(r, n, -1))
        return TensorTrain(cores, check_finite=False)


def _zero_result(f: BlackBoxTensor, diag: TciDiagnostics):
    diag.warnings.append(
        "black box is identically zero on all sampled entries; "
        "normalized error is degenerate, returning bond-1 zero train")
    diag.converged = True
    diag.error_estimate = 0.0
    tt = TensorTrain([np.zeros((1, n, 1), dtype=np.complex128) for n in f.dims])
    diag.bond_dims = tt.bond_dims
    diag.n_samples = f.n_evals
    return tt, diag


def tci_learn(f: BlackBoxTensor, cfg: TciConfig) -> tuple[TensorTrain, TciDiagnostics]:
    """Learn a tensor train from adaptive samples of the black box.

    Returns the train together with diagnostics (sample count, bond
    profile, per-sweep normalized-maximum-error estimates over sampled
    entries).  Raises if the black box returns non-finite values.
    """
    diag = TciDiagnostics()
    d = len(f.dims)

    if d == 1:
        idx = np.arange(f.dims[0], dtype=np.int64)[:, None]
        vals = f.eval_batch(idx)
        tt = TensorTrain([vals.reshape(1, -1, 1)])
        diag.n_samples = f.n_evals
        diag.max_abs = float(np.abs(vals).max()) if vals.size else 0.0
        if diag.max_abs == 0.0:
            return _zero_result(f, diag)
        diag.converged = True
        diag.error_estimate = 0.0
        diag.bond_dims = ()
        diag.n_sweeps = 1
        return tt, diag

    sweeper = _Sweeper(f, cfg)
    rng = np.random.default_rng(cfg.probe_seed)

    probe_idx: list[np.ndarray] = []
    probe_vals: list[np.ndarray] = []
    tt = None
    for sweep in range(1, cfg.max_sweeps + 1):
        order = list(range(d - 1)) + list(range(d - 2, -1, -1))
        leftover = 0.0
        for b in order:
            leftover = max(leftover, sweeper.update_bond(b))
        if sweeper.max_abs == 0.0:
            return _zero_result(f, diag)

        # Fresh random probes join the sampled set used by the error estimate.
        chi_max = max(len(s) for s in sweeper.I)
        n_probe = min(_PROBE_CAP, max(32, 4 * d * chi_max * max(f.dims)))
        probes = np.column_stack(
            [rng.integers(0, n, size=n_probe) for n in f.dims]).astype(np.int64)
        probe_idx.append(probes)
        probe_vals.append(sweeper._eval(probes))

        tt = sweeper.build_cores()
        est = _restricted_error(tt, f, probe_idx, probe_vals, sweeper.max_abs)
        est = max(est, leftover / sweeper.max_abs)
        diag.error_trace.append(est)
        diag.n_sweeps = sweep
        if len(diag.error_trace) >= 2 and diag.error_trace[-1] <= cfg.tol \
                and diag.error_trace[-2] <= cfg.tol:
            diag.converged = True
            break

    diag.n_samples = f.n_evals
    diag.bond_dims = tt.bond_dims
    diag.max_abs = sweeper.max_abs
    diag.error_estimate = diag.error_trace[-1]
    diag.warnings.extend(sweeper.warnings)
    if not diag.converged:
        diag.warnings.append(
            f"stopped after {diag.n_sweeps} sweeps with error estimate "
            f"{diag.error_estimate:.3e} (tol {cfg.tol:.1e})")
    return tt, diag


def _restricted_error(tt: TensorTrain, f: BlackBoxTensor,
                      probe_idx, probe_vals, max_abs: float) -> float:
    """Normalized max |F - F~| over sampled entries (cache plus probes)."""
    blocks_idx = list(probe_idx)
    blocks_val = list(probe_vals)
    if f._cache_enabled and f._cache and len(f._cache) <= _ESTIMATE_CAP:
        keys = np.fromiter(f._cache.keys(), dtype=np.int64, count=len(f._cache))
        vals = np.fromiter(f._cache.values(), dtype=np.complex128, count=len(f._cache))
        idx = np.empty((keys.size, len(f.dims)), dtype=np.int64)
        rem = keys.copy()
        for i, stride in enumerate(f._strides):
            idx[:, i], rem = np.divmod(rem, stride)
        blocks_idx.append(idx)
        blocks_val.append(vals)

    idx = np.concatenate(blocks_idx, axis=0)
    ref = np.concatenate(blocks_val, axis=0)
    if idx.shape[0] > _ESTIMATE_CAP:
        keep = np.linspace(0, idx.shape[0] - 1, _ESTIMATE_CAP).astype(np.int64)
        idx, ref = idx[keep], ref[keep]
    approx = eval_tt_batch(prepare_cores3(tt.cores), idx)
    return float(np.abs(approx - ref).max() / max_abs)
