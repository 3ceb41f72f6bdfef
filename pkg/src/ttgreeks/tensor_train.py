"""Complex tensor-train containers and their contraction/compression algebra.

A tensor train stores a d-way tensor as a chain of 3-way cores
(left bond, local index, right bond) with unit boundary bonds.  All
operations here are pure: they validate structure, never mutate their
inputs, and return new containers.  The 4-way variant (TTOperator) keeps
two local indices per core and is used for the merged parameter tensors.
"""

from __future__ import annotations

import struct

import numpy as np
from scipy.linalg import qr, svd

__all__ = [
    "TensorTrain",
    "TTOperator",
    "svd_truncate",
    "elementwise_multiply",
    "sum_over_axes",
    "merge_adjacent_cores",
    "merge_pairs_to_operator",
    "insert_identity_cores",
    "apply_matrix_to_core",
    "from_dense",
    "ones_tt",
    "rank_one_tt",
    "write_ttg",
    "read_ttg",
]

_TTG_MAGIC = b"TTG1"
_TTG_VERSION = 1


class TensorTrain:
    """Chain of 3-way complex cores with shapes (chi_{i-1}, N_i, chi_i).

    Parameters
    ----------
    cores : sequence of ndarray
        3-way arrays; boundary bonds must be 1 and adjacent bonds must chain.
    axis_labels : list of str, optional
        One tag per core linking the local index to a grid axis.
    """

    def __init__(self, cores, axis_labels=None, check_finite=True):
        cores = [np.ascontiguousarray(c, dtype=np.complex128) for c in cores]
        if not cores:
            raise ValueError("tensor train needs at least one core")
        for i, c in enumerate(cores):
            if c.ndim != 3:
                raise ValueError(f"core {i} is {c.ndim}-way, expected 3-way")
            if c.shape[1] < 1:
                raise ValueError(f"core {i} has empty local dimension")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        for i in range(len(cores) - 1):
            if cores[i].shape[2] != cores[i + 1].shape[0]:
                raise ValueError(
                    f"bond mismatch between cores {i} and {i + 1}: "
                    f"{cores[i].shape[2]} != {cores[i + 1].shape[0]}")
        if check_finite:
            for i, c in enumerate(cores):
                if not np.all(np.isfinite(c)):
                    raise ValueError(f"core {i} contains non-finite entries")
        if axis_labels is not None and len(axis_labels) != len(cores):
            raise ValueError("axis_labels length must match core count")
        self.cores = cores
        self.axis_labels = list(axis_labels) if axis_labels is not None else None

    def __len__(self):
        return len(self.cores)

    @property
    def local_dims(self) -> tuple[int, ...]:
        return tuple(c.shape[1] for c in self.cores)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        """Interior bond dimensions (chi_1 .. chi_{d-1})."""
        return tuple(c.shape[2] for c in self.cores[:-1])

    def evaluate(self, idx) -> complex:
        """Value at a multi-index: product of the selected slice matrices."""
        idx = np.asarray(idx, dtype=np.int64)
        if idx.shape != (len(self.cores),):
            raise IndexError(f"expected {len(self.cores)} indices, got {idx.shape}")
        for i, (s, c) in enumerate(zip(idx, self.cores)):
            if not 0 <= s < c.shape[1]:
                raise IndexError(f"index {s} out of range for core {i} "
                                 f"(local dimension {c.shape[1]})")
        v = self.cores[0][:, idx[0], :]
        for i in range(1, len(self.cores)):
            v = v @ self.cores[i][:, idx[i], :]
        return complex(v[0, 0])

    def to_dense(self) -> np.ndarray:
        """Full tensor; only for small oracle-sized instances."""
        out = self.cores[0]
        for c in self.cores[1:]:
            out = np.tensordot(out, c, axes=(out.ndim - 1, 0))
        return out[0, ..., 0]

    def frobenius_norm(self) -> float:
        """sqrt(sum |entries|^2) via transfer-matrix accumulation."""
        acc = np.ones((1, 1), dtype=np.complex128)
        for c in self.cores:
            acc = np.einsum("xy,xsa,ysb->ab", acc, c, c.conj(), optimize=True)
        return float(np.sqrt(abs(acc[0, 0].real)))

    def scale(self, factor: complex) -> "TensorTrain":
        cores = [c.copy() for c in self.cores]
        cores[0] = cores[0] * factor
        return TensorTrain(cores, axis_labels=self.axis_labels)

    def copy(self) -> "TensorTrain":
        return TensorTrain([c.copy() for c in self.cores], axis_labels=self.axis_labels)


class TTOperator:
    """Chain of 4-way complex cores with shapes (chi_{i-1}, N_i, M_i, chi_i)."""

    def __init__(self, cores, check_finite=True):
        cores = [np.ascontiguousarray(c, dtype=np.complex128) for c in cores]
        if not cores:
            raise ValueError("operator needs at least one core")
        for i, c in enumerate(cores):
            if c.ndim != 4:
                raise ValueError(f"core {i} is {c.ndim}-way, expected 4-way")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise ValueError("boundary bond dimensions must be 1")
        for i in range(len(cores) - 1):
            if cores[i].shape[3] != cores[i + 1].shape[0]:
                raise ValueError(f"bond mismatch between cores {i} and {i + 1}")
        if check_finite:
            for i, c in enumerate(cores):
                if not np.all(np.isfinite(c)):
                    raise ValueError(f"core {i} contains non-finite entries")
        self.cores = cores

    def __len__(self):
        return len(self.cores)

    @property
    def local_dims(self) -> tuple[tuple[int, int], ...]:
        return tuple((c.shape[1], c.shape[2]) for c in self.cores)

    @property
    def bond_dims(self) -> tuple[int, ...]:
        return tuple(c.shape[3] for c in self.cores[:-1])

    def evaluate(self, kidx, lidx) -> complex:
        kidx = np.asarray(kidx, dtype=np.int64)
        lidx = np.asarray(lidx, dtype=np.int64)
        if kidx.shape != (len(self.cores),) or lidx.shape != (len(self.cores),):
            raise IndexError("index vectors must have one entry per core")
        v = self.cores[0][:, kidx[0], lidx[0], :]
        for i in range(1, len(self.cores)):
            v = v @ self.cores[i][:, kidx[i], lidx[i], :]
        return complex(v[0, 0])

    def to_tensor_train(self) -> TensorTrain:
        """Fuse the two local indices (first-major) into one 3-way chain."""
        fused = [c.reshape(c.shape[0], c.shape[1] * c.shape[2], c.shape[3])
                 for c in self.cores]
        return TensorTrain(fused)

    def copy(self) -> "TTOperator":
        return TTOperator([c.copy() for c in self.cores])


def ones_tt(dims) -> TensorTrain:
    """Bond-1 train of all ones."""
    return TensorTrain([np.ones((1, n, 1), dtype=np.complex128) for n in dims])


def rank_one_tt(vectors) -> TensorTrain:
    """Bond-1 train whose entries are the outer product of the given vectors."""
    return TensorTrain([np.asarray(v, dtype=np.complex128).reshape(1, -1, 1)
                        for v in vectors])


def from_dense(arr, eps: float = 0.0) -> TensorTrain:
    """TT-SVD of a dense tensor with relative squared-error budget eps."""
    arr = np.asarray(arr, dtype=np.complex128)
    dims = arr.shape
    total_sq = float(np.vdot(arr, arr).real)
    remaining = eps * total_sq
    cores = []
    mat = arr.reshape(1, -1)
    left = 1
    for n in dims[:-1]:
        mat = mat.reshape(left * n, -1)
        u, s, vh = svd(mat, full_matrices=False)
        keep = _rank_from_budget(s, remaining)
        remaining -= float(np.sum(s[keep:] ** 2))
        remaining = max(remaining, 0.0)
        cores.append(u[:, :keep].reshape(left, n, keep))
        mat = s[:keep, None] * vh[:keep]
        left = keep
    cores.append(mat.reshape(left, dims[-1], 1))
    return TensorTrain(cores)


def _rank_from_budget(s: np.ndarray, budget: float) -> int:
    """Largest kept rank whose discarded tail has squared sum <= budget."""
    if s.size == 0:
        return 1
    tail = np.cumsum(s[::-1] ** 2)[::-1]  # tail[k] = sum_{j>=k} s_j^2
    keep = s.size
    while keep > 1 and tail[keep - 1] <= budget:
        keep -= 1
    return keep


def svd_truncate(tt: TensorTrain, eps: float) -> TensorTrain:
    """Left-to-right QR canonicalization, then right-to-left SVD compression.

    The discarded squared singular values share a single budget of
    eps * |F|_F^2 over the sweep, so the output satisfies
    |F - F'|_F^2 / |F|_F^2 <= eps.  Bond dimensions never increase.
    """
    if eps < 0:
        raise ValueError("eps must be non-negative")
    cores = [c.copy() for c in tt.cores]
    d = len(cores)
    if d == 1:
        return tt.copy()

    for i in range(d - 1):
        chi_l, n, chi_r = cores[i].shape
        q, r = qr(cores[i].reshape(chi_l * n, chi_r), mode="economic")
        cores[i] = q.reshape(chi_l, n, q.shape[1])
        cores[i + 1] = np.tensordot(r, cores[i + 1], axes=(1, 0))

    total_sq = float(np.vdot(cores[-1], cores[-1]).real)
    remaining = eps * total_sq

    for i in range(d - 1, 0, -1):
        chi_l, n, chi_r = cores[i].shape
        u, s, vh = svd(cores[i].reshape(chi_l, n * chi_r), full_matrices=False)
        keep = _rank_from_budget(s, remaining)
        remaining -= float(np.sum(s[keep:] ** 2))
        remaining = max(remaining, 0.0)
        cores[i] = vh[:keep].reshape(keep, n, chi_r)
        carry = u[:, :keep] * s[:keep]
        cores[i - 1] = np.tensordot(cores[i - 1], carry, axes=(2, 0))

    return TensorTrain(cores, axis_labels=tt.axis_labels)


def elementwise_multiply(a: TensorTrain, b: TensorTrain) -> TensorTrain:
    """Hadamard product; each output bond is the product of the input bonds."""
    if len(a) != len(b):
        raise ValueError(f"core counts differ: {len(a)} vs {len(b)}")
    if a.local_dims != b.local_dims:
        raise ValueError(f"local dimensions differ: {a.local_dims} vs {b.local_dims}")
    cores = []
    for ca, cb in zip(a.cores, b.cores):
        prod = np.einsum("asb,csd->acsbd", ca, cb, optimize=True)
        la, lb = ca.shape[0], cb.shape[0]
        ra, rb = ca.shape[2], cb.shape[2]
        cores.append(prod.reshape(la * lb, ca.shape[1], ra * rb))
    return TensorTrain(cores, axis_labels=a.axis_labels)


def sum_over_axes(tt: TensorTrain, axes):
    """Contract the listed cores with all-ones vectors on their local index.

    Each summed core collapses to a bond matrix absorbed into its right
    neighbor (left neighbor when it has none).  Summing every axis leaves
    no cores, in which case the scalar value is returned instead.
    """
    axes = set(int(ax) for ax in axes)
    d = len(tt)
    for ax in axes:
        if not 0 <= ax < d:
            raise IndexError(f"axis {ax} out of range for {d} cores")

    new_cores = []
    new_labels = [] if tt.axis_labels is not None else None
    pending = None  # bond matrix waiting to be absorbed rightwards
    for i, core in enumerate(tt.cores):
        if i in axes:
            m = core.sum(axis=1)
            pending = m if pending is None else pending @ m
        else:
            if pending is not None:
                core = np.tensordot(pending, core, axes=(1, 0))
                pending = None
            new_cores.append(core.copy())
            if new_labels is not None:
                new_labels.append(tt.axis_labels[i])
    if not new_cores:
        return complex(pending[0, 0])
    if pending is not None:  # trailing summed cores absorb into the last kept core
        new_cores[-1] = np.tensordot(new_cores[-1], pending, axes=(2, 0))
    return TensorTrain(new_cores, axis_labels=new_labels)


def multiply_and_sum_fused(a: TensorTrain, b: TensorTrain, axes,
                           noise_cut: float = 1e-15):
    """Hadamard product of two trains contracted over the given axes,
    without materializing any product core.

    Equivalent to sum_over_axes(elementwise_multiply(a, b), axes) but the
    summed axes are contracted on the fly and the kept cores are compressed
    by a streaming SVD that discards only singular values below noise_cut
    relative to the local largest (float-noise rank, lossless at working
    precision).  Peak memory stays near the output size even when the
    product bonds would be enormous.  Returns a scalar when every axis is
    summed.
    """
    if len(a) != len(b):
        raise ValueError(f"core counts differ: {len(a)} vs {len(b)}")
    if a.local_dims != b.local_dims:
        raise ValueError(f"local dimensions differ: {a.local_dims} vs {b.local_dims}")
    axes = set(int(ax) for ax in axes)
    d = len(a)
    for ax in axes:
        if not 0 <= ax < d:
            raise IndexError(f"axis {ax} out of range for {d} cores")

    chunk = 32
    carry = np.ones((1, 1, 1), dtype=np.complex128)  # (rows, bond_a, bond_b)
    out_cores: list[np.ndarray] = []
    kept = [i for i in range(d) if i not in axes]
    last_kept = kept[-1] if kept else -1

    for i in range(d):
        ca, cb = a.cores[i], b.cores[i]
        n = ca.shape[1]
        if i in axes:
            ra, rb = ca.shape[2], cb.shape[2]
            acc = np.zeros((carry.shape[0], ra, rb), dtype=np.complex128)
            for j0 in range(0, n, chunk):
                sl = slice(j0, min(j0 + chunk, n))
                acc += np.einsum("xpq,pjb,qjd->xbd", carry, ca[:, sl, :],
                                 cb[:, sl, :], optimize=True)
            carry = acc
        else:
            core = np.einsum("xpq,psb,qsd->xsbd", carry, ca, cb, optimize=True)
            rows, _, ra, rb = core.shape
            if i == last_kept:
                # keep the full right bond; any trailing summed axes fold
                # into a column vector absorbed below
                out_cores.append(core.reshape(rows, n, ra * rb))
                carry = np.eye(ra * rb, dtype=np.complex128).reshape(ra * rb, ra, rb)
            else:
                mat = core.reshape(rows * n, ra * rb)
                u, s, vh = svd(mat, full_matrices=False)
                keep = max(1, int(np.sum(s > noise_cut * s[0])))
                out_cores.append(u[:, :keep].reshape(rows, n, keep))
                carry = (s[:keep, None] * vh[:keep]).reshape(keep, ra, rb)

    if not out_cores:
        return complex(carry[0, 0, 0])
    tail = carry.reshape(carry.shape[0], carry.shape[1] * carry.shape[2])
    out_cores[-1] = np.tensordot(out_cores[-1], tail, axes=(2, 0))
    return TensorTrain(out_cores)


def merge_adjacent_cores(tt: TensorTrain, i: int) -> TensorTrain:
    """Contract cores i and i+1 into one core with fused local index.

    The fused index is first-major: s_fused = s_i * N_{i+1} + s_{i+1}.
    """
    if not 0 <= i < len(tt) - 1:
        raise IndexError(f"no adjacent pair at position {i}")
    ca, cb = tt.cores[i], tt.cores[i + 1]
    merged = np.tensordot(ca, cb, axes=(2, 0))
    chi_l, na, nb, chi_r = merged.shape
    cores = (tt.cores[:i] + [merged.reshape(chi_l, na * nb, chi_r)]
             + tt.cores[i + 2:])
    labels = None
    if tt.axis_labels is not None:
        labels = (tt.axis_labels[:i]
                  + [f"{tt.axis_labels[i]}*{tt.axis_labels[i + 1]}"]
                  + tt.axis_labels[i + 2:])
    return TensorTrain([c.copy() for c in cores], axis_labels=labels)


def merge_pairs_to_operator(tt: TensorTrain) -> TTOperator:
    """Merge cores pairwise, (0,1), (2,3), ..., keeping 4-way cores."""
    if len(tt) % 2 != 0:
        raise ValueError("pairwise merge needs an even number of cores")
    cores = []
    for i in range(0, len(tt), 2):
        cores.append(np.tensordot(tt.cores[i], tt.cores[i + 1], axes=(2, 0)))
    return TTOperator(cores)


def insert_identity_cores(tt: TensorTrain, positions, local_dims) -> TensorTrain:
    """Insert Kronecker-delta cores at gaps in the chain.

    ``positions[j]`` is a gap index in 0..len(tt) (0 = before the first
    core); the inserted core has shape (chi, local_dims[j], chi) with
    entries delta_{ab}, where chi is the bond crossing that gap.
    Evaluations are independent of the new indices.
    """
    positions = list(positions)
    local_dims = list(local_dims)
    if len(positions) != len(local_dims):
        raise ValueError("positions and local_dims must have equal length")
    d = len(tt)
    by_gap: dict[int, list[int]] = {}
    for g, n in zip(positions, local_dims):
        if not 0 <= g <= d:
            raise IndexError(f"gap {g} out of range for {d} cores")
        if n < 1:
            raise ValueError("inserted local dimension must be >= 1")
        by_gap.setdefault(int(g), []).append(int(n))

    def dummy(chi, n):
        core = np.zeros((chi, n, chi), dtype=np.complex128)
        core[np.arange(chi), :, np.arange(chi)] = 1.0
        return core

    new_cores = []
    new_labels = [] if tt.axis_labels is not None else None
    for g in range(d + 1):
        chi = 1 if g == 0 else tt.cores[g - 1].shape[2]
        for n in by_gap.get(g, []):
            new_cores.append(dummy(chi, n))
            if new_labels is not None:
                new_labels.append("dummy")
        if g < d:
            new_cores.append(tt.cores[g].copy())
            if new_labels is not None:
                new_labels.append(tt.axis_labels[g])
    return TensorTrain(new_cores, axis_labels=new_labels)


def apply_matrix_to_core(tt: TensorTrain, i: int, matrix) -> TensorTrain:
    """Apply a matrix to the local index of core i; bonds are untouched."""
    if not 0 <= i < len(tt):
        raise IndexError(f"core {i} out of range")
    m = np.asarray(matrix, dtype=np.complex128)
    n = tt.cores[i].shape[1]
    if m.shape != (n, n):
        raise ValueError(f"matrix shape {m.shape} does not match local dimension {n}")
    cores = [c.copy() for c in tt.cores]
    cores[i] = np.einsum("st,atb->asb", m, cores[i], optimize=True)
    return TensorTrain(cores, axis_labels=tt.axis_labels)


def write_ttg(path, tt: TensorTrain) -> None:
    """Write the binary TT artifact: magic TTG1, version, cores with dims."""
    with open(path, "wb") as fh:
        fh.write(_TTG_MAGIC)
        fh.write(struct.pack("<I", _TTG_VERSION))
        fh.write(struct.pack("<I", len(tt.cores)))
        for c in tt.cores:
            chi_l, n, chi_r = c.shape
            fh.write(struct.pack("<III", chi_l, n, chi_r))
            fh.write(np.ascontiguousarray(c, dtype="<c16").tobytes())


def read_ttg(path) -> TensorTrain:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _TTG_MAGIC:
            raise ValueError(f"not a TT artifact (bad magic {magic!r})")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _TTG_VERSION:
            raise ValueError(f"unsupported TT artifact version {version}")
        (count,) = struct.unpack("<I", fh.read(4))
        cores = []
        for _ in range(count):
            chi_l, n, chi_r = struct.unpack("<III", fh.read(12))
            size = chi_l * n * chi_r
            data = np.frombuffer(fh.read(16 * size), dtype="<c16", count=size)
            cores.append(data.reshape(chi_l, n, chi_r).astype(np.complex128))
    return TensorTrain(cores)
