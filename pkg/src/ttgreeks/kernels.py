"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

Three loops dominate runtime: the online contraction of merged parameter
tensors, batched tensor-train evaluation (cross-interpolation error scans),
and batched characteristic-function evaluation (the cross-interpolation
black box).  Each has a numba @njit build and a numpy fallback; the numba
path is used when available unless TTGREEKS_DISABLE_NUMBA=1 is set.

Contraction kernels return exact multiply-add counts alongside values so
per-query cost is measured, not estimated.
"""

import os

import numpy as np

_DISABLE = os.environ.get("TTGREEKS_DISABLE_NUMBA", "").strip() in ("1", "true", "yes")

try:
    from numba import njit
    from numba.typed import List as _NumbaList

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

USING_NUMBA = HAVE_NUMBA and not _DISABLE

__all__ = [
    "USING_NUMBA",
    "HAVE_NUMBA",
    "prepare_cores3",
    "prepare_cores4",
    "contract_chain",
    "eval_tt_batch",
    "char_fn_batch",
]


# ---------------------------------------------------------------- numpy path

def _contract_chain_np(cores, kidx, lidx):
    v = cores[0][0, kidx[0], lidx[0], :]
    flops = cores[0].shape[0] * cores[0].shape[3]
    for i in range(1, len(cores)):
        m = cores[i][:, kidx[i], lidx[i], :]
        flops += m.shape[0] * m.shape[1]
        v = v @ m
    return complex(v[0]), flops


def _eval_tt_batch_np(cores, idx):
    v = cores[0][0, idx[:, 0], :]
    for i in range(1, len(cores)):
        m = cores[i][:, idx[:, i], :]
        v = np.einsum("nl,lnr->nr", v, m, optimize=True)
    return v[:, 0]


def _char_fn_batch_np(w, sigma, s0, rho, r, t_mat):
    mu = np.log(s0) + (r - 0.5 * sigma**2) * t_mat
    lin = np.sum(w * mu, axis=1)
    sw = sigma * w
    quad = np.einsum("nm,mk,nk->n", sw, rho, sw, optimize=True)
    return np.exp(1j * lin - 0.5 * t_mat * quad)


# ---------------------------------------------------------------- numba path

if HAVE_NUMBA:

    @njit(cache=True)
    def _contract_chain_nb(cores, kidx, lidx):
        v = cores[0][0, kidx[0], lidx[0], :].copy()
        flops = cores[0].shape[3]
        for i in range(1, len(cores)):
            m = cores[i]
            chi_l = m.shape[0]
            chi_r = m.shape[3]
            out = np.zeros(chi_r, dtype=np.complex128)
            k = kidx[i]
            l = lidx[i]
            for a in range(chi_l):
                va = v[a]
                for b in range(chi_r):
                    out[b] += va * m[a, k, l, b]
            v = out
            flops += chi_l * chi_r
        return v[0], flops

    @njit(cache=True)
    def _eval_tt_batch_nb(cores, idx):
        n = idx.shape[0]
        out = np.empty(n, dtype=np.complex128)
        for t in range(n):
            v = cores[0][0, idx[t, 0], :].copy()
            for i in range(1, len(cores)):
                m = cores[i]
                chi_l = m.shape[0]
                chi_r = m.shape[2]
                s = idx[t, i]
                nv = np.zeros(chi_r, dtype=np.complex128)
                for a in range(chi_l):
                    va = v[a]
                    for b in range(chi_r):
                        nv[b] += va * m[a, s, b]
                v = nv
            out[t] = v[0]
        return out

    @njit(cache=True)
    def _char_fn_batch_nb(w, sigma, s0, rho, r, t_mat):
        n, d = w.shape
        out = np.empty(n, dtype=np.complex128)
        for p in range(n):
            lin = 0.0 + 0.0j
            for m in range(d):
                mu = np.log(s0[p, m]) + (r - 0.5 * sigma[p, m] ** 2) * t_mat
                lin += w[p, m] * mu
            quad = 0.0 + 0.0j
            for m in range(d):
                swm = sigma[p, m] * w[p, m]
                for k in range(d):
                    quad += swm * rho[m, k] * sigma[p, k] * w[p, k]
            out[p] = np.exp(1j * lin - 0.5 * t_mat * quad)
        return out


def prepare_cores3(cores):
    """Backend container for a list of 3-way cores."""
    arrs = [np.ascontiguousarray(c, dtype=np.complex128) for c in cores]
    if USING_NUMBA:
        lst = _NumbaList()
        for c in arrs:
            lst.append(c)
        return lst
    return arrs


def prepare_cores4(cores):
    """Backend container for a list of 4-way cores."""
    arrs = [np.ascontiguousarray(c, dtype=np.complex128) for c in cores]
    if USING_NUMBA:
        lst = _NumbaList()
        for c in arrs:
            lst.append(c)
        return lst
    return arrs


def contract_chain(cores, kidx, lidx):
    """Contract 4-way cores at fixed local indices.

    Returns (value, multiply-add count); `cores` must come from
    prepare_cores4.
    """
    kidx = np.asarray(kidx, dtype=np.int64)
    lidx = np.asarray(lidx, dtype=np.int64)
    if USING_NUMBA:
        val, flops = _contract_chain_nb(cores, kidx, lidx)
        return complex(val), int(flops)
    return _contract_chain_np(cores, kidx, lidx)


def eval_tt_batch(cores, idx):
    """Evaluate a 3-way-core train at many multi-indices (rows of idx)."""
    idx = np.ascontiguousarray(idx, dtype=np.int64)
    if idx.ndim != 2:
        raise ValueError("idx must be a 2-d array of multi-indices")
    if idx.shape[0] == 0:
        return np.empty(0, dtype=np.complex128)
    if USING_NUMBA:
        return _eval_tt_batch_nb(cores, idx)
    return _eval_tt_batch_np(cores, idx)


def char_fn_batch(w, sigma, s0, rho, r, t_mat):
    """Multi-asset lognormal characteristic function at complex arguments.

    w, sigma, s0 are (n, d) sample blocks; rho the correlation matrix.
    """
    w = np.ascontiguousarray(w, dtype=np.complex128)
    sigma = np.ascontiguousarray(sigma, dtype=np.float64)
    s0 = np.ascontiguousarray(s0, dtype=np.float64)
    rho = np.ascontiguousarray(rho, dtype=np.float64)
    if USING_NUMBA:
        return _char_fn_batch_nb(w, sigma, s0, rho, float(r), float(t_mat))
    return _char_fn_batch_np(w, sigma, s0, rho, float(r), float(t_mat))
