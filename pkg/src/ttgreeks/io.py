"""Artifact persistence: binary tensor payload plus a JSON metadata sidecar.

The payload is the TTG1 container (each merged 4-way core stored with its
two local indices fused, first-major); the sidecar records the prefactor,
axis grids, asset ordering, model data, and quantity tags needed to
reconstruct the evaluator exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .blackscholes import ModelSpec
from .grids import AxisGrid
from .pipeline import GreekTensor, PriceTensor
from .tensor_train import TensorTrain, read_ttg, write_ttg

__all__ = ["save_tensor", "load_tensor", "meta_path"]

_META_VERSION = 1


def meta_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def _model_to_dict(spec: ModelSpec) -> dict:
    return {
        "d": spec.d,
        "r": spec.r,
        "T": spec.T,
        "K": spec.K,
        "alpha": spec.alpha.tolist(),
        "rho": spec.rho.tolist(),
        "sigma_range": [list(r) for r in spec.sigma_range],
        "s0_range": [list(r) for r in spec.s0_range],
    }


def model_from_dict(d: dict) -> ModelSpec:
    return ModelSpec(d=int(d["d"]), r=float(d["r"]), T=float(d["T"]),
                     K=float(d["K"]), rho=np.asarray(d["rho"]),
                     alpha=np.asarray(d["alpha"]),
                     sigma_range=tuple(tuple(r) for r in d["sigma_range"]),
                     s0_range=tuple(tuple(r) for r in d["s0_range"]))


def save_tensor(path, tensor, spec: ModelSpec | None = None) -> None:
    """Write the fused-core payload and its metadata sidecar."""
    path = Path(path)
    fused = [c.reshape(c.shape[0], c.shape[1] * c.shape[2], c.shape[3])
             for c in tensor.cores]
    write_ttg(path, TensorTrain(fused))
    meta = {
        "artifact": "merged-param-tensor",
        "version": _META_VERSION,
        "quantity": tensor.quantity,
        "prefactor": [tensor.prefactor.real, tensor.prefactor.imag],
        "ordering": tensor.ordering.tolist(),
        "local_dims": [[c.shape[1], c.shape[2]] for c in tensor.cores],
        "sigma_axes": [ax.to_dict() for ax in tensor.sigma_axes],
        "s0_axes": [ax.to_dict() for ax in tensor.s0_axes],
    }
    if isinstance(tensor, GreekTensor):
        meta["greek"] = tensor.greek
        meta["kappa"] = tensor.kappa
        meta["method"] = tensor.method
    if spec is not None:
        meta["model"] = _model_to_dict(spec)
    with open(meta_path(path), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=1)


def load_tensor(path):
    """Read an artifact pair back into a price or Greek tensor.

    Returns (tensor, model_spec_or_None).
    """
    path = Path(path)
    tt = read_ttg(path)
    mpath = meta_path(path)
    if not mpath.exists():
        raise FileNotFoundError(f"metadata sidecar missing: {mpath}")
    with open(mpath, encoding="utf-8") as fh:
        meta = json.load(fh)
    if meta.get("artifact") != "merged-param-tensor":
        raise ValueError(f"{mpath} is not a merged-tensor sidecar")
    if meta.get("version") != _META_VERSION:
        raise ValueError(f"stale artifact version {meta.get('version')} "
                         f"(expected {_META_VERSION})")
    cores = []
    for core, (nk, nl) in zip(tt.cores, meta["local_dims"]):
        if core.shape[1] != nk * nl:
            raise ValueError("payload local dimension does not match sidecar")
        cores.append(core.reshape(core.shape[0], nk, nl, core.shape[2]))
    prefactor = complex(meta["prefactor"][0], meta["prefactor"][1])
    sigma_axes = [AxisGrid.from_dict(d) for d in meta["sigma_axes"]]
    s0_axes = [AxisGrid.from_dict(d) for d in meta["s0_axes"]]
    ordering = np.asarray(meta["ordering"], dtype=int)
    if "greek" in meta:
        tensor = GreekTensor(cores, prefactor, sigma_axes, s0_axes, ordering,
                             greek=meta["greek"], kappa=meta["kappa"],
                             method=meta["method"])
    else:
        tensor = PriceTensor(cores, prefactor, sigma_axes, s0_axes, ordering)
    spec = model_from_dict(meta["model"]) if "model" in meta else None
    return tensor, spec
