"""Run configuration: JSON file schema, validation, and object assembly."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from jsonschema import Draft202012Validator

from .blackscholes import ModelSpec, correlation_fixture
from .montecarlo import McConfig
from .pipeline import GridSet, ToleranceSet

__all__ = ["ConfigError", "RunConfig", "load_config", "CONFIG_SCHEMA"]


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


_range_schema = {
    "oneOf": [
        {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        {"type": "array",
         "items": {"type": "array", "items": {"type": "number"},
                   "minItems": 2, "maxItems": 2}},
    ]
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "grids"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["d", "r", "T", "K", "rho"],
            "additionalProperties": False,
            "properties": {
                "d": {"type": "integer", "minimum": 1},
                "r": {"type": "number"},
                "T": {"type": "number", "exclusiveMinimum": 0},
                "K": {"type": "number", "exclusiveMinimum": 0},
                "alpha": {"oneOf": [{"const": "auto"},
                                    {"type": "array", "items": {"type": "number"}}]},
                "rho": {"oneOf": [{"enum": ["const", "noise", "rand"]},
                                  {"type": "array",
                                   "items": {"type": "array",
                                             "items": {"type": "number"}}}]},
                "sigma_range": _range_schema,
                "s0_range": _range_schema,
            },
        },
        "grids": {
            "type": "object",
            "required": ["n_z", "r_z", "n_p"],
            "additionalProperties": False,
            "properties": {
                "n_z": {"type": "integer", "minimum": 3},
                "r_z": {"type": "number", "exclusiveMinimum": 0},
                "n_p": {"type": "integer", "minimum": 2},
            },
        },
        "tolerances": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tci": {"type": "number", "exclusiveMinimum": 0},
                "svd_phi": {"type": "number", "exclusiveMinimum": 0},
                "svd_payoff": {"type": "number", "exclusiveMinimum": 0},
                "svd_price_jkl": {"type": "number", "exclusiveMinimum": 0},
                "svd_price_kl": {"type": "number", "exclusiveMinimum": 0},
                "svd_greeks": {"type": "number", "exclusiveMinimum": 0},
                "max_bond": {"type": "integer", "minimum": 1},
                "max_sweeps": {"type": "integer", "minimum": 1},
            },
        },
        "pipeline": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "layout": {"enum": ["interleaved", "separated"]},
                "reorder_assets": {"type": "boolean"},
                "bond_product_cap": {"type": "integer", "minimum": 1},
            },
        },
        "mc": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_paths": {"type": "integer", "minimum": 1},
                "n_paths_reference": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
                "h_vega": {"type": "number", "exclusiveMinimum": 0},
                "h_spot": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "compare": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_points": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
        },
        "outputs": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}},
        },
    },
}


@dataclass
class RunConfig:
    """Validated configuration assembled into engine objects."""

    model: ModelSpec
    n_gauss: int
    r_z: float
    n_p: int
    tols: ToleranceSet
    mc: McConfig
    n_paths_reference: int = 1_000_000
    layout: str = "interleaved"
    reorder_assets: bool = False
    bond_product_cap: int = 4096
    compare_points: int = 16
    compare_seed: int = 1234
    output_dir: Path = field(default_factory=lambda: Path("out"))

    def grid_set(self) -> GridSet:
        return GridSet.build(self.model, self.n_gauss, self.r_z, self.n_p)


def _resolve_rho(raw, d: int) -> np.ndarray:
    if isinstance(raw, str):
        if raw == "const":
            m = np.full((d, d), 0.5)
            np.fill_diagonal(m, 1.0)
            return m
        full = correlation_fixture(raw)
        if d > full.shape[0]:
            raise ConfigError(
                f"correlation fixture {raw!r} provides 5 assets; got d={d}")
        return full[:d, :d]
    m = np.asarray(raw, dtype=float)
    if m.shape != (d, d):
        raise ConfigError(f"correlation matrix must be {d}x{d}, got {m.shape}")
    return m


def load_config(path) -> RunConfig:
    """Parse and validate a JSON run configuration."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from exc

    errors = sorted(Draft202012Validator(CONFIG_SCHEMA).iter_errors(raw),
                    key=lambda e: list(e.path))
    if errors:
        joined = "; ".join(f"{'/'.join(str(p) for p in e.path) or '<root>'}: "
                           f"{e.message}" for e in errors)
        raise ConfigError(f"config schema violations: {joined}")

    m = raw["model"]
    d = m["d"]
    alpha = m.get("alpha", "auto")
    try:
        model = ModelSpec(
            d=d, r=m["r"], T=m["T"], K=m["K"],
            rho=_resolve_rho(m["rho"], d),
            alpha=None if alpha == "auto" else np.asarray(alpha, dtype=float),
            sigma_range=tuple(map(tuple, np.atleast_2d(m.get("sigma_range", (0.15, 0.25))))),
            s0_range=tuple(map(tuple, np.atleast_2d(m.get("s0_range", (90.0, 120.0))))))
    except ValueError as exc:
        raise ConfigError(f"invalid model: {exc}") from exc

    g = raw["grids"]
    if g["n_z"] % 2 == 0:
        raise ConfigError("n_z must be odd (Kronrod rules have 2n+1 nodes)")
    tol_kwargs = raw.get("tolerances", {})
    try:
        tols = ToleranceSet(**tol_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid tolerances: {exc}") from exc

    mc_raw = dict(raw.get("mc", {}))
    n_ref = mc_raw.pop("n_paths_reference", 1_000_000)
    try:
        mc = McConfig(**mc_raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid mc section: {exc}") from exc

    pl = raw.get("pipeline", {})
    cmp_raw = raw.get("compare", {})
    return RunConfig(
        model=model,
        n_gauss=(g["n_z"] - 1) // 2,
        r_z=g["r_z"],
        n_p=g["n_p"],
        tols=tols,
        mc=mc,
        n_paths_reference=n_ref,
        layout=pl.get("layout", "interleaved"),
        reorder_assets=pl.get("reorder_assets", False),
        bond_product_cap=pl.get("bond_product_cap", 4096),
        compare_points=cmp_raw.get("n_points", 16),
        compare_seed=cmp_raw.get("seed", 1234),
        output_dir=Path(raw.get("outputs", {}).get("dir", "out")))
