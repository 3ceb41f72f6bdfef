"""Command-line front end.

Subcommands: build (offline phase, writes artifacts), eval (online queries
to CSV), compare (RMSE/cost report against Monte Carlo), slice (1-d sweeps
for plotting), bench-mc (standalone Monte Carlo estimates).  Exit codes:
0 ok, 2 configuration error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from .blackscholes import ModelSpec
from .config import ConfigError, RunConfig, load_config
from .io import load_tensor, save_tensor
from .montecarlo import McConfig, mc_greek_fd, mc_price, mv_greeks
from .pipeline import (BondCapExceeded, FlopCounter, GreekTensor,
                       build_price_tt, evaluate_at, nd_greek_from_price)

GREEKS = ("vega", "delta", "gamma")
UNITS = {"price": "currency", "vega": "currency/vol",
         "delta": "dimensionless", "gamma": "1/currency"}

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (BondCapExceeded, OverflowError, FloatingPointError,
            np.linalg.LinAlgError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


def _build_parser():
    p = argparse.ArgumentParser(prog="ttgreeks",
                                description="Tensor-train Fourier pricing and Greeks")
    sub = p.add_subparsers(required=True)

    b = sub.add_parser("build", help="run the offline phase, write artifacts")
    b.add_argument("-c", "--config", required=True)
    b.add_argument("-o", "--out", default=None,
                   help="output directory (default: config outputs.dir)")
    b.add_argument("--an-greeks", default="",
                   help="comma list of analytic Greek artifacts to build, "
                        "e.g. vega:1,gamma:2, or 'all'")
    b.set_defaults(func=cmd_build)

    e = sub.add_parser("eval", help="evaluate artifacts at grid points")
    e.add_argument("-a", "--artifacts", required=True,
                   help="directory produced by build")
    e.add_argument("--points", default=None,
                   help="CSV of grid indices (k_i, l_i) or node values "
                        "(sigma_i, s0_i)")
    e.add_argument("--random", type=int, default=0,
                   help="evaluate at this many random grid nodes instead")
    e.add_argument("--seed", type=int, default=1234)
    e.add_argument("--quantity", action="append", default=None,
                   help="price or greek:kappa (repeatable; default: price)")
    e.add_argument("--method", default="nd,an",
                   help="comma list among nd, an (for Greeks)")
    e.add_argument("-o", "--out", default="-", help="output CSV ('-' = stdout)")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("compare", help="RMSE and cost report vs Monte Carlo")
    c.add_argument("-a", "--artifacts", required=True)
    c.add_argument("-c", "--config", required=True)
    c.add_argument("--kappa", type=int, default=1)
    c.add_argument("--n-points", type=int, default=None)
    c.add_argument("-o", "--out", default=None, help="report JSON path")
    c.set_defaults(func=cmd_compare)

    s = sub.add_parser("slice", help="sweep one axis, emit plot data")
    s.add_argument("-a", "--artifacts", required=True)
    s.add_argument("-c", "--config", required=True)
    s.add_argument("--axis", required=True, help="sigma:KAPPA or s0:KAPPA")
    s.add_argument("--fixed-index", type=int, default=None,
                   help="grid index for all frozen axes (default: middle)")
    s.add_argument("--mc-paths", type=int, default=100_000)
    s.add_argument("-o", "--out", default="-")
    s.set_defaults(func=cmd_slice)

    m = sub.add_parser("bench-mc", help="standalone Monte Carlo benchmark rows")
    m.add_argument("-c", "--config", required=True)
    m.add_argument("--sigma", default=None, help="comma list (default mid-range)")
    m.add_argument("--s0", default=None, help="comma list (default mid-range)")
    m.add_argument("--kappa", type=int, default=1)
    m.add_argument("-o", "--out", default="-")
    m.set_defaults(func=cmd_bench_mc)
    return p


# ------------------------------------------------------------------- build

def _parse_greek_requests(text: str, d: int):
    if not text:
        return []
    if text.strip() == "all":
        return [(g, k) for g in GREEKS for k in range(1, d + 1)]
    out = []
    for item in text.split(","):
        name, _, kap = item.strip().partition(":")
        if name not in GREEKS:
            raise ConfigError(f"unknown greek {name!r} in --an-greeks")
        k = int(kap) if kap else 1
        if not 1 <= k <= d:
            raise ConfigError(f"kappa {k} out of range 1..{d}")
        out.append((name, k))
    return out


def cmd_build(args) -> int:
    cfg = load_config(args.config)
    outdir = Path(args.out) if args.out else cfg.output_dir
    outdir.mkdir(parents=True, exist_ok=True)
    wanted = _parse_greek_requests(args.an_greeks, cfg.model.d)

    result = build_price_tt(cfg.model, cfg.grid_set(), cfg.tols,
                            layout=cfg.layout, reorder=cfg.reorder_assets,
                            bond_cap=cfg.bond_product_cap,
                            keep_intermediates=bool(wanted))
    save_tensor(outdir / "price.ttg", result.price, spec=cfg.model)
    for greek, kappa in wanted:
        tensor = result.an_greek(greek, kappa)
        save_tensor(outdir / f"{greek}_{kappa}_an.ttg", tensor, spec=cfg.model)

    report = dict(result.report)
    report["price_artifact"] = str(outdir / "price.ttg")
    report["an_artifacts"] = [f"{g}_{k}_an.ttg" for g, k in wanted]
    with open(outdir / "build_report.json", "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=1)
    print(f"wrote {outdir / 'price.ttg'} "
          f"(bonds {list(result.price.bond_dims)}) and build_report.json")
    return 0


# -------------------------------------------------------------------- eval

def _load_artifact_dir(dirpath):
    dirpath = Path(dirpath)
    price_path = dirpath / "price.ttg"
    if not price_path.exists():
        raise ConfigError(f"no price.ttg under {dirpath}")
    price, spec = load_tensor(price_path)
    an = {}
    for pathobj in sorted(dirpath.glob("*_an.ttg")):
        tensor, _ = load_tensor(pathobj)
        if isinstance(tensor, GreekTensor):
            an[(tensor.greek, tensor.kappa)] = tensor
    return price, spec, an


def _match_node(value: float, nodes: np.ndarray, label: str) -> int:
    scale = 1.0 + abs(value)
    hits = np.flatnonzero(np.abs(nodes - value) <= 1e-9 * scale)
    if hits.size == 0:
        near = int(np.argmin(np.abs(nodes - value)))
        raise ConfigError(
            f"off-grid {label}={value}; nearest node is {nodes[near]:.12g} "
            f"(index {near}); on-grid queries only")
    return int(hits[0])


def _read_points(path, price, d: int):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        headers = reader.fieldnames or []
        rows = list(reader)
    idx_mode = all(f"k_{i}" in headers and f"l_{i}" in headers
                   for i in range(1, d + 1))
    val_mode = all(f"sigma_{i}" in headers and f"s0_{i}" in headers
                   for i in range(1, d + 1))
    if not idx_mode and not val_mode:
        raise ConfigError(
            "points file needs either k_i/l_i index columns or "
            "sigma_i/s0_i node-value columns for every asset")
    points = []
    for row in rows:
        if idx_mode:
            k = [int(row[f"k_{i}"]) for i in range(1, d + 1)]
            l = [int(row[f"l_{i}"]) for i in range(1, d + 1)]
        else:
            k = [_match_node(float(row[f"sigma_{i}"]),
                             price.sigma_axes[i - 1].nodes, f"sigma_{i}")
                 for i in range(1, d + 1)]
            l = [_match_node(float(row[f"s0_{i}"]),
                             price.s0_axes[i - 1].nodes, f"s0_{i}")
                 for i in range(1, d + 1)]
        points.append((k, l))
    return points


def _random_points(price, n: int, seed: int):
    rng = np.random.default_rng(seed)
    d = price.d
    return [(list(rng.integers(0, price.sigma_axes[a].size) for a in range(d)),
             list(rng.integers(0, price.s0_axes[a].size) for a in range(d)))
            for _ in range(n)]


def _parse_quantities(raw, d: int):
    if not raw:
        return [("price", None)]
    out = []
    for item in raw:
        for piece in item.split(","):
            piece = piece.strip()
            if piece == "price":
                out.append(("price", None))
                continue
            if piece == "all":
                out.append(("price", None))
                out.extend((g, k) for g in GREEKS for k in range(1, d + 1))
                continue
            name, _, kap = piece.partition(":")
            if name not in GREEKS:
                raise ConfigError(f"unknown quantity {piece!r}")
            out.append((name, int(kap) if kap else 1))
    return out


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w", newline="",
                                               encoding="utf-8")


def cmd_eval(args) -> int:
    price, spec, an = _load_artifact_dir(args.artifacts)
    d = price.d
    if args.points is None and args.random <= 0:
        raise ConfigError("need --points FILE or --random N")
    points = (_read_points(args.points, price, d) if args.points
              else _random_points(price, args.random, args.seed))
    quantities = _parse_quantities(args.quantity, d)
    methods = [m.strip() for m in args.method.split(",") if m.strip()]
    for m in methods:
        if m not in ("nd", "an"):
            raise ConfigError(f"unknown method {m!r}")

    nd_cache: dict = {}
    fh = _open_out(args.out)
    writer = csv.writer(fh)
    header = (["point"]
              + [f"sigma_{i}" for i in range(1, d + 1)]
              + [f"s0_{i}" for i in range(1, d + 1)]
              + ["quantity", "kappa", "method", "value", "units"])
    writer.writerow(header)
    for pid, (k, l) in enumerate(points):
        sig = [price.sigma_axes[a].nodes[k[a]] for a in range(d)]
        s0 = [price.s0_axes[a].nodes[l[a]] for a in range(d)]
        for name, kappa in quantities:
            if name == "price":
                val = evaluate_at(price, k, l)
                writer.writerow([pid] + sig + s0
                                + ["price", "", "tt", f"{val!r}", UNITS["price"]])
                continue
            for method in methods:
                if method == "nd":
                    key = (name, kappa)
                    if key not in nd_cache:
                        nd_cache[key] = nd_greek_from_price(price, name, kappa)
                    val = evaluate_at(nd_cache[key], k, l)
                elif (name, kappa) in an:
                    val = evaluate_at(an[(name, kappa)], k, l)
                else:
                    continue  # analytic artifact not built
                writer.writerow([pid] + sig + s0
                                + [name, kappa, f"tt-{method}", f"{val!r}",
                                   UNITS[name]])
    if fh is not sys.stdout:
        fh.close()
    return 0


# ----------------------------------------------------------------- compare

def _tt_sweep(tensor, points):
    counter = FlopCounter()
    values = np.empty(len(points))
    evaluate_at(tensor, *points[0])  # warm-up: JIT compile outside the timer
    t0 = time.perf_counter()
    for i, (k, l) in enumerate(points):
        values[i] = evaluate_at(tensor, k, l, counter)
    dt = (time.perf_counter() - t0) / len(points)
    return values, counter.per_call, dt


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    price, spec, an = _load_artifact_dir(args.artifacts)
    if spec is None:
        spec = cfg.model
    d = price.d
    kappa = args.kappa
    if not 1 <= kappa <= d:
        raise ConfigError(f"kappa must be in 1..{d}")
    n_points = args.n_points or cfg.compare_points
    points = _random_points(price, n_points, cfg.compare_seed)

    tensors = {("price", "nd"): price, ("price", "an"): price}
    for g in GREEKS:
        tensors[(g, "nd")] = nd_greek_from_price(price, g, kappa)
        if (g, kappa) in an:
            tensors[(g, "an")] = an[(g, kappa)]

    rows = {}
    ref_cfg = McConfig(n_paths=cfg.n_paths_reference, seed=cfg.mc.seed + 1,
                       h_vega=cfg.mc.h_vega, h_spot=cfg.mc.h_spot)
    bench_fn = {
        "price": lambda sg, s0: mc_price(spec, sg, s0, cfg.mc),
        "vega": lambda sg, s0: mc_greek_fd(spec, sg, s0, cfg.mc, "vega", kappa),
        "delta": lambda sg, s0: mc_greek_fd(spec, sg, s0, cfg.mc, "delta", kappa),
        "gamma": lambda sg, s0: mv_greeks(spec, sg, s0, cfg.mc, "gamma", kappa),
    }
    ref_fn = {
        "price": lambda sg, s0: mc_price(spec, sg, s0, ref_cfg),
        "vega": lambda sg, s0: mv_greeks(spec, sg, s0, ref_cfg, "vega", kappa),
        "delta": lambda sg, s0: mv_greeks(spec, sg, s0, ref_cfg, "delta", kappa),
        "gamma": lambda sg, s0: mv_greeks(spec, sg, s0, ref_cfg, "gamma", kappa),
    }

    sig_nodes = [price.sigma_axes[a].nodes for a in range(d)]
    s0_nodes = [price.s0_axes[a].nodes for a in range(d)]
    for quantity in ("price",) + GREEKS:
        ref_vals, bench_se, t_mc = [], [], 0.0
        for k, l in points:
            sg = np.array([sig_nodes[a][k[a]] for a in range(d)])
            s0 = np.array([s0_nodes[a][l[a]] for a in range(d)])
            t0 = time.perf_counter()
            _, se = bench_fn[quantity](sg, s0)
            t_mc += time.perf_counter() - t0
            ref, _ = ref_fn[quantity](sg, s0)
            ref_vals.append(ref)
            bench_se.append(se)
        ref_vals = np.asarray(ref_vals)
        row = {"e_mc": float(np.sqrt(np.mean(np.square(bench_se)))),
               "c_mc": float(d * cfg.mc.n_paths),
               "t_mc": t_mc / n_points}
        for method in ("nd", "an"):
            key = (quantity, method)
            if key not in tensors:
                continue
            vals, flops, dt = _tt_sweep(tensors[key], points)
            row[f"e_tt_{method}"] = float(np.sqrt(np.mean((vals - ref_vals) ** 2)))
            row[f"c_tt_{method}"] = flops
            row[f"t_tt_{method}"] = dt
        rows[quantity] = row

    report = {
        "n_points": n_points,
        "sample_seed": cfg.compare_seed,
        "kappa": kappa,
        "benchmark_paths": cfg.mc.n_paths,
        "reference_paths": cfg.n_paths_reference,
        "reference_method": "malliavin-weight estimators (plain mean for price)",
        "mc_seed": cfg.mc.seed,
        "rows": rows,
    }
    _print_compare_table(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=1)
        print(f"report written to {args.out}")
    return 0


def _print_compare_table(rows: dict) -> None:
    cols = ["e_tt_nd", "e_tt_an", "e_mc", "c_tt_nd", "c_tt_an", "c_mc",
            "t_tt_nd", "t_tt_an", "t_mc"]
    head = "quantity " + " ".join(f"{c:>10}" for c in cols)
    print(head)
    print("-" * len(head))
    for name, row in rows.items():
        cells = []
        for c in cols:
            v = row.get(c)
            cells.append(f"{v:10.3e}" if v is not None else " " * 10)
        print(f"{name:8} " + " ".join(cells))


# ------------------------------------------------------------------- slice

def cmd_slice(args) -> int:
    cfg = load_config(args.config)
    price, spec, an = _load_artifact_dir(args.artifacts)
    if spec is None:
        spec = cfg.model
    d = price.d
    kind, _, kap = args.axis.partition(":")
    if kind not in ("sigma", "s0") or not kap:
        raise ConfigError("--axis must look like sigma:1 or s0:2")
    kappa = int(kap)
    if not 1 <= kappa <= d:
        raise ConfigError(f"kappa must be in 1..{d}")

    axis = (price.sigma_axes if kind == "sigma" else price.s0_axes)[kappa - 1]
    mid = args.fixed_index
    k_fix = [mid if mid is not None else price.sigma_axes[a].size // 2
             for a in range(d)]
    l_fix = [mid if mid is not None else price.s0_axes[a].size // 2
             for a in range(d)]

    greeks = ("vega",) if kind == "sigma" else ("delta", "gamma")
    nd = {g: nd_greek_from_price(price, g, kappa) for g in greeks}
    mc_cfg = McConfig(n_paths=args.mc_paths, seed=cfg.mc.seed,
                      h_vega=cfg.mc.h_vega, h_spot=cfg.mc.h_spot)
    mc_fn = {"vega": lambda sg, s0: mc_greek_fd(spec, sg, s0, mc_cfg, "vega", kappa),
             "delta": lambda sg, s0: mc_greek_fd(spec, sg, s0, mc_cfg, "delta", kappa),
             "gamma": lambda sg, s0: mv_greeks(spec, sg, s0, mc_cfg, "gamma", kappa)}

    fh = _open_out(args.out)
    writer = csv.writer(fh)
    head = [f"{kind}_{kappa}", "price_tt", "price_mc", "price_mc_se"]
    for g in greeks:
        head += [f"{g}_nd", f"{g}_an", f"{g}_mc", f"{g}_mc_se"]
    writer.writerow(head)
    for j in range(axis.size):
        k = list(k_fix)
        l = list(l_fix)
        if kind == "sigma":
            k[kappa - 1] = j
        else:
            l[kappa - 1] = j
        sg = np.array([price.sigma_axes[a].nodes[k[a]] for a in range(d)])
        s0 = np.array([price.s0_axes[a].nodes[l[a]] for a in range(d)])
        pmc, pse = mc_price(spec, sg, s0, mc_cfg)
        row = [axis.nodes[j], evaluate_at(price, k, l), pmc, pse]
        for g in greeks:
            vnd = evaluate_at(nd[g], k, l)
            van = (evaluate_at(an[(g, kappa)], k, l)
                   if (g, kappa) in an else float("nan"))
            vmc, vse = mc_fn[g](sg, s0)
            row += [vnd, van, vmc, vse]
        writer.writerow([repr(float(x)) for x in row])
    if fh is not sys.stdout:
        fh.close()
    return 0


# ---------------------------------------------------------------- bench-mc

def _parse_vector(text, d, default):
    if text is None:
        return np.asarray(default, dtype=float)
    vals = np.asarray([float(x) for x in text.split(",")], dtype=float)
    if vals.size == 1:
        vals = np.repeat(vals, d)
    if vals.size != d:
        raise ConfigError(f"expected {d} components, got {vals.size}")
    return vals


def cmd_bench_mc(args) -> int:
    cfg = load_config(args.config)
    spec = cfg.model
    d = spec.d
    sigma = _parse_vector(args.sigma, d, [0.5 * (lo + hi) for lo, hi in spec.sigma_range])
    s0 = _parse_vector(args.s0, d, [0.5 * (lo + hi) for lo, hi in spec.s0_range])
    kappa = args.kappa

    fh = _open_out(args.out)
    writer = csv.writer(fh)
    writer.writerow([f"sigma_{i}" for i in range(1, d + 1)]
                    + [f"s0_{i}" for i in range(1, d + 1)]
                    + ["quantity", "kappa", "method", "value", "std_error",
                       "n_paths", "seed", "units"])
    params = list(sigma) + list(s0)

    val, se = mc_price(spec, sigma, s0, cfg.mc)
    writer.writerow(params + ["price", "", "mc", f"{val!r}", f"{se!r}",
                              cfg.mc.n_paths, cfg.mc.seed, UNITS["price"]])
    for greek in GREEKS:
        for method, fn in (("mc-fd", mc_greek_fd), ("mc-mv", mv_greeks)):
            val, se = fn(spec, sigma, s0, cfg.mc, greek, kappa)
            writer.writerow(params + [greek, kappa, method, f"{val!r}",
                                      f"{se!r}", cfg.mc.n_paths, cfg.mc.seed,
                                      UNITS[greek]])
    if fh is not sys.stdout:
        fh.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
