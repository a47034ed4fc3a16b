"""Command-line front end.

Subcommands: psi, design, label, simulate, sweep.  Configuration comes
from JSON files (schema-checked, unknown keys rejected) or flags; outputs
are CSV/JSON files with deterministic bytes, with matplotlib figures
rendered next to delimited outputs unless --no-plot is given.  The
environment variable MDLVQ_SEED overrides any configured seed.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

from . import jsonio
from .design import (
    SourceModel,
    design_sweep_rows,
    optimize_design,
    to_db,
)
from .errors import ConfigError, InfeasibleLabelingError, MdlvqError
from .expansion import psi_closed_form, psi_for_design, psi_limit, psi_numeric
from .labeling import LabelingFunction, build_labeling
from .lattices import build_sublattice, make_lattice
from .simulate import simulate, sweep_packet_loss

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


def _write_csv(path: str, fieldnames: list[str], rows: list[dict]) -> None:
    def fmt(v):
        if isinstance(v, float):
            return format(v, ".12g")
        return v

    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: fmt(row[k]) for k in fieldnames})


def _env_seed(seed: int) -> int:
    env = os.environ.get("MDLVQ_SEED")
    if env is None:
        return seed
    try:
        return int(env)
    except ValueError:
        raise ConfigError(f"MDLVQ_SEED must be an integer, got {env!r}") from None


def _figure_path(out: str) -> str:
    base, _ = os.path.splitext(out)
    return base + ".png"


def cmd_psi(args) -> int:
    rows = []
    if args.closed:
        if not args.L:
            raise ConfigError("--closed requires --L with a comma-separated list")
        for L in (int(s) for s in args.L.split(",")):
            rows.append({"L": L, "method": "closed_form", "psi": psi_closed_form(L)})
    if args.limit:
        rows.append({"L": "inf", "method": "limit", "psi": psi_limit()})
    if args.numeric:
        if args.K is None or args.r is None:
            raise ConfigError("--numeric requires --K and --r")
        lattice = make_lattice(args.lattice)
        rows.append(
            {
                "L": lattice.dimension,
                "method": f"numeric(K={args.K},r={args.r:g})",
                "psi": psi_numeric(args.K, lattice, args.r),
            }
        )
    if not rows:
        raise ConfigError("choose at least one of --closed, --limit, --numeric")
    for row in rows:
        print(f"{row['L']},{row['psi']:.7f}")
    if args.out:
        _write_csv(args.out, ["L", "method", "psi"], rows)
        if not args.no_plot:
            from .plots import plot_psi_table

            plot_psi_table(
                [
                    {"L": r["L"] if isinstance(r["L"], int) else r["L"], "psi": r["psi"]}
                    for r in rows
                ],
                _figure_path(args.out),
            )
    return EXIT_OK


def cmd_design(args) -> int:
    lattice = make_lattice(args.lattice)
    source = SourceModel.gaussian(args.sigma * args.sigma)
    psi_table = {K: psi_for_design(K, lattice.dimension) for K in range(1, args.kmax + 1)}
    if args.p_grid:
        try:
            start, stop, step = (float(s) for s in args.p_grid.split(":"))
        except ValueError:
            raise ConfigError("--p-grid expects start:stop:step") from None
        grid = []
        p = start
        while p <= stop + 1e-12:
            grid.append(round(p, 12))
            p += step
        rows = design_sweep_rows(
            lattice, source, args.rt, grid, list(range(1, args.kmax + 1)), psi_table
        )
        if not args.out:
            raise ConfigError("--p-grid requires --out for the CSV")
        _write_csv(
            args.out,
            ["p", "K", "N_unrestricted", "N_admissible", "nu", "R_s", "d_a_dB"],
            rows,
        )
        if not args.no_plot:
            from .plots import plot_design_sweep

            plot_design_sweep(rows, _figure_path(args.out))
        print(f"wrote {len(rows)} rows to {args.out}")
        return EXIT_OK
    if args.p is None:
        raise ConfigError("provide --p or --p-grid")
    dp = optimize_design(args.kmax, args.p, args.rt, lattice, source, psi_table)
    doc = {
        "K": dp.K,
        "p": dp.p,
        "R_t": dp.R_t,
        "L": dp.L,
        "nu": dp.nu,
        "N": dp.N,
        "psi": dp.psi,
        "G_c": dp.G_c,
        "d_a": dp.d_a,
        "d_a_dB": to_db(dp.d_a),
    }
    print(f"K={dp.K} N={dp.N} nu={dp.nu:.6g} d_a={to_db(dp.d_a):.4f} dB")
    if args.out:
        jsonio.dump(doc, args.out)
    return EXIT_OK


LABEL_SCHEMA = {
    "lattice": (str, True, None),
    "N": (int, True, None),
    "K": (int, True, None),
    "psi": ((int, float, str), False, "auto"),
}

SIMULATE_SCHEMA = {
    "sigma": ((int, float), False, 1.0),
    "n_vectors": (int, True, None),
    "seed": (int, False, 0),
    "side_rate": ((int, float), False, None),
    "scale": ((int, float), False, None),
}

SWEEP_SCHEMA = {
    "lattice": (str, True, None),
    "R_t": ((int, float), True, None),
    "designs": (list, True, None),
    "p_start": ((int, float), False, 0.0),
    "p_stop": ((int, float), False, 1.0),
    "p_step": ((int, float), False, 1.0 / 200.0),
    "n_vectors": (int, True, None),
    "seed": (int, False, 0),
    "sigma": ((int, float), False, 1.0),
}


def cmd_label(args) -> int:
    cfg = jsonio.validate_config(jsonio.load(args.config), LABEL_SCHEMA, "label")
    lattice = make_lattice(cfg["lattice"])
    spec = build_sublattice(lattice, cfg["N"])
    psi = cfg["psi"]
    if psi == "auto":
        psi = psi_for_design(cfg["K"], lattice.dimension)
    elif isinstance(psi, str):
        raise ConfigError("psi must be a number or 'auto'")
    lf = build_labeling(spec, cfg["K"], float(psi))
    print(
        f"labeled {lf.table_size} central points (N={cfg['N']}, K={cfg['K']}, "
        f"psi={float(psi):.5f}); assignment cost {lf.assignment_cost:.6g}"
    )
    jsonio.dump(lf.to_json_dict(), args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = jsonio.validate_config(jsonio.load(args.config), SIMULATE_SCHEMA, "simulate")
    if not os.path.exists(args.labeling):
        raise ConfigError(f"labeling file not found: {args.labeling}")
    lf = LabelingFunction.from_json_dict(jsonio.load(args.labeling))
    seed = _env_seed(cfg["seed"])
    scale = cfg["scale"]
    if cfg["side_rate"] is not None:
        if scale is not None:
            raise ConfigError("give either side_rate or scale, not both")
        source = SourceModel.gaussian(cfg["sigma"] ** 2)
        L = lf.spec.parent.dimension
        nu = 2.0 ** (L * (source.h_bits - cfg["side_rate"])) / lf.spec.index
        scale = (nu / lf.spec.parent.cell_volume) ** (1.0 / L)
    elif scale is None:
        scale = 1.0
    rep = simulate(lf, cfg["sigma"], cfg["n_vectors"], seed, scale=scale, threads=args.threads)
    for kappa, db in sorted(rep.avg_db_by_count.items()):
        print(f"avg distortion with {kappa} description(s): {db:.4f} dB")
    print("side entropies (bits/dim):", ", ".join(f"{h:.4f}" for h in rep.entropies))
    jsonio.dump(rep.to_json_dict(), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = jsonio.validate_config(jsonio.load(args.config), SWEEP_SCHEMA, "sweep")
    lattice = make_lattice(cfg["lattice"])
    designs = []
    for entry in cfg["designs"]:
        if (
            not isinstance(entry, list)
            or len(entry) != 2
            or not isinstance(entry[0], int)
            or not isinstance(entry[1], list)
        ):
            raise ConfigError("designs must be a list of [K, [N, ...]] pairs")
        designs.append((entry[0], [int(n) for n in entry[1]]))
    seed = _env_seed(cfg["seed"])
    grid = []
    p = cfg["p_start"]
    while p <= cfg["p_stop"] + 1e-12:
        grid.append(round(p, 12))
        p += cfg["p_step"]
    rows = sweep_packet_loss(
        lattice,
        designs,
        grid,
        cfg["R_t"],
        cfg["sigma"],
        cfg["n_vectors"],
        seed,
        threads=args.threads,
        progress=lambda msg: print(msg, file=sys.stderr),
    )
    _write_csv(args.out, ["p", "K", "N_best", "d_numeric_dB", "d_theory_dB"], rows)
    if not args.no_plot:
        from .plots import plot_sweep

        plot_sweep(rows, _figure_path(args.out))
    print(f"wrote {len(rows)} rows to {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="mdlvq",
        description="Multiple-description lattice vector quantization toolkit",
    )
    ap.add_argument("--threads", type=int, default=1, help="worker thread cap")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("psi", help="expansion-factor tables")
    p.add_argument("--closed", action="store_true", help="closed form (K=3, odd L)")
    p.add_argument("--limit", action="store_true", help="infinite-dimension limit")
    p.add_argument("--numeric", action="store_true", help="lattice-counting estimate")
    p.add_argument("--L", type=str, default=None, help="comma-separated dimensions")
    p.add_argument("--K", type=int, default=None)
    p.add_argument("--lattice", type=str, default="Z2")
    p.add_argument("--r", type=float, default=None, help="counting radius in cells")
    p.add_argument("--out", type=str, default=None, help="CSV output path")
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_psi)

    p = sub.add_parser("design", help="optimal (K, N, nu) for a loss probability")
    p.add_argument("--p", type=float, default=None, help="packet-loss probability")
    p.add_argument("--p-grid", type=str, default=None, help="start:stop:step sweep")
    p.add_argument("--rt", type=float, required=True, help="total entropy, bits/dim")
    p.add_argument("--lattice", type=str, default="A2")
    p.add_argument("--kmax", type=int, default=5)
    p.add_argument("--sigma", type=float, default=1.0)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("label", help="build and store a labeling table")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("simulate", help="measure distortions for a stored labeling")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--labeling", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="operational lower hulls over a loss grid")
    p.add_argument("--config", type=str, required=True)
    p.add_argument("--out", type=str, required=True)
    p.add_argument("--no-plot", action="store_true")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleLabelingError as exc:
        print(f"infeasible construction: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MdlvqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
