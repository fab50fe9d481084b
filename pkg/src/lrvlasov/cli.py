"""Command-line interface: run, convergence, compare, inspect."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import ConfigError, SnapshotError


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a key=value config file")
    p.add_argument("--preset", help="preset name (overrides the config's preset)")
    p.add_argument("--set", dest="overrides", action="append", default=[],
                   metavar="SECTION.KEY=VALUE", help="override a config value")
    p.add_argument("--out", default=".", help="output directory")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lrvlasov",
                                     description="low-rank Vlasov-Poisson solver")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration to t_end")
    _add_common(p_run)
    p_run.add_argument("--snapshot-every", type=int, default=0, metavar="STEPS")
    p_run.add_argument("--resume", help="resume from a snapshot file")

    p_conv = sub.add_parser("convergence",
                            help="forced-preset refinement study (error table)")
    _add_common(p_conv)
    p_conv.add_argument("--sizes", default="32,64,128,256",
                        help="comma-separated grid sizes")

    p_cmp = sub.add_parser("compare",
                           help="run plain/conservative/macro on one preset")
    _add_common(p_cmp)

    p_ins = sub.add_parser("inspect", help="summarize a snapshot file")
    p_ins.add_argument("snapshot")
    return parser


def _resolve_config(args):
    return load_config(path=args.config, preset=args.preset, overrides=args.overrides)


def _cmd_run(args) -> int:
    from .driver import run
    from .io import write_diagnostics

    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    series = run(cfg, snapshot_every=args.snapshot_every, snapshot_dir=str(out),
                 resume=args.resume)
    csv_path = out / "diagnostics.csv"
    write_diagnostics(series, csv_path)
    last = series[-1]
    print(f"preset={cfg.preset} method={cfg.method} t={last.t:.6g} "
          f"ranks={last.ranks} mass={last.mass:.12g}")
    print(f"wrote {csv_path}")
    return 0


def _cmd_convergence(args) -> int:
    from .config import parse_overrides
    from .driver import convergence_table

    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    overrides = parse_overrides(args.overrides)
    rows = convergence_table(sizes, overrides)
    print(f"{'N':>6} {'Linf error':>14} {'order':>7} {'L2 error':>14} {'order':>7}")
    for r in rows:
        o1 = f"{r['order_linf']:7.2f}" if r["order_linf"] == r["order_linf"] else "     --"
        o2 = f"{r['order_l2']:7.2f}" if r["order_l2"] == r["order_l2"] else "     --"
        print(f"{r['n']:>6} {r['linf']:14.4e} {o1} {r['l2']:14.4e} {o2}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "convergence.csv"
    with csv_path.open("w") as fh:
        fh.write("n,linf,order_linf,l2,order_l2\n")
        for r in rows:
            fh.write(f"{r['n']},{r['linf']:.17g},{r['order_linf']:.17g},"
                     f"{r['l2']:.17g},{r['order_l2']:.17g}\n")
    print(f"wrote {csv_path}")
    return 0


def _cmd_compare(args) -> int:
    from dataclasses import replace

    from .driver import run

    cfg = _resolve_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "compare.csv"
    with csv_path.open("w") as fh:
        wrote_header = False
        for method in ("plain", "conservative", "macro"):
            series = run(replace(cfg, method=method))
            if not wrote_header:
                n_mom = len(series[0].momentum)
                moms = ",".join(f"mom{i + 1}" for i in range(n_mom))
                ranks = ("rank" if len(series[0].ranks) == 1
                         else "rank_x,rank_vv,rank_v1,rank_v2")
                fh.write(f"method,t,{ranks},mass,{moms},energy,efield_energy,wall_ms\n")
                wrote_header = True
            for row in series:
                cells = ([method, format(row.t, ".17g")]
                         + [str(r) for r in row.ranks]
                         + [format(row.mass, ".17g")]
                         + [format(m, ".17g") for m in row.momentum]
                         + [format(row.energy, ".17g"),
                            format(row.efield_energy, ".17g"),
                            format(row.wall_ms, ".17g")])
                fh.write(",".join(cells) + "\n")
            print(f"{method}: {len(series)} rows")
    print(f"wrote {csv_path}")
    return 0


def _cmd_inspect(args) -> int:
    import numpy as np

    from .io import _MAGIC, _read_array, _read_floats, _read_ints

    path = Path(args.snapshot)
    with path.open("rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise SnapshotError(f"{path}: not a snapshot file")
        version, dim, step, n_levels, n_dts = _read_ints(fh, 5)
        t, dt_work, *dts = _read_floats(fh, 2 + n_dts)
        sig = _read_floats(fh, 9)
        print(f"snapshot {path}")
        print(f"  version {version}, {'1D1V' if dim == 1 else '2D2V'}, "
              f"step {step}, t = {t:.9g}")
        print(f"  dt_work = {dt_work:.6g}, recent steps = {[f'{d:.6g}' for d in dts]}")
        print(f"  grid: nx={int(sig[0])}x{int(sig[1])} nv={int(sig[2])}x{int(sig[3])} "
              f"x=[{sig[4]:.6g},{sig[5]:.6g}) v_max={sig[6]:.6g} beta={sig[7]:.6g} "
              f"eps={sig[8]:.3g}")
        for level in range(n_levels):
            (kind,) = _read_ints(fh, 1)
            if kind == 1:
                c, ux, uv = (_read_array(fh) for _ in range(3))
                print(f"  level {level}: rank {c.size}, |C| max "
                      f"{np.max(np.abs(c), initial=0.0):.6g}")
            else:
                n1, n2 = _read_ints(fh, 2)
                ux, b, bvv, uv1, uv2 = (_read_array(fh) for _ in range(5))
                print(f"  level {level}: ranks (x={ux.shape[1]}, vv={b.shape[1]}, "
                      f"v1={uv1.shape[1]}, v2={uv2.shape[1]})")
            (mkind,) = _read_ints(fh, 1)
            n_arrays = {0: 0, 1: 3, 2: 4}[mkind]
            for _ in range(n_arrays):
                _read_array(fh)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "convergence":
            return _cmd_convergence(args)
        if args.command == "compare":
            return _cmd_compare(args)
        return _cmd_inspect(args)
    except (ConfigError, SnapshotError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
