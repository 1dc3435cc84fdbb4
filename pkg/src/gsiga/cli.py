"""Command line entry point: ``gsiga run | table1 | export``."""
import argparse
import json
import logging
import os
import sys
import time

from .config import PRESETS, merge, preset
from .errors import (
    CapacityError,
    DegenerateMetric,
    InvalidArgument,
    NumericalFailure,
    OutOfDomain,
    StepRejected,
)

PUBLISHED_TABLE1 = {
    (5, 1): 2.0,
    (5, 2): 3.6e-1,
    (5, 3): 2.0e-1,
    (10, 1): 3.8e-1,
    (10, 2): 2.3e-2,
    (10, 3): 4.0e-3,
    (20, 1): 8.0e-2,
    (20, 2): 2.1e-3,
    (20, 3): 1.6e-4,
}


def _build_config(args):
    cfg = preset(args.preset)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = merge(cfg, json.load(fh))
    over = {}
    if args.steps is not None:
        over["time"] = {"max_steps": args.steps}
    if args.positivity:
        over["positivity"] = {"enabled": True}
    if args.serial:
        over["solver"] = {"workers": 1}
    if args.out_dir is not None:
        over["output"] = {"directory": args.out_dir}
    return merge(cfg, over) if over else cfg


def cmd_run(args):
    from .driver import Simulation

    cfg = _build_config(args)
    out = cfg.output.directory
    os.makedirs(out, exist_ok=True)
    cfg.save(os.path.join(out, "config.json"))
    t0 = time.perf_counter()
    sim = Simulation(cfg, out)
    res = sim.run()
    st = res.state
    print(
        f"stopped after {st.k} steps ({res.stop_reason}); t = {st.t:.6g}, "
        f"{st.space.num_dofs} dofs, {len(res.refinements)} refinement events, "
        f"{time.perf_counter() - t0:.1f} s; outputs in {out}"
    )
    return 0


def cmd_table1(args):
    from .driver import table1_harness

    t0 = time.perf_counter()
    rows = table1_harness()
    print(f"{'n':>3} {'p':>2} {'E_np':>11} {'published':>10} {'ratio':>6}")
    for r in rows:
        ref = PUBLISHED_TABLE1[(r["n"], r["p"])]
        print(f"{r['n']:>3} {r['p']:>2} {r['E']:>11.3e} {ref:>10.1e} {r['E'] / ref:>6.3f}")
    print(f"# {time.perf_counter() - t0:.1f} s")
    if args.out_dir is not None:
        os.makedirs(args.out_dir, exist_ok=True)
        with open(os.path.join(args.out_dir, "table1.csv"), "w") as fh:
            fh.write("n,p,E,published\n")
            for r in rows:
                fh.write(f"{r['n']},{r['p']},{r['E']!r},{PUBLISHED_TABLE1[(r['n'], r['p'])]!r}\n")
    return 0


def cmd_export(args):
    from .driver import load_checkpoint
    from .vtk import export_surface

    sim = load_checkpoint(args.checkpoint)
    st = sim.state
    m = args.density or sim.config.output.mesh_density
    mesh = export_surface(st.space, st.e, args.out, st.c, st.d, m)
    print(f"wrote {len(mesh.points)} vertices, {len(mesh.quads)} quads (step {st.k}) to {args.out}")
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--steps", type=int, help="override time.max_steps")
    common.add_argument("--out-dir", help="output directory (overrides output.directory)")
    common.add_argument("--preset", choices=sorted(PRESETS), default="desk", help="base configuration")
    common.add_argument("--positivity", action="store_true", help="enforce u, v >= 0 with the QP projection")
    common.add_argument("--serial", action="store_true", help="single-threaded assembly")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="gsiga", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common], help="run a simulation")
    p.add_argument("config", nargs="?", help="JSON config merged onto the preset")
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("table1", parents=[common], help="sphere projection errors E_{n,p}")
    p.set_defaults(func=cmd_table1)
    p = sub.add_parser("export", parents=[common], help="write a checkpoint's surface as VTK")
    p.add_argument("checkpoint")
    p.add_argument("out")
    p.add_argument("--density", type=int, help="samples per patch edge")
    p.set_defaults(func=cmd_export)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (
        InvalidArgument,
        OutOfDomain,
        DegenerateMetric,
        NumericalFailure,
        StepRejected,
        CapacityError,
        OSError,
        json.JSONDecodeError,
    ) as exc:
        print(f"gsiga: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
