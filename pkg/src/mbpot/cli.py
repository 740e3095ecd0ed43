"""Command-line front end: ``mbpot <subcommand> ... --out DIR``.

Every run writes ``manifest.json`` into its output directory. Exit codes:
0 success, 1 usage, 2 input, 3 solver, 4 resource.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import io as mio
from .apps import color_transfer, gradient_flow
from .core import SolverParams, build_cost
from .datasets import make_pair
from .diagnostics import (
    S_GRID,
    census_experiment,
    concentration_plan_experiment,
    concentration_value_experiment,
    mapping_census,
    reference_plan,
)
from .errors import InvalidInputError, ResourceLimitError, TransportError
from .minibatch import (
    SAMPLING,
    BatchSpec,
    SolverKind,
    aggregate,
    full_mb_transport,
    mb_transport,
    solve_pairs,
    two_stage_align,
)
from .partial import PartialParams
from .unbalanced import UotParams

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_SOLVER, EXIT_RESOURCE = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


@dataclass
class RunManifest:
    subcommand: str
    parameters: dict
    inputs: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    seed: int | None = None
    duration_seconds: float = 0.0
    version: str = __version__
    exit_code: int = 0
    error: str | None = None

    def write(self, out_dir: Path) -> None:
        (out_dir / "manifest.json").write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _solver_flags(p):
    g = p.add_argument_group("transport")
    g.add_argument("--kind", choices=("ot", "uot", "pot"), default="ot")
    g.add_argument("--s", type=float, default=1.0, help="POT mass fraction")
    g.add_argument("--tau", type=float, default=1.0, help="UOT marginal penalty")
    g.add_argument("--epsilon", type=float, default=None,
                   help="entropic regularization; switches OT/POT to Sinkhorn (UOT default 0.01)")
    g.add_argument("--dummy-cost", type=float, default=None, help="POT dummy-to-dummy cost A")
    g.add_argument("--tolerance", type=float, default=1e-7)
    g.add_argument("--max-iterations", type=int, default=10000)
    g.add_argument("--metric", choices=("euclidean", "squared_euclidean"), default="euclidean")


def _data_flags(p, names=("--source", "--target")):
    p.add_argument(names[0], type=Path, help="point-cloud CSV")
    p.add_argument(names[1], type=Path, help="point-cloud CSV")
    p.add_argument("--distribution", choices=("gaussian", "bimodal", "example1", "s_curve"),
                   help="generate the pair instead of reading files")
    p.add_argument("--n", type=int, default=10, help="points per side for --distribution")
    p.add_argument("--data-seed", type=int, default=0)


def _common(p, seeded=False):
    p.add_argument("--out", type=Path, required=True, help="output directory")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    if seeded:
        p.add_argument("--seed", type=int, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mbpot", description="Mini-batch partial optimal transport toolkit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one transport problem between two point clouds")
    p.add_argument("--source", type=Path, required=True)
    p.add_argument("--target", type=Path, required=True)
    _solver_flags(p)
    _common(p)

    p = sub.add_parser("minibatch", help="mini-batch estimator, full enumeration or two-stage alignment")
    _data_flags(p)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int, help="required unless --enumerate")
    p.add_argument("--sampling", choices=SAMPLING, default="with_replacement")
    p.add_argument("--enumerate", action="store_true", help="average over every batch pair")
    p.add_argument("--cap", type=int, default=10**6, help="enumeration cap on batch pairs")
    p.add_argument("--two-stage", action="store_true")
    p.add_argument("--big-batch", type=int)
    _solver_flags(p)
    _common(p)

    p = sub.add_parser("census", help="count misspecified mappings against full OT")
    _data_flags(p)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--plan", type=Path, help="candidate plan triplets instead of a mini-batch run")
    p.add_argument("--batch-source", help="comma-separated source indices of a single batch")
    p.add_argument("--batch-target", help="comma-separated target indices of a single batch")
    p.add_argument("--compare", action="store_true", help="m-OT vs m-POT at the best s of the grid")
    p.add_argument("--threshold", type=float, default=1e-9)
    _solver_flags(p)
    _common(p)

    p = sub.add_parser("concentration", help="spread of m-POT values or plans over k")
    p.add_argument("--mode", choices=("value", "plan"), default="value")
    p.add_argument("--distribution", choices=("gaussian", "bimodal", "s_curve"), default="gaussian")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--s", type=float, required=True)
    p.add_argument("--k-grid", required=True, help="comma-separated ascending k values ('all' allowed in plan mode)")
    p.add_argument("--replicates", type=int, default=20)
    p.add_argument("--metric", choices=("euclidean", "squared_euclidean"), default="euclidean")
    _common(p, seeded=True)

    p = sub.add_parser("flow", help="mini-batch gradient flow")
    _data_flags(p, ("--init", "--target"))
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--m", type=int, default=4)
    p.add_argument("--lr", type=float, default=0.001)
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--eval-every", type=int, default=100)
    _solver_flags(p)
    p.set_defaults(metric="squared_euclidean")
    _common(p, seeded=True)

    p = sub.add_parser("color", help="mini-batch color transfer between P6 images")
    p.add_argument("--source-image", type=Path, required=True)
    p.add_argument("--target-image", type=Path, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    _solver_flags(p)
    p.set_defaults(metric="squared_euclidean")
    _common(p, seeded=True)
    return parser


def solver_from_args(args) -> SolverKind:
    entropic = None
    if args.epsilon is not None:
        entropic = SolverParams(args.epsilon, args.tolerance, args.max_iterations)
    if args.kind == "ot":
        return SolverKind("ot", entropic=entropic)
    if args.kind == "pot":
        return SolverKind("pot", pot=PartialParams(args.s, args.dummy_cost, entropic))
    uot_eps = entropic or SolverParams(0.01, args.tolerance, args.max_iterations)
    return SolverKind("uot", uot=UotParams(args.tau, uot_eps))


def _load_pair(args, first="source"):
    a_path, b_path = getattr(args, first), args.target
    if args.distribution is not None:
        if a_path or b_path:
            raise UsageError("give either point-cloud files or --distribution, not both")
        return make_pair(args.distribution, args.n, args.data_seed), {}
    if a_path is None or b_path is None:
        raise UsageError(f"--{first} and --target (or --distribution) are required")
    return (mio.read_points(a_path), mio.read_points(b_path)), {first: str(a_path), "target": str(b_path)}


def _indices(text, name):
    try:
        return np.array(sorted(int(t) for t in text.split(",")))
    except ValueError as exc:
        raise UsageError(f"{name}: expected comma-separated integers") from exc


def cmd_solve(args, manifest, out):
    solver = solver_from_args(args)
    a, b = mio.read_points(args.source), mio.read_points(args.target)
    manifest.inputs = {"source": str(args.source), "target": str(args.target)}
    C = build_cost(a, b, args.metric)
    plan = solver.solve(a.weights, b.weights, C)
    mio.write_plan(out / "plan.csv", plan.coupling)
    _dump_json(out / "summary.json", dict(objective=plan.objective, mass=plan.total_mass, solver=plan.solver,
                                          converged=plan.converged, iterations=plan.iterations))
    return ["plan.csv", "summary.json"]


def _write_records(path, records):
    lines = ["batch,source,target,objective,mass,converged"]
    for i, r in enumerate(records):
        lines.append(f"{i},{' '.join(map(str, r.source))},{' '.join(map(str, r.target))},"
                     f"{r.objective!r},{r.mass!r},{int(r.converged)}")
    path.write_text("\n".join(lines) + "\n")


def cmd_minibatch(args, manifest, out):
    solver = solver_from_args(args)
    if not args.enumerate and args.seed is None:
        raise UsageError("--seed is required unless --enumerate is given")
    if args.two_stage and (args.big_batch is None or args.enumerate):
        raise UsageError("--two-stage needs --big-batch and excludes --enumerate")
    (source, target), manifest.inputs = _load_pair(args)
    if args.two_stage:
        al = two_stage_align(source, target, args.big_batch, args.m, solver, args.seed, args.metric)
        rows = ["source,target"] + [f"{i},{g}" for i, g in zip(al.source_indices, al.gamma)]
        (out / "gamma.csv").write_text("\n".join(rows) + "\n")
        written = ["gamma.csv"]
        for b, blk in enumerate(al.blocks):
            name = f"block_{b:04d}.csv"
            lines = ["source,target,mass"]
            for r, i in enumerate(blk.source):
                for c, j in enumerate(blk.target):
                    if j >= 0 and blk.plan[r, c] > 0:
                        lines.append(f"{i},{j},{blk.plan[r, c]!r}")
            (out / name).write_text("\n".join(lines) + "\n")
            written.append(name)
        _dump_json(out / "alignment.json", dict(big_batch=args.big_batch, m=args.m, blocks=len(al.blocks),
                                                absent=al.absent))
        return written + ["alignment.json"]
    if args.enumerate:
        res = full_mb_transport(source, target, args.m, solver, args.metric, args.cap, args.threads)
    else:
        spec = BatchSpec(args.m, args.k, args.sampling, args.seed)
        res = mb_transport(source, target, spec, solver, args.metric, args.threads)
    mio.write_plan(out / "padded_plan.csv", res.padded_plan)
    _write_records(out / "batches.csv", res.batch_records)
    _dump_json(out / "value.json", dict(value=res.value, mass=res.mass, kind=res.kind, converged=res.converged,
                                        batches=len(res.batch_records)))
    return ["padded_plan.csv", "batches.csv", "value.json"]


def cmd_census(args, manifest, out):
    (source, target), manifest.inputs = _load_pair(args)
    if args.compare:
        if args.m is None or args.seed is None:
            raise UsageError("--compare needs --m and --seed")
        comp = census_experiment(source, target, args.k, args.m, args.seed, S_GRID, args.metric, args.threads)
        result = dict(ot=asdict(comp.ot), pot=asdict(comp.pot), best_s=comp.best_s,
                      per_s={str(s): asdict(c) for s, c in comp.per_s.items()})
    else:
        ref = reference_plan(source, target, args.metric)
        if args.plan is not None:
            cand = mio.read_plan(args.plan, (source.size, target.size))
            manifest.inputs["plan"] = str(args.plan)
        elif args.batch_source is not None or args.batch_target is not None:
            if args.batch_source is None or args.batch_target is None:
                raise UsageError("--batch-source and --batch-target go together")
            pair = (_indices(args.batch_source, "--batch-source"), _indices(args.batch_target, "--batch-target"))
            for idx, size in zip(pair, (source.size, target.size)):
                if idx.size == 0 or idx.min() < 0 or idx.max() >= size or np.unique(idx).size != idx.size:
                    raise InvalidInputError("batch indices out of range or repeated")
            records = solve_pairs(source, target, [pair], solver_from_args(args), args.metric)
            cand = aggregate(records, (source.size, target.size)).padded_plan
        else:
            if args.m is None or args.seed is None:
                raise UsageError("need --plan, --batch-source/--batch-target, or --m with --seed")
            spec = BatchSpec(args.m, args.k, "with_replacement", args.seed)
            cand = mb_transport(source, target, spec, solver_from_args(args), args.metric, args.threads).padded_plan
        result = asdict(mapping_census(cand, ref, args.threshold))
        mio.write_plan(out / "candidate_plan.csv", cand)
    _dump_json(out / "census.json", result)
    return ["census.json"] + ([] if args.compare else ["candidate_plan.csv"])


def cmd_concentration(args, manifest, out):
    grid = [t.strip() for t in args.k_grid.split(",")]
    try:
        grid = [t if t == "all" else int(t) for t in grid]
    except ValueError as exc:
        raise UsageError("--k-grid: expected integers or 'all'") from exc
    if args.mode == "value":
        if "all" in grid:
            raise UsageError("'all' is only meaningful in plan mode")
        report = concentration_value_experiment(args.n, args.m, args.s, grid, args.replicates, args.seed,
                                                args.distribution, args.metric, args.threads)
    else:
        report = concentration_plan_experiment(args.n, args.m, args.s, grid, args.replicates, args.seed,
                                               args.distribution, args.metric, args.threads)
    (out / "report.csv").write_text(report.to_csv())
    (out / "report.json").write_text(report.to_json() + "\n")
    return ["report.csv", "report.json"]


def cmd_flow(args, manifest, out):
    loss = solver_from_args(args)
    (init, target), manifest.inputs = _load_pair(args, "init")
    traj = gradient_flow(init, target, loss, args.k, args.m, args.lr, args.steps, args.seed,
                         args.eval_every, args.threads)
    snap_dir = out / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    written = []
    for step, X in traj.snapshots:
        name = f"snapshots/step_{step:07d}.csv"
        mio.write_matrix(out / name, X)
        written.append(name)
    lines = ["step,w2"] + [f"{s},{w!r}" for s, w in traj.w2_curve]
    (out / "w2.csv").write_text("\n".join(lines) + "\n")
    return ["w2.csv"] + written


def cmd_color(args, manifest, out):
    solver = solver_from_args(args)
    src, tgt = mio.read_ppm(args.source_image), mio.read_ppm(args.target_image)
    manifest.inputs = {"source_image": str(args.source_image), "target_image": str(args.target_image)}
    image, visits = color_transfer(src, tgt, args.k, args.m, solver, args.seed, args.metric, args.threads,
                                   return_visits=True)
    mio.write_ppm(out / "output.ppm", image)
    _dump_json(out / "summary.json", dict(pixels=src.size, visited=int(np.sum(visits > 0)),
                                          unmodified=int(np.sum(visits == 0))))
    return ["output.ppm", "summary.json"]


COMMANDS = {
    "solve": cmd_solve,
    "minibatch": cmd_minibatch,
    "census": cmd_census,
    "concentration": cmd_concentration,
    "flow": cmd_flow,
    "color": cmd_color,
}


def _exit_code(exc: Exception) -> int:
    if isinstance(exc, ResourceLimitError):
        return EXIT_RESOURCE
    if isinstance(exc, InvalidInputError):
        return EXIT_INPUT
    return EXIT_SOLVER


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"mbpot: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out: Path = args.out
    out.mkdir(parents=True, exist_ok=True)
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()}
    manifest = RunManifest(args.command, params, seed=getattr(args, "seed", None))
    start = time.perf_counter()
    code = EXIT_OK
    try:
        # flag-derived parameter objects are validated before any file is read
        if hasattr(args, "kind"):
            try:
                solver_from_args(args)
            except InvalidInputError as exc:
                raise UsageError(str(exc)) from exc
        manifest.outputs = COMMANDS[args.command](args, manifest, out)
    except UsageError as exc:
        code, manifest.error = EXIT_USAGE, str(exc)
    except TransportError as exc:
        code, manifest.error = _exit_code(exc), f"{type(exc).__name__}: {exc}"
    manifest.exit_code = code
    manifest.duration_seconds = time.perf_counter() - start
    manifest.write(out)
    if code:
        print(f"mbpot {args.command}: {manifest.error}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
