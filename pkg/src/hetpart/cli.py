"""Batch command-line front end.

Subcommands: ``gen-graph`` (synthetic meshes), ``gen-topo`` (topology
families or canonicalized files), ``weights`` (target block sizes),
``partition`` (full pipeline: targets -> geometric algorithm -> optional
refinement), ``evaluate`` (metrics of an existing partition).  Reports go
to stdout as JSON (default) or CSV; identical inputs and seeds produce
byte-identical outputs when timing fields are suppressed.

Exit codes: 0 success, 1 validation error, 2 infeasible instance.
"""

from __future__ import annotations

import os

# pin BLAS pools before numpy loads so runs are reproducible and single-core
_default_threads = os.environ.get("HETPART_THREADS", "1")
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, _default_threads)

import argparse
import json
import sys
import time
from pathlib import Path

from . import generators, kmeans, metrics, rcb, refine, sfc, topology
from . import target_weights as tw_mod
from .errors import HetpartError, InfeasibleError, ValidationError
from .graph import (
    Coordinates,
    CsrGraph,
    Partition,
    connected_component_count,
    read_coords,
    read_metis,
    read_partition,
    write_coords,
    write_metis,
    write_partition,
)

CSV_HEADER = "graph,algo,k,topology,cut,maxCommVol,totalCommVol,imbalance,memViolations,partitionTimeSec"


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as err:
        raise ValidationError(f"{path}: {err}") from None


def _load(path: str, reader, *args):
    try:
        return reader(_read_text(path), *args)
    except HetpartError as err:
        raise type(err)(f"{path}: {err}") from None


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(report: str, out) -> None:
    out.write(report)


def _parse_fraction(text: str) -> float:
    num, _, den = text.partition("/")
    return float(num) / float(den) if den else float(text)


def _parse_hier(text: str) -> list[int]:
    try:
        parts = [int(p) for p in text.lower().split("x")]
    except ValueError:
        raise ValidationError(f"--hier expects k1xk2x..., got {text!r}") from None
    return parts


def _add_report_args(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--report", choices=["json", "csv"], default="json")
    sp.add_argument("--no-timing", action="store_true", help="omit timing fields (golden tests)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hetpart", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    gg = sub.add_parser("gen-graph", help="generate a synthetic mesh (graph + coordinates)")
    gg.add_argument("--kind", choices=["grid", "rgg"], required=True)
    gg.add_argument("--nx", type=int, help="grid columns")
    gg.add_argument("--ny", type=int, help="grid rows")
    gg.add_argument("--n", type=int, help="rgg point count")
    gg.add_argument("--dim", type=int, default=2, choices=[2, 3])
    gg.add_argument("--avg-degree", type=float, default=6.0)
    gg.add_argument("--radius", type=float, help="override the avg-degree radius")
    gg.add_argument("--seed", type=int, help="rgg seed (required for rgg)")
    gg.add_argument("--out-prefix", required=True)

    gt = sub.add_parser("gen-topo", help="generate or canonicalize a topology document")
    gt.add_argument("--family", choices=["topo1", "topo2", "file"], required=True)
    gt.add_argument("--k", type=int)
    gt.add_argument("--fast-frac", choices=["1/12", "1/6"], default="1/12")
    gt.add_argument("--step", type=int, default=1)
    gt.add_argument("--mem-scale", type=float, default=1.0, help="multiply all memory capacities")
    gt.add_argument("--in", dest="in_file", help="existing document (family=file)")
    gt.add_argument("--out", required=True)

    wt = sub.add_parser("weights", help="compute target block sizes for a topology")
    src = wt.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph-n", type=int, help="vertex count")
    src.add_argument("--graph", help="graph file supplying the vertex count")
    wt.add_argument("--topo", required=True)
    wt.add_argument("--out", help="also write the report to this file")

    pt = sub.add_parser("partition", help="run the full partitioning pipeline")
    pt.add_argument("--graph", required=True)
    pt.add_argument("--coords", required=True)
    pt.add_argument("--topo", required=True)
    pt.add_argument("--algo", choices=["sfc", "rcb", "kmeans", "kmeans+refine"], required=True)
    pt.add_argument("--hier", help="fan-outs k1xk2x... (kmeans only)")
    pt.add_argument("--refine", action="store_true")
    pt.add_argument("--epsilon", type=float, default=0.03)
    pt.add_argument("--seed", type=int, required=True)
    pt.add_argument("--depth", type=int, default=sfc.DEFAULT_DEPTH, help="space-filling curve depth")
    pt.add_argument("--threads", type=int, default=int(_default_threads))
    pt.add_argument("--out-partition", required=True)
    _add_report_args(pt)

    ev = sub.add_parser("evaluate", help="evaluate an existing partition")
    ev.add_argument("--graph", required=True)
    ev.add_argument("--partition", required=True)
    ev.add_argument("--topo", required=True)
    ev.add_argument("--alpha", type=float, default=0.0, help="volume weight in the step-time model")
    _add_report_args(ev)
    return ap


def _cmd_gen_graph(args, out) -> int:
    if args.kind == "grid":
        if args.nx is None or args.ny is None:
            raise ValidationError("grid needs --nx and --ny")
        g, coords = generators.gen_grid(args.nx, args.ny)
        meta = {"kind": "grid", "nx": args.nx, "ny": args.ny}
    else:
        if args.n is None or args.seed is None:
            raise ValidationError("rgg needs --n and --seed")
        radius = args.radius
        if radius is None:
            radius = generators.radius_for_avg_degree(args.n, args.dim, args.avg_degree)
        g, coords = generators.gen_rgg(args.n, args.dim, radius, args.seed)
        meta = {"kind": "rgg", "dim": args.dim, "seed": args.seed, "radius": radius}
    graph_path = f"{args.out_prefix}.graph"
    coords_path = f"{args.out_prefix}.xyz"
    Path(graph_path).write_text(write_metis(g), encoding="utf-8")
    Path(coords_path).write_text(write_coords(coords), encoding="utf-8")
    meta.update(
        {
            "n": g.n,
            "m": g.m,
            "components": connected_component_count(g),
            "graph": graph_path,
            "coords": coords_path,
        }
    )
    _emit(_dump_json(meta), out)
    return 0


def _cmd_gen_topo(args, out) -> int:
    if args.family == "file":
        if not args.in_file:
            raise ValidationError("family=file needs --in")
        tree = _load(args.in_file, topology.parse_topology)
    else:
        if args.k is None:
            raise ValidationError("topo families need --k")
        gen = topology.gen_topo1 if args.family == "topo1" else topology.gen_topo2
        tree = gen(args.k, _parse_fraction(args.fast_frac), args.step)
    if args.mem_scale != 1.0:
        tree = topology.scale_memory(tree, args.mem_scale)
    Path(args.out).write_text(topology.write_topology(tree), encoding="utf-8")
    _emit(
        _dump_json(
            {
                "family": args.family,
                "k": tree.k,
                "totalSpeed": tree.total_speed,
                "totalMemory": tree.total_memory,
                "out": args.out,
            }
        ),
        out,
    )
    return 0


def _weights_payload(n: int, tree: topology.TopologyTree) -> dict:
    tw = tw_mod.compute_target_weights(n, tree)
    integer = tw_mod.integerize(tw, n, tree.memories())
    return {
        "tw": tw.weights.tolist(),
        "saturated": tw.saturated.tolist(),
        "objective": tw.objective,
        "integer": integer.sizes.tolist(),
    }


def _cmd_weights(args, out) -> int:
    tree = _load(args.topo, topology.parse_topology)
    n = args.graph_n if args.graph_n is not None else _load(args.graph, read_metis).n
    payload = _weights_payload(n, tree)
    report = _dump_json(payload)
    if args.out:
        Path(args.out).write_text(report, encoding="utf-8")
    _emit(report, out)
    return 0


def _run_algo(
    args, g: CsrGraph, coords: Coordinates, tree: topology.TopologyTree, targets
) -> tuple[Partition, dict | None]:
    algo = args.algo
    want_refine = args.refine or algo == "kmeans+refine"
    base = "kmeans" if algo == "kmeans+refine" else algo
    if base == "sfc":
        part = sfc.partition_sfc(coords, targets, depth=args.depth)
    elif base == "rcb":
        part = rcb.partition_rcb(coords, targets)
    else:
        params = kmeans.KmeansParams(sfc_depth=args.depth)
        if args.hier:
            part = kmeans.hierarchical_kmeans(coords, _parse_hier(args.hier), targets, params)
        else:
            part = kmeans.partition_kmeans(coords, targets, params)
    stats_dict = None
    if want_refine:
        params_r = refine.RefineParams(epsilon=args.epsilon, seed=args.seed)
        part, stats = refine.multilevel_refine_with_stats(
            g, part, targets, tree.memories(), tree, params_r
        )
        stats_dict = {
            "levels": stats.levels,
            "rounds": stats.rounds,
            "moves": stats.moves,
            "gain": stats.gain,
            "cutInitial": stats.cut_initial,
            "cutFinal": stats.cut_final,
            "candidateFraction": stats.candidate_fraction,
        }
    return part, stats_dict


def _metric_fields(g: CsrGraph, part: Partition, tree: topology.TopologyTree) -> dict:
    vol = metrics.comm_volume(g, part)
    return {
        "cut": metrics.edge_cut(g, part),
        "commVolume": {
            "perBlock": vol.per_block.tolist(),
            "max": vol.max,
            "total": vol.total,
        },
        "imbalance": metrics.imbalance(part, tree),
        "memViolations": [[b, ov] for b, ov in metrics.memory_violations(part, tree)],
    }


def _csv_row(graph: str, algo: str, k: int, topo: str, fields: dict, elapsed: float | None) -> str:
    time_cell = "" if elapsed is None else f"{elapsed:.6f}"
    return (
        f"{graph},{algo},{k},{topo},{fields['cut']},{fields['commVolume']['max']},"
        f"{fields['commVolume']['total']},{fields['imbalance']:.9g},"
        f"{len(fields['memViolations'])},{time_cell}\n"
    )


def _cmd_partition(args, out) -> int:
    if args.threads < 1:
        raise ValidationError("--threads must be >= 1")
    g = _load(args.graph, read_metis)
    try:
        coords = _load(args.coords, read_coords, 2)
    except ValidationError:
        coords = _load(args.coords, read_coords, 3)
    if coords.n != g.n:
        raise ValidationError(
            f"{args.coords}: {coords.n} coordinate lines for a graph with {g.n} vertices"
        )
    tree = _load(args.topo, topology.parse_topology)
    if args.hier and args.algo not in ("kmeans", "kmeans+refine"):
        raise ValidationError("--hier applies to kmeans only")

    start = time.perf_counter()
    tw = tw_mod.compute_target_weights(g.n, tree)
    targets = tw_mod.integerize(tw, g.n, tree.memories())
    part, stats_dict = _run_algo(args, g, coords, tree, targets)
    elapsed = time.perf_counter() - start

    Path(args.out_partition).write_text(write_partition(part), encoding="utf-8")
    fields = _metric_fields(g, part, tree)
    if args.report == "csv":
        report = CSV_HEADER + "\n" + _csv_row(
            args.graph, args.algo, tree.k, args.topo, fields, None if args.no_timing else elapsed
        )
    else:
        payload = {
            "graph": args.graph,
            "coords": args.coords,
            "topology": args.topo,
            "algo": args.algo,
            "hier": _parse_hier(args.hier) if args.hier else None,
            "refine": bool(args.refine or args.algo == "kmeans+refine"),
            "epsilon": args.epsilon,
            "seed": args.seed,
            "threads": args.threads,
            "k": tree.k,
            "n": g.n,
            "m": g.m,
            "objective": tw.objective,
            "targets": targets.sizes.tolist(),
            "saturated": tw.saturated.tolist(),
            "refineStats": stats_dict,
            "outPartition": args.out_partition,
            **fields,
        }
        if not args.no_timing:
            payload["partitionTimeSec"] = elapsed
        report = _dump_json(payload)
    _emit(report, out)
    return 0


def _cmd_evaluate(args, out) -> int:
    g = _load(args.graph, read_metis)
    tree = _load(args.topo, topology.parse_topology)
    part = _load(args.partition, read_partition, tree.k)
    if part.n != g.n:
        raise ValidationError(f"{args.partition}: covers {part.n} vertices, graph has {g.n}")
    fields = _metric_fields(g, part, tree)
    fields["stepTime"] = metrics.step_time_estimate(part, tree, g, args.alpha)
    if args.report == "csv":
        report = CSV_HEADER + "\n" + _csv_row(
            args.graph, "evaluate", tree.k, args.topo, fields, None
        )
    else:
        payload = {
            "graph": args.graph,
            "partition": args.partition,
            "topology": args.topo,
            "k": tree.k,
            "n": g.n,
            "m": g.m,
            **fields,
        }
        report = _dump_json(payload)
    _emit(report, out)
    return 0


_COMMANDS = {
    "gen-graph": _cmd_gen_graph,
    "gen-topo": _cmd_gen_topo,
    "weights": _cmd_weights,
    "partition": _cmd_partition,
    "evaluate": _cmd_evaluate,
}


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args, out)
    except InfeasibleError as err:
        print(f"Infeasible: {err}", file=sys.stderr)
        return 2
    except HetpartError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
