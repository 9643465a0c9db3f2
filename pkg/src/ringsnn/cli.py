"""Command-line driver.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime fault,
3 validation failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path


from .fabric import FabricFault, DeadlockError, TopologyConfig
from .network import Network, NetworkError
from .neuron import NeuronFault
from .oracle import oracle_run
from .recording import SpikeRecording, write_kv
from .simulator import ConfigError, RingSimulator
from .stats import DEFAULT_BIN_MS, DEFAULT_PAIRS, StatsError, compare, network_groups
from .synapse_store import StoreError
from .workloads import microcircuit, random_net, sudoku

OUT_ENV = "RINGSNN_OUT"
EXIT_OK, EXIT_CONFIG, EXIT_FAULT, EXIT_INVALID = 0, 1, 2, 3

log = logging.getLogger("ringsnn")


class UsageError(Exception):
    pass


def _out_dir(args) -> Path:
    return Path(args.out or os.environ.get(OUT_ENV) or "ringsnn-out")


def summarize(net: Network) -> str:
    fan = net.fanout()
    lines = [f"neurons: {net.n_neurons}", f"edges: {net.n_edges}",
             f"cores: {net.n_cores} x {net.core_capacity}", f"dt_ms: {net.dt}"]
    if net.n_neurons:
        lines += [f"fanout_mean: {fan.mean():.3f}", f"fanout_max: {int(fan.max())}",
                  f"fanout_min: {int(fan.min())}"]
    lines += [f"population {p.name}: {p.size}" for p in net.populations]
    return "\n".join(lines) + "\n"


def cmd_gen(args) -> int:
    if args.kind == "sudoku":
        if args.config:
            spec = sudoku.SudokuSpec.from_json(args.config)
            if args.puzzle:
                spec.givens = sudoku.parse_puzzle(args.puzzle).tolist()
        else:
            if not args.puzzle:
                raise UsageError("sudoku needs --puzzle or --config")
            spec = sudoku.SudokuSpec.from_puzzle(args.puzzle)
        net = sudoku.gen_sudoku(spec, args.seed, core_capacity=args.capacity or 4096)
    elif args.kind == "microcircuit":
        cfg = microcircuit.load_config(args.config)
        net = microcircuit.gen_microcircuit(cfg, args.scale, args.seed,
                                            core_capacity=args.capacity or 4096)
    else:
        net = random_net.gen_random(args.neurons, args.seed, core_capacity=args.capacity or 256,
                                    n_cores=args.cores or max(1, -(-args.neurons // (args.capacity or 256))))
    out = Path(args.out) if args.out else _out_dir(args) / f"{args.kind}.net"
    out.parent.mkdir(parents=True, exist_ok=True)
    net.write(out)
    text = summarize(net)
    out.with_suffix(".summary.txt").write_text(text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_run(args) -> int:
    net = Network.read(args.network)
    cores = args.cores or net.n_cores
    capacity = args.capacity or net.core_capacity
    if cores * capacity < net.n_neurons:
        raise ConfigError(f"--cores {cores} x --capacity {capacity} < {net.n_neurons} neurons")
    boundaries = [int(b) for b in args.device_boundaries.split(",") if b] if args.device_boundaries else []
    out = _out_dir(args)
    config = {"network": str(args.network), "mode": args.mode, "cores": cores, "capacity": capacity,
              "workers": args.workers, "queue_capacity": args.queue_capacity, "seed": args.seed, "t_bio_ms": args.t_bio_ms,
              "canonical": bool(args.canonical), "device_boundaries": boundaries, "out": str(out)}
    if args.mode == "oracle":
        rec = oracle_run(net, args.t_bio_ms, seed=args.seed)
        metrics = {"total_spikes": len(rec)}
    else:
        topo = TopologyConfig(cores, capacity, frozenset(boundaries), net.dt)
        sim = RingSimulator(net, topo, seed=args.seed, canonical=args.canonical,
                            workers=args.workers, queue_capacity=args.queue_capacity,
                            step_budget=args.step_budget)
        rec, m = sim.run(args.t_bio_ms)
        metrics = m.as_dict()
    out.mkdir(parents=True, exist_ok=True)
    rec.save(out, extra_meta={f"metric.{k}": v for k, v in metrics.items()})
    write_kv(out / "metrics.kv", metrics)
    (out / "config.json").write_text(json.dumps(config, indent=2) + "\n")
    print(f"{args.mode}: {len(rec)} spikes over {rec.total_steps} steps -> {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    a = SpikeRecording.read(args.rec_a)
    b = SpikeRecording.read(args.rec_b)
    net = Network.read(args.network)
    for rec in (a, b):
        if rec.meta.get("network") not in (None, net.digest()):
            raise StatsError(f"recording was produced from network {rec.meta['network']}, "
                             f"not {net.digest()}")
    report = compare(a, b, network_groups(net), args.bin_ms, args.pairs, args.seed)
    report.write(_out_dir(args))
    sys.stdout.write(report.to_text())
    return EXIT_OK


def cmd_sudoku_check(args) -> int:
    rec = SpikeRecording.read(args.rec)
    givens = sudoku.parse_puzzle(args.puzzle)
    grid, undecided = sudoku.decode_sudoku(rec, args.window_ms)
    ok, problems = sudoku.validate_grid(grid, givens)
    print(sudoku.format_grid(grid))
    if ok:
        print("solved")
        return EXIT_OK
    print(f"unsolved, {undecided} undecided cells; {len(problems)} violations: {', '.join(problems)}")
    return EXIT_INVALID


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ringsnn", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a network file")
    g.add_argument("--kind", choices=["microcircuit", "sudoku", "random"], required=True)
    g.add_argument("--config", help="JSON population or Sudoku spec")
    g.add_argument("--scale", type=float, default=1.0)
    g.add_argument("--puzzle", help="81 characters, 0 or . for empty cells")
    g.add_argument("--neurons", type=int, default=1024)
    g.add_argument("--cores", type=int)
    g.add_argument("--capacity", type=int)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    r = sub.add_parser("run", help="simulate a network file")
    r.add_argument("--network", required=True)
    r.add_argument("--mode", choices=["ring", "oracle"], default="ring")
    r.add_argument("--cores", type=int)
    r.add_argument("--capacity", type=int)
    r.add_argument("--workers", type=int, default=0, help="0 = deterministic single thread")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--t-bio-ms", type=float, required=True)
    r.add_argument("--canonical", action="store_true")
    r.add_argument("--queue-capacity", type=int, default=1024)
    r.add_argument("--step-budget", type=int, default=10**7,
                   help="micro-steps allowed per timestep before reporting deadlock")
    r.add_argument("--device-boundaries", help="comma-separated ring links between devices")
    r.add_argument("--out")
    r.set_defaults(func=cmd_run)

    v = sub.add_parser("validate", help="compare two recordings")
    v.add_argument("--rec-a", required=True)
    v.add_argument("--rec-b", required=True)
    v.add_argument("--network", required=True)
    v.add_argument("--bin-ms", type=float, default=DEFAULT_BIN_MS)
    v.add_argument("--pairs", type=int, default=DEFAULT_PAIRS)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("sudoku-check", help="decode and check a Sudoku recording")
    s.add_argument("--rec", required=True)
    s.add_argument("--puzzle", required=True)
    s.add_argument("--window-ms", type=float, default=100.0)
    s.set_defaults(func=cmd_sudoku_check)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except DeadlockError as e:
        print(f"error: {e}", file=sys.stderr)
        print(json.dumps(e.diagnostics, indent=2), file=sys.stderr)
        return EXIT_FAULT
    except (FabricFault, NeuronFault) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_FAULT
    except (UsageError, ConfigError, NetworkError, StoreError, StatsError, ValueError,
            FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
