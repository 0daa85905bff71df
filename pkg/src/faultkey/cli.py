"""Command-line front end.

Subcommands cover the whole pipeline: `lock` produces a locked netlist and
its key sidecar, `atpg` writes the constrained pattern file, `attack` runs
the key-recovery flow against a simulation oracle (or replays a recorded
transcript), and `sim` is a one-shot simulator for debugging.

Exit codes: 0 success, 1 domain failure (unresolved bits, inequivalence,
replay mismatch), 2 usage or format errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import atpg, attack as attack_mod, bench, locking, logic, oracle as oracle_mod

_USAGE_ERROR = 2
_DOMAIN_ERROR = 1


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (bench.BenchError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return _USAGE_ERROR


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="faultkey",
        description="Lock gate-level netlists and recover their keys by differential fault analysis.",
    )
    sub = parser.add_subparsers(required=True)

    p_lock = sub.add_parser("lock", help="insert key gates into a netlist")
    p_lock.add_argument("netlist", type=Path, help="original .bench file")
    p_lock.add_argument("--scheme", required=True, choices=[s.value for s in locking.LockScheme])
    p_lock.add_argument("--key-size", type=int, required=True)
    p_lock.add_argument("--seed", type=int, required=True)
    p_lock.add_argument("--key", help="explicit key bits (default: derived from the seed)")
    p_lock.add_argument("--split", help="combined scheme: '<sfll>,<rll>' bit counts")
    p_lock.add_argument("--cube", help="sfll: protected cube over the PIs ({0,1,X}, X = not compared)")
    p_lock.add_argument("--key-prefix", default=bench.DEFAULT_KEY_PREFIX)
    p_lock.add_argument("-o", "--output", type=Path, required=True, help="locked .bench path")
    p_lock.add_argument("--key-out", type=Path, help="key sidecar path (default: output with .key)")
    p_lock.set_defaults(func=cmd_lock)

    p_atpg = sub.add_parser("atpg", help="generate constrained test patterns for the key lines")
    p_atpg.add_argument("netlist", type=Path, help="locked .bench file")
    p_atpg.add_argument("--polarity", default="sa1", choices=["sa1", "sa0"])
    p_atpg.add_argument("--key-prefix", default=bench.DEFAULT_KEY_PREFIX)
    p_atpg.add_argument("-o", "--output", type=Path, required=True, help="pattern file path")
    p_atpg.set_defaults(func=cmd_atpg)

    p_attack = sub.add_parser("attack", help="recover the key through fault-injection sessions")
    p_attack.add_argument("netlist", type=Path, help="locked .bench file")
    p_attack.add_argument("--key-file", type=Path, help="hidden-key sidecar, read only by the oracle")
    p_attack.add_argument("--patterns", type=Path, help="reuse a pattern file instead of running ATPG")
    p_attack.add_argument("--replay", type=Path, help="answer queries from this transcript instead of simulating")
    p_attack.add_argument("--transcript", type=Path, help="record all oracle traffic to this file")
    p_attack.add_argument("--report", type=Path, help="write the attack report (JSON)")
    p_attack.add_argument("--brute-residual", action="store_true",
                          help="exhaust up to 20 unresolved bits against the unlocked chip")
    p_attack.add_argument("--key-prefix", default=bench.DEFAULT_KEY_PREFIX)
    p_attack.set_defaults(func=cmd_attack)

    p_sim = sub.add_parser("sim", help="simulate one input vector")
    p_sim.add_argument("netlist", type=Path)
    p_sim.add_argument("--pi", required=True, help="primary input bits ({0,1,X})")
    p_sim.add_argument("--key", help="key bits (required when the netlist has key inputs)")
    p_sim.add_argument("--inject", help="forced key lines, 'idx:val,idx:val'")
    p_sim.add_argument("--key-prefix", default=bench.DEFAULT_KEY_PREFIX)
    p_sim.set_defaults(func=cmd_sim)

    return parser


def _read_netlist(path: Path, key_prefix: str) -> bench.Netlist:
    return bench.parse_bench(path.read_text(), name=path.stem, key_prefix=key_prefix)


def cmd_lock(args) -> int:
    netlist = _read_netlist(args.netlist, args.key_prefix)
    if args.key_size < 1:
        print("error: --key-size must be >= 1", file=sys.stderr)
        return _USAGE_ERROR
    scheme = locking.LockScheme(args.scheme)
    split = None
    if scheme is locking.LockScheme.COMBINED:
        if not args.split:
            print("error: --split required for the combined scheme", file=sys.stderr)
            return _USAGE_ERROR
        split = tuple(int(t) for t in args.split.split(","))
        if len(split) != 2 or sum(split) != args.key_size:
            print(f"error: --split must be two counts summing to {args.key_size}", file=sys.stderr)
            return _USAGE_ERROR
    cube = tuple(logic.bits_from_str(args.cube)) if args.cube else None
    key = (
        locking.KeyVector.from_str(args.key)
        if args.key
        else locking.KeyVector.random(args.key_size, args.seed ^ 0x5EC4E7)
    )
    if len(key) != args.key_size:
        print(f"error: key has {len(key)} bits, --key-size says {args.key_size}", file=sys.stderr)
        return _USAGE_ERROR
    spec = locking.LockSpec(scheme, args.key_size, args.seed, split=split, protected_cube=cube)
    try:
        locked = locking.apply_lock(netlist, spec, key)
    except locking.LockError as e:
        print(f"error: {e}", file=sys.stderr)
        return _DOMAIN_ERROR
    args.output.write_text(bench.emit_bench(locked))
    key_out = args.key_out or args.output.with_suffix(".key")
    key_out.write_text(str(key) + "\n")
    sites = locking.key_gate_sites(locked)
    print(f"locked {netlist.name}: scheme={scheme.value} |K|={locked.key_size} gates={len(locked.gates)}")
    print(f"insertion sites: {', '.join(sites[i] for i in sorted(sites))}")
    print(f"wrote {args.output} and {key_out}")
    return 0


def cmd_atpg(args) -> int:
    netlist = _read_netlist(args.netlist, args.key_prefix)
    if netlist.key_size == 0:
        print(f"error: {netlist.name} has no key inputs", file=sys.stderr)
        return _DOMAIN_ERROR
    pset = atpg.generate_pattern_set(netlist, logic.Polarity(args.polarity))
    by_index = pset.by_index()
    for i in range(pset.key_size):
        p = by_index.get(i)
        if p is None:
            print(f"k{i}: unresolved")
        else:
            tag = "" if p.polarity.value == args.polarity else " (fallback)"
            print(f"k{i}: {p.polarity.value}{tag} {logic.bits_to_str(p.pi)} -> outputs {sorted(p.detecting_pos)}")
    args.output.write_text(atpg.render_patterns(pset))
    print(f"wrote {len(pset.patterns)} patterns to {args.output}"
          + (f" ({len(pset.unresolved)} unresolved)" if pset.unresolved else ""))
    return 0 if not pset.unresolved else _DOMAIN_ERROR


def cmd_attack(args) -> int:
    locked = _read_netlist(args.netlist, args.key_prefix)
    if locked.key_size == 0:
        print(f"error: {locked.name} has no key inputs", file=sys.stderr)
        return _DOMAIN_ERROR

    patterns = None
    if args.patterns:
        patterns = atpg.parse_patterns(args.patterns.read_text())

    if args.replay:
        transcript = oracle_mod.parse_transcript(args.replay.read_text())
        if (transcript.num_inputs, transcript.num_outputs, transcript.key_size) != (
            locked.num_inputs, locked.num_outputs, locked.key_size,
        ):
            print("error: transcript dimensions do not match the netlist", file=sys.stderr)
            return _USAGE_ERROR
        oracle = oracle_mod.ReplayOracle(transcript)
    else:
        if not args.key_file:
            print("error: --key-file required (or --replay)", file=sys.stderr)
            return _USAGE_ERROR
        hidden = locking.KeyVector.from_str(args.key_file.read_text())
        oracle = oracle_mod.Oracle(locked, hidden)

    try:
        report = attack_mod.run_attack(locked, oracle, patterns=patterns)
        if args.brute_residual and not report.all_recovered:
            report = attack_mod.brute_force_residual(locked, report, oracle)
        verified = False
        if report.all_recovered:
            verified = attack_mod.verify_recovered_key(locked, report.recovered_key(), oracle)
    except oracle_mod.ReplayError as e:
        print(f"error: {e}", file=sys.stderr)
        return _DOMAIN_ERROR

    if args.report:
        args.report.write_text(attack_mod.render_report(report))
    if args.transcript and not args.replay:
        args.transcript.write_text(oracle_mod.render_transcript(oracle.transcript))

    recovered = report.recovered_key()
    print(f"attack on {locked.name}: |K|={report.key_size} patterns={report.total_patterns} "
          f"queries={report.total_queries} time={report.wall_time:.2f}s")
    if recovered is not None:
        print(f"recovered key: {recovered}")
        print(f"equivalence check: {'pass' if verified else 'FAIL'}")
    else:
        print(f"unresolved bits: {report.unresolved_indices}")
    return 0 if report.all_recovered and verified else _DOMAIN_ERROR


def cmd_sim(args) -> int:
    netlist = _read_netlist(args.netlist, args.key_prefix)
    pi = logic.bits_from_str(args.pi)
    key = logic.bits_from_str(args.key) if args.key else ()
    injection = {}
    if args.inject:
        for part in args.inject.split(","):
            idx, val = part.split(":")
            injection[int(idx)] = int(val)
    po = logic.simulate_injected(netlist, pi, key, injection)
    print(logic.bits_to_str(po))
    return 0


if __name__ == "__main__":
    sys.exit(main())
