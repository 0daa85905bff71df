"""Differential fault analysis: recover the key from oracle responses.

For each key bit the attack queries two chip configurations with the same
constrained test pattern: one with every key line faulted to the stuck
value, one with the target line left genuine.  Equal responses mean the
true bit equals the injected value, differing responses the complement.
The attack consumes only the locked netlist and black-box sessions; it is
self-referencing (no golden reference) and never touches the hidden key.
"""

from __future__ import annotations

import itertools
import json
import random
import time
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .atpg import (
    BacktrackLimitExceeded,
    Pattern,
    PatternSet,
    d_algorithm,
    generate_pattern_set,
    verify_pattern,
)
from .bench import Netlist
from .locking import KeyVector
from .logic import (
    FaultSpec,
    Polarity,
    bits_to_str,
    exhaustive_columns,
    fill_x,
    random_columns,
    simulate_batch,
)

_REFINE_FIRST_LIMIT = 10_000
_REFINE_FULL_LIMIT = 1_000_000
_VERIFY_VECTORS = 10_000
_VERIFY_SEED = 0x0DD5EED  # fixed so live runs and transcript replays agree


class ResolutionStatus(str, Enum):
    RECOVERED = "recovered"
    UNRESOLVED = "unresolved"


@dataclass
class BitResolution:
    key_index: int
    status: ResolutionStatus
    value: int | None = None
    polarity_used: Polarity | None = None
    pattern: Pattern | None = None
    queries_used: int = 0

    def __post_init__(self):
        if (self.value is not None) != (self.status is ResolutionStatus.RECOVERED):
            raise ValueError("value must be present exactly when status is RECOVERED")


@dataclass
class AttackReport:
    netlist_name: str
    key_size: int
    resolutions: list[BitResolution]
    total_queries: int
    total_patterns: int
    wall_time: float

    @property
    def all_recovered(self) -> bool:
        return all(r.status is ResolutionStatus.RECOVERED for r in self.resolutions)

    @property
    def unresolved_indices(self) -> list[int]:
        return [r.key_index for r in self.resolutions if r.status is not ResolutionStatus.RECOVERED]

    def recovered_key(self) -> KeyVector | None:
        if not self.all_recovered or self.key_size == 0:
            return KeyVector(()) if self.key_size == 0 else None
        return KeyVector(tuple(r.value for r in sorted(self.resolutions, key=lambda r: r.key_index)))


def decide_bit(resp_f: Sequence[int], resp_a: Sequence[int], injected_value: int) -> int:
    """Key-bit decision rule: the bit equals the injected value when the
    all-faulted and one-line-genuine responses match, else its complement."""
    if len(resp_f) != len(resp_a):
        raise ValueError(f"response length mismatch: {len(resp_f)} vs {len(resp_a)}")
    if injected_value not in (0, 1):
        raise ValueError("injected_value must be 0 or 1")
    return injected_value if tuple(resp_f) == tuple(resp_a) else 1 - injected_value


def run_attack(
    locked: Netlist,
    oracle,
    patterns: PatternSet | None = None,
    refine: bool = True,
) -> AttackReport:
    """Full pipeline: generate (or take) the constrained pattern set, query
    the faulted/reference session pair per bit, decide each bit, and retry
    unresolved bits with the already-recovered bits as extra constraints.

    The oracle is used exclusively through open_session/query.
    """
    t0 = time.perf_counter()
    key_size = locked.key_size
    if key_size == 0:
        return AttackReport(locked.name, 0, [], 0, 0, time.perf_counter() - t0)
    pset = patterns if patterns is not None else generate_pattern_set(locked)
    if pset.key_size != key_size or pset.num_inputs != locked.num_inputs:
        raise ValueError("pattern set does not match the locked netlist dimensions")

    resolutions: dict[int, BitResolution] = {}
    sessions: dict[tuple, object] = {}  # shared faulted configurations
    total_queries = 0
    total_patterns = len(pset.patterns)

    def session_for(injection: dict[int, int]):
        key = tuple(sorted(injection.items()))
        s = sessions.get(key)
        if s is None:
            s = oracle.open_session(injection)
            sessions[key] = s
        return s

    for p in sorted(pset.patterns, key=lambda p: p.key_index):
        constraints = p.constraint_map(key_size)
        faulted = dict(constraints)
        faulted[p.key_index] = p.polarity.stuck_value
        resolutions[p.key_index] = _resolve(
            oracle, session_for(faulted), p, constraints, key_size
        )
        total_queries += 2

    if refine:
        for i in sorted(pset.unresolved):
            res = _refine_bit(locked, oracle, i, resolutions, key_size)
            resolutions[i] = res
            total_queries += res.queries_used
            if res.pattern is not None:
                total_patterns += 1
    else:
        for i in sorted(pset.unresolved):
            resolutions[i] = BitResolution(i, ResolutionStatus.UNRESOLVED)

    ordered = [resolutions[i] for i in range(key_size)]
    return AttackReport(
        locked.name, key_size, ordered, total_queries, total_patterns,
        time.perf_counter() - t0,
    )


def _resolve(oracle, faulted_session, p: Pattern, constraints: dict[int, int], key_size: int) -> BitResolution:
    pi = fill_x(p.pi)  # the detection certificate holds for any completion
    resp_f = faulted_session.query(pi)
    genuine = oracle.open_session(constraints)
    resp_a = genuine.query(pi)
    value = decide_bit(resp_f, resp_a, p.polarity.stuck_value)
    return BitResolution(
        p.key_index, ResolutionStatus.RECOVERED, value, p.polarity, p, queries_used=2
    )


def _refine_bit(
    locked: Netlist,
    oracle,
    index: int,
    resolutions: dict[int, BitResolution],
    key_size: int,
) -> BitResolution:
    """Second-chance test generation with recovered bits pinned to their
    actual values (the unknown remainder stays at the polarity constant)."""
    for polarity in (Polarity.SA1, Polarity.SA0):
        constraints: dict[int, int] = {}
        for j in range(key_size):
            if j == index:
                continue
            r = resolutions.get(j)
            if r is not None and r.status is ResolutionStatus.RECOVERED:
                constraints[j] = r.value
            else:
                constraints[j] = polarity.stuck_value
        pattern = None
        for limit in (_REFINE_FIRST_LIMIT, _REFINE_FULL_LIMIT):
            try:
                pattern = d_algorithm(locked, FaultSpec(index, polarity), constraints, limit)
                break
            except BacktrackLimitExceeded:
                continue
        if pattern is None or not verify_pattern(locked, pattern):
            continue
        faulted = dict(constraints)
        faulted[index] = polarity.stuck_value
        res = _resolve(oracle, oracle.open_session(faulted), pattern, constraints, key_size)
        return res
    return BitResolution(index, ResolutionStatus.UNRESOLVED)


def verify_recovered_key(locked: Netlist, recovered: KeyVector, reference_unlocked) -> bool:
    """Compare the locked netlist under the recovered key against the
    unlocked chip (empty-injection session): exhaustive up to 16 data
    inputs, 10,000 fixed-seed random vectors above."""
    if len(recovered) != locked.key_size:
        raise ValueError(
            f"recovered key has {len(recovered)} bits, expected {locked.key_size} "
            "(unresolved bits present?)"
        )
    n = locked.num_inputs
    if n <= 16:
        cols, width = exhaustive_columns(n)
    else:
        width = _VERIFY_VECTORS
        cols = random_columns(n, width, random.Random(_VERIFY_SEED))
    vectors = [tuple((cols[i] >> p) & 1 for i in range(n)) for p in range(width)]
    session = reference_unlocked.open_session({})
    ref = session.query_many(vectors)
    mask = (1 << width) - 1
    key_cols = [mask if b else 0 for b in recovered.bits]
    got_cols = simulate_batch(locked, cols, key_cols, width)
    got = [tuple((col >> p) & 1 for col in got_cols) for p in range(width)]
    return [tuple(r) for r in ref] == got


def brute_force_residual(
    locked: Netlist,
    report: AttackReport,
    oracle,
    max_bits: int = 20,
) -> AttackReport:
    """Exhaust the unresolved bits against the unlocked chip; candidates
    are screened on a fixed probe batch, survivors confirmed with
    verify_recovered_key.  Opt-in: never part of the default attack."""
    residual = report.unresolved_indices
    if not residual:
        return report
    if len(residual) > max_bits:
        raise ValueError(f"{len(residual)} unresolved bits exceed the {max_bits}-bit budget")
    n = locked.num_inputs
    rng = random.Random(_VERIFY_SEED ^ 0xB0)
    width = min(64, 1 << min(n, 16))
    cols = random_columns(n, width, rng)
    vectors = [tuple((cols[i] >> p) & 1 for i in range(n)) for p in range(width)]
    session = oracle.open_session({})
    ref = [tuple(r) for r in session.query_many(vectors)]
    probe_queries = width
    mask = (1 << width) - 1

    base = [r.value if r.status is ResolutionStatus.RECOVERED else 0 for r in sorted(report.resolutions, key=lambda r: r.key_index)]
    for combo in itertools.product((0, 1), repeat=len(residual)):
        bits = list(base)
        for idx, b in zip(residual, combo):
            bits[idx] = b
        key_cols = [mask if b else 0 for b in bits]
        got_cols = simulate_batch(locked, cols, key_cols, width)
        got = [tuple((col >> p) & 1 for col in got_cols) for p in range(width)]
        if got != ref:
            continue
        candidate = KeyVector(tuple(bits))
        if verify_recovered_key(locked, candidate, oracle):
            for r in report.resolutions:
                if r.key_index in residual:
                    r.status = ResolutionStatus.RECOVERED
                    r.value = bits[r.key_index]
            report.total_queries += probe_queries + (1 << min(n, 16) if n <= 16 else _VERIFY_VECTORS)
            return report
    report.total_queries += probe_queries
    return report


# ---------------------------------------------------------------------------
# report serialization (schema v1)

def render_report(report: AttackReport) -> str:
    """Canonical JSON; wall_time is serialized as null so live runs and
    transcript replays emit byte-identical documents (the measured time
    stays on the in-memory report)."""
    doc = {
        "v": 1,
        "netlist": report.netlist_name,
        "key_size": report.key_size,
        "total_queries": report.total_queries,
        "total_patterns": report.total_patterns,
        "wall_time": None,
        "resolutions": [
            {
                "key_index": r.key_index,
                "status": r.status.value,
                "value": r.value,
                "polarity": r.polarity_used.value if r.polarity_used else None,
                "pattern": bits_to_str(r.pattern.pi) if r.pattern else None,
                "detecting_outputs": sorted(r.pattern.detecting_pos) if r.pattern else None,
                "queries_used": r.queries_used,
            }
            for r in sorted(report.resolutions, key=lambda r: r.key_index)
        ],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
