"""Black-box model of the unlocked, fault-injectable chip.

The oracle holds the hidden key sealed inside; everything outside this
module sees only `open_session` and per-session queries.  A session is one
injection configuration (forced values on key lines), mirroring hardware
where one fault setup is active at a time: a total map is the all-lines
faulted chip, a total-minus-one map leaves a single key line genuine, an
empty map is the plain functional chip.

Every query appends to a transcript; replaying a transcript through
`ReplayOracle` reproduces the same responses, which lets the attack run
against recorded hardware data instead of the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Sequence

from .bench import Netlist
from .logic import (
    InjectionMap,
    X,
    bits_from_str,
    bits_to_str,
    check_injection,
    column_bits,
    simulate_batch,
)

InjectionItems = tuple[tuple[int, int], ...]


def injection_items(injection: InjectionMap) -> InjectionItems:
    return tuple(sorted(injection.items()))


def _injection_str(items: InjectionItems) -> str:
    if not items:
        return "-"
    return ",".join(f"{i}:{v}" for i, v in items)


def _injection_from_str(text: str) -> InjectionItems:
    if text == "-":
        return ()
    try:
        pairs = []
        for part in text.split(","):
            i, v = part.split(":")
            pairs.append((int(i), int(v)))
        return tuple(pairs)
    except ValueError:
        raise ValueError(f"malformed injection field {text!r}") from None


@dataclass(frozen=True)
class TranscriptRecord:
    session_id: str
    injection: InjectionItems
    pi: tuple[int, ...]
    po: tuple[int, ...]


@dataclass
class Transcript:
    netlist_name: str
    num_inputs: int
    num_outputs: int
    key_size: int
    records: list[TranscriptRecord] = field(default_factory=list)


def render_transcript(t: Transcript) -> str:
    lines = [f"{t.netlist_name} {t.num_inputs} {t.num_outputs} {t.key_size}"]
    for r in t.records:
        lines.append(
            f"{r.session_id} {_injection_str(r.injection)} {bits_to_str(r.pi)} {bits_to_str(r.po)}"
        )
    return "\n".join(lines) + "\n"


def parse_transcript(text: str) -> Transcript:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty transcript")
    head = lines[0].split()
    if len(head) != 4:
        raise ValueError(f"malformed transcript header {lines[0]!r}")
    t = Transcript(head[0], int(head[1]), int(head[2]), int(head[3]))
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 4:
            raise ValueError(f"malformed transcript record {ln!r}")
        sid, inj, pi, po = parts
        t.records.append(
            TranscriptRecord(sid, _injection_from_str(inj), bits_from_str(pi), bits_from_str(po))
        )
    return t


class OracleSession:
    """One injection configuration; counts queries, records every exchange."""

    def __init__(self, oracle: "Oracle", session_id: str, injection: InjectionMap):
        self._oracle = oracle
        self.session_id = session_id
        self.injection = MappingProxyType(dict(injection))
        self.query_count = 0

    def query(self, pi: Sequence[int]) -> tuple[int, ...]:
        return self._oracle._answer_many(self, [pi])[0]

    def query_many(self, pis: Iterable[Sequence[int]]) -> list[tuple[int, ...]]:
        return self._oracle._answer_many(self, list(pis))


class Oracle:
    """Simulation-backed functional chip with a sealed key.

    The key is loaded at construction and never exposed: the public
    surface is open_session / session queries / the transcript.
    """

    def __init__(self, netlist: Netlist, hidden_key):
        bits = tuple(getattr(hidden_key, "bits", hidden_key))
        if len(bits) != netlist.key_size:
            raise ValueError(f"hidden key has {len(bits)} bits, netlist wants {netlist.key_size}")
        if not all(b in (0, 1) for b in bits):
            raise ValueError("hidden key bits must be 0 or 1")
        self._netlist = netlist
        self.__hidden = bits
        self._sessions_opened = 0
        self.transcript = Transcript(
            netlist.name, netlist.num_inputs, netlist.num_outputs, netlist.key_size
        )

    def open_session(self, injection: InjectionMap) -> OracleSession:
        check_injection(injection, self._netlist.key_size)
        sid = f"s{self._sessions_opened}"
        self._sessions_opened += 1
        return OracleSession(self, sid, injection)

    def _answer_many(self, session: OracleSession, pis: list[Sequence[int]]) -> list[tuple[int, ...]]:
        netlist = self._netlist
        n_pi = netlist.num_inputs
        vectors: list[tuple[int, ...]] = []
        for pi in pis:
            v = tuple(pi)
            if len(v) != n_pi:
                raise ValueError(f"query has {len(v)} input values, expected {n_pi}")
            if not all(b in (0, 1) for b in v):
                raise ValueError("query inputs must be fully assigned 0/1")
            vectors.append(v)
        width = len(vectors)
        pi_cols = [sum(vectors[p][i] << p for p in range(width)) for i in range(n_pi)]
        mask = (1 << width) - 1
        hidden = self.__hidden
        key_cols = [
            mask if session.injection.get(k, hidden[k]) else 0
            for k in range(netlist.key_size)
        ]
        po_cols = simulate_batch(netlist, pi_cols, key_cols, width)
        items = injection_items(session.injection)
        out: list[tuple[int, ...]] = []
        for p in range(width):
            po = tuple((col >> p) & 1 for col in po_cols)
            self.transcript.records.append(TranscriptRecord(session.session_id, items, vectors[p], po))
            out.append(po)
        session.query_count += width
        return out


class ReplayError(ValueError):
    pass


class _ReplaySession:
    def __init__(self, session_id: str, injection: InjectionMap, records: list[TranscriptRecord]):
        self.session_id = session_id
        self.injection = MappingProxyType(dict(injection))
        self._records = records
        self._cursor = 0
        self.query_count = 0

    def query(self, pi: Sequence[int]) -> tuple[int, ...]:
        v = tuple(pi)
        if self._cursor >= len(self._records):
            raise ReplayError(f"transcript exhausted for session {self.session_id}")
        rec = self._records[self._cursor]
        if rec.pi != v:
            raise ReplayError(
                f"session {self.session_id}: transcript has {bits_to_str(rec.pi)}, "
                f"attack asked {bits_to_str(v)}"
            )
        self._cursor += 1
        self.query_count += 1
        return rec.po

    def query_many(self, pis: Iterable[Sequence[int]]) -> list[tuple[int, ...]]:
        return [self.query(pi) for pi in pis]


class ReplayOracle:
    """Answers queries from a transcript; same surface as Oracle.

    Sessions are matched to the transcript's sessions by injection map, in
    first-appearance order; a deterministic attack therefore replays
    bit-identically.  Queried sessions that never appear in the transcript
    raise ReplayError on first query.
    """

    def __init__(self, transcript: Transcript):
        self.transcript = transcript
        groups: dict[str, list[TranscriptRecord]] = {}
        order: list[str] = []
        for rec in transcript.records:
            if rec.session_id not in groups:
                groups[rec.session_id] = []
                order.append(rec.session_id)
            groups[rec.session_id].append(rec)
        self._available: dict[InjectionItems, list[tuple[str, list[TranscriptRecord]]]] = {}
        for sid in order:
            recs = groups[sid]
            self._available.setdefault(recs[0].injection, []).append((sid, recs))
        self._fresh = 0

    def open_session(self, injection: InjectionMap) -> _ReplaySession:
        check_injection(injection, self.transcript.key_size)
        items = injection_items(injection)
        queue = self._available.get(items)
        if queue:
            sid, recs = queue.pop(0)
            return _ReplaySession(sid, injection, recs)
        self._fresh += 1
        return _ReplaySession(f"unrecorded{self._fresh}", injection, [])
