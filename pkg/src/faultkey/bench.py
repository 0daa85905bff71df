"""Gate-level combinational netlist IR and the `.bench` text format.

The `Netlist` produced here is immutable and shared by every other part of
the toolkit: locking transforms build new ones, the simulators and the test
generator only read them.  Key inputs are recognised by name (`keyinput<N>`
by default) and carry their own index space, separate from the data inputs.
"""

from __future__ import annotations

import heapq
import re
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

DEFAULT_KEY_PREFIX = "keyinput"


class GateKind(str, Enum):
    AND = "AND"
    NAND = "NAND"
    OR = "OR"
    NOR = "NOR"
    XOR = "XOR"
    XNOR = "XNOR"
    NOT = "NOT"
    BUF = "BUF"


_UNARY = (GateKind.NOT, GateKind.BUF)
_BINARY_ONLY = (GateKind.XOR, GateKind.XNOR)
_SEQUENTIAL_KINDS = {"DFF", "DFFSR", "LATCH", "SDFF"}

_NAME = r"[^\s(),=#]+"
_IO_RE = re.compile(rf"(INPUT|OUTPUT)\s*\(\s*({_NAME})\s*\)$", re.IGNORECASE)
_GATE_RE = re.compile(rf"({_NAME})\s*=\s*([A-Za-z]+)\s*\(([^()]*)\)$")
_BAD_NAME_RE = re.compile(r"[\s(),=#]")


@dataclass(frozen=True)
class Gate:
    kind: GateKind
    inputs: tuple[str, ...]
    output: str


@dataclass(frozen=True)
class Diagnostic:
    """One invariant violation; `code` is stable, `message` is for humans."""

    code: str
    message: str
    line: int | None = None
    column: int | None = None

    def __str__(self) -> str:
        loc = f" (line {self.line}" + (f", col {self.column})" if self.column else ")") if self.line else ""
        return f"[{self.code}]{loc} {self.message}"


class BenchError(ValueError):
    """Raised by parse_bench; carries every diagnostic found."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Netlist:
    """Immutable combinational circuit.

    `inputs` are the data primary inputs; `key_inputs` are kept apart and
    their tuple order defines key-bit indices k0..k(|K|-1).
    """

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    key_inputs: tuple[str, ...]
    gates: tuple[Gate, ...]

    @property
    def num_inputs(self) -> int:
        return len(self.inputs)

    @property
    def num_outputs(self) -> int:
        return len(self.outputs)

    @property
    def key_size(self) -> int:
        return len(self.key_inputs)

    @cached_property
    def nets(self) -> tuple[str, ...]:
        """Every declared net: data inputs, key inputs, then gate outputs."""
        return self.inputs + self.key_inputs + tuple(g.output for g in self.gates)

    @cached_property
    def net_index(self) -> dict[str, int]:
        return {n: i for i, n in enumerate(self.nets)}

    @cached_property
    def driver(self) -> dict[str, Gate]:
        return {g.output: g for g in self.gates}

    @cached_property
    def readers(self) -> dict[str, tuple[Gate, ...]]:
        acc: dict[str, list[Gate]] = {n: [] for n in self.nets}
        for g in self.gates:
            for n in g.inputs:
                acc[n].append(g)
        return {n: tuple(gs) for n, gs in acc.items()}

    @cached_property
    def topo_gates(self) -> tuple[Gate, ...]:
        """Gates in a deterministic topological order (declaration-stable)."""
        order = _topo_sort(self.inputs + self.key_inputs, self.gates)
        if order is None:
            raise ValueError(f"netlist {self.name!r} is cyclic")
        return order


def parse_bench(text: str, name: str = "bench", key_prefix: str = DEFAULT_KEY_PREFIX) -> Netlist:
    """Parse `.bench` text into a validated Netlist.

    Inputs whose names match `<key_prefix><decimal>` become key inputs,
    ordered by the numeric suffix.  Raises BenchError listing every
    diagnostic (syntax, duplicate driver, undeclared net, cycle, unknown
    or sequential gate kind, bad arity).
    """
    diags: list[Diagnostic] = []
    inputs: list[str] = []
    outputs: list[str] = []
    gates: list[Gate] = []
    declared_line: dict[str, int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _IO_RE.match(line)
        if m:
            keyword, net = m.group(1).upper(), m.group(2)
            if keyword == "INPUT":
                if net in declared_line:
                    diags.append(Diagnostic("duplicate-driver", f"net {net!r} already driven (line {declared_line[net]})", lineno))
                else:
                    declared_line[net] = lineno
                    inputs.append(net)
            else:
                outputs.append(net)
            continue
        m = _GATE_RE.match(line)
        if m:
            out, kind_txt, args_txt = m.group(1), m.group(2).upper(), m.group(3)
            ins = tuple(a.strip() for a in args_txt.split(","))
            if any(not a or _BAD_NAME_RE.search(a) for a in ins):
                diags.append(Diagnostic("syntax", f"malformed argument list {args_txt!r}", lineno, line.index("(") + 2))
                continue
            if kind_txt in _SEQUENTIAL_KINDS:
                diags.append(Diagnostic("sequential", f"{kind_txt} is sequential; only combinational netlists are supported", lineno))
                continue
            try:
                kind = GateKind(kind_txt)
            except ValueError:
                diags.append(Diagnostic("unknown-gate", f"unknown gate kind {kind_txt!r}", lineno, line.index("=") + 2))
                continue
            if kind in _UNARY and len(ins) != 1:
                diags.append(Diagnostic("bad-arity", f"{kind.value} takes exactly 1 input, got {len(ins)}", lineno))
                continue
            if kind in _BINARY_ONLY and len(ins) != 2:
                diags.append(Diagnostic("bad-arity", f"{kind.value} takes exactly 2 inputs, got {len(ins)}", lineno))
                continue
            if kind not in _UNARY and len(ins) < 2:
                diags.append(Diagnostic("bad-arity", f"{kind.value} takes at least 2 inputs, got {len(ins)}", lineno))
                continue
            if out in declared_line:
                diags.append(Diagnostic("duplicate-driver", f"net {out!r} already driven (line {declared_line[out]})", lineno))
                continue
            declared_line[out] = lineno
            gates.append(Gate(kind, ins, out))
            continue
        diags.append(Diagnostic("syntax", f"unrecognised line {line!r}", lineno, 1))

    driven = set(declared_line)
    for g in gates:
        for n in g.inputs:
            if n not in driven:
                diags.append(Diagnostic("undeclared-net", f"gate input {n!r} has no driver"))
                driven.add(n)  # report each missing net once
    for n in outputs:
        if n not in driven:
            diags.append(Diagnostic("undeclared-net", f"output {n!r} has no driver"))
            driven.add(n)

    data_inputs, key_inputs = split_key_inputs(inputs, key_prefix)

    if _topo_sort(tuple(inputs), tuple(gates)) is None:
        diags.append(Diagnostic("cycle", "combinational loop detected"))

    if diags:
        raise BenchError(diags)
    return Netlist(name, tuple(data_inputs), tuple(outputs), tuple(key_inputs), tuple(gates))


def split_key_inputs(inputs: list[str], key_prefix: str) -> tuple[list[str], list[str]]:
    """Split declared inputs into (data, key); keys sorted by numeric suffix."""
    key_re = re.compile(re.escape(key_prefix) + r"(\d+)$")
    data, keyed = [], []
    for n in inputs:
        m = key_re.fullmatch(n)
        if m:
            keyed.append((int(m.group(1)), n))
        else:
            data.append(n)
    keyed.sort()
    return data, [n for _, n in keyed]


def emit_bench(netlist: Netlist) -> str:
    """Canonical `.bench` text: inputs, key inputs, outputs, gates in topo order."""
    lines = [f"INPUT({n})" for n in netlist.inputs]
    lines += [f"INPUT({n})" for n in netlist.key_inputs]
    lines += [f"OUTPUT({n})" for n in netlist.outputs]
    for g in netlist.topo_gates:
        lines.append(f"{g.output} = {g.kind.value}({', '.join(g.inputs)})")
    return "\n".join(lines) + "\n"


def validate(netlist: Netlist, key_prefix: str = DEFAULT_KEY_PREFIX) -> list[Diagnostic]:
    """Check every Netlist invariant on a hand-built candidate.

    Returns one diagnostic per violation; an empty list means the candidate
    would also be accepted by parse_bench.
    """
    diags: list[Diagnostic] = []
    driven: dict[str, str] = {}
    for n in netlist.inputs + netlist.key_inputs:
        if n in driven:
            diags.append(Diagnostic("duplicate-driver", f"net {n!r} declared as input twice"))
        driven[n] = "input"
    for g in netlist.gates:
        if g.output in driven:
            diags.append(Diagnostic("duplicate-driver", f"net {g.output!r} has more than one driver"))
        driven[g.output] = "gate"
        if g.kind in _UNARY and len(g.inputs) != 1:
            diags.append(Diagnostic("bad-arity", f"{g.kind.value} gate {g.output!r} has {len(g.inputs)} inputs"))
        elif g.kind in _BINARY_ONLY and len(g.inputs) != 2:
            diags.append(Diagnostic("bad-arity", f"{g.kind.value} gate {g.output!r} has {len(g.inputs)} inputs"))
        elif g.kind not in _UNARY and len(g.inputs) < 2:
            diags.append(Diagnostic("bad-arity", f"{g.kind.value} gate {g.output!r} has {len(g.inputs)} inputs"))
    for g in netlist.gates:
        for n in g.inputs:
            if n not in driven:
                diags.append(Diagnostic("undeclared-net", f"gate input {n!r} has no driver"))
    for n in netlist.outputs:
        if n not in driven:
            diags.append(Diagnostic("undeclared-net", f"output {n!r} has no driver"))

    data, keyed = split_key_inputs(list(netlist.inputs + netlist.key_inputs), key_prefix)
    if tuple(keyed) != netlist.key_inputs:
        diags.append(Diagnostic("key-order", f"key_inputs must be exactly the {key_prefix}<N> inputs sorted by suffix"))
    if tuple(data) != netlist.inputs:
        diags.append(Diagnostic("key-order", f"data inputs must not match the {key_prefix}<N> convention"))

    if _topo_sort(netlist.inputs + netlist.key_inputs, netlist.gates) is None:
        diags.append(Diagnostic("cycle", "combinational loop detected"))
    return diags


def structurally_equal(a: Netlist, b: Netlist) -> bool:
    """Isomorphism used by round-trip checks: same nets, orders, and gates."""
    return (
        a.inputs == b.inputs
        and a.outputs == b.outputs
        and a.key_inputs == b.key_inputs
        and {g.output: (g.kind, g.inputs) for g in a.gates}
        == {g.output: (g.kind, g.inputs) for g in b.gates}
    )


def _topo_sort(sources: tuple[str, ...], gates: tuple[Gate, ...]) -> tuple[Gate, ...] | None:
    """Kahn's algorithm keyed by declaration index; None if cyclic."""
    by_output = {g.output: i for i, g in enumerate(gates)}
    pending: dict[int, int] = {}  # gate idx -> unresolved input count
    dependents: dict[int, list[int]] = {i: [] for i in range(len(gates))}
    known = set(sources)
    ready: list[int] = []
    for i, g in enumerate(gates):
        unresolved = 0
        for n in g.inputs:
            if n in known:
                continue
            j = by_output.get(n)
            if j is None:
                continue  # undriven net; reported elsewhere, not a cycle
            unresolved += 1
            dependents[j].append(i)
        pending[i] = unresolved
        if unresolved == 0:
            ready.append(i)
    heapq.heapify(ready)
    order: list[Gate] = []
    while ready:
        i = heapq.heappop(ready)
        order.append(gates[i])
        for j in dependents[i]:
            pending[j] -= 1
            if pending[j] == 0:
                heapq.heappush(ready, j)
    if len(order) != len(gates):
        return None
    return tuple(order)
