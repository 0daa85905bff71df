"""Logic value domains and netlist simulation.

Three layers share one compiled gate program:

* a two-rail bit-parallel engine over arbitrary-width Python ints, used for
  everything ternary (`0/1/X`); width-1 calls give scalar simulation and
  wide calls batch thousands of vectors per topological pass,
* `simulate_injected`, the same engine with key lines overridden by an
  injection map (the software stand-in for faulting key registers),
* `simulate5`, a good/faulty composite that reports the five-valued
  alphabet `0 1 X D D'` at the outputs (`D` = good 1 / faulty 0).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

from .bench import Gate, GateKind, Netlist

# signal values; the first three are the ternary alphabet, all five the
# composite one used by fault reasoning
ZERO, ONE, X, D, D_BAR = 0, 1, 2, 3, 4

_V5_CHARS = {ZERO: "0", ONE: "1", X: "X", D: "D", D_BAR: "D'"}


class Polarity(str, Enum):
    SA1 = "sa1"
    SA0 = "sa0"

    @property
    def stuck_value(self) -> int:
        return 1 if self is Polarity.SA1 else 0

    @property
    def activation_value(self) -> int:
        """Good-circuit value at the fault site that exposes the fault."""
        return 1 - self.stuck_value

    @property
    def error_value(self) -> int:
        """Five-valued symbol carried by the fault site when activated."""
        return D_BAR if self is Polarity.SA1 else D

    @property
    def opposite(self) -> "Polarity":
        return Polarity.SA0 if self is Polarity.SA1 else Polarity.SA1


@dataclass(frozen=True)
class FaultSpec:
    """Single stuck-at fault on a key line, identified by key index."""

    key_index: int
    polarity: Polarity

    def site(self, netlist: Netlist) -> str:
        return netlist.key_inputs[self.key_index]


# An injection map forces key lines to constants regardless of the loaded
# key: {key index -> 0/1}.  A total map models the all-lines-faulted chip,
# a total-minus-one map leaves exactly one key line genuine.
InjectionMap = Mapping[int, int]


def full_injection(key_size: int, value: int, skip: int | None = None) -> dict[int, int]:
    return {i: value for i in range(key_size) if i != skip}


def check_injection(injection: InjectionMap, key_size: int) -> None:
    for idx, val in injection.items():
        if not 0 <= idx < key_size:
            raise IndexError(f"injection index {idx} out of range for |K|={key_size}")
        if val not in (0, 1):
            raise ValueError(f"injection value for key {idx} must be 0 or 1, got {val!r}")


def bits_from_str(text: str) -> tuple[int, ...]:
    table = {"0": ZERO, "1": ONE, "X": X, "x": X}
    try:
        return tuple(table[c] for c in text.strip())
    except KeyError as e:
        raise ValueError(f"invalid logic character {e.args[0]!r} in {text!r}") from None


def bits_to_str(bits: Sequence[int]) -> str:
    return "".join(_V5_CHARS[b] for b in bits)


def fill_x(bits: Sequence[int], fill: int = 0) -> tuple[int, ...]:
    """Complete a ternary vector; X positions take `fill`."""
    return tuple(fill if b == X else b for b in bits)


# ---------------------------------------------------------------------------
# compiled gate program

K_AND, K_NAND, K_OR, K_NOR, K_XOR, K_XNOR, K_NOT, K_BUF = range(8)
KIND_CODE = {
    GateKind.AND: K_AND,
    GateKind.NAND: K_NAND,
    GateKind.OR: K_OR,
    GateKind.NOR: K_NOR,
    GateKind.XOR: K_XOR,
    GateKind.XNOR: K_XNOR,
    GateKind.NOT: K_NOT,
    GateKind.BUF: K_BUF,
}


class Compiled:
    """Integer-indexed view of a netlist, cached on the instance."""

    __slots__ = (
        "n_nets", "index", "names", "pi", "keys", "pos", "po_set",
        "ops", "out_of_op", "readers", "driver_op", "dist_to_po", "gate_of_op",
    )

    def __init__(self, netlist: Netlist):
        names = netlist.nets
        index = netlist.net_index
        self.n_nets = len(names)
        self.names = names
        self.index = index
        self.pi = [index[n] for n in netlist.inputs]
        self.keys = [index[n] for n in netlist.key_inputs]
        self.pos = [index[n] for n in netlist.outputs]
        self.po_set = frozenset(self.pos)
        ops: list[tuple[int, int, tuple[int, ...]]] = []
        gate_of_op: list[Gate] = []
        for g in netlist.topo_gates:
            ops.append((KIND_CODE[g.kind], index[g.output], tuple(index[n] for n in g.inputs)))
            gate_of_op.append(g)
        self.ops = ops
        self.gate_of_op = gate_of_op
        self.out_of_op = [op[1] for op in ops]
        readers: list[list[int]] = [[] for _ in range(self.n_nets)]
        driver_op: list[int] = [-1] * self.n_nets
        for oi, (_, out, ins) in enumerate(ops):
            driver_op[out] = oi
            for i in ins:
                if oi not in readers[i]:
                    readers[i].append(oi)
        self.readers = readers
        self.driver_op = driver_op
        self.dist_to_po = self._po_distances()

    def _po_distances(self) -> list[int]:
        """Per net: minimum gate count to reach a primary output."""
        inf = self.n_nets + 1
        dist = [inf] * self.n_nets
        for p in self.pos:
            dist[p] = 0
        for _, out, ins in reversed(self.ops):
            d = dist[out] + 1
            for i in ins:
                if d < dist[i]:
                    dist[i] = d
        return dist


def compiled(netlist: Netlist) -> Compiled:
    comp = netlist.__dict__.get("_compiled")
    if comp is None:
        comp = Compiled(netlist)
        netlist.__dict__["_compiled"] = comp
    return comp


# ---------------------------------------------------------------------------
# two-rail ternary engine
#
# Each net holds (val, known) masks over the batch width: known bit 0 means
# X (val bit is then 0), known bit 1 means the val bit is the signal value.
# The encoding is X-pessimistic and exact for fully-known inputs.


def _eval_two_rail(comp: Compiled, val: list[int], known: list[int], mask: int) -> None:
    for kind, out, ins in comp.ops:
        if kind == K_AND or kind == K_NAND:
            v = mask
            k_all = mask
            k_ctl = 0
            for i in ins:
                vi, ki = val[i], known[i]
                v &= vi
                k_all &= ki
                k_ctl |= ki & ~vi
            k = k_all | (k_ctl & mask)
            if kind == K_NAND:
                v = ~v & k
        elif kind == K_OR or kind == K_NOR:
            v = 0
            k_all = mask
            k_ctl = 0
            for i in ins:
                vi, ki = val[i], known[i]
                v |= vi
                k_all &= ki
                k_ctl |= ki & vi
            k = k_all | k_ctl
            if kind == K_NOR:
                v = ~v & k
        elif kind == K_XOR or kind == K_XNOR:
            a, b = ins
            k = known[a] & known[b]
            v = (val[a] ^ val[b]) & k
            if kind == K_XNOR:
                v = ~v & k
        elif kind == K_NOT:
            k = known[ins[0]]
            v = ~val[ins[0]] & k
        else:  # K_BUF
            k = known[ins[0]]
            v = val[ins[0]]
        val[out] = v & mask
        known[out] = k & mask


def simulate_batch(
    netlist: Netlist,
    pi_cols: Sequence[int],
    key_cols: Sequence[int],
    width: int,
) -> list[int]:
    """Two-valued batch simulation; column bit p is vector p's value.

    All inputs must be fully assigned (the columns are taken as known
    everywhere).  Returns one column per primary output.
    """
    comp = compiled(netlist)
    if len(pi_cols) != len(comp.pi) or len(key_cols) != len(comp.keys):
        raise ValueError(
            f"dimension mismatch: expected |PI|={len(comp.pi)}, |K|={len(comp.keys)}, "
            f"got {len(pi_cols)}, {len(key_cols)}"
        )
    mask = (1 << width) - 1
    val = [0] * comp.n_nets
    known = [0] * comp.n_nets
    for n, col in zip(comp.pi, pi_cols):
        val[n] = col & mask
        known[n] = mask
    for n, col in zip(comp.keys, key_cols):
        val[n] = col & mask
        known[n] = mask
    _eval_two_rail(comp, val, known, mask)
    return [val[p] for p in comp.pos]


def _scalar_ternary(comp: Compiled, assign: dict[int, int]) -> tuple[list[int], list[int]]:
    val = [0] * comp.n_nets
    known = [0] * comp.n_nets
    for net, v in assign.items():
        if v != X:
            val[net] = v
            known[net] = 1
    _eval_two_rail(comp, val, known, 1)
    return val, known


def _ternary_out(val: list[int], known: list[int], nets: Sequence[int]) -> list[int]:
    return [(val[n] if known[n] else X) for n in nets]


def simulate3(netlist: Netlist, pi: Sequence[int], key: Sequence[int]) -> list[int]:
    """Ternary simulation of one vector; X inputs stay X-pessimistic."""
    comp = compiled(netlist)
    if len(pi) != len(comp.pi) or len(key) != len(comp.keys):
        raise ValueError(
            f"dimension mismatch: expected |PI|={len(comp.pi)}, |K|={len(comp.keys)}, "
            f"got {len(pi)}, {len(key)}"
        )
    assign = dict(zip(comp.pi, pi))
    assign.update(zip(comp.keys, key))
    val, known = _scalar_ternary(comp, assign)
    return _ternary_out(val, known, comp.pos)


def simulate_injected(
    netlist: Netlist,
    pi: Sequence[int],
    hidden_key: Sequence[int],
    injection: InjectionMap,
) -> list[int]:
    """Simulation with key lines overridden by the injection map.

    Key line i carries injection[i] when present, else hidden_key[i]; a
    total map therefore makes the result independent of the loaded key.
    """
    comp = compiled(netlist)
    check_injection(injection, len(comp.keys))
    if len(hidden_key) != len(comp.keys):
        raise ValueError(f"hidden key length {len(hidden_key)} != |K|={len(comp.keys)}")
    key = [injection.get(i, hidden_key[i]) for i in range(len(comp.keys))]
    return simulate3(netlist, pi, key)


def simulate5(
    netlist: Netlist,
    pi: Sequence[int],
    fault: FaultSpec,
    constraints: InjectionMap,
) -> list[int]:
    """Composite good/faulty simulation for one stuck-at fault on a key line.

    The good circuit holds the activation value at the fault site, the
    faulty one the stuck value; constrained key lines carry their constants
    in both, unconstrained ones stay X.  Output pairs map to the five-valued
    alphabet (mixed known/X pairs collapse to X).
    """
    comp = compiled(netlist)
    check_injection(constraints, len(comp.keys))
    if not 0 <= fault.key_index < len(comp.keys):
        raise IndexError(f"fault key index {fault.key_index} out of range for |K|={len(comp.keys)}")
    if fault.key_index in constraints:
        raise ValueError(
            f"fault activation conflict: key {fault.key_index} is constrained to "
            f"{constraints[fault.key_index]} at the fault site"
        )
    if len(pi) != len(comp.pi):
        raise ValueError(f"dimension mismatch: expected |PI|={len(comp.pi)}, got {len(pi)}")

    def run(site_value: int) -> tuple[list[int], list[int]]:
        assign = dict(zip(comp.pi, pi))
        for i, n in enumerate(comp.keys):
            assign[n] = constraints.get(i, X)
        assign[comp.keys[fault.key_index]] = site_value
        return _scalar_ternary(comp, assign)

    gv, gk = run(fault.polarity.activation_value)
    fv, fk = run(fault.polarity.stuck_value)
    out = []
    for p in comp.pos:
        if not (gk[p] and fk[p]):
            out.append(X)
        elif gv[p] == fv[p]:
            out.append(gv[p])
        elif gv[p] == 1:
            out.append(D)
        else:
            out.append(D_BAR)
    return out


def good_value(v5: int) -> int:
    """Project a five-valued symbol onto the good circuit."""
    return {ZERO: ZERO, ONE: ONE, X: X, D: ONE, D_BAR: ZERO}[v5]


def faulty_value(v5: int) -> int:
    """Project a five-valued symbol onto the faulty circuit."""
    return {ZERO: ZERO, ONE: ONE, X: X, D: ZERO, D_BAR: ONE}[v5]


# ---------------------------------------------------------------------------
# five-valued gate tables for the test generator
#
# Built from the pair semantics: evaluate good and faulty components with
# ternary rules, collapse any X-bearing pair to X.

def _t_not(a: int) -> int:
    return a if a == X else 1 - a


def _t_and(a: int, b: int) -> int:
    if a == 0 or b == 0:
        return 0
    if a == 1 and b == 1:
        return 1
    return X


def _t_or(a: int, b: int) -> int:
    if a == 1 or b == 1:
        return 1
    if a == 0 and b == 0:
        return 0
    return X


def _t_xor(a: int, b: int) -> int:
    if a == X or b == X:
        return X
    return a ^ b


_PAIR = {ZERO: (0, 0), ONE: (1, 1), X: (X, X), D: (1, 0), D_BAR: (0, 1)}
_UNPAIR = {(0, 0): ZERO, (1, 1): ONE, (1, 0): D, (0, 1): D_BAR}


def _v5_of(g: int, f: int) -> int:
    if g == X or f == X:
        return X
    return _UNPAIR[(g, f)]


def _build_table(t_op) -> tuple[tuple[int, ...], ...]:
    table = []
    for a in range(5):
        ga, fa = _PAIR[a]
        row = []
        for b in range(5):
            gb, fb = _PAIR[b]
            row.append(_v5_of(t_op(ga, gb), t_op(fa, fb)))
        table.append(tuple(row))
    return tuple(table)


AND5 = _build_table(_t_and)
OR5 = _build_table(_t_or)
XOR5 = _build_table(_t_xor)
NOT5 = (ONE, ZERO, X, D_BAR, D)


def eval_gate5(kind: int, values: Sequence[int]) -> int:
    """Fold the five-valued tables over a gate's input values."""
    if kind == K_NOT:
        return NOT5[values[0]]
    if kind == K_BUF:
        return values[0]
    if kind == K_AND or kind == K_NAND:
        acc = values[0]
        for v in values[1:]:
            acc = AND5[acc][v]
        return NOT5[acc] if kind == K_NAND else acc
    if kind == K_OR or kind == K_NOR:
        acc = values[0]
        for v in values[1:]:
            acc = OR5[acc][v]
        return NOT5[acc] if kind == K_NOR else acc
    acc = values[0]
    for v in values[1:]:
        acc = XOR5[acc][v]
    return NOT5[acc] if kind == K_XNOR else acc


# ---------------------------------------------------------------------------
# vector generation helpers

def exhaustive_columns(n_inputs: int) -> tuple[list[int], int]:
    """Truth-table columns: bit p of column i is bit i of pattern index p."""
    width = 1 << n_inputs
    cols = []
    for i in range(n_inputs):
        block = 1 << i
        unit = ((1 << block) - 1) << block  # `block` zeros then `block` ones
        period = block * 2
        reps = width // period
        col = unit * ((1 << (period * reps)) - 1) // ((1 << period) - 1)
        cols.append(col)
    return cols, width


def random_columns(n_inputs: int, width: int, rng: random.Random) -> list[int]:
    return [rng.getrandbits(width) for _ in range(n_inputs)]


def column_bits(value: int, width: int) -> list[int]:
    """Explode a batch column back into per-vector bits."""
    return [(value >> p) & 1 for p in range(width)]
