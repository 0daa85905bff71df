"""Seeded random combinational circuit generation.

Used to build the bundled benchmark circuits and the randomized test
corpora.  Circuits come out as layered DAGs: gate inputs are drawn with a
bias toward recent and still-unread nets, which keeps logic live and gives
ISCAS-like depth; outputs are the sink nets of the finished DAG.
"""

from __future__ import annotations

import random

from .bench import Gate, GateKind, Netlist

_KIND_WEIGHTS = [
    (GateKind.NAND, 28),
    (GateKind.NOR, 12),
    (GateKind.AND, 16),
    (GateKind.OR, 10),
    (GateKind.NOT, 12),
    (GateKind.XOR, 9),
    (GateKind.XNOR, 5),
    (GateKind.BUF, 3),
]
_KINDS = [k for k, _ in _KIND_WEIGHTS]
_WEIGHTS = [w for _, w in _KIND_WEIGHTS]


def random_circuit(
    name: str,
    n_inputs: int,
    n_outputs: int,
    n_gates: int,
    seed: int,
    target_depth: int = 30,
) -> Netlist:
    """Deterministic random circuit with the requested interface size.

    Requires n_gates >= n_outputs.  Logic depth is steered toward
    `target_depth` by a level quota that rises linearly over the gate
    budget.  Primary outputs are drawn from the sink nets; when the DAG
    ends up with fewer sinks than requested outputs the remainder come
    from the latest internal nets.
    """
    if n_gates < n_outputs:
        raise ValueError("need at least one gate per output")
    rng = random.Random(seed)
    inputs = [f"i{t}" for t in range(n_inputs)]
    nets: list[str] = list(inputs)
    unread: list[str] = list(inputs)
    level = {n: 0 for n in inputs}
    gates: list[Gate] = []

    def draw_input(exclude: set[str], quota: int) -> str:
        # consume unread nets first so almost everything stays observable
        pool = [n for n in unread if n not in exclude and level[n] < quota]
        if pool and rng.random() < 0.75:
            return rng.choice(pool)
        pick = [n for n in nets if n not in exclude and level[n] < quota]
        if not pick:
            pick = [n for n in nets if n not in exclude]
        return rng.choice(pick)

    for t in range(n_gates):
        quota = 1 + target_depth * (t + 1) // n_gates
        kind = rng.choices(_KINDS, weights=_WEIGHTS, k=1)[0]
        if len(nets) < 2 and kind not in (GateKind.NOT, GateKind.BUF):
            kind = GateKind.NOT  # multi-input kinds need two distinct nets
        if kind in (GateKind.NOT, GateKind.BUF):
            arity = 1
        elif kind in (GateKind.XOR, GateKind.XNOR):
            arity = 2
        else:
            arity = min(rng.choices([2, 3, 4], weights=[70, 24, 6], k=1)[0], len(nets))
        chosen: set[str] = set()
        while len(chosen) < arity:
            chosen.add(draw_input(chosen, quota))
        ins = tuple(sorted(chosen, key=nets.index))
        out = f"n{t}"
        gates.append(Gate(kind, ins, out))
        nets.append(out)
        level[out] = 1 + max(level[n] for n in ins)
        unread.append(out)
        for n in ins:
            if n in unread:
                unread.remove(n)

    sinks = [g.output for g in gates if g.output in unread]
    if len(sinks) >= n_outputs:
        outputs = sinks[-n_outputs:]
    else:
        extra = [g.output for g in reversed(gates) if g.output not in sinks]
        outputs = sinks + extra[: n_outputs - len(sinks)]
        outputs.sort(key=nets.index)
    return Netlist(name, tuple(inputs), tuple(outputs), (), tuple(gates))
