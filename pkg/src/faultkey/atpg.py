"""Constrained test generation for stuck-at faults on key lines.

The search is a five-valued D-algorithm: the fault site (always a key
input here) carries D or D' and the engine interleaves implication,
error propagation through the D-frontier, and justification of the
J-frontier, backtracking over every alternative.  Constraints pin the
remaining key lines to constants, which is what turns plain stuck-at
test generation into the one-key-bit sensitization needed by the
differential attack.

The search is complete: it reports a fault untestable only after
exhausting the alternatives (subject to the backtrack limit, whose
violation raises instead of reporting untestable).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .bench import Netlist
from .logic import (
    D,
    D_BAR,
    ONE,
    X,
    ZERO,
    Compiled,
    FaultSpec,
    InjectionMap,
    K_AND,
    K_BUF,
    K_NAND,
    K_NOR,
    K_NOT,
    K_OR,
    K_XNOR,
    K_XOR,
    Polarity,
    bits_from_str,
    bits_to_str,
    check_injection,
    compiled,
    eval_gate5,
    exhaustive_columns,
    full_injection,
    simulate5,
    simulate_batch,
)

DEFAULT_BACKTRACK_LIMIT = 1_000_000

# verify_pattern falls back to exhaustive X-completion up to this many X's
_COMPLETION_LIMIT = 16


class BacktrackLimitExceeded(RuntimeError):
    """Search aborted; distinct from a proven untestable verdict."""

    def __init__(self, fault: FaultSpec, limit: int):
        self.fault = fault
        self.limit = limit
        super().__init__(f"backtrack limit {limit} exceeded for {fault.polarity.value} at key {fault.key_index}")


@dataclass(frozen=True)
class Pattern:
    """One constrained test pattern targeting a single key bit.

    `pi` covers the data primary inputs over {0,1,X}; `detecting_pos` are
    the output indices where the five-valued simulation shows D or D'.
    `constraints` is the key-line pinning the pattern was generated under;
    None means the default: every other key line at the polarity's stuck
    value.
    """

    key_index: int
    polarity: Polarity
    pi: tuple[int, ...]
    detecting_pos: frozenset[int]
    constraints: Mapping[int, int] | None = None

    def constraint_map(self, key_size: int) -> dict[int, int]:
        if self.constraints is not None:
            return dict(self.constraints)
        return full_injection(key_size, self.polarity.stuck_value, skip=self.key_index)


@dataclass
class PatternSet:
    """At most one pattern per key bit, plus the bits nothing detects."""

    netlist_name: str
    num_inputs: int
    num_outputs: int
    key_size: int
    patterns: list[Pattern] = field(default_factory=list)
    unresolved: frozenset[int] = frozenset()

    def by_index(self) -> dict[int, Pattern]:
        return {p.key_index: p for p in self.patterns}


# ---------------------------------------------------------------------------
# the search engine


class _Frame:
    """One decision level: the untried alternative assignment cubes.

    D-drive alternatives must stay open for re-selection deeper in the
    tree: a frontier gate's expansion cube depends on which of its side
    inputs are already valued, so skipping a gate here cannot exclude it
    later (multi-path sensitization needs the same gate under a different
    context).  The search is therefore worst-case exponential, bounded by
    the backtrack limit.
    """

    __slots__ = ("cubes", "idx", "val_mark", "comp_mark")

    def __init__(self, cubes, val_mark, comp_mark):
        self.cubes = cubes
        self.idx = 0
        self.val_mark = val_mark
        self.comp_mark = comp_mark


class _Search:
    def __init__(self, comp: Compiled, fault: FaultSpec, constraints: InjectionMap, limit: int):
        self.comp = comp
        self.fault = fault
        self.limit = limit
        n = comp.n_nets
        self.val = [X] * n
        self.computed = [X] * len(comp.ops)  # last forward-implied value per op
        self.dcount = [0] * len(comp.ops)  # D/D' inputs per op
        self.val_trail: list[int] = []  # nets to reset to X
        self.comp_trail: list[tuple[int, int]] = []  # (op, previous computed)
        self.backtracks = 0
        self.pending: list[int] = []

        for idx, value in sorted(constraints.items()):
            self.val[comp.keys[idx]] = value
            # constants are roots, not trail entries: they never backtrack
        site = comp.keys[fault.key_index]
        self.val[site] = fault.polarity.error_value
        for oi in comp.readers[site]:
            self.dcount[oi] += 1
        self.pending = list(range(len(comp.ops)))  # initial full pass

    # -- assignment machinery

    def _assign(self, net: int, value: int) -> bool:
        cur = self.val[net]
        if cur != X:
            return cur == value
        self.val[net] = value
        self.val_trail.append(net)
        if value == D or value == D_BAR:
            for oi in self.comp.readers[net]:
                self.dcount[oi] += 1
        self.pending.extend(self.comp.readers[net])
        drv = self.comp.driver_op[net]
        if drv >= 0:
            self.pending.append(drv)
        return True

    def _undo_to(self, val_mark: int, comp_mark: int) -> None:
        while len(self.val_trail) > val_mark:
            net = self.val_trail.pop()
            v = self.val[net]
            if v == D or v == D_BAR:
                for oi in self.comp.readers[net]:
                    self.dcount[oi] -= 1
            self.val[net] = X
        while len(self.comp_trail) > comp_mark:
            oi, prev = self.comp_trail.pop()
            self.computed[oi] = prev
        self.pending.clear()

    # -- implication

    def _propagate(self) -> bool:
        """Forward/backward implication to a fixpoint; False on conflict."""
        comp = self.comp
        ops = comp.ops
        val = self.val
        pending = self.pending
        while pending:
            oi = pending.pop()
            kind, out, ins = ops[oi]
            new = eval_gate5(kind, [val[i] for i in ins])
            if self.computed[oi] != new:
                self.comp_trail.append((oi, self.computed[oi]))
                self.computed[oi] = new
            cur = val[out]
            if new != X:
                if cur == X:
                    if not self._assign(out, new):
                        return False
                elif cur != new:
                    return False
            elif cur == ZERO or cur == ONE:
                if not self._imply_backward(kind, cur, ins):
                    return False
        return True

    def _imply_backward(self, kind: int, out_val: int, ins: tuple[int, ...]) -> bool:
        """Assign gate inputs that are forced by a 0/1 output value."""
        val = self.val
        if kind == K_BUF:
            return self._assign(ins[0], out_val)
        if kind == K_NOT:
            return self._assign(ins[0], 1 - out_val)
        if kind == K_AND or kind == K_NAND:
            target = out_val if kind == K_AND else 1 - out_val
            if target == ONE:
                for i in ins:
                    v = val[i]
                    if v == D or v == D_BAR:
                        return False  # a fault value can never satisfy all-ones
                    if v == X and not self._assign(i, ONE):
                        return False
                return True
            unknown = -1
            for i in ins:
                v = val[i]
                if v == ZERO:
                    return True  # already satisfied
                if v != ONE:
                    if v != X or unknown >= 0:
                        return True  # more than one way left; decision, not implication
                    unknown = i
            if unknown < 0:
                return False  # all inputs 1 but output must be 0
            return self._assign(unknown, ZERO)
        if kind == K_OR or kind == K_NOR:
            target = out_val if kind == K_OR else 1 - out_val
            if target == ZERO:
                for i in ins:
                    v = val[i]
                    if v == D or v == D_BAR:
                        return False
                    if v == X and not self._assign(i, ZERO):
                        return False
                return True
            unknown = -1
            for i in ins:
                v = val[i]
                if v == ONE:
                    return True
                if v != ZERO:
                    if v != X or unknown >= 0:
                        return True
                    unknown = i
            if unknown < 0:
                return False
            return self._assign(unknown, ONE)
        # XOR/XNOR, arity 2
        target = out_val if kind == K_XOR else 1 - out_val
        a, b = ins
        va, vb = val[a], val[b]
        if va == X and vb in (ZERO, ONE):
            return self._assign(a, target ^ vb)
        if vb == X and va in (ZERO, ONE):
            return self._assign(b, target ^ va)
        return True  # both X, or a fault value involved: handled by decisions

    # -- frontiers and decisions

    def _error_at_po(self) -> bool:
        val = self.val
        for p in self.comp.pos:
            v = val[p]
            if v == D or v == D_BAR:
                return True
        return False

    def _has_x_path(self, net: int) -> bool:
        """True if the error on `net` can still reach an output via X nets."""
        comp = self.comp
        val = self.val
        if net in comp.po_set:
            return True
        seen = {net}
        stack = [net]
        while stack:
            n = stack.pop()
            for oi in comp.readers[n]:
                out = comp.out_of_op[oi]
                if out in seen or val[out] != X:
                    continue
                if out in comp.po_set:
                    return True
                seen.add(out)
                stack.append(out)
        return False

    def _decision_cubes(self) -> list[list[tuple[int, int]]]:
        """Alternative assignment cubes for the next decision."""
        comp = self.comp
        val = self.val
        if not self._error_at_po():
            # D-drive: advance the error through some unblocked frontier gate
            frontier = [
                oi
                for oi, (_, out, _) in enumerate(comp.ops)
                if val[out] == X and self.dcount[oi] > 0
            ]
            frontier.sort(key=lambda oi: (comp.dist_to_po[comp.out_of_op[oi]], oi))
            cubes: list[list[tuple[int, int]]] = []
            for oi in frontier:
                kind, out, ins = comp.ops[oi]
                if not self._has_x_path(out):
                    continue
                sides = [i for i in ins if val[i] == X]
                if not sides:
                    continue
                if kind == K_XOR or kind == K_XNOR:
                    s = sides[0]
                    cubes += [[(s, ZERO)], [(s, ONE)]]
                else:
                    nc = ONE if kind in (K_AND, K_NAND) else ZERO
                    cubes.append([(i, nc) for i in sides])
            return cubes
        # justification: pick the deepest unjustified gate and enumerate
        jfront = [
            oi
            for oi, (_, out, _) in enumerate(comp.ops)
            if self.computed[oi] == X and (val[out] == ZERO or val[out] == ONE)
        ]
        if not jfront:
            return []
        oi = jfront[-1]
        kind, out, ins = comp.ops[oi]
        out_val = val[out]
        sides = [i for i in ins if val[i] == X]
        if kind == K_AND or kind == K_NAND:
            target = out_val if kind == K_AND else 1 - out_val
            if target == ONE:
                return [[(i, ONE) for i in sides]]
            return [[(i, ZERO)] for i in sides]
        if kind == K_OR or kind == K_NOR:
            target = out_val if kind == K_OR else 1 - out_val
            if target == ZERO:
                return [[(i, ZERO) for i in sides]]
            return [[(i, ONE)] for i in sides]
        if kind == K_XOR or kind == K_XNOR:
            target = out_val if kind == K_XOR else 1 - out_val
            if len(sides) == 2:
                a, b = sides
                return [[(a, ZERO), (b, target)], [(a, ONE), (b, 1 - target)]]
            if len(sides) == 1:
                other = next(val[i] for i in ins if val[i] != X)
                if other in (ZERO, ONE):
                    return [[(sides[0], target ^ other)]]
                return []  # needs a fault value on the other input; only a
                # different drive order can realize that
        return []  # NOT/BUF outputs are always implied backward

    def _apply(self, cube: list[tuple[int, int]]) -> bool:
        for net, value in cube:
            if not self._assign(net, value):
                return False
        return True

    def _unjustified_left(self) -> bool:
        val = self.val
        out_of_op = self.comp.out_of_op
        return any(
            c == X and (val[out_of_op[oi]] == ZERO or val[out_of_op[oi]] == ONE)
            for oi, c in enumerate(self.computed)
        )

    def run(self) -> tuple[tuple[int, ...], frozenset[int]] | None:
        """Run the search; (pi, detecting POs) on success, None if untestable."""
        frames: list[_Frame] = []
        ok = self._propagate()
        while True:
            if ok:
                cubes = self._decision_cubes()
                if cubes:
                    frames.append(_Frame(cubes, len(self.val_trail), len(self.comp_trail)))
                    ok = self._apply(cubes[0]) and self._propagate()
                    continue
                if self._error_at_po() and not self._unjustified_left():
                    return self._extract()
                ok = False  # dead branch: error stuck or requirement unjustifiable
            while frames:
                f = frames[-1]
                self._undo_to(f.val_mark, f.comp_mark)
                self.backtracks += 1
                if self.backtracks > self.limit:
                    raise BacktrackLimitExceeded(self.fault, self.limit)
                f.idx += 1
                if f.idx < len(f.cubes):
                    ok = self._apply(f.cubes[f.idx]) and self._propagate()
                    break
                frames.pop()
            else:
                return None

    def _extract(self) -> tuple[int, frozenset[int]]:
        comp = self.comp
        val = self.val
        pi = tuple(val[n] if val[n] in (ZERO, ONE) else X for n in comp.pi)
        detecting = frozenset(
            j for j, p in enumerate(comp.pos) if val[p] == D or val[p] == D_BAR
        )
        return pi, detecting


def d_algorithm(
    netlist: Netlist,
    fault: FaultSpec,
    constraints: InjectionMap,
    backtrack_limit: int = DEFAULT_BACKTRACK_LIMIT,
) -> Pattern | None:
    """Find a pattern detecting `fault` under the key-line constraints.

    Returns None when the fault is proven untestable (search space
    exhausted); raises BacktrackLimitExceeded when the limit cuts the
    search short.  Unneeded primary inputs stay X in the result.
    """
    comp = compiled(netlist)
    check_injection(constraints, len(comp.keys))
    if not 0 <= fault.key_index < len(comp.keys):
        raise IndexError(f"fault key index {fault.key_index} out of range for |K|={len(comp.keys)}")
    if fault.key_index in constraints:
        raise ValueError(f"fault site key {fault.key_index} must not be constrained")
    search = _Search(comp, fault, constraints, backtrack_limit)
    result = search.run()
    if result is None:
        return None
    pi, detecting = result
    default = full_injection(len(comp.keys), fault.polarity.stuck_value, skip=fault.key_index)
    stored = None if dict(constraints) == default else dict(constraints)
    return Pattern(fault.key_index, fault.polarity, pi, detecting, stored)


_LADDER_FIRST_LIMIT = 10_000


def ladder_pattern(
    locked: Netlist,
    key_index: int,
    polarity: Polarity = Polarity.SA1,
    backtrack_limit: int = DEFAULT_BACKTRACK_LIMIT,
) -> Pattern | None:
    """Pattern for one key bit through the polarity ladder: the requested
    polarity with the other key lines at its stuck value, then the
    opposite polarity.

    Both rungs run with a small backtrack budget first; only rungs that hit
    that budget are retried at the full limit (a proven untestable verdict
    at any budget is final).  Every returned pattern passed verify_pattern.
    """
    key_size = len(locked.key_inputs)
    aborted: list[Polarity] = []
    first = min(_LADDER_FIRST_LIMIT, backtrack_limit)
    for pol in (polarity, polarity.opposite):
        constraints = full_injection(key_size, pol.stuck_value, skip=key_index)
        try:
            found = d_algorithm(locked, FaultSpec(key_index, pol), constraints, first)
        except BacktrackLimitExceeded:
            aborted.append(pol)
            continue
        if found is not None and verify_pattern(locked, found):
            return found
    for pol in aborted:
        if backtrack_limit <= first:
            break
        constraints = full_injection(key_size, pol.stuck_value, skip=key_index)
        try:
            found = d_algorithm(locked, FaultSpec(key_index, pol), constraints, backtrack_limit)
        except BacktrackLimitExceeded:
            continue
        if found is not None and verify_pattern(locked, found):
            return found
    return None


def generate_pattern_set(
    locked: Netlist,
    polarity: Polarity = Polarity.SA1,
    backtrack_limit: int = DEFAULT_BACKTRACK_LIMIT,
) -> PatternSet:
    """One pattern per key bit via the polarity ladder; bits failing both
    rungs land in `unresolved` and are never guessed.
    """
    key_size = len(locked.key_inputs)
    if key_size < 1:
        raise ValueError(f"netlist {locked.name!r} has no key inputs")
    patterns: list[Pattern] = []
    unresolved: set[int] = set()
    for i in range(key_size):
        found = ladder_pattern(locked, i, polarity, backtrack_limit)
        if found is None:
            unresolved.add(i)
        else:
            patterns.append(found)
    return PatternSet(
        locked.name,
        locked.num_inputs,
        locked.num_outputs,
        key_size,
        patterns,
        frozenset(unresolved),
    )


def verify_pattern(locked: Netlist, pattern: Pattern) -> bool:
    """Check that the pattern distinguishes its key bit for every
    X-completion: the two injected simulations (target bit 0 vs 1, other
    key lines per the pattern's constraints) must differ, complementarily,
    at every detecting output.

    The five-valued certificate decides most patterns outright; otherwise
    the X positions are enumerated exhaustively when there are at most 16,
    and the pattern is rejected pessimistically beyond that.
    """
    comp = compiled(locked)
    key_size = len(comp.keys)
    if not pattern.detecting_pos:
        return False
    if len(pattern.pi) != len(comp.pi):
        return False
    if not all(0 <= j < len(comp.pos) for j in pattern.detecting_pos):
        return False
    constraints = pattern.constraint_map(key_size)
    v5 = simulate5(locked, pattern.pi, FaultSpec(pattern.key_index, pattern.polarity), constraints)
    if all(v5[j] in (D, D_BAR) for j in pattern.detecting_pos):
        return True

    x_positions = [i for i, b in enumerate(pattern.pi) if b == X]
    if len(x_positions) > _COMPLETION_LIMIT:
        return False
    width = 1 << len(x_positions)
    mask = (1 << width) - 1
    x_cols, _ = exhaustive_columns(len(x_positions)) if x_positions else ([], None)
    pi_cols = []
    next_x = 0
    for b in pattern.pi:
        if b == X:
            pi_cols.append(x_cols[next_x])
            next_x += 1
        else:
            pi_cols.append(mask if b == ONE else 0)
    outs = []
    for bit_value in (0, 1):
        key_cols = []
        for k in range(key_size):
            if k == pattern.key_index:
                v = bit_value
            else:
                v = constraints.get(k)
                if v is None:
                    return False  # unconstrained key line: certificate required
            key_cols.append(mask if v else 0)
        outs.append(simulate_batch(locked, pi_cols, key_cols, width))
    return all(outs[0][j] ^ outs[1][j] == mask for j in pattern.detecting_pos)


def load_patterns(path) -> PatternSet:
    from pathlib import Path

    return parse_patterns(Path(path).read_text())


# ---------------------------------------------------------------------------
# pattern file format

def render_patterns(pset: PatternSet) -> str:
    """Text form: header `|PI| |PO| |K| <name>`, then one `P` line per pattern."""
    lines = [f"{pset.num_inputs} {pset.num_outputs} {pset.key_size} {pset.netlist_name}"]
    for p in sorted(pset.patterns, key=lambda p: p.key_index):
        pos = ",".join(str(j) for j in sorted(p.detecting_pos))
        lines.append(f"P {p.key_index} {p.polarity.value} {bits_to_str(p.pi)} {pos}")
    return "\n".join(lines) + "\n"


def parse_patterns(text: str) -> PatternSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty pattern file")
    header = lines[0].split()
    if len(header) != 4:
        raise ValueError(f"malformed pattern header {lines[0]!r}")
    n_pi, n_po, key_size = int(header[0]), int(header[1]), int(header[2])
    name = header[3]
    patterns = []
    seen = set()
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 5 or parts[0] != "P":
            raise ValueError(f"malformed pattern line {ln!r}")
        idx = int(parts[1])
        polarity = Polarity(parts[2])
        pi = bits_from_str(parts[3])
        if len(pi) != n_pi:
            raise ValueError(f"pattern for key {idx} has {len(pi)} PI values, expected {n_pi}")
        detecting = frozenset(int(t) for t in parts[4].split(","))
        if idx in seen or not 0 <= idx < key_size:
            raise ValueError(f"bad or repeated key index {idx}")
        if not all(0 <= j < n_po for j in detecting):
            raise ValueError(f"detecting output out of range in {ln!r}")
        seen.add(idx)
        patterns.append(Pattern(idx, polarity, pi, detecting))
    unresolved = frozenset(range(key_size)) - seen
    return PatternSet(name, n_pi, n_po, key_size, patterns, unresolved)
