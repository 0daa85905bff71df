"""Key-gate insertion transforms.

Three lock families over the same splice primitive:

* random insertion (XOR/XNOR key gates on randomly chosen internal nets),
* an interference chain where each key gate shares output cones with its
  predecessor,
* a single-protected-pattern functionality-stripping lock: one output is
  perturbed on exactly one input cube and restored by a comparator of
  selected inputs against the key registers,

plus their combination.  Key bit 0 inserts XOR and bit 1 XNOR, so the
correct key value is always the gate's identity-restoring input.  Every
lock is audited after insertion: each key bit must be detectable by the
constrained test generator (one polarity or the other); otherwise the
sites are resampled deterministically.  Transforms never rename existing
nets; new nets use the reserved `ll_` and `keyinput` prefixes.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .atpg import ladder_pattern
from .bench import Gate, GateKind, Netlist, _topo_sort
from .logic import X, exhaustive_columns, random_columns, simulate_batch

_MAX_REPAIR_ROUNDS = 40
_AUDIT_BACKTRACK_LIMIT = 4_000


class LockError(ValueError):
    pass


@dataclass(frozen=True)
class KeyVector:
    bits: tuple[int, ...]

    def __post_init__(self):
        if not all(b in (0, 1) for b in self.bits):
            raise ValueError("key bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    def __str__(self) -> str:
        return "".join(str(b) for b in self.bits)

    @classmethod
    def from_str(cls, text: str) -> "KeyVector":
        text = text.strip()
        if not text or any(c not in "01" for c in text):
            raise ValueError(f"key must be a nonempty string over 0/1, got {text!r}")
        return cls(tuple(int(c) for c in text))

    @classmethod
    def random(cls, size: int, seed: int) -> "KeyVector":
        rng = random.Random(seed)
        return cls(tuple(rng.randint(0, 1) for _ in range(size)))


class LockScheme(str, Enum):
    RLL = "rll"
    SLL = "sll"
    SFLL_LITE = "sfll"
    COMBINED = "combined"


@dataclass(frozen=True)
class LockSpec:
    scheme: LockScheme
    key_size: int
    seed: int
    split: tuple[int, int] | None = None  # COMBINED: (sfll bits, rll bits)
    protected_cube: tuple[int, ...] | None = None  # SFLL: over all PIs, X = not compared

    def __post_init__(self):
        if self.key_size < 1:
            raise ValueError("key_size must be >= 1")
        if self.scheme is LockScheme.COMBINED:
            if self.split is None or sum(self.split) != self.key_size:
                raise ValueError("COMBINED requires split summing to key_size")


# ---------------------------------------------------------------------------
# splice primitive

def _next_key_suffix(netlist: Netlist) -> int:
    if not netlist.key_inputs:
        return 0
    return max(int(n[len("keyinput"):]) for n in netlist.key_inputs) + 1


def _fresh(name: str, used: set[str]) -> str:
    while name in used:
        name += "_"
    used.add(name)
    return name


def _insert_key_gate(gates: list[Gate], site: str, bit: int, suffix: int, used: set[str]) -> str:
    """Splice one XOR/XNOR key gate onto `site`; returns the key net name.

    The site keeps its name (and output status); a BUF driver is absorbed
    into the key gate instead of splicing a new net.
    """
    key_net = _fresh(f"keyinput{suffix}", used)
    kind = GateKind.XOR if bit == 0 else GateKind.XNOR
    gi = next(i for i, g in enumerate(gates) if g.output == site)
    g = gates[gi]
    if g.kind is GateKind.BUF:
        gates[gi] = Gate(kind, (g.inputs[0], key_net), site)
    else:
        pre = _fresh(f"ll_{suffix}", used)
        gates[gi] = Gate(g.kind, g.inputs, pre)
        gates.insert(gi + 1, Gate(kind, (pre, key_net), site))
    return key_net


def _audit_unresolved(locked: Netlist, bits=None) -> frozenset[int]:
    """Key bits (all, or just `bits`) the constrained ATPG ladder misses."""
    if bits is None:
        bits = range(locked.key_size)
    return frozenset(
        i for i in bits
        if ladder_pattern(locked, i, backtrack_limit=_AUDIT_BACKTRACK_LIMIT) is None
    )


def _build_with_sites(netlist: Netlist, key: KeyVector, sites: Sequence[str], start: int) -> Netlist:
    gates = list(netlist.gates)
    used = set(netlist.nets)
    key_nets = list(netlist.key_inputs)
    for j, (site, bit) in enumerate(zip(sites, key.bits)):
        key_nets.append(_insert_key_gate(gates, site, bit, start + j, used))
    return Netlist(netlist.name, netlist.inputs, netlist.outputs, tuple(key_nets), tuple(gates))


def _repair_sites(
    netlist: Netlist,
    key: KeyVector,
    sites: list[str],
    start: int,
    replacement,
) -> Netlist:
    """Audit-and-repair loop: rebuild the lock, move the sites of any key
    bit the ATPG ladder cannot detect, until every bit is detectable.

    After the first full audit only the moved bits are re-checked; a full
    audit confirms the final assignment (moving a site can break another
    bit).  `replacement(bit_index, tried_sites, locked)` proposes the next
    site for a failed bit; the loop is deterministic for a fixed seed.
    """
    tried: dict[int, set[str]] = {i: {s} for i, s in enumerate(sites)}
    locked = _build_with_sites(netlist, key, sites, start)
    bad = _audit_unresolved(locked)
    for _ in range(_MAX_REPAIR_ROUNDS):
        if not bad:
            return locked
        foreign = sorted(i for i in bad if i < start)
        if foreign:
            # pre-existing key bits broken by this insertion; the caller
            # may retry with a different seed
            raise LockError(f"insertion broke key bits {foreign} on {netlist.name!r}")
        moved = sorted(i - start for i in bad)
        for i in moved:
            site = replacement(i, tried[i], locked)
            if site is None:
                raise LockError(f"no testable site left for key bit {i} on {netlist.name!r}")
            tried[i].add(site)
            sites[i] = site
        locked = _build_with_sites(netlist, key, sites, start)
        bad = _audit_unresolved(locked, [start + i for i in moved])
        if not bad:
            bad = _audit_unresolved(locked)
    raise LockError(f"site repair did not converge for |K|={len(key)} on {netlist.name!r}")


# ---------------------------------------------------------------------------
# random logic locking

def lock_rll(netlist: Netlist, key: KeyVector, seed: int) -> Netlist:
    """Insert one XOR/XNOR key gate per key bit on random internal nets."""
    stacked = _key_fed_outputs(netlist.gates)  # only nonempty when re-locking
    sites_all = [g.output for g in netlist.gates if g.output not in stacked]
    if len(key) < 1:
        raise LockError("key must have at least one bit")
    if len(key) > len(sites_all):
        raise LockError(f"key of {len(key)} bits exceeds the {len(sites_all)} available insertion sites")
    rng = random.Random(seed)
    order = rng.sample(sites_all, len(sites_all))
    sites = order[: len(key)]
    start = _next_key_suffix(netlist)

    def replacement(i: int, tried: set[str], locked: Netlist) -> str | None:
        in_use = set(sites)
        for cand in order:
            if cand not in tried and cand not in in_use:
                return cand
        return None

    return _repair_sites(netlist, key, sites, start, replacement)


# ---------------------------------------------------------------------------
# interference chains

def lock_sll(netlist: Netlist, key: KeyVector, seed: int) -> Netlist:
    """Chained insertion: each key gate prefers sites in the transitive
    fanout of the previous key gate, else sites whose output cones
    intersect the previous gate's cone, so consecutive key bits interfere.
    """
    if len(key) < 1:
        raise LockError("key must have at least one bit")
    # no static site bound: chaining may stack key gates on the same path
    rng = random.Random(seed)
    start = _next_key_suffix(netlist)
    gates = list(netlist.gates)
    used = set(netlist.nets)
    sites: list[str] = []
    prev_site: str | None = None
    for j, bit in enumerate(key.bits):
        site = _chain_site(gates, netlist.outputs, prev_site, rng, exclude=())
        _insert_key_gate(gates, site, bit, start + j, used)
        sites.append(site)
        prev_site = site

    def replacement(i: int, tried: set[str], locked: Netlist) -> str | None:
        prev = sites[i - 1] if i > 0 else None
        return _chain_site(list(locked.gates), locked.outputs, prev, rng, exclude=tried)

    return _repair_sites(netlist, key, sites, start, replacement)


def _key_fed_outputs(gates: Sequence[Gate]) -> set[str]:
    """Nets driven by key gates: stacking a new key gate directly on one
    would make the pair XOR-parity degenerate (flipping both bits of a
    wrong key cancels out), so they are avoided while alternatives exist."""
    return {g.output for g in gates if any(n.startswith("keyinput") for n in g.inputs)}


def _chain_site(
    gates: list[Gate],
    outputs: Sequence[str],
    prev_site: str | None,
    rng: random.Random,
    exclude,
) -> str | None:
    """Pick an insertion site interfering with `prev_site` when possible."""
    stacked = _key_fed_outputs(gates)
    candidates = [
        g.output
        for g in gates
        if not g.output.startswith("ll_")
        and g.output not in exclude
        and g.output not in stacked
    ]
    if not candidates:
        # tiny circuits: allow series stacking rather than failing
        candidates = [g.output for g in gates if not g.output.startswith("ll_") and g.output not in exclude]
    if not candidates:
        return None
    if prev_site is None:
        return rng.choice(candidates)
    tfo = _fanout_nets(gates, prev_site)
    cones = _po_cones(gates, outputs)
    prev_cone = cones.get(prev_site, 0)
    pool = [c for c in candidates if c in tfo]
    if not pool:
        pool = [c for c in candidates if cones.get(c, 0) & prev_cone]
    if not pool:
        pool = candidates
    return rng.choice(pool)


def _fanout_nets(gates: Sequence[Gate], root: str) -> set[str]:
    readers: dict[str, list[str]] = {}
    for g in gates:
        for n in g.inputs:
            readers.setdefault(n, []).append(g.output)
    seen: set[str] = set()
    stack = [root]
    while stack:
        for out in readers.get(stack.pop(), ()):
            if out not in seen:
                seen.add(out)
                stack.append(out)
    return seen


def _po_cones(gates: Sequence[Gate], outputs: Sequence[str]) -> dict[str, int]:
    """Per net: bitmask of the primary outputs it reaches."""
    po_bit: dict[str, int] = {}
    for j, po in enumerate(outputs):
        po_bit[po] = po_bit.get(po, 0) | (1 << j)
    readers: dict[str, list[str]] = {}
    for g in gates:
        for n in g.inputs:
            readers.setdefault(n, []).append(g.output)
    order = _topo_sort((), tuple(gates))
    if order is None:
        raise LockError("cyclic gate list")
    cone: dict[str, int] = {}

    def net_cone(n: str) -> int:
        acc = po_bit.get(n, 0)
        for out in readers.get(n, ()):
            acc |= cone.get(out, 0)
        return acc

    for g in reversed(order):
        cone[g.output] = net_cone(g.output)
    for n in readers:
        if n not in cone:
            cone[n] = net_cone(n)
    for po, bit in po_bit.items():
        cone.setdefault(po, bit)
    return cone


def key_gate_sites(locked: Netlist) -> dict[int, str]:
    """Key index -> the net driven by that bit's key gate (or comparator)."""
    sites = {}
    for idx, key_net in enumerate(locked.key_inputs):
        for g in locked.gates:
            if key_net in g.inputs:
                sites[idx] = g.output
                break
    return sites


def interference_metric(locked: Netlist) -> float:
    """Fraction of consecutive key-bit pairs whose output cones intersect."""
    if locked.key_size < 2:
        return 1.0
    cones = _po_cones(locked.gates, locked.outputs)
    sites = key_gate_sites(locked)
    hits = 0
    pairs = locked.key_size - 1
    for i in range(pairs):
        a, b = sites.get(i), sites.get(i + 1)
        if a is not None and b is not None and cones.get(a, 0) & cones.get(b, 0):
            hits += 1
    return hits / pairs


# ---------------------------------------------------------------------------
# single-protected-pattern functionality stripping

def derive_cube(netlist: Netlist, key: KeyVector, seed: int) -> tuple[int, ...]:
    """Seeded protected cube consistent with `key`: |key| compared inputs,
    cube values equal to the key bits in input order."""
    rng = random.Random(seed)
    compared = sorted(rng.sample(range(netlist.num_inputs), len(key)))
    cube = [X] * netlist.num_inputs
    for j, pi_idx in enumerate(compared):
        cube[pi_idx] = key.bits[j]
    return tuple(cube)


def lock_sfll_lite(
    netlist: Netlist,
    key: KeyVector,
    protected_cube: Sequence[int],
    seed: int,
) -> Netlist:
    """Perturb one output on the protected input cube and restore it with a
    comparator of the compared inputs against the key registers.

    The output becomes original ^ (x matches cube) ^ (x matches key), so the
    correct key (equal to the cube on compared inputs) restores the function
    everywhere, and any wrong key corrupts the protected pattern and its
    restore collision.
    """
    if len(key) > netlist.num_inputs:
        raise LockError(f"key of {len(key)} bits is wider than |PI|={netlist.num_inputs}")
    if len(protected_cube) != netlist.num_inputs:
        raise LockError("protected cube must cover every primary input")
    compared = [i for i, v in enumerate(protected_cube) if v != X]
    if len(compared) != len(key):
        raise LockError(f"cube compares {len(compared)} inputs but key has {len(key)} bits")
    if tuple(protected_cube[i] for i in compared) != key.bits:
        raise LockError("key must equal the protected cube on the compared inputs")

    rng = random.Random(seed)
    gates = list(netlist.gates)
    used = set(netlist.nets)
    start = _next_key_suffix(netlist)
    key_nets = [_fresh(f"keyinput{start + j}", used) for j in range(len(key))]

    driver_outputs = {g.output for g in gates}
    targets = [po for po in netlist.outputs if po in driver_outputs]
    if not targets:
        raise LockError("no gate-driven primary output to protect")
    target = targets[rng.randrange(len(targets))]

    lits = []
    for j, pi_idx in enumerate(compared):
        pi_net = netlist.inputs[pi_idx]
        if protected_cube[pi_idx] == 1:
            lits.append(pi_net)
        else:
            lit = _fresh(f"ll_p{start + j}", used)
            gates.append(Gate(GateKind.NOT, (pi_net,), lit))
            lits.append(lit)
    if len(lits) == 1:
        perturb = lits[0]
    else:
        perturb = _fresh("ll_perturb", used)
        gates.append(Gate(GateKind.AND, tuple(lits), perturb))

    cmps = []
    for j, pi_idx in enumerate(compared):
        cmp_net = _fresh(f"ll_r{start + j}", used)
        gates.append(Gate(GateKind.XNOR, (netlist.inputs[pi_idx], key_nets[j]), cmp_net))
        cmps.append(cmp_net)
    if len(cmps) == 1:
        restore = cmps[0]
    else:
        restore = _fresh("ll_restore", used)
        gates.append(Gate(GateKind.AND, tuple(cmps), restore))

    gi = next(i for i, g in enumerate(gates) if g.output == target)
    g = gates[gi]
    pre = _fresh("ll_strip", used)
    gates[gi] = Gate(g.kind, g.inputs, pre)
    flips = _fresh("ll_flip", used)
    gates.append(Gate(GateKind.XOR, (pre, perturb), flips))
    gates.append(Gate(GateKind.XOR, (flips, restore), target))

    locked = Netlist(
        netlist.name,
        netlist.inputs,
        netlist.outputs,
        netlist.key_inputs + tuple(key_nets),
        tuple(gates),
    )
    if _audit_unresolved(locked):
        raise LockError(f"comparator bits untestable on {netlist.name!r}")  # not expected
    return locked


def lock_combined(netlist: Netlist, spec: LockSpec, key: KeyVector) -> Netlist:
    """Functionality stripping first, then random insertion; key inputs
    concatenated with the stripped-pattern bits in front."""
    if spec.scheme is not LockScheme.COMBINED:
        raise LockError(f"expected a COMBINED spec, got {spec.scheme}")
    if len(key) != spec.key_size:
        raise LockError(f"key has {len(key)} bits, spec wants {spec.key_size}")
    n_sfll, n_rll = spec.split
    if n_rll == 0:
        cube = spec.protected_cube or derive_cube(netlist, key, spec.seed)
        return lock_sfll_lite(netlist, key, cube, spec.seed)
    if n_sfll == 0:
        return lock_rll(netlist, key, spec.seed)
    sfll_key = KeyVector(key.bits[:n_sfll])
    cube = spec.protected_cube or derive_cube(netlist, sfll_key, spec.seed)
    current = lock_sfll_lite(netlist, sfll_key, cube, spec.seed)
    rll_key = KeyVector(key.bits[n_sfll:])
    last: LockError | None = None
    for attempt in range(4):  # rare: random insertion masking a comparator bit
        try:
            return lock_rll(current, rll_key, spec.seed + 1 + attempt)
        except LockError as e:
            last = e
    raise last


def apply_lock(netlist: Netlist, spec: LockSpec, key: KeyVector) -> Netlist:
    """Dispatch a LockSpec to the matching transform."""
    if len(key) != spec.key_size:
        raise LockError(f"key has {len(key)} bits, spec wants {spec.key_size}")
    if spec.scheme is LockScheme.RLL:
        return lock_rll(netlist, key, spec.seed)
    if spec.scheme is LockScheme.SLL:
        return lock_sll(netlist, key, spec.seed)
    if spec.scheme is LockScheme.SFLL_LITE:
        cube = spec.protected_cube or derive_cube(netlist, key, spec.seed)
        return lock_sfll_lite(netlist, key, cube, spec.seed)
    return lock_combined(netlist, spec, key)


# ---------------------------------------------------------------------------
# equivalence checks

def check_equivalence(
    original: Netlist,
    locked: Netlist,
    key: KeyVector,
    vectors: int = 10_000,
    seed: int = 0x5EED,
) -> bool:
    """Locked-under-key vs original: exhaustive up to 16 data inputs,
    sampled above."""
    if original.key_size:
        raise ValueError("reference netlist must be unlocked")
    if original.inputs != locked.inputs or original.outputs != locked.outputs:
        raise ValueError("locked netlist must preserve input/output interface")
    if original.num_inputs <= 16:
        cols, width = exhaustive_columns(original.num_inputs)
    else:
        cols = random_columns(original.num_inputs, vectors, random.Random(seed))
        width = vectors
    mask = (1 << width) - 1
    key_cols = [mask if b else 0 for b in key.bits]
    ref = simulate_batch(original, cols, [], width)
    got = simulate_batch(locked, cols, key_cols, width)
    return ref == got


def wrong_key_differs(
    original: Netlist,
    locked: Netlist,
    wrong_key: KeyVector,
    vectors: int = 10_000,
    seed: int = 0x5EED,
    directed: Sequence[Sequence[int]] = (),
) -> bool:
    """True if the wrong key corrupts at least one vector.  `directed`
    vectors (e.g. protected-cube completions) are checked first."""
    for v in directed:
        ref = simulate_batch(original, list(v), [], 1)
        got = simulate_batch(locked, list(v), list(wrong_key.bits), 1)
        if ref != got:
            return True
    if original.num_inputs <= 16:
        cols, width = exhaustive_columns(original.num_inputs)
        widths = [width]
        all_cols = [cols]
    else:
        rng = random.Random(seed)
        widths = [256, vectors]
        all_cols = [random_columns(original.num_inputs, w, rng) for w in widths]
    for cols, width in zip(all_cols, widths):
        mask = (1 << width) - 1
        key_cols = [mask if b else 0 for b in wrong_key.bits]
        ref = simulate_batch(original, cols, [], width)
        got = simulate_batch(locked, cols, key_cols, width)
        if ref != got:
            return True
    return False
