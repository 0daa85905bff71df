import random

import pytest

from faultkey.bench import Gate, GateKind, Netlist, parse_bench
from faultkey.synth import random_circuit

TOY_XOR = "INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XOR(a, keyinput0)\n"
TOY_AND = "INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = AND(a, keyinput0)\n"
TOY_NESTED = (
    "INPUT(a)\nINPUT(keyinput0)\nINPUT(keyinput1)\nOUTPUT(y)\n"
    "n1 = XOR(a, keyinput0)\ny = XOR(n1, keyinput1)\n"
)


@pytest.fixture
def toy_xor():
    return parse_bench(TOY_XOR, name="toy_xor")


@pytest.fixture
def toy_and():
    return parse_bench(TOY_AND, name="toy_and")


@pytest.fixture
def toy_nested():
    return parse_bench(TOY_NESTED, name="toy_nested")


@pytest.fixture(scope="session")
def c17():
    from faultkey import benchmarks

    return benchmarks.load("c17")


@pytest.fixture(scope="session")
def c432():
    from faultkey import benchmarks

    return benchmarks.load("c432")


def three_key_demo() -> Netlist:
    """Three-bit locked test circuit with interdependent key propagation.

    Keys 0 and 1 can only reach the first output through each other's
    cones (the AND reconvergence), key 2 drives the second output
    independently; six data inputs, two outputs.
    """
    text = """
INPUT(x0)
INPUT(x1)
INPUT(x2)
INPUT(x3)
INPUT(x4)
INPUT(x5)
INPUT(keyinput0)
INPUT(keyinput1)
INPUT(keyinput2)
OUTPUT(y0)
OUTPUT(y1)
n1 = XOR(x0, keyinput0)
n2 = AND(n1, x1)
n3 = NAND(x2, x3)
n4 = XOR(n3, keyinput1)
n5 = AND(n2, n4)
y0 = OR(n5, x4)
y1 = XOR(x5, keyinput2)
"""
    return parse_bench(text, name="three_key_demo")


def lock_inline(base: Netlist, n_keys: int, rng: random.Random) -> Netlist:
    """Minimal XOR/XNOR key-gate splice used by randomized ATPG tests;
    independent of faultkey.locking."""
    sites = rng.sample([g.output for g in base.gates], min(n_keys, len(base.gates)))
    gates = list(base.gates)
    key_nets = []
    for i, site in enumerate(sites):
        key_nets.append(f"keyinput{i}")
        for gi, g in enumerate(gates):
            if g.output == site:
                gates[gi] = Gate(g.kind, g.inputs, f"ll_{i}")
                kind = GateKind.XOR if rng.random() < 0.5 else GateKind.XNOR
                gates.insert(gi + 1, Gate(kind, (f"ll_{i}", f"keyinput{i}"), site))
                break
    return Netlist(base.name, base.inputs, base.outputs, tuple(key_nets), tuple(gates))


def small_random_circuit(case: int, rng: random.Random) -> Netlist:
    n_pi = rng.randint(2, 6)
    n_gates = rng.randint(3, 16)
    return random_circuit(f"rand{case}", n_pi, rng.randint(1, 3), n_gates, seed=case, target_depth=6)
