"""Bundled benchmark circuits.

`c17` is the canonical six-NAND circuit.  The larger entries are seeded
synthetic stand-ins that reproduce the interface dimensions of the
classic ISCAS-85 circuits of the same name (|PI|, |PO|, gate count); see
scripts/make_benchmarks.py for how they are generated.  Any external
`.bench` file can be used with the toolkit instead.
"""

from __future__ import annotations

from importlib import resources

from ..bench import Netlist, parse_bench

NAMES = ("c17", "c432", "c1355", "c1908", "c2670")


def source(name: str) -> str:
    """Raw `.bench` text of a bundled circuit."""
    if name not in NAMES:
        raise KeyError(f"unknown benchmark {name!r}; available: {', '.join(NAMES)}")
    return resources.files(__package__).joinpath(f"{name}.bench").read_text()


def load(name: str) -> Netlist:
    return parse_bench(source(name), name=name)
