#!/usr/bin/env python3
"""Regenerate the bundled benchmark circuits.

c17 is written verbatim (the canonical six-NAND circuit).  The larger
circuits are seeded stand-ins matching the interface dimensions of the
classic ISCAS-85 netlists of the same name: |PI|, |PO|, gate count, and a
comparable logic depth.  Output is deterministic; re-running this script
must leave the committed files unchanged.
"""

from __future__ import annotations

import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from faultkey.bench import emit_bench  # noqa: E402
from faultkey.synth import random_circuit  # noqa: E402

DEST = pathlib.Path(__file__).resolve().parents[1] / "src" / "faultkey" / "benchmarks"

C17 = """\
INPUT(1)
INPUT(2)
INPUT(3)
INPUT(6)
INPUT(7)
OUTPUT(22)
OUTPUT(23)
10 = NAND(1, 3)
11 = NAND(3, 6)
16 = NAND(2, 11)
19 = NAND(11, 7)
22 = NAND(10, 16)
23 = NAND(16, 19)
"""

# name -> (|PI|, |PO|, gates, depth target, seed)
STAND_INS = {
    "c432": (36, 7, 160, 18, 43201),
    "c1355": (41, 32, 546, 24, 135501),
    "c1908": (33, 25, 880, 40, 190801),
    "c2670": (233, 140, 1193, 32, 267001),
}


def main() -> None:
    (DEST / "c17.bench").write_text(C17)
    print("c17.bench written (canonical)")
    for name, (n_pi, n_po, n_gates, depth, seed) in STAND_INS.items():
        netlist = random_circuit(name, n_pi, n_po, n_gates, seed=seed, target_depth=depth)
        (DEST / f"{name}.bench").write_text(emit_bench(netlist))
        print(f"{name}.bench written: |PI|={n_pi} |PO|={n_po} gates={n_gates} seed={seed}")


if __name__ == "__main__":
    main()
