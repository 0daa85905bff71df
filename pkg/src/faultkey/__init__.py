"""faultkey: logic locking and fault-injection key recovery.

Pipeline: parse a gate-level `.bench` netlist, insert key gates
(`locking`), generate constrained stuck-at patterns for the key lines
(`atpg`), and recover the key by comparing responses of all-lines-faulted
and one-line-genuine chip configurations (`oracle`, `attack`).
"""

from .atpg import (
    BacktrackLimitExceeded,
    Pattern,
    PatternSet,
    d_algorithm,
    generate_pattern_set,
    ladder_pattern,
    parse_patterns,
    render_patterns,
    verify_pattern,
)
from .attack import (
    AttackReport,
    BitResolution,
    ResolutionStatus,
    brute_force_residual,
    decide_bit,
    render_report,
    run_attack,
    verify_recovered_key,
)
from .bench import (
    BenchError,
    Diagnostic,
    Gate,
    GateKind,
    Netlist,
    emit_bench,
    parse_bench,
    structurally_equal,
    validate,
)
from .locking import (
    KeyVector,
    LockError,
    LockScheme,
    LockSpec,
    apply_lock,
    check_equivalence,
    derive_cube,
    interference_metric,
    lock_combined,
    lock_rll,
    lock_sfll_lite,
    lock_sll,
    wrong_key_differs,
)
from .logic import (
    D,
    D_BAR,
    ONE,
    X,
    ZERO,
    FaultSpec,
    Polarity,
    simulate3,
    simulate5,
    simulate_injected,
)
from .oracle import (
    Oracle,
    OracleSession,
    ReplayError,
    ReplayOracle,
    Transcript,
    parse_transcript,
    render_transcript,
)

__version__ = "0.1.0"
