"""Acceptance suite: every criterion runs at its stated size and tolerance
and prints one PASS line (a failed assertion fails the criterion).

The attack matrix covers random insertion on c432 (32-bit key) and c2670
(128), interference chains on c1355 and c1908 (128), and the combined
stripped-pattern + random lock on c2670 (40+40), each with 5 lock seeds
and 20 random hidden keys.  Run with `pytest tests/test_acceptance.py -v -s`.
"""

import itertools
import random
import time

import pytest

import bruteforce
from conftest import lock_inline, small_random_circuit
from faultkey import benchmarks
from faultkey.atpg import d_algorithm, generate_pattern_set, verify_pattern
from faultkey.attack import render_report, run_attack
from faultkey.bench import emit_bench
from faultkey.locking import (
    KeyVector,
    LockScheme,
    LockSpec,
    apply_lock,
    check_equivalence,
    derive_cube,
    wrong_key_differs,
)
from faultkey.logic import (
    X,
    FaultSpec,
    Polarity,
    faulty_value,
    full_injection,
    good_value,
    simulate3,
    simulate5,
    simulate_batch,
)
from faultkey.oracle import Oracle, ReplayOracle
from faultkey.synth import random_circuit

SEEDS = [101, 202, 303, 404, 505]
KEYS_PER_INSTANCE = 20

MATRIX = [
    ("c432", LockScheme.RLL, 32, None),
    ("c2670", LockScheme.RLL, 128, None),
    ("c1355", LockScheme.SLL, 128, None),
    ("c1908", LockScheme.SLL, 128, None),
    ("c2670", LockScheme.COMBINED, 80, (40, 40)),
]


@pytest.fixture(scope="module")
def lock_matrix():
    """All 25 locked instances: {(circuit, scheme): [(seed, spec, key, locked)]}."""
    out = {}
    for circuit, scheme, key_size, split in MATRIX:
        original = benchmarks.load(circuit)
        instances = []
        for seed in SEEDS:
            spec = LockSpec(scheme, key_size, seed, split=split)
            key = KeyVector.random(key_size, seed * 7 + 1)
            locked = apply_lock(original, spec, key)
            instances.append((seed, spec, key, locked))
        out[(circuit, scheme)] = (original, instances)
    return out


def _attack_instances(lock_matrix, circuit, scheme):
    """Run the 20-hidden-key attack campaign on each seed's instance.

    Returns per-instance stats: (seed, pattern set, attack reports, seconds).
    """
    _, instances = lock_matrix[(circuit, scheme)]
    results = []
    for seed, spec, key, locked in instances:
        t0 = time.perf_counter()
        pset = generate_pattern_set(locked)
        reports = []
        rng = random.Random(seed ^ 0xA77AC)
        for _ in range(KEYS_PER_INSTANCE):
            hidden = KeyVector(tuple(rng.randint(0, 1) for _ in range(spec.key_size)))
            report = run_attack(locked, Oracle(locked, hidden), patterns=pset)
            got = report.recovered_key()
            assert got is not None, f"{circuit}/{scheme.value} seed {seed}: unresolved bits {report.unresolved_indices}"
            assert got.bits == hidden.bits, f"{circuit}/{scheme.value} seed {seed}: wrong key recovered"
            assert report.total_queries <= 2 * spec.key_size
            reports.append(report)
        results.append((seed, pset, reports, time.perf_counter() - t0))
    return results


def test_criterion_1_rll_full_recovery(lock_matrix):
    total = 0
    for circuit in ("c432", "c2670"):
        for seed, pset, reports, secs in _attack_instances(lock_matrix, circuit, LockScheme.RLL):
            assert len(pset.patterns) <= pset.key_size
            assert secs < 60, f"{circuit} seed {seed}: {secs:.1f}s exceeds the 60 s budget"
            total += len(reports)
    assert total == 2 * len(SEEDS) * KEYS_PER_INSTANCE
    print(f"\nACCEPTANCE 1 (RLL c432-32 / c2670-128, 5 seeds x 20 keys): PASS ({total} attacks, 100% recovery)")


def test_criterion_2_sll_full_recovery(lock_matrix):
    total = 0
    for circuit in ("c1355", "c1908"):
        for seed, pset, reports, secs in _attack_instances(lock_matrix, circuit, LockScheme.SLL):
            assert not pset.unresolved
            total += len(reports)
    assert total == 2 * len(SEEDS) * KEYS_PER_INSTANCE
    print(f"\nACCEPTANCE 2 (SLL c1355/c1908-128, 5 seeds x 20 keys): PASS ({total} attacks, 100% recovery)")


def test_criterion_3_combined_full_recovery(lock_matrix):
    results = _attack_instances(lock_matrix, "c2670", LockScheme.COMBINED)
    total = sum(len(reports) for _, _, reports, _ in results)
    assert total == len(SEEDS) * KEYS_PER_INSTANCE
    print(f"\nACCEPTANCE 3 (combined SFLL-40 + RLL-40 on c2670, 5 seeds x 20 keys): PASS ({total} attacks)")


def test_criterion_4_pattern_budget(lock_matrix):
    checked = 0
    for (circuit, scheme), (_, instances) in lock_matrix.items():
        for seed, spec, key, locked in instances:
            pset = generate_pattern_set(locked)
            for polarity in (Polarity.SA1, Polarity.SA0):
                count = sum(1 for p in pset.patterns if p.polarity is polarity)
                assert count <= spec.key_size
            assert len(pset.patterns) <= spec.key_size
            checked += 1
    print(f"\nACCEPTANCE 4 (pattern budget <= |K| per polarity, {checked} instances): PASS")


def test_criterion_5_atpg_soundness_1000_cases():
    rng = random.Random(0xA7B6)
    cases = patterns_checked = untestable_seen = 0
    while cases < 1000:
        base = small_random_circuit(cases, rng)
        if rng.random() < 0.6:
            locked = lock_inline(base, rng.randint(1, 4), rng)
        else:
            scheme = rng.choice([LockScheme.RLL, LockScheme.SLL, LockScheme.SFLL_LITE])
            key_size = rng.randint(1, min(4, base.num_inputs, len(base.gates)))
            key = KeyVector(tuple(rng.randint(0, 1) for _ in range(key_size)))
            try:
                locked = apply_lock(base, LockSpec(scheme, key_size, seed=cases), key)
            except Exception:
                locked = lock_inline(base, key_size, rng)
        cases += 1
        cols, width = _exhaustive_cols(locked.num_inputs)
        for ki in range(locked.key_size):
            for pol in (Polarity.SA1, Polarity.SA0):
                constraints = full_injection(locked.key_size, pol.stuck_value, skip=ki)
                pattern = d_algorithm(locked, FaultSpec(ki, pol), constraints)
                exists = _enumerate_detectable(locked, ki, constraints, cols, width)
                assert (pattern is not None) == exists, (
                    f"case {cases}: search and enumeration disagree for key {ki} {pol.value}"
                )
                if pattern is None:
                    untestable_seen += 1
                    continue
                assert verify_pattern(locked, pattern)
                if locked.num_inputs <= 8:
                    assert bruteforce.pattern_detects_all_completions(
                        locked, pattern, constraints
                    )
                patterns_checked += 1
    assert untestable_seen > 0  # the corpus must exercise the untestable side
    print(
        f"\nACCEPTANCE 5 (ATPG soundness, {cases} cases): PASS "
        f"({patterns_checked} patterns verified, {untestable_seen} untestable verdicts matched)"
    )


def _exhaustive_cols(n):
    from faultkey.logic import exhaustive_columns

    return exhaustive_columns(n)


def _enumerate_detectable(locked, key_index, constraints, cols, width):
    """Exhaustive enumeration oracle: some complete input vector must
    separate the target key line's two values under the constraints."""
    mask = (1 << width) - 1
    outs = []
    for bit in (0, 1):
        key_cols = []
        for k in range(locked.key_size):
            v = bit if k == key_index else constraints[k]
            key_cols.append(mask if v else 0)
        outs.append(simulate_batch(locked, cols, key_cols, width))
    return outs[0] != outs[1]


def test_criterion_6_d_calculus_consistency_10000():
    rng = random.Random(0xDCA1)
    runs = 0
    circuits = []
    for i in range(40):
        n_pi = rng.randint(2, 10)
        base = random_circuit(f"dc{i}", n_pi, rng.randint(1, 4), rng.randint(4, 40), seed=i, target_depth=10)
        circuits.append(lock_inline(base, rng.randint(1, 4), rng))
    while runs < 10_000:
        locked = circuits[runs % len(circuits)]
        ki = rng.randrange(locked.key_size)
        pol = rng.choice([Polarity.SA1, Polarity.SA0])
        constraints = {j: rng.randint(0, 1) for j in range(locked.key_size) if j != ki}
        pi = [rng.randint(0, 1) for _ in range(locked.num_inputs)]
        v5 = simulate5(locked, pi, FaultSpec(ki, pol), constraints)
        key_good = [constraints.get(j, 0) for j in range(locked.key_size)]
        key_good[ki] = pol.activation_value
        key_faulty = list(key_good)
        key_faulty[ki] = pol.stuck_value
        assert [good_value(v) for v in v5] == simulate3(locked, pi, key_good)
        assert [faulty_value(v) for v in v5] == simulate3(locked, pi, key_faulty)
        runs += 1
    print(f"\nACCEPTANCE 6 (good/faulty decomposition, {runs} runs): PASS (zero mismatches)")


def test_criterion_7_lock_equivalence(lock_matrix):
    rng = random.Random(0xE0)
    checked = 0
    for (circuit, scheme), (original, instances) in lock_matrix.items():
        for seed, spec, key, locked in instances:
            assert check_equivalence(original, locked, key)
            directed = []
            if scheme is LockScheme.COMBINED:
                cube = derive_cube(original, KeyVector(key.bits[: spec.split[0]]), spec.seed)
                probe = [rng.randint(0, 1) for _ in range(original.num_inputs)]
                for i, v in enumerate(cube):
                    if v != X:
                        probe[i] = v
                directed = [probe]
            sampled = 0
            while sampled < 50:
                wrong = KeyVector(tuple(rng.randint(0, 1) for _ in range(spec.key_size)))
                if wrong == key:
                    continue
                assert wrong_key_differs(original, locked, wrong, directed=directed), (
                    f"{circuit}/{scheme.value} seed {seed}: wrong key not detected"
                )
                sampled += 1
            checked += 1
    # exhaustive branch: small circuits stay equivalent on the full space
    small = benchmarks.load("c17")
    for scheme in (LockScheme.RLL, LockScheme.SLL):
        key = KeyVector.random(3, 5)
        locked = apply_lock(small, LockSpec(scheme, 3, seed=11), key)
        assert bruteforce.equivalent_exhaustive(small, locked, key.bits)
        checked += 1
    print(f"\nACCEPTANCE 7 (lock equivalence + 50 wrong keys each, {checked} locks): PASS")


def test_criterion_8_determinism_and_replay(lock_matrix):
    original, instances = lock_matrix[("c432", LockScheme.RLL)]
    seed, spec, key, locked = instances[0]

    # repeated seeded runs: byte-identical netlists and pattern files
    again = apply_lock(original, spec, key)
    assert emit_bench(again) == emit_bench(locked)
    from faultkey.atpg import render_patterns

    assert render_patterns(generate_pattern_set(locked)) == render_patterns(generate_pattern_set(again))

    # transcript replay: byte-identical attack report
    hidden = KeyVector.random(spec.key_size, 0xFEED)
    live_oracle = Oracle(locked, hidden)
    live = run_attack(locked, live_oracle)
    replayed = run_attack(locked, ReplayOracle(live_oracle.transcript))
    assert render_report(live) == render_report(replayed)
    assert live.recovered_key().bits == hidden.bits
    print("\nACCEPTANCE 8 (seeded determinism, byte-identical replay reports): PASS")
