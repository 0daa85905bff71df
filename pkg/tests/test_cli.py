import json

import pytest

from faultkey import benchmarks
from faultkey.cli import main


@pytest.fixture
def c432_file(tmp_path):
    p = tmp_path / "c432.bench"
    p.write_text(benchmarks.source("c432"))
    return p


def run(*argv):
    return main([str(a) for a in argv])


def test_lock_atpg_attack_pipeline(tmp_path, c432_file, capsys):
    locked = tmp_path / "locked.bench"
    assert run("lock", c432_file, "--scheme", "rll", "--key-size", "16", "--seed", "7", "-o", locked) == 0
    out = capsys.readouterr().out
    assert "|K|=16" in out and "insertion sites" in out
    key_file = tmp_path / "locked.key"
    assert len(key_file.read_text().strip()) == 16

    patterns = tmp_path / "patterns.txt"
    assert run("atpg", locked, "-o", patterns) == 0
    out = capsys.readouterr().out
    assert "k0:" in out and "wrote 16 patterns" in out
    assert patterns.read_text().splitlines()[0].endswith("16 locked")

    report = tmp_path / "report.json"
    transcript = tmp_path / "transcript.txt"
    code = run(
        "attack", locked, "--key-file", key_file, "--patterns", patterns,
        "--report", report, "--transcript", transcript,
    )
    assert code == 0
    out = capsys.readouterr().out
    assert f"recovered key: {key_file.read_text().strip()}" in out
    assert "equivalence check: pass" in out
    doc = json.loads(report.read_text())
    assert doc["key_size"] == 16 and doc["v"] == 1

    # replay must produce a byte-identical report and the same exit code
    report2 = tmp_path / "report2.json"
    assert run("attack", locked, "--replay", transcript, "--patterns", patterns, "--report", report2) == 0
    assert report.read_bytes() == report2.read_bytes()


def test_lock_is_deterministic(tmp_path, c432_file):
    out1, out2 = tmp_path / "a.bench", tmp_path / "b.bench"
    run("lock", c432_file, "--scheme", "sll", "--key-size", "8", "--seed", "3", "-o", out1)
    run("lock", c432_file, "--scheme", "sll", "--key-size", "8", "--seed", "3", "-o", out2)
    assert out1.read_bytes() == out2.read_bytes()


def test_lock_combined_split(tmp_path, c432_file, capsys):
    locked = tmp_path / "comb.bench"
    assert run(
        "lock", c432_file, "--scheme", "combined", "--key-size", "16",
        "--split", "8,8", "--seed", "5", "-o", locked,
    ) == 0
    assert "|K|=16" in capsys.readouterr().out


def test_lock_usage_errors(tmp_path, c432_file, capsys):
    locked = tmp_path / "x.bench"
    assert run("lock", c432_file, "--scheme", "rll", "--key-size", "0", "--seed", "1", "-o", locked) == 2
    assert run("lock", c432_file, "--scheme", "combined", "--key-size", "8", "--seed", "1", "-o", locked) == 2
    capsys.readouterr()


def test_atpg_requires_key_inputs(tmp_path, c432_file, capsys):
    out = tmp_path / "p.txt"
    assert run("atpg", c432_file, "-o", out) == 1
    assert "no key inputs" in capsys.readouterr().err


def test_attack_requires_key_source(tmp_path, c432_file, capsys):
    locked = tmp_path / "locked.bench"
    run("lock", c432_file, "--scheme", "rll", "--key-size", "4", "--seed", "2", "-o", locked)
    capsys.readouterr()
    assert run("attack", locked) == 2
    assert "--key-file" in capsys.readouterr().err


def test_attack_rejects_corrupt_patterns(tmp_path, c432_file, capsys):
    locked = tmp_path / "locked.bench"
    run("lock", c432_file, "--scheme", "rll", "--key-size", "4", "--seed", "2", "-o", locked)
    bad = tmp_path / "bad.txt"
    bad.write_text("this is not a pattern file\n")
    capsys.readouterr()
    assert run("attack", locked, "--key-file", tmp_path / "locked.key", "--patterns", bad) == 2


def test_attack_wrong_key_file_is_detected(tmp_path, c432_file, capsys):
    # a sidecar for a different instance seeds the oracle with a different
    # hidden key; the attack must still recover that oracle's key exactly
    locked = tmp_path / "locked.bench"
    run("lock", c432_file, "--scheme", "rll", "--key-size", "6", "--seed", "2", "-o", locked)
    other = tmp_path / "other.key"
    other.write_text("111111\n")
    capsys.readouterr()
    assert run("attack", locked, "--key-file", other) == 0
    assert "recovered key: 111111" in capsys.readouterr().out


def test_sim_roundtrip(tmp_path, capsys):
    toy = tmp_path / "toy.bench"
    toy.write_text("INPUT(a)\nINPUT(keyinput0)\nOUTPUT(y)\ny = XOR(a, keyinput0)\n")
    assert run("sim", toy, "--pi", "0", "--key", "0", "--inject", "0:1") == 0
    assert capsys.readouterr().out.strip() == "1"
    assert run("sim", toy, "--pi", "1", "--key", "1") == 0
    assert capsys.readouterr().out.strip() == "0"
    assert run("sim", toy, "--pi", "01", "--key", "1") == 2
    assert "error" in capsys.readouterr().err


def test_parse_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.bench"
    bad.write_text("garbage\n")
    assert run("sim", bad, "--pi", "0") == 2
    assert "error" in capsys.readouterr().err
