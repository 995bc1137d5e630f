import json
import os
import subprocess
import sys

import pytest

from helpers import NEW_FOO, foo_scenario
from staleflow.cli import main
from staleflow.profile import load_profile, save_profile

DATA = os.path.join(os.path.dirname(__file__), "data")


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def sim_dir(tmp_path, capsys):
    d = tmp_path / "sc"
    code, _, _ = run(capsys, "simulate", "--seed", 4, "--functions", 25, "--mutation-rate", 0.1, "--out-dir", d)
    assert code == 0
    return d


@pytest.fixture
def foo_files(tmp_path):
    _, _, prof = foo_scenario()
    cfg = tmp_path / "foo.cfg"
    cfg.write_text(NEW_FOO)
    p = tmp_path / "foo.prof"
    save_profile(prof, p)
    return cfg, p


def test_hash_fixture(capsys):
    code, out, _ = run(capsys, "hash", "--cfg", os.path.join(DATA, "hash_fixture.cfg"))
    assert code == 0
    with open(os.path.join(DATA, "hash_fixture.expected"), encoding="utf-8") as fh:
        assert out == fh.read()


def test_simulate_writes_scenario(sim_dir):
    assert sorted(os.listdir(sim_dir)) == ["fresh.prof", "new.cfg", "old.cfg", "old.prof", "scenario.json"]
    meta = json.loads((sim_dir / "scenario.json").read_text())
    assert meta["gen"]["seed"] == 4 and meta["mutation"]["rate"] == 0.1


def test_match_report(sim_dir, tmp_path, capsys):
    report = tmp_path / "m.json"
    code, _, _ = run(capsys, "match", "--cfg", sim_dir / "new.cfg", "--profile", sim_dir / "old.prof", "--report", report)
    assert code == 0
    doc = json.loads(report.read_text())
    assert set(doc) == {"discarded", "functions", "staleness"}
    assert 0.0 < doc["staleness"] < 1.0
    f = doc["functions"][0]
    assert set(f) == {"cfg_name", "exact", "kind", "levels", "profile_name"}
    assert set(f["levels"]) == {"full", "strict", "loose", "entry-forced"}


def test_pipeline_and_eval(sim_dir, tmp_path, capsys):
    out = tmp_path / "inf.prof"
    code, text, _ = run(capsys, "pipeline", "--cfg", sim_dir / "new.cfg", "--profile", sim_dir / "old.prof", "--out", out)
    assert code == 0 and text.startswith("functions=25 exact=")
    code, text, _ = run(capsys, "eval", "--cfg", sim_dir / "new.cfg", "--inferred", out, "--fresh", sim_dir / "fresh.prof",
                        "--stale", sim_dir / "old.prof")
    doc = json.loads(text)
    assert code == 0 and 0.5 < doc["edge_overlap"] <= 1.0 and doc["staleness"] > 0
    assert list(doc) == sorted(doc)


def test_pipeline_quiet_and_identity(sim_dir, tmp_path, capsys):
    out = tmp_path / "same.prof"
    code, text, _ = run(capsys, "--quiet", "pipeline", "--cfg", sim_dir / "new.cfg", "--profile", sim_dir / "fresh.prof", "--out", out)
    assert code == 0 and text == ""
    assert out.read_bytes() == (sim_dir / "fresh.prof").read_bytes()


def test_infer_fills_new_blocks(foo_files, tmp_path, capsys):
    cfg, prof = foo_files
    out = tmp_path / "out.prof"
    code, _, _ = run(capsys, "infer", "--cfg", cfg, "--profile", prof, "--out", out)
    assert code == 0
    execs = {b.bid: b.exec for b in load_profile(out).functions[0].blocks}
    assert execs[5] == execs[6] == 75 and execs[3] == 150


def test_parameter_flags(tmp_path, capsys):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("function f\nblock 0 offset 0\ninstr normal a\nsucc 1\nblock 1 offset 4\ninstr normal b\nend\n")
    prof = tmp_path / "p.prof"
    prof.write_text(
        'functions:\n  - name: "f"\n    fhash: "0000000000000000"\n    exec: 100\n    nblocks: 2\n    blocks:\n'
        '      - bid: 0\n        hash: "0000000000000000"\n        exec: 100\n        succ: []\n'
        '      - bid: 1\n        hash: "0000000000000000"\n        exec: 90\n        succ: []\n'
    )
    out = tmp_path / "o.prof"
    # the profile's hashes are bogus, so only the entry matches; give block 1 a real hash
    from staleflow.cfg import read_cfg
    from staleflow.hashing import blended_hashes

    h = blended_hashes(read_cfg(cfg).functions[0])[1].packed64
    prof.write_text(prof.read_text().replace('hash: "0000000000000000"\n        exec: 90', f'hash: "{h:016x}"\n        exec: 90'))
    assert run(capsys, "infer", "--cfg", cfg, "--profile", prof, "--out", out)[0] == 0
    assert [b.exec for b in load_profile(out).functions[0].blocks] == [100, 100]
    assert run(capsys, "--k-inc", 3, "--k-dec", 1, "infer", "--cfg", cfg, "--profile", prof, "--out", out)[0] == 0
    assert [b.exec for b in load_profile(out).functions[0].blocks] == [90, 90]
    assert run(capsys, "infer", "--k-inc", 3, "--k-dec", 1, "--cfg", cfg, "--profile", prof, "--out", out)[0] == 0
    assert [b.exec for b in load_profile(out).functions[0].blocks] == [90, 90]


def test_input_errors_exit_1(tmp_path, capsys):
    bad = tmp_path / "bad.prof"
    bad.write_text("functions:\n  - name: 3\n")
    cfg = os.path.join(DATA, "hash_fixture.cfg")
    code, _, err = run(capsys, "pipeline", "--cfg", cfg, "--profile", bad, "--out", tmp_path / "o")
    assert code == 1 and str(bad) in err
    code, _, err = run(capsys, "hash", "--cfg", tmp_path / "missing.cfg")
    assert code == 1 and "missing.cfg" in err
    assert run(capsys, "hash")[0] == 1
    assert run(capsys, "--help")[0] == 0
    assert run(capsys, "--jobs", 0, "hash", "--cfg", cfg)[0] == 1
    assert run(capsys, "simulate", "--kinds", "teleport", "--out-dir", tmp_path)[0] == 1


def test_invariant_violation_exit_2(foo_files, tmp_path, capsys, monkeypatch):
    import staleflow.pipeline as pl

    monkeypatch.setattr(pl, "conservation_violations", lambda ff: [0])
    cfg, prof = foo_files
    code, _, err = run(capsys, "infer", "--cfg", cfg, "--profile", prof, "--out", tmp_path / "o")
    assert code == 2 and "conservation" in err


def test_bench(tmp_path, capsys):
    csv_path = tmp_path / "b.csv"
    code, out, _ = run(capsys, "bench", "--seeds", "1-2", "--rates", "0,0.1", "--functions", 20, "--csv", csv_path)
    assert code == 0
    doc = json.loads(out)
    assert [(r["seed"], r["mutation_rate"]) for r in doc["rows"]] == [(1, 0.0), (1, 0.1), (2, 0.0), (2, 0.1)]
    for r in doc["rows"]:
        if r["mutation_rate"] == 0:
            assert r["overlap_inferred"] == r["overlap_stale_baseline"]
        else:
            assert r["overlap_inferred"] >= r["overlap_stale_baseline"]
    assert "runtime_ms" in doc
    assert csv_path.read_text().count("\n") == 5


def test_bench_empty_rates(capsys):
    code, out, _ = run(capsys, "bench", "--seeds", "1", "--rates", "", "--no-timing")
    assert code == 0 and json.loads(out) == {"rows": []}


def test_stamp_only_when_asked(sim_dir, tmp_path, capsys):
    args = ["match", "--cfg", sim_dir / "new.cfg", "--profile", sim_dir / "old.prof"]
    assert "stamp" not in json.loads(run(capsys, *args)[1])
    assert "stamp" in json.loads(run(capsys, "--stamp", *args)[1])


def test_commands_are_deterministic(sim_dir, tmp_path, capsys):
    outputs = []
    for k in range(2):
        o = tmp_path / f"r{k}"
        o.mkdir()
        run(capsys, "simulate", "--seed", 9, "--functions", 10, "--out-dir", o / "sc")
        run(capsys, "pipeline", "--cfg", o / "sc/new.cfg", "--profile", o / "sc/old.prof", "--out", o / "p.prof")
        run(capsys, "infer", "--cfg", o / "sc/new.cfg", "--profile", o / "sc/old.prof", "--out", o / "i.prof")
        run(capsys, "match", "--cfg", o / "sc/new.cfg", "--profile", o / "sc/old.prof", "--report", o / "m.json")
        run(capsys, "eval", "--cfg", o / "sc/new.cfg", "--inferred", o / "p.prof", "--fresh", o / "sc/fresh.prof", "--report", o / "e.json")
        run(capsys, "bench", "--seeds", "3", "--rates", "0.05", "--functions", 10, "--no-timing", "--json", o / "b.json")
        outputs.append({p: (o / p).read_bytes() for p in
                        ["sc/old.cfg", "sc/new.cfg", "sc/old.prof", "sc/fresh.prof", "sc/scenario.json",
                         "p.prof", "i.prof", "m.json", "e.json", "b.json"]})
    assert outputs[0] == outputs[1]


def test_console_script_entry_point():
    res = subprocess.run([sys.executable, "-m", "staleflow.cli", "hash", "--cfg", os.path.join(DATA, "hash_fixture.cfg")],
                         capture_output=True, text=True, check=True)
    assert res.stdout.splitlines()[0] == "main 0 0000ccb05c16cee4"
