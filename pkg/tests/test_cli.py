from __future__ import annotations

import json

import pytest
from click.testing import CliRunner

from m2cp import io as mio
from m2cp.cli import main

LATTICE_CASE = {"system": {"s1": list("abcd"), "s2": list("cdef")}, "trajectory": [list("ac"), list("efc")]}
RETURN_CASE = {"system": {"s1": list("abcd"), "s2": list("cdef")}, "trajectory": [list("abcad"), list("ecefd")]}


@pytest.fixture
def run():
    runner = CliRunner()

    def invoke(*args, env=None):
        return runner.invoke(main, list(args), env=env, catch_exceptions=False)

    return invoke


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, data in (("lattice_case", LATTICE_CASE), ("return_case", RETURN_CASE)):
        p = tmp_path / f"{name}.json"
        p.write_text(json.dumps(data), encoding="utf-8")
        out[name] = str(p)
    out["m1"] = str(mio.fixture_path("two-site", "m1.json"))
    out["m2"] = str(mio.fixture_path("two-site", "m2.json"))
    out["dir"] = tmp_path
    return out


def test_version(run):
    r = run("--version")
    assert r.exit_code == 0 and "m2cp" in r.output


def test_derive(run, files):
    r = run("derive", files["m1"], files["m2"])
    assert r.exit_code == 0
    data = json.loads(r.output)
    assert data["sync_matrix"]["rows"] == [["169/218", "49/218"], ["121/202", "81/202"]]
    assert data["derivation"]["report"]["renormalized"]["1"]["c"]["rows"][2] == ["2/3", "0", "1/3"]


def test_derive_writes_identical_report(run, files):
    rep = files["dir"] / "r.json"
    args = ("derive", files["m1"], files["m2"], "--report", str(rep), "--out", str(files["dir"] / "m.json"))
    run(*args)
    first = rep.read_bytes()
    run(*args)
    assert rep.read_bytes() == first


def test_derive_rejects_bad_matrix(run, files):
    bad = files["dir"] / "bad.json"
    bad.write_text(json.dumps({"index": ["a", "c"], "rows": [["1/2", "1/3"], ["0", "1"]]}), encoding="utf-8")
    r = run("derive", str(bad), files["m2"])
    assert r.exit_code == 2 and "row sum" in r.output


def test_derive_unreachable(run, files):
    ident = files["dir"] / "id.json"
    ident.write_text(json.dumps({"index": ["a", "c"], "rows": [["1", "0"], ["0", "1"]]}), encoding="utf-8")
    r = run("derive", str(ident), files["m2"])
    assert r.exit_code == 2 and "Q not almost surely reached from state 'a'" in r.output


def test_lattice(run, files):
    r = run("lattice", files["lattice_case"])
    assert r.exit_code == 0
    lines = r.output.strip().splitlines()
    assert lines[0] == "m,n,w1,w2" and len(lines) == 8


@pytest.mark.parametrize(
    "opt, rows",
    [
        (("--state", "a,e"), ["1,1,1,a,e", "2,4,3,a,e"]),
        (("--square", "X0"), ["1,1,1,a,e", "2,3,2,c,c", "3,4,3,a,e", "4,5,5,d,d"]),
        (("--square", "QxQ"), ["1,3,2,c,c", "2,5,5,d,d"]),
    ],
)
def test_returns(run, files, opt, rows):
    r = run("returns", files["return_case"], *opt)
    assert r.exit_code == 0
    assert r.output.strip().splitlines()[1:] == rows


def test_returns_needs_one_target(run, files):
    assert run("returns", files["return_case"]).exit_code == 2


def test_simulate_deterministic(run, files):
    a = run("simulate", "--samples", "30", "--horizon-syncs", "3", "--seed", "4")
    b = run("simulate", "--samples", "30", "--horizon-syncs", "3", "--seed", "4", "--threads", "2")
    assert a.exit_code == 0 and a.output == b.output
    assert len(a.output.splitlines()) == 30


def test_simulate_csv(run, files):
    csv_path = files["dir"] / "y.csv"
    run("simulate", "--samples", "5", "--horizon-syncs", "2", "--csv", str(csv_path))
    assert csv_path.read_text().splitlines()[0] == "index,start_x,start_z,Y1,Y2"


def test_env_override(run):
    a = run("simulate", "--samples", "3", "--horizon-syncs", "1", env={"M2CP_SIMULATE_SEED": "9"})
    b = run("simulate", "--samples", "3", "--horizon-syncs", "1", "--seed", "9")
    assert a.output == b.output


def test_markov_passes(run):
    r = run("test", "markov", "--max-prefix", "2", "--max-future", "2")
    assert r.exit_code == 0 and json.loads(r.output)["violation_count"] == 0


def test_markov_fails_on_renormalized(run, files):
    model = files["dir"] / "r.json"
    run("derive", files["m1"], files["m2"], "--family", "renormalized", "--out", str(model))
    r = run("test", "markov", "--model", str(model), "--max-prefix", "2", "--max-future", "1")
    assert r.exit_code == 1 and json.loads(r.output)["violation_count"] > 0


def test_lip_rejects_coupled(run):
    r = run("test", "lip", "--sampler", "coupled", "--samples", "3000")
    assert r.exit_code == 1 and json.loads(r.output)["decision"] == "reject"


def test_ychain_passes(run):
    r = run("test", "ychain", "--samples", "2000", "--horizon-syncs", "4")
    assert r.exit_code == 0


def test_stopping(run):
    r = run("test", "stopping", "--samples", "300", "--horizon-syncs", "3")
    assert r.exit_code == 0
    assert all(t["violations"] == 0 for t in json.loads(r.output)["times"].values())


def test_tv_rejection(run):
    r = run("test", "tv", "--sampler", "rejection", "--samples", "2000")
    assert r.exit_code in (0, 1) and "tv_distance" in json.loads(r.output)


def test_recurrence_transient(run):
    r = run("test", "recurrence", "--model", "fixture:transient", "--samples", "2000", "--horizon-syncs", "10")
    assert r.exit_code == 0 and json.loads(r.output)["structural"] == "transient"


def test_analyze(run):
    r = run("analyze", "--model", "fixture:transient", "--samples", "0")
    data = json.loads(r.output)
    assert r.exit_code == 0
    assert data["states"]["c,c"]["structural"] == "transient"
    assert data["components"] == [["a,d", "a,e", "d,d", "d,e"]]


def test_bad_model_file(run, files):
    bad = files["dir"] / "garbage.json"
    bad.write_text("{not json", encoding="utf-8")
    assert run("test", "markov", "--model", str(bad)).exit_code == 2


def test_bad_state(run):
    assert run("simulate", "--start", "c", "--samples", "1").exit_code == 2


def test_report_records_config(run):
    r = run("test", "ychain", "--samples", "500", "--horizon-syncs", "2", "--seed", "3")
    cfg = json.loads(r.output)["config"]
    assert cfg["seed"] == 3 and cfg["command"] == "test" and cfg["kind"] == "ychain"
