import io
import json

import pytest

from unimodkit import cofinite as cf
from unimodkit.cli import run


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    T, g = cf.sym_tree()
    (tmp_path / "f.sym").write_text(cf.render_spec([cf.identity_map(T)]))
    (tmp_path / "g.sym").write_text(cf.render_spec([g]))
    return tmp_path


def test_tree_fibres(workdir):
    assert call("gen", "tree", "--depth", "3", "--out", "t.st")[0] == 0
    code, out, _ = call("corr", "fibres", "t.st#S")
    assert code == 0
    rows = [ln.split() for ln in out.splitlines()[3:]]
    left = {int(e): int(n) for side, e, n in rows if side == "left"}
    assert left == {0: 2, 1: 2, 2: 2, 3: 0, 4: 0, 5: 0, 6: 0}


@pytest.mark.parametrize("gen", [["tree", "--depth", "3"], ["levels", "--n", "3"], ["shift", "--m", "4", "--d", "1"]])
def test_unimod_check_generated(workdir, gen):
    assert call("gen", *gen, "--out", "s.st")[0] == 0
    code, out, _ = call("unimod", "check", "s.st", "--max-params", "2")
    assert code == 0 and "verdict unimodular" in out


def test_repair_round_trip(workdir):
    code, out, _ = call("repair", "run", "--f", "f.sym", "--g", "g.sym", "--out", "c.cert")
    assert code == 0 and out.startswith("case 1")
    code, out, _ = call("repair", "verify", "c.cert", "--depth", "1000")
    assert code == 0 and "fibres (1, 2)" in out


def test_repair_verify_rejects_tampered(workdir):
    call("repair", "run", "--f", "f.sym", "--g", "g.sym", "--out", "c.cert")
    text = (workdir / "c.cert").read_text()
    (workdir / "bad.cert").write_text(text.replace("except r:t/0:0 -> p:Q#0", "except r:t/0:0 -> p:Q#1"))
    code, out, _ = call("repair", "verify", "bad.cert", "--depth", "1000")
    assert code == 3 and "p:Q#0" in out


def test_json_report(workdir):
    call("gen", "shift", "--m", "4", "--d", "1", "--out", "s.st")
    code, out, _ = call("aut", "s.st", "--json")
    rep = json.loads(out)
    assert code == 0 and rep["status"] == 0 and rep["schema"] == 1
    assert rep["result"]["order"] == 64
    assert rep["command"] == ["aut", "s.st", "--json"]
    assert len(rep["inputs_sha256"]) == 64


def test_output_is_deterministic(workdir):
    call("gen", "tree", "--depth", "4", "--out", "t.st")
    for argv in (["orbits", "t.st", "--pairs"], ["unimod", "check", "t.st", "--verbose", "--json"], ["corr", "decompose", "t.st#S", "--fix", "0"]):
        assert call(*argv) == call(*argv)


def test_corr_subcommands(workdir):
    call("gen", "shift", "--m", "4", "--d", "1", "--out", "s.st")
    assert "uniform k=2 l=2" in call("corr", "uniform", "s.st#F")[1]
    assert "ratio 1/1" in call("corr", "ratio", "s.st#F")[1]
    assert "|C| 16" in call("corr", "doublecount", "s.st#F")[1]
    code, out, _ = call("corr", "compose", "s.st#F", "s.st#F")
    assert code == 0 and "k: 2*2 = 4" in out
    code, out, _ = call("corr", "product", "s.st#F", "s.st#F", "--out", "p.corr")
    assert code == 0 and "k=4 l=4" in out
    assert "ratio 1/1" in call("corr", "ratio", "p.corr")[1]


def test_unimod_selectors(workdir):
    call("gen", "levels", "--n", "3", "--out", "l.st")
    code, out, _ = call("unimod", "commensurable", "l.st", "--p", "1", "--q", "0")
    assert code == 0 and "ratio 1/2" in out
    assert call("unimod", "measurable", "l.st", "--p", "3")[0] == 0
    assert call("unimod", "measurable", "l.st")[0] == 1
    call("gen", "shift", "--m", "4", "--d", "1", "--out", "s.st")
    code, out, _ = call("unimod", "ledger", "s.st", "--fix", "0", "--corr", "s.st#F")
    assert code == 0 and "mu*k" in out


def test_sym_commands(workdir):
    code, out, _ = call("sym", "fibres", "g.sym", "--depth", "10")
    assert code == 0 and "r:t:0        3" in out
    code, out, _ = call("sym", "materialize", "g.sym", "--depth", "3", "--json")
    assert json.loads(out)["result"]["table"] == [["r:t:0", "r:t:0"], ["r:t:1", "r:t:0"], ["r:t:2", "r:t:0"]]


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["aut", "missing.st"],
        ["gen", "shift", "--m", "3", "--d", "1"],
        ["corr", "fibres", "f.sym"],
        ["repair", "run", "--f", "g.sym", "--g", "g.sym", "--out", "x.cert"],
        ["sym", "fibres", "g.sym", "--depth", "0"],
    ],
)
def test_usage_errors_exit_1(workdir, argv):
    code, _, err = call(*argv)
    assert code == 1 and err.startswith("error:")


def test_error_json(workdir):
    code, out, _ = call("aut", "missing.st", "--json")
    rep = json.loads(out)
    assert code == 1 and rep["status"] == 1 and rep["result"] is None and "error" in rep
