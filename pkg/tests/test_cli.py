import json
import subprocess
import sys

import pytest

from csi_imitation.cli import main
from csi_imitation.gallery import driving_cruise_control, pricing_chain, pricing_recession
from csi_imitation.generators import CnfFormula, sales_scm


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    paths = {}
    for name, g in [("fig1b", driving_cruise_control()), ("recession", pricing_recession()),
                    ("chain", pricing_chain())]:
        p = tmp_path / f"{name}.json"
        p.write_text(g.to_json())
        paths[name] = str(p)
    p = tmp_path / "sales.json"
    p.write_text(sales_scm().to_json())
    paths["sales"] = str(p)
    return paths


def test_decide_imitable(capsys, files):
    code, out, _ = run(capsys, "decide", "--graph", files["fig1b"])
    d = json.loads(out)
    assert code == 0 and d["decision"] == "Imitable"
    assert d["per_context"][0]["separator"] == ["Z", "T"]


def test_decide_not_imitable(capsys, files):
    code, out, _ = run(capsys, "--json", "decide", "--graph", files["recession"])
    assert code == 2 and json.loads(out)["witness"] == {"C": "1"}
    assert out.count("\n") == 1


def test_decide_with_obs(capsys, files, tmp_path):
    p = tmp_path / "sales_graph.json"
    p.write_text(sales_scm().graph.to_json())
    code, out, _ = run(capsys, "decide", "--graph", str(p), "--obs", files["sales"])
    assert code == 2


def test_imitate(capsys, files):
    code, out, _ = run(capsys, "imitate", "--scm", files["sales"])
    d = json.loads(out)
    assert code == 0 and d["mode"] == "exact" and d["policy"]["scope"] == ["C", "T"]
    code, out, _ = run(capsys, "imitate", "--scm", files["sales"], "--samples", "5000", "--seed", "2")
    assert code == 0 and json.loads(out)["mode"] == {"samples": 5000, "seed": 2}


def test_validate(capsys, files):
    code, out, _ = run(capsys, "validate", "--scm", files["sales"], "--graph", files["chain"])
    d = json.loads(out)
    assert code == 0 and d["violations"] == [] and len(d["flags"]) == 4


def test_malformed(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"variables": [}')
    code, _, err = run(capsys, "decide", "--graph", str(bad))
    assert code == 64 and "line 1 col" in err
    code, _, err = run(capsys, "decide", "--graph", str(tmp_path / "missing.json"))
    assert code == 64


def test_bad_label(capsys, tmp_path):
    g = json.loads(driving_cruise_control().to_json())
    g["edges"][0]["labels"] = [{"Q": "0"}]
    p = tmp_path / "g.json"
    p.write_text(json.dumps(g))
    code, _, err = run(capsys, "decide", "--graph", str(p))
    assert code == 64 and "edges[0].labels[0]" in err


def test_table1(capsys):
    code, out, _ = run(capsys, "table1")
    d = json.loads(out)
    assert code == 0 and d["mode"]["mode"] == "exact-enumeration"


def test_census(capsys, tmp_path):
    csv_path = tmp_path / "c.csv"
    code, out, _ = run(capsys, "census", "--n", "30", "--samples", "3", "--csv", str(csv_path),
                       "--plot-data", "--no-timing")
    assert code == 0 and "plot_data" in json.loads(out)
    assert csv_path.read_text().startswith("n,seed,classic_imitable")


def test_oracle(capsys):
    code, out, _ = run(capsys, "oracle", "--suite", "dsep", "--trials", "5", "--queries", "4")
    assert code == 0 and json.loads(out)["checked"] == 20


def test_gallery_unknown(capsys):
    code, _, err = run(capsys, "gallery", "nope")
    assert code == 64 and "pricing_chain" in err


@pytest.mark.parametrize("clauses, want", [
    ([(1, 2, 3)], 2),
    ([tuple(s * v for s, v in zip(signs, (1, 2, 3)))
      for signs in [(a, b, c) for a in (1, -1) for b in (1, -1) for c in (1, -1)]], 0),
])
def test_satgen_pipeline(tmp_path, clauses, want):
    cnf = tmp_path / "f.cnf"
    cnf.write_text(CnfFormula(3, clauses).to_dimacs())
    cmd = [sys.executable, "-m", "csi_imitation.cli"]
    gen = subprocess.run(cmd + ["satgen", "--cnf", str(cnf)], capture_output=True, text=True, check=True)
    dec = subprocess.run(cmd + ["decide"], input=gen.stdout, capture_output=True, text=True)
    assert dec.returncode == want
