import json
import subprocess
import sys
from fractions import Fraction

import pytest

from conftest import VOTE_X
from satxplain.cli import main
from satxplain.dimacs import read_dimacs, read_wcnf
from satxplain.errors import NonBinaryValue, ParseError
from satxplain.io import heatmap_bytes, ingest_csv, read_pgm, read_table_csv
from satxplain.solver import solve

X_ARG = ",".join(map(str, VOTE_X))


def names_of(e):
    return frozenset(it["feature"] for it in e["items"])


def X(*ks):
    return frozenset(f"X{k}" for k in ks)


def explain(tmp_path, *extra, forest=None, name="report.json"):
    out = tmp_path / name
    argv = ["explain", "--instance", X_ARG, "--out", str(out), "--jobs", "1", *extra]
    if forest is not None:
        argv += ["--forest-file", str(forest)]
    code = main(argv)
    return code, out


def test_explain_golden(tmp_path, vote_forest_path, capsys):
    code, out = explain(tmp_path, forest=vote_forest_path)
    assert code == 0
    rep = json.loads(out.read_text())
    srs = {names_of(e) for e in rep["explanations"]["SR"]["list"]}
    cfs = {names_of(e) for e in rep["explanations"]["CF"]["list"]}
    assert srs == {X(4, 5), X(12, 5), X(4, 12, 9)}
    assert cfs == {X(4, 12), X(5, 12), X(5, 9), X(4, 5)}
    assert rep["explanations"]["CF"]["complete"] and rep["explanations"]["SR"]["complete"]
    assert rep["schema_version"] == 1
    fi = {f["feature"]: f["exact"]["FI"] for f in rep["feature_scores"]["CF"]}
    assert fi["X5"] == "3/4" and fi["X9"] == "1/4"
    assert all(e["exact"]["RESP"] == "1/3" for e in rep["explanations"]["SR"]["list"])
    assert (tmp_path / "report.neighborhood.json").exists()
    assert "SR: 3 explanation(s), complete" in capsys.readouterr().out


def test_explain_opposite_polarity_note(tmp_path, vote_forest_path):
    flipped = list(VOTE_X)
    flipped[3] = flipped[11] = 1
    out = tmp_path / "r.json"
    code = main(["explain", "--instance", ",".join(map(str, flipped)), "--forest-file", str(vote_forest_path),
                 "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["note"] == "instance already predicted positive; zero explanations of kind SR/CF"
    assert rep["explanations"]["SR"]["list"] == [] and rep["explanations"]["CF"]["list"] == []


def test_explain_positive_polarity(tmp_path, vote_forest_path):
    flipped = list(VOTE_X)
    flipped[3] = flipped[11] = 1
    out = tmp_path / "r.json"
    code = main(["explain", "--instance", "".join(map(str, flipped)), "--forest-file", str(vote_forest_path),
                 "--polarity", "pos", "--out", str(out)])
    assert code == 0
    cfs = {names_of(e) for e in json.loads(out.read_text())["explanations"]["CF"]["list"]}
    assert X(4) in cfs and X(12) in cfs


def test_explain_deterministic(tmp_path, vote_forest_path):
    a = json.loads(explain(tmp_path, forest=vote_forest_path, name="a.json")[1].read_text())
    b = json.loads(explain(tmp_path, forest=vote_forest_path, name="b.json")[1].read_text())
    a.pop("timings")
    b.pop("timings")
    assert a == b


def test_solver_backends_give_identical_reports(tmp_path, vote_forest_path):
    a = json.loads(explain(tmp_path, "--solver", "python", forest=vote_forest_path, name="a.json")[1].read_text())
    b = json.loads(explain(tmp_path, "--solver", "pysat", forest=vote_forest_path, name="b.json")[1].read_text())
    a.pop("timings")
    b.pop("timings")
    assert a == b


def _write_dataset(path, n=8, rows=120, seed=0, labels=True):
    import random

    rng = random.Random(seed)
    lines = [",".join(f"f{i}" for i in range(n)) + (",label" if labels else "")]
    for _ in range(rows):
        v = [rng.randint(0, 1) for _ in range(n)]
        lines.append(",".join(map(str, v + ([(v[0] & v[1]) | v[2]] if labels else []))))
    path.write_text("\n".join(lines) + "\n")


def test_explain_trains_from_labeled_data_deterministically(tmp_path):
    data = tmp_path / "d.csv"
    _write_dataset(data)
    outs = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        assert main(["explain", "--data", str(data), "--labels-col", "label", "--instance", "0",
                     "--trees", "5", "--seed", "3", "--out", str(out)]) == 0
        rep = json.loads(out.read_text())
        rep.pop("timings")
        outs.append(rep)
    assert outs[0] == outs[1]
    assert outs[0]["surrogate"]["fidelity"] is not None


def test_explain_with_oracle_command(tmp_path):
    data = tmp_path / "d.csv"
    _write_dataset(data, labels=False)
    oracle = tmp_path / "oracle.py"
    oracle.write_text("import sys\nfor line in sys.stdin:\n"
                      "    v = [int(t) for t in line.strip().split(',')]\n"
                      "    print((v[0] & v[1]) | v[2])\n")
    out = tmp_path / "r.json"
    code = main(["explain", "--data", str(data), "--oracle-cmd", f"{sys.executable} {oracle}",
                 "--instance", "00000000", "--sampler", "perturb", "--samples", "60", "--trees", "3",
                 "--out", str(out)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["instance"]["prediction"] == 0


def test_explain_grid_heatmaps(tmp_path, vote_forest_path):
    code, out = explain(tmp_path, "--grid", "4x4", forest=vote_forest_path)
    assert code == 0
    w, h, pixels = read_pgm((tmp_path / "report.FI_CF.pgm").read_bytes())
    assert (w, h) == (4, 4)
    assert pixels[4] == 255  # X5 has the top FI
    assert pixels[0] == 0


def test_explain_grid_mismatch_writes_nothing(tmp_path, vote_forest_path):
    code, out = explain(tmp_path, "--grid", "5x5", forest=vote_forest_path)
    assert code == 1
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_encode(tmp_path, vote_forest_path):
    assert main(["encode", "--instance", X_ARG, "--forest-file", str(vote_forest_path), "--out", str(tmp_path)]) == 0
    hard, soft, top = read_wcnf((tmp_path / "instance.wcnf").read_text())
    assert len(soft) == 16 and all(len(c) == 1 for c in soft)
    cnf = read_dimacs((tmp_path / "forest.cnf").read_text())
    assert sorted(map(sorted, cnf.clauses)) == sorted(map(sorted, hard))
    assert solve(cnf.clauses, num_vars=cnf.num_vars).sat
    assert not solve(cnf.clauses + [c for c in soft], num_vars=cnf.num_vars).sat
    varmap = json.loads((tmp_path / "varmap.json").read_text())
    assert varmap["features"]["X16"] == 16


def test_empty_forest_file_is_config_error(tmp_path):
    f = tmp_path / "f.json"
    f.write_text(json.dumps({"n_features": 3, "threshold": 1, "trees": []}))
    assert main(["encode", "--instance", "010", "--forest-file", str(f), "--out", str(tmp_path)]) == 1


def test_score_tables(tmp_path, vote_forest_path):
    code, out = explain(tmp_path, forest=vote_forest_path)
    assert code == 0
    assert main(["score", str(out), "--out", str(tmp_path)]) == 0
    rows = read_table_csv((tmp_path / "features_CF.csv").read_text())
    by = {r["feature_name"]: r for r in rows}
    assert float(by["X5"]["FI"]) == 0.75
    assert float(by["X5"]["FR"]) == 0.5
    assert by["X1"]["FR"] == ""
    assert by["X5"]["FG"] != ""
    # the CSV agrees with the in-memory report
    rep = json.loads(out.read_text())
    for f in rep["feature_scores"]["CF"]:
        for k in ("FI", "FG", "FR"):
            want = f["exact"][k]
            got = by[f["feature"]][k]
            assert (got == "" if want is None else float(got) == float(Fraction(want)))
    ex = read_table_csv((tmp_path / "explanations_SR.csv").read_text())
    assert sorted(r["size"] for r in ex) == ["2", "2", "3"]


def test_score_with_empty_cache(tmp_path, vote_forest_path):
    code, out = explain(tmp_path, forest=vote_forest_path)
    cache = tmp_path / "empty.json"
    cache.write_text(json.dumps({"schema_version": 1, "feature_names": [f"X{i}" for i in range(1, 17)],
                                 "center": list(VOTE_X), "entries": []}))
    assert main(["score", str(out), str(cache), "--out", str(tmp_path)]) == 0
    rows = read_table_csv((tmp_path / "features_CF.csv").read_text())
    assert all(r["FG"] == "" for r in rows)
    assert all(r["FI"] != "" for r in rows)
    ex = read_table_csv((tmp_path / "explanations_CF.csv").read_text())
    assert all(r["GEN"] == "" and r["RESP_neighborhood"] == "" and r["PAR"] and r["RESP"] for r in ex)


def test_score_missing_cache(tmp_path, vote_forest_path):
    code, out = explain(tmp_path, forest=vote_forest_path)
    (tmp_path / "report.neighborhood.json").unlink()
    assert main(["score", str(out), "--out", str(tmp_path)]) == 2


def test_heatmap_command(tmp_path, vote_forest_path):
    code, out = explain(tmp_path, forest=vote_forest_path)
    main(["score", str(out), "--out", str(tmp_path)])
    pgm = tmp_path / "fi.pgm"
    assert main(["heatmap", str(tmp_path / "features_CF.csv"), "--grid", "16x1", "--out", str(pgm)]) == 0
    w, h, pixels = read_pgm(pgm.read_bytes())
    assert (w, h) == (16, 1) and pixels[4] == 255 and pixels[3] == 170 and pixels[8] == 85
    assert main(["heatmap", str(tmp_path / "features_CF.csv"), "--grid", "3x3", "--out", str(pgm)]) == 1


def test_heatmap_bytes():
    _, _, px = read_pgm(heatmap_bytes([0.3] * 4, 2, 2))
    assert px == bytes([255] * 4)
    _, _, px = read_pgm(heatmap_bytes([0, 0, 0.2, 0], 2, 2))
    assert px == bytes([0, 0, 255, 0])
    w, h, px = read_pgm(heatmap_bytes([i / 784 for i in range(784)], 28, 28))
    assert (w, h, len(px)) == (28, 28, 784) and px[-1] == 255
    assert heatmap_bytes([None, None], 2, 1).endswith(bytes(2))


def test_ingest_csv(tmp_path):
    f = tmp_path / "toy.csv"
    f.write_text("a,b\n0,1\n1,1\n")
    ds = ingest_csv(f)
    assert ds.feature_names == ["a", "b"] and len(ds.rows) == 2
    f.write_text("a,b\n0,1\n1,2\n")
    with pytest.raises(NonBinaryValue) as err:
        ingest_csv(f)
    assert (err.value.line, err.value.column) == (3, 2)
    f.write_text("a,b\n0,1,1\n")
    with pytest.raises(ParseError):
        ingest_csv(f)


@pytest.mark.parametrize("argv,code", [
    (["explain", "--instance", "01"], 1),  # no data or forest
    (["explain", "--instance", "01", "--trees", "x"], 1),
    (["frobnicate"], 1),
    (["explain", "--instance", "01", "--data", "/nonexistent/d.csv"], 2),
])
def test_exit_codes_basic(argv, code):
    assert main(argv) == code


def test_exit_code_parse_error(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("a,b\n0,7\n")
    assert main(["explain", "--data", str(f), "--instance", "01"]) == 2


def test_exit_code_oracle_failure(tmp_path):
    f = tmp_path / "d.csv"
    _write_dataset(f)
    bad = f"{sys.executable} -c 'import sys; sys.exit(5)'"
    out = tmp_path / "r.json"
    assert main(["explain", "--data", str(f), "--oracle-cmd", bad, "--instance", "0", "--out", str(out)]) == 3
    assert not out.exists()


def test_exit_code_hard_unsat(tmp_path):
    f = tmp_path / "f.json"
    f.write_text(json.dumps({"n_features": 2, "threshold": 1, "trees": [{"leaf": 0}]}))
    out = tmp_path / "r.json"
    assert main(["explain", "--forest-file", str(f), "--instance", "01", "--out", str(out)]) == 4
    assert not out.exists()


def test_module_entry_point(vote_forest_path, tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "satxplain", "explain", "--instance", X_ARG,
                           "--forest-file", str(vote_forest_path), "--out", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "CF: 4 explanation(s), complete" in proc.stdout
