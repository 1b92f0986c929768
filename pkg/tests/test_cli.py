import csv
import io
import json

import pytest

from frozen import BS_CALL
from nestedrisk.cli import main, parse_config
from nestedrisk.errors import ValidationError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows(text):
    return list(csv.reader(io.StringIO(text)))


def test_euro_zero_risk_is_black_scholes(capsys):
    code, out, _ = run(capsys, "price", "euro", "--K", "1.2", "--r", "0.03", "--sigma", "0.15", "--T", "1", "--s-rho", "0", "--spot", "1")
    assert code == 0
    header, row = rows(out)
    d = dict(zip(header, row))
    assert float(d["call_bid"]) == float(d["call_ask"]) == pytest.approx(BS_CALL, rel=1e-11)


def test_euro_spread_ordering(capsys):
    code, out, _ = run(capsys, "price", "euro", "--s-rho", "0.2", "--format", "json")
    rec = json.loads(out)[0]
    assert code == 0 and rec["call_bid"] < rec["call_ask"] and rec["put_bid"] < rec["put_ask"]


def test_euro_pde_method_close_to_closed(capsys):
    _, a, _ = run(capsys, "price", "euro", "--s-rho", "0.1", "--format", "json")
    _, b, _ = run(capsys, "price", "euro", "--s-rho", "0.1", "--method", "pde", "--nx", "200", "--nt", "200", "--format", "json")
    a, b = json.loads(a)[0], json.loads(b)[0]
    assert b["call_ask"] == pytest.approx(a["call_ask"], abs=2e-4)


@pytest.mark.parametrize("argv", [
    ["price", "euro", "--bogus"],
    ["price", "euro", "--s-rho", "abc"],
    ["price", "euro", "--sigma", "-1"],
    ["merton", "--gamma", "1"],
    ["converge", "--n", "400,100"],
])
def test_bad_input_exits_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and err


def test_csv_single_header_and_precision(capsys, tmp_path):
    out = tmp_path / "p.csv"
    code, summary, _ = run(capsys, "price", "euro", "--spots", "0.9,1.0,1.1", "--s-grid", "0,0.1", "--out", str(out))
    assert code == 0 and "call_spread" in summary
    table = rows(out.read_text())
    assert table[0][0] == "x" and len(table) == 7
    assert all(v == "%.12g" % float(v) for r in table[1:] for v in r)


def test_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("s_rho = 0.3\nK = 1.1\n# comment\n")
    c = parse_config(["price", "euro", "--config", str(cfg), "--K", "1.3"])
    assert c.s_rho == 0.3 and c.K == 1.3 and c.sigma == 0.15
    js = tmp_path / "run.json"
    js.write_text(json.dumps({"s-rho": 0.25, "format": "json"}))
    c = parse_config(["price", "euro", "--config", str(js)])
    assert c.s_rho == 0.25 and c.fmt == "json"
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    with pytest.raises(ValidationError):
        parse_config(["price", "euro", "--config", str(bad)])


def test_amer_call_reports_early_exercise(capsys, tmp_path):
    out = tmp_path / "b.csv"
    code, summary, _ = run(capsys, "price", "amer", "--kind", "call", "--s-rho", "0", "--nx", "120", "--nt", "80", "--out", str(out))
    assert code == 0
    assert "early_exercise_bid = False" in summary and "early_exercise_ask = False" in summary
    assert rows(out.read_text())[0] == ["t", "L_bid", "L_ask"]


def test_amer_put_boundary_order(capsys):
    code, out, _ = run(capsys, "price", "amer", "--s-rho", "0.2", "--nx", "150", "--nt", "100", "--format", "json")
    recs = json.loads(out)
    assert code == 0
    assert all(r["L_bid"] >= r["L_ask"] - 1e-9 for r in recs)


def test_tree_undiscounted(capsys):
    _, a, _ = run(capsys, "price", "tree", "--n", "20", "--measure", "expectation", "--format", "json")
    _, b, _ = run(capsys, "price", "tree", "--n", "20", "--measure", "expectation", "--undiscounted", "--format", "json")
    a, b = json.loads(a)[0], json.loads(b)[0]
    assert b["bid"] == pytest.approx(a["bid"] * 1.0304545339535169, rel=1e-10)


def test_merton_curve_and_report(capsys, tmp_path):
    report = tmp_path / "adj.json"
    code, out, _ = run(capsys, "merton", "--gamma", "0.4", "--r", "0.01", "--mu", "0.1", "--sigma", "0.3",
                       "--epsilon", "0.1", "--T", "4", "--report", str(report))
    table = rows(out)
    assert code == 0 and table[0] == ["s_rho", "consumption", "pi_star"]
    c = [float(r[1]) for r in table[1:]]
    assert c == sorted(c)
    assert json.loads(report.read_text())["canonical"]["hjb2"] == "paper"


def test_converge_error_decreases(capsys):
    code, out, _ = run(capsys, "converge", "--beta", "0.5", "--n", "100,400,1600", "--threads", "2")
    errs = [float(r[-1]) for r in rows(out)[1:]]
    assert code == 0 and errs == sorted(errs, reverse=True)


def test_identical_runs_are_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["selftest", "--seed", "3", "--format", "json", "--out", str(a)]) == 0
    assert main(["selftest", "--seed", "3", "--format", "json", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert json.loads(a.read_text())["all_passed"] is True
