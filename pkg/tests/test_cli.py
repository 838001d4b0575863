import json
from fractions import Fraction

import pytest

from fatcurve.cli import RunConfig, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


def test_verify_area(capsys):
    code, summary = run(capsys, "verify", "area", "--max-depth", "8")
    assert code == 0
    rows = summary["result"]["rows"]
    assert len(rows) == 8
    for r in rows:
        n = r["n"]
        assert Fraction(r["area"]) == Fraction(n + 2, 2 * (n + 1)) ** 2
    assert rows[0]["area"] == "9/16"


def test_fn_eval_H(capsys):
    code, summary = run(capsys, "fn", "eval", "--address", "33", "--depth", "12", "--fn", "H")
    assert code == 0
    assert Fraction(summary["result"]["H"]) == 1
    code, summary = run(capsys, "fn", "eval", "--address", "A33", "--fn", "H")
    assert Fraction(summary["result"]["H"]) == Fraction(15, 16)


def test_fn_eval_all(capsys):
    code, summary = run(capsys, "fn", "eval", "--address", "B", "--depth", "8")
    res = summary["result"]
    assert code == 0
    assert Fraction(res["F"]["value"]) == 0
    assert Fraction(res["H"]) == 1


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["bogus"])
    assert exc.value.code == 2
    assert main(["verify", "lemma1", "--depth", "8", "--m", "5"]) == 2
    assert main(["fn", "eval", "--address", "45"]) == 2
    assert main(["mesh", "scale", "--depth", "1", "--c", "0", "--mesh-step", "0.1"]) == 2


def test_violation_writes_witness(capsys, tmp_path):
    witness = tmp_path / "w.json"
    code, summary = run(
        capsys, "verify", "holder", "--fn", "H", "--eps", "0.1", "--pairs", "300",
        "--eval-depth", "10", "--witness", str(witness),
    )
    assert code == 1
    assert summary["result"]["witness_path"] == str(witness)
    assert witness.exists()


def test_lemma_exploratory(capsys):
    code, summary = run(capsys, "verify", "lemma1", "--depth", "7", "--m", "5", "--exploratory")
    assert code == 0
    assert summary["result"]["normative"] is False


def test_outputs_written(capsys, tmp_path):
    svg = tmp_path / "out.svg"
    code, _ = run(capsys, "arc", "render", "--depth", "3", "--svg", str(svg))
    assert code == 0 and svg.read_text().startswith("<svg")
    jets = tmp_path / "j.json"
    code, summary = run(capsys, "curve", "build", "--depth", "2", "--jets", str(jets), "--k", "1")
    assert code == 0
    assert summary["result"]["area"] == "16/9"
    assert len(json.loads(jets.read_text())["jets"]) == 4


def test_mesh_commands(capsys, tmp_path):
    obj = tmp_path / "m.obj"
    args = ["--depth", "2", "--mesh-step", "0.08", "--h-min", "0.001", "--connector-step", "1/32"]
    code, summary = run(capsys, "mesh", "build", *args, "--obj", str(obj))
    assert code == 0
    assert summary["result"]["euler"] == 2 and summary["result"]["watertight"]
    code, summary = run(capsys, "mesh", "scale", *args, "--c", "0.5")
    assert code == 0
    assert summary["result"]["ratio_error"] <= 1e-12


def test_config_roundtrip(tmp_path):
    cfg = RunConfig(command="verify area", depth=4, seed=7)
    path = tmp_path / "cfg.json"
    path.write_text(cfg.to_json())
    again = RunConfig.load(path)
    assert again == cfg and again.digest() == cfg.digest()
    path.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(ValueError):
        RunConfig.load(path)


def test_report_reproducible(capsys, tmp_path):
    out = tmp_path / "report"
    outs, files = [], []
    for _ in range(2):
        code, summary = run(
            capsys, "report", "all", "--depth", "3", "--pairs", "300", "--eval-depth", "9",
            "--eps", "0.5", "--out", str(out),
        )
        assert code in (0, 1)
        summary.pop("timestamp")
        outs.append(json.dumps(summary, sort_keys=True))
        files.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    assert outs[0] == outs[1]
    assert files[0] == files[1]
