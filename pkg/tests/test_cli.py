import json

import numpy as np

from etchomo import gen_center_ball, write_vox
from etchomo.cli import build_parser, main

SPEC_FLAGS = [
    "--axis", "--p-in", "--p-out", "--rtol", "--max-iter", "--precond",
    "--omega", "--ref", "--precision", "--report", "--history", "--threads",
    "--config", "--n", "--kappa-inc", "--count", "--r-min", "--r-max",
    "--psi", "--periods", "--seed", "-o",
]


def collected_help() -> str:
    parser = build_parser()
    texts = [parser.format_help()]
    subactions = [
        a for a in parser._actions if a.__class__.__name__ == "_SubParsersAction"
    ]
    for action in subactions:
        for sub in action.choices.values():
            texts.append(sub.format_help())
    return "\n".join(texts)


def test_help_enumerates_every_flag():
    text = collected_help()
    for flag in SPEC_FLAGS:
        assert flag in text, f"{flag} missing from help output"


def test_solve_happy_path(tmp_path):
    vox = tmp_path / "ball.vox"
    write_vox(gen_center_ball(8, 10.0), vox)
    report = tmp_path / "out.json"
    history = tmp_path / "hist.csv"
    code = main([
        "solve", str(vox), "--axis", "z", "--p-in", "1", "--p-out", "0",
        "--rtol", "1e-6", "--precond", "fct", "--ref", "opt",
        "--report", str(report), "--history", str(history),
    ])
    assert code == 0
    doc = json.loads(report.read_text())
    assert doc["converged"] is True
    assert doc["precond"] == "fct"
    assert 0.9 < doc["kappa_eff"] < 1.5
    lines = history.read_text().splitlines()
    assert lines[0] == "iter,relres"
    assert len(lines) == doc["iterations"] + 2


def test_solve_identical_runs_deterministic(tmp_path):
    vox = tmp_path / "ball.vox"
    write_vox(gen_center_ball(8, 0.1), vox)
    docs = []
    for name in ("a.json", "b.json"):
        path = tmp_path / name
        assert main(["solve", str(vox), "--rtol", "1e-7", "--report", str(path)]) == 0
        doc = json.loads(path.read_text())
        doc.pop("prep_seconds")
        doc.pop("exec_seconds")
        docs.append(doc)
    assert docs[0] == docs[1]


def test_equal_potentials_exit_2(tmp_path, capsys):
    vox = tmp_path / "ball.vox"
    write_vox(gen_center_ball(4, 10.0), vox)
    code = main(["solve", str(vox), "--p-in", "1", "--p-out", "1"])
    assert code == 2
    assert "p_in" in capsys.readouterr().err


def test_unknown_flag_exit_2(capsys):
    assert main(["solve", "x.vox", "--frobnicate"]) == 2


def test_missing_input_exit_3(tmp_path, capsys):
    assert main(["solve", str(tmp_path / "nope.vox")]) == 3


def test_corrupt_file_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.vox"
    bad.write_bytes(b"garbage!" * 4)
    assert main(["solve", str(bad)]) == 3
    assert "format" in capsys.readouterr().err


def test_nonconvergence_exit_1(tmp_path):
    vox = tmp_path / "ball.vox"
    write_vox(gen_center_ball(8, 100.0), vox)
    report = tmp_path / "r.json"
    code = main([
        "solve", str(vox), "--precond", "none", "--max-iter", "2",
        "--rtol", "1e-12", "--report", str(report),
    ])
    assert code == 1
    assert json.loads(report.read_text())["converged"] is False


def test_generate_then_solve_round_trip(tmp_path):
    vox = tmp_path / "gen.vox"
    assert main([
        "generate", "--config", "random-balls", "--n", "8", "--count", "3",
        "--r-min", "0.1", "--r-max", "0.3", "--kappa-inc", "5", "--seed", "42",
        "-o", str(vox),
    ]) == 0
    report = tmp_path / "r.json"
    assert main(["solve", str(vox), "--rtol", "1e-6", "--report", str(report)]) == 0
    assert json.loads(report.read_text())["converged"] is True


def test_generate_channels_misaligned_exit_2(tmp_path, capsys):
    code = main([
        "generate", "--config", "channels", "--n", "12", "--periods", "2",
        "-o", str(tmp_path / "c.vox"),
    ])
    assert code == 2


def test_generate_f32(tmp_path):
    from etchomo import read_vox

    vox = tmp_path / "f32.vox"
    assert main([
        "generate", "--config", "center-ball", "--n", "6", "--kappa-inc", "2",
        "--precision", "f32", "-o", str(vox),
    ]) == 0
    assert read_vox(vox).dtype == np.float32


def test_convergence_command(tmp_path):
    out = tmp_path / "conv"
    code = main([
        "convergence", "--config", "smooth", "--n", "8", "--n", "16",
        "--rtol", "1e-8", "-o", str(out),
    ])
    assert code == 0
    assert (out / "convergence.csv").exists()


def test_compare_command(tmp_path):
    out = tmp_path / "cmp"
    voxdir = str(out)
    code = main([
        "compare", "--config", "center-ball", "--n", "8", "--kappa-inc", "20",
        "--rtol", "1e-6", "--precond", "fct", "--precond", "jacobi",
        "-o", voxdir,
    ])
    assert code == 0
    assert (out / "history_fct.csv").exists()
    assert (out / "history_jacobi.csv").exists()


def test_channels_command(tmp_path):
    out = tmp_path / "chan"
    code = main([
        "channels", "--psi", "1", "--n", "8", "--periods", "1",
        "--rtol", "1e-5", "-o", str(out),
    ])
    assert code == 0
    assert (out / "channels.csv").exists()


def test_precision_command(tmp_path):
    out = tmp_path / "prec"
    code = main([
        "precision", "--config", "center-ball", "--n", "8", "--kappa-inc", "10",
        "--rtol", "1e-5", "--rtol", "1e-6", "-o", str(out),
    ])
    assert code == 0
    assert (out / "precision.csv").exists()


def test_bench_command(capsys):
    assert main(["bench", "--n", "8"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["n"] == 8 and doc["prep_seconds"] >= 0.0


def test_oracle_command(capsys):
    assert main(["oracle", "--max-n", "3"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") == 4 and "FAIL" not in out
