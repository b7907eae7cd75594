import json
import os

import numpy as np
import pytest

from exitmc import cli


def run_cli(*argv):
    return cli.main(list(argv))


def test_reference_prints_cube_value(capsys):
    assert run_cli("reference", "--point", "0,0,0", "--t", "0") == 0
    value = float(capsys.readouterr().out.strip())
    assert abs(value - 0.435930) < 1e-5


def test_reference_slab(capsys):
    assert run_cli("reference", "--problem", "cube1d", "--point", "0", "--t", "0") == 0
    value = float(capsys.readouterr().out.strip())
    assert abs(value - 0.6994544517) < 1e-8


def test_reference_boundary_and_terminal(capsys):
    assert run_cli("reference", "--point", "1,0,0", "--t", "0") == 0
    assert abs(float(capsys.readouterr().out)) < 1e-12
    assert run_cli("reference", "--point", "0,0,0", "--t", "1") == 0
    assert abs(float(capsys.readouterr().out)) < 1e-12


def test_reference_rejects_outside_point(capsys):
    assert run_cli("reference", "--point", "1.5,0,0") == cli.EXIT_CONFIG
    assert run_cli("reference", "--t", "2.0") == cli.EXIT_CONFIG
    assert run_cli("reference", "--problem", "ball3d") == cli.EXIT_CONFIG


def test_levels_csv_schema_and_determinism(tmp_path, capsys):
    out_a = str(tmp_path / "a.csv")
    out_b = str(tmp_path / "b.csv")
    args = ["levels", "--estimator", "orig,new1", "--levels", "0:1",
            "--samples", "500", "--seed", "5"]
    assert run_cli(*args, "--out", out_a) == 0
    assert run_cli(*args, "--out", out_b) == 0
    text_a = open(out_a).read()
    assert text_a == open(out_b).read()
    lines = text_a.strip().split("\n")
    assert lines[0] == cli.LEVELS_HEADER
    assert len(lines) == 1 + 2 * 2
    first = lines[1].split(",")
    assert first[0] == "orig" and first[1] == "0"
    assert int(first[3]) == 500


def test_levels_sidecar_echoes_manifest(tmp_path):
    out = str(tmp_path / "lv.csv")
    run_cli("levels", "--levels", "0,1", "--samples", "300", "--seed", "9",
            "--out", out)
    meta = json.load(open(out + ".meta.json"))
    assert meta["seed"] == 9
    assert meta["subcommand"] == "levels"
    assert tuple(meta["levels"]) == (0, 1)


def test_levels_rejects_bad_estimator(tmp_path):
    code = run_cli("levels", "--estimator", "fancy", "--levels", "0:1",
                   "--samples", "100", "--out", str(tmp_path / "x.csv"))
    assert code == cli.EXIT_CONFIG


def test_levels_requires_flags():
    with pytest.raises(SystemExit) as exc:
        run_cli("levels", "--samples", "100", "--out", "x.csv")
    assert exc.value.code == cli.EXIT_CONFIG


def test_run_writes_summary_and_samples(tmp_path):
    out = str(tmp_path / "run.csv")
    assert run_cli("run", "--estimator", "new2", "--eps", "0.04,0.02",
                   "--seed", "2", "--out", out) == 0
    lines = open(out).read().strip().split("\n")
    assert lines[0] == cli.RUN_HEADER
    assert len(lines) == 3
    row = lines[1].split(",")
    eps, estimate, error = float(row[1]), float(row[2]), float(row[3])
    total_cost, eps2 = int(row[5]), float(row[6])
    assert eps == 0.04
    assert abs(error - (estimate - 0.43592975014055124)) < 1e-9
    assert eps2 == pytest.approx(eps ** 2 * total_cost, rel=1e-9)

    sample_lines = open(str(tmp_path / "run_samples.csv")).read().strip().split("\n")
    assert sample_lines[0] == cli.SAMPLES_HEADER
    # one row per level per eps; both runs chose at least L_min = 2
    assert len(sample_lines) >= 1 + 3 * 2


def test_run_is_thread_count_invariant(tmp_path):
    out1 = str(tmp_path / "t1.csv")
    out8 = str(tmp_path / "t8.csv")
    base = ["run", "--estimator", "new2", "--eps", "0.04", "--seed", "3"]
    assert run_cli(*base, "--threads", "1", "--out", out1) == 0
    assert run_cli(*base, "--threads", "8", "--out", out8) == 0
    assert open(out1).read() == open(out8).read()


def test_run_level_cap_exit_code(tmp_path, capsys):
    out = str(tmp_path / "cap.csv")
    code = run_cli("run", "--estimator", "orig", "--eps", "0.002",
                   "--l-max", "2", "--seed", "1", "--out", out)
    assert code == cli.EXIT_LEVEL_CAP
    # summary still written, without the failed row
    lines = open(out).read().strip().split("\n")
    assert lines[0] == cli.RUN_HEADER
    assert len(lines) == 1


def test_run_rejects_bad_h0(tmp_path):
    code = run_cli("run", "--eps", "0.04", "--h0", "0.3",
                   "--out", str(tmp_path / "x.csv"))
    assert code == cli.EXIT_CONFIG


def test_io_error_exit_code(tmp_path):
    code = run_cli("levels", "--levels", "0:0", "--samples", "100",
                   "--out", str(tmp_path / "missing" / "x.csv"))
    assert code == cli.EXIT_IO


def test_config_file_defaults_and_flag_precedence(tmp_path, capsys):
    cfg = tmp_path / "exitmc.cfg"
    cfg.write_text("truncation = 15\nt = 0.0\n# comment\n")
    assert run_cli("reference", "--config", str(cfg)) == 0
    v15 = float(capsys.readouterr().out)
    assert run_cli("reference", "--config", str(cfg), "--truncation", "39") == 0
    v39 = float(capsys.readouterr().out)
    assert v15 != v39
    assert abs(v39 - 0.435930) < 1e-5


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign here\n")
    assert run_cli("reference", "--config", str(bad)) == cli.EXIT_CONFIG
    assert run_cli("reference", "--config", str(tmp_path / "nope.cfg")) == cli.EXIT_CONFIG
