import json
import subprocess
import sys

import pytest

from sgflow import cli


def run(args, tmp_path, name="run"):
    out = tmp_path / name
    code = cli.main(list(args) + ["--out", str(out)])
    return code, out


def manifest(out):
    return json.loads((out / "manifest.json").read_text())


def test_config_round_trip():
    cfg = cli.RunConfig("picard", R=0.5, Rs=[1.0, 0.25], init="sine:0.02,1")
    again = cli.RunConfig.from_json(json.loads(cfg.dumps()))
    assert again == cfg


def test_config_rejections(tmp_path):
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_json({"subcommand": "picard", "colour": 1})
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.from_json({"R": 1.0})
    with pytest.raises(cli.ConfigError):
        cli.RunConfig("picard", R=-1.0)
    with pytest.raises(cli.ConfigError):
        cli.RunConfig("norms", flavor="Y")
    empty = tmp_path / "empty.json"
    empty.write_text("")
    with pytest.raises(cli.ConfigError):
        cli.RunConfig.load(empty)


def test_empty_config_exits_usage(tmp_path, capsys):
    empty = tmp_path / "empty.json"
    empty.write_text("  \n")
    code, _ = run(["picard", "--config", str(empty)], tmp_path)
    assert code == cli.EXIT_USAGE
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ConfigError"


def test_bad_usage_exits_usage(tmp_path):
    assert cli.main(["nosuch"]) == cli.EXIT_USAGE
    assert cli.main([]) == cli.EXIT_USAGE
    code, _ = run(["spde", "--paths", "0"], tmp_path)
    assert code == cli.EXIT_USAGE


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for sub in cli.SUBCOMMANDS:
        assert sub in text


def test_picard_run_and_manifest_reproducible(tmp_path):
    code, out = run(["picard", "--init", "sine:0.01,1", "--n", "64"], tmp_path, "a")
    assert code == cli.EXIT_OK
    conv = json.loads((out / "convergence.json").read_text())
    assert conv["monotone"]
    assert conv["deltas"][-1] < 1e-12
    assert all(r < 0.99 for r in conv["ratios"][1:])
    assert (out / "snapshots.csv").exists()
    code, again = run(["picard", "--config", str(out / "config.json")], tmp_path, "b")
    assert code == cli.EXIT_OK
    m1, m2 = manifest(out), manifest(again)
    strip = lambda m: [f for f in m["files"] if f["file"] != "config.json"]
    assert strip(m1) == strip(m2)
    c1 = json.loads((out / "config.json").read_text())
    c2 = json.loads((again / "config.json").read_text())
    assert c1.pop("out") != c2.pop("out")
    assert c1 == c2


def test_flags_override_config(tmp_path):
    code, out = run(["picard", "--n", "32", "--R", "0.5"], tmp_path, "a")
    code, out2 = run(["picard", "--config", str(out / "config.json"), "--R", "0.75"], tmp_path, "b")
    cfg = json.loads((out2 / "config.json").read_text())
    assert cfg["n"] == 32 and cfg["R"] == 0.75


def test_divergence_exit_code(tmp_path, capsys):
    code, out = run(["picard", "--init", "sine:3,1", "--n", "64", "--max-iter", "6"], tmp_path)
    assert code == cli.EXIT_DIVERGED
    err = json.loads((out / "error.json").read_text())
    assert err["error"] == "PicardDivergenceError"
    assert len(err["deltas"]) >= 1


def test_numerical_failure_exit_code(tmp_path):
    code, out = run(["kernel", "--z-max", "16"], tmp_path)
    assert code == cli.EXIT_NUMERIC
    assert (out / "error.json").exists()


def test_gallery_indicator(tmp_path, consts):
    code, out = run(["gallery", "--item", "indicator", "--Rs", "1,0.25,0.0625"], tmp_path)
    assert code == cli.EXIT_OK
    rep = json.loads((out / "membership.json").read_text())
    assert all(v > 0.9 * consts.g0 for _, v in rep["profile"])
    assert (out / "profile.csv").read_text().startswith("R,value")


def test_norms_and_oracle(tmp_path):
    code, out = run(["norms", "--init", "step:0.1", "--Rs", "1,0.5"], tmp_path, "n")
    assert code == cli.EXIT_OK
    rows = json.loads((out / "norms.json").read_text())
    assert len(rows) == 2
    code, out = run(["oracle", "--init", "sine:0.1,1", "--n", "64", "--steps", "200"], tmp_path, "o")
    assert code == cli.EXIT_OK
    assert json.loads((out / "oracle.json").read_text())["steps"] == 200


def test_spde_outputs(tmp_path):
    code, out = run(["spde", "--n", "32", "--paths", "2", "--cutoff", "4", "--J", "16",
                     "--levels", "10", "--Rs", "1,0.5"], tmp_path)
    assert code == cli.EXIT_OK
    lines = (out / "paths.csv").read_text().strip().splitlines()
    assert len(lines) == 1 + 2 * 2
    assert (out / "ensemble.csv").exists()


def test_verify_single_criterion(tmp_path, capsys):
    code, out = run(["verify", "--criteria", "1"], tmp_path)
    assert code == cli.EXIT_OK
    assert "[PASS]" in capsys.readouterr().out
    rec = json.loads((out / "acceptance.json").read_text())
    assert rec[0]["passed"]


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "sgflow.cli", "kernel", "--out", str(tmp_path / "k")],
                         capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "k" / "constants.json").exists()
