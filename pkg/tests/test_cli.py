"""CLI: subcommand behavior, config-file precedence, exit codes, and that
printed bound values match the underlying functions."""

import json

import pytest

from adasamp import bounds
from adasamp.cli import _coerce, load_config_file, main
from adasamp.data import load_csv

SMALL = ["--n", "60", "--test-n", "40", "--dim", "4", "--iters", "40",
         "--trials", "2", "--cadence", "10", "--batch", "4"]


def test_load_config_file(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("# comment\n"
                 "alpha = 1.5\n"
                 "lambda = 0.25   # alias for decay\n"
                 "M = 3.0\n"
                 "test-n = 33\n"
                 "\n"
                 "track-kl = true\n")
    values = load_config_file(p)
    assert values == {"alpha": "1.5", "decay": "0.25", "loss_bound": "3.0",
                      "test_n": "33", "track_kl": "true"}


def test_load_config_file_rejects_bare_line(tmp_path):
    p = tmp_path / "bad.cfg"
    p.write_text("alpha 1.5\n")
    with pytest.raises(ValueError, match="expected key = value"):
        load_config_file(p)


def test_coerce():
    assert _coerce("true", False) is True
    assert _coerce("off", True) is False
    assert _coerce("12", 0) == 12
    assert _coerce("0.5", 0.0) == 0.5
    assert _coerce("path/x", "") == "path/x"
    with pytest.raises(ValueError):
        _coerce("maybe", False)


def test_train_writes_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["train", *SMALL, "--out", str(out)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    agg = json.loads(lines[0])
    assert "empirical_risk_mean" in agg or agg  # aggregate is a non-empty dict
    assert (out / "report.json").exists()
    assert (out / "trial_0.metrics.jsonl").exists()
    assert (out / "trial_1.metrics.csv").exists()


def test_config_file_fills_defaults_but_flags_win(tmp_path):
    cfgfile = tmp_path / "exp.cfg"
    cfgfile.write_text("alpha = 1.5\nlambda = 0.25\niters = 40\nn = 60\n"
                       "test-n = 40\ndim = 4\ntrials = 1\ncadence = 10\n"
                       "batch = 4\n")
    out = tmp_path / "run"
    rc = main(["train", "--config", str(cfgfile), "--alpha", "3.0",
               "--out", str(out)])
    assert rc == 0
    echo = json.loads((out / "report.json").read_text())["config"]
    assert echo["alpha"] == 3.0      # explicit flag beats the file
    assert echo["decay"] == 0.25     # file beats the built-in default
    assert echo["iters"] == 40
    assert echo["n"] == 60


def test_unknown_config_key_is_exit_2(tmp_path, capsys):
    cfgfile = tmp_path / "exp.cfg"
    cfgfile.write_text("alhpa = 1.5\n")
    assert main(["train", "--config", str(cfgfile)]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_missing_config_file_is_exit_2(tmp_path, capsys):
    assert main(["train", "--config", str(tmp_path / "nope.cfg")]) == 2
    assert "error:" in capsys.readouterr().err


def test_bounds_matches_direct_call(capsys):
    rc = main(["bounds", "--formula", "kl", "--kl", "0.1", "--M", "1.0",
               "--n", "50", "--T", "20", "--beta", "0.01", "--gamma", "0.002",
               "--delta", "0.05"])
    assert rc == 0
    got = json.loads(capsys.readouterr().out)
    want = bounds.gen_bound_kl(0.1, 1.0, 50, 20, 0.01, 0.002, 0.05).to_json()
    assert got == want


def test_bounds_stability_pair(capsys):
    rc = main(["bounds", "--formula", "stab-strongly-convex", "--L", "2.0",
               "--mu", "0.5", "--n", "100", "--T", "200"])
    assert rc == 0
    got = json.loads(capsys.readouterr().out)
    beta, gamma = bounds.sgd_stability_strongly_convex(2.0, 0.5, 100, 200)
    assert got == {"formula": "stability_strongly_convex",
                   "beta": beta, "gamma": gamma}


def test_bounds_rejects_bad_inputs(capsys):
    rc = main(["bounds", "--formula", "chisq", "--chisq", "-1.0"])
    assert rc == 2
    assert capsys.readouterr().err.startswith("error:")


def test_synth_data_round_trip(tmp_path, capsys):
    path = tmp_path / "ds.csv"
    rc = main(["synth-data", "--n", "30", "--dim", "3", "--classes", "3",
               "--out", str(path)])
    assert rc == 0
    ds = load_csv(path)
    assert ds.n == 30 and ds.feature_dim == 3 and ds.num_classes == 3


def test_compare_reports_arms(capsys):
    rc = main(["compare", *SMALL, "--alphas", "1.0", "2.0"])
    assert rc == 0
    comp = json.loads(capsys.readouterr().out)
    assert set(comp["arms"]) == {"uniform", "alpha_1", "alpha_2"}
    assert comp["arms"]["uniform"]["kl_stat_mean"] == 0.0


def test_verify_sampler_passes(capsys):
    rc = main(["verify-sampler", "--sizes", "2", "7", "16",
               "--draws", "20000"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[-1] == "sampler verification passed"
    for line in lines[:-1]:
        row = json.loads(line)
        assert row["ok"] is True
        assert row["max_prob_error"] < 1e-12
        assert row["sample_touches"] == row["depth"]
        assert row["update_touches"] == row["depth"] + 1


def test_probe_stability_subcommand(capsys):
    rc = main(["probe-stability", "--n", "80", "--test-n", "40", "--dim", "3",
               "--iters", "60", "--mu", "0.2", "--trials", "1",
               "--perturbations", "3", "--probe-seeds", "2"])
    assert rc == 0
    report = json.loads(capsys.readouterr().out)
    assert report["beta_emp"] <= report["beta_bound"]
    assert report["gamma_emp"] <= report["gamma_bound"]


def test_missing_required_flag_exits_via_argparse():
    with pytest.raises(SystemExit) as exc:
        main(["synth-data"])  # --out is required
    assert exc.value.code == 2
