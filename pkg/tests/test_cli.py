import json

import pytest

from lprvqa.cli import ExperimentConfig, ConfigError, config_from_dict, main
from lprvqa.dataset import load_manifest
from lprvqa.metrics import read_results_csv

TINY = {
    "synthetic": {"n_videos": 60, "frame_dim": 5, "video_dim": 2, "fps": 10.0, "duration": 1.0},
    "train": {"f_widths": [6, 6], "g_hidden": 6, "warmup_iters": 10, "ssl_iters": 10, "K": 5},
}


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(TINY))
    return path


def _run(*argv):
    return main([str(a) for a in argv])


def test_run_cardinality_and_determinism(tmp_path, cfg_file):
    args = ["--config", cfg_file, "--seeds", 3, "--labels", 8, "--methods", "supervised,LPR"]
    assert _run("run", *args, "--out", tmp_path / "a") == 0
    assert _run("run", *args, "--out", tmp_path / "b", "--jobs", 2) == 0
    rows = read_results_csv(tmp_path / "a" / "results.csv")
    assert len(rows) == 6
    assert len(read_results_csv(tmp_path / "a" / "medians.csv")) == 2
    assert [r["method"] for r in rows] == ["supervised"] * 3 + ["LPR"] * 3
    for name in ("results.csv", "medians.csv", "reports/LPR_L8_s2.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    report = json.loads((tmp_path / "a" / "reports" / "LPR_L8_s2.json").read_text())
    assert report["config"]["lam"] == 0.1 and report["split_seed"] == 2


def test_unknown_method_exits_2(tmp_path, cfg_file, capsys):
    code = _run("run", "--config", cfg_file, "--methods", "LPR,Nope", "--out", tmp_path)
    assert code == 2
    assert "Nope" in capsys.readouterr().err


def test_bad_config_key_exits_2(tmp_path, capsys):
    path = tmp_path / "c.json"
    path.write_text(json.dumps({"train": {"lamda": 0.2}}))
    assert _run("run", "--config", path, "--out", tmp_path) == 2
    assert "lamda" in capsys.readouterr().err


def test_missing_manifest_exits_2(tmp_path):
    assert _run("run", "--manifest", tmp_path / "none.csv", "--out", tmp_path) == 2


def test_set_overrides_train_config(tmp_path, cfg_file):
    out = tmp_path / "o"
    assert _run("run", "--config", cfg_file, "--seeds", 1, "--labels", 8, "--methods", "LPR",
                "--set", "tau=0.25", "--set", "K=2", "--out", out) == 0
    rep = json.loads((out / "reports" / "LPR_L8_s0.json").read_text())
    assert rep["config"]["tau"] == 0.25 and rep["refresh_iters"] == list(range(0, 10, 2))


def test_ablate_emits_five_rows(tmp_path, cfg_file):
    out = tmp_path / "abl"
    assert _run("ablate", "--config", cfg_file, "--seeds", 2, "--labels", 8, "--out", out) == 0
    lines = (out / "ablation.csv").read_text().splitlines()
    assert len(lines) == 6
    assert lines[1].startswith("full,True,True,True,True,")
    assert lines[5].startswith("no-threshold-no-rank,True,True,False,False,")


def test_sweep_tau_sorted_and_matches_no_threshold(tmp_path, cfg_file):
    out = tmp_path / "tau"
    assert _run("sweep-tau", "--config", cfg_file, "--seeds", 2, "--labels", 8,
                "--taus", "0.3,0,0.2,0.1", "--out", out) == 0
    lines = (out / "sweep_tau.csv").read_text().splitlines()
    assert [ln.split(",")[0] for ln in lines[1:]] == ["0.0", "0.1", "0.2", "0.3"]
    abl = tmp_path / "abl"
    assert _run("ablate", "--config", cfg_file, "--seeds", 2, "--labels", 8, "--out", abl) == 0
    tau0 = lines[1].split(",")[3:]
    no_thr = (abl / "ablation.csv").read_text().splitlines()[4].split(",")[-2:]
    assert tau0[-2:] == no_thr


def test_sweep_fps_points(tmp_path, cfg_file):
    out = tmp_path / "fps"
    assert _run("sweep-fps", "--config", cfg_file, "--seeds", 1, "--labels", 8, "--out", out) == 0
    lines = (out / "sweep_fps.csv").read_text().splitlines()
    assert [float(ln.split(",")[0]) for ln in lines[1:]] == [0.25, 0.5, 1.0, 2.0, 4.0]


def test_trace_rank_accuracy(tmp_path, cfg_file):
    out = tmp_path / "tr"
    assert _run("trace-rank-acc", "--config", cfg_file, "--seeds", 2, "--labels", 8,
                "--set", "ssl_iters=20", "--out", out) == 0
    rows = (out / "rank_accuracy.csv").read_text().splitlines()[1:]
    assert len(rows) == 2 * 4
    accs = [r.split(",")[-1] for r in rows]
    assert all(a == "" or 0.0 <= float(a) <= 1.0 for a in accs)
    med = (out / "rank_accuracy_median.csv").read_text().splitlines()[1:]
    assert [int(r.split(",")[1]) for r in med] == [0, 5, 10, 15]


def test_trace_needs_true_mos(tmp_path, cfg_file, capsys):
    out = tmp_path / "data"
    assert _run("synth-gen", "--config", cfg_file, "--out", out) == 0
    manifest = out / "manifest.csv"
    lines = manifest.read_text().splitlines()
    lines[5] = lines[5].rsplit(",", 1)[0] + ","
    manifest.write_text("\n".join(lines) + "\n")
    assert _run("trace-rank-acc", "--manifest", manifest, "--config", cfg_file, "--out", tmp_path / "t") == 2
    assert "mos" in capsys.readouterr().err


def test_synth_gen_round_trip(tmp_path, cfg_file):
    out = tmp_path / "data"
    assert _run("synth-gen", "--config", cfg_file, "--seed", 4, "--out", out) == 0
    recs = load_manifest(out / "manifest.csv")
    assert len(recs) == 60 and recs[0].frames.shape == (10, 5)
    res = tmp_path / "res"
    assert _run("run", "--manifest", out / "manifest.csv", "--config", cfg_file, "--seeds", 1,
                "--labels", 8, "--out", res) == 0
    assert read_results_csv(res / "results.csv")[0]["dataset"] == "data"


def test_config_defaults():
    exp = ExperimentConfig()
    assert exp.labels == (30, 60, 120) and exp.seeds == tuple(range(10))
    assert config_from_dict({"seeds": 3}).seeds == (0, 1, 2)
    with pytest.raises(ConfigError):
        config_from_dict({"labels": []})
    with pytest.raises(ConfigError):
        config_from_dict({"synthetic": {"bogus": 1}})
