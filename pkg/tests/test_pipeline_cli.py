import json
import subprocess
import sys

import pytest
import yaml

from hourcast.cli import main
from hourcast.exceptions import ConfigError
from hourcast.pipeline import RunConfig

TINY = {
    "synth": {"topics": 2, "days": 20, "seed": 5},
    "features": {"platforms": ["T"], "lookback": 24},
    "splits": {"train_days": 12, "val_days": 3, "test_days": 4},
    "gbt": {"grid": {"colsample": [1.0], "n_trees": [20], "learning_rate": [0.2],
                     "l2_lambda": [1.0], "max_depth": [3]}},
    "simulation": {"trials": 2},
}


def write_cfg(path, **extra):
    cfg = dict(TINY, **extra)
    path.write_text(yaml.safe_dump(cfg))
    return path


@pytest.fixture(scope="module")
def staged(tmp_path_factory):
    root = tmp_path_factory.mktemp("staged")
    cfg = write_cfg(root / "cfg.yaml", output_dir=str(root / "run"))
    codes = {}
    for stage in ("ingest", "featurize", "train", "forecast", "simulate", "evaluate", "report"):
        args = [stage, "--config", str(cfg)]
        if stage in ("train", "simulate"):
            args += ["--seed", "3"]
        codes[stage] = main(args)
    return root, codes


def test_staged_cli_run_succeeds(staged):
    _, codes = staged
    assert codes == dict.fromkeys(codes, 0)


def test_bundle_contents(staged):
    run = staged[0] / "run"
    assert (run / "config.echo.json").exists()
    assert (run / "model" / "manifest.json").exists()
    header = (run / "reports" / "rank_table.csv").read_text().splitlines()[0]
    assert header.startswith("rank,model,RMSE")
    assert sorted(p.name for p in (run / "reports" / "per_topic").iterdir()) == ["topic00.csv", "topic01.csv"]
    nets = sorted(p.name for p in (run / "reports" / "network").iterdir())
    assert nets == [f"topic0{t}_trial{k}.json" for t in range(2) for k in range(2)]
    summary = json.loads((run / "reports" / "network_summary.json").read_text())
    assert set(summary["topics"]) == {"topic00", "topic01"}
    assert summary["n_days"] == 8
    assert (run / "reports" / "report.md").read_text().startswith("#")
    sims = list((run / "simulations").rglob("*.jsonl"))
    assert len(sims) == 2 * 4 * 2  # topics x test days x trials


def test_rank_table_lists_model_and_baselines(staged):
    rows = (staged[0] / "run" / "reports" / "rank_table.csv").read_text().splitlines()[1:]
    names = {r.split(",")[1] for r in rows}
    assert names == {"GBT-T-24", "Persistence", "AR", "MA", "ARMA", "ARIMA"}


def test_one_shot_run_matches_staged(staged, tmp_path):
    cfg = write_cfg(tmp_path / "cfg.yaml", output_dir=str(tmp_path / "run"))
    assert main(["run", "--config", str(cfg), "--seed", "3"]) == 0
    a = (staged[0] / "run" / "reports" / "rank_table.csv").read_bytes()
    b = (tmp_path / "run" / "reports" / "rank_table.csv").read_bytes()
    assert a == b


def test_pinned_key_is_config_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "cfg.yaml", output_dir=str(tmp_path / "run"))
    raw = yaml.safe_load(cfg.read_text())
    raw["gbt"]["pinned"] = {"subsample": 0.5}
    cfg.write_text(yaml.safe_dump(raw))
    assert main(["ingest", "--config", str(cfg)]) == 2
    assert "subsample" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"gbt": {"pinned": {"loss": "huber"}}})


def test_unknown_key_is_config_error(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("learning_rat: 0.1\n")
    assert main(["ingest", "--config", str(cfg)]) == 2


def test_missing_events_is_data_error(tmp_path, capsys):
    missing = tmp_path / "nowhere" / "events.jsonl"
    code = main(["ingest", "--events", str(missing), "--output-dir", str(tmp_path / "run")])
    assert code == 3
    assert str(missing) in capsys.readouterr().err


def test_seed_required_for_train_and_simulate(tmp_path):
    for stage in ("train", "simulate", "run"):
        with pytest.raises(SystemExit) as exc:
            main([stage, "--output-dir", str(tmp_path)])
        assert exc.value.code == 2


def test_stage_out_of_order_fails(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "cfg.yaml", output_dir=str(tmp_path / "run"))
    assert main(["ingest", "--config", str(cfg)]) == 0
    code = main(["forecast", "--config", str(cfg)])
    assert code in (3, 4)
    assert "error:" in capsys.readouterr().err


def test_synth_subcommand_and_console_entry(tmp_path):
    out = tmp_path / "ev.jsonl"
    assert main(["synth", "--out", str(out), "--days", "2", "--seed", "1"]) == 0
    assert out.read_text().count("\n") > 500
    proc = subprocess.run([sys.executable, "-m", "hourcast.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    for cmd in ("ingest", "synth", "featurize", "train", "forecast", "simulate", "evaluate", "report"):
        assert cmd in proc.stdout
