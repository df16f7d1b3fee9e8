import json
import subprocess
import sys
import threading

import torch

from trendnet.cli import main
from trendnet.model import TrendSTGCN, load_checkpoint, save_checkpoint
from trendnet.export import serve_lockstep


def write_crowd_tsv(path, agents=3, frames=22):
    with open(path, "w") as fh:
        for agent in range(1, agents + 1):
            lane = 1.0 + 0.8 * agent
            for k in range(frames):
                fh.write(f"{k}\t{agent}\t{0.6 + 0.25 * k:.4f}\t{lane:.4f}\n")
    return path


def test_cli_train_then_export(tmp_path):
    tsv = write_crowd_tsv(tmp_path / "crowd.tsv")
    out = tmp_path / "trained"
    code = main(["train", "--data", str(tsv), "--out", str(out),
                 "--epochs", "3", "--stride", "8", "--hidden", "8"])
    assert code == 0
    assert (out / "model.pt").exists()
    assert (out / "training_log.csv").read_text().startswith("epoch,l_p,l_f,l_v,total")

    history = tmp_path / "history_0.jsonl"
    with open(history, "w") as fh:
        for agent in (1, 2):
            positions = [[0.6 + 0.25 * k, 0.8 * agent] for k in range(8)]
            fh.write(json.dumps({"agent_id": agent, "cycle": 0,
                                 "positions": positions,
                                 "destination": [12, 2 * agent]}) + "\n")
    trends = tmp_path / "trends.jsonl"
    code = main(["export", "--model", str(out / "model.pt"),
                 "--history", str(history), "--out", str(trends)])
    assert code == 0
    assert len(trends.read_text().splitlines()) == 2


def test_cli_train_no_windows(tmp_path):
    tsv = write_crowd_tsv(tmp_path / "tiny.tsv", frames=4)
    code = main(["train", "--data", str(tsv), "--out", str(tmp_path / "x"),
                 "--epochs", "1"])
    assert code == 2


def test_lockstep_live_loop(tmp_path):
    """Simulator in lockstep mode, answered live by the serve loop."""
    scene = tmp_path / "scene.json"
    scene.write_text(json.dumps({
        "bounds": [0.0, 0.0, 8.0, 8.0], "cell_size": 0.4, "obstacles": [],
    }))
    tsv = write_crowd_tsv(tmp_path / "crowd.tsv", agents=2)
    torch.manual_seed(0)
    ckpt = tmp_path / "model.pt"
    save_checkpoint(TrendSTGCN(t_obs=8, t_p=12, hidden=8), ckpt)

    exchange = tmp_path / "exchange"
    out = tmp_path / "run"
    proc = subprocess.Popen(
        [sys.executable, "-m", "navfield.cli", "simulate",
         "--scene", str(scene), "--agents", str(tsv),
         "--mode", "data-driven", "--lockstep-dir", str(exchange),
         "--lockstep-timeout", "60", "--seed", "1", "--max-steps", "60",
         "--out", str(out)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    model = load_checkpoint(ckpt)
    served = serve_lockstep(model, exchange, cycles=100, timeout=8)
    stdout, stderr = proc.communicate(timeout=120)
    assert proc.returncode == 0, stderr
    assert served >= 1
    assert (out / "trajectory.csv").exists()
    assert any(exchange.glob("history_*.jsonl"))
    assert any(exchange.glob("trends_*.jsonl"))
