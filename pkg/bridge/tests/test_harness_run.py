"""Full-loop check: the evaluation harness drives a live bridge server end
to end and fills every score cell."""

import csv

import numpy as np
import pytest

from salbench.pipeline import ExperimentConfig, run_experiment
from salbridge.model import build_model
from salbridge.server import BridgeService, serve


@pytest.fixture()
def server():
    model = build_model("tinycnn", (1, 16, 16), num_classes=4, seed=0)
    server, port = serve(BridgeService(model))
    yield port
    server.shutdown()


def test_bridge_backed_run_populates_every_cell(server, tmp_path):
    cfg = ExperimentConfig.from_dict({
        "seed": 0,
        "dataset": {"kind": "synthetic", "count": 20, "shape": [1, 16, 16]},
        "model": {"kind": "bridge", "address": f"127.0.0.1:{server}"},
        "explainers": ["bridge:gradient", "bridge:grad_cam", "gaussian"],
        "metrics": ["sparseness", "complexity", "faithfulness_estimate",
                    "random_logit"],
        "baselines": ["black"],
        "metric_params": {
            "faithfulness": {"steps": 8},
            "stats": {"p_trials": 50},
        },
    })
    summary = run_experiment(cfg, tmp_path)
    assert summary["failures"] == 0

    with open(tmp_path / "scores.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    # 20 images x 3 methods x 4 metric instances, every value present
    assert len(rows) == 20 * 3 * 4
    assert all(row["value"] != "" for row in rows)

    with open(tmp_path / "matrix.csv", newline="") as fh:
        matrix = list(csv.reader(fh))
    cells = [v for row in matrix[1:] for v in row[1:]]
    assert len(cells) == 3 * 4
    assert all(np.isfinite(float(v)) for v in cells)
