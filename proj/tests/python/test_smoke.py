import json
import os
import subprocess

import numpy as np
import pytest

import ncpd


def test_generate_and_baseline_localises_easy_merge():
    net = ncpd.generate_sequence("merge", 0.9, n=30, T=40, tau=20, seed=3)
    assert len(net) == 40
    assert net.change_points == [20]
    a = net.adjacency(1)
    assert a.shape == (30, 30)
    assert np.allclose(a, a.T)
    stat = ncpd.baseline_statistic("frobenius", net, 4)
    assert stat["orientation"] == "distance"
    tau_hat = ncpd.localize(stat["first"], stat["values"], distance=True)
    assert ncpd.localisation_error(tau_hat, 20) <= 2


def test_network_round_trip(tmp_path):
    adj = [np.eye(3) * 0.0, np.ones((3, 3)) - np.eye(3)]
    net = ncpd.DynamicNetwork(adj, [2])
    path = str(tmp_path / "net.jsonl")
    ncpd.save_network(path, net)
    back = ncpd.load_network(path)
    assert back.change_points == [2]
    assert np.array_equal(back.adjacency(2), adj[1])


def test_metrics_and_detection():
    assert ncpd.adjusted_f1([52], [50], 100) == (1.0, 1.0, 1.0)
    values = [0.9, 0.9, 0.9, 0.2, 0.9]
    assert ncpd.detect_online(3, values, 2, 0.5) == [6]
    theta, f1 = ncpd.calibrate_threshold(3, values, [6], 2)
    assert f1 == 1.0
    assert 0.2 < theta < 0.9


def test_errors_are_translated():
    with pytest.raises(ncpd.NcpdError, match="parameter"):
        ncpd.baseline_statistic("frobenius", ncpd.generate_sequence("merge", 0.5, n=10, T=5), 5)
    with pytest.raises(ncpd.NcpdError):
        ncpd.load_network("/nonexistent/file.jsonl")


def test_cli_in_process(tmp_path):
    code, out, err = ncpd.run_cli(["generate", "--p", "0.5", "--n", "12", "--T", "20", "--output-dir", str(tmp_path)])
    assert code == 0, err
    assert json.loads(out)["command"] == "generate"
    code, _, err = ncpd.run_cli(["detect", "--network", str(tmp_path / "nope.jsonl"), "--method", "lad"])
    assert code == 3
    assert json.loads(err)["error"] == "io"


@pytest.mark.skipif("NCPD_CLI" not in os.environ, reason="CLI binary path not provided")
def test_cli_binary_error_json(tmp_path):
    proc = subprocess.run([os.environ["NCPD_CLI"], "generate", "--n", "10"], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["error"] == "config"
    proc = subprocess.run(
        [os.environ["NCPD_CLI"], "generate", "--h", "0.2", "--scenario", "swaps", "--n", "20", "--T", "12"],
        capture_output=True, text=True, env={**os.environ, "NCPD_OUTPUT_DIR": str(tmp_path)},
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "sequence_0.jsonl").exists()
