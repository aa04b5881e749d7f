import math
import os
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

import coinvent


def cli():
    exe = os.environ.get("COINVENT_CLI") or shutil.which("coinvent")
    if not exe:
        pytest.skip("COINVENT_CLI not set and no coinvent executable on PATH")
    return exe


@pytest.fixture(scope="module")
def economy(tmp_path_factory):
    data = tmp_path_factory.mktemp("economy")
    info = coinvent.simulate(data, {"inventors": "600", "firms": "12", "seed": "5"})
    assert info["inventors"] > 600
    return data


def test_critical_value_single_instrument():
    assert coinvent.effective_f_critical(1.0) == pytest.approx(23.1085, abs=1e-3)


def test_great_circle_symmetric():
    d = coinvent.great_circle_km(35.68, 139.76, 34.69, 135.50)
    assert d == pytest.approx(coinvent.great_circle_km(34.69, 135.50, 35.68, 139.76))
    assert 390 < d < 410


def test_frontiers_on_a_path():
    # 0-1-2-3-4 chain; N^0 holds the root and its neighbours.
    teams = [[0, 1], [1, 2], [2, 3], [3, 4]]
    assert coinvent.frontiers(teams, 5, 0, 3) == [[0, 1], [2], [3], [4]]


def test_novelty_ranks_ties_by_id():
    rows = [("B", "H01L 1/00", "2001-01-01"), ("A", "H01L 1/00", "2001-01-01"), ("C", "H01L 2/00", "2001-01-01")]
    assert coinvent.novelty(rows) == [0.5, 1.0, 1.0]


def test_tsls_recovers_slope():
    rng = np.random.default_rng(0)
    n = 4000
    z = rng.normal(size=(n, 2))
    common = rng.normal(size=n)
    x = z @ np.array([0.6, 0.4]) + common + rng.normal(size=n)
    y = 0.5 * x + common + rng.normal(size=n)
    w = np.ones((n, 1))
    fit = coinvent.tsls(x, w, z, y, list(range(n)))
    assert abs(fit["coef"]["endogenous"] - 0.5) < 4 * fit["se"]["endogenous"]
    assert 0.0 <= fit["hansen_j_p"] <= 1.0


def test_bad_setting_raises_config_error():
    with pytest.raises(coinvent.ConfigError):
        coinvent.simulate("unused", {"no_such_key": "1"})


def test_pipeline_from_python(economy, tmp_path):
    out = tmp_path / "run"
    res = coinvent.run_pipeline({"input_dir": str(economy), "output_dir": str(out), "value_metric": "given"})
    manifest = Path(res["manifest"]).read_text()
    assert "status\tok" in manifest
    assert res["panel_inventors"] > 0


def test_cli_pipeline_and_exit_codes(economy, tmp_path):
    exe = cli()
    ok = subprocess.run(
        [exe, "pipeline", "--input-dir", str(economy), "--output-dir", str(tmp_path / "a"), "--value-metric", "given"],
        capture_output=True,
        text=True,
    )
    assert ok.returncode == 0, ok.stderr
    assert Path(ok.stdout.strip()).name == "manifest.tsv"

    bad_config = subprocess.run([exe, "pipeline", "--set", "frontier_order=0"], capture_output=True, text=True)
    assert bad_config.returncode == 2

    missing = subprocess.run(
        [exe, "pipeline", "--input-dir", str(tmp_path / "nowhere"), "--output-dir", str(tmp_path / "b")],
        capture_output=True,
        text=True,
    )
    assert missing.returncode == 3

    unknown = subprocess.run([exe, "no-such-command"], capture_output=True, text=True)
    assert unknown.returncode == 2


def test_cli_simulate_then_ingest(tmp_path):
    exe = cli()
    data = tmp_path / "tables"
    sim = subprocess.run([exe, "simulate", "-o", str(data), "--inventors", "200", "--firms", "5"], capture_output=True)
    assert sim.returncode == 0
    for name in ("patents.tsv", "inventors.tsv", "truth.tsv"):
        assert (data / name).exists()
    ing = subprocess.run([exe, "ingest", "--input-dir", str(data)], capture_output=True, text=True)
    assert ing.returncode == 0
    assert "patents" in ing.stdout
