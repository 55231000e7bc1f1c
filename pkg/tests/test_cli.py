from __future__ import annotations

import hashlib

import numpy as np
import pytest

from snakerange.cache import CacheError, load_cloud, save_cloud
from snakerange.cli import main
from snakerange.config import ConfigError, parse_config
from snakerange.experiments import experiment_names, make_config, run, run_experiment
from snakerange.rng import chunk_sizes, parallel_map, stream
from snakerange.snake import PointCloud


def test_config_parse_and_include(tmp_path):
    (tmp_path / "base.conf").write_text("seed = 3\nM = 100  # trailing comment\n\n# full comment\n")
    (tmp_path / "run.conf").write_text("include = base.conf\nM = 200\nexperiment = moment-identity\n")
    assert parse_config(tmp_path / "run.conf") == {"seed": "3", "M": "200", "experiment": "moment-identity"}


def test_config_errors(tmp_path):
    (tmp_path / "a.conf").write_text("include = b.conf\n")
    (tmp_path / "b.conf").write_text("include = a.conf\n")
    with pytest.raises(ConfigError, match="cycle"):
        parse_config(tmp_path / "a.conf")
    (tmp_path / "bad.conf").write_text("no equals sign\n")
    with pytest.raises(ConfigError, match="bad.conf:1"):
        parse_config(tmp_path / "bad.conf")
    with pytest.raises(ConfigError):
        parse_config(tmp_path / "missing.conf")


def test_config_typing_and_unknown_keys():
    cfg = make_config("moment-identity", {"N_gamma": "80", "lam_list": "0.2, 0.3", "seed": "7"})
    assert cfg.params["N_gamma"] == 80 and cfg.params["lam_list"] == (0.2, 0.3) and cfg.seed == 7
    with pytest.raises(ConfigError, match="valid keys"):
        make_config("moment-identity", {"bogus": "1"})
    with pytest.raises(ConfigError):
        make_config("moment-identity", {"N_gamma": "many"})
    with pytest.raises(ConfigError):
        make_config("moment-identity", {"experiment": "feynman-kac"})
    assert make_config("moment-identity", {"seed": "1"}, seed=5).seed == 5


def test_cache_round_trip_is_bit_exact(tmp_path):
    pts = stream(0).normal(size=(257, 5))
    pts[0, 0] = -0.0
    pts[1, 1] = 5e-324
    save_cloud(PointCloud(pts, "seed=0 n=257 café"), tmp_path / "c.bin")
    back = load_cloud(tmp_path / "c.bin", d=5)
    assert back.points.tobytes() == pts.tobytes()
    assert back.provenance == "seed=0 n=257 café"
    save_cloud(PointCloud(np.zeros((0, 3))), tmp_path / "e.bin")
    assert len(load_cloud(tmp_path / "e.bin")) == 0


def test_cache_errors(tmp_path):
    path = tmp_path / "c.bin"
    save_cloud(PointCloud(np.ones((10, 3)), "x"), path)
    with pytest.raises(CacheError, match="dimension mismatch"):
        load_cloud(path, d=5)
    data = path.read_bytes()
    for cut in (5, 40, len(data) - 1):
        (tmp_path / "t.bin").write_bytes(data[:cut])
        with pytest.raises(CacheError, match="truncated|mismatch"):
            load_cloud(tmp_path / "t.bin")
    (tmp_path / "m.bin").write_bytes(b"XXXX" + data[4:])
    with pytest.raises(CacheError, match="magic"):
        load_cloud(tmp_path / "m.bin")


def test_streams_and_parallel_map():
    a = stream(1, 2).random(5)
    assert np.array_equal(a, stream(1, 2).random(5))
    assert not np.array_equal(a, stream(1, 3).random(5))
    assert chunk_sizes(10, 4) == [4, 4, 2] and chunk_sizes(0, 3) == []
    assert parallel_map(abs, [-1, 2, -3], workers=2) == [1, 2, 3]


def test_unknown_experiment_exit_code(capsys):
    assert main(["no-such-thing"]) == 2
    err = capsys.readouterr().err
    for name in experiment_names():
        assert name in err


def test_bad_set_and_config_exit_code(capsys, tmp_path):
    assert main(["moment-identity", "--set", "novalue"]) == 2
    assert main(["moment-identity", "--set", "bogus=1", "--out-dir", str(tmp_path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_cli_run_writes_csv_and_manifest(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["moment-identity", "--out-dir", str(out), "--set", "lam_list=0.1,0.5"]) == 0
    text = capsys.readouterr().out
    assert "PASS  second moment t=1/2 T=3" in text
    manifest = (out / "moment-identity.manifest").read_text()
    digest = hashlib.sha256((out / "moment-identity.csv").read_bytes()).hexdigest()
    assert f"file.moment-identity.csv=sha256:{digest}" in manifest
    assert "status=PASS" in manifest and "wall_time" not in manifest
    assert "config.lam_list=0.1,0.5" in manifest


def test_failing_checks_give_exit_code_one(tmp_path):
    # sixty terms cannot reach 1e-10 at lambda = 0.9
    assert main(["moment-identity", "--out-dir", str(tmp_path), "--set", "lam_list=0.9"]) == 1


def test_reruns_are_byte_identical(tmp_path):
    overrides = {"M": "2000", "n_cap": "4096", "seed": "11"}
    for sub in ("a", "b"):
        run(make_config("occupation-moment-mc", overrides, out_dir=str(tmp_path / sub)))
    for name in ("occupation-moment-mc.csv", "occupation-moment-mc.manifest"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    run(make_config("occupation-moment-mc", dict(overrides, seed="12"), out_dir=str(tmp_path / "c")))
    assert ((tmp_path / "a" / "occupation-moment-mc.csv").read_bytes()
            != (tmp_path / "c" / "occupation-moment-mc.csv").read_bytes())


def test_worker_count_does_not_change_results():
    overrides = {"realizations": "3", "delta": "1e-3", "M": "2000"}
    one = run_experiment(make_config("sbm-support-exponent", overrides, workers=1))
    two = run_experiment(make_config("sbm-support-exponent", overrides, workers=2))
    assert one.rows == two.rows


def test_nondeterministic_mode_records_wall_time(tmp_path):
    run(make_config("moment-identity", {"lam_list": "0.1"}, out_dir=str(tmp_path), deterministic=False))
    assert "wall_time=" in (tmp_path / "moment-identity.manifest").read_text()


def test_experiment_failures_are_wrapped():
    with pytest.raises(RuntimeError, match="moment-identity"):
        run_experiment(make_config("moment-identity", {"windows": "3:1"}))
