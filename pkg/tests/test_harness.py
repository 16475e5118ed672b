import numpy as np
import pytest

from agelab.harness.checkpoint import (
    BadMagicError,
    TruncatedCheckpointError,
    VersionMismatchError,
    decode,
    encode,
    load_checkpoint,
    save_checkpoint,
)
from agelab.harness.cli import main
from agelab.harness.config import parse_config, parse_experiment_name
from agelab.harness.experiments import run_experiment
from agelab.harness.io import read_csv, verify_manifest, write_csv
from agelab.harness.plotting import SeriesSpec, emit_plot
from agelab.neural import QNetwork, forward
from agelab.rng import SplitMix64
from agelab.trainer import ConfigError

SWEEP_INI = """
[experiment]
name = tabular-sweep
seeds = 1, 2

[tabular]
episodes = 60

[sweep]
mdps = chain
p_values = 0.0, 0.9
"""


def test_parse_config_values():
    cfg = parse_config("""
[experiment]
name = attack-train:p=0.4
seeds = 3, 4

[trainer]
batch_size = 64
total_timesteps = 2e4
grad_clip = none
layer_dims = 4, 32, 2

[attack]
mode = targeted
oracle_fallback = false
""")
    assert cfg.kind == "attack-train" and cfg.argument == 0.4
    assert cfg.seeds == (3, 4)
    assert cfg.trainer.batch_size == 64 and cfg.trainer.total_timesteps == 20_000
    assert cfg.trainer.grad_clip is None and cfg.trainer.layer_dims == (4, 32, 2)
    assert cfg.attack.mode == "targeted" and cfg.attack.oracle_fallback is False


def test_config_lists_every_error():
    with pytest.raises(ConfigError) as info:
        parse_config("""
[experiment]
name = nominal-epsgreedy
colour = blue

[trainer]
batch_sise = 3
gamma = high

[bogus]
x = 1
""")
    msg = str(info.value)
    for needle in ("colour", "batch_sise", "gamma", "[bogus]"):
        assert needle in msg


def test_experiment_names():
    assert parse_experiment_name("resilience:age") == ("resilience", "age")
    assert parse_experiment_name("nominal-paramnoise") == ("nominal-paramnoise", None)
    for bad in ("nominal-sarsa", "resilience:robot", "attack-train:p=1.5"):
        with pytest.raises(ConfigError):
            parse_experiment_name(bad)


def test_checkpoint_round_trip(tmp_path):
    rng = SplitMix64(3)
    net = QNetwork.initialize((4, 64, 64, 2), rng)
    path = save_checkpoint(net, tmp_path / "net.ageq")
    back = load_checkpoint(path)
    x = rng.normal(size=(100, 4))
    np.testing.assert_array_equal(forward(net, x), forward(back, x))
    relu = load_checkpoint(path, activation="relu")
    assert relu.activation == "relu"


def test_checkpoint_errors():
    blob = encode(QNetwork.initialize((4, 8, 2), SplitMix64(0)))
    with pytest.raises(BadMagicError):
        decode(b"XGEQ" + blob[4:])
    with pytest.raises(VersionMismatchError):
        decode(blob[:4] + (7).to_bytes(4, "little") + blob[8:])
    for cut in (2, 6, 10, 20, len(blob) - 1):
        with pytest.raises(TruncatedCheckpointError):
            decode(blob[:cut])


def test_csv_has_schema_header(tmp_path):
    path = write_csv(tmp_path / "a.csv", "demo/v1", ("x", "y"), [(1, 0.5), (2, float("nan"))])
    assert path.read_text().splitlines()[0] == "#schema=demo/v1"
    schema, cols = read_csv(path)
    assert schema == "demo/v1" and cols["y"] == ["0.5", "nan"]


def test_plot_constant_series_and_determinism(tmp_path):
    csv_path = write_csv(tmp_path / "c.csv", "demo/v1", ("episode", "reward"),
                         [(i, 200.0) for i in range(50)])
    info = emit_plot(csv_path, "episode:reward", tmp_path / "a.svg")
    assert info.ylim[0] < 200.0 < info.ylim[1]
    emit_plot(csv_path, "episode:reward", tmp_path / "b.svg")
    assert (tmp_path / "a.svg").read_bytes() == (tmp_path / "b.svg").read_bytes()
    assert b"<svg" in (tmp_path / "a.svg").read_bytes()


def test_plot_step_function_ramp(tmp_path):
    rows = [(i, 0.0 if i < 300 else 1.0) for i in range(600)]
    csv_path = write_csv(tmp_path / "s.csv", "demo/v1", ("episode", "reward"), rows)
    info = emit_plot(csv_path, "episode:reward@100", tmp_path / "s.svg")
    y = info.series["reward"]
    ramp = np.flatnonzero((y > 0) & (y < 1))
    assert ramp[0] == 300 and ramp[-1] == 398  # 99 intermediate values, reaching 1 at 399
    assert y[399] == 1.0


def test_plot_missing_column(tmp_path):
    csv_path = write_csv(tmp_path / "m.csv", "demo/v1", ("a", "b"), [(1, 2)])
    with pytest.raises(KeyError):
        emit_plot(csv_path, "a:c")
    with pytest.raises(ValueError):
        SeriesSpec.parse("nocolon")


def test_sweep_run_is_reproducible_and_manifested(tmp_path):
    cfg = parse_config(SWEEP_INI)
    first = run_experiment(cfg, tmp_path / "one")
    second = run_experiment(cfg, tmp_path / "two")
    assert verify_manifest(first) == []
    for name in ("sweep.csv", "rates.csv", "rates_chain.svg"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    (first / "stray.txt").write_text("x")
    (first / "sweep.csv").write_text("tampered")
    problems = verify_manifest(first)
    assert "unlisted: stray.txt" in problems and "checksum mismatch: sweep.csv" in problems


def test_cli_run_and_plot(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("AGELAB_OUTPUT", str(tmp_path))
    ini = tmp_path / "sweep.ini"
    ini.write_text(SWEEP_INI)
    assert main(["sweep", str(ini)]) == 0
    run_dir = tmp_path / "tabular-sweep"
    assert (run_dir / "manifest.json").exists()
    assert main(["plot", str(run_dir / "rates_chain.csv"), "p_attack:convergence_rate",
                 "-o", str(tmp_path / "r.svg")]) == 0
    assert (tmp_path / "r.svg").exists()
    assert main(["bench", str(ini)]) == 2
    bad = tmp_path / "bad.ini"
    bad.write_text("[experiment]\nname = nominal-epsgreedy\nfoo = 1\n")
    assert main(["run", str(bad)]) == 2
    assert "foo" in capsys.readouterr().err
