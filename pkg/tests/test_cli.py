"""Command-line interface: argument handling, exit codes, JSON contract.

Most tests drive ``main()`` in process for speed; one subprocess test checks
the module entry point end to end. Shared dataset and model directories are
built once per module.
"""

import dataclasses
import json
import subprocess
import sys

import numpy as np
import pytest

from romforge.cli import main, parse_dwell_times
from romforge.dataset import (
    SnapshotTensor,
    load_snapshot_tensor,
    read_snapshot_bin,
    save_snapshot_tensor,
)
from romforge.errors import ConfigurationError

GEN_ARGS = ["--dwell-times", "20:80:10", "--layers", "2", "--radial", "2",
            "--theta", "4", "--seed", "0"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def summary_of(out):
    lines = out.splitlines()
    assert len(lines) == 1, f"expected one stdout line, got {lines!r}"
    return json.loads(lines[0])


def dir_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "dataset"
    assert main(["gen", "--out", str(out), *GEN_ARGS]) == 0
    return out


@pytest.fixture(scope="module")
def rom_dir(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("cli") / "rom"
    assert main(["train", "--model", "pod-gpr", "--data", str(dataset_dir),
                 "--out", str(out), "--seed", "0"]) == 0
    return out


# ----------------------------------------------------------- dwell parsing ---


def test_parse_dwell_times_range():
    assert parse_dwell_times("20:80:5") == [20.0 + 5.0 * i for i in range(13)]


def test_parse_dwell_times_range_with_unaligned_stop():
    assert parse_dwell_times("0:10:4") == [0.0, 4.0, 8.0]


def test_parse_dwell_times_lists():
    assert parse_dwell_times("45") == [45.0]
    assert parse_dwell_times("30,45,60") == [30.0, 45.0, 60.0]
    assert parse_dwell_times([1, 2.5]) == [1.0, 2.5]


@pytest.mark.parametrize("bad", ["", "a,b", "1:2:3:4", "1:10:0", "10:5:1",
                                 "1:x:2"])
def test_parse_dwell_times_rejects_malformed(bad):
    with pytest.raises(ConfigurationError):
        parse_dwell_times(bad)


# --------------------------------------------------------------------- gen ---


def test_gen_summary_and_files(dataset_dir, capsys):
    out = dataset_dir.parent / "dataset2"
    code, stdout, _ = run(capsys, "gen", "--out", out, *GEN_ARGS)
    assert code == 0
    summary = summary_of(stdout)
    assert summary == {"out": str(out), "n_mu": 7, "n_h": 24, "n_t": 2}
    assert (out / "meta.json").is_file()
    assert len(list(out.glob("snap_*.bin"))) == 7
    tensor = load_snapshot_tensor(out)
    assert tensor.n_nodes == 24
    assert tensor.dwell_times == [20.0 + 10.0 * i for i in range(7)]


def test_gen_same_seed_is_byte_identical(tmp_path, capsys):
    args = ["--dwell-times", "40,60", "--layers", "2", "--radial", "2",
            "--theta", "4", "--noise", "0.01", "--seed", "5"]
    for name in ("a", "b"):
        assert run(capsys, "gen", "--out", tmp_path / name, *args)[0] == 0
    assert dir_bytes(tmp_path / "a") == dir_bytes(tmp_path / "b")

    args[-1] = "6"
    assert run(capsys, "gen", "--out", tmp_path / "c", *args)[0] == 0
    assert dir_bytes(tmp_path / "a") != dir_bytes(tmp_path / "c")


def test_gen_missing_required_flag(capsys, tmp_path):
    code, stdout, stderr = run(capsys, "gen", "--out", tmp_path / "x")
    assert code == 2
    assert stdout == ""
    assert "--dwell-times" in stderr


# ------------------------------------------------------------------- train ---


def test_train_pod_gpr_summary(dataset_dir, rom_dir, capsys):
    out = rom_dir.parent / "rom2"
    code, stdout, _ = run(capsys, "train", "--model", "pod-gpr",
                          "--data", dataset_dir, "--out", out, "--seed", "0")
    assert code == 0
    summary = summary_of(stdout)
    assert summary["model"] == "pod-gpr"
    assert summary["n_train"] == 7
    assert 1 <= summary["rank"] <= 7
    assert 0.0 < summary["energy_captured"] <= 1.0
    assert summary["train_seconds"] > 0.0
    assert (out / "manifest.json").is_file()


def test_train_subset_of_dwell_times(dataset_dir, tmp_path, capsys):
    code, stdout, _ = run(capsys, "train", "--model", "pod-gpr",
                          "--data", dataset_dir, "--out", tmp_path / "rom",
                          "--train", "20,40,60,80")
    assert code == 0
    assert summary_of(stdout)["n_train"] == 4


def test_train_gca_smoke(dataset_dir, tmp_path, capsys):
    out = tmp_path / "gca"
    code, stdout, _ = run(
        capsys, "train", "--model", "gca", "--data", dataset_dir,
        "--out", out, "--train", "20,40,60,80", "--val", "30,70",
        "--max-epochs", "3", "--latent", "2", "--seed", "0",
    )
    assert code == 0
    summary = summary_of(stdout)
    assert summary["model"] == "gca"
    assert summary["epochs"] <= 3
    assert np.isfinite(summary["best_val_loss"])
    assert (out / "history.csv").is_file()
    assert (out / "gca.json").is_file()


def test_train_rejects_unknown_model_choice(dataset_dir, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["train", "--model", "bogus", "--data", str(dataset_dir),
              "--out", str(tmp_path / "x")])
    assert exc.value.code == 2


def test_train_degenerate_dataset_is_numerical_failure(dataset_dir, tmp_path,
                                                       capsys):
    tensor = load_snapshot_tensor(dataset_dir)
    flat = tuple(
        dataclasses.replace(m, values=np.ones_like(m.values))
        for m in tensor.matrices
    )
    bad = tmp_path / "flat"
    save_snapshot_tensor(SnapshotTensor(flat, tensor.mesh), bad)
    code, stdout, stderr = run(capsys, "train", "--model", "pod-gpr",
                               "--data", bad, "--out", tmp_path / "rom")
    assert code == 4
    assert stdout == ""
    assert "numerical failure" in stderr


# ----------------------------------------------------------------- predict ---


def test_predict_writes_field_and_sidecar(rom_dir, tmp_path, capsys):
    out = tmp_path / "field.bin"
    code, stdout, _ = run(capsys, "predict", "--model-dir", rom_dir,
                          "--dt", "45", "--out", out)
    assert code == 0
    summary = summary_of(stdout)
    field = read_snapshot_bin(out)
    assert field.shape == (24, 1)
    assert summary["dt"] == 45.0
    assert summary["model"] == "pod-gpr"
    assert summary["extrapolation"] is False
    assert summary["max_displacement"] == field.max()
    sidecar = json.loads((tmp_path / "field.bin.json").read_text())
    assert summary == {**sidecar, "out": str(out),
                       "sidecar": str(tmp_path / "field.bin.json")}


def test_predict_flags_extrapolation(rom_dir, tmp_path, capsys):
    code, stdout, _ = run(capsys, "predict", "--model-dir", rom_dir,
                          "--dt", "100", "--out", tmp_path / "f.bin")
    assert code == 0
    assert summary_of(stdout)["extrapolation"] is True


def test_predict_corrupt_archive_is_io_failure(rom_dir, tmp_path, capsys):
    broken = tmp_path / "broken"
    broken.mkdir()
    for p in rom_dir.iterdir():
        (broken / p.name).write_bytes(p.read_bytes())
    payload = (broken / "basis.bin").read_bytes()
    (broken / "basis.bin").write_bytes(payload[:-16])
    code, stdout, stderr = run(capsys, "predict", "--model-dir", broken,
                               "--dt", "45", "--out", tmp_path / "f.bin")
    assert code == 3
    assert stdout == ""
    assert "basis.bin" in stderr


def test_predict_missing_archive_is_io_failure(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code, _, stderr = run(capsys, "predict", "--model-dir", empty,
                          "--dt", "45", "--out", tmp_path / "f.bin")
    assert code == 3
    assert "no model archive" in stderr


# -------------------------------------------------------------------- eval ---


def test_eval_report_and_plots(rom_dir, dataset_dir, tmp_path, capsys):
    plots = tmp_path / "plots"
    code, stdout, _ = run(capsys, "eval", "--model-dir", rom_dir,
                          "--data", dataset_dir, "--test", "30,50",
                          "--plots", plots)
    assert code == 0
    summary = summary_of(stdout)
    assert summary["model"] == "pod-gpr"
    assert [row["dt"] for row in summary["rows"]] == [30.0, 50.0]
    for name in ("coefficients.csv", "coefficients.svg",
                 "max_displacement.csv", "max_displacement.svg"):
        assert (plots / name).is_file()
    report = json.loads((plots / "report.json").read_text())
    assert report["rows"] == summary["rows"]
    assert "predict_seconds_mean" not in report


def test_eval_rerun_is_byte_identical(rom_dir, dataset_dir, tmp_path, capsys):
    blobs = []
    for name in ("p1", "p2"):
        plots = tmp_path / name
        assert run(capsys, "eval", "--model-dir", rom_dir,
                   "--data", dataset_dir, "--test", "30,50",
                   "--plots", plots)[0] == 0
        blobs.append((plots / "report.json").read_bytes())
    assert blobs[0] == blobs[1]


def test_eval_with_timing(rom_dir, dataset_dir, tmp_path, capsys):
    code, stdout, _ = run(capsys, "eval", "--model-dir", rom_dir,
                          "--data", dataset_dir, "--test", "30,50",
                          "--plots", tmp_path / "p", "--time",
                          "--repeats", "2")
    assert code == 0
    assert summary_of(stdout)["predict_seconds_mean"] > 0.0


def test_eval_requires_plots_directory(rom_dir, dataset_dir, capsys):
    code, _, stderr = run(capsys, "eval", "--model-dir", rom_dir,
                          "--data", dataset_dir, "--test", "30,50")
    assert code == 2
    assert "--plots" in stderr


# ------------------------------------------------------------------ config ---


def test_config_supplies_defaults_under_explicit_flags(tmp_path, capsys):
    config = tmp_path / "gen.json"
    config.write_text(json.dumps(
        {"layers": 3, "radial": 2, "theta": 4, "noise": 0.01, "seed": 9,
         "dwell_times": "40,60"}
    ))
    code, stdout, _ = run(capsys, "gen", "--out", tmp_path / "via_config",
                          "--config", config, "--layers", "2")
    assert code == 0
    # explicit --layers overrides the config value: 2 layers -> 2 steps
    assert summary_of(stdout)["n_t"] == 2

    code, _, _ = run(capsys, "gen", "--out", tmp_path / "via_flags",
                     "--dwell-times", "40,60", "--layers", "2", "--radial",
                     "2", "--theta", "4", "--noise", "0.01", "--seed", "9")
    assert code == 0
    assert dir_bytes(tmp_path / "via_config") == dir_bytes(tmp_path /
                                                           "via_flags")


def test_config_rejects_unknown_keys(tmp_path, capsys):
    config = tmp_path / "gen.json"
    config.write_text(json.dumps({"dwell_times": "40,60", "bogus": 1}))
    code, _, stderr = run(capsys, "gen", "--out", tmp_path / "d",
                          "--config", config)
    assert code == 2
    assert "bogus" in stderr


def test_config_must_hold_an_object(tmp_path, capsys):
    config = tmp_path / "gen.json"
    config.write_text("[1, 2]")
    code, _, _ = run(capsys, "gen", "--out", tmp_path / "d",
                     "--config", config)
    assert code == 2


def test_config_missing_file_is_io_failure(tmp_path, capsys):
    code, _, _ = run(capsys, "gen", "--out", tmp_path / "d",
                     "--dwell-times", "40,60",
                     "--config", tmp_path / "absent.json")
    assert code == 3


# ------------------------------------------------------------- environment ---


def test_thread_env_validation(dataset_dir, tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("ROMFORGE_THREADS", "abc")
    assert run(capsys, "train", "--model", "pod-gpr", "--data", dataset_dir,
               "--out", tmp_path / "r1")[0] == 2
    monkeypatch.setenv("ROMFORGE_THREADS", "0")
    assert run(capsys, "train", "--model", "pod-gpr", "--data", dataset_dir,
               "--out", tmp_path / "r2")[0] == 2
    monkeypatch.setenv("ROMFORGE_THREADS", "2")
    assert run(capsys, "train", "--model", "pod-gpr", "--data", dataset_dir,
               "--out", tmp_path / "r3")[0] == 0


# -------------------------------------------------------------- subprocess ---


def test_module_entry_point(tmp_path):
    out = tmp_path / "dataset"
    proc = subprocess.run(
        [sys.executable, "-m", "romforge.cli", "gen", "--out", str(out),
         *GEN_ARGS],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert summary_of(proc.stdout)["n_mu"] == 7
    assert (out / "meta.json").is_file()
