"""Command-line front end: generate data, train, predict, evaluate.

Contract: every run prints exactly one JSON summary line to stdout;
diagnostics go to stderr. Exit codes: 0 success, 2 configuration error,
3 I/O error, 4 numerical failure. A JSON config file passed via --config
supplies defaults that explicit flags override; unknown keys are rejected.
The ROMFORGE_THREADS environment variable caps internal parallelism.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path
from types import SimpleNamespace

import numpy as np

from .dataset import (
    generate_synthetic_dataset,
    load_snapshot_tensor,
    save_snapshot_tensor,
    split_dataset,
    write_snapshot_bin,
)
from .errors import (
    ConditioningError,
    ConfigurationError,
    CorruptionError,
    DataError,
    DegenerateBasisError,
    DegenerateMetricError,
    DivergenceError,
    DuplicateParameterError,
    FormatError,
    ShapeError,
    SplitError,
    UnknownParameterError,
)
from .gca import build_graph, load_gca, predict_gca, save_gca
from .metrics import (
    EvalReport,
    emit_coefficient_plot,
    emit_max_displacement_plot,
    evaluation_row,
    report_to_dict,
    time_predict,
)
from .rom import load_rom, predict_distortion, save_rom, train_pod_gpr
from .training import GcaTrainConfig, train_gca, write_history_csv

__all__ = ["main", "parse_dwell_times"]

_CONFIG_ERRORS = (ConfigurationError, SplitError, UnknownParameterError,
                  DuplicateParameterError, ShapeError)
_NUMERICAL_ERRORS = (ConditioningError, DivergenceError, DegenerateBasisError,
                     DegenerateMetricError, np.linalg.LinAlgError)
_IO_ERRORS = (FormatError, CorruptionError, DataError, OSError)


def parse_dwell_times(raw) -> list[float]:
    """Parse `start:stop:step` (stop inclusive when aligned) or a comma list."""
    if isinstance(raw, (list, tuple)):
        return [float(v) for v in raw]
    text = str(raw).strip()
    if not text:
        raise ConfigurationError("empty dwell-time list")
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigurationError(
                f"range syntax is start:stop:step, got {text!r}"
            )
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ConfigurationError(f"non-numeric dwell-time range {text!r}")
        if step <= 0.0 or stop < start:
            raise ConfigurationError(
                "need step > 0 and stop >= start in dwell-time range"
            )
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    try:
        return [float(tok) for tok in text.split(",")]
    except ValueError:
        raise ConfigurationError(f"non-numeric dwell-time list {text!r}")


def _n_jobs() -> int:
    raw = os.environ.get("ROMFORGE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"ROMFORGE_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigurationError("ROMFORGE_THREADS must be >= 1")
    return n


def _require(ns: SimpleNamespace, *names: str) -> None:
    missing = [n for n in names if getattr(ns, n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ConfigurationError(f"missing required options: {flags}")


def _resolve(value) -> Path:
    return Path(value).expanduser().resolve()


# Subcommand handlers =========================================================

_GEN_DEFAULTS = {
    "out": None, "dwell_times": None, "layers": 8, "radial": 5, "theta": 24,
    "noise": 0.0, "seed": 0,
}


def cmd_gen(ns: SimpleNamespace) -> dict:
    _require(ns, "out", "dwell_times")
    out = _resolve(ns.out)
    dts = parse_dwell_times(ns.dwell_times)
    tensor = generate_synthetic_dataset(
        n_radial=int(ns.radial), n_theta=int(ns.theta),
        n_layers=int(ns.layers), dwell_times=dts,
        noise_sigma=float(ns.noise), seed=int(ns.seed),
    )
    save_snapshot_tensor(tensor, out)
    return {"out": str(out), "n_mu": tensor.n_mu, "n_h": tensor.n_nodes,
            "n_t": tensor.n_steps}


_TRAIN_DEFAULTS = {
    "model": None, "data": None, "out": None, "train": None, "seed": 0,
    # pod-gpr options
    "energy_threshold": 0.9999, "jitter": None, "restarts": 8,
    # gca options
    "val": None, "lam": 0.5, "lr_max": 1e-3, "lr_min": 1e-5, "t0": 50,
    "mult": 2, "patience": 50, "noise_sigma": None, "max_epochs": 2000,
    "latent": 12,
}


def cmd_train(ns: SimpleNamespace) -> dict:
    _require(ns, "model", "data", "out")
    if ns.model not in ("pod-gpr", "gca"):
        raise ConfigurationError(f"unknown model {ns.model!r} (pod-gpr or gca)")
    data = _resolve(ns.data)
    out = _resolve(ns.out)
    tensor = load_snapshot_tensor(data)
    train_dts = (parse_dwell_times(ns.train) if ns.train is not None
                 else tensor.dwell_times)

    if ns.model == "pod-gpr":
        train_t, _ = split_dataset(tensor, train_dts, [])
        started = time.perf_counter()
        rom = train_pod_gpr(
            train_t, energy_threshold=float(ns.energy_threshold),
            jitter=None if ns.jitter is None else float(ns.jitter),
            restarts=int(ns.restarts), seed=int(ns.seed), n_jobs=_n_jobs(),
        )
        train_seconds = time.perf_counter() - started
        save_rom(rom, out)
        return {"model": "pod-gpr", "out": str(out), "rank": rom.rank,
                "energy_captured": rom.basis.energy_captured,
                "n_train": train_t.n_mu, "train_seconds": train_seconds}

    val_dts = parse_dwell_times(ns.val) if ns.val is not None else []
    train_t, val_t = split_dataset(tensor, train_dts, val_dts)
    config = GcaTrainConfig(
        lam=float(ns.lam), lr_max=float(ns.lr_max), lr_min=float(ns.lr_min),
        warm_restart_t0=int(ns.t0), warm_restart_mult=int(ns.mult),
        patience=int(ns.patience),
        noise_sigma=None if ns.noise_sigma is None else float(ns.noise_sigma),
        max_epochs=int(ns.max_epochs), seed=int(ns.seed),
        latent_dim=int(ns.latent),
    )
    graph = build_graph(tensor.mesh)
    started = time.perf_counter()
    model, history = train_gca(train_t, val_t if val_t.n_mu else None,
                               graph, config)
    train_seconds = time.perf_counter() - started
    save_gca(model, tensor.mesh, out)
    history_path = out / "history.csv"
    write_history_csv(history, history_path)
    val_losses = [r.val_loss for r in history if math.isfinite(r.val_loss)]
    return {"model": "gca", "out": str(out), "epochs": len(history),
            "history": str(history_path),
            "best_val_loss": min(val_losses) if val_losses else None,
            "final_train_loss": history[-1].train_loss,
            "train_seconds": train_seconds}


_PREDICT_DEFAULTS = {"model_dir": None, "dt": None, "out": None}


def _load_any_model(model_dir: Path):
    if (model_dir / "manifest.json").is_file():
        return "pod-gpr", load_rom(model_dir)
    if (model_dir / "gca.json").is_file():
        return "gca", load_gca(model_dir)
    raise FormatError(
        f"{model_dir} holds no model archive: expected "
        f"{model_dir / 'manifest.json'} or {model_dir / 'gca.json'}"
    )


def cmd_predict(ns: SimpleNamespace) -> dict:
    _require(ns, "model_dir", "dt", "out")
    model_dir = _resolve(ns.model_dir)
    out = _resolve(ns.out)
    dt = float(ns.dt)
    kind, loaded = _load_any_model(model_dir)
    if kind == "pod-gpr":
        pred = predict_distortion(loaded, dt)
        field = pred.mean_field
        extrapolation = pred.extrapolation
    else:
        model, mesh = loaded
        graph = build_graph(mesh)
        field = predict_gca(model, graph, dt)
        normalized = model.normalize_dt(dt)
        extrapolation = not 0.0 <= normalized <= 1.0
    out.parent.mkdir(parents=True, exist_ok=True)
    write_snapshot_bin(field[:, None], out)
    sidecar = {"dt": dt, "max_displacement": float(field.max()),
               "extrapolation": extrapolation, "model": kind}
    sidecar_path = Path(str(out) + ".json")
    sidecar_path.write_text(json.dumps(sidecar, sort_keys=True) + "\n")
    return {**sidecar, "out": str(out), "sidecar": str(sidecar_path)}


_EVAL_DEFAULTS = {
    "model_dir": None, "data": None, "test": None, "plots": None,
    "report": None, "first_k": 4, "timing": None, "repeats": 3,
}


def cmd_eval(ns: SimpleNamespace) -> dict:
    _require(ns, "model_dir", "data", "test", "plots")
    model_dir = _resolve(ns.model_dir)
    data = _resolve(ns.data)
    plots = _resolve(ns.plots)
    test_dts = parse_dwell_times(ns.test)
    if not test_dts:
        raise ConfigurationError("empty test list")
    tensor = load_snapshot_tensor(data)
    kind, loaded = _load_any_model(model_dir)
    if kind == "gca":
        gca_model, gca_mesh = loaded
        gca_graph = build_graph(gca_mesh)

    rows = []
    for dt in test_dts:
        truth = tensor.matrix_for(dt).final_field
        if kind == "pod-gpr":
            pred_field = predict_distortion(loaded, dt).mean_field
        else:
            pred_field = predict_gca(gca_model, gca_graph, dt)
        rows.append(evaluation_row(dt, pred_field, truth))

    predict_seconds = None
    if ns.timing and kind == "pod-gpr":
        predict_seconds = time_predict(loaded, test_dts,
                                       int(ns.repeats)).mean_seconds
    report = EvalReport(rows=tuple(rows), predict_seconds_mean=predict_seconds)

    plots.mkdir(parents=True, exist_ok=True)
    if kind == "pod-gpr":
        emit_coefficient_plot(loaded, test_dts,
                              min(int(ns.first_k), loaded.rank),
                              plots / "coefficients")
    emit_max_displacement_plot(rows, plots / "max_displacement")

    report_path = (_resolve(ns.report) if ns.report is not None
                   else plots / "report.json")
    payload = report_to_dict(report)
    report_path.write_text(
        json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n"
    )
    return {"model": kind, "report": str(report_path), "plots": str(plots),
            **payload}


# Parser ======================================================================

def _add_command(sub, name: str, help_text: str, defaults: dict, handler,
                 configure) -> None:
    cmd = sub.add_parser(name, help=help_text)
    configure(cmd)
    cmd.add_argument("--config", default=None,
                     help="JSON file with defaults for this subcommand")
    cmd.set_defaults(_handler=handler, _defaults=defaults)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="romforge",
        description="Reduced-order distortion surrogates for powder-bed parts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def gen_opts(p):
        p.add_argument("--out", help="output dataset directory")
        p.add_argument("--dwell-times", dest="dwell_times",
                       help="comma list or start:stop:step range, seconds")
        p.add_argument("--layers", type=int, help="deposition layer count")
        p.add_argument("--radial", type=int, help="radial node count")
        p.add_argument("--theta", type=int, help="circumferential node count")
        p.add_argument("--noise", type=float, help="Gaussian noise sigma, mm")
        p.add_argument("--seed", type=int)

    def train_opts(p):
        p.add_argument("--model", choices=("pod-gpr", "gca"))
        p.add_argument("--data", help="dataset directory from gen")
        p.add_argument("--out", help="output archive directory")
        p.add_argument("--train", help="training dwell times (default: all)")
        p.add_argument("--seed", type=int)
        p.add_argument("--energy-threshold", dest="energy_threshold",
                       type=float, help="POD energy fraction to retain")
        p.add_argument("--jitter", type=float, help="GPR diagonal jitter")
        p.add_argument("--restarts", type=int,
                       help="GPR hyperparameter restarts")
        p.add_argument("--val", help="validation dwell times (gca)")
        p.add_argument("--lam", type=float, help="latent-loss weight (gca)")
        p.add_argument("--lr-max", dest="lr_max", type=float)
        p.add_argument("--lr-min", dest="lr_min", type=float)
        p.add_argument("--t0", type=int, help="first warm-restart period")
        p.add_argument("--mult", type=int, help="warm-restart period factor")
        p.add_argument("--patience", type=int)
        p.add_argument("--noise-sigma", dest="noise_sigma", type=float,
                       help="denoising corruption sigma (gca)")
        p.add_argument("--max-epochs", dest="max_epochs", type=int)
        p.add_argument("--latent", type=int, help="latent dimension (gca)")

    def predict_opts(p):
        p.add_argument("--model-dir", dest="model_dir")
        p.add_argument("--dt", type=float, help="dwell time, seconds")
        p.add_argument("--out", help="output field file")

    def eval_opts(p):
        p.add_argument("--model-dir", dest="model_dir")
        p.add_argument("--data")
        p.add_argument("--test", help="test dwell times")
        p.add_argument("--plots", help="directory for CSV/SVG plots")
        p.add_argument("--report", help="report JSON path "
                                        "(default: <plots>/report.json)")
        p.add_argument("--first-k", dest="first_k", type=int,
                       help="modes in the coefficient plot")
        p.add_argument("--time", dest="timing", action="store_true",
                       default=None, help="include prediction timing")
        p.add_argument("--repeats", type=int, help="timing sweep count")

    _add_command(sub, "gen", "generate a synthetic snapshot dataset",
                 _GEN_DEFAULTS, cmd_gen, gen_opts)
    _add_command(sub, "train", "train a surrogate on a dataset",
                 _TRAIN_DEFAULTS, cmd_train, train_opts)
    _add_command(sub, "predict", "predict one field from a trained archive",
                 _PREDICT_DEFAULTS, cmd_predict, predict_opts)
    _add_command(sub, "eval", "evaluate a trained archive on a test split",
                 _EVAL_DEFAULTS, cmd_eval, eval_opts)
    return parser


def _merge_config(args: argparse.Namespace) -> SimpleNamespace:
    defaults = args._defaults
    merged = dict(defaults)
    if args.config is not None:
        config_path = Path(args.config).expanduser()
        try:
            text = config_path.read_text()
        except OSError:
            raise FormatError(f"cannot read config file {config_path}")
        try:
            loaded = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file {config_path}: {exc}")
        if not isinstance(loaded, dict):
            raise ConfigurationError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(defaults))
        if unknown:
            raise ConfigurationError(f"unknown config keys: {unknown}")
        merged.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return SimpleNamespace(**merged)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        ns = _merge_config(args)
        summary = args._handler(ns)
    except _CONFIG_ERRORS as exc:
        print(f"romforge: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"romforge: numerical failure: {exc}", file=sys.stderr)
        return 4
    except _IO_ERRORS as exc:
        print(f"romforge: {exc}", file=sys.stderr)
        return 3
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
