"""Command-line experiment driver.

Usage::

    hqcpinn <command> <config.ini>

Commands: generate-data, train, evaluate, uq, gradvar, ablate, report.

Every command writes into the run directory named by ``[run] out_dir``,
starting with ``config.ini``: a snapshot of the fully resolved configuration
(all defaults filled in) plus a ``[meta]`` section with the layout schema.
Re-running a command on that snapshot reproduces its CSV outputs byte for byte
under the same thread cap (environment variable ``HQCPINN_THREADS``, default 1).

Exit codes: 0 success, 1 unexpected failure, 2 configuration error,
3 numerical divergence, 4 missing or inconsistent input artifacts.
"""

from __future__ import annotations

import argparse
import configparser
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .circuit import CircuitSpec
from .classical_net import FocalLossConfig, class_weights
from .diagnostics import (
    acc_per_kparam,
    classification_metrics,
    gradient_variance_study,
    parameter_count,
    read_table,
    write_table,
)
from .hybrid_model import (
    ClassicalPINN,
    HybridModel,
    Model,
    Scaler,
    TrainConfig,
    TrainingDiverged,
    fit,
    load_checkpoint,
    save_checkpoint,
    transfer_protocol,
)
from .physics import PhysicsConfig
from .reference_solver import (
    ScenarioSpec,
    SolverError,
    SyntheticDataset,
    generate_dataset,
    load_dataset,
    save_dataset,
    synthesize_multihazard,
    temporal_split,
)

log = logging.getLogger("hqcpinn")

SCHEMA_VERSION = 1
THREADS_ENV = "HQCPINN_THREADS"
COMMANDS = ("generate-data", "train", "evaluate", "uq", "gradvar", "ablate", "report")
MODEL_KINDS = ("hybrid", "vqc", "cpinn", "qtl")


class ConfigError(ValueError):
    pass


class InputError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# configuration
#
# Every key with its default.  Values are parsed by the type of the default.

DEFAULTS: dict[str, dict[str, object]] = {
    "run": {"out_dir": "runs/default", "seed": 0},
    "data": {
        "path": "",
        "scenario_seed": 3,
        "duration_days": 60.0,
        "n_storms": 18,
        "n_reaches": 4,
        "n_cells": 20,
        "length_m": 10_000.0,
        "n_sites": 5,
        "noise": 0.1,
    },
    "model": {"kind": "hybrid", "n_qubits": 4, "layers": 2, "entangle": True, "prenet": True},
    "physics": {
        "lambda_sv": 0.1,
        "lambda_m": 0.05,
        "g": 9.81,
        "channel_width": 50.0,
        "manning_n": 0.035,
        "bed_slope": 0.001,
        "n_collocation": 16,
    },
    "training": {
        "epochs": 100,
        "patience": 10,
        "batch_size": 32,
        "lr": 1e-3,
        "target_val_loss": 0.40,
        "grad_mode": "adjoint",
        "n_collocation_val": 64,
    },
    "transfer": {"pretrain_records": 4000, "pretrain_epochs": 20},
    "uq": {"shots": 200, "members": 20, "sigma": 0.01, "level": 0.90, "max_samples": 0, "randomized_sets": False},
    "study": {"inits": 1000, "n_qubits": 8, "layers": 3, "batch_size": 32, "n_collocation": 16},
    "report": {"runs": ""},
}


def _parse(value: str, default):
    v = value.strip()
    if isinstance(default, bool):
        low = v.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        try:
            return int(v)
        except ValueError as e:
            raise ConfigError(f"not an integer: {value!r}") from e
    if isinstance(default, float):
        try:
            return float(v)
        except ValueError as e:
            raise ConfigError(f"not a number: {value!r}") from e
    return v


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class ExperimentConfig:
    values: dict[str, dict[str, object]]
    source: Path | None = None

    def __getitem__(self, section: str) -> dict[str, object]:
        return self.values[section]

    @classmethod
    def defaults(cls) -> "ExperimentConfig":
        return cls({s: dict(keys) for s, keys in DEFAULTS.items()})

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            with open(path) as fh:
                parser.read_file(fh)
        except FileNotFoundError as e:
            raise ConfigError(f"config file not found: {path}") from e
        except configparser.Error as e:
            raise ConfigError(f"malformed config: {e}") from e
        cfg = cls.defaults()
        cfg.source = path
        for section in parser.sections():
            if section == "meta":
                schema = parser[section].get("schema", str(SCHEMA_VERSION))
                if schema != str(SCHEMA_VERSION):
                    raise ConfigError(f"run layout schema {schema} is not supported (expected {SCHEMA_VERSION})")
                continue
            if section not in DEFAULTS:
                raise ConfigError(f"unknown section [{section}]")
            for key, raw in parser[section].items():
                if key not in DEFAULTS[section]:
                    raise ConfigError(f"unknown key {key!r} in [{section}]")
                cfg.values[section][key] = _parse(raw, DEFAULTS[section][key])
        cfg.validate()
        return cfg

    def validate(self) -> None:
        m = self["model"]
        if m["kind"] not in MODEL_KINDS:
            raise ConfigError(f"model kind must be one of {MODEL_KINDS}")
        try:
            self.circuit()
            self.physics()
            self.training(0)
            self.scenario()
        except ValueError as e:
            raise ConfigError(str(e)) from e
        u = self["uq"]
        if u["shots"] < 1 or u["members"] < 1 or u["sigma"] < 0 or not 0 < u["level"] <= 1:
            raise ConfigError("invalid [uq] settings")
        if self["study"]["inits"] < 2:
            raise ConfigError("[study] inits must be >= 2")

    def write(self, path, command: str) -> None:
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        parser["meta"] = {"schema": str(SCHEMA_VERSION), "command": command}
        for section, keys in self.values.items():
            parser[section] = {k: _fmt_value(v) for k, v in keys.items()}
        with open(path, "w") as fh:
            parser.write(fh)

    # -- typed views ---------------------------------------------------------

    @property
    def out_dir(self) -> Path:
        return Path(str(self["run"]["out_dir"]))

    @property
    def seed(self) -> int:
        return int(self["run"]["seed"])

    def circuit(self, entangle: bool | None = None) -> CircuitSpec:
        m = self["model"]
        return CircuitSpec(int(m["n_qubits"]), int(m["layers"]), bool(m["entangle"] if entangle is None else entangle))

    def physics(self, lambda_sv: float | None = None, lambda_m: float | None = None) -> PhysicsConfig:
        p = self["physics"]
        return PhysicsConfig(
            g=p["g"],
            channel_width=p["channel_width"],
            manning_n=p["manning_n"],
            bed_slope=p["bed_slope"],
            lambda_sv=p["lambda_sv"] if lambda_sv is None else lambda_sv,
            lambda_m=p["lambda_m"] if lambda_m is None else lambda_m,
            n_collocation=p["n_collocation"],
        )

    def training(self, seed: int | None = None, epochs: int | None = None) -> TrainConfig:
        t = self["training"]
        return TrainConfig(
            max_epochs=int(t["epochs"] if epochs is None else epochs),
            patience=int(t["patience"]),
            batch_size=int(t["batch_size"]),
            lr=float(t["lr"]),
            target_val_loss=float(t["target_val_loss"]),
            seed=self.seed if seed is None else seed,
            grad_mode=str(t["grad_mode"]),
            n_collocation_val=int(t["n_collocation_val"]),
        )

    def scenario(self) -> ScenarioSpec:
        d = self["data"]
        return ScenarioSpec(
            length=d["length_m"],
            n_cells=d["n_cells"],
            duration=d["duration_days"] * 86_400.0,
            n_storms=d["n_storms"],
            n_reaches=d["n_reaches"],
            seed=d["scenario_seed"],
        )


# ---------------------------------------------------------------------------
# shared steps


def _prepare_run(cfg: ExperimentConfig, command: str) -> Path:
    out = cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    cfg.write(out / "config.ini", command)
    return out


def _dataset(cfg: ExperimentConfig) -> SyntheticDataset:
    path = str(cfg["data"]["path"])
    if path:
        p = Path(path)
        if not p.is_absolute() and cfg.source is not None and not p.exists():
            p = cfg.source.parent / p
        if not p.exists():
            raise InputError(f"dataset not found: {path}")
        return load_dataset(p)
    return generate_dataset(cfg.scenario(), cfg.physics(), int(cfg["data"]["n_sites"]), noise=float(cfg["data"]["noise"]))


def _build(cfg: ExperimentConfig, kind: str, seed: int, scaler: Scaler, entangle: bool | None = None, prenet: bool | None = None) -> Model:
    if kind == "cpinn":
        return ClassicalPINN.create(seed, 4, scaler)
    use_prenet = bool(cfg["model"]["prenet"] if prenet is None else prenet)
    return HybridModel.create(cfg.circuit(entangle), seed, 4, scaler, use_prenet=use_prenet)


def _train_one(cfg: ExperimentConfig, splits, kind: str, seed: int, physics: PhysicsConfig, **build_kw):
    """Returns ``(model, trace)``; the trace is the fine-tuning trace for QTL."""
    tr, va, _ = splits
    tcfg = cfg.training(seed)
    if kind == "qtl":
        pre = synthesize_multihazard(tr, int(cfg["transfer"]["pretrain_records"]), seed)
        cfg_pre = cfg.training(seed, epochs=int(cfg["transfer"]["pretrain_epochs"]))
        model, _, trace = transfer_protocol(pre.xy, tr.xy, va.xy, cfg.circuit(), physics, cfg_pre, tcfg)
        return model, trace
    model = _build(cfg, kind, seed, Scaler.fit(tr.features), **build_kw)
    return fit(model, tr.xy, va.xy, physics, tcfg)


def _physics_for(cfg: ExperimentConfig, kind: str) -> PhysicsConfig:
    return cfg.physics(0.0, 0.0) if kind == "vqc" else cfg.physics()


def _test_metrics(model: Model, test: SyntheticDataset) -> dict:
    pred, _ = model.predict(test.features)
    m = classification_metrics(pred, test.labels, 4)
    n_params = parameter_count(model)["total"]
    row = {
        "accuracy": m.accuracy,
        "macro_f1": m.macro_f1,
        "params": n_params,
        "acc_per_kparam": acc_per_kparam(100.0 * m.accuracy, n_params),
    }
    for k in range(4):
        row[f"precision_{k}"] = float(m.precision[k])
        row[f"recall_{k}"] = float(m.recall[k])
        row[f"f1_{k}"] = float(m.f1[k])
    return row


METRIC_COLUMNS = ["model", "qubits", "layers", "epochs_to_target", "best_epoch", "epochs_run", "accuracy", "macro_f1", "params", "acc_per_kparam"] + [
    f"{s}_{k}" for k in range(4) for s in ("precision", "recall", "f1")
]


def _model_row(cfg: ExperimentConfig, kind: str, trace=None) -> dict:
    quantum = kind != "cpinn"
    return {
        "model": kind,
        "qubits": cfg["model"]["n_qubits"] if quantum else "",
        "layers": cfg["model"]["layers"] if quantum else 4,
        "epochs_to_target": "" if trace is None or trace.epochs_to_target is None else trace.epochs_to_target,
        "best_epoch": "" if trace is None else trace.best_epoch,
        "epochs_run": "" if trace is None else trace.epochs,
    }


# ---------------------------------------------------------------------------
# commands


def cmd_generate_data(cfg: ExperimentConfig) -> None:
    out = _prepare_run(cfg, "generate-data")
    ds = _dataset(cfg)
    save_dataset(ds, out / "dataset.csv")
    rows = [{"class": k, "name": ds.class_names[k], "ratio": float(r)} for k, r in enumerate(ds.class_ratios())]
    write_table(rows, ["class", "name", "ratio"], out / "class_ratios.csv")


def cmd_train(cfg: ExperimentConfig) -> None:
    out = _prepare_run(cfg, "train")
    kind = str(cfg["model"]["kind"])
    splits = temporal_split(_dataset(cfg))
    model, trace = _train_one(cfg, splits, kind, cfg.seed, _physics_for(cfg, kind))
    trace.to_csv(out / "trace.csv")
    save_checkpoint(model, out / "model.npz")
    row = _model_row(cfg, kind, trace) | _test_metrics(model, splits[2])
    write_table([row], METRIC_COLUMNS, out / "metrics.csv")
    counts = parameter_count(model)
    write_table([{"block": k, "count": v} for k, v in counts.items()], ["block", "count"], out / "parameters.csv")


def _load_model(out: Path) -> Model:
    path = out / "model.npz"
    if not path.exists():
        raise InputError(f"no checkpoint at {path}; run 'train' first")
    return load_checkpoint(path)


def cmd_evaluate(cfg: ExperimentConfig) -> None:
    out = cfg.out_dir
    model = _load_model(out)
    _prepare_run(cfg, "evaluate")
    _, _, test = temporal_split(_dataset(cfg))
    row = _model_row(cfg, str(cfg["model"]["kind"])) | _test_metrics(model, test)
    write_table([row], METRIC_COLUMNS, out / "evaluation.csv")


def cmd_uq(cfg: ExperimentConfig) -> None:
    from .uncertainty import evaluate_uq, write_uq_csv

    out = cfg.out_dir
    model = _load_model(out)
    if not isinstance(model, HybridModel):
        raise InputError("uq needs a hybrid checkpoint (measurement shots)")
    _prepare_run(cfg, "uq")
    _, _, test = temporal_split(_dataset(cfg))
    u = cfg["uq"]
    n = len(test) if not u["max_samples"] else min(len(test), int(u["max_samples"]))
    table = evaluate_uq(
        model, test.features[:n], test.labels[:n], u["shots"], u["members"], u["sigma"], u["level"], cfg.seed, bool(u["randomized_sets"])
    )
    write_uq_csv(table, out / "uq.csv")
    summary = {
        "model": cfg["model"]["kind"],
        "coverage": float(np.mean(table["covered"])),
        "entropy": float(np.mean(table["entropy"])),
        "aleatoric": float(np.mean(table["aleatoric"])),
        "epistemic": float(np.mean(table["epistemic"])),
        "mean_set_size": float(np.mean(table["set_size"])),
        "level": u["level"],
        "shots": u["shots"],
        "n_samples": n,
    }
    write_table([summary], list(summary), out / "uq_summary.csv")


def cmd_gradvar(cfg: ExperimentConfig) -> None:
    out = _prepare_run(cfg, "gradvar")
    tr, _, _ = temporal_split(_dataset(cfg))
    s = cfg["study"]
    spec = CircuitSpec(int(s["n_qubits"]), int(s["layers"]), bool(cfg["model"]["entangle"]))
    rep = gradient_variance_study(spec, cfg.physics(), tr.features, tr.labels, int(s["inits"]), cfg.seed, int(s["batch_size"]), int(s["n_collocation"]))
    rows = rep.rows()
    for r in rows:
        r.update(qubits=spec.n_qubits, layers=spec.n_layers, seed=cfg.seed)
    write_table(rows, ["quantity", "mean_variance", "max_variance", "n_inits", "qubits", "layers", "seed"], out / "gradvar.csv")
    per = [
        {"param": j, "data": rep.var_data[j], "physics": rep.var_physics[j], "total_physics_on": rep.var_total_on[j], "total_physics_off": rep.var_total_off[j]}
        for j in range(spec.n_params)
    ]
    write_table(per, ["param", "data", "physics", "total_physics_on", "total_physics_off"], out / "gradvar_per_param.csv")


ABLATIONS = (
    ("full", {}),
    ("-SV", {"lambda_sv": 0.0}),
    ("-Manning", {"lambda_m": 0.0}),
    ("-both", {"lambda_sv": 0.0, "lambda_m": 0.0}),
    ("-quantum", {"kind": "cpinn"}),
    ("-entanglement", {"entangle": False}),
    ("-prenet", {"prenet": False}),
)


def cmd_ablate(cfg: ExperimentConfig) -> None:
    out = _prepare_run(cfg, "ablate")
    splits = temporal_split(_dataset(cfg))
    rows = []
    for name, change in ABLATIONS:
        kind = change.get("kind", "hybrid")
        physics = cfg.physics(change.get("lambda_sv"), change.get("lambda_m"))
        build_kw = {k: change[k] for k in ("entangle", "prenet") if k in change}
        model, trace = _train_one(cfg, splits, kind, cfg.seed, physics, **build_kw)
        m = _test_metrics(model, splits[2])
        rows.append(
            {
                "configuration": name,
                "accuracy": m["accuracy"],
                "macro_f1": m["macro_f1"],
                "epochs_to_target": "" if trace.epochs_to_target is None else trace.epochs_to_target,
                "params": m["params"],
            }
        )
    write_table(rows, ["configuration", "accuracy", "macro_f1", "epochs_to_target", "params"], out / "ablation.csv")


def cmd_report(cfg: ExperimentConfig) -> None:
    names = [r.strip() for r in str(cfg["report"]["runs"]).split(",") if r.strip()]
    if not names:
        raise InputError("[report] runs is empty")
    base = cfg.source.parent if cfg.source is not None else Path(".")
    runs = []
    for name in names:
        p = Path(name)
        if not p.is_absolute() and not p.exists():
            p = base / p
        metrics = p / "metrics.csv"
        if not metrics.exists():
            raise InputError(f"missing {metrics}")
        runs.append((p, read_table(metrics)[0]))
    out = _prepare_run(cfg, "report")
    t1, t2, t3, t4 = [], [], [], []
    for p, m in runs:
        label = p.name
        t1.append({"run": label, "model": m["model"], "qubits": m["qubits"], "layers": m["layers"], "epochs_to_target": m["epochs_to_target"]})
        acc = float(m["accuracy"])
        params = int(m["params"])
        t2.append({"run": label, "model": m["model"], "accuracy_pct": 100.0 * acc, "macro_f1": float(m["macro_f1"]), "params": params, "acc_per_kparam": acc_per_kparam(100.0 * acc, params)})
        blocks = {r["block"]: int(r["count"]) for r in read_table(p / "parameters.csv")} if (p / "parameters.csv").exists() else {}
        quantum = blocks.get("phi", 0)
        t3.append({"run": label, "model": m["model"], "classical": params - quantum, "quantum": quantum, "total": params})
        if (p / "uq_summary.csv").exists():
            u = read_table(p / "uq_summary.csv")[0]
            t4.append({"run": label, "model": m["model"], "coverage_pct": 100.0 * float(u["coverage"]), "entropy": float(u["entropy"]), "aleatoric": float(u["aleatoric"])})
    write_table(t1, ["run", "model", "qubits", "layers", "epochs_to_target"], out / "table1_convergence.csv")
    write_table(t2, ["run", "model", "accuracy_pct", "macro_f1", "params", "acc_per_kparam"], out / "table2_classification.csv")
    write_table(t3, ["run", "model", "classical", "quantum", "total"], out / "table3_parameters.csv")
    write_table(t4, ["run", "model", "coverage_pct", "entropy", "aleatoric"], out / "table4_uncertainty.csv")
    lines = [f"runs: {len(runs)}"]
    for r in t2:
        lines.append(f"{r['run']}: {r['model']} acc {r['accuracy_pct']:.2f}% macro-F1 {r['macro_f1']:.3f} params {r['params']} acc/kP {r['acc_per_kparam']:.3f}")
    (out / "summary.txt").write_text("\n".join(lines) + "\n")


HANDLERS = {
    "generate-data": cmd_generate_data,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "uq": cmd_uq,
    "gradvar": cmd_gradvar,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def _thread_cap() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as e:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from e
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="hqcpinn", description="Hybrid quantum-classical PINN experiments")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("config", help="INI configuration file")
    parser.add_argument("-v", "--verbose", action="store_true")
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        from threadpoolctl import threadpool_limits

        with threadpool_limits(limits=_thread_cap()):
            cfg = ExperimentConfig.load(args.config)
            HANDLERS[args.command](cfg)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (TrainingDiverged, SolverError, FloatingPointError) as e:
        print(f"diverged: {e}", file=sys.stderr)
        return 3
    except InputError as e:
        print(f"input error: {e}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
