"""Trainability and reporting: gradient variance, parameter counts, metrics, tables."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .circuit import CircuitSpec
from .classical_net import FocalLossConfig, class_weights
from .hybrid_model import HybridModel, Model, Scaler, epochs_to_target
from .physics import Domain, PhysicsConfig, sample_collocation

__all__ = [
    "GradVarianceReport",
    "MetricsTable",
    "classification_metrics",
    "epochs_to_target",
    "gradient_variance_study",
    "parameter_count",
    "write_table",
    "acc_per_kparam",
]


# ---------------------------------------------------------------------------
# gradient variance


@dataclass
class GradVarianceReport:
    n_inits: int
    seed: int
    physics: tuple[float, float]  # (lambda_sv, lambda_m) of the physics-on arm
    var_data: np.ndarray  # per-angle variance of dL_data/dphi
    var_physics: np.ndarray  # of the weighted physics term
    var_total_on: np.ndarray  # data + weighted physics
    var_total_off: np.ndarray  # data only (both weights zero)

    @property
    def mean_on(self) -> float:
        return float(self.var_total_on.mean())

    @property
    def mean_off(self) -> float:
        return float(self.var_total_off.mean())

    def rows(self) -> list[dict]:
        return [
            {"quantity": name, "mean_variance": float(v.mean()), "max_variance": float(v.max()), "n_inits": self.n_inits}
            for name, v in (
                ("data", self.var_data),
                ("physics", self.var_physics),
                ("total_physics_on", self.var_total_on),
                ("total_physics_off", self.var_total_off),
            )
        ]


def gradient_variance_study(
    spec: CircuitSpec,
    physics: PhysicsConfig,
    X: np.ndarray,
    y: np.ndarray,
    n_inits: int = 1000,
    seed: int = 0,
    batch_size: int = 32,
    n_collocation: int = 16,
    model: HybridModel | None = None,
) -> GradVarianceReport:
    """Empirical variance of dL/dphi over random circuit initialisations.

    The classical blocks are drawn once from ``seed`` (or taken from ``model``)
    and held fixed; the mini-batch and collocation set are fixed too, so only
    the angles change between draws.
    """
    if n_inits < 2:
        raise ValueError("need at least two initialisations")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    rng = np.random.default_rng(seed)
    if model is None:
        model = HybridModel.create(spec, seed, scaler=Scaler.fit(X))
    model = model.copy()
    model.trainable = {"pre": False, "phi": True, "post": False}
    idx = np.sort(rng.choice(len(X), size=min(batch_size, len(X)), replace=False))
    Xb, yb = X[idx], y[idx]
    focal = FocalLossConfig(2.0, tuple(class_weights(y, model.n_classes)))
    Xc = sample_collocation(Domain.from_features(X, physics), n_collocation, rng, X, physics)
    g_data = np.empty((n_inits, spec.n_params))
    g_phys = np.empty((n_inits, spec.n_params))
    for r in range(n_inits):
        model.phi = rng.uniform(0.0, 2.0 * np.pi, spec.n_params)
        g_data[r] = model.data_grad(Xb, yb, focal)[1]
        g_phys[r] = model.physics_grad(Xc, physics)[2]
    return GradVarianceReport(
        n_inits,
        seed,
        (physics.lambda_sv, physics.lambda_m),
        g_data.var(axis=0),
        g_phys.var(axis=0),
        (g_data + g_phys).var(axis=0),
        g_data.var(axis=0),
    )


# ---------------------------------------------------------------------------
# counts and metrics


def parameter_count(model: Model) -> dict[str, int]:
    """Element count per block plus ``total``."""
    counts = dict(model.block_sizes())
    counts["total"] = int(sum(counts.values()))
    return counts


def acc_per_kparam(accuracy_pct: float, n_params: int) -> float:
    """Accuracy in percent per thousand parameters."""
    if n_params <= 0:
        raise ValueError("parameter count must be positive")
    return accuracy_pct / (n_params / 1000.0)


@dataclass
class MetricsTable:
    accuracy: float
    macro_f1: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    confusion: np.ndarray = field(repr=False)


def classification_metrics(predictions, labels, n_classes: int | None = None) -> MetricsTable:
    """Accuracy, per-class precision/recall/F1 and their unweighted mean F1.

    Undefined ratios (no predictions or no members of a class) count as 0, so a
    class absent from both predictions and labels contributes F1 = 0.
    """
    p = np.asarray(predictions, dtype=int)
    t = np.asarray(labels, dtype=int)
    if p.shape != t.shape:
        raise ValueError("predictions and labels differ in length")
    if p.size == 0:
        raise ValueError("empty input")
    k = n_classes or int(max(p.max(), t.max()) + 1)
    cm = np.zeros((k, k), dtype=int)
    np.add.at(cm, (t, p), 1)
    tp = np.diag(cm).astype(float)
    pred_tot = cm.sum(axis=0)
    true_tot = cm.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        prec = np.where(pred_tot > 0, tp / pred_tot, 0.0)
        rec = np.where(true_tot > 0, tp / true_tot, 0.0)
        f1 = np.where(prec + rec > 0, 2 * prec * rec / (prec + rec), 0.0)
    return MetricsTable(float(tp.sum() / p.size), float(f1.mean()), prec, rec, f1, cm)


# ---------------------------------------------------------------------------
# tables


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(rows: list[dict], columns: list[str], path) -> None:
    """CSV with a fixed column order; missing entries are left blank."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_cell(row.get(c)) for c in columns])


def read_table(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
