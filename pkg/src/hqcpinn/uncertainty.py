"""Measurement-shot ensembles and predictive uncertainty summaries."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .circuit import bits_to_spins, run, sample_shots
from .hybrid_model import HybridModel
from .statevector import StateVector

DEFAULT_SHOTS = 200
DEFAULT_MEMBERS = 20
DEFAULT_SIGMA = 0.01
UQ_COLUMNS = ("sample_id", "entropy", "aleatoric", "epistemic", "set_size", "covered")


@dataclass
class ShotEnsemble:
    """Per-shot class probabilities ``(N_s, K)`` for one input."""

    predictions: np.ndarray

    @property
    def n_shots(self) -> int:
        return self.predictions.shape[0]

    @property
    def mean(self) -> np.ndarray:
        return self.predictions.mean(axis=0)


@dataclass
class UQReport:
    aleatoric: float
    epistemic: float
    entropy: float
    mean_probs: np.ndarray


def _states(model: HybridModel, X) -> np.ndarray:
    z = model.encode(X)
    return run(model.spec, z, model.phi)


def shot_ensemble_predict(model: HybridModel, x, n_shots: int = DEFAULT_SHOTS, seed: int = 0) -> ShotEnsemble:
    """Sample basis outcomes for a single input and push each (as +-1 spins) through the post-net."""
    if n_shots < 1:
        raise ValueError("n_shots must be >= 1")
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    amps = _states(model, x)[0]
    bits = sample_shots(StateVector(model.spec.n_qubits, amps), n_shots, seed)
    return ShotEnsemble(model.head_from_measurements(bits_to_spins(bits)))


def shot_ensembles(model: HybridModel, X, n_shots: int = DEFAULT_SHOTS, seed: int = 0) -> list[ShotEnsemble]:
    """One ensemble per row of ``X``; row i is seeded from ``(seed, i)``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    amps = _states(model, X)
    n = model.spec.n_qubits
    out = []
    for i, a in enumerate(amps):
        bits = sample_shots(StateVector(n, a), n_shots, np.random.SeedSequence([seed, i]))
        out.append(ShotEnsemble(model.head_from_measurements(bits_to_spins(bits))))
    return out


def aleatoric_variance(ens: ShotEnsemble) -> float:
    """Population variance of the shot predictions around their mean."""
    d = ens.predictions - ens.mean
    return float(np.mean(np.sum(d * d, axis=-1)))


def epistemic_variance(
    model: HybridModel,
    X,
    n_members: int = DEFAULT_MEMBERS,
    sigma: float = DEFAULT_SIGMA,
    seed: int = 0,
) -> np.ndarray:
    """Spread of expectation-mode predictions under Gaussian parameter noise.

    Every trainable block is perturbed. Returns one value per row of ``X``,
    measured against the unperturbed prediction.
    """
    if n_members < 1:
        raise ValueError("n_members must be >= 1")
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    base, _ = model.forward(X)
    if sigma == 0:
        return np.zeros(len(X))
    rng = np.random.default_rng(seed)
    theta = model.trainable_vector()
    work = model.copy()
    acc = np.zeros(len(X))
    for _ in range(n_members):
        work.set_trainable_vector(theta + sigma * rng.standard_normal(theta.size))
        probs, _ = work.forward(X)
        acc += np.sum((probs - base) ** 2, axis=-1)
    return acc / n_members


def predictive_entropy(probs) -> np.ndarray | float:
    """Shannon entropy in nats along the last axis (0 ln 0 taken as 0)."""
    p = np.asarray(probs, dtype=np.float64)
    if np.any(p < -1e-12):
        raise ValueError("probabilities must be non-negative")
    terms = np.where(p > 0, -p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    h = terms.sum(axis=-1)
    return float(h) if np.ndim(h) == 0 else h


def prediction_sets(probs, level: float = 0.90, rng: np.random.Generator | None = None) -> np.ndarray:
    """Boolean membership mask: classes added by descending probability until mass >= level.

    The plain rule is conservative: its expected coverage under calibration is
    the mean set mass, which overshoots ``level``.  With ``rng`` the last class
    needed to reach the level is kept only with probability
    ``(level - mass_before) / p_last``, which makes the expected coverage equal
    ``level`` (sets may then be empty).
    """
    p = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    order = np.argsort(-p, axis=-1, kind="stable")
    sorted_p = np.take_along_axis(p, order, axis=-1)
    cum = np.cumsum(sorted_p, axis=-1)
    # a class is included if the mass before it is still short of the level
    before = cum - sorted_p
    include_sorted = before < level - 1e-12
    if rng is not None:
        last = include_sorted.sum(axis=-1) - 1
        rows = np.arange(len(p))
        p_last = sorted_p[rows, last]
        keep = np.where(p_last > 0, (level - before[rows, last]) / np.where(p_last > 0, p_last, 1.0), 1.0)
        include_sorted[rows, last] = rng.random(len(p)) < keep
    mask = np.zeros_like(p, dtype=bool)
    np.put_along_axis(mask, order, include_sorted, axis=-1)
    return mask


def coverage_eval(
    probs, labels, level: float = 0.90, rng: np.random.Generator | None = None
) -> tuple[float, np.ndarray, np.ndarray]:
    """Coverage fraction plus per-sample set sizes and covered flags."""
    labels = np.asarray(labels, dtype=int)
    mask = prediction_sets(probs, level, rng)
    if len(labels) != len(mask):
        raise ValueError("probs and labels differ in length")
    covered = mask[np.arange(len(labels)), labels]
    sizes = mask.sum(axis=-1)
    frac = float(covered.mean()) if len(labels) else float("nan")
    return frac, sizes, covered


def uq_report(ens: ShotEnsemble, epistemic: float) -> UQReport:
    m = ens.mean
    return UQReport(aleatoric_variance(ens), float(epistemic), predictive_entropy(m), m)


def evaluate_uq(
    model: HybridModel,
    X,
    labels,
    n_shots: int = DEFAULT_SHOTS,
    n_members: int = DEFAULT_MEMBERS,
    sigma: float = DEFAULT_SIGMA,
    level: float = 0.90,
    seed: int = 0,
    randomized_sets: bool = False,
) -> dict[str, np.ndarray]:
    """Per-sample UQ table over a test set. Prediction sets use the shot-mean probabilities."""
    ensembles = shot_ensembles(model, X, n_shots, seed)
    mean = np.stack([e.mean for e in ensembles])
    set_rng = np.random.default_rng([seed, 2]) if randomized_sets else None
    _, sizes, covered = coverage_eval(mean, labels, level, set_rng)
    return {
        "sample_id": np.arange(len(ensembles)),
        "entropy": predictive_entropy(mean),
        "aleatoric": np.array([aleatoric_variance(e) for e in ensembles]),
        "epistemic": epistemic_variance(model, X, n_members, sigma, seed + 1),
        "set_size": sizes,
        "covered": covered.astype(int),
    }


def write_uq_csv(table: dict[str, np.ndarray], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(UQ_COLUMNS)
        for i in range(len(table["sample_id"])):
            row = []
            for c in UQ_COLUMNS:
                v = table[c][i]
                row.append(repr(float(v)) if c in ("entropy", "aleatoric", "epistemic") else str(int(v)))
            w.writerow(row)
