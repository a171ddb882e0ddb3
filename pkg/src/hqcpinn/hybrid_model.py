"""Hybrid pre-net -> circuit -> post-net model, the classical baseline, and training.

Every model exposes the same small surface used by :func:`fit`:

* ``trainable_vector`` / ``set_trainable_vector`` over the unfrozen blocks,
* ``forward(X) -> (probs, aux)``,
* ``data_grad(X, y, focal, mode)`` and ``physics_grad(Xc, cfg, mode)``.

Gradient modes: ``exact`` (parameter-shift rule throughout, nested for the
physics term), ``fast`` (circuit angles of the physics term by central
differences) and ``adjoint`` (reverse sweep through the statevector, the
training default).  ``adjoint`` and ``exact`` agree to rounding; the shift rule
is the reference the tests certify against finite differences.

Inputs are raw 25-feature rows; each model owns a fixed standardising
``Scaler`` so that physics derivatives are taken w.r.t. the raw coordinates.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .circuit import CircuitSpec, expectations
from .classical_net import (
    AdamState,
    Dense,
    DenseNet,
    FocalLossConfig,
    adam_step,
    class_weights,
    focal_loss_batch,
    postnet,
    prenet,
    softmax,
)
from .gradients import SHIFT, _shift_stack, adjoint_gradient, encoding_jacobian, param_shift_jacobian, shift_gradient
from .physics import Domain, PhysicsConfig, physics_terms, sample_collocation

log = logging.getLogger(__name__)

N_FEATURES = 25
CHECKPOINT_VERSION = 1
# amplitude budget per vectorised circuit call (complex128 -> 16 bytes each)
_AMP_BUDGET = 1 << 22

# columns encoded directly when the pre-net is ablated
DIRECT_FEATURES = (1, 0, 16, 17, 18, 19, 4, 2)


GRAD_MODES = ("adjoint", "exact", "fast")


def _check_mode(mode: str) -> None:
    if mode not in GRAD_MODES:
        raise ValueError(f"grad_mode must be one of {GRAD_MODES}, got {mode!r}")


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class Scaler:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Scaler":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        scale = X.std(axis=0)
        scale[scale < 1e-12] = 1.0
        return cls(mean, scale)

    @classmethod
    def identity(cls, d: int = N_FEATURES) -> "Scaler":
        return cls(np.zeros(d), np.ones(d))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale


def _coordinate_tangents(n: int, scaler: Scaler, cfg: PhysicsConfig) -> np.ndarray:
    """Standardised-input tangents for d/dt (index 0) and d/dx (index 1)."""
    d = np.zeros((n, 2, scaler.mean.size))
    d[:, 0, cfg.i_t] = 1.0 / scaler.scale[cfg.i_t]
    d[:, 1, cfg.i_x] = 1.0 / scaler.scale[cfg.i_x]
    return d


class Model:
    """Block bookkeeping shared by all models."""

    n_classes: int
    scaler: Scaler
    trainable: dict[str, bool]

    def block_names(self) -> list[str]:
        raise NotImplementedError

    def get_block(self, name: str) -> np.ndarray:
        raise NotImplementedError

    def set_block(self, name: str, flat: np.ndarray) -> None:
        raise NotImplementedError

    def block_sizes(self) -> dict[str, int]:
        return {n: self.get_block(n).size for n in self.block_names()}

    def trainable_blocks(self) -> list[str]:
        return [n for n in self.block_names() if self.trainable.get(n, True)]

    def trainable_vector(self) -> np.ndarray:
        blocks = [self.get_block(n) for n in self.trainable_blocks()]
        return np.concatenate(blocks) if blocks else np.zeros(0)

    def set_trainable_vector(self, vec: np.ndarray) -> None:
        i = 0
        for n in self.trainable_blocks():
            size = self.get_block(n).size
            self.set_block(n, vec[i : i + size])
            i += size
        if i != vec.size:
            raise ValueError(f"vector length {vec.size} != trainable size {i}")

    def _pack(self, grads: dict[str, np.ndarray]) -> np.ndarray:
        parts = [grads[n] for n in self.trainable_blocks()]
        return np.concatenate(parts) if parts else np.zeros(0)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Argmax class (ties resolve to the lower index) and probabilities."""
        probs, _ = self.forward(X)
        return np.argmax(probs, axis=-1), probs

    def data_loss(self, X, y, focal: FocalLossConfig) -> float:
        logits = self.logits(X)
        return focal_loss_batch(logits, y, focal)[0]

    def physics_loss(self, Xc, cfg: PhysicsConfig) -> tuple[float, float]:
        if len(Xc) == 0:
            return 0.0, 0.0
        aux, d_aux = self.physics_outputs(Xc, cfg)
        L_sv, L_m, _, _ = physics_terms(aux, d_aux, cfg)
        return L_sv, L_m


# ---------------------------------------------------------------------------
# hybrid


@dataclass
class HybridModel(Model):
    spec: CircuitSpec
    pre: DenseNet
    phi: np.ndarray
    post: DenseNet
    n_classes: int = 4
    scaler: Scaler = field(default_factory=Scaler.identity)
    trainable: dict[str, bool] = field(default_factory=lambda: {"pre": True, "phi": True, "post": True})
    fixed_encoder: bool = False  # pre-net replaced by a fixed feature selection

    @classmethod
    def create(
        cls,
        spec: CircuitSpec,
        seed: int,
        n_classes: int = 4,
        scaler: Scaler | None = None,
        use_prenet: bool = True,
    ) -> "HybridModel":
        rng = np.random.default_rng(seed)
        if use_prenet:
            pre = prenet(N_FEATURES, spec.n_qubits, rng)
        else:
            pre = direct_encoder(spec.n_qubits)
        phi = rng.uniform(0.0, 2.0 * np.pi, spec.n_params)
        post = postnet(spec.n_qubits, n_classes, rng)
        model = cls(spec, pre, phi, post, n_classes, scaler or Scaler.identity(), fixed_encoder=not use_prenet)
        if not use_prenet:
            model.trainable["pre"] = False
        return model

    def block_names(self) -> list[str]:
        return ["phi", "post"] if self.fixed_encoder else ["pre", "phi", "post"]

    def get_block(self, name: str) -> np.ndarray:
        if name == "pre":
            return self.pre.get_flat()
        if name == "phi":
            return self.phi.copy()
        if name == "post":
            return self.post.get_flat()
        raise KeyError(name)

    def set_block(self, name: str, flat: np.ndarray) -> None:
        if name == "pre":
            self.pre.set_flat(flat)
        elif name == "phi":
            if flat.size != self.spec.n_params:
                raise ValueError("wrong number of circuit angles")
            self.phi = np.array(flat, dtype=np.float64)
        elif name == "post":
            self.post.set_flat(flat)
        else:
            raise KeyError(name)

    # -- forward -------------------------------------------------------------

    def _check(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[-1] != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} features, got {X.shape[-1]}")
        return X

    def encode(self, X) -> np.ndarray:
        return self.pre.forward(self.scaler.transform(self._check(X)))

    def expectations(self, X) -> np.ndarray:
        return _chunked_expectations(self.spec, self.encode(X), self.phi)

    def forward(self, X):
        """Expectation-mode forward: ``(probs, aux)``."""
        q = self.expectations(X)
        out = self.post.forward(q)
        return softmax(out[:, : self.n_classes]), out[:, self.n_classes :]

    def forward_full(self, X):
        """``(probs, aux, q)`` for inspection."""
        q = self.expectations(X)
        out = self.post.forward(q)
        return softmax(out[:, : self.n_classes]), out[:, self.n_classes :], q

    def logits(self, X) -> np.ndarray:
        return self.post.forward(self.expectations(X))[:, : self.n_classes]

    def head_from_measurements(self, q: np.ndarray) -> np.ndarray:
        """Class probabilities from given qubit readouts (expectations or +-1 shots)."""
        return softmax(self.post.forward(q)[..., : self.n_classes])

    # -- data loss -----------------------------------------------------------

    def data_grad(self, X, y, focal: FocalLossConfig, grad_mode: str = "adjoint"):
        _check_mode(grad_mode)
        X = self._check(X)
        Xs = self.scaler.transform(X)
        z = self.pre.forward(Xs)
        q = expectations(self.spec, z, self.phi)
        out = self.post.forward(q)
        loss, g_logits = focal_loss_batch(out[:, : self.n_classes], y, focal)
        g_out = np.zeros_like(out)
        g_out[:, : self.n_classes] = g_logits
        g_post, g_q, _ = self.post.backward(g_out)
        grads = {"post": g_post}
        need_pre = "pre" in self.block_names() and self.trainable.get("pre", True)
        need_phi = self.trainable.get("phi", True)
        if grad_mode == "adjoint":
            g_z = np.zeros_like(z)
            g_phi = np.zeros(self.spec.n_params)
            size = max(1, _AMP_BUDGET // (4 << self.spec.n_qubits))
            for i in range(0, len(z), size):
                sl = slice(i, i + size)
                _, g_z[sl], gp = adjoint_gradient(self.spec, z[sl], self.phi, g_q[sl])
                g_phi += gp.sum(axis=0)
        else:
            if need_phi:
                jp = param_shift_jacobian(self.spec, z, self.phi[None, :])
                g_phi = np.einsum("bk,bkp->p", g_q, jp)
            if need_pre:
                jz = encoding_jacobian(self.spec, z, self.phi[None, :])
                g_z = np.einsum("bk,bkj->bj", g_q, jz)
        if need_phi:
            grads["phi"] = g_phi
        if need_pre:
            grads["pre"] = self.pre.backward(g_z)[0]
        return loss, self._pack(grads)

    # -- physics -------------------------------------------------------------

    def _circuit_with_jacobian(self, z: np.ndarray, phi: np.ndarray):
        """Expectations and encoding Jacobian [k, j] at points z (..., n), angles phi (..., p)."""
        n = self.spec.n_qubits
        pts = np.concatenate([z[..., None, :], _shift_stack(z, SHIFT)], axis=-2)
        ps = np.broadcast_to(phi[..., None, :], pts.shape[:-1] + phi.shape[-1:])
        f = expectations(self.spec, pts, ps)
        jac = 0.5 * (f[..., 1 : n + 1, :] - f[..., n + 1 :, :])  # [..., j, k]
        return f[..., 0, :], np.swapaxes(jac, -1, -2)

    def _physics_forward(self, Xc, cfg: PhysicsConfig):
        Xc = self._check(Xc)
        Xs = self.scaler.transform(Xc)
        dXs = _coordinate_tangents(len(Xc), self.scaler, cfg)
        z, u = self.pre.forward(Xs, dXs)
        q, jac = self._circuit_with_jacobian(z, self.phi[None, :])
        v = np.einsum("nkj,ntj->ntk", jac, u)
        out, dout = self.post.forward(q, v)
        return z, u, q, jac, out, dout

    def physics_outputs(self, Xc, cfg: PhysicsConfig):
        """Aux outputs (A, Q, q_l, S_f) and their (d/dt, d/dx) tangents."""
        if len(Xc) == 0:
            return np.zeros((0, 4)), np.zeros((0, 2, 4))
        parts = [self._physics_forward(c, cfg)[4:] for c in self._point_chunks(Xc, 2 * self.spec.n_qubits + 1)]
        out = np.concatenate([p[0] for p in parts])
        dout = np.concatenate([p[1] for p in parts])
        K = self.n_classes
        return out[:, K : K + 4], dout[:, :, K : K + 4]

    def _point_chunks(self, X, circuits_per_point: int):
        per = circuits_per_point * (1 << self.spec.n_qubits)
        size = max(1, _AMP_BUDGET // per)
        return [X[i : i + size] for i in range(0, len(X), size)]

    def physics_grad(self, Xc, cfg: PhysicsConfig, grad_mode: str = "adjoint"):
        """``(L_sv, L_m, grad)`` with grad of lambda_sv*L_sv + lambda_m*L_m."""
        _check_mode(grad_mode)
        Xc = self._check(Xc) if len(Xc) else np.zeros((0, N_FEATURES))
        n = len(Xc)
        if n == 0:
            return 0.0, 0.0, np.zeros(self.trainable_vector().size)
        z, u, q, jac, out, dout = self._physics_forward(Xc, cfg)
        K = self.n_classes
        L_sv, L_m, g_aux, g_daux = physics_terms(out[:, K : K + 4], dout[:, :, K : K + 4], cfg)
        g_out = np.zeros_like(out)
        g_out[:, K : K + 4] = g_aux
        g_dout = np.zeros_like(dout)
        g_dout[:, :, K : K + 4] = g_daux
        g_post, g_q, g_v = self.post.backward(g_out, g_dout)
        g_jac = np.einsum("ntk,ntj->nkj", g_v, u)
        g_u = np.einsum("nkj,ntk->ntj", jac, g_v)

        grads = {"post": g_post}
        need_pre = "pre" in self.block_names() and self.trainable.get("pre", True)
        need_phi = self.trainable.get("phi", True)
        # composite scalar per point: g_q . f + <g_jac, J>; shift rule is exact for it
        n_circ = 2 * self.spec.n_qubits + 1

        def composite(zs, ps, gq, gj):
            f0, jj = self._circuit_with_jacobian(zs, ps)
            return np.einsum("nsk,nk->ns", f0, gq) + np.einsum("nskj,nkj->ns", jj, gj)

        if grad_mode == "adjoint" and (need_phi or need_pre):
            g_phi, g_z = self._adjoint_composite(z, g_q, g_jac)
            if need_phi:
                grads["phi"] = g_phi
        else:
            if need_phi:
                if grad_mode == "exact":
                    g_phi = np.zeros(self.spec.n_params)
                    chunk = max(1, _AMP_BUDGET // (n_circ * 2 * self.spec.n_params * (1 << self.spec.n_qubits)))
                    for i in range(0, n, chunk):
                        sl = slice(i, i + chunk)
                        m = len(z[sl])
                        phis = np.broadcast_to(self.phi, (m, self.spec.n_params))
                        fn = lambda zs, ps, a=g_q[sl], b=g_jac[sl]: composite(zs, ps, a, b)
                        g_phi += shift_gradient(fn, z[sl], phis, "params").sum(axis=0)
                else:
                    g_phi = self._fd_phi(z, u, cfg)
                grads["phi"] = g_phi
            if need_pre:
                g_z = np.zeros_like(z)
                chunk = max(1, _AMP_BUDGET // (n_circ * 2 * self.spec.n_qubits * (1 << self.spec.n_qubits)))
                for i in range(0, n, chunk):
                    sl = slice(i, i + chunk)
                    m = len(z[sl])
                    phis = np.broadcast_to(self.phi, (m, self.spec.n_params))
                    fn = lambda zs, ps, a=g_q[sl], b=g_jac[sl]: composite(zs, ps, a, b)
                    g_z[sl] = shift_gradient(fn, z[sl], phis, "z")
        if need_pre:
            # pre-net cache still holds the tangent forward from _physics_forward
            grads["pre"] = self.pre.backward(g_z, g_u)[0]
        return L_sv, L_m, self._pack(grads)

    def _adjoint_composite(self, z: np.ndarray, g_q: np.ndarray, g_jac: np.ndarray):
        """Gradients of sum_n [g_q . f + <g_jac, J>] w.r.t. angles (summed) and z (per point)."""
        n = self.spec.n_qubits
        pts = np.concatenate([z[:, None, :], _shift_stack(z, SHIFT)], axis=1)  # (N, 1+2n, n)
        half = 0.5 * np.swapaxes(g_jac, 1, 2)  # (N, j, k)
        w = np.concatenate([g_q[:, None, :], half, -half], axis=1)
        g_phi = np.zeros(self.spec.n_params)
        g_z = np.zeros_like(z)
        size = max(1, _AMP_BUDGET // (4 * (2 * n + 1) * (1 << n)))
        for i in range(0, len(z), size):
            sl = slice(i, i + size)
            _, gz, gp = adjoint_gradient(self.spec, pts[sl], self.phi, w[sl])
            g_phi += gp.sum(axis=(0, 1))
            g_z[sl] = gz.sum(axis=1)
        return g_phi, g_z

    def _fd_phi(self, z, u, cfg: PhysicsConfig, h: float = 1e-4) -> np.ndarray:
        """Central differences of the weighted physics loss over circuit angles."""
        post = self.post.copy()
        K = self.n_classes

        def value(phi):
            q, jac = self._circuit_with_jacobian(z, phi[None, :])
            v = np.einsum("nkj,ntj->ntk", jac, u)
            out, dout = post.forward(q, v)
            L_sv, L_m, _, _ = physics_terms(out[:, K : K + 4], dout[:, :, K : K + 4], cfg)
            return cfg.lambda_sv * L_sv + cfg.lambda_m * L_m

        g = np.zeros(self.spec.n_params)
        for j in range(self.spec.n_params):
            e = np.zeros(self.spec.n_params)
            e[j] = h
            g[j] = (value(self.phi + e) - value(self.phi - e)) / (2 * h)
        return g

    def copy(self) -> "HybridModel":
        return HybridModel(
            self.spec,
            self.pre.copy(),
            self.phi.copy(),
            self.post.copy(),
            self.n_classes,
            Scaler(self.scaler.mean.copy(), self.scaler.scale.copy()),
            dict(self.trainable),
            self.fixed_encoder,
        )


def direct_encoder(n_qubits: int) -> DenseNet:
    """Fixed pi*tanh of ``n_qubits`` selected standardised columns (no trainable weights)."""
    if n_qubits > len(DIRECT_FEATURES):
        raise ValueError(f"direct encoding supports at most {len(DIRECT_FEATURES)} qubits")
    w = np.zeros((n_qubits, N_FEATURES))
    for k, col in enumerate(DIRECT_FEATURES[:n_qubits]):
        w[k, col] = 1.0
    return DenseNet([Dense(w, np.zeros(n_qubits), "tanh_pi")])


def _chunked_expectations(spec: CircuitSpec, z: np.ndarray, phi: np.ndarray) -> np.ndarray:
    size = max(1, _AMP_BUDGET // (1 << spec.n_qubits))
    return np.concatenate([expectations(spec, z[i : i + size], phi) for i in range(0, len(z), size)]) if len(z) else np.zeros((0, spec.n_qubits))


# ---------------------------------------------------------------------------
# classical models


@dataclass
class ClassicalPINN(Model):
    """25 -> 256 -> 128 -> 64 -> K tanh MLP; aux heads share the last layer."""

    net: DenseNet
    n_classes: int = 4
    scaler: Scaler = field(default_factory=Scaler.identity)
    trainable: dict[str, bool] = field(default_factory=lambda: {"net": True})
    aux: bool = True

    @classmethod
    def create(cls, seed: int, n_classes: int = 4, scaler: Scaler | None = None, aux: bool = True, hidden=(256, 128, 64)):
        rng = np.random.default_rng(seed)
        out = n_classes + (4 if aux else 0)
        sizes = [N_FEATURES, *hidden, out]
        acts = ["tanh"] * len(hidden) + ["identity"]
        sp = (n_classes, n_classes + 3) if aux else ()
        return cls(DenseNet.build(sizes, acts, rng, softplus_units=sp), n_classes, scaler or Scaler.identity(), aux=aux)

    def block_names(self) -> list[str]:
        return ["net"]

    def get_block(self, name: str) -> np.ndarray:
        if name != "net":
            raise KeyError(name)
        return self.net.get_flat()

    def set_block(self, name: str, flat: np.ndarray) -> None:
        if name != "net":
            raise KeyError(name)
        self.net.set_flat(flat)

    def logits(self, X) -> np.ndarray:
        return self.net.forward(self.scaler.transform(X))[:, : self.n_classes]

    def forward(self, X):
        out = self.net.forward(self.scaler.transform(X))
        return softmax(out[:, : self.n_classes]), out[:, self.n_classes :]

    def data_grad(self, X, y, focal: FocalLossConfig, grad_mode: str = "adjoint"):
        out = self.net.forward(self.scaler.transform(X))
        loss, g_logits = focal_loss_batch(out[:, : self.n_classes], y, focal)
        g_out = np.zeros_like(out)
        g_out[:, : self.n_classes] = g_logits
        return loss, self._pack({"net": self.net.backward(g_out)[0]})

    def physics_outputs(self, Xc, cfg: PhysicsConfig):
        if not self.aux:
            raise ValueError("model built without aux heads")
        Xs = self.scaler.transform(Xc)
        out, dout = self.net.forward(Xs, _coordinate_tangents(len(Xc), self.scaler, cfg))
        K = self.n_classes
        return out[:, K : K + 4], dout[:, :, K : K + 4]

    def physics_grad(self, Xc, cfg: PhysicsConfig, grad_mode: str = "adjoint"):
        if len(Xc) == 0:
            return 0.0, 0.0, np.zeros(self.trainable_vector().size)
        Xs = self.scaler.transform(Xc)
        out, dout = self.net.forward(Xs, _coordinate_tangents(len(Xc), self.scaler, cfg))
        K = self.n_classes
        L_sv, L_m, g_aux, g_daux = physics_terms(out[:, K : K + 4], dout[:, :, K : K + 4], cfg)
        g_out = np.zeros_like(out)
        g_out[:, K : K + 4] = g_aux
        g_dout = np.zeros_like(dout)
        g_dout[:, :, K : K + 4] = g_daux
        return L_sv, L_m, self._pack({"net": self.net.backward(g_out, g_dout)[0]})


@dataclass
class PretrainModel(Model):
    """Pre-net followed by a classical head, used for multi-hazard pre-training."""

    pre: DenseNet
    head: DenseNet
    n_classes: int = 11
    scaler: Scaler = field(default_factory=Scaler.identity)
    trainable: dict[str, bool] = field(default_factory=lambda: {"pre": True, "head": True})

    @classmethod
    def create(cls, n_qubits: int, seed: int, n_classes: int = 11, scaler: Scaler | None = None):
        rng = np.random.default_rng(seed)
        pre = prenet(N_FEATURES, n_qubits, rng)
        head = postnet(n_qubits, n_classes, rng, aux=False)
        return cls(pre, head, n_classes, scaler or Scaler.identity())

    def block_names(self) -> list[str]:
        return ["pre", "head"]

    def get_block(self, name: str) -> np.ndarray:
        return {"pre": self.pre, "head": self.head}[name].get_flat()

    def set_block(self, name: str, flat: np.ndarray) -> None:
        {"pre": self.pre, "head": self.head}[name].set_flat(flat)

    def logits(self, X) -> np.ndarray:
        return self.head.forward(self.pre.forward(self.scaler.transform(X)))

    def forward(self, X):
        return softmax(self.logits(X)), np.zeros((len(X), 0))

    def data_grad(self, X, y, focal: FocalLossConfig, grad_mode: str = "adjoint"):
        z = self.pre.forward(self.scaler.transform(X))
        out = self.head.forward(z)
        loss, g = focal_loss_batch(out, y, focal)
        g_head, g_z, _ = self.head.backward(g)
        return loss, self._pack({"head": g_head, "pre": self.pre.backward(g_z)[0]})

    def physics_outputs(self, Xc, cfg):
        raise ValueError("pre-training model has no physics heads")

    def physics_grad(self, Xc, cfg, grad_mode="adjoint"):
        raise ValueError("pre-training model has no physics heads")


# ---------------------------------------------------------------------------
# loss assembly and training


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    target_val_loss: float = 0.40
    seed: int = 0
    grad_mode: str = "adjoint"
    n_collocation_val: int = 64
    restore_best: bool = True
    stop_at_target: bool = False  # end training once the validation target is met

    def __post_init__(self) -> None:
        if self.max_epochs < 0 or self.patience < 1 or self.batch_size < 1:
            raise ValueError("epochs, patience and batch size must be positive")
        if self.lr < 0:
            raise ValueError("learning rate must be non-negative")
        _check_mode(self.grad_mode)


@dataclass
class LossComponents:
    data: float
    sv: float
    manning: float
    total: float


def total_loss(model: Model, X, y, Xc, physics: PhysicsConfig, focal: FocalLossConfig, with_grad: bool = False, grad_mode: str = "adjoint"):
    """L_data + lambda_sv * L_SV + lambda_M * L_Manning, optionally with the gradient."""
    if len(X) == 0:
        raise ValueError("empty data batch")
    use_phys = len(Xc) > 0 and (physics.lambda_sv > 0 or physics.lambda_m > 0 or not with_grad)
    if not with_grad:
        L_d = model.data_loss(X, y, focal)
        L_sv, L_m = model.physics_loss(Xc, physics) if use_phys and _has_physics(model) else (0.0, 0.0)
        return LossComponents(L_d, L_sv, L_m, L_d + physics.lambda_sv * L_sv + physics.lambda_m * L_m)
    L_d, g = model.data_grad(X, y, focal, grad_mode)
    L_sv = L_m = 0.0
    if use_phys:
        L_sv, L_m, g_p = model.physics_grad(Xc, physics, grad_mode)
        g = g + g_p
    comps = LossComponents(L_d, L_sv, L_m, L_d + physics.lambda_sv * L_sv + physics.lambda_m * L_m)
    return comps, g


def _has_physics(model: Model) -> bool:
    return not isinstance(model, PretrainModel)


class EarlyStopping:
    """Stop after ``patience`` consecutive epochs without a new best."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = np.inf
        self.best_epoch = 0
        self.bad = 0

    def update(self, epoch: int, value: float) -> bool:
        if value < self.best:
            self.best, self.best_epoch, self.bad = value, epoch, 0
        else:
            self.bad += 1
        return self.bad >= self.patience


@dataclass
class TrainTrace:
    rows: list[dict] = field(default_factory=list)
    epochs: int = 0
    best_epoch: int = 0
    epochs_to_target: int | None = None
    target: float = 0.40

    def add(self, epoch: int, split: str, c: LossComponents) -> None:
        self.rows.append(
            {"epoch": epoch, "split": split, "L_data": c.data, "L_SV": c.sv, "L_M": c.manning, "L_total": c.total}
        )

    def series(self, split: str, key: str = "L_total", include_initial: bool = False) -> list[float]:
        return [r[key] for r in self.rows if r["split"] == split and (include_initial or r["epoch"] > 0)]

    @property
    def val_total(self) -> list[float]:
        return self.series("val")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "L_data", "L_SV", "L_M", "L_total", "split"])
            for r in self.rows:
                w.writerow([r["epoch"], _fmt(r["L_data"]), _fmt(r["L_SV"]), _fmt(r["L_M"]), _fmt(r["L_total"]), r["split"]])


def _fmt(v: float) -> str:
    return repr(float(v))


def epochs_to_target(val_losses, threshold: float = 0.40) -> int | None:
    """First 1-based epoch whose validation loss is <= threshold."""
    for i, v in enumerate(val_losses, start=1):
        if v <= threshold:
            return i
    return None


def fit(
    model: Model,
    train: tuple[np.ndarray, np.ndarray],
    val: tuple[np.ndarray, np.ndarray],
    physics: PhysicsConfig,
    cfg: TrainConfig,
    focal: FocalLossConfig | None = None,
) -> tuple[Model, TrainTrace]:
    """Mini-batch Adam on the trainable blocks with early stopping on validation total loss."""
    X_tr, y_tr = (np.asarray(a) for a in train)
    X_va, y_va = (np.asarray(a) for a in val)
    if len(X_tr) == 0:
        raise ValueError("empty training split")
    if focal is None:
        focal = FocalLossConfig(2.0, tuple(class_weights(y_tr, model.n_classes)))
    rng = np.random.default_rng(cfg.seed)
    domain = Domain.from_features(X_tr, physics)
    physics_on = _has_physics(model) and (physics.lambda_sv > 0 or physics.lambda_m > 0)
    Xc_val = np.zeros((0, X_tr.shape[1]))
    if _has_physics(model) and len(X_va):
        Xc_val = sample_collocation(Domain.from_features(X_va, physics), cfg.n_collocation_val, cfg.seed + 1, X_va, physics)

    def evaluate() -> LossComponents:
        if len(X_va) == 0:
            return LossComponents(np.nan, np.nan, np.nan, np.nan)
        return total_loss(model, X_va, y_va, Xc_val, physics, focal)

    trace = TrainTrace(target=cfg.target_val_loss)
    trace.add(0, "val", evaluate())
    opt = AdamState.zeros(model.trainable_vector().size, cfg.lr)
    stopper = EarlyStopping(cfg.patience)
    best_vec = model.trainable_vector()
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(X_tr))
        sums = np.zeros(4)
        for start in range(0, len(order), cfg.batch_size):
            idx = np.sort(order[start : start + cfg.batch_size])
            n_c = physics.n_collocation if physics_on else 0
            Xc = sample_collocation(domain, n_c, rng, X_tr, physics)
            comps, grad = total_loss(model, X_tr[idx], y_tr[idx], Xc, physics, focal, True, cfg.grad_mode)
            if not np.isfinite(comps.total) or not np.all(np.isfinite(grad)):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}: {comps}")
            model.set_trainable_vector(adam_step(opt, model.trainable_vector(), grad))
            sums += np.array([comps.data, comps.sv, comps.manning, comps.total]) * len(idx)
        trace.add(epoch, "train", LossComponents(*(sums / len(X_tr))))
        val_c = evaluate()
        if not np.isfinite(val_c.total) and len(X_va):
            raise TrainingDiverged(f"non-finite validation loss at epoch {epoch}")
        trace.add(epoch, "val", val_c)
        trace.epochs = epoch
        log.debug("epoch %d val %.5f", epoch, val_c.total)
        improved = val_c.total < stopper.best
        stop = stopper.update(epoch, val_c.total)
        if improved:
            best_vec = model.trainable_vector()
        if trace.epochs_to_target is None and val_c.total <= cfg.target_val_loss:
            trace.epochs_to_target = epoch
            stop = stop or cfg.stop_at_target
        if stop:
            break
    trace.best_epoch = stopper.best_epoch
    if cfg.restore_best and len(X_va) and trace.epochs > 0:
        model.set_trainable_vector(best_vec)
    return model, trace


def transfer_protocol(
    pretrain: tuple[np.ndarray, np.ndarray],
    finetune_train: tuple[np.ndarray, np.ndarray],
    finetune_val: tuple[np.ndarray, np.ndarray],
    spec: CircuitSpec,
    physics: PhysicsConfig,
    cfg_pre: TrainConfig,
    cfg_fine: TrainConfig,
    n_pretrain_classes: int = 11,
    pretrain_val: tuple[np.ndarray, np.ndarray] | None = None,
):
    """Classical pre-training on multi-hazard labels, then quantum fine-tuning with the pre-net frozen.

    Returns ``(hybrid_model, pretrain_trace, finetune_trace)``.
    """
    Xp, yp = (np.asarray(a) for a in pretrain)
    Xf, _ = finetune_train
    if Xp.shape[1] != N_FEATURES or np.asarray(Xf).shape[1] != N_FEATURES:
        raise ValueError("pre-training and fine-tuning data must share the 25-feature schema")
    scaler = Scaler.fit(Xp)
    phase1 = PretrainModel.create(spec.n_qubits, cfg_pre.seed, n_pretrain_classes, scaler)
    pval = pretrain_val if pretrain_val is not None else (Xp[:0], yp[:0])
    phase1, trace1 = fit(phase1, (Xp, yp), pval, physics, cfg_pre)

    rng = np.random.default_rng(cfg_fine.seed)
    phi = rng.uniform(0.0, 2.0 * np.pi, spec.n_params)
    post = postnet(spec.n_qubits, 4, rng)
    model = HybridModel(spec, phase1.pre.copy(), phi, post, 4, scaler)
    model.trainable = {"pre": False, "phi": True, "post": True}
    model, trace2 = fit(model, finetune_train, finetune_val, physics, cfg_fine)
    return model, trace1, trace2


# ---------------------------------------------------------------------------
# checkpoints
#
# Layout (numpy .npz):
#   header          0-d unicode array holding JSON {"format_version", "kind", ...}
#   param/<block>   float64 flat parameter block, one per model block
#   scaler/mean, scaler/scale   input standardisation (not trainable)


def save_checkpoint(model: Model, path) -> None:
    header = {"format_version": CHECKPOINT_VERSION, "kind": type(model).__name__, "n_classes": model.n_classes}
    if isinstance(model, HybridModel):
        header |= {"circuit": model.spec.to_config(), "fixed_encoder": model.fixed_encoder, "hidden_pre": model.pre.layers[0].shape[0]}
    elif isinstance(model, ClassicalPINN):
        header |= {"sizes": [model.net.in_dim] + [l.shape[0] for l in model.net.layers], "aux": model.aux}
    elif isinstance(model, PretrainModel):
        header |= {"n_qubits": model.pre.out_dim}
    arrays = {f"param/{n}": model.get_block(n) for n in model.block_names()}
    arrays["scaler/mean"] = model.scaler.mean
    arrays["scaler/scale"] = model.scaler.scale
    with open(path, "wb") as fh:
        np.savez(fh, header=np.array(json.dumps(header, sort_keys=True)), **arrays)


def load_checkpoint(path) -> Model:
    with np.load(path, allow_pickle=False) as data:
        header = json.loads(str(data["header"]))
        if header.get("format_version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {header.get('format_version')}")
        scaler = Scaler(data["scaler/mean"], data["scaler/scale"])
        blocks = {k.split("/", 1)[1]: data[k] for k in data.files if k.startswith("param/")}
    kind = header["kind"]
    K = header["n_classes"]
    if kind == "HybridModel":
        spec = CircuitSpec.from_config(header["circuit"])
        model = HybridModel.create(spec, 0, K, scaler, use_prenet=not header["fixed_encoder"])
    elif kind == "ClassicalPINN":
        sizes = header["sizes"]
        model = ClassicalPINN.create(0, K, scaler, aux=header["aux"], hidden=tuple(sizes[1:-1]))
    elif kind == "PretrainModel":
        model = PretrainModel.create(header["n_qubits"], 0, K, scaler)
    else:
        raise ValueError(f"unknown model kind {kind}")
    for name, arr in blocks.items():
        model.set_block(name, arr)
    return model


def checkpoint_element_count(path) -> int:
    with np.load(path, allow_pickle=False) as data:
        return int(sum(data[k].size for k in data.files if k.startswith("param/")))
