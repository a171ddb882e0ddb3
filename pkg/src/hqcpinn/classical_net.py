"""Dense networks with hand-written reverse mode, Adam, and focal loss.

Networks carry optional *tangents*: alongside a batch ``x (B, d)`` the forward
pass can push directional derivatives ``dx (B, T, d)`` (forward mode), and the
backward pass then differentiates through both.  The physics losses need this
because they penalise input derivatives of the network outputs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LOG_CLAMP = 1e-12
# largest double below 1; keeps pi * tanh strictly inside (-pi, pi) after rounding
_TANH_MAX = np.nextafter(1.0, 0.0)


# ---------------------------------------------------------------------------
# activations: value, first and second derivative


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def activation(name: str, a: np.ndarray):
    if name == "identity":
        one = np.ones_like(a)
        return a, one, np.zeros_like(a)
    if name == "relu":
        d1 = (a > 0).astype(a.dtype)
        return a * d1, d1, np.zeros_like(a)
    if name == "tanh":
        t = np.tanh(a)
        d1 = 1.0 - t * t
        return t, d1, -2.0 * t * d1
    if name == "tanh_pi":
        t = np.clip(np.tanh(a), -_TANH_MAX, _TANH_MAX)
        d1 = 1.0 - t * t
        return np.pi * t, np.pi * d1, -2.0 * np.pi * t * d1
    if name == "softplus":
        s = _sigmoid(a)
        return np.logaddexp(0.0, a), s, s * (1.0 - s)
    raise ValueError(f"unknown activation {name!r}")


def softplus(a):
    return np.logaddexp(0.0, a)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


# ---------------------------------------------------------------------------
# dense network


@dataclass
class Dense:
    weight: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)
    activation: str = "identity"
    # units passed through softplus instead of `activation` (positive aux heads)
    softplus_units: tuple[int, ...] = ()

    @property
    def shape(self) -> tuple[int, int]:
        return self.weight.shape

    def act(self, a: np.ndarray):
        y, d1, d2 = activation(self.activation, a)
        if self.softplus_units:
            idx = list(self.softplus_units)
            ys, d1s, d2s = activation("softplus", a[..., idx])
            y[..., idx], d1[..., idx], d2[..., idx] = ys, d1s, d2s
        return y, d1, d2


@dataclass
class _Cache:
    x: np.ndarray
    dx: np.ndarray | None
    a: np.ndarray
    da: np.ndarray | None
    d1: np.ndarray
    d2: np.ndarray


@dataclass
class DenseNet:
    layers: list[Dense]
    _cache: list[_Cache] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if prev.shape[0] != nxt.shape[1]:
                raise ValueError(f"layer dims do not chain: {prev.shape} -> {nxt.shape}")

    @classmethod
    def build(
        cls,
        sizes: list[int],
        activations: list[str],
        rng: np.random.Generator,
        softplus_units: tuple[int, ...] = (),
    ) -> "DenseNet":
        """Glorot-uniform weights, zero biases.  ``softplus_units`` applies to the last layer."""
        if len(activations) != len(sizes) - 1:
            raise ValueError("need one activation per layer")
        layers = []
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            w = rng.uniform(-lim, lim, size=(fan_out, fan_in))
            last = i == len(sizes) - 2
            layers.append(Dense(w, np.zeros(fan_out), activations[i], softplus_units if last else ()))
        return cls(layers)

    @property
    def in_dim(self) -> int:
        return self.layers[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].shape[0]

    @property
    def n_params(self) -> int:
        return sum(l.weight.size + l.bias.size for l in self.layers)

    def get_flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.weight.ravel(), l.bias]) for l in self.layers])

    def set_flat(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.size != self.n_params:
            raise ValueError(f"expected {self.n_params} values, got {flat.size}")
        i = 0
        for l in self.layers:
            nw = l.weight.size
            l.weight = flat[i : i + nw].reshape(l.weight.shape).copy()
            i += nw
            l.bias = flat[i : i + l.bias.size].copy()
            i += l.bias.size

    def copy(self) -> "DenseNet":
        return DenseNet(
            [Dense(l.weight.copy(), l.bias.copy(), l.activation, l.softplus_units) for l in self.layers]
        )

    def forward(self, x: np.ndarray, dx: np.ndarray | None = None):
        """Returns ``y`` or ``(y, dy)`` when tangents ``dx (B, T, d)`` are given."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.in_dim:
            raise ValueError(f"input has {x.shape[-1]} features, expected {self.in_dim}")
        cache = []
        for l in self.layers:
            a = x @ l.weight.T + l.bias
            da = None if dx is None else dx @ l.weight.T
            y, d1, d2 = l.act(a)
            cache.append(_Cache(x, dx, a, da, d1, d2))
            x = y
            if dx is not None:
                dx = d1[..., None, :] * da
        self._cache = cache
        return x if dx is None else (x, dx)

    def backward(self, g_y: np.ndarray, g_dy: np.ndarray | None = None):
        """Reverse pass through the cached forward.

        Returns ``(param_grad_flat, g_x, g_dx)``; ``g_dx`` is None without tangents.
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        grads = []
        g_x, g_dx = g_y, g_dy
        for l, c in zip(reversed(self.layers), reversed(self._cache)):
            g_a = g_x * c.d1
            g_da = None
            if g_dx is not None and c.da is not None:
                g_a = g_a + np.sum(g_dx * c.da, axis=-2) * c.d2
                g_da = g_dx * c.d1[..., None, :]
            gw = g_a.reshape(-1, g_a.shape[-1]).T @ c.x.reshape(-1, c.x.shape[-1])
            gb = g_a.reshape(-1, g_a.shape[-1]).sum(axis=0)
            if g_da is not None:
                gw = gw + g_da.reshape(-1, g_da.shape[-1]).T @ c.dx.reshape(-1, c.dx.shape[-1])
            grads.append(np.concatenate([gw.ravel(), gb]))
            g_x = g_a @ l.weight
            g_dx = None if g_da is None else g_da @ l.weight
        return np.concatenate(grads[::-1]), g_x, g_dx


def prenet(n_inputs: int, n_qubits: int, rng: np.random.Generator, hidden: int = 64) -> DenseNet:
    """FC(d->64) -> ReLU -> FC(64->n_q) -> pi*tanh."""
    return DenseNet.build([n_inputs, hidden, n_qubits], ["relu", "tanh_pi"], rng)


def postnet(n_qubits: int, n_classes: int, rng: np.random.Generator, hidden: int = 32, aux: bool = True) -> DenseNet:
    """FC(n_q->32) -> ReLU -> FC(32->K [+4 aux]).

    Aux outputs follow the K logits in the order (A, Q, q_l, S_f); A and S_f
    pass through softplus.
    """
    out = n_classes + (4 if aux else 0)
    sp = (n_classes, n_classes + 3) if aux else ()
    return DenseNet.build([n_qubits, hidden, out], ["relu", "identity"], rng, softplus_units=sp)


def forward_prenet(net: DenseNet, x) -> np.ndarray:
    return net.forward(np.asarray(x, dtype=np.float64))


def forward_postnet(net: DenseNet, q, n_classes: int = 4):
    """Returns ``(logits, aux)`` with aux columns (A, Q, q_l, S_f)."""
    out = net.forward(np.asarray(q, dtype=np.float64))
    return out[..., :n_classes], out[..., n_classes : n_classes + 4]


def backprop(net: DenseNet, upstream: np.ndarray) -> np.ndarray:
    """Parameter gradient for the cached forward pass, given dLoss/dOutput."""
    return net.backward(upstream)[0]


# ---------------------------------------------------------------------------
# optimiser


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n: int, lr: float = 1e-3) -> "AdamState":
        return cls(np.zeros(n), np.zeros(n), 0, lr)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
    if params.shape != grads.shape or params.shape != state.m.shape:
        raise ValueError("shape mismatch between params, grads and optimiser state")
    state.t += 1
    state.m = state.beta1 * state.m + (1 - state.beta1) * grads
    state.v = state.beta2 * state.v + (1 - state.beta2) * grads * grads
    m_hat = state.m / (1 - state.beta1**state.t)
    v_hat = state.v / (1 - state.beta2**state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# ---------------------------------------------------------------------------
# focal loss


@dataclass(frozen=True)
class FocalLossConfig:
    gamma: float = 2.0
    alpha: tuple[float, ...] = (1.0, 1.0, 1.0, 1.0)

    def __post_init__(self) -> None:
        if any(a <= 0 for a in self.alpha):
            raise ValueError("class weights must be positive")


def focal_loss(probs, label: int, cfg: FocalLossConfig) -> float:
    """-alpha_y (1 - p_y)^gamma log p_y, with p_y clamped at 1e-12 inside the log."""
    probs = np.asarray(probs, dtype=np.float64)
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError("probabilities must sum to 1")
    p = probs[label]
    return float(-cfg.alpha[label] * (1.0 - p) ** cfg.gamma * np.log(max(p, LOG_CLAMP)))


def focal_loss_batch(logits: np.ndarray, labels: np.ndarray, cfg: FocalLossConfig):
    """Mean focal loss over a batch and its gradient w.r.t. the logits."""
    labels = np.asarray(labels, dtype=int)
    n = labels.size
    probs = softmax(logits)
    rows = np.arange(n)
    p = np.clip(probs[rows, labels], LOG_CLAMP, 1.0)
    alpha = np.asarray(cfg.alpha)[labels]
    g = cfg.gamma
    one_m = 1.0 - p
    logp = np.log(p)
    loss = -alpha * one_m**g * logp
    # d loss / d p_y
    if g == 0:
        dl_dp = -alpha / p
    else:
        dl_dp = alpha * (g * one_m ** (g - 1) * logp - one_m**g / p)
    onehot = np.zeros_like(probs)
    onehot[rows, labels] = 1.0
    # d p_y / d logit_j = p_y (delta_yj - p_j)
    g_logits = (dl_dp * p)[:, None] * (onehot - probs) / n
    return float(loss.mean()), g_logits


def class_weights(labels, n_classes: int) -> np.ndarray:
    """Inverse class frequency, scaled so the per-sample mean weight is 1.

    Absent classes are treated as having one sample, keeping every weight
    finite and positive.
    """
    labels = np.asarray(labels, dtype=int)
    counts = np.maximum(np.bincount(labels, minlength=n_classes)[:n_classes], 1).astype(float)
    w = 1.0 / counts
    if labels.size:
        w = w / w[labels].mean()
    else:
        w = w / w.mean()
    return w
