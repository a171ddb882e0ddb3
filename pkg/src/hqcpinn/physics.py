"""Saint-Venant continuity and Manning consistency losses.

Units: A [m^2], Q [m^3/s], q_l [m^2/s], x [m], t [s], b [m].  The continuity
residual dA/dt + dQ/dx - q_l is in m^2/s; the Manning residual in m^3/s.

Geometry is a rectangular channel of width ``b``: h = A/b, P = b + 2h, R_h = A/P.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

N_FEATURES = 25


@dataclass(frozen=True)
class PhysicsConfig:
    g: float = 9.81  # m/s^2
    channel_width: float = 50.0  # m
    manning_n: float = 0.035  # s/m^(1/3)
    bed_slope: float = 0.001
    lambda_sv: float = 0.1
    lambda_m: float = 0.05
    i_x: int = 23
    i_t: int = 24
    n_collocation: int = 256

    def __post_init__(self) -> None:
        if self.channel_width <= 0 or self.manning_n <= 0:
            raise ValueError("channel width and Manning n must be positive")
        if self.lambda_sv < 0 or self.lambda_m < 0:
            raise ValueError("loss weights must be non-negative")
        if self.i_x == self.i_t or not (0 <= self.i_x < N_FEATURES and 0 <= self.i_t < N_FEATURES):
            raise ValueError("coordinate indices must be distinct and < 25")
        if self.n_collocation < 0:
            raise ValueError("n_collocation must be >= 0")

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def hydraulic_radius(area, width: float):
    """R_h = A / (b + 2 A / b) for a rectangular section."""
    area = np.asarray(area, dtype=np.float64)
    return area / (width + 2.0 * area / width)


def manning_discharge(area, radius, friction_slope, n: float):
    """Q = (1/n) A R_h^(2/3) S_f^(1/2)."""
    area = np.asarray(area, dtype=np.float64)
    radius = np.asarray(radius, dtype=np.float64)
    friction_slope = np.asarray(friction_slope, dtype=np.float64)
    if n <= 0:
        raise ValueError("Manning n must be positive")
    if np.any(area < 0) or np.any(radius < 0) or np.any(friction_slope < 0):
        raise ValueError("area, hydraulic radius and friction slope must be non-negative")
    out = area * radius ** (2.0 / 3.0) * np.sqrt(friction_slope) / n
    return float(out) if out.ndim == 0 else out


def sv_residual(dA_dt, dQ_dx, q_l):
    vals = np.asarray([dA_dt, dQ_dx, q_l], dtype=np.float64)
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite input to continuity residual")
    out = vals[0] + vals[1] - vals[2]
    return float(out) if out.ndim == 0 else out


def manning_residual(Q, A, S_f, cfg: PhysicsConfig):
    A = np.asarray(A, dtype=np.float64)
    if np.any(A <= 0):
        raise ValueError("predicted area must be positive")
    radius = hydraulic_radius(A, cfg.channel_width)
    out = np.asarray(Q, dtype=np.float64) - manning_discharge(A, radius, S_f, cfg.manning_n)
    return float(out) if np.ndim(out) == 0 else out


def physics_terms(aux: np.ndarray, d_aux: np.ndarray, cfg: PhysicsConfig):
    """Mean squared residuals and their gradients w.r.t. model outputs.

    aux: (N, 4) columns (A, Q, q_l, S_f).  d_aux: (N, 2, 4) tangents, index 0
    along t and index 1 along x.  Returns ``(L_sv, L_m, g_aux, g_daux)`` with the
    gradients of ``lambda_sv * L_sv + lambda_m * L_m``.
    """
    n = aux.shape[0]
    if n == 0:
        return 0.0, 0.0, np.zeros_like(aux), np.zeros_like(d_aux)
    A, Q, ql, Sf = aux.T
    r_sv = d_aux[:, 0, 0] + d_aux[:, 1, 1] - ql
    b, nm = cfg.channel_width, cfg.manning_n
    perim = b + 2.0 * A / b
    R = A / perim
    R23 = R ** (2.0 / 3.0)
    sq = np.sqrt(Sf)
    r_m = Q - A * R23 * sq / nm
    L_sv = float(np.mean(r_sv**2))
    L_m = float(np.mean(r_m**2))

    gs = 2.0 * cfg.lambda_sv * r_sv / n
    gm = 2.0 * cfg.lambda_m * r_m / n
    dR_dA = b / perim**2
    dM_dA = sq / nm * (R23 + A * (2.0 / 3.0) * R ** (-1.0 / 3.0) * dR_dA)
    dM_dS = A * R23 / (2.0 * nm * sq)
    g_aux = np.zeros_like(aux)
    g_aux[:, 0] = -gm * dM_dA
    g_aux[:, 1] = gm
    g_aux[:, 2] = -gs
    g_aux[:, 3] = -gm * dM_dS
    g_daux = np.zeros_like(d_aux)
    g_daux[:, 0, 0] = gs
    g_daux[:, 1, 1] = gs
    return L_sv, L_m, g_aux, g_daux


@dataclass(frozen=True)
class Domain:
    x_min: float
    x_max: float
    t_min: float
    t_max: float

    @classmethod
    def from_features(cls, features: np.ndarray, cfg: PhysicsConfig) -> "Domain":
        x = features[:, cfg.i_x]
        t = features[:, cfg.i_t]
        return cls(float(x.min()), float(x.max()), float(t.min()), float(t.max()))


def sample_collocation(
    domain: Domain,
    n_c: int,
    seed,
    feature_pool: np.ndarray,
    cfg: PhysicsConfig,
) -> np.ndarray:
    """Uniform (x, t) over the domain; other columns resampled from their empirical marginals."""
    if domain.x_max < domain.x_min or domain.t_max < domain.t_min:
        raise ValueError("invalid domain bounds")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pool = np.asarray(feature_pool, dtype=np.float64)
    out = np.empty((n_c, pool.shape[1]))
    if n_c == 0:
        return out
    rows = rng.integers(0, pool.shape[0], size=(n_c, pool.shape[1]))
    out[:] = pool[rows, np.arange(pool.shape[1])]
    out[:, cfg.i_x] = rng.uniform(domain.x_min, domain.x_max, n_c)
    out[:, cfg.i_t] = rng.uniform(domain.t_min, domain.t_max, n_c)
    return out


def physics_loss_batch(model, collocation: np.ndarray, cfg: PhysicsConfig, grad_mode: str | None = None):
    """(L_SV, L_Manning) for a model at collocation points.

    With ``grad_mode`` in {"adjoint", "exact", "fast"} also returns the gradient of
    ``lambda_sv * L_SV + lambda_m * L_Manning`` w.r.t. the model's trainable
    vector as a third element.  ``model`` must provide ``physics_outputs`` and,
    for gradients, ``physics_grad``.
    """
    if grad_mode is None:
        aux, d_aux = model.physics_outputs(collocation, cfg)
        L_sv, L_m, _, _ = physics_terms(aux, d_aux, cfg)
        return L_sv, L_m
    return model.physics_grad(collocation, cfg, grad_mode)
