"""1-D Saint-Venant reference solver and the synthetic flood benchmark built on it.

The solver advances (A, Q) for a rectangular channel with an explicit
Lax-Friedrichs scheme in flux form, Manning friction and lateral inflow as
sources.  Simulated depths drive a 25-feature dataset whose severity labels are
depth-exceedance classes calibrated to a 91/4/4/1 class mix.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .physics import PhysicsConfig

CFL_SAFETY = 0.9
CLASS_NAMES = ("NoFlood", "Low", "Moderate", "Severe")
DEFAULT_RATIOS = (0.91, 0.04, 0.04, 0.01)
API_DECAY = 0.85
SOIL_TAUS = (1.5, 3.0, 6.0, 12.0)  # relaxation times of the soil layers, in records

FEATURE_NAMES = (
    "precip",  # 0  mm per record interval
    "api",  # 1  antecedent precipitation index, k = 0.85
    "spi30",  # 2
    "spi90",  # 3
    "soil_moisture_1",  # 4
    "soil_moisture_2",  # 5
    "soil_moisture_3",  # 6
    "soil_moisture_4",  # 7
    "surface_runoff",  # 8
    "subsurface_runoff",  # 9
    "temperature",  # 10
    "humidity",  # 11
    "elevation",  # 12 constant per site
    "slope",  # 13 constant per site
    "aspect",  # 14 constant per site
    "ndvi",  # 15 depth proxy + noise
    "ndwi",  # 16 depth proxy + noise
    "mndwi",  # 17 depth proxy + noise
    "sar_backscatter",  # 18 depth proxy + noise
    "sar_zscore",  # 19 per-site standardised backscatter
    "nir_reflectance",  # 20 depth proxy + noise
    "swir_reflectance",  # 21 noise-dominated
    "season",  # 22 annual cycle, 1 at the wet-season peak
    "x",  # 23 along-channel coordinate [m]
    "t",  # 24 time [s]
)
N_FEATURES = len(FEATURE_NAMES)
I_X, I_T = 23, 24

MULTIHAZARD_CLASSES = (
    "flood",
    "drought",
    "earthquake",
    "cyclone",
    "landslide",
    "wildfire",
    "storm",
    "tsunami",
    "volcanic",
    "extreme_temperature",
    "coastal_erosion",
)


class SolverError(RuntimeError):
    pass


class CalibrationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# solver


@dataclass
class ChannelState:
    A: np.ndarray
    Q: np.ndarray
    dx: float
    t: float = 0.0
    # mass fluxes through the upstream / downstream faces during the last step [m^3/s]
    boundary_flux: tuple | None = None

    def __post_init__(self) -> None:
        self.A = np.asarray(self.A, dtype=np.float64)
        self.Q = np.asarray(self.Q, dtype=np.float64)
        if np.any(self.A <= 0):
            raise SolverError("flow area must stay positive")

    def volume(self):
        """Stored water volume [m^3]; one value per reach for batched states."""
        v = self.A.sum(axis=-1) * self.dx
        return float(v) if np.ndim(v) == 0 else v

    def depth(self, width: float) -> np.ndarray:
        return self.A / width


def friction_slope(A, Q, cfg: PhysicsConfig):
    """S_f = n^2 Q|Q| / (A^2 R_h^(4/3))."""
    R = A / (cfg.channel_width + 2.0 * A / cfg.channel_width)
    return cfg.manning_n**2 * Q * np.abs(Q) / (A**2 * R ** (4.0 / 3.0))


def normal_area(Q: float, cfg: PhysicsConfig) -> float:
    """Flow area at which Manning friction balances the bed slope for discharge Q."""
    if Q <= 0:
        raise ValueError("normal flow needs positive discharge")
    b = cfg.channel_width

    def f(A):
        R = A / (b + 2 * A / b)
        return A * R ** (2 / 3) * np.sqrt(cfg.bed_slope) / cfg.manning_n - Q

    hi = 1.0
    while f(hi) < 0:
        hi *= 2
    return brentq(f, 1e-9, hi, xtol=1e-14, rtol=1e-15)


def normal_discharge(A: float, cfg: PhysicsConfig) -> float:
    b = cfg.channel_width
    R = A / (b + 2 * A / b)
    return A * R ** (2 / 3) * np.sqrt(cfg.bed_slope) / cfg.manning_n


def wave_speed(state: ChannelState, cfg: PhysicsConfig) -> float:
    return float(np.max(np.abs(state.Q / state.A) + np.sqrt(cfg.g * state.A / cfg.channel_width)))


def stable_dt(state: ChannelState, cfg: PhysicsConfig) -> float:
    return CFL_SAFETY * state.dx / wave_speed(state, cfg)


def _flux(A, Q, cfg: PhysicsConfig):
    return Q, Q * Q / A + 0.5 * cfg.g * A * A / cfg.channel_width


def step_sv(
    state: ChannelState,
    dt: float,
    cfg: PhysicsConfig,
    q_lateral=0.0,
    inflow: float | None = None,
) -> ChannelState:
    """One Lax-Friedrichs step with semi-implicit Manning friction.

    Cells run along the last axis; leading axes are independent reaches that
    share the time step.

    Friction is stiff relative to the advective CFL step at these depths, so it
    is treated implicitly in Q (linearised about the old |Q|).  Normal flow
    remains an exact fixed point.

    Ghost cells: upstream copies A and imposes Q = ``inflow`` (or copies Q when
    None); downstream is transmissive.
    ``q_lateral`` is m^2/s, broadcast against the cells; ``inflow`` may be per reach.
    """
    if dt <= 0:
        raise SolverError("time step must be positive")
    if dt > stable_dt(state, cfg) * (1 + 1e-12):
        raise SolverError(f"CFL violated: dt={dt:.4g} > {stable_dt(state, cfg):.4g}")
    Ai, Qi = state.A, state.Q
    q_in = Qi[..., :1] if inflow is None else np.broadcast_to(np.asarray(inflow, dtype=np.float64)[..., None], Qi[..., :1].shape)
    A = np.concatenate([Ai[..., :1], Ai, Ai[..., -1:]], axis=-1)
    Q = np.concatenate([q_in, Qi, Qi[..., -1:]], axis=-1)
    F1, F2 = _flux(A, Q, cfg)
    r = state.dx / dt
    # face fluxes between cells i and i+1 (N+1 faces)
    H1 = 0.5 * (F1[..., :-1] + F1[..., 1:]) - 0.5 * r * (A[..., 1:] - A[..., :-1])
    H2 = 0.5 * (F2[..., :-1] + F2[..., 1:]) - 0.5 * r * (Q[..., 1:] - Q[..., :-1])
    src_A = np.broadcast_to(np.asarray(q_lateral, dtype=np.float64), Ai.shape)
    A_new = Ai - dt / state.dx * (H1[..., 1:] - H1[..., :-1]) + dt * src_A
    if np.any(A_new <= 0):
        raise SolverError("flow area became non-positive")
    Q_star = Qi - dt / state.dx * (H2[..., 1:] - H2[..., :-1]) + dt * cfg.g * A_new * cfg.bed_slope
    # friction g*A*S_f = g n^2 Q|Q| / (A R^(4/3)), linearised implicitly in Q
    R = A_new / (cfg.channel_width + 2.0 * A_new / cfg.channel_width)
    damping = dt * cfg.g * cfg.manning_n**2 * np.abs(Qi) / (A_new * R ** (4.0 / 3.0))
    Q_new = Q_star / (1.0 + damping)
    if np.any(A_new <= 0) or not np.all(np.isfinite(A_new)) or not np.all(np.isfinite(Q_new)):
        raise SolverError("non-physical state after step (A <= 0 or non-finite)")
    if H1.ndim == 1:
        flux = (float(H1[0]), float(H1[-1]))
    else:
        flux = (H1[..., 0].copy(), H1[..., -1].copy())
    return ChannelState(A_new, Q_new, state.dx, state.t + dt, flux)


# ---------------------------------------------------------------------------
# scenarios


@dataclass
class Storm:
    t_center: float  # s
    width: float  # s
    rain_peak: float  # mm/h
    inflow_peak: float  # m^3/s added upstream


@dataclass
class ScenarioSpec:
    length: float = 10_000.0  # m
    n_cells: int = 20
    duration: float = 60 * 86_400.0  # s
    snapshot_interval: float = 6 * 3_600.0  # s
    base_flow: float = 40.0  # m^3/s
    n_storms: int = 18  # per reach
    n_reaches: int = 4
    storms: list[Storm] | None = None
    lateral_coeff: float = 4e-4  # m^2/s of lateral inflow per mm/h of rain
    seed: int = 0

    def __post_init__(self) -> None:
        if self.base_flow <= 0:
            raise ValueError("base flow must be positive")
        if self.n_reaches < 1:
            raise ValueError("need at least one reach")
        if self.storms is not None:
            self.storms = [s if isinstance(s, Storm) else Storm(**s) for s in self.storms]

    def resolved_storms(self, reach: int = 0) -> list[Storm]:
        """Storm list of one reach; explicit ``storms`` apply to every reach."""
        if self.storms is not None:
            return list(self.storms)
        rng = np.random.default_rng([self.seed, reach])
        if self.n_storms == 0:
            return []
        # one storm per equal time slot keeps every chronological split eventful
        slots = (np.arange(self.n_storms) + rng.uniform(0.2, 0.6, self.n_storms)) / self.n_storms
        centers = slots * self.duration
        out = []
        for c in centers:
            width = rng.uniform(8, 30) * 3600.0
            rain = rng.uniform(15.0, 21.0)
            out.append(Storm(float(c), float(width), float(rain), float(self.base_flow * rain / 6.0)))
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["storms"] = [[asdict(s) for s in self.resolved_storms(r)] for r in range(self.n_reaches)]
        return d


def rain_rate(t, storms: list[Storm]) -> np.ndarray:
    """Storm rain in mm/h at times t."""
    t = np.asarray(t, dtype=np.float64)
    r = np.zeros_like(t)
    for s in storms:
        r += s.rain_peak * np.exp(-(((t - s.t_center) / s.width) ** 2))
    return r


def inflow_hydrograph(t, base_flow: float, storms: list[Storm]) -> np.ndarray:
    """Upstream discharge; each storm's flood wave lags its rain by half a width."""
    t = np.asarray(t, dtype=np.float64)
    q = np.full_like(t, base_flow)
    for s in storms:
        q += s.inflow_peak * np.exp(-(((t - s.t_center - 0.5 * s.width) / (1.5 * s.width)) ** 2))
    return q


@dataclass
class Fields:
    x: np.ndarray  # (N_x,) cell centres [m]
    t: np.ndarray  # (T,) snapshot times [s]
    A: np.ndarray  # (T, R, N_x) for R reaches
    Q: np.ndarray
    h: np.ndarray
    q_l: np.ndarray  # (T, R, N_x) lateral inflow at snapshot times
    rain: np.ndarray  # (T, R) mm/h at snapshot times
    base_depth: np.ndarray  # (N_x,) normal depth at base flow


def simulate_scenario(spec: ScenarioSpec, cfg: PhysicsConfig) -> Fields:
    """Run every reach of the scenario side by side with a shared time step."""
    R = spec.n_reaches
    storms = [spec.resolved_storms(r) for r in range(R)]
    # (R, max storms) tables; padded entries have zero peaks
    m = max(1, max(len(s) for s in storms))
    tab = np.zeros((4, R, m))
    tab[1] = 1.0
    for r, ss in enumerate(storms):
        for j, st in enumerate(ss):
            tab[:, r, j] = (st.t_center, st.width, st.rain_peak, st.inflow_peak)
    centre, width, rain_peak, inflow_peak = tab
    dx = spec.length / spec.n_cells
    x = (np.arange(spec.n_cells) + 0.5) * dx
    A0 = normal_area(spec.base_flow, cfg)
    Q0 = normal_discharge(A0, cfg)
    state = ChannelState(np.full((R, spec.n_cells), A0), np.full((R, spec.n_cells), Q0), dx)
    lateral_shape = 1.0 + 0.5 * x / spec.length

    def rain(t):
        return np.sum(rain_peak * np.exp(-(((t - centre) / width) ** 2)), axis=-1)

    def inflow(t):
        lag = (t - centre - 0.5 * width) / (1.5 * width)
        return spec.base_flow + np.sum(inflow_peak * np.exp(-(lag**2)), axis=-1)

    def lateral(t):
        return spec.lateral_coeff * rain(t)[:, None] * lateral_shape

    n_snap = int(np.floor(spec.duration / spec.snapshot_interval)) + 1
    times = np.arange(n_snap) * spec.snapshot_interval
    A_out = np.empty((n_snap, R, spec.n_cells))
    Q_out = np.empty_like(A_out)
    ql_out = np.empty_like(A_out)
    A_out[0], Q_out[0] = state.A, state.Q
    ql_out[0] = lateral(0.0)
    for k in range(1, n_snap):
        t_end = times[k]
        while state.t < t_end - 1e-9:
            dt = min(stable_dt(state, cfg), t_end - state.t)
            t_mid = state.t + 0.5 * dt
            state = step_sv(state, dt, cfg, lateral(t_mid), inflow(t_mid))
        A_out[k], Q_out[k] = state.A, state.Q
        ql_out[k] = lateral(t_end)
    rain_out = np.stack([rain_rate(times, s) for s in storms], axis=-1)
    base_depth = np.full(spec.n_cells, A0 / cfg.channel_width)
    return Fields(x, times, A_out, Q_out, A_out / cfg.channel_width, ql_out, rain_out, base_depth)


# ---------------------------------------------------------------------------
# dataset


@dataclass
class SyntheticDataset:
    features: np.ndarray  # (N, 25)
    labels: np.ndarray  # (N,)
    timestamps: np.ndarray  # (N,) seconds
    truth: np.ndarray | None = None  # (N, 3) A, Q, q_l
    sites: np.ndarray | None = None
    meta: dict = field(default_factory=dict)
    class_names: tuple[str, ...] = CLASS_NAMES

    def __len__(self) -> int:
        return len(self.labels)

    def subset(self, idx) -> "SyntheticDataset":
        idx = np.asarray(idx, dtype=int)
        return SyntheticDataset(
            self.features[idx],
            self.labels[idx],
            self.timestamps[idx],
            None if self.truth is None else self.truth[idx],
            None if self.sites is None else self.sites[idx],
            dict(self.meta),
            self.class_names,
        )

    def class_ratios(self) -> np.ndarray:
        k = len(self.class_names)
        if len(self) == 0:
            return np.zeros(k)
        return np.bincount(self.labels, minlength=k)[:k] / len(self)

    @property
    def xy(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features, self.labels


def antecedent_precipitation(precip, k: float = API_DECAY) -> np.ndarray:
    """API_t = k * API_{t-1} + P_t with API_{-1} = 0, along the last axis."""
    precip = np.asarray(precip, dtype=np.float64)
    out = np.empty_like(precip)
    acc = np.zeros(precip.shape[:-1])
    for i in range(precip.shape[-1]):
        acc = k * acc + precip[..., i]
        out[..., i] = acc
    return out


def standardized_precipitation(precip, window: int) -> np.ndarray:
    """Rolling-window mean precipitation as a z-score against i.i.d. climatology.

    The reference spread is that of a window mean of independent records,
    ``sd / sqrt(window)``, so the index stays O(1) and does not inflate slow
    drifts of a short series into large anomalies.
    """
    precip = np.asarray(precip, dtype=np.float64)
    csum = np.cumsum(precip, axis=-1)
    lagged = np.zeros_like(csum)
    lagged[..., window:] = csum[..., :-window]
    counts = np.minimum(np.arange(1, precip.shape[-1] + 1), window)
    s = (csum - lagged) / counts
    mu = precip.mean(axis=-1, keepdims=True)
    sd = precip.std(axis=-1, keepdims=True) / np.sqrt(window)
    sd[sd < 1e-12] = 1.0
    return (s - mu) / sd


def _relax(series: np.ndarray, tau: float) -> np.ndarray:
    out = np.empty_like(series)
    acc = np.zeros(series.shape[:-1])
    a = 1.0 / tau
    for i in range(series.shape[-1]):
        acc = acc + a * (series[..., i] - acc)
        out[..., i] = acc
    return out


def synthesize_features(fields: Fields, spec: ScenarioSpec, seed: int, n_sites: int = 5, noise: float = 0.1):
    """Feature matrix (records ordered by time, then site), plus truth and bookkeeping.

    ``n_sites`` gauges are spread evenly along every reach; a site id is
    ``reach * n_cells + cell``.  Returns ``(features, timestamps, sites, truth, depth)``.
    """
    rng = np.random.default_rng(seed)
    n_cells = len(fields.x)
    R = fields.A.shape[1]
    cells = np.unique(np.linspace(0, n_cells - 1, min(n_sites, n_cells)).round().astype(int))
    site_reach = np.repeat(np.arange(R), len(cells))
    site_cells = np.tile(cells, R)
    S = len(site_cells)
    T = len(fields.t)
    dt_h = spec.snapshot_interval / 3600.0

    # precipitation accumulated over each record interval, per site [mm]
    site_mult = 1.0 + 0.2 * rng.standard_normal(S)
    site_mult = np.clip(site_mult, 0.5, None)
    drizzle = rng.gamma(0.3, 0.5, size=(S, T)) * (rng.random((S, T)) < 0.25)
    precip = np.clip(fields.rain[:, site_reach].T * dt_h * site_mult[:, None] + drizzle, 0.0, None)

    api = antecedent_precipitation(precip)
    spi30 = standardized_precipitation(precip, 30)
    spi90 = standardized_precipitation(precip, 90)
    p_norm = precip / (precip.mean() + 1e-12)
    soil = [_relax(p_norm, tau) for tau in SOIL_TAUS]
    infil = 0.6 + 0.4 * (1 - np.tanh(soil[0]))
    surface = np.clip(precip * (1 - infil), 0, None)
    subsurface = 0.1 * soil[2]

    # scenario centred on the wet-season peak
    season = np.cos(2 * np.pi * (fields.t - 0.5 * spec.duration) / (365.0 * 86400.0))
    temperature = 27.0 + 2.0 * season[None, :] - 1.5 * np.tanh(p_norm) + 0.6 * rng.standard_normal((S, T))
    humidity = 75.0 + 15.0 * np.tanh(0.5 * p_norm) + 3.0 * rng.standard_normal((S, T))

    depth = fields.h[:, site_reach, site_cells].T  # (S, T)
    # relative excess depth over base flow
    wet = (depth - fields.base_depth[site_cells][:, None]) / fields.base_depth[site_cells][:, None]

    def proxy(base, amp, sd):
        return base + amp * wet + sd * noise * rng.standard_normal((S, T))

    ndvi = proxy(0.6, -0.3, 0.15)
    ndwi = proxy(-0.2, 0.5, 0.25)
    mndwi = proxy(-0.1, 0.5, 0.25)
    sar = proxy(-12.0, -5.0, 2.5)
    sar_z = (sar - sar.mean(axis=1, keepdims=True)) / sar.std(axis=1, keepdims=True)
    nir = proxy(0.3, -0.15, 0.08)
    swir = 0.2 - 0.02 * wet + 0.05 * rng.standard_normal((S, T))

    elevation = 120.0 + rng.normal(0, 10.0, R)[site_reach] - 8e-3 * fields.x[site_cells] + rng.normal(0, 2.0, S)
    slope = np.abs(rng.normal(3.0, 1.0, S))
    aspect = rng.uniform(0, 360, S)

    cols = [
        precip,
        api,
        spi30,
        spi90,
        *soil,
        surface,
        subsurface,
        temperature,
        humidity,
        np.repeat(elevation[:, None], T, 1),
        np.repeat(slope[:, None], T, 1),
        np.repeat(aspect[:, None], T, 1),
        ndvi,
        ndwi,
        mndwi,
        sar,
        sar_z,
        nir,
        swir,
        np.repeat(season[None, :], S, 0),
        np.repeat(fields.x[site_cells][:, None], T, 1),
        np.repeat(fields.t[None, :], S, 0),
    ]
    feat = np.stack(cols, axis=-1)  # (S, T, 25)
    # time-major ordering so records are sorted by timestamp
    features = feat.transpose(1, 0, 2).reshape(-1, N_FEATURES)
    timestamps = np.repeat(fields.t, S)
    sites = np.tile(site_reach * n_cells + site_cells, T)
    truth = np.stack(
        [fields.A[:, site_reach, site_cells], fields.Q[:, site_reach, site_cells], fields.q_l[:, site_reach, site_cells]],
        axis=-1,
    ).reshape(-1, 3)
    depth_flat = depth.T.reshape(-1)
    return features, timestamps, sites, truth, depth_flat


def label_severity(depth, thresholds) -> np.ndarray:
    """Class = number of thresholds the depth meets or exceeds."""
    depth = np.asarray(depth, dtype=np.float64)
    thresholds = np.asarray(thresholds, dtype=np.float64)
    if np.any(np.diff(thresholds) < 0):
        raise ValueError("thresholds must be non-decreasing")
    return np.searchsorted(thresholds, depth, side="right").astype(int)


def calibrate_thresholds(depth, ratios=DEFAULT_RATIOS, tol: float = 0.02) -> np.ndarray:
    """Depth thresholds placing the achieved class mix within ``tol`` of ``ratios``."""
    depth = np.asarray(depth, dtype=np.float64)
    cum = np.cumsum(ratios)[:-1]
    thr = np.quantile(depth, cum, method="higher")
    achieved = np.bincount(label_severity(depth, thr), minlength=len(ratios)) / depth.size
    if np.any(np.abs(achieved - np.asarray(ratios)) > tol):
        raise CalibrationError(f"cannot reach class ratios {ratios}: achieved {achieved.round(4)}")
    return thr


def generate_dataset(
    spec: ScenarioSpec | None = None,
    cfg: PhysicsConfig | None = None,
    n_sites: int = 5,
    ratios=DEFAULT_RATIOS,
    noise: float = 0.1,
) -> SyntheticDataset:
    spec = spec or ScenarioSpec()
    cfg = cfg or PhysicsConfig()
    fields_ = simulate_scenario(spec, cfg)
    features, ts, sites, truth, depth = synthesize_features(fields_, spec, spec.seed + 1, n_sites, noise)
    thr = calibrate_thresholds(depth, ratios)
    labels = label_severity(depth, thr)
    ds = SyntheticDataset(features, labels, ts, truth, sites)
    ds.meta = {
        "seed": spec.seed,
        "scenario": spec.to_dict(),
        "physics": asdict(cfg),
        "thresholds_depth_m": [float(v) for v in thr],
        "target_ratios": list(ratios),
        "achieved_ratios": [float(v) for v in ds.class_ratios()],
        "n_sites": n_sites,
        "noise": noise,
        "feature_names": list(FEATURE_NAMES),
        "i_x": I_X,
        "i_t": I_T,
    }
    return ds


def temporal_split(dataset: SyntheticDataset, fractions=(0.6, 0.2, 0.2)):
    """Chronological train / val / test blocks.

    Cut points are moved forward to timestamp boundaries so no timestamp spans
    two splits.
    """
    if abs(sum(fractions) - 1.0) > 1e-9 or any(f < 0 for f in fractions):
        raise ValueError("split fractions must be non-negative and sum to 1")
    n = len(dataset)
    if n == 0:
        return dataset.subset([]), dataset.subset([]), dataset.subset([])
    ts = dataset.timestamps
    if np.any(np.diff(ts) < 0):
        raise ValueError("records must be sorted by timestamp")
    c1 = int(round(fractions[0] * n))
    c2 = int(round((fractions[0] + fractions[1]) * n))

    def snap(c):
        while 0 < c < n and ts[c] == ts[c - 1]:
            c += 1
        return c

    c1 = snap(c1)
    c2 = max(snap(c2), c1)
    idx = np.arange(n)
    return dataset.subset(idx[:c1]), dataset.subset(idx[c1:c2]), dataset.subset(idx[c2:])


# ---------------------------------------------------------------------------
# multi-hazard pre-training set

_HAZARD_SIGNATURES = {
    # feature index -> shift in standard deviations
    "drought": {0: -0.8, 1: -1.2, 2: -1.5, 3: -1.8, 4: -1.0, 5: -1.2, 6: -1.3, 7: -1.3, 10: 1.2, 11: -1.2, 15: -1.0},
    "earthquake": {13: 2.0, 12: 1.0, 18: 1.0, 21: 1.0},
    "cyclone": {0: 2.0, 1: 1.5, 11: 1.5, 10: -0.8, 18: -0.8, 22: 1.0},
    "landslide": {13: 2.5, 4: 1.5, 5: 1.5, 0: 1.0, 15: -0.8},
    "wildfire": {10: 2.0, 11: -2.0, 15: -1.5, 20: 1.0, 21: 1.5, 4: -1.0},
    "storm": {0: 1.5, 11: 1.0, 8: 1.5, 22: -1.0},
    "tsunami": {12: -2.0, 16: 2.0, 17: 2.0, 18: -1.5},
    "volcanic": {12: 2.5, 14: 1.5, 20: -1.5, 10: 1.0},
    "extreme_temperature": {10: 2.5, 22: 1.5, 11: -1.0},
    "coastal_erosion": {12: -2.5, 13: -1.0, 17: 1.0, 9: 1.0},
}


def synthesize_multihazard(reference: SyntheticDataset, n_records: int, seed: int, spread: float = 0.9) -> SyntheticDataset:
    """11-class emulation of a multi-hazard event set over the flood feature schema.

    Each class shifts a signature subset of features (in units of the reference
    dataset's per-column std).  The flood signature is the standardised mean of
    the reference's flooded records, so pre-training sees the flood direction.
    """
    rng = np.random.default_rng(seed)
    X = reference.features
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd < 1e-12] = 1.0
    flooded = reference.labels > 0
    flood_shift = np.zeros(N_FEATURES)
    if flooded.any():
        flood_shift = (X[flooded].mean(axis=0) - mu) / sd
    shifts = np.zeros((len(MULTIHAZARD_CLASSES), N_FEATURES))
    shifts[0] = flood_shift
    for c, name in enumerate(MULTIHAZARD_CLASSES[1:], start=1):
        for j, v in _HAZARD_SIGNATURES[name].items():
            shifts[c, j] = v
    shifts[:, [I_X, I_T]] = 0.0
    labels = rng.integers(0, len(MULTIHAZARD_CLASSES), n_records)
    z = shifts[labels] + spread * rng.standard_normal((n_records, N_FEATURES))
    feats = mu + sd * z
    lo, hi = X[:, [I_X, I_T]].min(axis=0), X[:, [I_X, I_T]].max(axis=0)
    feats[:, [I_X, I_T]] = rng.uniform(lo, hi, size=(n_records, 2))
    order = np.argsort(feats[:, I_T], kind="stable")
    feats, labels = feats[order], labels[order]
    ds = SyntheticDataset(feats, labels, feats[:, I_T].copy(), class_names=MULTIHAZARD_CLASSES)
    ds.meta = {"seed": seed, "n_records": n_records, "kind": "multihazard"}
    return ds


# ---------------------------------------------------------------------------
# persistence


def _fmt(v) -> str:
    return repr(float(v))


def save_dataset(ds: SyntheticDataset, path) -> None:
    """CSV with 25 feature columns, label, timestamp, site, [A, Q, q_l]; sidecar ``.meta.json``."""
    path = Path(path)
    header = list(FEATURE_NAMES) + ["label", "timestamp", "site"]
    if ds.truth is not None:
        header += ["A", "Q", "q_l"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(len(ds)):
            row = [_fmt(v) for v in ds.features[i]]
            row += [int(ds.labels[i]), _fmt(ds.timestamps[i]), -1 if ds.sites is None else int(ds.sites[i])]
            if ds.truth is not None:
                row += [_fmt(v) for v in ds.truth[i]]
            w.writerow(row)
    meta = dict(ds.meta)
    meta["class_names"] = list(ds.class_names)
    meta_path = path.with_suffix(".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def load_dataset(path) -> SyntheticDataset:
    path = Path(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if tuple(header[:N_FEATURES]) != FEATURE_NAMES:
        raise ValueError("dataset header does not match the 25-feature schema")
    arr = np.array(body, dtype=np.float64) if body else np.zeros((0, len(header)))
    meta_path = path.with_suffix(".meta.json")
    meta = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    names = tuple(meta.pop("class_names", CLASS_NAMES))
    truth = arr[:, N_FEATURES + 3 : N_FEATURES + 6] if "A" in header else None
    return SyntheticDataset(
        arr[:, :N_FEATURES],
        arr[:, N_FEATURES].astype(int),
        arr[:, N_FEATURES + 1],
        truth,
        arr[:, N_FEATURES + 2].astype(int),
        meta,
        names,
    )
