import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hqcpinn.circuit import CircuitSpec
from hqcpinn.hybrid_model import ClassicalPINN, HybridModel, Scaler
from hqcpinn.physics import (
    Domain,
    PhysicsConfig,
    hydraulic_radius,
    manning_discharge,
    manning_residual,
    physics_loss_batch,
    physics_terms,
    sample_collocation,
    sv_residual,
)

CFG = PhysicsConfig()


class FieldModel:
    """Emits prescribed aux fields and their exact (t, x) derivatives."""

    def __init__(self, fields, cfg):
        self.fields, self.cfg = fields, cfg

    def physics_outputs(self, Xc, cfg):
        x, t = Xc[:, cfg.i_x], Xc[:, cfg.i_t]
        return self.fields(x, t)


def manufactured(A0=120.0, a=5.0, w=2 * np.pi / 86_400, Q0=80.0, c=2e-3):
    def fields(x, t):
        A = A0 + a * np.sin(w * t)
        Q = Q0 + c * x
        ql = a * w * np.cos(w * t) + c
        aux = np.stack([A, Q, ql, np.full_like(x, 1e-3)], axis=1)
        d = np.zeros((len(x), 2, 4))
        d[:, 0, 0] = a * w * np.cos(w * t)  # dA/dt
        d[:, 1, 1] = c  # dQ/dx
        return aux, d

    return fields


def collocation(n, rng):
    X = rng.standard_normal((n, 25))
    X[:, CFG.i_x] = rng.uniform(0, 10_000, n)
    X[:, CFG.i_t] = rng.uniform(0, 5e6, n)
    return X


class TestConfig:
    def test_defaults(self):
        assert (CFG.g, CFG.channel_width, CFG.manning_n, CFG.bed_slope) == (9.81, 50.0, 0.035, 0.001)
        assert (CFG.lambda_sv, CFG.lambda_m) == (0.1, 0.05)

    @pytest.mark.parametrize(
        "kw", [{"channel_width": 0}, {"manning_n": -1}, {"lambda_sv": -0.1}, {"i_x": 3, "i_t": 3}, {"i_t": 25}]
    )
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            PhysicsConfig(**kw)


class TestManning:
    def test_zero_area(self):
        assert manning_discharge(0.0, 0.0, 0.001, 0.03) == 0

    def test_zero_slope(self):
        assert manning_discharge(10.0, 1.25, 0.0, 0.03) == 0

    def test_point_value(self):
        assert abs(manning_discharge(10.0, 1.25, 0.001, 0.03) - 12.231) < 1e-3

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            manning_discharge(-1.0, 1.0, 0.001, 0.03)
        with pytest.raises(ValueError):
            manning_discharge(1.0, 1.0, 0.001, 0.0)

    def test_residual_definition(self):
        R = hydraulic_radius(100.0, 50.0)
        Q = manning_discharge(100.0, R, 4e-4, 0.035)
        assert manning_residual(Q, 100.0, 4e-4, CFG) == 0.0
        assert manning_residual(0.0, 100.0, 0.0, CFG) == 0.0

    def test_residual_worked_example(self):
        # h = 2, P = 54, R_h = 100/54; direct evaluation gives M = 86.17199
        assert abs(hydraulic_radius(100.0, 50.0) - 100 / 54) < 1e-15
        r = manning_residual(100.0, 100.0, 4e-4, CFG)
        assert abs(r - 13.82801) < 1e-4

    def test_residual_needs_positive_area(self):
        with pytest.raises(ValueError):
            manning_residual(1.0, 0.0, 1e-3, CFG)

    @given(st.floats(1e-3, 1e4), st.floats(1.0, 500.0))
    def test_radius_bounds(self, A, b):
        R = hydraulic_radius(A, b)
        assert 0 < R < b / 2 and R < A / b + b


class TestContinuity:
    def test_steady(self):
        assert sv_residual(0.0, 0.0, 0.0) == 0.0

    def test_compensating(self):
        assert sv_residual(1.0, -1.0, 0.0) == 0.0

    def test_non_finite(self):
        with pytest.raises(FloatingPointError):
            sv_residual(np.nan, 0.0, 0.0)

    def test_manufactured_pointwise(self, rng):
        x, t = rng.uniform(0, 1e4, 50), rng.uniform(0, 1e6, 50)
        aux, d = manufactured()(x, t)
        assert np.max(np.abs(sv_residual(d[:, 0, 0], d[:, 1, 1], aux[:, 2]))) < 1e-15


class TestLosses:
    def test_manufactured_solution(self, rng):
        L_sv, _ = physics_loss_batch(FieldModel(manufactured(), CFG), collocation(256, rng), CFG)
        assert L_sv < 1e-10

    def test_manning_self_consistency(self, rng):
        def fields(x, t):
            A = 80 + 40 * np.sin(x / 3000.0)
            Sf = 1e-3 * (1 + 0.5 * np.cos(t / 1e5))
            Q = manning_discharge(A, hydraulic_radius(A, CFG.channel_width), Sf, CFG.manning_n)
            return np.stack([A, Q, np.zeros_like(x), Sf], axis=1), np.zeros((len(x), 2, 4))

        _, L_m = physics_loss_batch(FieldModel(fields, CFG), collocation(256, rng), CFG)
        assert L_m < 1e-20

    def test_single_point_is_squared_residual(self, rng):
        aux = np.array([[100.0, 100.0, 0.01, 4e-4]])
        d = np.zeros((1, 2, 4))
        d[0, 0, 0], d[0, 1, 1] = 0.03, -0.01
        L_sv, L_m, _, _ = physics_terms(aux, d, CFG)
        assert abs(L_sv - (0.03 - 0.01 - 0.01) ** 2) < 1e-18
        assert abs(L_m - manning_residual(100.0, 100.0, 4e-4, CFG) ** 2) < 1e-9

    def test_empty_collocation(self):
        L_sv, L_m, g, gd = physics_terms(np.zeros((0, 4)), np.zeros((0, 2, 4)), CFG)
        assert (L_sv, L_m) == (0.0, 0.0) and g.shape == (0, 4) and gd.shape == (0, 2, 4)

    @pytest.mark.parametrize("weights", [(1.0, 0.0), (0.0, 1.0)], ids=["continuity", "manning"])
    def test_output_gradients(self, weights, rng):
        cfg = PhysicsConfig(lambda_sv=weights[0], lambda_m=weights[1])
        aux = np.column_stack([rng.uniform(50, 150, 5), rng.uniform(20, 120, 5), rng.normal(0, 0.01, 5), rng.uniform(1e-4, 2e-3, 5)])
        d = rng.normal(0, 0.01, (5, 2, 4))

        def f(a, dd):
            L_sv, L_m, _, _ = physics_terms(a, dd, cfg)
            return cfg.lambda_sv * L_sv + cfg.lambda_m * L_m

        _, _, g, gd = physics_terms(aux, d, cfg)
        for i in range(5):
            for j in range(4):
                h = 1e-6 * max(abs(aux[i, j]), 1e-3)
                ap, am = aux.copy(), aux.copy()
                ap[i, j] += h
                am[i, j] -= h
                fd = (f(ap, d) - f(am, d)) / (2 * h)
                assert abs(fd - g[i, j]) < 1e-6 * max(1.0, abs(g[i, j])) + 1e-14 * f(aux, d) / h
        for t, k in [(0, 0), (1, 1)]:
            h = 1e-7
            dp, dm = d.copy(), d.copy()
            dp[2, t, k] += h
            dm[2, t, k] -= h
            assert abs((f(aux, dp) - f(aux, dm)) / (2 * h) - gd[2, t, k]) < 1e-6

    def test_constant_model_zero_continuity(self, rng):
        spec = CircuitSpec(4, 2)
        model = HybridModel.create(spec, 0)
        w = model.post.layers[-1].weight
        w[4:] = 0.0  # aux rows
        model.post.layers[-1].bias[:] = 0.0
        L_sv, L_m = physics_loss_batch(model, collocation(8, rng), CFG)
        assert L_sv == 0.0
        # A = S_f = ln 2, Q = 0
        A = np.log(2)
        expect = (0.0 - manning_discharge(A, hydraulic_radius(A, 50.0), A, 0.035)) ** 2
        assert abs(L_m - expect) < 1e-12

    def test_derivatives_in_raw_coordinates(self, rng):
        # expressing time in minutes instead of seconds scales d/dt by 60
        X = collocation(6, rng)
        model = ClassicalPINN.create(1, scaler=Scaler.fit(X))
        aux, d = model.physics_outputs(X, CFG)
        Xm = X.copy()
        Xm[:, CFG.i_t] /= 60.0
        sm = Scaler(model.scaler.mean.copy(), model.scaler.scale.copy())
        sm.mean[CFG.i_t] /= 60.0
        sm.scale[CFG.i_t] /= 60.0
        model.scaler = sm
        aux_m, d_m = model.physics_outputs(Xm, CFG)
        np.testing.assert_allclose(aux_m, aux, rtol=1e-12)
        np.testing.assert_allclose(d_m[:, 0], 60.0 * d[:, 0], rtol=1e-10)
        np.testing.assert_allclose(d_m[:, 1], d[:, 1], rtol=1e-10)


class TestCollocation:
    def test_empty(self, rng):
        dom = Domain(0, 1, 0, 1)
        assert sample_collocation(dom, 0, 0, collocation(5, rng), CFG).shape == (0, 25)

    def test_bounds_and_marginals(self, rng):
        pool = collocation(40, rng)
        dom = Domain.from_features(pool, CFG)
        pts = sample_collocation(dom, 500, 3, pool, CFG)
        assert np.all((pts[:, CFG.i_x] >= dom.x_min) & (pts[:, CFG.i_x] <= dom.x_max))
        assert np.all((pts[:, CFG.i_t] >= dom.t_min) & (pts[:, CFG.i_t] <= dom.t_max))
        for j in (0, 5, 22):
            assert set(pts[:, j]) <= set(pool[:, j])

    def test_deterministic(self, rng):
        pool = collocation(20, rng)
        dom = Domain.from_features(pool, CFG)
        np.testing.assert_array_equal(sample_collocation(dom, 30, 9, pool, CFG), sample_collocation(dom, 30, 9, pool, CFG))

    def test_invalid_bounds(self, rng):
        with pytest.raises(ValueError):
            sample_collocation(Domain(1, 0, 0, 1), 3, 0, collocation(4, rng), CFG)
