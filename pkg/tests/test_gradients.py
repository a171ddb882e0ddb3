import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hqcpinn.circuit import CircuitSpec, expectations
from hqcpinn.gradients import (
    adjoint_gradient,
    finite_diff_oracle,
    input_jacobian,
    mixed_second_derivative,
    param_shift_grad,
)


def random_point(spec, rng):
    return rng.uniform(-np.pi, np.pi, spec.n_qubits), rng.uniform(0, 2 * np.pi, spec.n_params)


class TestFiniteDiff:
    def test_square(self):
        g = finite_diff_oracle(lambda x: x[0] ** 2, [3.0], 1e-5)
        assert abs(g[0] - 6.0) < 1e-8

    def test_constant(self):
        np.testing.assert_array_equal(finite_diff_oracle(lambda x: 2.0, np.ones(4)), np.zeros(4))

    def test_step_positive(self):
        with pytest.raises(ValueError):
            finite_diff_oracle(lambda x: 0.0, [1.0], 0.0)


class TestParamShift:
    def test_single_qubit_analytic(self):
        spec = CircuitSpec(1, 1)
        # RY(theta) then RZ: <Z> = cos(theta)
        assert abs(param_shift_grad(spec, [0.0], [0.0, 0.3])[0, 0]) < 1e-15
        assert abs(param_shift_grad(spec, [0.0], [np.pi / 2, 0.3])[0, 0] + 1) < 1e-15

    @pytest.mark.parametrize("n,L,seed", [(4, 2, 0), (5, 3, 1), (6, 2, 2), (8, 3, 3), (8, 4, 4)])
    def test_matches_finite_differences(self, n, L, seed):
        spec = CircuitSpec(n, L)
        z, p = random_point(spec, np.random.default_rng(seed))
        fd = finite_diff_oracle(lambda v: expectations(spec, z, v), p, 1e-5)
        assert np.max(np.abs(param_shift_grad(spec, z, p) - fd)) < 1e-6
        fd_z = finite_diff_oracle(lambda v: expectations(spec, v, p), z, 1e-5)
        assert np.max(np.abs(input_jacobian(spec, z, p) - fd_z)) < 1e-6

    @given(st.integers(0, 2**32 - 1))
    def test_bounded(self, seed):
        spec = CircuitSpec(3, 2)
        z, p = random_point(spec, np.random.default_rng(seed))
        assert np.all(np.abs(param_shift_grad(spec, z, p)) <= 1 + 1e-12)
        assert np.all(np.abs(input_jacobian(spec, z, p)) <= 1 + 1e-12)


class TestInputJacobian:
    def test_no_layers(self):
        assert abs(input_jacobian(CircuitSpec(1, 0), [np.pi / 2], [])[0, 0] + 1) < 1e-15

    def test_zero_params_diagonal(self, rng):
        spec = CircuitSpec(3, 0)
        z = rng.uniform(-np.pi, np.pi, 3)
        np.testing.assert_allclose(input_jacobian(spec, z, []), np.diag(-np.sin(z)), atol=1e-14)

    def test_zero_params_with_entanglement(self, rng):
        spec = CircuitSpec(4, 2)
        z = rng.uniform(-np.pi, np.pi, 4)
        jac = input_jacobian(spec, z, np.zeros(spec.n_params))
        fd = finite_diff_oracle(lambda v: expectations(spec, v, np.zeros(spec.n_params)), z, 1e-5)
        assert np.max(np.abs(jac - fd)) < 1e-6
        assert abs(jac[0, 0] + np.sin(z[0])) < 1e-12  # qubit 0 is never a CNOT target


class TestMixedSecond:
    def test_single_qubit_analytic(self):
        spec = CircuitSpec(1, 1)
        assert abs(mixed_second_derivative(spec, [0.0], [0.0, 0.0], 0, 0)[0] + 1) < 1e-15

    def test_disconnected_input(self):
        # without entanglement z_1 cannot influence qubit 0
        spec = CircuitSpec(2, 1, entangle=False)
        z, p = random_point(spec, np.random.default_rng(0))
        assert abs(mixed_second_derivative(spec, z, p, 1, 0)[0]) < 1e-15

    def test_nested_finite_differences(self, rng):
        spec = CircuitSpec(3, 2)
        z, p = random_point(spec, rng)
        h = 1e-4
        for j, m in [(0, 0), (1, 5), (2, 11), (0, 7)]:
            ez, ep = np.eye(3)[j] * h, np.eye(spec.n_params)[m] * h
            fd = (
                expectations(spec, z + ez, p + ep)
                - expectations(spec, z + ez, p - ep)
                - expectations(spec, z - ez, p + ep)
                + expectations(spec, z - ez, p - ep)
            ) / (4 * h * h)
            assert np.max(np.abs(mixed_second_derivative(spec, z, p, j, m) - fd)) < 1e-5

    def test_shift_order_symmetry(self, rng):
        spec = CircuitSpec(3, 2)
        z, p = random_point(spec, rng)
        j, m = 1, 4
        # inner shift on phi, outer on z versus the reverse nesting
        inner_phi = lambda zz: 0.5 * (
            expectations(spec, zz, p + np.pi / 2 * np.eye(spec.n_params)[m])
            - expectations(spec, zz, p - np.pi / 2 * np.eye(spec.n_params)[m])
        )
        ez = np.pi / 2 * np.eye(3)[j]
        a = 0.5 * (inner_phi(z + ez) - inner_phi(z - ez))
        np.testing.assert_allclose(mixed_second_derivative(spec, z, p, j, m), a, atol=1e-10)

    def test_index_range(self):
        with pytest.raises(IndexError):
            mixed_second_derivative(CircuitSpec(2, 1), np.zeros(2), np.zeros(4), 2, 0)


class TestAdjoint:
    @pytest.mark.parametrize("n,L", [(2, 1), (4, 2), (8, 3)])
    def test_matches_shift_rule(self, n, L, rng):
        spec = CircuitSpec(n, L)
        z = rng.uniform(-np.pi, np.pi, (3, n))
        p = rng.uniform(0, 2 * np.pi, spec.n_params)
        w = rng.standard_normal((3, n))
        val, g_z, g_p = adjoint_gradient(spec, z, p, w)
        np.testing.assert_allclose(val, np.einsum("bk,bk->b", w, expectations(spec, z, p)), atol=1e-12)
        for b in range(3):
            np.testing.assert_allclose(g_p[b], w[b] @ param_shift_grad(spec, z[b], p), atol=1e-12)
            np.testing.assert_allclose(g_z[b], w[b] @ input_jacobian(spec, z[b], p), atol=1e-12)

    def test_no_entanglement(self, rng):
        spec = CircuitSpec(3, 2, entangle=False)
        z, p = random_point(spec, rng)
        w = rng.standard_normal(3)
        _, g_z, g_p = adjoint_gradient(spec, z, p, w)
        np.testing.assert_allclose(g_p, w @ param_shift_grad(spec, z, p), atol=1e-12)
        np.testing.assert_allclose(g_z, w @ input_jacobian(spec, z, p), atol=1e-12)
