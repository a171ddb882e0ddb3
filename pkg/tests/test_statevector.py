import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hqcpinn.circuit import CircuitSpec, apply_ansatz, encode
from hqcpinn.statevector import (
    StateVector,
    apply_cnot,
    apply_rz,
    apply_ry,
    cnot_matrix,
    dense_matrix_oracle,
    embed,
    new_zero_state,
    ry_matrix,
    rz_matrix,
)

R2 = 1 / np.sqrt(2)
angles = st.floats(-4 * np.pi, 4 * np.pi, allow_nan=False)


def random_state(n, rng):
    a = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return StateVector(n, a / np.linalg.norm(a))


class TestZeroState:
    def test_one_qubit(self):
        np.testing.assert_array_equal(new_zero_state(1).amplitudes, [1, 0])

    def test_two_qubits(self):
        np.testing.assert_array_equal(new_zero_state(2).amplitudes, [1, 0, 0, 0])

    @pytest.mark.parametrize("n", [0, 15])
    def test_size_bounds(self, n):
        with pytest.raises(ValueError):
            new_zero_state(n)

    def test_amplitude_length_checked(self):
        with pytest.raises(ValueError):
            StateVector(2, np.ones(3))


class TestRotations:
    def test_ry_pi_flips(self):
        np.testing.assert_allclose(apply_ry(new_zero_state(1), 0, np.pi).amplitudes, [0, 1], atol=1e-15)

    def test_ry_half_pi(self):
        np.testing.assert_allclose(apply_ry(new_zero_state(1), 0, np.pi / 2).amplitudes, [R2, R2], atol=1e-8)

    def test_rz_phase_action(self):
        plus = StateVector(1, [R2, R2])
        np.testing.assert_allclose(apply_rz(plus, 0, np.pi).amplitudes, [-1j * R2, 1j * R2], atol=1e-12)

    def test_rz_on_zero_is_global_phase(self, rng):
        out = apply_rz(new_zero_state(1), 0, rng.uniform(-10, 10))
        assert abs(abs(out.amplitudes[0]) - 1) < 1e-15

    def test_zero_angle_identity(self, rng):
        s = random_state(3, rng)
        for q in range(3):
            np.testing.assert_array_equal(apply_ry(s, q, 0.0).amplitudes, s.amplitudes)
            np.testing.assert_array_equal(apply_rz(s, q, 0.0).amplitudes, s.amplitudes)

    def test_input_not_mutated(self, rng):
        s = random_state(2, rng)
        before = s.amplitudes.copy()
        apply_ry(s, 1, 0.7)
        apply_cnot(s, 0, 1)
        np.testing.assert_array_equal(s.amplitudes, before)

    @pytest.mark.parametrize("fn", [apply_ry, apply_rz])
    def test_bad_index(self, fn):
        with pytest.raises(IndexError):
            fn(new_zero_state(2), 2, 0.1)

    def test_matches_embedded_matrix(self, rng):
        s = random_state(3, rng)
        for q in range(3):
            a = rng.uniform(-np.pi, np.pi)
            np.testing.assert_allclose(apply_ry(s, q, a).amplitudes, embed({q: ry_matrix(a)}, 3) @ s.amplitudes, atol=1e-14)
            np.testing.assert_allclose(apply_rz(s, q, a).amplitudes, embed({q: rz_matrix(a)}, 3) @ s.amplitudes, atol=1e-14)


class TestCnot:
    def test_truth_table_little_endian(self):
        s = StateVector(2, [0, 1, 0, 0])  # qubit 0 set
        np.testing.assert_array_equal(apply_cnot(s, 0, 1).amplitudes, [0, 0, 0, 1])

    def test_control_clear(self):
        np.testing.assert_array_equal(apply_cnot(new_zero_state(2), 0, 1).amplitudes, [1, 0, 0, 0])

    def test_bell_state(self):
        s = StateVector(2, [R2, R2, 0, 0])
        np.testing.assert_allclose(apply_cnot(s, 0, 1).amplitudes, [R2, 0, 0, R2])

    def test_same_qubit_rejected(self):
        with pytest.raises(ValueError):
            apply_cnot(new_zero_state(2), 1, 1)

    def test_matches_matrix(self, rng):
        s = random_state(3, rng)
        for c, t in [(0, 1), (1, 2), (2, 0), (1, 0)]:
            np.testing.assert_allclose(apply_cnot(s, c, t).amplitudes, cnot_matrix(3, c, t) @ s.amplitudes, atol=1e-15)


class TestProperties:
    @given(st.integers(0, 2**32 - 1), st.lists(st.tuples(st.sampled_from("yzc"), angles), min_size=1, max_size=30))
    def test_norm_preserved(self, seed, ops):
        rng = np.random.default_rng(seed)
        s = random_state(4, rng)
        for kind, a in ops:
            q = int(rng.integers(4))
            if kind == "y":
                s = apply_ry(s, q, a)
            elif kind == "z":
                s = apply_rz(s, q, a)
            else:
                s = apply_cnot(s, q, (q + 1) % 4)
        assert abs(s.norm_squared() - 1) < 1e-12

    @given(st.integers(0, 2**32 - 1), angles, st.integers(0, 2))
    def test_inverse_restores(self, seed, a, q):
        s = random_state(3, np.random.default_rng(seed))
        np.testing.assert_allclose(apply_ry(apply_ry(s, q, a), q, -a).amplitudes, s.amplitudes, atol=1e-12)
        np.testing.assert_allclose(apply_rz(apply_rz(s, q, a), q, -a).amplitudes, s.amplitudes, atol=1e-12)
        t = (q + 1) % 3
        np.testing.assert_array_equal(apply_cnot(apply_cnot(s, q, t), q, t).amplitudes, s.amplitudes)


class TestDenseOracle:
    def test_single_qubit_encoding(self):
        spec = CircuitSpec(1, 0)
        ref = apply_ry(new_zero_state(1), 0, np.pi / 2)
        out = dense_matrix_oracle(spec, [np.pi / 2], [])
        np.testing.assert_allclose(out.amplitudes, ref.amplitudes, atol=1e-12)

    def test_two_qubit_random(self, rng):
        spec = CircuitSpec(2, 2)
        z, p = rng.uniform(-np.pi, np.pi, 2), rng.uniform(0, 2 * np.pi, spec.n_params)
        gate = apply_ansatz(encode(spec, z), spec, p)
        assert np.max(np.abs(gate.amplitudes - dense_matrix_oracle(spec, z, p).amplitudes)) < 1e-10

    def test_identity_circuit(self):
        spec = CircuitSpec(3, 2)
        out = dense_matrix_oracle(spec, np.zeros(3), np.zeros(spec.n_params))
        np.testing.assert_allclose(out.amplitudes, new_zero_state(3).amplitudes, atol=1e-15)

    def test_size_limit(self):
        with pytest.raises(ValueError):
            dense_matrix_oracle(CircuitSpec(4, 1), np.zeros(4), np.zeros(8))

    @pytest.mark.parametrize("seed", range(100))
    def test_random_circuits(self, seed):
        rng = np.random.default_rng(seed)
        spec = CircuitSpec(int(rng.integers(1, 4)), int(rng.integers(0, 4)), bool(rng.integers(2)))
        z = rng.uniform(-np.pi, np.pi, spec.n_qubits)
        p = rng.uniform(0, 2 * np.pi, spec.n_params)
        gate = apply_ansatz(encode(spec, z), spec, p)
        assert np.max(np.abs(gate.amplitudes - dense_matrix_oracle(spec, z, p).amplitudes)) < 1e-10
