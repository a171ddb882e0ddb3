import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hqcpinn.circuit import (
    CircuitSpec,
    apply_ansatz,
    bits_to_spins,
    encode,
    expect_z_all,
    expectations,
    observable_variance_z,
    run,
    sample_shots,
)
from hqcpinn.statevector import StateVector, apply_cnot, new_zero_state

R2 = 1 / np.sqrt(2)


class TestSpec:
    @pytest.mark.parametrize("n,L,p,g", [(8, 3, 48, 69), (4, 2, 16, 22), (1, 1, 2, 2)])
    def test_counting_laws(self, n, L, p, g):
        spec = CircuitSpec(n, L)
        assert spec.n_params == p == 2 * n * L
        assert spec.gate_count == g == L * (3 * n - 1)

    @given(st.integers(1, 14), st.integers(0, 6))
    def test_param_law_property(self, n, L):
        assert CircuitSpec(n, L).n_params == 2 * n * L

    def test_config_round_trip(self):
        spec = CircuitSpec(4, 2, False)
        assert CircuitSpec.from_config(spec.to_config()) == spec
        assert CircuitSpec.from_config({"n_qubits": "4", "n_layers": "2", "entangle": "false"}) == spec

    def test_unknown_config_key(self):
        with pytest.raises(KeyError):
            CircuitSpec.from_config({"n_qubits": 4, "depth": 2})


class TestEncode:
    def test_zero_angles(self):
        np.testing.assert_allclose(encode(CircuitSpec(3, 0), np.zeros(3)).amplitudes, new_zero_state(3).amplitudes)

    def test_half_pi_expectation(self):
        assert abs(expect_z_all(encode(CircuitSpec(1, 0), [np.pi / 2]))[0]) < 1e-15

    def test_flip_qubit_zero(self):
        amps = encode(CircuitSpec(2, 0), [np.pi, 0.0]).amplitudes
        np.testing.assert_allclose(np.abs(amps), [0, 1, 0, 0], atol=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            encode(CircuitSpec(2, 0), [0.1])


class TestAnsatz:
    def test_zero_params_keep_zero_state(self):
        spec = CircuitSpec(3, 2)
        out = apply_ansatz(new_zero_state(3), spec, np.zeros(spec.n_params))
        np.testing.assert_allclose(out.amplitudes, new_zero_state(3).amplitudes)

    def test_rotate_then_cnot(self):
        spec = CircuitSpec(2, 1)
        p = np.zeros(4)
        p[0] = np.pi  # RY(pi) on qubit 0
        out = apply_ansatz(new_zero_state(2), spec, p)
        np.testing.assert_allclose(np.abs(out.amplitudes), [0, 0, 0, 1], atol=1e-15)

    def test_cnot_order_ascending(self):
        # qubit 0 set: CNOT(0,1) then CNOT(1,2) propagates to all; the reverse order would not
        spec = CircuitSpec(3, 1)
        p = np.zeros(spec.n_params)
        p[0] = np.pi
        out = apply_ansatz(new_zero_state(3), spec, p)
        assert abs(abs(out.amplitudes[7]) - 1) < 1e-15

    def test_parameter_layout(self):
        # the second angle of (layer 1, qubit 1) is its RZ; set RY of that slot
        spec = CircuitSpec(2, 2, entangle=False)
        p = np.zeros(spec.n_params)
        p[2 * 2 + 2 * 1] = np.pi  # layer 1, qubit 1, RY
        out = apply_ansatz(new_zero_state(2), spec, p)
        np.testing.assert_allclose(np.abs(out.amplitudes), [0, 0, 1, 0], atol=1e-15)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            apply_ansatz(new_zero_state(2), CircuitSpec(2, 1), np.zeros(3))

    def test_batched_run_matches_single(self, rng):
        spec = CircuitSpec(3, 2)
        z = rng.uniform(-np.pi, np.pi, (5, 3))
        p = rng.uniform(0, 2 * np.pi, (5, spec.n_params))
        batch = run(spec, z, p)
        for i in range(5):
            np.testing.assert_allclose(batch[i], apply_ansatz(encode(spec, z[i]), spec, p[i]).amplitudes, atol=1e-14)
            np.testing.assert_allclose(expectations(spec, z[i], p[i]), expect_z_all(StateVector(3, batch[i])), atol=1e-14)


class TestReadout:
    def test_zero_state_all_plus_one(self):
        np.testing.assert_array_equal(expect_z_all(new_zero_state(4)), np.ones(4))

    def test_bell_marginals(self):
        bell = apply_cnot(StateVector(2, [R2, R2, 0, 0]), 0, 1)
        np.testing.assert_allclose(expect_z_all(bell), [0, 0], atol=1e-15)

    def test_variance(self):
        assert observable_variance_z(new_zero_state(1), 0) == 0
        assert abs(observable_variance_z(StateVector(1, [R2, R2]), 0) - 1) < 1e-15
        assert abs(observable_variance_z(encode(CircuitSpec(1, 0), [np.pi / 3]), 0) - 0.75) < 1e-12

    @given(st.integers(0, 2**32 - 1))
    def test_bounds(self, seed):
        rng = np.random.default_rng(seed)
        spec = CircuitSpec(4, 2)
        s = apply_ansatz(encode(spec, rng.uniform(-np.pi, np.pi, 4)), spec, rng.uniform(0, 2 * np.pi, 16))
        e = expect_z_all(s)
        assert np.all(np.abs(e) <= 1 + 1e-12)
        assert abs(s.probabilities().sum() - 1) < 1e-12
        for q in range(4):
            assert 0 <= observable_variance_z(s, q) <= 1


class TestShots:
    def test_deterministic_state(self):
        bits = sample_shots(new_zero_state(3), 50, seed=0)
        assert bits.shape == (50, 3) and not bits.any()

    def test_same_seed_same_shots(self, rng):
        s = encode(CircuitSpec(3, 0), rng.uniform(-3, 3, 3))
        np.testing.assert_array_equal(sample_shots(s, 100, 7), sample_shots(s, 100, 7))

    def test_zero_mean_binomial_bound(self):
        s = encode(CircuitSpec(1, 0), [np.pi / 2])
        spins = bits_to_spins(sample_shots(s, 100_000, 1))
        assert abs(spins.mean()) < 3 / np.sqrt(100_000)

    def test_half_expectation(self):
        # <Z> = 0.5 means P(+1) = 0.75
        s = encode(CircuitSpec(1, 0), [np.arccos(0.5)])
        p_plus = np.mean(sample_shots(s, 100_000, 2) == 0)
        assert abs(p_plus - 0.75) < 3 * np.sqrt(0.75 * 0.25 / 100_000)

    def test_joint_sampling_keeps_correlations(self):
        bell = apply_cnot(StateVector(2, [R2, R2, 0, 0]), 0, 1)
        bits = sample_shots(bell, 2000, 3)
        assert np.all(bits[:, 0] == bits[:, 1])
        assert 0.4 < bits[:, 0].mean() < 0.6

    def test_marginals_match_expectations(self, rng):
        spec = CircuitSpec(4, 2)
        s = apply_ansatz(encode(spec, rng.uniform(-3, 3, 4)), spec, rng.uniform(0, 6, 16))
        n = 100_000
        mean = bits_to_spins(sample_shots(s, n, 5)).mean(axis=0)
        e = expect_z_all(s)
        sigma = np.sqrt(np.maximum(1 - e**2, 1e-12) / n)
        assert np.all(np.abs(mean - e) < 3 * sigma + 1e-12)

    def test_unnormalised_rejected(self):
        with pytest.raises(ValueError):
            sample_shots(StateVector(1, [1.0, 1.0]), 10, 0)

    def test_needs_a_shot(self):
        with pytest.raises(ValueError):
            sample_shots(new_zero_state(1), 0, 0)
