"""Dense linear-algebra layer: tensor products, partial traces, phase equality."""

import numpy as np
import pytest

from adqc.linalg import (
    CZ,
    H,
    I2,
    X,
    Z,
    DensityMatrix,
    PureState,
    apply_unitary,
    equal_up_to_global_phase,
    partial_trace,
    tensor,
    trace_distance,
)


def random_unitary(n, rng):
    m = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    q, r = np.linalg.qr(m)
    return q @ np.diag(np.diag(r) / np.abs(np.diag(r)))


class TestTensor:
    def test_identity_case(self):
        np.testing.assert_allclose(tensor(I2, I2), np.eye(4), atol=1e-15)

    def test_xx_antidiagonal(self):
        got = tensor(X, X)
        np.testing.assert_allclose(got, np.fliplr(np.eye(4)), atol=1e-15)

    def test_hh_entries(self):
        got = tensor(H, H)
        assert np.allclose(np.abs(got), 0.5, atol=1e-15)

    def test_associativity_on_integer_matrices(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b, c = (rng.integers(-3, 4, size=(2, 2)).astype(complex) for _ in range(3))
            left = tensor(tensor(a, b), c)
            right = tensor(a, tensor(b, c))
            assert np.array_equal(left, right)

    def test_dimension_cap(self):
        with pytest.raises(ValueError):
            tensor(I2, I2, I2, I2, I2, I2)


class TestPartialTrace:
    def test_product_state(self):
        rho = PureState.from_label("0+").density()
        red = partial_trace(rho, [1])
        np.testing.assert_allclose(red.matrix, np.full((2, 2), 0.5), atol=1e-15)

    def test_bell_state(self):
        bell = PureState.from_vector([1, 0, 0, 1])
        for keep in ([0], [1]):
            red = partial_trace(bell.density(), keep)
            np.testing.assert_allclose(red.matrix, I2 / 2, atol=1e-15)

    def test_factor_recovery_vs_bruteforce(self):
        # rho = |+_{g,0}><+_{g,0}| (x) sigma ; tracing the first qubit returns sigma
        rng = np.random.default_rng(7)
        g = 1.234
        ket = np.array([np.cos(g / 2), np.sin(g / 2)], dtype=complex)
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        sigma = np.outer(psi, psi.conj())
        full = DensityMatrix(3, np.kron(np.outer(ket, ket.conj()), sigma))
        red = partial_trace(full, [1, 2])
        np.testing.assert_allclose(red.matrix, sigma, atol=1e-14)

        # independent oracle: explicit index contraction
        m = full.matrix.reshape(2, 4, 2, 4)
        brute = np.einsum("aibj->ij", m * np.eye(2)[:, None, :, None])
        np.testing.assert_allclose(red.matrix, brute, atol=1e-14)

    def test_trace_over_everything(self):
        rng = np.random.default_rng(11)
        psi = rng.normal(size=8) + 1j * rng.normal(size=8)
        rho = PureState.from_vector(psi).density()
        one = partial_trace(rho, [0])
        assert abs(np.trace(partial_trace(rho, [0, 1, 2]).matrix) - 1) < 1e-12
        assert one.num_qubits == 1

    def test_empty_keep_rejected(self):
        with pytest.raises(ValueError):
            partial_trace(PureState.from_label("0").density(), [])


class TestGlobalPhaseEquality:
    def test_explicit_phase(self):
        assert equal_up_to_global_phase(X, 1j * X, 1e-12)

    def test_orthogonal_paulis(self):
        assert not equal_up_to_global_phase(X, Z, 1e-12)

    def test_zero_matrix_handling(self):
        zero = np.zeros((2, 2))
        assert equal_up_to_global_phase(zero, zero)
        assert not equal_up_to_global_phase(X, zero)

    def test_equivalence_relation_on_unitaries(self):
        rng = np.random.default_rng(5)
        us = [random_unitary(2, rng) for _ in range(6)]
        phases = [np.exp(1j * rng.uniform(0, 2 * np.pi)) for _ in range(6)]
        for u, c in zip(us, phases):
            assert equal_up_to_global_phase(u, u, 1e-10)           # reflexive
            assert equal_up_to_global_phase(c * u, u, 1e-10)       # symmetric pair
            assert equal_up_to_global_phase(u, c * u, 1e-10)
        # transitivity on a chain
        u = us[0]
        a, b = phases[0] * u, phases[1] * phases[0] * u
        assert equal_up_to_global_phase(u, a, 1e-10)
        assert equal_up_to_global_phase(a, b, 1e-10)
        assert equal_up_to_global_phase(u, b, 1e-10)


class TestStates:
    def test_labels(self):
        plus = PureState.from_label("+")
        np.testing.assert_allclose(plus.amplitudes, [1 / np.sqrt(2)] * 2)
        two = PureState.from_label("|0+>")
        np.testing.assert_allclose(two.amplitudes, [1 / np.sqrt(2), 1 / np.sqrt(2), 0, 0])

    def test_density_validation(self):
        with pytest.raises(ValueError):
            DensityMatrix(1, np.array([[1.0, 0.5], [0.4, 0.0]]))
        with pytest.raises(ValueError):
            DensityMatrix(1, 2 * np.eye(2))

    def test_apply_unitary_targets(self):
        st = PureState.from_label("00")
        flipped = apply_unitary(st, X, [1])
        np.testing.assert_allclose(flipped.amplitudes, [0, 1, 0, 0], atol=1e-15)
        ent = apply_unitary(apply_unitary(st, H, [0]), CZ, [0, 1])
        assert abs(np.linalg.norm(ent.amplitudes) - 1) < 1e-12

    def test_trace_distance(self):
        a = PureState.from_label("0").density()
        b = PureState.from_label("1").density()
        assert abs(trace_distance(a, b) - 1.0) < 1e-12
        assert trace_distance(a, a) < 1e-15
