"""Tests for quantum_core.operator_algebra"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from quantum_core.errors import DimensionError, ValidationError
from quantum_core.operator_algebra import (
    HermitianOperator,
    TensorSpace,
    UnitaryOperator,
    commutator,
    embed,
    embed_on,
    expm_hermitian,
    hs_inner,
    hs_norm,
    identity,
    is_unitary,
    kron,
    kron_all,
    partial_trace,
    pauli,
)
from tests.conftest import random_hermitian
from tests.oracles import expm_series, kron_loop, partial_trace_loop


class TestOperators:
    """Construction-time invariants"""

    def test_pauli_matrices_are_hermitian(self):
        for axis in "xyz":
            op = pauli(axis)
            assert op.dim == 2
            assert op.label == f"sigma_{axis}"

    def test_sigma_z_convention(self):
        assert_allclose(pauli('z').matrix, np.diag([1, -1]))

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValidationError):
            HermitianOperator(np.array([[0, 1], [0, 0]]))

    def test_non_square_rejected(self):
        with pytest.raises(DimensionError):
            HermitianOperator(np.zeros((2, 3)))

    def test_nan_rejected(self):
        with pytest.raises(ValidationError):
            HermitianOperator(np.array([[np.nan, 0], [0, 1]]))

    def test_non_unitary_rejected(self):
        with pytest.raises(ValidationError):
            UnitaryOperator(2 * np.eye(2))

    def test_matrix_is_read_only(self):
        op = pauli('x')
        with pytest.raises(ValueError):
            op.matrix[0, 0] = 5

    def test_scalar_detection(self):
        assert HermitianOperator(3 * np.eye(3)).is_scalar()
        assert not pauli('z').is_scalar()

    def test_unknown_pauli_axis(self):
        with pytest.raises(ValidationError):
            pauli('w')


class TestTensorSpace:

    def test_dimensions(self):
        space = TensorSpace((2, 3, 2))
        assert space.total_dim == 12
        assert space.n_factors == 3
        assert space.targets_dim([0, 1]) == 6

    def test_factor_below_two_rejected(self):
        with pytest.raises(DimensionError):
            TensorSpace((2, 1))

    def test_bad_targets(self):
        space = TensorSpace((2, 2))
        with pytest.raises(DimensionError):
            space.check_targets([0, 0])
        with pytest.raises(DimensionError):
            space.check_targets([2])

    def test_extended(self):
        assert TensorSpace((2, 2)).extended(3).factor_dims == (2, 2, 3)


class TestKronAndEmbed:

    @pytest.mark.parametrize("seed", range(5))
    def test_kron_matches_loop_oracle(self, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(2, 3)) + 1j * rng.normal(size=(2, 3))
        b = rng.normal(size=(3, 2)) + 1j * rng.normal(size=(3, 2))
        assert_allclose(kron(a, b), kron_loop(a, b), atol=1e-12)

    @pytest.mark.parametrize("seed", range(5))
    def test_kron_is_associative(self, seed):
        rng = np.random.default_rng(20 + seed)
        a, b, c = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)) for d in (2, 3, 2))
        assert_allclose(kron(kron(a, b), c), kron(a, kron(b, c)), atol=1e-12)

    @pytest.mark.parametrize("p, q", [(0, 1), (0, 2), (1, 2), (2, 0)])
    @pytest.mark.parametrize("seed", range(5))
    def test_operators_on_different_factors_commute(self, p, q, seed):
        rng = np.random.default_rng(40 + seed)
        space = TensorSpace((2, 3, 2))
        a = random_hermitian(rng, space.factor_dims[p])
        b = random_hermitian(rng, space.factor_dims[q])
        assert_allclose(commutator(embed(a, space, p), embed(b, space, q)), 0, atol=1e-12)

    def test_embed_on_first_factor(self):
        space = TensorSpace((2, 2))
        assert_allclose(embed(pauli('x'), space, 0), np.kron(pauli('x').matrix, np.eye(2)))

    def test_embed_on_last_factor(self):
        space = TensorSpace((2, 2, 2))
        expected = kron_all(np.eye(2), np.eye(2), pauli('z').matrix)
        assert_allclose(embed(pauli('z'), space, 2), expected)

    def test_embed_on_reversed_pair(self):
        """An operator on (1, 0) is the swap-conjugate of the same operator on (0, 1)"""
        space = TensorSpace((2, 2))
        op = np.kron(pauli('x').matrix, pauli('z').matrix)
        swap = np.array([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]])
        assert_allclose(embed_on(op, space, [1, 0]), swap @ op @ swap)
        assert_allclose(embed_on(op, space, [1, 0]), np.kron(pauli('z').matrix, pauli('x').matrix))

    def test_embed_size_mismatch(self):
        with pytest.raises(DimensionError):
            embed_on(np.eye(4), TensorSpace((2, 2, 2)), [0])

    def test_embed_out_of_range(self):
        with pytest.raises(DimensionError):
            embed(pauli('x'), TensorSpace((2, 2)), 2)


class TestAlgebra:

    def test_commutator_of_paulis(self):
        assert_allclose(commutator(pauli('x'), pauli('y')), 2j * pauli('z').matrix)

    def test_commutator_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            commutator(np.eye(2), np.eye(3))

    def test_hs_inner_and_norm(self):
        assert hs_inner(pauli('x'), pauli('x')) == pytest.approx(2.0)
        assert hs_inner(pauli('x'), pauli('z')) == pytest.approx(0.0)
        assert hs_norm(identity(4)) == pytest.approx(2.0)

    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("seed", range(5))
    def test_i_times_commutator_is_hermitian(self, n, seed):
        rng = np.random.default_rng(60 + 10 * n + seed)
        c = 1j * commutator(random_hermitian(rng, n), random_hermitian(rng, n))
        assert_allclose(c, c.conj().T, atol=1e-12)
        HermitianOperator(c)

    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("seed", range(5))
    def test_hs_inner_with_itself_is_positive(self, n, seed):
        rng = np.random.default_rng(80 + 10 * n + seed)
        a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
        value = hs_inner(a, a)
        assert value.imag == pytest.approx(0.0, abs=1e-12)
        assert value.real > 0
        assert value.real == pytest.approx(hs_norm(a) ** 2)

    def test_hs_inner_of_zero_is_zero(self):
        assert hs_inner(np.zeros((3, 3)), np.zeros((3, 3))) == 0


class TestExpm:

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_series_oracle(self, seed):
        rng = np.random.default_rng(seed)
        h = random_hermitian(rng, 4)
        t = rng.uniform(-2, 2)
        assert_allclose(expm_hermitian(h, t).matrix, expm_series(-1j * t * h.matrix), atol=1e-10)

    def test_pi_pulse_about_x(self):
        u = expm_hermitian(pauli('x'), np.pi / 2)
        assert_allclose(u.matrix, -1j * pauli('x').matrix, atol=1e-12)

    def test_zero_time_is_identity(self):
        assert_allclose(expm_hermitian(pauli('y'), 0.0).matrix, np.eye(2))

    @pytest.mark.parametrize("seed", range(100))
    def test_unitarity(self, seed):
        rng = np.random.default_rng(1000 + seed)
        u = expm_hermitian(random_hermitian(rng, 3), rng.uniform(-10, 10))
        assert is_unitary(u.matrix, 1e-10)

    @pytest.mark.parametrize("n", [2, 3, 4])
    @pytest.mark.parametrize("seed", range(10))
    def test_group_law(self, n, seed):
        rng = np.random.default_rng(2000 + 10 * n + seed)
        h = random_hermitian(rng, n)
        s, t = rng.uniform(-5, 5, size=2)
        product = expm_hermitian(h, s).matrix @ expm_hermitian(h, t).matrix
        assert_allclose(expm_hermitian(h, s + t).matrix, product, atol=1e-9)


class TestPartialTrace:

    @pytest.mark.parametrize("keep", [[0], [1], [2], [0, 2], [1, 2]])
    def test_matches_loop_oracle(self, keep):
        rng = np.random.default_rng(7)
        dims = (2, 3, 2)
        a = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
        rho = a @ a.conj().T
        rho /= np.trace(rho)
        assert_allclose(partial_trace(rho, TensorSpace(dims), keep),
                        partial_trace_loop(rho, dims, keep), atol=1e-12)

    def test_product_state_factorizes(self):
        a = np.diag([0.25, 0.75])
        b = np.array([[0.5, 0.5], [0.5, 0.5]])
        space = TensorSpace((2, 2))
        assert_allclose(partial_trace(np.kron(a, b), space, [0]), a, atol=1e-12)
        assert_allclose(partial_trace(np.kron(a, b), space, [1]), b, atol=1e-12)

    def test_trace_preserved(self):
        rho = np.eye(8) / 8
        assert np.trace(partial_trace(rho, TensorSpace((2, 2, 2)), [1])) == pytest.approx(1.0)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            partial_trace(np.eye(3), TensorSpace((2, 2)), [0])
