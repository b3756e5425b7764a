import math

import numpy as np
import pytest
import scipy.linalg

from qdsens.fock import (
    FockBasis,
    PureState,
    apply_number_generator,
    apply_phase_rotation,
    apply_rotation_generator,
    apply_two_mode_rotation,
    enumerate_basis,
    fock_state,
    inner_product,
    superposition,
)


def dense_pair_generator(basis, pair):
    """Oracle: matrix of H = i(a_p^dag a_q - a_q^dag a_p) built from ladder rules."""
    p, q = pair
    dim = basis.size
    mat = np.zeros((dim, dim), dtype=complex)
    for col, occ in enumerate(basis.states):
        # i a_p^dag a_q
        if occ[q] > 0:
            target = list(occ)
            target[q] -= 1
            target[p] += 1
            amp = 1j * math.sqrt(occ[q] * (occ[p] + 1))
            mat[basis.index[tuple(target)], col] += amp
        # -i a_q^dag a_p
        if occ[p] > 0:
            target = list(occ)
            target[p] -= 1
            target[q] += 1
            amp = -1j * math.sqrt(occ[p] * (occ[q] + 1))
            mat[basis.index[tuple(target)], col] += amp
    return mat


def random_state(basis, rng, register_dim=1):
    z = rng.standard_normal(basis.size * register_dim) + 1j * rng.standard_normal(
        basis.size * register_dim
    )
    return PureState(basis, register_dim, z / np.linalg.norm(z))


class TestEnumerateBasis:
    def test_two_modes_two_photons(self):
        basis = enumerate_basis(2, {2})
        assert basis.states == ((2, 0), (1, 1), (0, 2))
        assert basis.size == 3

    def test_three_modes_two_photons_size(self):
        assert enumerate_basis(3, {2}).size == 6

    def test_eight_modes_four_photons_size(self):
        assert enumerate_basis(8, {4}).size == 330

    def test_sector_sizes_match_binomial(self):
        for modes, n in [(2, 3), (3, 4), (4, 2), (5, 1)]:
            basis = enumerate_basis(modes, {n})
            assert basis.size == math.comb(n + modes - 1, n)

    def test_multi_sector_ordering_and_index_bijection(self):
        basis = enumerate_basis(2, {0, 1, 2})
        assert basis.states == ((0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2))
        assert sorted(basis.index.values()) == list(range(basis.size))
        for occ, i in basis.index.items():
            assert basis.states[i] == occ

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            enumerate_basis(0, {1})
        with pytest.raises(ValueError):
            enumerate_basis(2, set())
        with pytest.raises(ValueError):
            enumerate_basis(2, {-1})


class TestInnerProduct:
    def test_normalized_self_overlap(self):
        basis = enumerate_basis(2, {1})
        x = superposition(basis, {(1, 0): 0.6, (0, 1): 0.8j})
        assert inner_product(x, x) == pytest.approx(1.0)

    def test_orthogonal_basis_states(self):
        basis = enumerate_basis(2, {1})
        a = fock_state(basis, (1, 0))
        b = fock_state(basis, (0, 1))
        assert inner_product(a, b) == 0

    def test_conjugate_symmetry(self):
        rng = np.random.default_rng(7)
        basis = enumerate_basis(3, {0, 1, 2})
        for _ in range(5):
            a = random_state(basis, rng)
            b = random_state(basis, rng)
            assert inner_product(a, b) == pytest.approx(np.conj(inner_product(b, a)))

    def test_basis_mismatch_is_an_error(self):
        a = fock_state(enumerate_basis(2, {1}), (1, 0))
        b = fock_state(enumerate_basis(2, {2}), (2, 0))
        with pytest.raises(ValueError):
            inner_product(a, b)


class TestTwoModeRotation:
    def test_zero_angle_is_identity(self):
        rng = np.random.default_rng(3)
        basis = enumerate_basis(3, {1, 2})
        x = random_state(basis, rng)
        y = apply_two_mode_rotation(x, (0, 2), 0.0)
        assert np.allclose(x.amplitudes, y.amplitudes, atol=1e-15)

    def test_single_photon_rotation_law(self):
        # Oracle: dense exponentiation of the explicitly assembled generator.
        basis = enumerate_basis(2, {1})
        theta = 0.7341
        oracle = scipy.linalg.expm(-1j * theta * dense_pair_generator(basis, (0, 1)))
        got = apply_two_mode_rotation(fock_state(basis, (1, 0)), (0, 1), theta)
        assert np.allclose(got.amplitudes, oracle[:, basis.index[(1, 0)]], atol=1e-12)
        # Explicit law for the paper's mode-operator convention.
        expected = superposition(
            basis, {(1, 0): math.cos(theta), (0, 1): -math.sin(theta)}
        )
        assert np.allclose(got.amplitudes, expected.amplitudes, atol=1e-12)

    def test_hong_ou_mandel(self):
        basis = enumerate_basis(2, {2})
        theta = math.pi / 4
        oracle = scipy.linalg.expm(-1j * theta * dense_pair_generator(basis, (0, 1)))
        got = apply_two_mode_rotation(fock_state(basis, (1, 1)), (0, 1), theta)
        assert np.allclose(got.amplitudes, oracle[:, basis.index[(1, 1)]], atol=1e-12)
        expected = superposition(
            basis, {(2, 0): 1 / math.sqrt(2), (0, 2): -1 / math.sqrt(2)}
        )
        assert np.allclose(got.amplitudes, expected.amplitudes, atol=1e-12)
        assert abs(got.table[basis.index[(1, 1)], 0]) < 1e-12

    def test_unitarity(self):
        rng = np.random.default_rng(11)
        basis = enumerate_basis(3, {0, 1, 2, 3})
        for _ in range(10):
            x = random_state(basis, rng)
            theta = rng.uniform(-math.pi, math.pi)
            y = apply_two_mode_rotation(x, (1, 2), theta)
            assert abs(y.norm() - 1.0) <= 1e-12

    def test_composition(self):
        rng = np.random.default_rng(13)
        basis = enumerate_basis(3, {2})
        x = random_state(basis, rng)
        t1, t2 = 0.31, -1.17
        once = apply_two_mode_rotation(x, (0, 1), t1 + t2)
        twice = apply_two_mode_rotation(
            apply_two_mode_rotation(x, (0, 1), t1), (0, 1), t2
        )
        assert np.linalg.norm(once.amplitudes - twice.amplitudes) <= 1e-10

    def test_reversed_pair_is_negated_angle(self):
        rng = np.random.default_rng(17)
        basis = enumerate_basis(2, {0, 1, 2})
        x = random_state(basis, rng)
        a = apply_two_mode_rotation(x, (1, 0), 0.4)
        b = apply_two_mode_rotation(x, (0, 1), -0.4)
        assert np.allclose(a.amplitudes, b.amplitudes, atol=1e-12)

    def test_no_sector_leakage(self):
        rng = np.random.default_rng(19)
        basis = enumerate_basis(3, {1, 3})
        x = random_state(basis, rng)
        y = apply_two_mode_rotation(x, (0, 1), 0.9)
        sector1 = basis.totals == 1
        w_in = np.linalg.norm(x.table[sector1]) ** 2
        w_out = np.linalg.norm(y.table[sector1]) ** 2
        assert w_out == pytest.approx(w_in, abs=1e-12)

    def test_invalid_modes(self):
        basis = enumerate_basis(2, {1})
        x = fock_state(basis, (1, 0))
        with pytest.raises(ValueError):
            apply_two_mode_rotation(x, (0, 0), 0.1)
        with pytest.raises(ValueError):
            apply_two_mode_rotation(x, (0, 2), 0.1)

    def test_register_is_untouched(self):
        basis = enumerate_basis(2, {1})
        x = fock_state(basis, (1, 0), register_dim=3, register_index=2)
        y = apply_two_mode_rotation(x, (0, 1), 0.25)
        assert np.allclose(y.table[:, :2], 0.0)
        assert abs(y.table[basis.index[(0, 1)], 2] + math.sin(0.25)) < 1e-12


class TestRotationGenerator:
    def test_vacuum_is_annihilated(self):
        basis = enumerate_basis(2, {0, 1})
        vac = fock_state(basis, (0, 0))
        out = apply_rotation_generator(vac, (0, 1))
        assert np.allclose(out.amplitudes, 0.0)

    def test_matches_dense_oracle(self):
        rng = np.random.default_rng(23)
        basis = enumerate_basis(3, {1, 2})
        mat = dense_pair_generator(basis, (0, 2))
        x = random_state(basis, rng)
        got = apply_rotation_generator(x, (0, 2))
        assert np.allclose(got.amplitudes, mat @ x.amplitudes, atol=1e-12)

    def test_finite_difference_consistency(self):
        # (exp(-i d H) - exp(+i d H)) x / (2 d) ~ -i H x
        rng = np.random.default_rng(29)
        basis = enumerate_basis(3, {0, 1, 2})
        x = random_state(basis, rng)
        delta = 1e-5
        plus = apply_two_mode_rotation(x, (1, 2), delta)
        minus = apply_two_mode_rotation(x, (1, 2), -delta)
        fd = (plus.amplitudes - minus.amplitudes) / (2 * delta)
        hx = apply_rotation_generator(x, (1, 2))
        assert np.linalg.norm(fd - (-1j) * hx.amplitudes) <= 1e-8

    def test_hermiticity(self):
        rng = np.random.default_rng(31)
        basis = enumerate_basis(2, {0, 1, 2, 3})
        for _ in range(5):
            a = random_state(basis, rng)
            b = random_state(basis, rng)
            lhs = inner_product(a, apply_rotation_generator(b, (0, 1)))
            rhs = inner_product(apply_rotation_generator(a, (0, 1)), b)
            assert lhs == pytest.approx(rhs)


class TestPhaseOperations:
    def test_phase_rotation_diagonal(self):
        basis = enumerate_basis(2, {0, 1, 2})
        x = superposition(basis, {(0, 0): 0.5, (1, 0): 0.5, (2, 0): 0.5, (0, 2): 0.5})
        y = apply_phase_rotation(x, (0,), math.pi)
        tab = y.table[:, 0]
        assert tab[basis.index[(0, 0)]] == pytest.approx(0.5)
        assert tab[basis.index[(1, 0)]] == pytest.approx(-0.5)
        assert tab[basis.index[(2, 0)]] == pytest.approx(0.5)
        assert tab[basis.index[(0, 2)]] == pytest.approx(0.5)

    def test_number_generator_eigenvalues(self):
        basis = enumerate_basis(2, {0, 1, 2})
        for occ in basis.states:
            x = fock_state(basis, occ)
            y = apply_number_generator(x, (0, 1))
            assert np.allclose(y.amplitudes, sum(occ) * x.amplitudes)

    def test_phase_generator_finite_difference(self):
        rng = np.random.default_rng(37)
        basis = enumerate_basis(2, {0, 1, 2})
        x = random_state(basis, rng)
        delta = 1e-5
        plus = apply_phase_rotation(x, (1,), delta)
        minus = apply_phase_rotation(x, (1,), -delta)
        fd = (plus.amplitudes - minus.amplitudes) / (2 * delta)
        hx = apply_number_generator(x, (1,))
        assert np.linalg.norm(fd - (-1j) * hx.amplitudes) <= 1e-8


class TestPureState:
    def test_amplitude_length_validation(self):
        basis = enumerate_basis(2, {1})
        with pytest.raises(ValueError):
            PureState(basis, 1, np.zeros(5))

    def test_register_layout_is_basis_major(self):
        basis = enumerate_basis(2, {1})
        x = fock_state(basis, (0, 1), register_dim=2, register_index=1)
        # basis index of (0,1) is 1, register index 1 -> flat position 3
        assert x.amplitudes[3] == 1.0
        assert np.count_nonzero(x.amplitudes) == 1

    def test_immutability(self):
        basis = enumerate_basis(2, {1})
        x = fock_state(basis, (1, 0))
        with pytest.raises(ValueError):
            x.amplitudes[0] = 0.0
