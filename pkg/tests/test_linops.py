import numpy as np
import pytest

from adiaprod.errors import DefectiveMatrix
from adiaprod.linops import bi_eigensystem, fro_norm, matrix_exp
from scenarios import random_separated_matrix

SIGMA1 = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA3 = np.array([[1, 0], [0, -1]], dtype=complex)


def taylor_exp(M, terms=30):
    out = np.eye(M.shape[0], dtype=complex)
    acc = np.eye(M.shape[0], dtype=complex)
    for k in range(1, terms + 1):
        acc = acc @ M / k
        out = out + acc
    return out


class TestMatrixExp:
    def test_zero_matrix(self):
        assert np.allclose(matrix_exp(np.zeros((3, 3))), np.eye(3), atol=1e-15)

    def test_pauli_involution(self):
        # exp(i pi sigma_1 / 2) = i sigma_1
        got = matrix_exp(1j * np.pi * SIGMA1 / 2)
        assert np.allclose(got, 1j * SIGMA1, atol=1e-14)

    def test_against_taylor_series(self):
        rng = np.random.default_rng(11)
        M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        M /= np.linalg.norm(M, 2)
        assert np.max(np.abs(matrix_exp(M) - taylor_exp(M))) < 1e-12

    def test_rejects_non_finite(self):
        bad = np.array([[np.inf, 0], [0, 0]])
        with pytest.raises(ValueError):
            matrix_exp(bad)


class TestFroNorm:
    def test_identity(self):
        assert fro_norm(np.eye(2)) == pytest.approx(np.sqrt(2.0))

    def test_sigma3(self):
        assert fro_norm(SIGMA3) == pytest.approx(np.sqrt(2.0))


class TestBiEigensystem:
    def test_diagonal_hermitian(self):
        system = bi_eigensystem(np.diag([1.0, -1.0]).astype(complex))
        assert np.allclose(system.eigenvalues, [-1.0, 1.0])
        assert system.degeneracies == [1, 1]
        for lv, col in zip(system.levels, ([0, 1], [1, 0])):
            psi = lv.right[:, 0] / np.max(np.abs(lv.right[:, 0]))
            assert np.allclose(np.abs(psi), col)

    def test_stark_matrix_degenerate(self):
        H = 0.5 * np.array([[1, 0, 1], [0, 2, 0], [1, 0, 1]], dtype=complex)
        system = bi_eigensystem(H)
        assert np.allclose(system.eigenvalues, [0.0, 1.0], atol=1e-12)
        assert system.degeneracies == [1, 2]

    def test_oscillator_matrix(self):
        # E = sqrt(b c) = sqrt(i * (-4i)) = 2
        M = np.array([[0, 1j], [-4j, 0]], dtype=complex)
        system = bi_eigensystem(M)
        assert np.allclose(system.eigenvalues, [-2.0, 2.0], atol=1e-12)

    def test_defective_matrix_raises(self):
        with pytest.raises(DefectiveMatrix):
            bi_eigensystem(np.array([[0.0, 1.0], [0.0, 0.0]]))

    def test_grouping_threshold(self):
        system = bi_eigensystem(np.diag([1.0, 1.0 + 1e-10, 2.0]).astype(complex))
        assert system.degeneracies == [2, 1]

    @pytest.mark.parametrize("dim", [2, 3])
    def test_random_completeness_and_reconstruction(self, dim):
        rng = np.random.default_rng(100 + dim)
        for _ in range(500):
            M = random_separated_matrix(rng, dim)
            system = bi_eigensystem(M)
            assert system.completeness_defect() < 1e-9
            assert system.biortho_defect() < 1e-9
            assert fro_norm(system.reconstruct() - M) < 1e-10 * fro_norm(M)

    def test_hermitian_left_right_coincide(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            A = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
            H = A + A.conj().T
            if min(abs(np.diff(np.sort(np.linalg.eigvalsh(H))))) < 0.3:
                continue
            system = bi_eigensystem(H)
            assert np.max(np.abs(system.eigenvalues.imag)) < 1e-12
            for lv in system.levels:
                psi = lv.right[:, 0]
                phi = lv.left[:, 0]
                psi = psi / np.linalg.norm(psi)
                phi = phi / np.linalg.norm(phi)
                phase = np.vdot(psi, phi)
                assert np.linalg.norm(phi - phase * psi) < 1e-10
