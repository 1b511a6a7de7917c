import itertools

import numpy as np
import pytest

from diaglearn.errors import ConfigError, SizeExceeded
from diaglearn.pauli import (DiagonalHamiltonian, GeneratorSet, InteractingHamiltonian, PauliString,
                             ZString, all_zstrings, build_eigenvalue_matrix, dense_matrix, hadamard,
                             project_effective)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)
SINGLE = {"I": I2, "X": X, "Y": Y, "Z": Z}


def kron_string(text):
    # leftmost character is qubit 1, stored as the least significant bit
    m = np.eye(1, dtype=complex)
    for c in text:
        m = np.kron(SINGLE[c], m)
    return m


def test_parse_and_format_round_trip():
    for text in ("ZIZ", "IIZ", "ZZZZ", "IZ"):
        assert str(ZString.parse(text)) == text
    assert ZString.parse("ZII").mask == 1
    assert ZString.parse("IIZ").mask == 4


def test_non_diagonal_character_is_position_tagged():
    with pytest.raises(ConfigError, match="position 2"):
        ZString.parse("ZX")
    with pytest.raises(ConfigError):
        ZString.parse("ZQ")


def test_eigenvalue_matches_bit_parity():
    z = ZString.parse("ZIZ")
    assert [z.eigenvalue(x) for x in range(8)] == [1, -1, 1, -1, -1, 1, -1, 1]
    assert np.array_equal(z.eigenvalues(), [z.eigenvalue(x) for x in range(8)])


def test_generator_set_rejects_identity_and_duplicates():
    with pytest.raises(ValueError):
        GeneratorSet.from_masks([0, 1], 2)
    with pytest.raises(ConfigError):
        GeneratorSet.parse(["ZI", "ZI"])
    with pytest.raises(ConfigError):
        GeneratorSet.parse(["ZI", "ZII"])


def test_eigenvalue_matrix_local_and_ones_row():
    h = build_eigenvalue_matrix(GeneratorSet.local(2))
    assert np.array_equal(h, [[1, -1, 1, -1], [1, 1, -1, -1]])
    h1 = build_eigenvalue_matrix(GeneratorSet.local(2), prepend_ones=True)
    assert np.array_equal(h1[0], np.ones(4))


def test_eigenvalue_matrix_column_subset():
    gens = GeneratorSet.all_nonidentity(3)
    full = build_eigenvalue_matrix(gens)
    sub = build_eigenvalue_matrix(gens, columns=[5, 0, 3])
    assert np.array_equal(sub, full[:, [5, 0, 3]])
    with pytest.raises(ValueError):
        build_eigenvalue_matrix(gens, columns=[1, 1])


def test_hadamard_rows_are_zstring_signs():
    n = 4
    H = hadamard(n)
    assert np.allclose(H @ H.T, (1 << n) * np.eye(1 << n))
    for z in all_zstrings(n):
        assert np.array_equal(H[z.mask], z.eigenvalues())


@pytest.mark.parametrize("text", ["X", "Y", "Z", "XY", "YZX", "ZIY", "XXI", "IYZ"])
def test_dense_pauli_matches_kronecker(text):
    assert np.allclose(dense_matrix(PauliString.parse(text)), kron_string(text))


def test_pauli_anticommutation_spot_checks():
    for a, b in itertools.combinations("XYZ", 2):
        A = dense_matrix(PauliString.parse(a + "I"))
        B = dense_matrix(PauliString.parse(b + "I"))
        assert np.allclose(A @ B + B @ A, 0)


def test_diagonal_hamiltonian_energies():
    gens = GeneratorSet.parse(["ZI", "IZ", "ZZ"])
    h = DiagonalHamiltonian.from_generators(gens, [0.1, 0.2, 0.3])
    expected = np.diag(0.1 * kron_string("ZI") + 0.2 * kron_string("IZ") + 0.3 * kron_string("ZZ")).real
    assert np.allclose(h.energies(), expected)
    assert h.energy(3) == pytest.approx(expected[3])


def test_interacting_dense_and_projection():
    h = InteractingHamiltonian.build([0.3, -0.2, 0.1], [("XXI", 0.5), ("IYZ", 0.3), ("ZZI", 0.7)])
    ref = (0.3 * kron_string("ZII") - 0.2 * kron_string("IZI") + 0.1 * kron_string("IIZ")
           + 0.5 * kron_string("XXI") + 0.3 * kron_string("IYZ") + 0.7 * kron_string("ZZI"))
    assert np.allclose(dense_matrix(h), ref)
    eff = project_effective(h)
    assert np.allclose(np.diag(dense_matrix(eff)), np.diag(ref))
    assert h.has_offdiagonal()


def test_single_z_interaction_rejected():
    with pytest.raises(ValueError):
        InteractingHamiltonian.build([0.0, 0.0], [("ZI", 1.0)])


def test_dense_limit():
    with pytest.raises(SizeExceeded):
        dense_matrix(PauliString.parse("Z" * 11))
