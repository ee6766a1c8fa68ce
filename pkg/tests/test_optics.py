import itertools
from math import factorial, sqrt

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ensembleqc.optics import (OpticalElement, apply_mode_matrix, beamsplitter, bs_matrix,
                               combiner_matrix, dft_matrix, fock_unitary, loss_kraus, phaseshift)
from ensembleqc.qstate import (CutoffError, QuantumState, RegisterLayout, StateError, Subsystem,
                               apply_kraus, is_unitary)
from conftest import random_unitary


def permanent(M):
    n = M.shape[0]
    if n == 0:
        return 1.0
    return sum(np.prod([M[i, p[i]] for i in range(n)]) for p in itertools.permutations(range(n)))


def fock_amplitude(M, out, inp):
    """<out| U(M) |inp> via the permanent of the repeated-index submatrix."""
    if sum(out) != sum(inp):
        return 0.0
    rows = [k for k, n in enumerate(out) for _ in range(n)]
    cols = [j for j, n in enumerate(inp) for _ in range(n)]
    sub = M[np.ix_(rows, cols)]
    norm = sqrt(np.prod([factorial(n) for n in out]) * np.prod([factorial(n) for n in inp]))
    return permanent(sub) / norm


def two_modes(cutoff=2):
    return RegisterLayout.of(Subsystem.mode("a", cutoff), Subsystem.mode("b", cutoff))


def test_hong_ou_mandel():
    out = beamsplitter(QuantumState.basis(two_modes(), (1, 1)), "a", "b")
    assert abs(out.amplitude((1, 1))) < 1e-12
    assert abs(abs(out.amplitude((2, 0))) ** 2 - 0.5) < 1e-12
    assert abs(abs(out.amplitude((0, 2))) ** 2 - 0.5) < 1e-12
    assert np.isclose(out.amplitude((2, 0)), 1j / sqrt(2))
    assert np.isclose(out.amplitude((0, 2)), 1j / sqrt(2))


def test_single_photon_beamsplitter_convention():
    out = beamsplitter(QuantumState.basis(two_modes(1), (1, 0)), "a", "b", t=0.3)
    assert np.isclose(out.amplitude((1, 0)), sqrt(0.3))
    assert np.isclose(out.amplitude((0, 1)), 1j * sqrt(0.7))


def test_combiner_sends_either_input_to_second_output_with_plus_sign():
    C = combiner_matrix()
    assert np.isclose(C[1, 0], 1 / sqrt(2)) and np.isclose(C[1, 1], 1 / sqrt(2))
    assert np.isclose(abs(C[0, 0]), 1 / sqrt(2)) and np.isclose(C[0, 0], -C[0, 1])


@given(st.integers(0, 2**32 - 1), st.integers(2, 3))
def test_fock_unitary_matches_permanents(seed, m):
    rng = np.random.default_rng(seed)
    M = random_unitary(rng, m)
    cut = 2
    U, valid = fock_unitary(M, [cut] * m)
    occs = list(itertools.product(range(cut + 1), repeat=m))
    for j, inp in enumerate(occs):
        if not valid[j]:
            continue
        for i, out in enumerate(occs):
            assert abs(U[i, j] - fock_amplitude(M, out, inp)) < 1e-10


@pytest.mark.parametrize("t", [0.0, 0.2, 0.5, 1.0])
def test_beamsplitter_fock_matrix_unitary(t):
    U, valid = fock_unitary(bs_matrix(t), [3, 3])
    assert is_unitary(U)
    assert is_unitary(U[np.ix_(valid, valid)])


def test_dft_multiport_is_unitary():
    for m in (2, 3, 4):
        assert is_unitary(dft_matrix(m))


def test_cutoff_overflow_raises():
    lay = RegisterLayout.of(Subsystem.mode("a", 1), Subsystem.mode("b", 1))
    with pytest.raises(CutoffError):
        apply_mode_matrix(QuantumState.basis(lay, (1, 1)), bs_matrix(0.5), ["a", "b"])


def test_phaseshift_on_fock_states():
    lay = RegisterLayout.of(Subsystem.mode("a", 2))
    s = QuantumState(lay, np.ones(3) / sqrt(3))
    out = phaseshift(s, "a", 0.4)
    assert np.allclose(out.data, np.exp(0.4j * np.arange(3)) / sqrt(3))


@given(st.floats(0, 1), st.integers(1, 5))
def test_loss_kraus_complete(eta, cutoff):
    K = loss_kraus(eta, cutoff)
    S = sum(k.conj().T @ k for k in K)
    assert np.allclose(S, np.eye(cutoff + 1), atol=1e-12)


def test_loss_binomial_photon_statistics():
    lay = RegisterLayout.of(Subsystem.mode("a", 3))
    out = apply_kraus(QuantumState.basis(lay, (3,)), loss_kraus(0.6, 3), ["a"])
    p = out.probabilities()
    expect = [0.4**3, 3 * 0.6 * 0.4**2, 3 * 0.6**2 * 0.4, 0.6**3]
    assert np.allclose(p, expect, atol=1e-12)


def test_element_validation():
    with pytest.raises(StateError):
        OpticalElement("beamsplitter", ("a", "a"))
    with pytest.raises(StateError):
        OpticalElement("beamsplitter", ("a", "b"), t=1.5)
    with pytest.raises(StateError):
        OpticalElement("mirror", ("a",))
