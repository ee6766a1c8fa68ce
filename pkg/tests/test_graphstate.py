from functools import reduce
from math import pi

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensembleqc.graphstate import (CLIFFORD_NAMES, GraphError, GraphRef, StabilizerTableau,
                                   apply_local, build_graph_state, chain_rotation_check,
                                   expected_attempts, geometric_attempts, gf2_nullspace, gf2_rank,
                                   graph_measurement, is_local_clifford_equivalent, measure_pauli,
                                   resource_overhead)
from ensembleqc.qstate import ImpossibleOutcomeError

PAULI = {"I": np.eye(2), "X": np.array([[0, 1], [1, 0]]), "Y": np.array([[0, -1j], [1j, 0]]),
         "Z": np.diag([1, -1])}


def kron_all(ops):
    return reduce(np.kron, ops, np.ones((1, 1)))


def op_on(n, q, P):
    return kron_all([P if i == q else np.eye(2) for i in range(n)])


def dense_graph_state(g: GraphRef) -> np.ndarray:
    """CZ on every edge of |+>^n, built directly on the amplitude vector."""
    n = len(g)
    idx = {v: i for i, v in enumerate(g.vertices)}
    bits = (np.arange(2**n)[:, None] >> (n - 1 - np.arange(n))) & 1
    sign = np.zeros(2**n, dtype=int)
    for e in g.edges:
        a, b = (idx[v] for v in e)
        sign ^= bits[:, a] & bits[:, b]
    return (-1.0) ** sign / 2 ** (n / 2)


def string_matrix(s: str) -> np.ndarray:
    sign = -1 if s[0] == "-" else 1
    return sign * kron_all([PAULI[c] for c in s[1:]])


def stabilised(t: StabilizerTableau, psi: np.ndarray, tol=1e-10) -> bool:
    return all(np.allclose(string_matrix(s) @ psi, psi, atol=tol) for s in t.strings())


def equal_up_to_phase(a, b, tol=1e-10):
    return abs(abs(np.vdot(a, b)) - 1) < tol


# --- construction -------------------------------------------------------------

def test_chain_stabilisers():
    t = build_graph_state(GraphRef.chain(3))
    assert t.strings() == ["+XZI", "+ZXZ", "+IZX"]
    assert t.is_valid()


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
@settings(max_examples=40)
def test_tableau_state_matches_dense_graph_state(seed, n):
    g = GraphRef.random(n, 0.5, np.random.default_rng(seed))
    t = build_graph_state(g)
    psi = dense_graph_state(g)
    assert stabilised(t, psi)
    assert equal_up_to_phase(t.to_state_vector(), psi)


def test_apply_cz_builds_graph_state():
    n = 4
    t = StabilizerTableau.from_strings(["+XIII", "+IXII", "+IIXI", "+IIIX"])
    g = GraphRef.of(range(n), [(0, 1), (1, 2), (2, 3), (0, 3)])
    for e in g.edges:
        t = t.apply_cz(*sorted(e))
    assert t.same_state(build_graph_state(g))


def test_from_state_vector_round_trip():
    g = GraphRef.star(4)
    t = StabilizerTableau.from_state_vector(dense_graph_state(g))
    assert t.same_state(build_graph_state(g))
    with pytest.raises(GraphError):
        StabilizerTableau.from_state_vector(np.array([1, 0.3, 0, 0]))


def test_as_graph_recovers_graph():
    g = GraphRef.random(6, 0.5, np.random.default_rng(3))
    h, exact = build_graph_state(g).as_graph()
    assert exact and h.same_as(g)


def test_gf2_helpers():
    M = np.array([[1, 1, 0], [0, 1, 1], [1, 0, 1]], dtype=np.uint8)
    assert gf2_rank(M) == 2
    N = gf2_nullspace(M)
    assert N.shape[0] == 1 and not ((M @ N[0]) % 2).any()


# --- measurement oracle ----------------------------------------------------------

def dense_measure(psi, n, q, basis, outcome):
    P = (np.eye(2**n) + outcome * op_on(n, q, PAULI[basis])) / 2
    v = P @ psi
    p = float(np.vdot(v, v).real)
    return (v / np.sqrt(p) if p > 1e-12 else None), p


def test_tableau_measurements_match_state_vector_500_graphs():
    rng = np.random.default_rng(1234)
    checked = 0
    for _ in range(500):
        n = int(rng.integers(1, 5))
        g = GraphRef.random(n, float(rng.random()), rng)
        t = build_graph_state(g)
        psi = dense_graph_state(g)
        for _ in range(int(rng.integers(1, n + 1))):
            q = int(rng.integers(n))
            basis = "XYZ"[int(rng.integers(3))]
            res = measure_pauli(t, q, basis, rng)
            psi2, p = dense_measure(psi, n, q, basis, res.outcome)
            assert abs(p - res.probability) < 1e-10
            assert psi2 is not None and stabilised(res.tableau, psi2)
            assert equal_up_to_phase(res.tableau.to_state_vector(), psi2)
            t, psi = res.tableau, psi2
            checked += 1
    assert checked >= 500


def test_deterministic_outcome_cannot_be_forced_wrong():
    t = StabilizerTableau.from_strings(["+Z"])
    assert measure_pauli(t, 0, "Z", outcome=1).probability == 1.0
    with pytest.raises(ImpossibleOutcomeError):
        measure_pauli(t, 0, "Z", outcome=-1)


def test_measurement_needs_rng_for_random_outcome():
    with pytest.raises(GraphError):
        measure_pauli(build_graph_state(GraphRef.chain(2)), 0, "Z")


# --- rewrite rules -------------------------------------------------------------

@pytest.mark.parametrize("basis", ["Z", "Y", "X"])
def test_rewrite_rules_against_tableau(basis):
    rng = np.random.default_rng({"Z": 1, "Y": 2, "X": 3}[basis])
    for _ in range(500 if basis == "Z" else 200):
        n = int(rng.integers(2, 9))
        g = GraphRef.random(n, float(rng.uniform(0.2, 0.8)), rng)
        v = int(rng.integers(n))
        if basis == "X" and not g.neighbours(v):
            continue
        outcome = int(rng.choice([1, -1]))
        t = measure_pauli(build_graph_state(g), v, basis, outcome=outcome, remove=True).tableau
        g2, byp = graph_measurement(g, v, basis, outcome)
        predicted = apply_local(build_graph_state(g2), byp)
        assert predicted.same_state(t)


def test_y_measurement_of_star_centre_gives_complete_graph():
    g2, byp = graph_measurement(GraphRef.star(5), 0, "Y", 1)
    assert g2.same_as(GraphRef.complete(5).without(0))
    assert set(byp) == {1, 2, 3, 4}


def test_z_measurement_outcome_minus_one_leaves_z_byproducts():
    g2, byp = graph_measurement(GraphRef.chain(3), 1, "Z", -1)
    assert not g2.edges and set(byp) == {0, 2}
    assert np.allclose(byp[0], PAULI["Z"])


# --- local-Clifford equivalence ----------------------------------------------------

def test_ghz_is_lc_equivalent_to_star():
    ghz = np.zeros(16)
    ghz[0] = ghz[-1] = 2**-0.5
    t = StabilizerTableau.from_state_vector(ghz)
    ok, wit = is_local_clifford_equivalent(t, build_graph_state(GraphRef.star(4)))
    assert ok
    assert wit.non_identity() == {1: "H", 2: "H", 3: "H"}


def test_star_and_chain_are_not_equivalent():
    ok, wit = is_local_clifford_equivalent(build_graph_state(GraphRef.star(4)),
                                           build_graph_state(GraphRef.chain(4)))
    assert not ok and wit is None


def test_complete_graph_is_equivalent_to_star():
    ok, _ = is_local_clifford_equivalent(build_graph_state(GraphRef.complete(5)),
                                         build_graph_state(GraphRef.star(5)))
    assert ok


@given(st.integers(0, 2**32 - 1), st.integers(2, 6))
@settings(max_examples=30)
def test_local_complement_orbit_with_dense_witness(seed, n):
    rng = np.random.default_rng(seed)
    g = GraphRef.random(n, 0.5, rng)
    h = g.local_complement(int(rng.integers(n)))
    ok, wit = is_local_clifford_equivalent(build_graph_state(g), build_graph_state(h))
    assert ok
    U = kron_all([wit.unitaries[v] for v in g.vertices])
    assert equal_up_to_phase(U @ dense_graph_state(g), dense_graph_state(h))


def test_lc_search_limits():
    with pytest.raises(GraphError):
        is_local_clifford_equivalent(build_graph_state(GraphRef.chain(9)),
                                     build_graph_state(GraphRef.chain(9)))
    assert len(CLIFFORD_NAMES) == 6


# --- one-qubit rotation on a 4-chain ---------------------------------------------

@pytest.mark.parametrize("adaptive", [False, True])
@pytest.mark.parametrize("m", [(0, 0, 0), (1, 0, 1), (0, 1, 1), (1, 1, 0)])
def test_chain_rotation(adaptive, m):
    r = chain_rotation_check(0.3, 1.1, -0.7, *m, adaptive=adaptive)
    assert r.fidelity == pytest.approx(1.0, abs=1e-12)
    assert r.probability == pytest.approx(1 / 8, abs=1e-12)


@given(st.floats(-pi, pi), st.floats(-pi, pi), st.floats(-pi, pi))
@settings(max_examples=25)
def test_chain_rotation_any_angles(a, b, c):
    assert chain_rotation_check(a, b, c, 1, 1, 1).fidelity == pytest.approx(1.0, abs=1e-10)


# --- resource accounting ------------------------------------------------------------

def test_expected_attempts():
    assert expected_attempts(1 / 8) == 8
    with pytest.raises(GraphError):
        expected_attempts(0)


def test_geometric_sampling_mean_and_threads():
    a = geometric_attempts(1 / 8, 100_000, seed=21)
    se = a.std(ddof=1) / np.sqrt(len(a))
    assert abs(a.mean() - 8) < 3 * se
    assert np.array_equal(a, geometric_attempts(1 / 8, 100_000, seed=21, threads=4))


def test_discard_strategy_matches_geometric_expectation():
    # one success finishes an 8-cluster; every failure costs the base and the block
    dis = resource_overhead("discard", 1 / 8, 8, trials=4000, seed=1)
    assert abs(dis.mean_attempts - 8) < 3 * dis.stderr_attempts
    assert abs(dis.mean_qubits - (4 + 4 * 8 + 4 * 7)) < 3 * dis.stderr_qubits


def test_recycling_always_reaches_target():
    rec = resource_overhead("recycle", 1 / 8, 8, trials=500, seed=1)
    assert rec.mean_attempts > 8  # shortened remnants need more than one success
    assert resource_overhead("recycle", 1.0, 12, trials=10).mean_attempts == 2
    with pytest.raises(GraphError):
        resource_overhead("hoard", 0.5, 8)
