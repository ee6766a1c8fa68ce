from math import sqrt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ensembleqc.detect import DetectorModel
from ensembleqc.graphstate import (GraphRef, StabilizerTableau, build_graph_state,
                                   is_local_clifford_equivalent)
from ensembleqc.protocols import (ProtocolError, ProtocolParams, blockade_entangle,
                                  blockade_target, dlcz_entangle, dlcz_swap, double_heralding_full,
                                  double_heralding_round, fuse_clusters, fusion_probability,
                                  ghz_generate, ghz_ket, ghz_network_probability,
                                  ghz_success_probability, psi_pair, rho_pm, single_click)


# --- DLCZ -----------------------------------------------------------------

@pytest.mark.parametrize("p_e", [0.001, 0.01, 0.1])
def test_dlcz_exact_probability_and_fidelity(p_e):
    # each ensemble emits with q = p_e/2; a single click needs exactly one photon
    run = dlcz_entangle(ProtocolParams(p_e=p_e))
    q = p_e / 2
    p_single = 2 * q * (1 - q)
    p_double = q * q  # both emit: bunching sends both photons to one detector
    assert run.success_probability == pytest.approx(p_single + p_double, abs=1e-12)
    assert run.success_probability == pytest.approx(p_e - p_e**2 / 4, abs=1e-12)
    assert run.min_fidelity() == pytest.approx((1 - q) / (1 - q / 2), abs=1e-12)


def test_dlcz_lowest_order_limit():
    run = dlcz_entangle(ProtocolParams(p_e=1e-4, eta_D=0.5))
    assert run.success_probability == pytest.approx(0.5e-4, rel=1e-3)
    assert run.closed_form == pytest.approx(0.5e-4)


def test_dlcz_higher_order_lowers_fidelity():
    lo = dlcz_entangle(ProtocolParams(p_e=0.01))
    hi = dlcz_entangle(ProtocolParams(p_e=0.01), higher_order=True)
    assert hi.min_fidelity() < lo.min_fidelity()


def test_dlcz_swap_ideal():
    run = dlcz_swap(psi_pair(("A", "C")), psi_pair(("B", "D")))
    assert run.success_probability == pytest.approx(0.5, abs=1e-12)
    assert run.min_fidelity() == pytest.approx(1.0, abs=1e-12)


def test_dlcz_swap_retrieval_loss_scales_success():
    run = dlcz_swap(psi_pair(("A", "C")), psi_pair(("B", "D")), retrieval=0.5)
    assert run.success_probability < 0.5


# --- double heralding -------------------------------------------------------

@pytest.mark.parametrize("eta", [1.0, 0.5, 0.3])
def test_double_heralding_round_gives_rho_pm(eta):
    heralds = double_heralding_round(eta)
    singles = [h for h in heralds.values() if single_click(h.herald)]
    assert len(singles) == 2
    for h in singles:
        sign = 1 if h.herald["D+"] else -1
        assert np.allclose(h.state.matrix(), rho_pm(eta, sign).matrix(), atol=1e-10)
        assert h.probability == pytest.approx(eta * (2 - eta) / 4, abs=1e-12)


@given(st.floats(0.05, 1.0))
@settings(max_examples=20)
def test_double_heralding_full_is_pure(eta):
    run = double_heralding_full(eta)
    assert run.success_probability == pytest.approx(eta**2 / 2, abs=1e-12)
    assert run.min_fidelity() == pytest.approx(1.0, abs=1e-12)


def test_double_heralding_threshold_detectors_degrade_round_one():
    heralds = double_heralding_round(0.5, detectors=DetectorModel(0.5))
    h = next(h for h in heralds.values() if single_click(h.herald))
    # a threshold click cannot reject |ss> two-photon events when η < 1
    assert h.fidelity_vs_target == pytest.approx(2 / (4 - 0.5), abs=1e-10)


def test_double_heralding_monte_carlo():
    run = double_heralding_full(0.5)
    tally = run.sample(100_000, seed=3)
    assert tally.estimate.within(0.125)


# --- blockade entangler -----------------------------------------------------

@pytest.mark.parametrize("variant", ["hom", "dual_rail"])
def test_blockade_entangler_ideal(variant):
    run = blockade_entangle(ProtocolParams(), variant)
    assert run.success_probability == pytest.approx(1.0, abs=1e-12)
    for key, h in run.heralds.items():
        assert h.fidelity_vs_target == pytest.approx(1.0, abs=1e-12)


def test_blockade_target_phase():
    t = blockade_target("hom", +1)
    assert np.isclose(t.amplitude(("r", "e")), 1 / sqrt(2))
    assert np.isclose(t.amplitude(("e", "r")), 1j / sqrt(2))


def test_blockade_entangler_lossy_rate():
    pp = ProtocolParams(eta_D=0.3, eta_S=0.9)
    run = blockade_entangle(pp)
    assert run.success_probability == pytest.approx(0.3 * 0.81, abs=1e-12)
    assert run.min_fidelity() == pytest.approx(1.0, abs=1e-12)
    assert run.sample(100_000, seed=8).estimate.within(0.243)


@pytest.mark.parametrize("eps", [0.01, 0.1, 0.3])
def test_blockade_entangler_absorption_error(eps):
    run = blockade_entangle(ProtocolParams(epsilon=eps))
    assert run.min_fidelity() == pytest.approx((1 - eps) / (1 - eps / 2), abs=1e-10)


def test_blockade_entangler_stored():
    run = blockade_entangle(ProtocolParams(), stored=True)
    assert run.min_fidelity() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("F", [1.0, 0.99, 0.9])
def test_polarisation_variant_inherits_source_fidelity(F):
    run = blockade_entangle(ProtocolParams(F_source=F), "polarisation")
    assert run.min_fidelity() == pytest.approx(F, abs=1e-10)


def test_blockade_entangler_rejects_unknown_variant():
    with pytest.raises(ProtocolError):
        blockade_entangle(ProtocolParams(), "bogus")


def test_params_validation():
    with pytest.raises(ProtocolError):
        ProtocolParams(eta_D=1.5)
    with pytest.raises(ProtocolError):
        ProtocolParams(Q=5)


# --- GHZ --------------------------------------------------------------------

@pytest.mark.parametrize("Q,eta_S", [(4, 1.0), (4, 0.8), (6, 1.0), (6, 0.8)])
def test_ghz_simulation_matches_closed_form(Q, eta_S):
    pp = ProtocolParams(Q=Q, eta_S=eta_S)
    run = ghz_generate(pp)
    assert run.success_probability == pytest.approx(ghz_success_probability(Q, pp.eta), abs=1e-12)
    assert run.min_fidelity() == pytest.approx(1.0, abs=1e-10)


def test_ghz_formula_and_network_differ_beyond_six():
    assert ghz_success_probability(4, 0.7) == pytest.approx(ghz_network_probability(4, 0.7))
    assert ghz_success_probability(6, 0.7) == pytest.approx(ghz_network_probability(6, 0.7))
    assert ghz_success_probability(8, 1.0) != pytest.approx(ghz_network_probability(8, 1.0))
    run = ghz_generate(ProtocolParams(Q=8))
    assert run.info["simulated"] is False


def test_ghz_rejects_absorption_error():
    with pytest.raises(ProtocolError):
        ghz_generate(ProtocolParams(epsilon=0.1))


def test_ghz4_is_lc_equivalent_to_star():
    run = ghz_generate(ProtocolParams(Q=4))
    psi = ghz_ket(run.outcome.state)
    tab = StabilizerTableau.from_state_vector(psi, labels=[0, 1, 2, 3])
    ok, wit = is_local_clifford_equivalent(tab, build_graph_state(GraphRef.star(4)))
    assert ok and wit is not None


# --- fusion -----------------------------------------------------------------

def test_fusion_probability():
    assert fusion_probability(1.0) == 1 / 8
    assert fusion_probability(0.5) == 1 / 16


def test_fusion_failure_leaves_two_three_qubit_remainders():
    a, b = GraphRef.chain(4), GraphRef.chain(4, start=10)
    res = fuse_clusters(a, b, 3, 10, eta_prime=0.0, rng=1)
    assert not res.success
    assert sorted(len(g) for g in res.graphs) == [3, 3]
    assert res.graphs[0].same_as(GraphRef.chain(3)) and res.graphs[1].same_as(GraphRef.chain(3, start=11))


def test_fusion_success_adds_edge():
    a, b = GraphRef.chain(4), GraphRef.chain(4, start=10)
    rng = np.random.default_rng(0)
    res = next(r for r in (fuse_clusters(a, b, 3, 10, 1.0, rng) for _ in range(500)) if r.success)
    (g,) = res.graphs
    assert frozenset((3, 10)) in g.edges and len(g) == 8


def test_fusion_validation():
    with pytest.raises(ProtocolError):
        fuse_clusters(GraphRef.chain(2), GraphRef.chain(2), 0, 1, 1.0, 0)
