"""Heralded entangling protocols for atomic-ensemble qubits.

Every protocol enumerates its full herald table exactly (pattern, probability,
post-state). Monte Carlo estimates draw patterns from that table, so the
estimate and the exact model can be compared directly.

Detector names: ``D+`` and ``D-``. With the which-path combiner used by the
DLCZ and double-heralding schemes a photon on the second output heralds the
``+`` Bell state. For the blockade entangler ``D+`` sits on the first output of
the second beam splitter.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import sqrt
from typing import Callable, Mapping, Sequence

import numpy as np

from . import montecarlo as mc
from .detect import CLICK, DetectorModel, HeraldedOutcome, enumerate_outcomes
from .optics import apply_mode_matrix, bs_matrix, combiner_matrix, fock_unitary, loss_kraus
from .qstate import (QuantumState, RegisterLayout, Subsystem, apply_kraus, apply_operator,
                     apply_unitary, compose, compose_all, level_map, renormalize, reorder,
                     restrict_cutoff, trace_out)

DP, DM = "D+", "D-"


class ProtocolError(ValueError):
    pass


@dataclass(frozen=True)
class ProtocolParams:
    """Physical inputs shared by the protocols.

    ``eta_D`` detector efficiency, ``eta_S`` per-photon source efficiency,
    ``p_e`` DLCZ pair-excitation probability, ``Q`` GHZ size, ``epsilon``
    probability that a photon is not absorbed, ``F_source`` fidelity of the
    polarisation-entangled source, ``coincidence_leak`` probability that the
    two photons fail to bunch at the first beam splitter.
    """

    eta_D: float = 1.0
    eta_S: float = 1.0
    p_e: float = 0.01
    Q: int = 4
    epsilon: float = 0.0
    F_source: float = 1.0
    coincidence_leak: float = 0.0
    dark_rate: float = 0.0
    window: float = 0.0

    def __post_init__(self):
        for name in ("eta_D", "eta_S", "p_e", "epsilon", "F_source", "coincidence_leak"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ProtocolError(f"{name}={v!r} must lie in [0, 1]")
        if int(self.Q) != self.Q or self.Q < 4 or self.Q % 2:
            raise ProtocolError(f"Q={self.Q!r} must be an even integer >= 4")
        if self.dark_rate < 0 or self.window < 0:
            raise ProtocolError("dark_rate and window must be non-negative")

    @property
    def eta(self) -> float:
        """Combined efficiency η = η_D η_S²."""
        return self.eta_D * self.eta_S**2

    def detector(self, number_resolving: bool = False) -> DetectorModel:
        return DetectorModel(self.eta_D, self.dark_rate, self.window, number_resolving)


@dataclass
class MonteCarloTally:
    estimate: mc.BinomialEstimate
    tallies: dict[str, int]

    def as_dict(self) -> dict:
        return {**self.estimate.as_dict(), "tallies": dict(sorted(self.tallies.items()))}


@dataclass
class ProtocolRun:
    """Exact herald table of one protocol plus helpers for sampling it.

    ``table`` lists every outcome class as ``(key, probability, accepted)``;
    ``heralds`` holds the conditioned state of each accepted key.
    """

    name: str
    table: list[tuple[str, float, bool]]
    heralds: dict[str, HeraldedOutcome]
    closed_form: float | None = None
    info: dict = field(default_factory=dict)

    @property
    def success_probability(self) -> float:
        return float(sum(p for _, p, ok in self.table if ok))

    @property
    def total_probability(self) -> float:
        return float(sum(p for _, p, _ in self.table))

    @property
    def outcome(self) -> HeraldedOutcome | None:
        """Most likely accepted herald (first one on ties)."""
        if not self.heralds:
            return None
        return max(self.heralds.values(), key=lambda h: h.probability)

    def min_fidelity(self) -> float | None:
        fs = [h.fidelity_vs_target for h in self.heralds.values() if h.fidelity_vs_target is not None]
        return min(fs) if fs else None

    def mean_fidelity(self) -> float | None:
        ps = [(h.probability, h.fidelity_vs_target) for h in self.heralds.values()
              if h.fidelity_vs_target is not None]
        tot = sum(p for p, _ in ps)
        return sum(p * f for p, f in ps) / tot if tot > 0 else None

    def sample(self, trials: int, seed: int, threads: int = 1) -> MonteCarloTally:
        keys = [k for k, _, _ in self.table]
        probs = [p for _, p, _ in self.table]
        counts = mc.draw_counts(probs, trials, seed, threads)
        ok = sum(int(c) for c, (_, _, a) in zip(counts, self.table) if a)
        return MonteCarloTally(mc.BinomialEstimate(int(trials), ok),
                               {k: int(c) for k, c in zip(keys, counts) if c})


def pattern_key(pattern: Mapping[str, object]) -> str:
    return ",".join(f"{d}={pattern[d]}" for d in sorted(pattern))


def _fired(value) -> bool:
    return value == CLICK or (isinstance(value, (int, np.integer)) and value >= 1)


def single_click(pattern: Mapping[str, object]) -> bool:
    """Exactly one detector registers, and a resolving detector registers exactly one photon."""
    fired = [v for v in pattern.values() if _fired(v)]
    return len(fired) == 1 and (fired[0] == CLICK or fired[0] == 1)


# ---------------------------------------------------------------------------
# shared helpers

def _permutation(dims: Sequence[int], pairs: Sequence[tuple[tuple, tuple]]) -> np.ndarray:
    """Unitary on a product space swapping the listed pairs of basis states."""
    D = int(np.prod(dims))
    perm = np.arange(D)
    for a, b in pairs:
        i, j = np.ravel_multi_index(a, dims), np.ravel_multi_index(b, dims)
        perm[i], perm[j] = j, i
    u = np.zeros((D, D), dtype=complex)
    u[perm, np.arange(D)] = 1.0
    return u


def bell(layout: RegisterLayout, a: tuple, b: tuple, phase: complex = 1.0) -> QuantumState:
    """(|a> + phase |b>)/√2 on ``layout``."""
    return QuantumState.from_terms(layout, {a: 1 / sqrt(2), b: phase / sqrt(2)})


def _herald_table(state: QuantumState, assignments: Mapping[str, str], model,
                  accept: Callable[[dict], bool], target_for: Callable[[dict], QuantumState | None],
                  post: Callable[[QuantumState, dict], QuantumState] | None = None):
    table, heralds = [], {}
    for pattern, prob, st in enumerate_outcomes(state, assignments, model):
        key = pattern_key(pattern)
        ok = accept(pattern) and prob > 1e-14
        table.append((key, prob, ok))
        if ok:
            st, _ = renormalize(st)
            if post is not None:
                st = post(st, pattern)
            h = HeraldedOutcome(st, dict(pattern), prob)
            tgt = target_for(pattern)
            heralds[key] = h.with_target(tgt) if tgt is not None else h
    return table, heralds


# ---------------------------------------------------------------------------
# DLCZ

def dlcz_write(p: float, label: str = "A", mode: str = "a", higher_order: bool = False,
               cutoff: int | None = None) -> QuantumState:
    """Write pulse on one ensemble: √(1-p)|0,0> + √p|S,1>.

    With ``higher_order`` the double excitation |S2,2> enters with amplitude
    p and the state is renormalized.
    """
    if not 0.0 <= p <= 1.0:
        raise ProtocolError(f"excitation probability {p!r} outside [0, 1]")
    levels = ("0", "S", "S2") if higher_order else ("0", "S")
    lay = RegisterLayout.of(Subsystem.ensemble(label, levels), Subsystem.mode(mode, cutoff or len(levels) - 1))
    terms = {("0", 0): sqrt(1 - p), ("S", 1): sqrt(p)}
    if higher_order:
        terms[("S2", 2)] = p
    return QuantumState.from_terms(lay, terms, normalize=higher_order)


def dlcz_entangle(params: ProtocolParams = ProtocolParams(), higher_order: bool = False,
                  detectors: DetectorModel | None = None) -> ProtocolRun:
    """Two ensembles written with p_e/2 each, Stokes modes combined, single click.

    ``p_e`` is the probability that the pair emits a Stokes photon, which is
    also the lowest-order success probability. Heralds Ψ± = (|S0> ± |0S>)/√2.
    """
    q = params.p_e / 2
    det = detectors or params.detector()
    cut = 4 if higher_order else 2
    st = compose(dlcz_write(q, "A", "a", higher_order, cut), dlcz_write(q, "B", "b", higher_order, cut))
    st = apply_mode_matrix(st, combiner_matrix(), ["a", "b"])
    st = reorder(st, ["A", "B", "a", "b"])
    pair = RegisterLayout(st.layout.subsystems[:2])

    def target(pattern):
        return bell(pair, ("S", "0"), ("0", "S"), 1 if _fired(pattern[DP]) else -1)

    table, heralds = _herald_table(st, {DM: "a", DP: "b"}, det, single_click, target)
    return ProtocolRun("dlcz", table, heralds, closed_form=params.eta_D * params.p_e,
                       info={"per_ensemble_p": q, "higher_order": higher_order})


def dlcz_swap(pair_ac: QuantumState, pair_bd: QuantumState, retrieval: float = 1.0,
              detectors: DetectorModel | None = None) -> ProtocolRun:
    """Entanglement swapping between two DLCZ pairs.

    The first ensemble of each pair is read out (S -> 0 plus an anti-Stokes
    photon, kept with probability ``retrieval``), the two photons meet on the
    combiner, and a single click heralds a Bell pair between the two remaining
    ensembles. Detectors default to number-resolving with unit efficiency.
    """
    det = detectors or DetectorModel(number_resolving=True)
    if len(pair_ac.layout) != 2 or len(pair_bd.layout) != 2:
        raise ProtocolError("each pair must hold exactly two ensembles")
    a, c = pair_ac.layout.labels
    b, d = pair_bd.layout.labels
    if pair_ac.is_pure != pair_bd.is_pure:
        pair_ac, pair_bd = pair_ac.density(), pair_bd.density()
    st = compose(pair_ac, pair_bd)
    ma, mb = f"{a}_out", f"{b}_out"
    v = QuantumState.basis(RegisterLayout.of(Subsystem.mode(ma, 2), Subsystem.mode(mb, 2)), (0, 0))
    st = compose(st, v if st.is_pure else v.density())
    for ens, mode in ((a, ma), (b, mb)):
        sub = st.layout[ens]
        if "S" not in sub.levels or "0" not in sub.levels:
            raise ProtocolError(f"ensemble {ens!r} needs levels '0' and 'S'")
        dims = (sub.dim, 3)
        s, z = sub.level_index("S"), sub.level_index("0")
        st = apply_unitary(st, _permutation(dims, [((s, 0), (z, 1))]), [ens, mode])
        if retrieval < 1.0:
            st = apply_kraus(st, loss_kraus(retrieval, 2), [mode])
    st = apply_mode_matrix(st, combiner_matrix(), [ma, mb])
    st = trace_out(st, [a, b])
    out = RegisterLayout.of(st.layout[c], st.layout[d])

    def target(pattern):
        return bell(out, ("S", "0"), ("0", "S"), 1 if _fired(pattern[DP]) else -1)

    st = reorder(st, [c, d, ma, mb])
    table, heralds = _herald_table(st, {DM: ma, DP: mb}, det, single_click, target)
    return ProtocolRun("dlcz_swap", table, heralds, closed_form=None,
                       info={"retrieval": retrieval})


def psi_pair(labels=("A", "C"), sign: int = 1) -> QuantumState:
    """Ideal DLCZ pair (|S0> ± |0S>)/√2."""
    lay = RegisterLayout.of(*(Subsystem.ensemble(l, ("0", "S")) for l in labels))
    return bell(lay, ("S", "0"), ("0", "S"), sign)


# ---------------------------------------------------------------------------
# double heralding

def _emission(ensemble: Subsystem) -> np.ndarray:
    """|g,0> <-> |g,1> on (qubit, mode with cutoff 2); |s> never emits."""
    g = ensemble.level_index("g")
    return _permutation((ensemble.dim, 3), [((g, 0), (g, 1))])


def _dh_layout():
    return RegisterLayout.of(Subsystem.ensemble("L"), Subsystem.ensemble("R"),
                             Subsystem.mode("a", 2), Subsystem.mode("b", 2))


def _dh_target(sign: int) -> QuantumState:
    return bell(RegisterLayout.of(Subsystem.ensemble("L"), Subsystem.ensemble("R")),
                ("s", "g"), ("g", "s"), sign)


def dh_initial() -> QuantumState:
    q = QuantumState.single(Subsystem.ensemble("L"), {"g": 1 / sqrt(2), "s": 1 / sqrt(2)})
    r = QuantumState.single(Subsystem.ensemble("R"), {"g": 1 / sqrt(2), "s": 1 / sqrt(2)})
    return compose(q, r)


def _dh_emit(qubits: QuantumState) -> QuantumState:
    vac = QuantumState.basis(RegisterLayout.of(Subsystem.mode("a", 2), Subsystem.mode("b", 2)), (0, 0))
    st = compose(qubits, vac if qubits.is_pure else vac.density())
    sub = st.layout["L"]
    st = apply_unitary(st, _emission(sub), ["L", "a"])
    st = apply_unitary(st, _emission(sub), ["R", "b"])
    return apply_mode_matrix(st, combiner_matrix(), ["a", "b"])


def _sign(pattern) -> int:
    return 1 if _fired(pattern[DP]) else -1


def double_heralding_round(eta: float, state: QuantumState | None = None,
                           detectors: DetectorModel | None = None) -> dict[str, HeraldedOutcome]:
    """One emission-and-detection round on qubits L, R.

    Returns every herald pattern (keyed by :func:`pattern_key`) with its
    probability and conditioned qubit state. Detectors default to
    number-resolving with efficiency ``eta``.
    """
    if not 0 <= eta <= 1:
        raise ProtocolError("eta must lie in [0, 1]")
    det = detectors or DetectorModel(efficiency=eta, number_resolving=True)
    st = _dh_emit(state if state is not None else dh_initial())
    out = {}
    for pattern, prob, post in enumerate_outcomes(st, {DM: "a", DP: "b"}, det):
        if prob < 1e-14:
            out[pattern_key(pattern)] = HeraldedOutcome(None, dict(pattern), prob)
            continue
        rho, _ = renormalize(post)
        h = HeraldedOutcome(rho, dict(pattern), prob)
        if single_click(pattern):
            h = h.with_target(_dh_target(_sign(pattern)))
        out[pattern_key(pattern)] = h
    return out


def rho_pm(eta: float, sign: int = 1) -> QuantumState:
    """ρ^(±) = 1/(2-η)|Ψ±><Ψ±| + (1-η)/(2-η)|gg><gg|."""
    psi = _dh_target(sign)
    gg = QuantumState.basis(psi.layout, ("g", "g")).density()
    rho = psi.density().data / (2 - eta) + (1 - eta) / (2 - eta) * gg.data
    return QuantumState(psi.layout, rho)


def double_heralding_full(eta: float, detectors: DetectorModel | None = None) -> ProtocolRun:
    """Round, bit flip on both qubits, round. Success needs a single click twice.

    The final Bell state sign is the product of the two round signs.
    """
    det = detectors or DetectorModel(efficiency=eta, number_resolving=True)
    x = level_map(Subsystem.ensemble("L"), {"g": "s", "s": "g"})
    table, heralds = [], {}
    fail = 0.0
    for k1, h1 in double_heralding_round(eta, detectors=det).items():
        if not single_click(h1.herald):
            fail += h1.probability
            continue
        flipped = apply_unitary(apply_unitary(h1.state, x, ["L"]), x, ["R"])
        for k2, h2 in double_heralding_round(eta, flipped, det).items():
            p = h1.probability * h2.probability
            key = f"{k1}|{k2}"
            if not single_click(h2.herald) or p < 1e-14:
                fail += p
                continue
            sign = _sign(h1.herald) * _sign(h2.herald)
            h = HeraldedOutcome(h2.state, {"round1": h1.herald, "round2": h2.herald}, p)
            heralds[key] = h.with_target(_dh_target(sign))
            table.append((key, p, True))
    table.append(("fail", fail, False))
    return ProtocolRun("double_heralding", table, heralds, closed_form=eta**2 / 2)


# ---------------------------------------------------------------------------
# dipole-blockade entangler

BLOCKADE_LEVELS = ("g", "s", "e", "r")


def absorption_kraus(ensemble: Subsystem, cutoff: int, epsilon: float,
                     ground: str = "e", excited: str = "r") -> list[np.ndarray]:
    """One-photon absorption by a blockaded ensemble on (ensemble, mode).

    |ground, n> -> |excited, n-1> for n >= 1 with probability 1-ε; the
    photons pass untouched with probability ε. The blockade forbids a second
    absorption, so at most one photon is taken from the mode.
    """
    d = ensemble.dim
    dims = (d, cutoff + 1)
    gi, xi = ensemble.level_index(ground), ensemble.level_index(excited)
    pairs = [((gi, n), (xi, n - 1)) for n in range(1, cutoff + 1)]
    swap = _permutation(dims, pairs)
    proj = np.zeros(swap.shape)
    for a, b in pairs:
        for idx in (a, b):
            k = np.ravel_multi_index(idx, dims)
            proj[k, k] = 1.0
    rest = np.eye(swap.shape[0]) - proj
    K0 = sqrt(1 - epsilon) * swap @ proj + rest
    K1 = sqrt(epsilon) * proj
    return [K0.astype(complex), K1.astype(complex)]


def _lose(st: QuantumState, modes, eta_S: float) -> QuantumState:
    if eta_S >= 1.0:
        return st
    for m in modes:
        st = apply_kraus(st, loss_kraus(eta_S, st.layout[m].cutoff), [m])
    return st


def _leaky_bs(st: QuantumState, a: str, b: str, leak: float) -> QuantumState:
    out = apply_mode_matrix(st, bs_matrix(0.5), [a, b])
    if leak <= 0:
        return out
    mix = (1 - leak) * out.matrix() + leak * st.matrix()
    return QuantumState(st.layout, mix)


def blockade_target(variant: str = "hom", sign: int = 1, stored: bool = False) -> QuantumState:
    """(|re> ± i|er>)/√2, or its stored form (|sg> ± i|gs>)/√2.

    The polarisation variant heralds (|eg> ± i|ge>)/√2 before storage.
    """
    lay = RegisterLayout.of(Subsystem.ensemble("L", BLOCKADE_LEVELS),
                            Subsystem.ensemble("R", BLOCKADE_LEVELS))
    if variant == "polarisation":
        a, b = ("e", "g"), ("g", "e")
    else:
        a, b = ("r", "e"), ("e", "r")
    if stored:
        conv = {"r": "s", "e": "g", "g": "g"}
        if variant == "polarisation":
            conv = {"e": "s", "g": "g"}
        a, b = tuple(conv[x] for x in a), tuple(conv[x] for x in b)
    return bell(lay, a, b, 1j * sign)


def _storage(variant: str) -> np.ndarray:
    sub = Subsystem.ensemble("L", BLOCKADE_LEVELS)
    if variant == "polarisation":
        return level_map(sub, {"e": "s", "s": "e"})
    return level_map(sub, {"e": "g", "r": "s", "g": "e", "s": "r"})


def _blockade_hom_state(params: ProtocolParams, variant: str) -> QuantumState:
    lay = RegisterLayout.of(Subsystem.ensemble("L", BLOCKADE_LEVELS),
                            Subsystem.ensemble("R", BLOCKADE_LEVELS),
                            Subsystem.mode("a", 2), Subsystem.mode("b", 2))
    if variant == "hom":
        st = QuantumState.basis(lay, ("e", "e", 1, 1))
        st = _lose(st, ["a", "b"], params.eta_S)
        st = _leaky_bs(st, "a", "b", params.coincidence_leak)
    else:
        st = QuantumState.from_terms(lay, {("e", "e", 2, 0): 1 / sqrt(2), ("e", "e", 0, 2): 1 / sqrt(2)})
        st = _lose(st, ["a", "b"], params.eta_S)
    sub = lay["L"]
    st = apply_kraus(st, absorption_kraus(sub, 2, params.epsilon), ["L", "a"])
    st = apply_kraus(st, absorption_kraus(sub, 2, params.epsilon), ["R", "b"])
    return apply_mode_matrix(st, bs_matrix(0.5), ["a", "b"])


def _blockade_polarisation_state(params: ProtocolParams) -> QuantumState:
    ens = [Subsystem.ensemble(l, BLOCKADE_LEVELS) for l in ("L", "R")]
    modes = [Subsystem.mode(m, 1) for m in ("HA", "VA", "HB", "VB")]
    lay = RegisterLayout.of(*ens, *modes)
    F = params.F_source

    def src(sign):
        return QuantumState.from_terms(lay, {("g", "g", 1, 0, 0, 1): 1 / sqrt(2),
                                             ("g", "g", 0, 1, 1, 0): sign / sqrt(2)})

    rho = F * src(1).matrix() + (1 - F) * src(-1).matrix()
    st = QuantumState(lay, rho)
    st = _lose(st, ["HA", "VA", "HB", "VB"], params.eta_S)
    st = apply_kraus(st, absorption_kraus(ens[0], 1, params.epsilon, "g", "e"), ["L", "HA"])
    st = apply_kraus(st, absorption_kraus(ens[1], 1, params.epsilon, "g", "e"), ["R", "HB"])
    st = apply_mode_matrix(st, bs_matrix(0.5), ["VB", "VA"])
    return trace_out(st, ["HA", "HB"])


def blockade_entangle(params: ProtocolParams = ProtocolParams(), variant: str = "hom",
                      stored: bool = False, detectors: DetectorModel | None = None) -> ProtocolRun:
    """Dipole-blockade entangler.

    ``hom``: ensembles in |e>, photons |11> bunch on a first beam splitter,
    each ensemble absorbs at most one photon, the leftover photon is erased on
    a second beam splitter and a single click heralds (|re> ± i|er>)/√2.
    ``dual_rail``: the arms start directly in (|20> + |02>)/√2.
    ``polarisation``: ensembles in |g> absorb the H photons of a
    (|HV> + |VH>)/√2 source and the V photons herald.
    ``stored=True`` applies the storage map (e->g, r->s, or e->s for the
    polarisation variant).
    """
    if variant not in ("hom", "dual_rail", "polarisation"):
        raise ProtocolError(f"unknown variant {variant!r}")
    det = detectors or params.detector()
    if variant == "polarisation":
        st = _blockade_polarisation_state(params)
        assign = {DP: "VB", DM: "VA"}
    else:
        st = _blockade_hom_state(params, variant)
        assign = {DP: "a", DM: "b"}

    def post(s, _pattern):
        if not stored:
            return s
        u = _storage(variant)
        return apply_unitary(apply_unitary(s, u, ["L"]), u, ["R"])

    def target(pattern):
        return blockade_target(variant, _sign(pattern), stored)

    table, heralds = _herald_table(st, assign, det, single_click, target, post)
    closed = params.eta * (1 - params.coincidence_leak) if variant == "hom" else params.eta
    return ProtocolRun(f"blockade_entangle/{variant}", table, heralds, closed_form=closed,
                       info={"eta": params.eta})


# ---------------------------------------------------------------------------
# GHZ states

GHZ_MAX_SIM_Q = 6


def ghz_success_probability(Q: int, eta: float) -> float:
    """η^{Q/2} (Q-2) / 2^{Q-2}."""
    if Q < 4 or Q % 2:
        raise ProtocolError("Q must be an even integer >= 4")
    return eta ** (Q // 2) * (Q - 2) / 2 ** (Q - 2)


def ghz_network_probability(Q: int, eta: float) -> float:
    """Success probability of the cyclic port network, 2 η^{Q/2} / 2^{Q/2}."""
    if Q < 4 or Q % 2:
        raise ProtocolError("Q must be an even integer >= 4")
    m = Q // 2
    return 2 * eta**m / 2**m


def _ghz_pair_branches(k: int, eta_S: float):
    """Pure branches (weight, ket) of pair ``k`` after HOM and absorption.

    Ensembles X_k, Y_k carry levels (e, r); leftover photons sit in a_k, b_k.
    """
    X, Y = Subsystem.ensemble(f"X{k}", ("e", "r")), Subsystem.ensemble(f"Y{k}", ("e", "r"))
    a, b = Subsystem.mode(f"a{k}", 2), Subsystem.mode(f"b{k}", 2)
    lay = RegisterLayout.of(X, Y, a, b)
    absorb = [absorption_kraus(X, 2, 0.0)[0], absorption_kraus(Y, 2, 0.0)[0]]
    out = []
    for keep in itertools.product((1, 0), repeat=2):
        w = np.prod([eta_S if k_ else 1 - eta_S for k_ in keep])
        if w <= 0:
            continue
        st = QuantumState.basis(lay, ("e", "e") + keep)
        st = apply_mode_matrix(st, bs_matrix(0.5), [a.label, b.label])
        st = apply_operator(st, absorb[0], [X.label, a.label], normalized=True)
        st = apply_operator(st, absorb[1], [Y.label, b.label], normalized=True)
        st = restrict_cutoff(restrict_cutoff(st, a.label, 1), b.label, 1)
        out.append((float(w), st))
    return out


def ghz_corrections(state: QuantumState) -> tuple[QuantumState, list[str]]:
    """Local corrections taking a two-term heralded state to (|0..0> + |1..1>)/√2.

    X flips map the support onto {0..0, 1..1}; a phase from {I, S, Z, S†} on
    the first qubit removes the relative phase. Encoding: e = 0, r = 1.
    Mixed states are corrected according to their dominant eigenvector.
    """
    lay = state.layout
    ket = state if state.is_pure else QuantumState(lay, np.linalg.eigh(state.data)[1][:, -1])
    supp = sorted(ket.support(1e-9))
    if len(supp) != 2:
        raise ProtocolError("heralded state is not a two-term superposition")
    flips = [f"X{lab}" for lab, lvl in zip(lay.labels, supp[0]) if lvl == "r"]
    target = ghz_target(lay)
    best = None
    for ph in ("I", "S", "Z", "Sdg"):
        ops = flips + ([] if ph == "I" else [f"{ph}{lay.labels[0]}"])
        u = _correction_unitary(lay, ops)
        f = abs(np.vdot(target.data, u @ ket.data)) ** 2
        if best is None or f > best[0] + 1e-12:
            best = (f, ops, u)
    _, ops, u = best
    fixed = (QuantumState(lay, u @ state.data) if state.is_pure
             else QuantumState(lay, u @ state.data @ u.conj().T))
    return fixed, ops


def ghz_target(layout: RegisterLayout) -> QuantumState:
    n = len(layout)
    return QuantumState.from_terms(layout, {("e",) * n: 1 / sqrt(2), ("r",) * n: 1 / sqrt(2)})


def ghz_generate(params: ProtocolParams = ProtocolParams()) -> ProtocolRun:
    """Q/2 HOM pairs feeding Q ensembles; port k joins a_k with b_{k+1 mod Q/2}.

    Each port has a which-path combiner and two threshold detectors; exactly
    one click per port heralds a GHZ state up to local Pauli and phase
    corrections, which are applied to the reported state. For Q above
    ``GHZ_MAX_SIM_Q`` only the network probability is returned.
    """
    Q, m = params.Q, params.Q // 2
    closed = ghz_success_probability(Q, params.eta)
    if params.epsilon > 0:
        raise ProtocolError("GHZ generation is modelled with perfect absorption (epsilon=0)")
    if Q > GHZ_MAX_SIM_Q:
        p = ghz_network_probability(Q, params.eta)
        return ProtocolRun("ghz", [("accept", p, True), ("fail", 1 - p, False)], {},
                           closed_form=closed, info={"simulated": False})
    det = params.detector()
    ports = [(f"a{k}", f"b{(k + 1) % m}") for k in range(m)]
    order = [f"X{k}" for k in range(m)] + [f"Y{k}" for k in range(m)]
    qubits = RegisterLayout(tuple(Subsystem.ensemble(l, ("e", "r")) for l in order))
    acc: dict[tuple, np.ndarray] = {}
    for combo in itertools.product(*[_ghz_pair_branches(k, params.eta_S) for k in range(m)]):
        w = float(np.prod([c[0] for c in combo]))
        st = reorder(compose_all([c[1] for c in combo]),
                     order + [x for pair in ports for x in pair])
        psi = st.data.reshape((2,) * (len(order) + 2 * m)) * sqrt(w)
        _ghz_ports(psi, det, len(order), (), acc)
    table, heralds = [], {}
    for pat, rho in sorted(acc.items()):
        pattern = {}
        for k, (om, op) in enumerate(pat):
            pattern[f"D{k}-"], pattern[f"D{k}+"] = om, op
        key = pattern_key(pattern)
        st, p = renormalize(QuantumState(qubits, rho, normalized=False))
        purity = float(np.real(np.trace(st.data @ st.data)))
        fixed, ops = ghz_corrections(st)
        h = HeraldedOutcome(fixed, {**pattern, "corrections": ops, "purity": purity}, p)
        heralds[key] = h.with_target(ghz_target(qubits))
        table.append((key, p, True))
    ok = sum(p for _, p, _ in table)
    table.append(("fail", max(1.0 - ok, 0.0), False))
    return ProtocolRun("ghz", table, heralds, closed_form=closed,
                       info={"simulated": True, "network_probability": ghz_network_probability(Q, params.eta)})


_PORT_U = None


def _port_unitary() -> np.ndarray:
    global _PORT_U
    if _PORT_U is None:
        _PORT_U = fock_unitary(combiner_matrix(), [2, 2])[0].reshape(3, 3, 3, 3)
    return _PORT_U


def _ghz_ports(psi: np.ndarray, det: DetectorModel, nq: int, pat: tuple, acc: dict):
    """Measure the ports one at a time on an unnormalized ket.

    ``psi`` has ``nq`` qubit axes followed by the unmeasured port modes in
    pairs (cutoff 1). The pair is widened to cutoff 2, combined, resolved
    into photon numbers and weighted by the click POVM; only patterns with
    exactly one click at the port are kept.
    """
    if psi.ndim == nq:
        v = psi.reshape(-1)
        rho = np.outer(v, v.conj())
        acc[pat] = acc[pat] + rho if pat in acc else rho
        return
    wide = np.zeros(psi.shape[:nq] + (3, 3) + psi.shape[nq + 2:], dtype=complex)
    wide[(slice(None),) * nq + (slice(0, 2), slice(0, 2))] = psi
    out = np.tensordot(_port_unitary(), wide, axes=([2, 3], [nq, nq + 1]))
    out = np.moveaxis(out, [0, 1], [nq, nq + 1])
    weights = det.weights(2)
    for n1, n2 in itertools.product(range(3), repeat=2):
        sub = out[(slice(None),) * nq + (n1, n2)]
        if not np.any(np.abs(sub) > 1e-15):
            continue
        for o1, o2 in itertools.product(weights, repeat=2):
            if _fired(o1) + _fired(o2) != 1:
                continue
            w = weights[o1][n1] * weights[o2][n2]
            if w > 0:
                _ghz_ports(sub * sqrt(w), det, nq, pat + ((o1, o2),), acc)


def _correction_unitary(layout: RegisterLayout, ops: Sequence[str]) -> np.ndarray:
    single = {"X": np.array([[0, 1], [1, 0]]), "S": np.diag([1, 1j]), "Z": np.diag([1, -1]),
              "Sdg": np.diag([1, -1j])}
    u = np.eye(layout.total_dim, dtype=complex)
    for op in ops:
        name = "Sdg" if op.startswith("Sdg") else op[0]
        lab = op[len(name):]
        mats = [single[name] if l == lab else np.eye(2) for l in layout.labels]
        full = mats[0]
        for mm in mats[1:]:
            full = np.kron(full, mm)
        u = full @ u
    return u


def ghz_ket(state: QuantumState) -> np.ndarray:
    """Qubit amplitude vector (e = 0, r = 1) of a pure heralded GHZ state."""
    if state.is_pure:
        return np.asarray(state.data)
    w, v = np.linalg.eigh(state.matrix())
    return v[:, -1]


# ---------------------------------------------------------------------------
# cluster fusion

FUSION_BASE = 1 / 8


def fusion_probability(eta_prime: float) -> float:
    return eta_prime * FUSION_BASE


@dataclass
class FusionResult:
    success: bool
    probability: float
    graphs: tuple
    byproducts: dict = field(default_factory=dict)


def fuse_clusters(a, b, qubit_a, qubit_b, eta_prime: float, rng) -> FusionResult:
    """Link two graph states through one qubit each.

    Success (probability η'/8) adds the edge (qubit_a, qubit_b) to the union
    graph. Failure measures both link qubits in Z and returns the two
    remainders with their Z byproducts.
    """
    from .graphstate import GraphRef, z_measure_graph

    if not isinstance(a, GraphRef) or not isinstance(b, GraphRef):
        raise ProtocolError("fuse_clusters expects GraphRef inputs")
    if qubit_a not in a.vertices or qubit_b not in b.vertices:
        raise ProtocolError("link qubit not in its graph")
    if set(a.vertices) & set(b.vertices):
        raise ProtocolError("graphs must have disjoint vertex labels")
    if not 0 <= eta_prime <= 1:
        raise ProtocolError("eta_prime must lie in [0, 1]")
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    p = fusion_probability(eta_prime)
    if rng.random() < p:
        merged = a.union(b).with_edge(qubit_a, qubit_b)
        return FusionResult(True, p, (merged,))
    ra, ba = z_measure_graph(a, qubit_a, rng)
    rb, bb = z_measure_graph(b, qubit_b, rng)
    return FusionResult(False, p, (ra, rb), {**ba, **bb})
