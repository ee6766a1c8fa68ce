"""Photodetection: click POVMs with finite efficiency and dark counts.

All POVM elements are diagonal in the Fock basis, so conditioning reduces to
weighting photon-number branches and tracing the measured modes out.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, exp
from typing import Mapping, Sequence

import numpy as np

from .qstate import (ImpossibleOutcomeError, QuantumState, RegisterLayout, StateError,
                     fidelity, renormalize)

CLICK = "click"
NOCLICK = "noclick"


@dataclass(frozen=True)
class DetectorModel:
    """Single-mode detector: efficiency, dark-count rate (1/s) and window (s)."""

    efficiency: float = 1.0
    dark_rate: float = 0.0
    window: float = 0.0
    number_resolving: bool = False

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise ValueError("detector efficiency must lie in [0, 1]")
        if self.dark_rate < 0 or self.window < 0:
            raise ValueError("dark rate and window must be non-negative")

    @property
    def p_dark(self) -> float:
        return 1.0 - exp(-self.dark_rate * self.window)

    def outcomes(self, cutoff: int) -> list:
        if self.number_resolving:
            top = cutoff + (1 if self.p_dark > 0 else 0)
            return list(range(top + 1))
        return [NOCLICK, CLICK]

    def weights(self, cutoff: int) -> dict[object, np.ndarray]:
        """Diagonal POVM weights ``P(outcome | n photons)`` for n = 0..cutoff."""
        eta, pd = self.efficiency, self.p_dark
        n = np.arange(cutoff + 1)
        if not self.number_resolving:
            none = (1.0 - pd) * (1.0 - eta) ** n
            return {NOCLICK: none, CLICK: 1.0 - none}
        out = {}
        for k in self.outcomes(cutoff):
            w = np.zeros(cutoff + 1)
            for nn in n:
                det = [comb(nn, j) * eta**j * (1 - eta) ** (nn - j) if 0 <= j <= nn else 0.0
                       for j in (k, k - 1)]
                w[nn] = (1 - pd) * det[0] + (pd * det[1] if k >= 1 else 0.0)
            out[k] = w
        return out


def click_povm(d: DetectorModel, cutoff: int) -> dict[object, np.ndarray]:
    """POVM elements as (cutoff+1)² matrices keyed by outcome."""
    return {k: np.diag(w).astype(complex) for k, w in d.weights(cutoff).items()}


@dataclass
class HeraldedOutcome:
    state: QuantumState | None
    herald: dict
    probability: float
    fidelity_vs_target: float | None = None
    target: QuantumState | None = field(default=None, repr=False)

    def __post_init__(self):
        if not -1e-12 <= self.probability <= 1 + 1e-12:
            raise ValueError(f"probability {self.probability} outside [0, 1]")
        self.probability = float(min(max(self.probability, 0.0), 1.0))

    def with_target(self, target: QuantumState) -> "HeraldedOutcome":
        f = fidelity(self.state, target)
        return HeraldedOutcome(self.state, self.herald, self.probability, f, target)


def _models(assignments: Mapping[str, str], model) -> dict[str, DetectorModel]:
    if isinstance(model, DetectorModel):
        return {d: model for d in assignments}
    missing = set(assignments) - set(model)
    if missing:
        raise StateError(f"no detector model for {sorted(missing)}")
    return {d: model[d] for d in assignments}


def _split(state: QuantumState, modes: Sequence[str]):
    """Rearrange data so the measured modes are trailing axes."""
    lay = state.layout
    pos = lay.positions(modes)
    for l in modes:
        if lay[l].kind != "mode":
            raise StateError(f"detector assigned to non-photon subsystem {l!r}")
    keep = [i for i in range(len(lay)) if i not in pos]
    rest = RegisterLayout(tuple(lay.subsystems[i] for i in keep))
    mdims = [lay.dims[p] for p in pos]
    if state.is_pure:
        t = np.transpose(state.data.reshape(lay.dims), keep + pos)
        return rest, t.reshape([rest.total_dim] + mdims), mdims
    n = len(lay)
    t = state.data.reshape(lay.dims + lay.dims)
    t = np.transpose(t, keep + pos + [k + n for k in keep] + [p + n for p in pos])
    dm = int(np.prod(mdims))
    t = t.reshape(rest.total_dim, dm, rest.total_dim, dm)
    diag = np.einsum("anbn->nab", t).reshape(mdims + [rest.total_dim, rest.total_dim])
    return rest, diag, mdims


def _branch(rest, arr, pure: bool, weight: np.ndarray):
    if pure:
        M = arr.reshape(arr.shape[0], -1)
        w = weight.reshape(-1)
        rho = (M * w) @ M.conj().T
    else:
        rho = np.tensordot(weight, arr, axes=(list(range(weight.ndim)), list(range(weight.ndim))))
    prob = float(np.trace(rho).real)
    return prob, rho


def enumerate_outcomes(state: QuantumState, assignments: Mapping[str, str],
                       model: DetectorModel | Mapping[str, DetectorModel] = DetectorModel()
                       ) -> list[tuple[dict, float, QuantumState | None]]:
    """Every detector pattern with its probability and unnormalized post-state.

    ``assignments`` maps detector name to the photon mode it watches. The
    post-measurement state has the watched modes traced out.
    """
    dets = list(assignments)
    modes = [assignments[d] for d in dets]
    if len(set(modes)) != len(modes):
        raise StateError("two detectors watch the same mode")
    models = _models(assignments, model)
    rest, arr, mdims = _split(state, modes)
    per_det = [models[d].weights(m - 1) for d, m in zip(dets, mdims)]
    results = []
    for combo in itertools.product(*[list(w.items()) for w in per_det]):
        weight = np.ones(())
        for _, w in combo:
            weight = np.multiply.outer(weight, w)
        prob, rho = _branch(rest, arr, state.is_pure, weight)
        pattern = {d: k for d, (k, _) in zip(dets, combo)}
        post = QuantumState(rest, rho, normalized=False) if len(rest) else None
        results.append((pattern, max(prob, 0.0), post))
    return results


def condition(state: QuantumState, assignments: Mapping[str, str], pattern: Mapping[str, object],
              model: DetectorModel | Mapping[str, DetectorModel] = DetectorModel(),
              target: QuantumState | None = None) -> HeraldedOutcome:
    """Post-select on a detector pattern and return the normalized heralded state."""
    if set(pattern) != set(assignments):
        raise StateError("pattern must give an outcome for every assigned detector")
    dets = list(assignments)
    models = _models(assignments, model)
    modes = [assignments[d] for d in dets]
    rest, arr, mdims = _split(state, modes)
    weight = np.ones(())
    for d, m in zip(dets, mdims):
        w = models[d].weights(m - 1)
        if pattern[d] not in w:
            raise StateError(f"outcome {pattern[d]!r} not available for detector {d!r}")
        weight = np.multiply.outer(weight, w[pattern[d]])
    prob, rho = _branch(rest, arr, state.is_pure, weight)
    if prob < 1e-14:
        raise ImpossibleOutcomeError(f"pattern {dict(pattern)} has probability {prob:.3e}")
    post = None
    if len(rest):
        post, _ = renormalize(QuantumState(rest, rho, normalized=False))
    out = HeraldedOutcome(post, dict(pattern), prob)
    return out.with_target(target) if target is not None else out


def sample(state: QuantumState, assignments: Mapping[str, str], rng: np.random.Generator,
           model: DetectorModel | Mapping[str, DetectorModel] = DetectorModel()
           ) -> tuple[dict, HeraldedOutcome]:
    """Draw one detector pattern with its exact probability."""
    table = enumerate_outcomes(state, assignments, model)
    probs = np.array([p for _, p, _ in table])
    probs = probs / probs.sum()
    i = int(rng.choice(len(table), p=probs))
    pattern, p, post = table[i]
    if post is not None:
        post, _ = renormalize(post)
    return pattern, HeraldedOutcome(post, pattern, p)
