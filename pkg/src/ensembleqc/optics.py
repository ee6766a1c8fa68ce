"""Linear-optical elements acting on photon modes of a :class:`QuantumState`.

Beam splitter convention: a† -> √t a† + i√(1-t) b†, b† -> i√(1-t) a† + √t b†.
Multiphoton action is built directly from the single-photon mode matrix by
expanding products of creation operators on the truncated Fock space.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import factorial, sqrt
from typing import Sequence

import numpy as np

from .qstate import CutoffError, QuantumState, StateError, apply_operator


@dataclass(frozen=True)
class OpticalElement:
    kind: str  # "beamsplitter" | "phaseshift" | "multiport" | "combiner"
    modes: tuple[str, ...]
    t: float = 0.5
    phi: float = 0.0

    def __post_init__(self):
        if self.kind not in ("beamsplitter", "phaseshift", "multiport", "combiner"):
            raise StateError(f"unknown optical element {self.kind!r}")
        if len(set(self.modes)) != len(self.modes):
            raise StateError("optical element uses a mode twice")
        if self.kind in ("beamsplitter", "combiner") and len(self.modes) != 2:
            raise StateError(f"{self.kind} needs exactly two modes")
        if self.kind == "phaseshift" and len(self.modes) != 1:
            raise StateError("phase shifter acts on one mode")
        if self.kind == "multiport" and len(self.modes) < 2:
            raise StateError("multiport needs at least two modes")
        if self.kind == "beamsplitter" and not 0.0 <= self.t <= 1.0:
            raise StateError("transmissivity must lie in [0, 1]")

    def mode_matrix(self) -> np.ndarray:
        """Single-photon transfer matrix M (column j = image of mode j)."""
        if self.kind == "beamsplitter":
            return bs_matrix(self.t)
        if self.kind == "combiner":
            return combiner_matrix()
        if self.kind == "phaseshift":
            return np.array([[np.exp(1j * self.phi)]])
        return dft_matrix(len(self.modes))

    def apply(self, state: QuantumState) -> QuantumState:
        if self.kind == "phaseshift":
            return phaseshift(state, self.modes[0], self.phi)
        return apply_mode_matrix(state, self.mode_matrix(), self.modes)


def bs_matrix(t: float) -> np.ndarray:
    c, s = sqrt(t), sqrt(1.0 - t)
    return np.array([[c, 1j * s], [1j * s, c]], dtype=complex)


def combiner_matrix() -> np.ndarray:
    """Balanced beam splitter preceded by a -π/2 phase on the first input.

    Acts as a real Hadamard on single photons up to output phases, so a photon
    from either input lands on the second output with amplitude +1/√2.
    """
    return bs_matrix(0.5) @ np.diag([np.exp(-0.5j * np.pi), 1.0])


def dft_matrix(m: int) -> np.ndarray:
    j, k = np.meshgrid(np.arange(m), np.arange(m))
    return np.exp(2j * np.pi * j * k / m) / np.sqrt(m)


def _occupations(m: int, cutoff: int):
    return list(itertools.product(range(cutoff + 1), repeat=m))


def fock_unitary(mode_matrix: np.ndarray, cutoffs: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Fock-space matrix of a passive linear-optical transformation.

    Returns ``(U, valid)`` where ``valid`` flags input basis states whose total
    photon number fits every mode's cutoff. Invalid columns are set to the
    identity so that ``U`` stays unitary; callers must check the input has no
    weight on them.
    """
    M = np.asarray(mode_matrix, dtype=complex)
    m = M.shape[0]
    dims = [c + 1 for c in cutoffs]
    D = int(np.prod(dims))
    U = np.zeros((D, D), dtype=complex)
    valid = np.zeros(D, dtype=bool)
    cap = min(cutoffs)
    for col, occ in enumerate(itertools.product(*[range(d) for d in dims])):
        if sum(occ) > cap:
            U[col, col] = 1.0
            continue
        valid[col] = True
        # expand prod_j (sum_k M[k, j] a_k†)^{n_j} / sqrt(n_j!) acting on vacuum
        poly = {tuple([0] * m): 1.0 + 0j}
        for j, n in enumerate(occ):
            for _ in range(n):
                nxt: dict[tuple, complex] = {}
                for key, amp in poly.items():
                    for k in range(m):
                        if M[k, j] == 0:
                            continue
                        kk = list(key)
                        kk[k] += 1
                        kk = tuple(kk)
                        nxt[kk] = nxt.get(kk, 0) + amp * M[k, j]
                poly = nxt
            poly = {k: v / sqrt(factorial(n)) for k, v in poly.items()}
        for key, amp in poly.items():
            if abs(amp) < 1e-15:
                continue
            norm = sqrt(np.prod([factorial(x) for x in key]))
            row = int(np.ravel_multi_index(key, dims))
            U[row, col] += amp * norm
    return U, valid


def _check_photon_modes(state: QuantumState, modes: Sequence[str]):
    if len(set(modes)) != len(modes):
        raise StateError("the same mode appears twice")
    for l in modes:
        if state.layout[l].kind != "mode":
            raise StateError(f"{l!r} is not a photon mode")


def apply_mode_matrix(state: QuantumState, M: np.ndarray, modes: Sequence[str]) -> QuantumState:
    modes = list(modes)
    _check_photon_modes(state, modes)
    cutoffs = [state.layout[l].cutoff for l in modes]
    U, valid = fock_unitary(M, cutoffs)
    if not valid.all():
        # weight on basis states whose photons could overflow a mode
        pos = state.layout.positions(modes)
        p = state.probabilities().reshape(state.dims)
        other = tuple(i for i in range(len(state.dims)) if i not in pos)
        marg = p.sum(axis=other) if other else p
        ordered = sorted(pos)
        marg = np.transpose(marg, [ordered.index(q) for q in pos]).reshape(-1)
        if marg[~valid].sum() > 1e-14:
            raise CutoffError(f"input photon number exceeds the Fock cutoff of modes {modes}")
    return apply_operator(state, U, modes, normalized=state.normalized)


def beamsplitter(state: QuantumState, mode_a: str, mode_b: str, t: float = 0.5) -> QuantumState:
    """Beam splitter of transmissivity ``t`` between two photon modes."""
    return OpticalElement("beamsplitter", (mode_a, mode_b), t=t).apply(state)


def combiner(state: QuantumState, mode_a: str, mode_b: str) -> QuantumState:
    """Which-path eraser: balanced splitter with a -π/2 phase on ``mode_a``."""
    return OpticalElement("combiner", (mode_a, mode_b)).apply(state)


def phaseshift(state: QuantumState, mode: str, phi: float) -> QuantumState:
    _check_photon_modes(state, [mode])
    d = state.layout[mode].dim
    u = np.diag(np.exp(1j * phi * np.arange(d)))
    return apply_operator(state, u, [mode], normalized=state.normalized)


def balanced_multiport(state: QuantumState, modes: Sequence[str]) -> QuantumState:
    """m-mode discrete-Fourier multiport on creation operators."""
    return OpticalElement("multiport", tuple(modes)).apply(state)


def interfere_network(state: QuantumState, elements: Sequence[OpticalElement]) -> QuantumState:
    for el in elements:
        state = el.apply(state)
    return state


def loss_kraus(transmission: float, cutoff: int) -> list[np.ndarray]:
    """Kraus operators of a pure-loss channel on one mode.

    Each photon survives independently with probability ``transmission``.
    """
    if not 0.0 <= transmission <= 1.0:
        raise StateError("transmission must lie in [0, 1]")
    d = cutoff + 1
    ops = []
    for k in range(d):
        K = np.zeros((d, d), dtype=complex)
        for n in range(k, d):
            K[n - k, n] = sqrt(_comb(n, k) * transmission ** (n - k) * (1 - transmission) ** k)
        ops.append(K)
    return ops


def _comb(n, k):
    return factorial(n) // (factorial(k) * factorial(n - k))
