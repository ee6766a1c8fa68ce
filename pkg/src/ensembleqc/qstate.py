"""Dense state engine for registers of ensemble qudits and photon modes.

Joint basis indices are mixed-radix, big-endian in declaration order: the first
declared subsystem is the most significant digit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_DIM = 2**14
NORM_TOL = 1e-12
UNITARY_TOL = 1e-10


class StateError(ValueError):
    """Invalid state construction or operation."""


class RepresentationError(StateError):
    """Pure/mixed mismatch."""


class ImpossibleOutcomeError(StateError):
    """Conditioning on an outcome of (numerically) zero probability."""


class CutoffError(StateError):
    """Operation would populate a Fock level above the mode cutoff."""


@dataclass(frozen=True)
class Subsystem:
    label: str
    kind: str  # "ensemble" | "mode"
    levels: tuple[str, ...]

    def __post_init__(self):
        if self.kind not in ("ensemble", "mode"):
            raise StateError(f"unknown subsystem kind {self.kind!r}")
        if len(self.levels) < 2:
            raise StateError(f"subsystem {self.label!r} needs dimension >= 2")
        if len(set(self.levels)) != len(self.levels):
            raise StateError(f"duplicate level names in {self.label!r}")

    @classmethod
    def ensemble(cls, label: str, levels: Sequence[str] = ("g", "s")) -> "Subsystem":
        return cls(label, "ensemble", tuple(levels))

    @classmethod
    def mode(cls, label: str, cutoff: int = 2) -> "Subsystem":
        if cutoff < 1:
            raise StateError("Fock cutoff must be >= 1")
        return cls(label, "mode", tuple(str(n) for n in range(cutoff + 1)))

    @property
    def dim(self) -> int:
        return len(self.levels)

    @property
    def cutoff(self) -> int:
        if self.kind != "mode":
            raise StateError(f"{self.label!r} is not a photon mode")
        return self.dim - 1

    def level_index(self, level) -> int:
        key = str(level)
        try:
            return self.levels.index(key)
        except ValueError:
            if self.kind == "mode" and key.isdigit():
                raise CutoffError(
                    f"photon number {key} exceeds cutoff {self.cutoff} of mode {self.label!r}"
                ) from None
            raise StateError(f"level {level!r} not in {self.label!r}: {self.levels}") from None


@dataclass(frozen=True)
class RegisterLayout:
    subsystems: tuple[Subsystem, ...]

    def __post_init__(self):
        labels = [s.label for s in self.subsystems]
        if len(set(labels)) != len(labels):
            raise StateError(f"duplicate subsystem labels: {labels}")
        if self.total_dim > MAX_DIM:
            raise StateError(f"total dimension {self.total_dim} exceeds cap {MAX_DIM}")

    @classmethod
    def of(cls, *subsystems: Subsystem) -> "RegisterLayout":
        return cls(tuple(subsystems))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.subsystems else 1

    def __len__(self):
        return len(self.subsystems)

    def __getitem__(self, label: str) -> Subsystem:
        return self.subsystems[self.position(label)]

    def position(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise StateError(f"unknown subsystem label {label!r}") from None

    def positions(self, labels: Iterable[str]) -> list[int]:
        pos = [self.position(l) for l in labels]
        if len(set(pos)) != len(pos):
            raise StateError(f"repeated labels in {list(labels)}")
        return pos

    def index(self, levels: Mapping[str, object] | Sequence[object]) -> int:
        """Joint basis index for a full assignment of levels."""
        if isinstance(levels, Mapping):
            missing = set(self.labels) - set(levels)
            if missing:
                raise StateError(f"missing levels for {sorted(missing)}")
            levels = [levels[l] for l in self.labels]
        if len(levels) != len(self):
            raise StateError("level assignment length does not match layout")
        digits = [s.level_index(v) for s, v in zip(self.subsystems, levels)]
        return int(np.ravel_multi_index(digits, self.dims))

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.subsystems + other.subsystems)

    def without(self, labels: Iterable[str]) -> "RegisterLayout":
        drop = set(labels)
        return RegisterLayout(tuple(s for s in self.subsystems if s.label not in drop))

    def replace(self, label: str, new: Subsystem) -> "RegisterLayout":
        subs = list(self.subsystems)
        subs[self.position(label)] = new
        return RegisterLayout(tuple(subs))

    def basis_label(self, index: int) -> tuple[str, ...]:
        digits = np.unravel_index(index, self.dims)
        return tuple(s.levels[d] for s, d in zip(self.subsystems, digits))


@dataclass(frozen=True)
class QuantumState:
    """A ket (1-D data) or density operator (2-D data) over ``layout``.

    Instances are immutable; the data array is flagged read-only.
    """

    layout: RegisterLayout
    data: np.ndarray = field(repr=False)
    normalized: bool = True

    def __post_init__(self):
        arr = np.array(self.data, dtype=complex)
        d = self.layout.total_dim
        if arr.ndim == 1 and arr.shape != (d,):
            raise StateError(f"ket length {arr.shape[0]} != layout dimension {d}")
        if arr.ndim == 2 and arr.shape != (d, d):
            raise StateError(f"density shape {arr.shape} != ({d}, {d})")
        if arr.ndim not in (1, 2):
            raise StateError("state data must be 1-D or 2-D")
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.normalized:
            if arr.ndim == 1:
                n = float(np.vdot(arr, arr).real)
                if abs(n - 1) > NORM_TOL * 10:
                    raise StateError(f"ket not normalized (norm^2={n!r})")
            else:
                if abs(np.trace(arr).real - 1) > NORM_TOL * 10:
                    raise StateError(f"density trace {np.trace(arr).real!r} != 1")
                if np.max(np.abs(arr - arr.conj().T), initial=0.0) > NORM_TOL * 10:
                    raise StateError("density operator not Hermitian")

    # construction ---------------------------------------------------------
    @classmethod
    def basis(cls, layout: RegisterLayout, levels) -> "QuantumState":
        psi = np.zeros(layout.total_dim, dtype=complex)
        psi[layout.index(levels)] = 1.0
        return cls(layout, psi)

    @classmethod
    def from_terms(cls, layout: RegisterLayout, terms: Mapping[tuple, complex],
                   normalize: bool = False) -> "QuantumState":
        """Ket from ``{(level, level, ...): amplitude}``."""
        psi = np.zeros(layout.total_dim, dtype=complex)
        for levels, amp in terms.items():
            psi[layout.index(levels)] += amp
        if normalize:
            nrm = np.linalg.norm(psi)
            if nrm < 1e-14:
                raise ImpossibleOutcomeError("zero vector")
            psi = psi / nrm
        return cls(layout, psi)

    @classmethod
    def single(cls, subsystem: Subsystem, amplitudes: Mapping[object, complex] | Sequence[complex]):
        layout = RegisterLayout.of(subsystem)
        if isinstance(amplitudes, Mapping):
            return cls.from_terms(layout, {(k,): v for k, v in amplitudes.items()})
        return cls(layout, np.asarray(amplitudes, dtype=complex))

    # views -----------------------------------------------------------------
    @property
    def is_pure(self) -> bool:
        return self.data.ndim == 1

    @property
    def dims(self) -> tuple[int, ...]:
        return self.layout.dims

    def density(self) -> "QuantumState":
        if not self.is_pure:
            return self
        return QuantumState(self.layout, np.outer(self.data, self.data.conj()), self.normalized)

    def matrix(self) -> np.ndarray:
        return self.density().data

    def probabilities(self) -> np.ndarray:
        if self.is_pure:
            return np.abs(self.data) ** 2
        return np.real(np.diag(self.data)).copy()

    def norm2(self) -> float:
        """Squared norm (ket) or trace (density)."""
        if self.is_pure:
            return float(np.vdot(self.data, self.data).real)
        return float(np.trace(self.data).real)

    def amplitude(self, levels) -> complex:
        if not self.is_pure:
            raise RepresentationError("amplitude() needs a ket")
        return complex(self.data[self.layout.index(levels)])

    def marginal(self, label: str) -> np.ndarray:
        """Population distribution of one subsystem."""
        p = self.probabilities().reshape(self.dims)
        ax = self.layout.position(label)
        other = tuple(i for i in range(len(self.dims)) if i != ax)
        return p.sum(axis=other)

    def support(self, tol: float = 1e-12) -> dict[tuple[str, ...], complex]:
        """Nonzero amplitudes (ket) or diagonal weights (density) by basis label."""
        vals = self.data if self.is_pure else np.diag(self.data)
        return {self.layout.basis_label(i): complex(v)
                for i, v in enumerate(vals) if abs(v) > tol}


# ---------------------------------------------------------------------------
# tensor helpers

def _apply_on_axes(tensor: np.ndarray, op: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    """Contract ``op`` (shape (D, D), D = prod of axes dims) into ``tensor`` on ``axes``."""
    axes = list(axes)
    k = len(axes)
    dims = [tensor.shape[a] for a in axes]
    op_t = op.reshape(dims + dims)
    out = np.tensordot(op_t, tensor, axes=(list(range(k, 2 * k)), axes))
    # tensordot puts the new axes first; move them back into place
    return np.moveaxis(out, list(range(k)), axes)


def _check_pure_pair(a: QuantumState, b: QuantumState):
    if a.is_pure != b.is_pure:
        raise RepresentationError("cannot mix pure and mixed representations")


# ---------------------------------------------------------------------------
# operations

def compose(a: QuantumState, b: QuantumState) -> QuantumState:
    """Tensor product ``a ⊗ b``; layouts are concatenated."""
    _check_pure_pair(a, b)
    layout = a.layout.concat(b.layout)
    data = np.kron(a.data, b.data)
    return QuantumState(layout, data, a.normalized and b.normalized)


def compose_all(states: Sequence[QuantumState]) -> QuantumState:
    out = states[0]
    for s in states[1:]:
        out = compose(out, s)
    return out


def is_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> bool:
    u = np.asarray(u)
    return u.ndim == 2 and u.shape[0] == u.shape[1] and \
        np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=tol, rtol=0)


def apply_operator(s: QuantumState, op: np.ndarray, targets: Sequence[str],
                   normalized: bool = False) -> QuantumState:
    """Apply an arbitrary operator on ``targets`` (ket: op|ψ>, density: op ρ op†)."""
    if isinstance(targets, str):
        targets = [targets]
    pos = s.layout.positions(targets)
    d = int(np.prod([s.dims[p] for p in pos]))
    op = np.asarray(op, dtype=complex)
    if op.shape != (d, d):
        raise StateError(f"operator shape {op.shape} does not match target dimension {d}")
    n = len(s.dims)
    if s.is_pure:
        t = _apply_on_axes(s.data.reshape(s.dims), op, pos)
        data = t.reshape(-1)
    else:
        t = s.data.reshape(s.dims + s.dims)
        t = _apply_on_axes(t, op, pos)
        t = _apply_on_axes(t, op.conj(), [p + n for p in pos])
        data = t.reshape(s.layout.total_dim, s.layout.total_dim)
    return QuantumState(s.layout, data, normalized)


def apply_unitary(s: QuantumState, u: np.ndarray, targets: Sequence[str]) -> QuantumState:
    """Apply a unitary to the listed subsystems; the rest are untouched."""
    if not is_unitary(u):
        raise StateError("operator is not unitary within tolerance")
    return apply_operator(s, u, targets, normalized=s.normalized)


def apply_kraus(s: QuantumState, kraus: Sequence[np.ndarray], targets: Sequence[str]) -> QuantumState:
    """Apply a channel given by Kraus operators; the result is a density operator."""
    if isinstance(targets, str):
        targets = [targets]
    rho = s.density()
    total = sum(k.conj().T @ k for k in kraus)
    if not np.allclose(total, np.eye(total.shape[0]), atol=UNITARY_TOL):
        raise StateError("Kraus operators are not trace preserving")
    acc = None
    for k in kraus:
        part = apply_operator(rho, k, targets).data
        acc = part if acc is None else acc + part
    return QuantumState(s.layout, acc, s.normalized)


def trace_out(s: QuantumState, targets: Sequence[str]) -> QuantumState:
    """Partial trace over ``targets``; always returns a density operator."""
    if isinstance(targets, str):
        targets = [targets]
    if not targets:
        raise StateError("nothing to trace out")
    pos = s.layout.positions(targets)
    if len(pos) == len(s.layout):
        raise StateError("tracing out every subsystem leaves a scalar")
    keep = [i for i in range(len(s.dims)) if i not in pos]
    layout = s.layout.without(targets)
    dk = layout.total_dim
    if s.is_pure:
        t = np.transpose(s.data.reshape(s.dims), keep + pos).reshape(dk, -1)
        rho = t @ t.conj().T
    else:
        n = len(s.dims)
        t = s.data.reshape(s.dims + s.dims)
        t = np.transpose(t, keep + pos + [k + n for k in keep] + [p + n for p in pos])
        dt = int(np.prod([s.dims[p] for p in pos]))
        t = t.reshape(dk, dt, dk, dt)
        rho = np.einsum("ajbj->ab", t)
    return QuantumState(layout, rho, s.normalized)


def reorder(s: QuantumState, labels: Sequence[str]) -> QuantumState:
    """Permute subsystems into the order given by ``labels``."""
    pos = s.layout.positions(labels)
    if len(pos) != len(s.layout):
        raise StateError("reorder needs every label exactly once")
    layout = RegisterLayout(tuple(s.layout.subsystems[p] for p in pos))
    if s.is_pure:
        data = np.transpose(s.data.reshape(s.dims), pos).reshape(-1)
    else:
        n = len(s.dims)
        t = np.transpose(s.data.reshape(s.dims + s.dims), pos + [p + n for p in pos])
        data = t.reshape(layout.total_dim, layout.total_dim)
    return QuantumState(layout, data, s.normalized)


def fidelity(s: QuantumState, target: QuantumState) -> float:
    """<t|ρ|t> for a pure target (|<t|ψ>|² if ``s`` is a ket)."""
    if not target.is_pure:
        raise RepresentationError("fidelity target must be a ket")
    if s.layout != target.layout:
        raise StateError("layout mismatch in fidelity")
    t = target.data
    if s.is_pure:
        f = abs(np.vdot(t, s.data)) ** 2
    else:
        f = float(np.real(np.vdot(t, s.data @ t)))
    return float(min(max(f, 0.0), 1.0))


def renormalize(s: QuantumState) -> tuple[QuantumState, float]:
    """Return the unit-normalized state and its original weight."""
    w = s.norm2()
    if w < 1e-14:
        raise ImpossibleOutcomeError(f"state weight {w:.3e} is zero; outcome impossible")
    data = s.data / np.sqrt(w) if s.is_pure else s.data / w
    if not s.is_pure:
        data = 0.5 * (data + data.conj().T)
    return QuantumState(s.layout, data, True), w


def restrict_cutoff(s: QuantumState, label: str, cutoff: int, tol: float = 1e-12) -> QuantumState:
    """Shrink a mode's Fock cutoff; refuses if any weight sits above it."""
    sub = s.layout[label]
    if cutoff >= sub.cutoff:
        return s
    pos = s.layout.position(label)
    above = s.marginal(label)[cutoff + 1:].sum()
    if above > tol:
        raise CutoffError(f"weight {above:.3e} above new cutoff {cutoff} in mode {label!r}")
    layout = s.layout.replace(label, Subsystem.mode(label, cutoff))
    keep = slice(0, cutoff + 1)
    if s.is_pure:
        t = s.data.reshape(s.dims)
        t = t[(slice(None),) * pos + (keep,)]
        data = t.reshape(-1)
    else:
        n = len(s.dims)
        t = s.data.reshape(s.dims + s.dims)
        idx = [slice(None)] * (2 * n)
        idx[pos] = keep
        idx[pos + n] = keep
        data = t[tuple(idx)].reshape(layout.total_dim, layout.total_dim)
    out, _ = renormalize(QuantumState(layout, data, False))
    return out


def level_map(sub: Subsystem, mapping: Mapping[str, str]) -> np.ndarray:
    """Permutation unitary on one subsystem sending level ``a`` to ``mapping[a]``.

    Levels not mentioned are completed into a permutation.
    """
    d = sub.dim
    src = [sub.level_index(a) for a in mapping]
    dst = [sub.level_index(b) for b in mapping.values()]
    if len(set(dst)) != len(dst):
        raise StateError("level map is not injective")
    free_src = [i for i in range(d) if i not in src]
    free_dst = [i for i in range(d) if i not in dst]
    u = np.zeros((d, d), dtype=complex)
    for i, j in list(zip(src, dst)) + list(zip(free_src, free_dst)):
        u[j, i] = 1.0
    return u


def is_valid_density(s: QuantumState, tol: float = 1e-10) -> bool:
    rho = s.matrix()
    herm = np.max(np.abs(rho - rho.conj().T), initial=0.0) < 1e-12
    tr = abs(np.trace(rho).real - 1) < 1e-12
    psd = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min() >= -tol
    return bool(herm and tr and psd)
