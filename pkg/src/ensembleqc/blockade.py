"""Rydberg-blockade numerics for a collective ensemble qubit.

Frequencies are angular (rad/s), times in seconds, lengths in metres.

The collective amplitude model tracks the ground amplitude ``c_g``, the
symmetric single-Rydberg amplitude ``c_r`` and one amplitude per pair of
doubly excited atoms:

    dc_g/dt  =  √N Ω c_r
    dc_r/dt  = -√N Ω c_g + (Ω/√N) Σ_jk c_jk
    dc_jk/dt = -(Ω/√N) c_r - i Δ_jk c_jk

whose adiabatic limit is c_jk = iΩ c_r / (√N Δ_jk). The system conserves
|c_g|² + |c_r|² + Σ|c_jk|².
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, pi, sqrt
from typing import Sequence

import numpy as np
from scipy.integrate import solve_ivp

from .qstate import QuantumState, RegisterLayout, Subsystem, apply_unitary

MIN_SEPARATION = 50e-9
COINCIDENT = 1e-9
FULL_MODEL_MAX_N = 50


class BlockadeError(ValueError):
    pass


class IntegratorError(RuntimeError):
    """The amplitude integration missed its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


# ---------------------------------------------------------------------------
# geometry

@dataclass(frozen=True)
class CloudGeometry:
    positions: np.ndarray = field(repr=False)
    sigma_z: float
    sigma_xy: float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 2:
            raise BlockadeError("positions must be an (N>=2, 3) array")
        if not np.all(np.isfinite(pos)):
            raise BlockadeError("non-finite atom position")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    def separations(self) -> np.ndarray:
        """Pair distances |r_j - r_k| for j < k, row-major."""
        j, k = np.triu_indices(self.N, 1)
        return np.linalg.norm(self.positions[j] - self.positions[k], axis=1)


def sample_cloud(N: int, sigma_z: float, sigma_xy: float, rng,
                 min_separation: float = MIN_SEPARATION, max_rounds: int = 10_000) -> CloudGeometry:
    """Gaussian cigar-shaped cloud; atoms closer than ``min_separation`` are redrawn."""
    if N < 2:
        raise BlockadeError("need at least two atoms")
    if sigma_z < 0 or sigma_xy < 0 or (sigma_z == 0 and sigma_xy == 0):
        raise BlockadeError("cloud widths must be non-negative and not both zero")
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    scale = np.array([sigma_xy, sigma_xy, sigma_z])
    pos = rng.standard_normal((N, 3)) * scale
    for _ in range(max_rounds):
        d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=-1)
        np.fill_diagonal(d, np.inf)
        close = np.argwhere(np.triu(d < min_separation, 1))
        if close.size == 0:
            return CloudGeometry(pos, sigma_z, sigma_xy)
        redo = np.unique(close[:, 1])
        pos[redo] = rng.standard_normal((len(redo), 3)) * scale
    raise BlockadeError("could not satisfy minimum atom separation; cloud too dense")


# ---------------------------------------------------------------------------
# blockade parameters

@dataclass(frozen=True)
class BlockadeParams:
    """Pair shifts and their aggregates.

    ``delta_bar`` = Σ 1/Δ_jk (s), ``delta_bar_p2`` = Σ 1/Δ_jk² (s²) and the mean
    blockade shift obeys 1/B² = 2 delta_bar_p2 / (N(N-1)).
    """

    N: int
    delta_bar: float
    delta_bar_p2: float
    B: float
    shifts: np.ndarray | None = field(default=None, repr=False)

    @classmethod
    def from_shifts(cls, N: int, shifts) -> "BlockadeParams":
        shifts = np.asarray(shifts, dtype=float)
        if shifts.shape != (N * (N - 1) // 2,):
            raise BlockadeError("need one shift per atom pair")
        if np.any(shifts <= 0):
            raise BlockadeError("pair shifts must be positive")
        inv = 1.0 / shifts
        dbar = float(inv.sum())
        dp2 = float((inv * inv).sum())
        B = sqrt(N * (N - 1) / (2.0 * dp2))
        return cls(N, dbar, dp2, B, shifts)

    @classmethod
    def from_blockade_shift(cls, N: int, B: float) -> "BlockadeParams":
        """Aggregates for a cloud whose pairs all share the shift ``B``."""
        if B <= 0:
            raise BlockadeError("blockade shift must be positive")
        M = N * (N - 1) / 2
        return cls(N, M / B, M / B**2, float(B), None)


def pair_shifts(cloud: CloudGeometry, C6: float) -> np.ndarray:
    r = cloud.separations()
    if r.min() <= COINCIDENT:
        raise BlockadeError(f"coincident atoms (separation {r.min():.3e} m)")
    return C6 / r**6


def aggregates(cloud: CloudGeometry, C6: float) -> BlockadeParams:
    return BlockadeParams.from_shifts(cloud.N, pair_shifts(cloud, C6))


# ---------------------------------------------------------------------------
# adiabatic-elimination analytics

@dataclass(frozen=True)
class PulseAnalytics:
    l: float
    t_pi: float
    P1: float
    P2: float
    P2_blockade_form: float
    delta_omega: float

    def p_single(self, t, N: int, Omega: float):
        """|c_r(t)|² = sin²(√(N l) Ω t) / l."""
        return np.sin(np.sqrt(N * self.l) * Omega * np.asarray(t)) ** 2 / self.l


def pulse_analytics(N: int, Omega: float, params: BlockadeParams) -> PulseAnalytics:
    if Omega <= 0:
        raise BlockadeError("Rabi frequency must be positive")
    l = 1.0 + params.delta_bar**2 * Omega**2 / (4.0 * N**3)
    return PulseAnalytics(
        l=l,
        t_pi=pi / (2.0 * sqrt(N * l) * Omega),
        P1=1.0 / l,
        P2=params.delta_bar_p2 * Omega**2 / N,
        P2_blockade_form=(N * Omega**2) * (N - 1) / (2.0 * N * params.B**2),
        delta_omega=Omega**2 * params.delta_bar / N,
    )


def single_qubit_fidelity(P2: float, P_decay: float) -> float:
    if not (0 <= P2 <= 1 and 0 <= P_decay <= 1):
        raise BlockadeError("probabilities must lie in [0, 1]")
    return exp(-(2.0 * P2 + P_decay))


# ---------------------------------------------------------------------------
# amplitude integration

def pair_classes(shifts, K: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapse pair shifts into ``K`` weighted classes.

    Pairs are grouped by quantile of Δ. Each class gets shift A/B₂ and weight
    A²/B₂ with A = Σ 1/Δ and B₂ = Σ 1/Δ² over its members, so both Σ 1/Δ and
    Σ 1/Δ² of the full set are reproduced exactly.
    """
    s = np.sort(np.asarray(shifts, dtype=float))
    K = max(1, min(int(K), len(s)))
    groups = np.array_split(s, K)
    cls_shift, cls_weight = [], []
    for g in groups:
        A = np.sum(1.0 / g)
        B2 = np.sum(1.0 / g**2)
        cls_shift.append(A / B2)
        cls_weight.append(A * A / B2)
    return np.array(cls_shift), np.array(cls_weight)


@dataclass
class Trajectory:
    t: np.ndarray
    c_g: np.ndarray
    c_r: np.ndarray
    pair_amps: np.ndarray  # (classes, len(t))
    weights: np.ndarray
    shifts: np.ndarray
    method: str = ""

    @property
    def p_ground(self):
        return np.abs(self.c_g) ** 2

    @property
    def p_single(self):
        return np.abs(self.c_r) ** 2

    @property
    def p_double(self):
        if self.pair_amps.size == 0:
            return np.zeros_like(self.t)
        return (self.weights[:, None] * np.abs(self.pair_amps) ** 2).sum(axis=0)

    @property
    def norm(self):
        return self.p_ground + self.p_single + self.p_double


def generator_matrix(N: int, Omega: float, shifts, weights) -> np.ndarray:
    """Linear generator A with dy/dt = A y, y = (c_g, c_r, a_1..a_K)."""
    shifts = np.asarray(shifts, dtype=float)
    weights = np.asarray(weights, dtype=float)
    K = len(shifts)
    A = np.zeros((K + 2, K + 2), dtype=complex)
    rn = sqrt(N)
    A[0, 1] = rn * Omega
    A[1, 0] = -rn * Omega
    A[1, 2:] = Omega / rn * weights
    A[2:, 1] = -Omega / rn
    A[2:, 2:] = np.diag(-1j * shifts)
    return A


def integrate_amplitudes(N: int, Omega: float, shifts=None, t_end: float | None = None,
                         tol: float = 1e-10, classes: int | None = None,
                         t_eval: Sequence[float] | None = None, method: str | None = None
                         ) -> Trajectory:
    """Integrate the collective amplitudes from c_g(0) = 1.

    ``shifts=None`` is the perfect-blockade limit (no doubly excited pairs).
    Up to ``FULL_MODEL_MAX_N`` atoms every pair is kept; above that (or when
    ``classes`` is given) pairs are collapsed by :func:`pair_classes`
    (default 3 classes).
    """
    if Omega <= 0 or N < 1:
        raise BlockadeError("need Omega > 0 and N >= 1")
    if shifts is None or len(shifts) == 0:
        cls_shift, cls_w = np.zeros(0), np.zeros(0)
    else:
        shifts = np.asarray(shifts, dtype=float)
        if np.any(~np.isfinite(shifts)) or np.any(shifts <= 0):
            raise BlockadeError("pair shifts must be finite and positive")
        if classes is None and N <= FULL_MODEL_MAX_N:
            cls_shift, cls_w = shifts.copy(), np.ones_like(shifts)
        else:
            cls_shift, cls_w = pair_classes(shifts, classes or 3)
    rate = sqrt(N) * Omega
    if t_end is None:
        t_end = pi / (2 * rate)
    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, 201)
    t_eval = np.asarray(t_eval, dtype=float)

    # dimensionless time τ = √N Ω t keeps the step-size control well scaled
    A = generator_matrix(N, Omega, cls_shift, cls_w) / rate
    y0 = np.zeros(len(cls_shift) + 2, dtype=complex)
    y0[0] = 1.0
    stiff = len(cls_shift) and cls_shift.max() / rate * (t_end * rate) > 1e5
    method = method or ("Radau" if stiff else "DOP853")
    extra = {"jac": A} if method in ("Radau", "BDF", "LSODA") else {}
    sol = solve_ivp(lambda _, y: A @ y, (0.0, t_end * rate), y0, method=method,
                    t_eval=t_eval * rate, rtol=tol, atol=tol * 1e-2, **extra)
    if not sol.success:
        raise IntegratorError(f"integration failed: {sol.message}",
                              {"method": method, "nfev": sol.nfev})
    traj = Trajectory(t_eval, sol.y[0], sol.y[1], sol.y[2:], cls_w, cls_shift, method)
    drift = float(np.max(np.abs(traj.norm - 1.0)))
    if drift > 10 * tol:
        raise IntegratorError(
            f"norm drift {drift:.3e} exceeds 10*tol",
            {"method": method, "nfev": sol.nfev, "norm_drift": drift, "classes": len(cls_shift)})
    return traj


# ---------------------------------------------------------------------------
# gate pulse plans

LOGICAL = Subsystem.ensemble("q", ("g", "s", "e", "r"))


@dataclass(frozen=True)
class Pulse:
    name: str
    transition: tuple[str, str]
    area: float
    phase: float
    duration: float
    detuned: bool = False

    def unitary(self) -> np.ndarray:
        """Resonant rotation exp(-i area/2 (cos φ σx + sin φ σy)) on the two levels.

        Detuned auxiliary pulses are taken in their adiabatic limit: a phase
        ``area`` on the second level of the transition, split symmetrically.
        """
        a, b = (LOGICAL.level_index(x) for x in self.transition)
        u = np.eye(LOGICAL.dim, dtype=complex)
        if self.detuned:
            u[a, a] = np.exp(-0.5j * self.area)
            u[b, b] = np.exp(0.5j * self.area)
            return u
        c, s = np.cos(self.area / 2), np.sin(self.area / 2)
        ph = np.exp(1j * self.phase)
        u[a, a] = c
        u[b, b] = c
        u[a, b] = -1j * s * np.conj(ph)
        u[b, a] = -1j * s * ph
        return u


@dataclass(frozen=True)
class GatePlan:
    kind: str
    pulses: tuple[Pulse, ...]

    @property
    def duration(self) -> float:
        return sum(p.duration for p in self.pulses)

    def ideal_unitary(self, strip_phase: bool = True) -> np.ndarray:
        """2x2 action on (|0>_L, |1>_L) obtained by running the pulses on a qudit."""
        lay = RegisterLayout.of(LOGICAL)
        cols = []
        for lvl in ("g", "s"):
            st = QuantumState.basis(lay, (lvl,))
            for p in self.pulses:
                st = apply_unitary(st, p.unitary(), ["q"])
            cols.append(st.data)
        full = np.array(cols).T
        leak = np.abs(full[2:, :]).max()
        if leak > 1e-12:
            raise BlockadeError(f"pulse plan leaves population outside the qubit ({leak:.2e})")
        u = full[:2, :]
        if strip_phase:
            k = np.flatnonzero(np.abs(u.reshape(-1)) > 1e-9)[0]
            v = u.reshape(-1)[k]
            u = u * (abs(v) / v)
        return u


def _transfer(duration: float) -> list[Pulse]:
    return [Pulse("g->e", ("g", "e"), pi, 0.0, duration),
            Pulse("s->r", ("s", "r"), pi, 0.0, duration)]


def gate_sequence(kind: str, phi: float = 0.0, N: int = 500, Omega: float = 2 * pi * 1e3,
                  fast_rabi: float = 2 * pi * 1e6) -> GatePlan:
    """Three-step pulse plan for X, H or the phase gate Φ(φ) = exp(-iφZ/2).

    Step one maps g->e and s->r, the middle pulse couples the collective
    zero- and one-Rydberg states at the collective Rabi frequency √N Ω, step
    three undoes step one. H adds a Φ(π) phase pulse in front of a π/2 pulse.
    """
    kind = kind.upper() if kind.upper() in ("X", "H") else kind
    t_fast = pi / (2 * fast_rabi)
    collective = 2 * sqrt(N) * Omega
    if kind == "X":
        mid = [Pulse("e<->r", ("e", "r"), pi, 0.0, pi / collective)]
        pulses = _transfer(t_fast) + mid + _transfer(t_fast)
    elif kind == "H":
        pulses = ([Pulse("phase", ("g", "s"), pi, 0.0, t_fast, detuned=True)]
                  + _transfer(t_fast)
                  + [Pulse("e<->r", ("e", "r"), pi / 2, pi / 2, (pi / 2) / collective)]
                  + _transfer(t_fast))
    elif kind in ("Phi", "PHI", "Φ", "phase"):
        pulses = [Pulse("phase", ("g", "s"), phi, 0.0, t_fast, detuned=True)]
    else:
        raise BlockadeError(f"unknown gate kind {kind!r}")
    return GatePlan(kind if kind in ("X", "H") else "Phi", tuple(pulses))
