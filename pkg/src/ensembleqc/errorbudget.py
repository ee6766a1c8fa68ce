"""Closed-form error budget for the blockade entangler (SI units throughout)."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from math import exp, pi, sqrt

import numpy as np
from scipy import constants as const

from .qstate import QuantumState, StateError

RB87_MASS = 86.909180527 * const.atomic_mass


class BudgetError(ValueError):
    pass


def _positive(**kw):
    for k, v in kw.items():
        if v is None or not v > 0:
            raise BudgetError(f"{k} must be positive (got {v!r})")


@dataclass(frozen=True)
class AbsorptionInputs:
    """Photon wavelength, decay rates and interaction geometry.

    Exactly one of ``area`` or ``waist`` sets the pulse area (A = π w0²).
    """

    wavelength: float
    gamma0: float
    gamma: float
    N_i: float = 500
    area: float | None = None
    waist: float | None = None
    length: float | None = None

    def __post_init__(self):
        _positive(wavelength=self.wavelength, gamma0=self.gamma0, gamma=self.gamma, N_i=self.N_i)
        if (self.area is None) == (self.waist is None):
            raise BudgetError("give exactly one of area or waist")
        if self.length is not None:
            _positive(length=self.length)

    @property
    def A(self) -> float:
        if self.area is not None:
            _positive(area=self.area)
            return self.area
        _positive(waist=self.waist)
        return pi * self.waist**2


def cross_section(wavelength: float, gamma0: float, gamma: float) -> float:
    """On-resonance scattering cross section σ0 = 3λ²γ0/(2πγ)."""
    _positive(wavelength=wavelength, gamma0=gamma0, gamma=gamma)
    return 3 * wavelength**2 * gamma0 / (2 * pi * gamma)


def absorption_probability(inp: AbsorptionInputs, two_photon_form: bool = False) -> tuple[float, float]:
    """(σ0, P_abs) with P_abs = 1 - exp(-N_i σ0/A), or exponent 2σ0/A for a single Rydberg atom."""
    s0 = cross_section(inp.wavelength, inp.gamma0, inp.gamma)
    od = (2.0 if two_photon_form else inp.N_i) * s0 / inp.A
    return s0, 1.0 - exp(-od)


def coupling_and_time(sigma0: float, gamma: float, area: float, length: float) -> tuple[float, float]:
    """g = √(σ0 γ c / 4V) with V = A L, and t = π/(2√2 g)."""
    _positive(sigma0=sigma0, gamma=gamma, area=area, length=length)
    g = sqrt(sigma0 * gamma * const.c / (4 * area * length))
    return g, pi / (2 * sqrt(2) * g)


@dataclass(frozen=True)
class DarkCount:
    probability: float
    negligible: bool


def dark_count_probability(gamma_dc: float, t: float, p_success: float) -> DarkCount:
    """P_dc = 1 - exp(-γ_dc t / p); negligible when p > γ_dc t."""
    if gamma_dc < 0 or t < 0:
        raise BudgetError("dark rate and time must be non-negative")
    if not 0 < p_success <= 1:
        raise BudgetError("p_success must lie in (0, 1]")
    return DarkCount(1.0 - exp(-gamma_dc * t / p_success), p_success > gamma_dc * t)


def collision_rate(n: float, sigma_col: float, mass: float = RB87_MASS, T: float = 1e-3) -> float:
    """τ_col⁻¹ = n σ_col √(3 k_B T / M)."""
    _positive(n=n, sigma_col=sigma_col, mass=mass, T=T)
    return n * sigma_col * sqrt(3 * const.k * T / mass)


def doppler_width(wavelength0: float, T: float, mass: float = RB87_MASS) -> float:
    """Δλ = λ0 √(k_B T / M c²)."""
    _positive(wavelength0=wavelength0, mass=mass)
    if T < 0:
        raise BudgetError("temperature must be non-negative")
    return wavelength0 * sqrt(const.k * T / (mass * const.c**2))


def decay_probability(rate: float, t: float) -> float:
    if rate < 0 or t < 0:
        raise BudgetError("rate and time must be non-negative")
    return 1.0 - exp(-rate * t)


def final_state(target: QuantumState, epsilon: float, noise_overlap: float = 0.0,
                noise: QuantumState | None = None) -> tuple[QuantumState, float]:
    """ρ_fin = (1-2ε)|ψ><ψ| + 2ε ρ_noise and F = <ψ|ρ_fin|ψ>.

    Without an explicit ``noise`` operator, ρ_noise mixes ψ (weight
    ``noise_overlap``) with a basis state orthogonal to it.
    """
    if not 0 <= epsilon <= 0.5:
        raise BudgetError("epsilon must lie in [0, 1/2]")
    if not target.is_pure:
        raise StateError("target must be a ket")
    psi = np.asarray(target.data)
    P = np.outer(psi, psi.conj())
    if noise is None:
        if not 0 <= noise_overlap <= 1:
            raise BudgetError("noise_overlap must lie in [0, 1]")
        j = int(np.argmin(np.abs(psi)))
        phi = np.zeros_like(psi)
        phi[j] = 1.0
        phi = phi - np.vdot(psi, phi) * psi
        phi /= np.linalg.norm(phi)
        rn = noise_overlap * P + (1 - noise_overlap) * np.outer(phi, phi.conj())
    else:
        rn = noise.matrix()
    rho = (1 - 2 * epsilon) * P + 2 * epsilon * rn
    out = QuantumState(target.layout, rho)
    F = float(np.real(np.vdot(psi, rho @ psi)))
    return out, F


# ---------------------------------------------------------------------------
# full report

@dataclass(frozen=True)
class BudgetInputs:
    absorption: AbsorptionInputs
    two_photon_form: bool = True
    gamma_dc: float = 20.0
    t_protocol: float = 11.2e-6
    p_success: float = 0.3
    density: float = 1e18          # m^-3
    sigma_col: float = 1e-18       # m^2
    temperature: float = 1e-3
    mass: float = RB87_MASS
    decay_rate: float = 1e3
    decay_time: float | None = None
    noise_overlap: float = 0.0
    mode_mismatch: float = 0.0
    two_photon_absorption: float = 0.0


@dataclass(frozen=True)
class BudgetReport:
    sigma0: float
    P_abs: float
    g: float | None
    t_int: float | None
    P_dc: float
    dark_negligible: bool
    collision_rate: float
    doppler_width: float
    P_decay: float
    epsilon: float
    F_final: float
    F_single_weight: float

    def as_dict(self) -> dict:
        return asdict(self)


def budget(inp: BudgetInputs) -> BudgetReport:
    """Evaluate every channel from raw inputs.

    ε = 1 - P_abs plus the optional mode-mismatch and two-photon-absorption
    probabilities. ``F_final`` is the literal mixture 1 - 2ε(1 - overlap);
    ``F_single_weight`` is the reading with noise weight ε instead of 2ε.
    """
    a = inp.absorption
    s0, pabs = absorption_probability(a, inp.two_photon_form)
    g = t_int = None
    if a.length is not None:
        g, t_int = coupling_and_time(s0, a.gamma, a.A, a.length)
    dc = dark_count_probability(inp.gamma_dc, inp.t_protocol, inp.p_success)
    eps = (1 - pabs) + inp.mode_mismatch + inp.two_photon_absorption
    if not 0 <= eps <= 0.5:
        raise BudgetError(f"total no-absorption error {eps:.3f} exceeds 1/2")
    t_dec = inp.decay_time if inp.decay_time is not None else inp.t_protocol
    return BudgetReport(
        sigma0=s0, P_abs=pabs, g=g, t_int=t_int, P_dc=dc.probability, dark_negligible=dc.negligible,
        collision_rate=collision_rate(inp.density, inp.sigma_col, inp.mass, inp.temperature),
        doppler_width=doppler_width(a.wavelength, inp.temperature, inp.mass),
        P_decay=decay_probability(inp.decay_rate, t_dec), epsilon=eps,
        F_final=1 - 2 * eps * (1 - inp.noise_overlap),
        F_single_weight=1 - eps * (1 - inp.noise_overlap),
    )


# worked inputs for the three level schemes
def rb43d_inputs() -> AbsorptionInputs:
    lam = 485.766e-9
    return AbsorptionInputs(lam, 1.1e4, 7.2e4, N_i=500, waist=pi * lam)


def rb58d_inputs() -> AbsorptionInputs:
    lam = 485.081e-9
    return AbsorptionInputs(lam, 4.8e3, 2.0e4, N_i=500, waist=pi * lam)


def rydberg_45p58d_inputs() -> AbsorptionInputs:
    lam = 370.783e-6
    return AbsorptionInputs(lam, 4.8e3, 2.0e4, N_i=1, area=0.1 * lam**2, length=12e-6)
