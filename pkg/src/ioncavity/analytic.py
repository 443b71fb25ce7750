"""Closed-form relations for the driven ion-cavity system.

All frequencies here are angular (rad/s); the CLI layer converts to and from
linear frequencies. Gamma denotes the full population decay rate (2 gamma).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class CavityGeometry:
    """Fabry-Perot geometry; lengths in meters, mirror budget in ppm."""

    length: float
    finesse: float
    transmission_ppm: float = 1000.0
    loss_ppm: float = 500.0
    waist: float = 3.1e-6

    def __post_init__(self):
        if self.length <= 0 or self.finesse <= 0 or self.waist <= 0:
            raise ValueError("length, finesse and waist must be positive")
        if self.transmission_ppm < 0 or self.loss_ppm < 0:
            raise ValueError("mirror budget must be nonnegative")


@dataclass(frozen=True)
class EfficiencyChain:
    """Multiplicative detection budget for a photon in the cavity mode."""

    eta_impedance: float
    eta_mode_match: float
    eta_path: float
    eta_detector: float

    def __post_init__(self):
        for name, value in vars(self).items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name}={value} outside [0, 1]")


@dataclass(frozen=True)
class BackactionField:
    """Intracavity-to-drive field ratio plus a validity marker.

    within_validity is True inside |delta_c| < kappa/2, |delta_a| < Gamma/2
    and C0 < 1; outside that region the ratio is still returned but should be
    treated as a warning-level extrapolation.
    """

    ratio: complex
    within_validity: bool


def cooperativity(g: float, kappa: float, gamma: float) -> float:
    """C0 = g^2 / (2 kappa gamma)."""
    if kappa <= 0 or gamma <= 0:
        raise ValueError("kappa and gamma must be positive")
    return g * g / (2.0 * kappa * gamma)


def kappa_from_geometry(geom: CavityGeometry) -> float:
    """Field decay rate kappa = 2 pi c / (4 L F), angular HWHM of the resonance."""
    return 2.0 * math.pi * SPEED_OF_LIGHT / (4.0 * geom.length * geom.finesse)


def purcell_factor(c0: float, kappa: float, delta_ac: float) -> float:
    """f_P = 2 C0 kappa^2 / (kappa^2 + delta_ac^2), delta_ac = omega_c - omega_a."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return 2.0 * c0 * kappa * kappa / (kappa * kappa + delta_ac * delta_ac)


def purcell_linewidth(gamma_total: float, c0: float) -> float:
    """Enhanced population decay rate Gamma' = Gamma (2 C0 + 1)."""
    return gamma_total * (2.0 * c0 + 1.0)


def broadened_width(gamma_total: float, c0: float, s: float) -> float:
    """Full width Gamma sqrt((2 C0 + 1)^2 + s) of the saturation-broadened line."""
    return gamma_total * math.sqrt((2.0 * c0 + 1.0) ** 2 + s)


def backaction_ratio(params) -> BackactionField:
    """E_c/E_d = -C0 Gamma^2/(Gamma^2 + delta_a^2) exp[i(delta_c/kappa - delta_a/Gamma)].

    The amplitude is bounded by C0; the phase is exactly linear in delta_c
    with slope 1/kappa. Note the delta_a term of the phase is a low-order
    approximation: the weak-drive master equation reproduces it only on the
    atom-resonant slice (delta_a = 0), see the acceptance suite.
    """
    c0 = params.cooperativity
    gamma_total = params.Gamma
    lorentz = gamma_total ** 2 / (gamma_total ** 2 + params.delta_a ** 2)
    phase = params.delta_c / params.kappa - params.delta_a / gamma_total
    ratio = -c0 * lorentz * complex(math.cos(phase), math.sin(phase))
    valid = (
        abs(params.delta_c) < params.kappa / 2.0
        and abs(params.delta_a) < gamma_total / 2.0
        and c0 < 1.0
    )
    return BackactionField(ratio=ratio, within_validity=valid)


def interference_detunings(params) -> tuple[float, float]:
    """Cavity detunings of constructive (+) and destructive (-) interference.

    delta_c_pm / kappa = [Gamma (C0+1) +- sqrt(4 delta_a^2 + Gamma^2 (C0+1)^2)]
                         / (2 delta_a)

    Returns (delta_c_plus, delta_c_minus) in rad/s. For delta_a = 0 the minus
    branch tends to 0 while the plus branch diverges; that degenerate case is
    encoded as (inf, 0.0).
    """
    c0 = params.cooperativity
    gamma_total = params.Gamma
    delta_a = params.delta_a
    if delta_a == 0.0:
        return math.inf, 0.0
    base = gamma_total * (c0 + 1.0)
    root = math.sqrt(4.0 * delta_a ** 2 + base ** 2)
    plus = (base + root) / (2.0 * delta_a) * params.kappa
    # equivalent to (base - root) / (2 delta_a) but free of the cancellation
    # that would otherwise spoil the root-product invariant at small delta_a
    minus = -2.0 * delta_a / (base + root) * params.kappa
    return plus, minus


@dataclass(frozen=True)
class LinearizedMinimum:
    """Both candidate small-delta_a slopes of the destructive-interference line.

    slope_text is -kappa / [Gamma (1 + 2 C0)]; slope_series is the first-order
    expansion of the exact interference condition, -kappa / [Gamma (1 + C0)].
    The two disagree at order C0; callers select one (the acceptance suite
    records which matches the numerics).
    """

    slope_text: float
    slope_series: float
    delta_c_text: float
    delta_c_series: float
    within_window: bool


def linearized_minimum(params) -> LinearizedMinimum:
    """Linearized destructive-interference detuning near atomic resonance."""
    c0 = params.cooperativity
    gamma_total = params.Gamma
    slope_text = -params.kappa / (gamma_total * (1.0 + 2.0 * c0))
    slope_series = -params.kappa / (gamma_total * (1.0 + c0))
    return LinearizedMinimum(
        slope_text=slope_text,
        slope_series=slope_series,
        delta_c_text=slope_text * params.delta_a,
        delta_c_series=slope_series * params.delta_a,
        within_window=abs(params.delta_a) <= gamma_total / 4.0,
    )


def efficiency(chain: EfficiencyChain) -> float:
    """Total detection probability, product of the chain factors."""
    return (
        chain.eta_impedance
        * chain.eta_mode_match
        * chain.eta_path
        * chain.eta_detector
    )


def peak_cavity_output(c0: float) -> float:
    """Weak-drive peak of the normalized cavity output, 2 C0 / (1 + 2 C0 + 2 C0^2)."""
    if c0 < 0:
        raise ValueError("cooperativity must be nonnegative")
    return 2.0 * c0 / (1.0 + 2.0 * c0 + 2.0 * c0 * c0)


def coating_loss_model(t_days, loss_initial_ppm, loss_rise_ppm, tau_days):
    """Saturating-exponential coating loss, L0 + dL (1 - exp(-t / tau))."""
    if tau_days <= 0:
        raise ValueError("tau_days must be positive")
    t = np.asarray(t_days, dtype=float)
    value = loss_initial_ppm + loss_rise_ppm * (1.0 - np.exp(-t / tau_days))
    return float(value) if np.isscalar(t_days) else value


def bloch_excited_population(delta_a: float, gamma: float, s: float) -> float:
    """Two-level steady-state excited population for on-resonance saturation s.

    pe = (s/2) / (1 + s + (delta_a/gamma)^2); used as the closed-form oracle
    for the g = 0 limit of the master equation.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return (s / 2.0) / (1.0 + s + (delta_a / gamma) ** 2)
