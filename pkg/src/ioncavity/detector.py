"""Detector-space transformations of ideal emission quantities.

Covers the counter timing jitter (Gaussian convolution of the correlation
function), the accidental-coincidence floor from dark counts, and the
photon rate leaving the fiber.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Negative correlation values beyond this magnitude are treated as data
# errors; smaller ones are numerical dust and clipped to zero.
NEGATIVE_TOL = 1e-10


@dataclass(frozen=True)
class CorrelationCurve:
    """Sampled g2(tau); tau may include negative delays by mirror symmetry."""

    tau: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    convolved: bool = False

    def __post_init__(self):
        tau = np.asarray(self.tau, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if tau.ndim != 1 or tau.shape != values.shape:
            raise ValueError("tau and values must be matching 1-d arrays")
        if tau.size and np.any(np.diff(tau) <= 0):
            raise ValueError("tau grid must be strictly increasing")
        if values.size and values.min() < -NEGATIVE_TOL:
            raise ValueError(f"negative correlation value {values.min():.3e}")
        values = np.where(values < 0.0, 0.0, values)
        tau.flags.writeable = False
        values.flags.writeable = False
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class DetectorModel:
    """Counter timing jitter (FWHM, seconds) and count rates (per detector)."""

    jitter_fwhm: float = 3.2e-9
    dark_rate: float = 0.0
    signal_rate: float = 0.0

    def __post_init__(self):
        if self.jitter_fwhm < 0 or self.dark_rate < 0 or self.signal_rate < 0:
            raise ValueError("jitter and rates must be nonnegative")


def _positive_half(curve: CorrelationCurve) -> tuple[np.ndarray, np.ndarray]:
    mask = curve.tau >= 0.0
    return curve.tau[mask], curve.values[mask]


def convolve_jitter(curve: CorrelationCurve, model: DetectorModel) -> CorrelationCurve:
    """Convolve g2 with a normalized Gaussian of the detector's FWHM.

    The curve is mirrored about tau = 0 before convolution, padded with the
    asymptotic value 1 at the far ends, and the kernel is truncated at
    +-5 sigma with its weights renormalized to unit sum. If the input grid
    is coarser than FWHM/8 it is resampled (linear interpolation) first.
    Returns the convolved curve on the full mirrored grid.
    """
    if curve.tau.size == 0:
        raise ValueError("empty correlation curve")
    tau, values = _positive_half(curve)
    if tau.size == 0:
        raise ValueError("correlation curve has no tau >= 0 samples")

    if model.jitter_fwhm == 0.0:
        full_tau, full_values = _mirror(tau, values)
        return CorrelationCurve(full_tau, full_values, convolved=True)

    spacing = np.diff(tau)
    max_step = spacing.max() if spacing.size else np.inf
    uniform = spacing.size and np.allclose(spacing, spacing[0], rtol=1e-9, atol=0.0)
    if max_step > model.jitter_fwhm / 8.0 or not uniform:
        step = model.jitter_fwhm / 16.0
        n = max(int(np.ceil(tau[-1] / step)), 2)
        new_tau = np.linspace(0.0, tau[-1], n + 1)
        values = np.interp(new_tau, tau, values)
        tau = new_tau

    full_tau, full_values = _mirror(tau, values)
    dt = tau[1] - tau[0]
    sigma = model.jitter_fwhm / np.sqrt(8.0 * np.log(2.0))
    half = int(np.ceil(5.0 * sigma / dt))
    offsets = np.arange(-half, half + 1) * dt
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()

    padded = np.concatenate(
        [np.full(half, 1.0), full_values, np.full(half, 1.0)]
    )
    smoothed = np.convolve(padded, kernel, mode="valid")
    return CorrelationCurve(full_tau, smoothed, convolved=True)


def _mirror(tau: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    if tau[0] == 0.0:
        full_tau = np.concatenate([-tau[:0:-1], tau])
        full_values = np.concatenate([values[:0:-1], values])
    else:
        full_tau = np.concatenate([-tau[::-1], tau])
        full_values = np.concatenate([values[::-1], values])
    return full_tau, full_values


def dark_count_floor(model: DetectorModel) -> float:
    """Accidental-coincidence offset of g2(0) from detector dark counts.

    With per-detector signal rate S and dark rate d, bin probabilities in a
    short window w are p_sig = S w and p_dark = d w. An antibunched source
    never fires both detectors in one bin, so coincidences come only from
    signal x dark and dark x dark pairs:

        g2_floor = (2 S d + d^2) / (S + d)^2 = (2 r + r^2) / (1 + r)^2

    with r = d / S, which is 2 r to leading order.
    """
    if model.signal_rate <= 0:
        raise ValueError("signal_rate must be positive to normalize the floor")
    r = model.dark_rate / model.signal_rate
    return (2.0 * r + r * r) / (1.0 + r) ** 2


def mirror_escape(transmission_ppm: float, loss_ppm: float) -> float:
    """Escape probability through one mirror of a symmetric two-mirror budget.

    escape = T / (2 (T + L)): the photon leaves through the detected mirror's
    transmission T out of the total round-trip budget 2 (T + L).
    """
    if transmission_ppm < 0 or loss_ppm < 0:
        raise ValueError("mirror budget must be nonnegative")
    total = transmission_ppm + loss_ppm
    if total == 0:
        raise ValueError("mirror budget cannot be all zero")
    return transmission_ppm / (2.0 * total)


def fiber_output_rate(p_cavity: float, escape: float, eta_fiber: float) -> float:
    """Photons per second leaving the fiber: P_c * escape * eta_fiber."""
    if p_cavity < 0:
        raise ValueError("cavity emission rate must be nonnegative")
    if not 0.0 <= escape <= 1.0 or not 0.0 <= eta_fiber <= 1.0:
        raise ValueError("escape and eta_fiber must lie in [0, 1]")
    return p_cavity * escape * eta_fiber
