"""Strict key-value configuration for the scenario commands.

Config files are UTF-8 text, one ``key = value`` pair per line, ``#`` starts
a comment. Every key has a default (the instrument's reference parameter
set); unknown keys are fatal so typos cannot silently change the physics.

Frequencies at this interface are linear (nu = omega / 2 pi): g, gamma and
detunings in MHz, kappa in GHz. Conversion to angular units happens once,
in `system_params`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace

from .analytic import CavityGeometry, EfficiencyChain
from .detector import DetectorModel
from .lindblad import SystemParams

MHZ = 2.0 * math.pi * 1e6
GHZ = 2.0 * math.pi * 1e9

SWEEP_VARIABLES = ("delta_c", "delta_a")


class ConfigError(ValueError):
    """Malformed configuration file or invalid parameter combination."""


@dataclass(frozen=True)
class ScenarioConfig:
    # system parameters (linear frequency units)
    g_mhz: float = 67.0
    kappa_ghz: float = 2.4
    gamma_mhz: float = 9.8
    delta_a_mhz: float = -9.8          # -Gamma/2 for the default gamma
    delta_c_mhz: float = 0.0
    saturation: float = 2.8
    fock_cutoff: int = 9

    # sweep layout
    sweep_variable: str = "delta_c"
    sweep_start_mhz: float = -14400.0  # -6 kappa
    sweep_stop_mhz: float = 7200.0     # +3 kappa
    sweep_points: int = 301

    # correlation scan
    tau_max_ns: float = 406.0          # about 50 / Gamma
    tau_points: int = 1024

    # detector model
    jitter_fwhm_ns: float = 3.2
    dark_rate_hz: float = 0.0
    signal_rate_hz: float = 0.0

    # cavity geometry and efficiency chain
    length_um: float = 150.0
    finesse: float = 209.0
    transmission_ppm: float = 1000.0
    loss_ppm: float = 500.0
    waist_um: float = 3.1
    eta_impedance: float = 0.033
    eta_mode_match: float = 0.5
    eta_path: float = 0.5
    eta_detector: float = 0.14
    fiber_transmission: float = 0.9

    # minima map layout
    minima_delta_a_start_mhz: float = -39.2    # -2 Gamma
    minima_delta_a_stop_mhz: float = 39.2
    minima_delta_a_points: int = 9
    minima_saturation: float = 0.05
    minima_sweep_points: int = 61
    minima_window_frac: float = 0.35

    # fitting
    poly_degree: int = 4

    def __post_init__(self):
        if self.sweep_points < 2:
            raise ConfigError("sweep_points must be >= 2")
        if not self.sweep_start_mhz < self.sweep_stop_mhz:
            raise ConfigError("sweep_start_mhz must be below sweep_stop_mhz")
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ConfigError(
                f"sweep_variable must be one of {SWEEP_VARIABLES}, "
                f"got {self.sweep_variable!r}"
            )
        if self.fock_cutoff < 1:
            raise ConfigError("fock_cutoff must be >= 1")
        if self.minima_saturation > 0.1:
            raise ConfigError(
                "minima_saturation must be <= 0.1 (weak drive keeps the "
                "interference-detuning formula comparable)"
            )
        if self.minima_delta_a_points < 2:
            raise ConfigError("minima_delta_a_points must be >= 2")
        if not 2 <= self.poly_degree <= 6:
            raise ConfigError("poly_degree must be in [2, 6]")
        if self.tau_points < 2 or self.tau_max_ns <= 0:
            raise ConfigError("tau grid needs tau_points >= 2 and tau_max_ns > 0")

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def system_params(self, **overrides) -> SystemParams:
        p = SystemParams(
            g=self.g_mhz * MHZ,
            kappa=self.kappa_ghz * GHZ,
            gamma=self.gamma_mhz * MHZ,
            delta_a=self.delta_a_mhz * MHZ,
            delta_c=self.delta_c_mhz * MHZ,
            s=self.saturation,
            fock_cutoff=self.fock_cutoff,
        )
        return p.with_(**overrides) if overrides else p

    def detector_model(self) -> DetectorModel:
        return DetectorModel(
            jitter_fwhm=self.jitter_fwhm_ns * 1e-9,
            dark_rate=self.dark_rate_hz,
            signal_rate=self.signal_rate_hz,
        )

    def geometry(self) -> CavityGeometry:
        return CavityGeometry(
            length=self.length_um * 1e-6,
            finesse=self.finesse,
            transmission_ppm=self.transmission_ppm,
            loss_ppm=self.loss_ppm,
            waist=self.waist_um * 1e-6,
        )

    def efficiency_chain(self) -> EfficiencyChain:
        return EfficiencyChain(
            eta_impedance=self.eta_impedance,
            eta_mode_match=self.eta_mode_match,
            eta_path=self.eta_path,
            eta_detector=self.eta_detector,
        )

    def resolved(self) -> dict[str, object]:
        """Every key with its effective value, for self-describing outputs."""
        return {f.name: getattr(self, f.name) for f in fields(self)}


_FIELD_TYPES = {f.name: f.type for f in fields(ScenarioConfig)}


def _parse_value(key: str, raw: str, line_no: int):
    kind = _FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError as err:
        raise ConfigError(f"line {line_no}: bad value for {key}: {raw!r}") from err


def parse_config(text: str) -> ScenarioConfig:
    """Parse config text; unknown keys and repeated keys are fatal."""
    values: dict[str, object] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"line {line_no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {line_no}: repeated key {key!r}")
        values[key] = _parse_value(key, raw, line_no)
    try:
        return ScenarioConfig(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as err:
        raise ConfigError(str(err)) from err


def load_config(path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
