"""Driven Jaynes-Cummings master equation: steady states, evolution, g2.

The frame rotates at the drive frequency, so the Hamiltonian reads

    H = -delta_a sp sm - delta_c a+ a + g (a+ sm + a sp) + Omega/2 (sp + sm)

with delta_a = omega - omega_a, delta_c = omega - omega_c. Collapse channels
are sqrt(2 kappa) a (photon energy decay 2 kappa) and sqrt(2 gamma) sm
(population decay Gamma = 2 gamma). Superoperators use column-stacking
vectorization: vec(A X B) = (B^T kron A) vec(X).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .detector import CorrelationCurve
from .linalg import (
    HilbertSpec,
    OperatorSet,
    SingularMatrixError,
    build_operators,
    dagger,
    expm,
    lu_factor,
    lu_solve,
    tensor,
)

DEFAULT_FOCK_CUTOFF = 9

HERMITICITY_TOL = 1e-9
TRACE_TOL = 1e-9
EIGENVALUE_FLOOR = -1e-9
STEADY_RESIDUAL_TOL = 1e-9   # on the Liouvillian scaled to unit max entry


class PhysicalityError(ValueError):
    """A density matrix violated its trace/hermiticity/positivity bounds."""


class VanishingDenominatorError(ValueError):
    """Normalization of g2 vanished (no excitation in the monitored mode)."""


@dataclass(frozen=True)
class SystemParams:
    """Physical rates and detunings of the ion-cavity-drive system (rad/s).

    s is the dimensionless on-resonance saturation parameter; the drive Rabi
    frequency follows as Omega = Gamma sqrt(s/2) with Gamma = 2 gamma.
    """

    g: float
    kappa: float
    gamma: float
    delta_a: float = 0.0
    delta_c: float = 0.0
    s: float = 0.0
    fock_cutoff: int = DEFAULT_FOCK_CUTOFF

    def __post_init__(self):
        if self.g < 0 or self.kappa < 0 or self.gamma < 0:
            raise ValueError("g, kappa and gamma must be nonnegative")
        if self.s < 0:
            raise ValueError("saturation parameter must be nonnegative")
        if self.fock_cutoff < 1:
            raise ValueError("fock_cutoff must be >= 1")

    @property
    def Gamma(self) -> float:
        """Population decay rate, twice the dipole decay rate."""
        return 2.0 * self.gamma

    @property
    def rabi(self) -> float:
        return self.Gamma * math.sqrt(self.s / 2.0)

    @property
    def cooperativity(self) -> float:
        if self.kappa <= 0 or self.gamma <= 0:
            raise ValueError("cooperativity undefined for kappa or gamma = 0")
        return self.g ** 2 / (2.0 * self.kappa * self.gamma)

    def with_(self, **changes) -> "SystemParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class EmissionRates:
    """Steady emission bookkeeping: rates in photons/s, populations bare."""

    p_cavity: float
    p_free: float
    n_bar: float
    excited_population: float

    @property
    def p_total(self) -> float:
        return self.p_cavity + self.p_free


def hilbert_spec(params: SystemParams) -> HilbertSpec:
    return HilbertSpec(fock_cutoff=params.fock_cutoff)


def hamiltonian(params: SystemParams, ops: OperatorSet) -> np.ndarray:
    """Drive-frame Hamiltonian (units of rad/s); Hermitian by construction."""
    omega = params.rabi
    h = (
        -params.delta_a * ops.pe_op
        - params.delta_c * ops.n_op
        + params.g * (ops.a_dag @ ops.sigma_minus + ops.a @ ops.sigma_plus)
        + 0.5 * omega * (ops.sigma_plus + ops.sigma_minus)
    )
    return h


def collapse_operators(params: SystemParams, ops: OperatorSet) -> list[np.ndarray]:
    return [
        math.sqrt(2.0 * params.kappa) * ops.a,
        math.sqrt(2.0 * params.gamma) * ops.sigma_minus,
    ]


def vectorize(rho: np.ndarray) -> np.ndarray:
    """Column-stacking vec: vec(rho)[i + D j] = rho[i, j]."""
    return rho.reshape(-1, order="F")


def unvectorize(v: np.ndarray) -> np.ndarray:
    d = int(round(math.sqrt(v.size)))
    return v.reshape(d, d, order="F")


def _superop(h: np.ndarray, collapse: list[np.ndarray]) -> np.ndarray:
    d = h.shape[0]
    eye = np.eye(d, dtype=complex)
    lv = -1j * (tensor(eye, h) - tensor(h.T, eye))
    for c in collapse:
        cdc = dagger(c) @ c
        lv += (
            tensor(c.conj(), c)
            - 0.5 * tensor(eye, cdc)
            - 0.5 * tensor(cdc.T, eye)
        )
    return lv


def liouvillian(params: SystemParams, ops: OperatorSet) -> np.ndarray:
    """Lindblad superoperator, dimension D^2 x D^2, column-stacking convention."""
    return _superop(hamiltonian(params, ops), collapse_operators(params, ops))


def _hamiltonian_commutator_term(op: np.ndarray) -> np.ndarray:
    d = op.shape[0]
    eye = np.eye(d, dtype=complex)
    return -1j * (tensor(eye, op) - tensor(op.T, eye))


@dataclass(frozen=True)
class LiouvillianTerms:
    """Detuning decomposition L = base + delta_a * term_a + delta_c * term_c.

    Sweeps over the detunings reuse the three fixed superoperators, which
    avoids rebuilding every tensor product at each sweep point.
    """

    base: np.ndarray
    term_a: np.ndarray
    term_c: np.ndarray

    def at(self, delta_a: float, delta_c: float) -> np.ndarray:
        return self.base + delta_a * self.term_a + delta_c * self.term_c


def liouvillian_terms(params: SystemParams, ops: OperatorSet) -> LiouvillianTerms:
    base = liouvillian(params.with_(delta_a=0.0, delta_c=0.0), ops)
    return LiouvillianTerms(
        base=base,
        term_a=-_hamiltonian_commutator_term(ops.pe_op),
        term_c=-_hamiltonian_commutator_term(ops.n_op),
    )


def check_density_matrix(
    rho: np.ndarray,
    herm_tol: float = HERMITICITY_TOL,
    trace_tol: float = TRACE_TOL,
    eig_floor: float = EIGENVALUE_FLOOR,
) -> None:
    """Raise PhysicalityError unless rho is a valid state within tolerance."""
    herm = np.abs(rho - dagger(rho)).max()
    if herm > herm_tol:
        raise PhysicalityError(f"hermiticity violation {herm:.3e} > {herm_tol:.1e}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise PhysicalityError(f"trace deviates from 1 by {abs(tr - 1.0):.3e}")
    lowest = np.linalg.eigvalsh(0.5 * (rho + dagger(rho))).min()
    if lowest < eig_floor:
        raise PhysicalityError(f"negative eigenvalue {lowest:.3e} < {eig_floor:.1e}")


def steady_state(lv: np.ndarray, check: bool = True) -> np.ndarray:
    """Steady density matrix of a Liouvillian with at least one decay channel.

    One row of the (scaled) superoperator is replaced by the trace functional
    and the resulting linear system is solved by pivoted elimination. The
    residual bound ||L vec(rho)|| <= 1e-9 is enforced on L scaled to unit
    maximum entry, which makes it dimensionless.
    """
    d2 = lv.shape[0]
    d = int(round(math.sqrt(d2)))
    scale = np.abs(lv).max()
    if scale == 0.0:
        raise SingularMatrixError("Liouvillian is zero; no decay channel present")
    scaled = lv / scale
    system = scaled.copy()
    system[0, :] = 0.0
    system[0, :: d + 1] = 1.0          # trace row in column-stacking order
    rhs = np.zeros(d2, dtype=complex)
    rhs[0] = 1.0
    try:
        factor = lu_factor(system)
    except SingularMatrixError as err:
        raise SingularMatrixError(
            f"steady-state system singular ({err}); "
            "check that a decay channel is present"
        ) from err
    x = lu_solve(factor, rhs)
    x += lu_solve(factor, rhs - system @ x)
    residual = np.linalg.norm(scaled @ x)
    if residual > STEADY_RESIDUAL_TOL:
        raise SingularMatrixError(
            f"steady-state residual {residual:.3e} exceeds {STEADY_RESIDUAL_TOL:.1e}"
        )
    rho = unvectorize(x)
    if check:
        check_density_matrix(rho)
    rho = 0.5 * (rho + dagger(rho))    # discard checked numerical skew
    return rho


def _real_expectation(op: np.ndarray, rho: np.ndarray, what: str) -> float:
    value = np.trace(op @ rho)
    if abs(value.imag) > 1e-10 * (1.0 + abs(value)):
        raise PhysicalityError(f"{what} expectation has imaginary part {value.imag:.3e}")
    return float(value.real)


def emission_rates(rho: np.ndarray, params: SystemParams, ops: OperatorSet) -> EmissionRates:
    """P_c = 2 kappa <a+ a>, P_free = Gamma <sp sm> for a validated state."""
    herm = np.abs(rho - dagger(rho)).max()
    if herm > HERMITICITY_TOL:
        raise PhysicalityError(f"emission_rates needs a Hermitian state ({herm:.3e})")
    n_bar = _real_expectation(ops.n_op, rho, "photon number")
    pe = _real_expectation(ops.pe_op, rho, "excited population")
    n_bar = max(n_bar, 0.0)
    pe = max(pe, 0.0)
    return EmissionRates(
        p_cavity=2.0 * params.kappa * n_bar,
        p_free=params.Gamma * pe,
        n_bar=n_bar,
        excited_population=pe,
    )


def evolve(lv: np.ndarray, rho0: np.ndarray, t: float, check: bool = True) -> np.ndarray:
    """Propagate: vec(rho(t)) = expm(L t) vec(rho0)."""
    if not (t >= 0.0 and math.isfinite(t)):
        raise ValueError(f"evolution time must be finite and nonnegative, got {t}")
    if t == 0.0:
        return rho0.copy()
    v = expm(lv * t) @ vectorize(rho0)
    rho = unvectorize(v)
    if check:
        tr = np.trace(rho)
        if abs(tr - 1.0) > TRACE_TOL:
            raise PhysicalityError(f"trace drifted to {tr} during evolution")
        herm = np.abs(rho - dagger(rho)).max()
        if herm > HERMITICITY_TOL:
            raise PhysicalityError(f"hermiticity drifted to {herm:.3e}")
    return rho


def _validate_tau_grid(tau_grid) -> np.ndarray:
    tau = np.asarray(tau_grid, dtype=float)
    if tau.ndim != 1 or tau.size == 0:
        raise ValueError("tau grid must be a nonempty 1-d array")
    if tau[0] < 0 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau grid must be sorted, nonnegative and strictly increasing")
    return tau


def _propagate_correlation(
    lv: np.ndarray, weight_row: np.ndarray, v0: np.ndarray, tau: np.ndarray
) -> np.ndarray:
    """Tr[W unvec(expm(L tau) v0)] for each tau, caching per-step propagators."""
    values = np.empty(tau.size)
    propagators: dict[float, np.ndarray] = {}
    v = v0
    prev = 0.0
    for k, t in enumerate(tau):
        dt = t - prev
        if dt > 0.0:
            key = round(float(dt), 18)
            if key not in propagators:
                propagators[key] = expm(lv * dt)
            v = propagators[key] @ v
        prev = t
        values[k] = (weight_row @ v).real
    return values


def g2_cavity(params: SystemParams, tau_grid) -> CorrelationCurve:
    """Normalized second-order correlation of the cavity output field.

    g2(tau) = Tr[a+ a expm(L tau)(a rho_ss a+)] / <a+ a>^2 via the quantum
    regression theorem. Values are reported raw (finite-delay values may
    exceed 1); tiny negative numerics are clipped by CorrelationCurve.
    """
    tau = _validate_tau_grid(tau_grid)
    ops = build_operators(hilbert_spec(params))
    lv = liouvillian(params, ops)
    rho_ss = steady_state(lv)
    n_bar = _real_expectation(ops.n_op, rho_ss, "photon number")
    if n_bar <= 1e-14:
        raise VanishingDenominatorError(
            f"no cavity excitation (n_bar = {n_bar:.3e}); g2 undefined"
        )
    seed = vectorize(ops.a @ rho_ss @ ops.a_dag)
    weight_row = vectorize(ops.n_op.T)
    values = _propagate_correlation(lv, weight_row, seed, tau) / n_bar ** 2
    return CorrelationCurve(tau, values)


def atom_g2(params: SystemParams, tau_grid) -> CorrelationCurve:
    """Two-level-only regression g2 with sm, sp in place of a, a+.

    Requires g = 0; the cavity is dropped entirely, so this is an independent
    oracle for g2_cavity in the fast-cavity limit (with Gamma -> Gamma').
    """
    if params.g != 0.0:
        raise ValueError("atom_g2 requires g = 0 (two-level system only)")
    tau = _validate_tau_grid(tau_grid)
    sm = np.array([[0, 1], [0, 0]], dtype=complex)
    sp = dagger(sm)
    h = -params.delta_a * (sp @ sm) + 0.5 * params.rabi * (sp + sm)
    lv = _superop(h, [math.sqrt(2.0 * params.gamma) * sm])
    rho_ss = steady_state(lv)
    pe = _real_expectation(sp @ sm, rho_ss, "excited population")
    if pe <= 1e-14:
        raise VanishingDenominatorError(
            f"no atomic excitation (pe = {pe:.3e}); g2 undefined"
        )
    seed = vectorize(sm @ rho_ss @ sp)
    weight_row = vectorize((sp @ sm).T)
    values = _propagate_correlation(lv, weight_row, seed, tau) / pe ** 2
    return CorrelationCurve(tau, values)


def steady_observables(params: SystemParams) -> EmissionRates:
    """Convenience: operators, Liouvillian and steady rates in one call."""
    ops = build_operators(hilbert_spec(params))
    rho = steady_state(liouvillian(params, ops))
    return emission_rates(rho, params, ops)


def truncation_shift(params: SystemParams, step: int = 2) -> dict[str, float]:
    """Relative change of every steady observable when N grows by `step`.

    The sweep commands run this when convergence checking is requested; all
    entries must stay below 1e-6 for the cutoff to count as converged.
    """
    base = steady_observables(params)
    grown = steady_observables(params.with_(fock_cutoff=params.fock_cutoff + step))
    shifts = {}
    for name in ("p_cavity", "p_free", "n_bar", "excited_population"):
        a = getattr(base, name)
        b = getattr(grown, name)
        denom = max(abs(a), abs(b))
        shifts[name] = abs(a - b) / denom if denom > 0 else 0.0
    return shifts
