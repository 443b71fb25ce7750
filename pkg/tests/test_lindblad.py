import math

import numpy as np
import pytest

from ioncavity.analytic import bloch_excited_population
from ioncavity.detector import CorrelationCurve
from ioncavity.linalg import SingularMatrixError, build_operators, dagger
from ioncavity.lindblad import (
    PhysicalityError,
    SystemParams,
    VanishingDenominatorError,
    atom_g2,
    check_density_matrix,
    collapse_operators,
    emission_rates,
    evolve,
    g2_cavity,
    hamiltonian,
    hilbert_spec,
    liouvillian,
    steady_observables,
    steady_state,
    truncation_shift,
    unvectorize,
    vectorize,
)

# dimensionless test rates: Gamma = 1, fast cavity
GAMMA = 0.5
KAPPA = 50.0


def params(**kw):
    defaults = dict(g=0.0, kappa=KAPPA, gamma=GAMMA, fock_cutoff=2)
    defaults.update(kw)
    return SystemParams(**defaults)


def paper_params(**kw):
    two_pi = 2 * math.pi
    defaults = dict(
        g=two_pi * 67e6, kappa=two_pi * 2.4e9, gamma=two_pi * 9.8e6,
        fock_cutoff=6,
    )
    defaults.update(kw)
    return SystemParams(**defaults)


class TestParams:
    def test_derived_quantities(self):
        p = params(g=1.0, s=2.0)
        assert p.Gamma == 2 * GAMMA
        assert p.rabi == pytest.approx(p.Gamma)  # s=2 -> Omega = Gamma
        assert p.cooperativity == pytest.approx(1.0 / (2 * KAPPA * GAMMA))

    def test_validation(self):
        with pytest.raises(ValueError):
            params(g=-1.0)
        with pytest.raises(ValueError):
            params(s=-0.1)
        with pytest.raises(ValueError):
            params(fock_cutoff=0)

    def test_paper_cooperativity(self):
        assert paper_params().cooperativity == pytest.approx(0.0954, abs=2e-4)


class TestHamiltonian:
    def test_diagonal_limit(self):
        p = params(g=0.0, s=0.0, delta_a=0.7, delta_c=2.0, fock_cutoff=2)
        ops = build_operators(hilbert_spec(p))
        h = hamiltonian(p, ops)
        assert np.count_nonzero(h - np.diag(np.diag(h))) == 0
        expected = -p.delta_a * np.diag(ops.pe_op) - p.delta_c * np.diag(ops.n_op)
        assert np.allclose(np.diag(h), expected, atol=1e-15)

    def test_jc_coupling_block(self):
        p = params(g=0.8, fock_cutoff=1)
        ops = build_operators(hilbert_spec(p))
        h = hamiltonian(p, ops)
        # atom-first basis |g0>,|g1>,|e0>,|e1>: coupling only |e0> <-> |g1>
        expected = np.zeros((4, 4))
        expected[1, 2] = expected[2, 1] = p.g
        assert np.allclose(h, expected, atol=1e-15)

    def test_vacuum_rabi_splitting(self):
        p = params(g=1.3, fock_cutoff=1)
        ops = build_operators(hilbert_spec(p))
        eigs = np.linalg.eigvalsh(hamiltonian(p, ops))
        assert eigs.min() == pytest.approx(-p.g, rel=1e-12)
        assert eigs.max() == pytest.approx(p.g, rel=1e-12)

    def test_exact_hermiticity(self):
        p = params(g=0.9, s=3.0, delta_a=-0.3, delta_c=1.1)
        ops = build_operators(hilbert_spec(p))
        h = hamiltonian(p, ops)
        assert np.array_equal(h, dagger(h))


class TestLiouvillian:
    def test_no_dynamics(self):
        p = SystemParams(g=0.0, kappa=0.0, gamma=0.0, fock_cutoff=1)
        ops = build_operators(hilbert_spec(p))
        lv = liouvillian(p, ops)
        mixed = vectorize(np.eye(4, dtype=complex) / 4.0)
        assert np.allclose(lv @ mixed, 0.0, atol=1e-15)

    def test_two_level_decay_eigenvalue(self):
        p = params(s=0.0)
        ops = build_operators(hilbert_spec(p))
        lv = liouvillian(p.with_(kappa=0.0), ops)
        eigs = np.linalg.eigvals(lv)
        gamma_total = p.Gamma
        assert np.min(np.abs(eigs + gamma_total)) < 1e-12

    def test_trace_preservation_row(self):
        p = params(g=1.1, s=4.0, delta_a=0.4, delta_c=-0.8)
        ops = build_operators(hilbert_spec(p))
        lv = liouvillian(p, ops)
        d = ops.identity.shape[0]
        trace_row = vectorize(np.eye(d, dtype=complex))
        assert np.abs(trace_row @ lv).max() < 1e-12 * np.abs(lv).max()

    def test_collapse_rates(self):
        p = params(g=0.3)
        ops = build_operators(hilbert_spec(p))
        c_kappa, c_gamma = collapse_operators(p, ops)
        assert np.allclose(dagger(c_kappa) @ c_kappa,
                           2 * p.kappa * ops.n_op, rtol=1e-12)
        assert np.allclose(dagger(c_gamma) @ c_gamma,
                           2 * p.gamma * ops.pe_op, rtol=1e-12)


class TestSteadyState:
    def test_vacuum_without_drive(self):
        p = params(g=0.6, s=0.0)
        ops = build_operators(hilbert_spec(p))
        rho = steady_state(liouvillian(p, ops))
        expected = np.zeros_like(rho)
        expected[0, 0] = 1.0
        assert np.allclose(rho, expected, atol=1e-12)

    def test_resonant_bloch(self):
        rates = steady_observables(params(s=14.0))
        assert rates.excited_population == pytest.approx(14 / 30, abs=1e-10)

    def test_detuned_bloch(self):
        p = params(s=14.0)
        rates = steady_observables(p.with_(delta_a=-p.Gamma / 2))
        assert rates.excited_population == pytest.approx(7 / 16, abs=1e-10)

    def test_random_bloch_pairs(self):
        rng = np.random.default_rng(42)
        p0 = params(fock_cutoff=1)
        for _ in range(25):
            delta = rng.uniform(-3, 3)
            s = rng.uniform(1e-3, 25)
            pe = steady_observables(p0.with_(delta_a=delta, s=s)).excited_population
            assert pe == pytest.approx(
                bloch_excited_population(delta, GAMMA, s), abs=1e-10)

    def test_no_decay_is_singular(self):
        p = SystemParams(g=0.5, kappa=0.0, gamma=0.0, s=1.0, fock_cutoff=1)
        ops = build_operators(hilbert_spec(p))
        with pytest.raises(SingularMatrixError):
            steady_state(liouvillian(p, ops))

    def test_state_is_physical(self):
        p = paper_params(delta_a=-paper_params().Gamma / 2, s=2.8)
        ops = build_operators(hilbert_spec(p))
        rho = steady_state(liouvillian(p, ops))
        check_density_matrix(rho)  # trace, hermiticity, positivity bounds


class TestEmissionRates:
    def test_vacuum_rates(self):
        p = params(g=0.6, s=0.0)
        ops = build_operators(hilbert_spec(p))
        rho = steady_state(liouvillian(p, ops))
        rates = emission_rates(rho, p, ops)
        assert rates.p_cavity == 0.0
        assert rates.p_free == 0.0
        assert rates.p_total == 0.0

    def test_decoupled_cavity_stays_dark(self):
        rates = steady_observables(params(g=0.0, s=5.0))
        assert rates.p_cavity <= 1e-12
        assert rates.n_bar <= 1e-14

    def test_nbar_tracks_excited_population(self):
        # fast-cavity relation n_bar = (C0 Gamma / kappa) pe, good to O(Gamma/kappa)
        p = paper_params(s=2.8)
        rates = steady_observables(p)
        expected = p.cooperativity * p.Gamma / p.kappa * rates.excited_population
        assert rates.n_bar == pytest.approx(expected, rel=0.02)

    def test_rejects_non_hermitian(self):
        p = params()
        ops = build_operators(hilbert_spec(p))
        rho = np.eye(ops.identity.shape[0], dtype=complex) / ops.identity.shape[0]
        rho[0, 1] = 0.5
        with pytest.raises(PhysicalityError):
            emission_rates(rho, p, ops)


class TestEvolve:
    def test_zero_time_identity(self):
        p = params(g=0.4, s=1.0)
        ops = build_operators(hilbert_spec(p))
        lv = liouvillian(p, ops)
        rho = steady_state(lv)
        assert np.array_equal(evolve(lv, rho, 0.0), rho)

    def test_excited_state_decay(self):
        p = params(s=0.0, fock_cutoff=1)
        ops = build_operators(hilbert_spec(p))
        lv = liouvillian(p.with_(kappa=0.0), ops)
        rho0 = np.zeros((4, 4), dtype=complex)
        rho0[2, 2] = 1.0  # |e, 0>
        gamma_total = p.Gamma
        t = 1.0 / gamma_total
        rho_t = evolve(lv, rho0, t)
        assert rho_t[2, 2].real == pytest.approx(math.exp(-1.0), abs=1e-8)

    def test_steady_state_is_fixed_point(self):
        p = params(g=0.7, s=3.0, delta_a=0.2)
        ops = build_operators(hilbert_spec(p))
        lv = liouvillian(p, ops)
        rho = steady_state(lv)
        rho_t = evolve(lv, rho, 7.3)
        assert np.abs(rho_t - rho).max() < 1e-8

    def test_trace_and_hermiticity_along_evolution(self):
        p = params(g=0.9, s=6.0, delta_a=-0.4, delta_c=0.6)
        ops = build_operators(hilbert_spec(p))
        lv = liouvillian(p, ops)
        rho = np.zeros_like(ops.identity)
        rho[2, 2] = 1.0
        for t in (0.03, 0.3, 3.0, 30.0):
            rho_t = evolve(lv, rho, t)
            assert abs(np.trace(rho_t) - 1.0) < 1e-9
            assert np.abs(rho_t - dagger(rho_t)).max() < 1e-9

    def test_negative_time_rejected(self):
        p = params()
        ops = build_operators(hilbert_spec(p))
        lv = liouvillian(p, ops)
        with pytest.raises(ValueError):
            evolve(lv, np.eye(6, dtype=complex) / 6, -1.0)


def exact_resonant_g2(tau, gamma_total, omega):
    d = np.emath.sqrt((gamma_total / 4) ** 2 - omega ** 2)
    return (1 - np.exp(-3 * gamma_total * tau / 4)
            * (np.cosh(d * tau) + 3 * gamma_total / (4 * d) * np.sinh(d * tau))).real


class TestAtomG2:
    def test_zero_delay_antibunching(self):
        curve = atom_g2(params(s=3.0), np.linspace(0, 5, 11))
        assert curve.values[0] == 0.0

    def test_weak_drive_limit(self):
        # the (1 - exp(-Gamma tau / 2))^2 limit carries O(s) error, so the
        # 1e-3 comparison needs s small enough
        p = params(s=0.002, fock_cutoff=1)
        tau = np.linspace(0.0, 12.0, 60)
        dev = np.abs(atom_g2(p, tau).values
                     - (1 - np.exp(-p.Gamma * tau / 2)) ** 2)
        assert dev.max() < 1e-3

    def test_exact_closed_form(self):
        p = params(s=0.01, fock_cutoff=1)
        tau = np.linspace(0.0, 12.0, 60)
        dev = np.abs(atom_g2(p, tau).values
                     - exact_resonant_g2(tau, p.Gamma, p.rabi))
        assert dev.max() < 1e-11

    def test_saturated_drive_oscillates_above_one(self):
        curve = atom_g2(params(s=14.0), np.linspace(0, 8.0, 160))
        assert curve.values.max() > 1.0

    def test_long_delay_factorizes(self):
        p = params(s=14.0)
        curve = atom_g2(p, np.array([0.0, 50.0 / p.Gamma]))
        assert curve.values[-1] == pytest.approx(1.0, abs=1e-3)

    def test_requires_two_level(self):
        with pytest.raises(ValueError, match="two-level"):
            atom_g2(params(g=0.5), np.array([0.0, 1.0]))

    def test_no_drive_is_undefined(self):
        with pytest.raises(VanishingDenominatorError):
            atom_g2(params(s=0.0), np.array([0.0, 1.0]))


class TestCavityG2:
    def test_fast_cavity_matches_two_level_oracle(self):
        # cavity locked to the atom, fast cavity: full-model g2 equals the
        # two-level result with Gamma -> Gamma (2 C0 + 1) within 2%
        p = paper_params(s=2.8, fock_cutoff=4)
        p = p.with_(delta_a=-p.Gamma / 2, delta_c=-p.Gamma / 2)
        tau = np.linspace(0.0, 10.0 / p.Gamma, 120)
        full = g2_cavity(p, tau)
        c0 = p.cooperativity
        gamma_eff = p.gamma * (1 + 2 * c0)
        s_eff = p.s / (1 + 2 * c0) ** 2  # same Rabi drive, new linewidth
        oracle = atom_g2(
            SystemParams(g=0.0, kappa=p.kappa, gamma=gamma_eff,
                         delta_a=p.delta_a, s=s_eff, fock_cutoff=1),
            tau,
        )
        scale = oracle.values.max()
        assert np.abs(full.values - oracle.values).max() <= 0.02 * scale

    def test_vanishing_denominator(self):
        with pytest.raises(VanishingDenominatorError):
            g2_cavity(params(g=0.5, s=0.0), np.array([0.0, 1.0]))

    def test_tau_grid_validation(self):
        with pytest.raises(ValueError):
            g2_cavity(paper_params(s=1.0), np.array([-1.0, 0.0]))
        with pytest.raises(ValueError):
            g2_cavity(paper_params(s=1.0), np.array([1.0, 0.5]))

    def test_returns_curve_type(self):
        p = paper_params(s=2.8, fock_cutoff=3)
        p = p.with_(delta_a=-p.Gamma / 2, delta_c=-p.Gamma / 2)
        curve = g2_cavity(p, np.linspace(0, 2e-8, 10))
        assert isinstance(curve, CorrelationCurve)
        assert not curve.convolved

    def test_zero_delay_strongly_antibunched(self):
        # the cavity output keeps a small two-photon admixture, so unlike
        # the pure two-level case g2(0) is not exactly zero; at the fast-
        # cavity operating point it stays below 1e-3
        p = paper_params(s=14.0, fock_cutoff=4)
        p = p.with_(delta_a=-p.Gamma, delta_c=-p.Gamma)
        curve = g2_cavity(p, np.array([0.0, 1e-9]))
        assert curve.values[0] <= 1e-3


class TestTruncation:
    def test_paper_point_is_converged(self):
        p = paper_params(s=2.8, fock_cutoff=6)
        p = p.with_(delta_a=-p.Gamma / 2)
        shifts = truncation_shift(p)
        assert max(shifts.values()) < 1e-6

    def test_vectorization_roundtrip(self):
        rng = np.random.default_rng(1)
        m = rng.standard_normal((5, 5)) + 1j * rng.standard_normal((5, 5))
        assert np.array_equal(unvectorize(vectorize(m)), m)
        # column stacking: first D entries are the first column
        assert np.array_equal(vectorize(m)[:5], m[:, 0])
