import numpy as np
import pytest

from mfbcim.density_oracle import (
    FockOps,
    destroy,
    dissipator,
    innovation,
    ito_conditional_step,
    lindblad_rhs,
    quadrature_moments,
    run_conditional_paths,
    strat_conditional_step,
    strat_correction_measurement,
    strat_corrections_feedback,
    total_master_step,
    unconditional_rhs,
    validate_state,
)
from mfbcim.model import CimParams, RampSchedule


def random_density(rng, dim, support=None):
    """Random valid density matrix; optional support restriction to the lowest levels."""
    k = support or dim
    m = rng.normal(size=(k, k)) + 1j * rng.normal(size=(k, k))
    rho_small = m @ m.conj().T
    rho_small /= np.trace(rho_small).real
    rho = np.zeros((dim, dim), dtype=complex)
    rho[:k, :k] = rho_small
    return rho


def ch_index_sum(c, rho):
    """Brute-force Stratonovich measurement correction: -1/2 sum B dB/drho.

    Quadruple index sum over the matrix derivative of B = c rho + rho c^dag
    - <c+c^dag> rho; independent of the closed form under test.
    """
    d = rho.shape[0]
    eye = np.eye(d)
    t = c + c.conj().T
    big_t = np.trace(t @ rho)
    B = c @ rho + rho @ c.conj().T - big_t * rho
    dB = (
        np.einsum("im,jn->ijmn", c, eye)
        + np.einsum("im,nj->ijmn", eye, c.conj().T)
        - big_t * np.einsum("im,jn->ijmn", eye, eye)
        - np.einsum("ij,nm->ijmn", rho, t)
    )
    return -0.5 * np.einsum("mn,ijmn->ij", B, dB)


def fock(dim, k):
    rho = np.zeros((dim, dim), dtype=complex)
    rho[k, k] = 1.0
    return rho


class TestSuperoperators:
    def test_dissipator_vacuum(self):
        a = destroy(4)
        assert np.allclose(dissipator(a, fock(4, 0)), 0.0)

    def test_dissipator_one_photon(self):
        a = destroy(4)
        out = dissipator(a, fock(4, 1))
        expected = 2.0 * fock(4, 0) - 2.0 * fock(4, 1)
        assert np.allclose(out, expected)

    def test_dissipator_traceless(self, rng):
        a = destroy(6)
        rho = random_density(rng, 6)
        assert abs(np.trace(dissipator(a, rho))) < 1e-12

    def test_innovation_vacuum(self):
        a = destroy(4)
        assert np.allclose(innovation(a, fock(4, 0)), 0.0)

    def test_innovation_one_photon(self):
        a = destroy(4)
        out = innovation(a, fock(4, 1))
        expected = np.zeros((4, 4), dtype=complex)
        expected[0, 1] = 1.0
        expected[1, 0] = 1.0
        assert np.allclose(out, expected)

    def test_innovation_traceless(self, rng):
        a = destroy(6)
        for _ in range(5):
            rho = random_density(rng, 6)
            assert abs(np.trace(innovation(a, rho))) < 1e-12

    def test_innovation_requires_unit_trace(self, rng):
        a = destroy(4)
        with pytest.raises(ValueError):
            innovation(a, 2.0 * fock(4, 0))


class TestStratCorrections:
    def test_measurement_correction_vacuum_is_zero(self):
        # B(vacuum) = 0, so the correction vanishes identically; the
        # index-sum oracle agrees
        a = destroy(4)
        rho = fock(4, 0)
        assert np.allclose(strat_correction_measurement(a, rho), 0.0, atol=1e-14)
        assert np.allclose(ch_index_sum(a, rho), 0.0, atol=1e-14)

    def test_measurement_correction_matches_index_sum(self, rng):
        a = destroy(4)
        for _ in range(10):
            rho = random_density(rng, 4)
            closed = strat_correction_measurement(a, rho)
            brute = ch_index_sum(a, rho)
            assert np.max(np.abs(closed - brute)) < 1e-12

    def test_measurement_correction_traceless(self, rng):
        a = destroy(5)
        rho = random_density(rng, 5)
        assert abs(np.trace(strat_correction_measurement(a, rho))) < 1e-12

    def test_feedback_corrections_zero_k(self, rng):
        a = destroy(4)
        rho = random_density(rng, 4)
        hk, kh, kk = strat_corrections_feedback(a, np.zeros((4, 4)), rho)
        for term in (hk, kh, kk):
            assert np.allclose(term, 0.0)

    def test_hk_equals_kh_scalar_commutators(self, rng):
        # c = sqrt(2 gamma_m) a, K proportional to (a^dag - a): the
        # commutators are scalars away from the truncation boundary
        dim = 6
        a = destroy(dim)
        c = np.sqrt(0.2) * a
        k = (0.12 / np.sqrt(0.2)) * (a.conj().T - a)
        for _ in range(10):
            rho = random_density(rng, dim, support=3)
            hk, kh, _ = strat_corrections_feedback(c, k, rho)
            assert np.max(np.abs(hk - kh)) < 1e-10

    def test_kk_commutator_expansion(self, rng):
        dim = 5
        a = destroy(dim)
        k = 0.3 * (a.conj().T - a)
        rho = random_density(rng, dim)
        _, _, kk = strat_corrections_feedback(a, k, rho)
        expected = -0.5 * (k @ k @ rho - 2.0 * k @ rho @ k + rho @ k @ k)
        assert np.allclose(kk, expected, atol=1e-12)


DESK = CimParams(0.9, 0.1, 2.0, 0.5, zeta=0.3)


class TestConditionalSteps:
    def test_ito_reduces_to_deterministic(self, rng):
        ops = FockOps(1, 8, DESK.gamma_m)
        rho = random_density(rng, 8, support=4)
        J = np.zeros((1, 1))
        dt = 1e-4
        # dW = 0 and no feedback: pure Euler step of the adiabatic equation
        stepped = ito_conditional_step(rho, dt, np.zeros(1), 2.0, 0.0, DESK, ops, J)
        manual = rho + dt * lindblad_rhs(rho, 2.0, DESK, ops)
        assert np.allclose(stepped, manual, atol=1e-14)

    def test_vacuum_kills_stochastic_term(self):
        ops = FockOps(1, 8, DESK.gamma_m)
        rho = ops.vacuum()
        J = np.zeros((1, 1))
        with_noise = ito_conditional_step(rho, 1e-3, np.array([2.5]), 2.0, 0.0, DESK, ops, J)
        without = ito_conditional_step(rho, 1e-3, np.zeros(1), 2.0, 0.0, DESK, ops, J)
        assert np.allclose(with_noise, without, atol=1e-14)

    def test_strat_matches_deterministic_when_unmonitored(self):
        params = CimParams(1.0, 0.0, 2.0, 0.5)
        ops = FockOps(1, 10, params.gamma_m)
        J = np.zeros((1, 1))
        rho_s = ops.vacuum()
        rho_d = ops.vacuum()
        dt = 1e-3
        for k in range(100):
            rho_s = strat_conditional_step(rho_s, dt, np.zeros(1), 3.0, 0.0, params, ops, J)
            rho_d = total_master_step(rho_d, dt, 3.0, 0.0, params, ops, J)
        assert np.max(np.abs(rho_s - rho_d)) < 1e-6

    def test_vacuum_fixed_point_no_pump(self):
        ops = FockOps(1, 8, DESK.gamma_m)
        rho = ops.vacuum()
        J = np.zeros((1, 1))
        for k in range(50):
            rho = strat_conditional_step(rho, 1e-3, np.array([0.7]), 0.0, 0.0, DESK, ops, J)
        assert np.allclose(rho, ops.vacuum(), atol=1e-12)

    def test_conditional_average_matches_total(self):
        # small version of the operator-level consistency check
        params = DESK
        J = np.array([[1.0]])
        ops = FockOps(1, 10, params.gamma_m)
        sched = RampSchedule.constant(1.0, 2.0, params.zeta)
        n_steps = 500
        paths = run_conditional_paths(ops, params, sched, 2e-3, n_steps, 100, seed=12, J=J)
        rho_tot = ops.vacuum()
        for _ in range(n_steps):
            rho_tot = total_master_step(rho_tot, 2e-3, 2.0, params.zeta, params, ops, J)
        avg = paths.mean(axis=0)
        dists = [0.5 * np.abs(np.linalg.eigvalsh(p - rho_tot)).sum() for p in paths]
        err = 0.5 * np.abs(np.linalg.eigvalsh(avg - rho_tot)).sum()
        spread = np.sqrt(np.mean(np.square(dists)))
        assert err < 4.0 * spread / np.sqrt(100)


class TestTotalMaster:
    def test_zeta_zero_reduces_to_adiabatic(self, rng):
        ops = FockOps(1, 8, DESK.gamma_m)
        rho = random_density(rng, 8, support=4)
        full = unconditional_rhs(rho, 2.0, 0.0, DESK, ops, np.array([[1.0]]))
        bare = lindblad_rhs(rho, 2.0, DESK, ops)
        assert np.allclose(full, bare, atol=1e-14)

    def test_rhs_traceless_and_hermiticity(self, rng):
        params = DESK
        ops = FockOps(2, 5, params.gamma_m)
        J = np.array([[0.0, -1.0], [-1.0, 0.0]])
        rho = random_density(rng, 25, support=20)
        out = unconditional_rhs(rho, 2.0, 0.3, params, ops, J)
        assert abs(np.trace(out)) < 1e-12
        assert np.max(np.abs(out - out.conj().T)) < 1e-12

    def test_two_mode_anticorrelation(self):
        params = CimParams(0.9, 0.1, 2.0, 0.5, zeta=0.4)
        ops = FockOps(2, 6, params.gamma_m)
        J = np.array([[0.0, -1.0], [-1.0, 0.0]])
        rho = ops.vacuum()
        x1x2 = ops.x[0] @ ops.x[1]
        for _ in range(2000):
            rho = total_master_step(rho, 2e-3, 2.0, params.zeta, params, ops, J)
        corr = np.trace(x1x2 @ rho).real
        assert corr < -0.01
        validate_state(rho, atol_trace=1e-6)

    def test_trace_preserved(self):
        ops = FockOps(1, 12, DESK.gamma_m)
        rho = ops.vacuum()
        for _ in range(500):
            rho = total_master_step(rho, 1e-3, 4.0, 0.3, DESK, ops, np.array([[1.0]]))
        assert abs(np.trace(rho) - 1.0) < 1e-9


class TestMoments:
    def test_vacuum(self):
        ops = FockOps(1, 6, 0.1)
        x, x2, n = quadrature_moments(ops.vacuum(), ops)
        assert x[0] == pytest.approx(0.0, abs=1e-12)
        assert x2[0] == pytest.approx(1.0, abs=1e-12)
        assert n[0] == pytest.approx(0.0, abs=1e-12)

    def test_one_photon(self):
        ops = FockOps(1, 6, 0.1)
        x, x2, n = quadrature_moments(fock(6, 1), ops)
        assert x[0] == pytest.approx(0.0, abs=1e-12)
        assert x2[0] == pytest.approx(3.0, abs=1e-12)
        assert n[0] == pytest.approx(1.0, abs=1e-12)

    def test_transpose_symmetry(self, rng):
        ops = FockOps(1, 6, 0.1)
        m = rng.normal(size=(6, 6))
        rho = m @ m.T
        rho = (rho / np.trace(rho)).astype(complex)
        x1 = quadrature_moments(rho, ops)[0]
        x2 = quadrature_moments(rho.T.copy(), ops)[0]
        assert x1[0] == pytest.approx(x2[0], abs=1e-12)
