import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm
from scipy.optimize import curve_fit

from spincavity.hilbert import collective_jx
from spincavity.model import (
    LambdaParams,
    ModelError,
    SimParams,
    build_driven_hamiltonian,
    build_effective_hamiltonian,
    build_lambda_hamiltonian,
    build_neglected_terms,
    build_raman_hamiltonian,
    build_rotated_hamiltonian,
    effective_eta,
)
from spincavity.engine import PropagationSettings, propagate

TWO_PI = 2 * math.pi


def preset_lambda(delta=TWO_PI * 0.1, G=TWO_PI * 1.0, Omega_L=TWO_PI * 0.5,
                  Delta=TWO_PI * 20.0):
    return LambdaParams.from_detunings(
        G=G, Omega_L=Omega_L, Delta=Delta, delta=delta,
        omega_c=TWO_PI * 4.70632e5, omega_10=TWO_PI * 2.88,
    )


def preset_params(N=2, **kw):
    base = dict(N=N, eta=TWO_PI * 0.05, delta=TWO_PI * 0.1, Omega=TWO_PI * 0.6, n_max=4)
    base.update(kw)
    return SimParams(**base)


class TestSimParams:
    def test_validation(self):
        with pytest.raises(ModelError):
            SimParams(N=0, eta=1.0, delta=1.0)
        with pytest.raises(ModelError, match="delta"):
            SimParams(N=1, eta=1.0, delta=-1.0)
        with pytest.raises(ModelError, match="eta"):
            SimParams(N=1, eta=-0.1, delta=1.0)
        with pytest.raises(ModelError, match="eta_j"):
            SimParams(N=2, eta=1.0, delta=1.0, eta_j=(1.0,))

    def test_derived_detunings(self):
        lp = preset_lambda()
        assert lp.Delta == pytest.approx(TWO_PI * 20.0, rel=1e-10)
        assert lp.delta_raman == pytest.approx(TWO_PI * 0.1, rel=1e-9)
        assert lp.omega_e1 == pytest.approx(lp.omega_e0 - lp.omega_10, rel=1e-12)


class TestEffectiveEta:
    def test_preset_value(self):
        # far-detuned limit: 2 G Omega_L / Delta = 2*pi*0.05 rad/ns
        p = preset_params(N=1, lambda_params=preset_lambda())
        eta = effective_eta(p)[0]
        assert eta == pytest.approx(TWO_PI * 0.05, rel=6e-3)

    def test_zero_detuning_exact(self):
        p = preset_params(N=3, lambda_params=preset_lambda(delta=0.0))
        etas = effective_eta(p)
        assert len(etas) == 3
        lp = p.lambda_params
        assert etas[0] == pytest.approx(2 * lp.G * lp.Omega_L / lp.Delta, rel=1e-12)

    def test_zero_coupling(self):
        p = preset_params(N=1, lambda_params=preset_lambda(G=0.0))
        assert effective_eta(p)[0] == 0.0

    def test_singular_denominator(self):
        p = preset_params(N=1, lambda_params=preset_lambda(Delta=0.0))
        with pytest.raises(ModelError, match="singular"):
            effective_eta(p)


class TestLambdaHamiltonian:
    def test_zero_couplings_zero_hamiltonian(self):
        p = preset_params(N=1, lambda_params=preset_lambda(G=0.0, Omega_L=0.0))
        rec = build_lambda_hamiltonian(p)
        assert np.all(rec.matrix_at(0.37) == 0.0)

    def test_matrix_entries_at_t0(self):
        p = preset_params(N=1, n_max=2, lambda_params=preset_lambda())
        rec = build_lambda_hamiltonian(p)
        h0 = rec.matrix_at(0.0)
        lay = p.lambda_layout()
        lp = p.lambda_params
        # cavity leg: G*sqrt(n) at (|e, n-1>, |0, n>)
        assert h0[lay.index_of([2], 0), lay.index_of([0], 1)] == pytest.approx(lp.G)
        assert h0[lay.index_of([2], 1), lay.index_of([0], 2)] == pytest.approx(lp.G * np.sqrt(2))
        # laser leg: Omega_L at (|e, n>, |1, n>)
        assert h0[lay.index_of([2], 1), lay.index_of([1], 1)] == pytest.approx(lp.Omega_L)

    def test_hermitian_at_random_times(self):
        p = preset_params(N=1, n_max=2, lambda_params=preset_lambda())
        rec = build_lambda_hamiltonian(p)
        for t in np.random.default_rng(5).uniform(0, 3, 10):
            h = rec.matrix_at(t)  # raises on non-Hermitian
            assert np.max(np.abs(h - h.conj().T)) <= 1e-12 * np.max(np.abs(h))

    def test_raman_rate_matches_coupling_formula(self):
        """Two-photon resonance flop rate equals the coupling formula eta.

        The detuning-corrected rate w*sqrt(contrast) of the |0,1> <-> |1,0>
        oscillation lands on 1.0x the coupling formula (within adiabaticity
        corrections), pinning the calibration of the three-level oracle.
        """
        lp = preset_lambda(delta=0.0)
        p = SimParams(N=1, eta=TWO_PI * 0.05, delta=TWO_PI * 0.1, n_max=2,
                      lambda_params=lp)
        eta_formula = effective_eta(p)[0]
        rec = build_lambda_hamiltonian(p)
        lay = p.lambda_layout()
        psi0 = lay.basis_state([0], 1)
        idx = lay.index_of([1], 0)
        t_end = 1.6 * TWO_PI / eta_formula
        ts = np.linspace(0, t_end, 401)
        res = propagate(rec, psi0, 0, t_end, PropagationSettings(rel_tol=1e-10), times=ts)
        pops = np.array([abs(s[idx]) ** 2 for s in res.states])

        def model(t, c, w, ph, off):
            return off + c * np.cos(w * t + ph)

        (c, w, _, _), _ = curve_fit(model, ts, pops,
                                    p0=[-np.ptp(pops) / 2, eta_formula, 0.0, pops.mean()])
        rate = abs(w) * math.sqrt(min(2 * abs(c), 1.0))
        assert rate == pytest.approx(eta_formula, rel=0.05)


class TestRamanHamiltonian:
    def test_phase_cancellation_time(self):
        # at t = phi/delta the envelope is 1: H = eta (a J+ + a+ J-)
        p = preset_params(N=2, phi=0.8)
        rec = build_raman_hamiltonian(p)
        t_star = p.phi / p.delta
        h = rec.matrix_at(t_star)
        lay = p.qubit_layout()
        from spincavity.hilbert import fock_ops, site_transition
        a, _ = fock_ops(lay)
        jplus = (site_transition(lay, 1, 1, 0) + site_transition(lay, 2, 1, 0)).matrix
        expected = p.eta * (a.matrix @ jplus)
        expected = expected + expected.conj().T
        assert np.max(np.abs(h - expected)) <= 1e-12

    def test_matrix_element_carries_phase(self):
        p = preset_params(N=1, phi=0.3)
        rec = build_raman_hamiltonian(p)
        lay = p.qubit_layout()
        h0 = rec.matrix_at(0.0)
        elem = h0[lay.index_of([1], 0), lay.index_of([0], 1)]
        assert elem == pytest.approx(p.eta * np.exp(1j * p.phi), rel=1e-12)

    @settings(max_examples=20, deadline=None)
    @given(st.floats(0.0, 50.0, allow_nan=False))
    def test_hermitian(self, t):
        rec = build_raman_hamiltonian(preset_params(N=2))
        h = rec.matrix_at(t)
        assert np.max(np.abs(h - h.conj().T)) == 0.0


class TestDrivenHamiltonian:
    def test_no_drive_equals_raman(self):
        p = preset_params(N=2, Omega=0.0)
        h1 = build_driven_hamiltonian(p)
        h2 = build_raman_hamiltonian(p)
        for t in (0.0, 0.7, 2.3):
            assert np.array_equal(h1.matrix_at(t), h2.matrix_at(t))

    def test_zero_coupling_is_pure_drive(self):
        p = preset_params(N=2, eta=0.0)
        rec = build_driven_hamiltonian(p)
        lay = p.qubit_layout()
        jx = collective_jx(lay).matrix
        for t in (0.0, 1.1):
            assert np.max(np.abs(rec.matrix_at(t) - p.Omega * jx)) == 0.0

    def test_drive_dominates_norm_at_presets(self):
        p = preset_params(N=2)
        lay = p.qubit_layout()
        drive = p.Omega * collective_jx(lay).matrix
        rest = build_driven_hamiltonian(p).matrix_at(0.0) - drive
        assert np.linalg.norm(drive, 2) > 3.0 * np.linalg.norm(rest, 2)

    def test_uniform_eta_j_bitwise_identical(self):
        p_uniform = preset_params(N=3)
        p_list = preset_params(N=3, eta_j=(TWO_PI * 0.05,) * 3)
        for t in (0.0, 0.9):
            assert np.array_equal(
                build_driven_hamiltonian(p_uniform).matrix_at(t),
                build_driven_hamiltonian(p_list).matrix_at(t),
            )


class TestEffectiveHamiltonian:
    def test_phase_pi_negates(self):
        p = preset_params(N=2)
        h0 = build_effective_hamiltonian(p, phi=0.0)
        hpi = build_effective_hamiltonian(p, phi=math.pi)
        for t in (0.0, 0.31, 4.7):
            assert np.max(np.abs(h0.matrix_at(t) + hpi.matrix_at(t))) <= 1e-14

    def test_commutes_with_jx(self):
        p = preset_params(N=2)
        rec = build_effective_hamiltonian(p)
        jx = collective_jx(p.qubit_layout()).matrix
        for t in (0.0, 1.3):
            h = rec.matrix_at(t)
            assert np.max(np.abs(h @ jx - jx @ h)) <= 1e-13

    def test_ladder_element_scales_sqrt_n(self):
        # in the J_x eigenbasis, <m=1, n-1|H(0)|m=1, n> = eta*sqrt(n)
        p = preset_params(N=2)
        rec = build_effective_hamiltonian(p, phi=0.0)
        h0 = rec.matrix_at(0.0)
        f = p.fock_dim
        plus = np.array([1, 1]) / np.sqrt(2)
        mpp = np.kron(np.kron(plus, plus), np.eye(f))  # rows: m=+1 sector
        block = mpp @ h0 @ mpp.T
        for n in (1, 2, 3):
            assert block[n - 1, n] == pytest.approx(p.eta * np.sqrt(n), rel=1e-12)


class TestNeglectedTerms:
    def test_split_identity_100_times(self):
        p = preset_params(N=2, phi=0.4)
        h2 = build_rotated_hamiltonian(p)
        h3 = build_effective_hamiltonian(p)
        hn = build_neglected_terms(p)
        rng = np.random.default_rng(11)
        worst = 0.0
        for t in rng.uniform(0.0, 30.0, 100):
            d = h2.matrix_at(t) - h3.matrix_at(t) - hn.matrix_at(t)
            worst = max(worst, float(np.max(np.abs(d))))
        assert worst <= 1e-12

    def test_zero_drive_reduces_to_sigma_y_form(self):
        # Omega=0, phi=0: H_n(t) = (i eta/2) a e^{-i delta t} sum_j (-sigma_y^j) + h.c.
        p = preset_params(N=2, Omega=0.0)
        rec = build_neglected_terms(p, phi=0.0)
        lay = p.qubit_layout()
        from spincavity.hilbert import SIGMA_Y, embed_site_op, fock_ops
        a, _ = fock_ops(lay)
        sy = embed_site_op(lay, 1, SIGMA_Y).matrix + embed_site_op(lay, 2, SIGMA_Y).matrix
        for t in (0.0, 0.8):
            term = (1j * p.eta / 2.0) * np.exp(-1j * p.delta * t) * (a.matrix @ (-sy))
            expected = term + term.conj().T
            assert np.max(np.abs(rec.matrix_at(t) - expected)) <= 1e-13

    @settings(max_examples=15, deadline=None)
    @given(st.floats(0.0, 40.0, allow_nan=False))
    def test_hermitian(self, t):
        rec = build_neglected_terms(preset_params(N=2))
        h = rec.matrix_at(t)
        assert np.max(np.abs(h - h.conj().T)) == 0.0


class TestFrameEquivalence:
    def test_propagator_factorization(self):
        # U_driven(t) = exp(-i Omega Jx t) U_rotated(t)
        p = preset_params(N=1, n_max=5)
        lay = p.qubit_layout()
        jx = collective_jx(lay).matrix
        t = 2.0
        s = PropagationSettings(rel_tol=1e-10)
        u1 = propagate(build_driven_hamiltonian(p, phi=0.0), None, 0, t, s).final_propagator
        u2 = propagate(build_rotated_hamiltonian(p, phi=0.0), None, 0, t, s).final_propagator
        frame = expm(-1j * p.Omega * t * jx)
        assert np.max(np.abs(u1 - frame @ u2)) <= 1e-7
