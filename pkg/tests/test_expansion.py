import numpy as np
import pytest

from adiaprod import expansion as ex
from adiaprod import oracle
from adiaprod import oscillator as osc
from adiaprod import stark as st
from adiaprod import twolevel as tl
from adiaprod.errors import DegeneracyChange, LevelCrossing, SingularTransform
from adiaprod.linops import matrix_exp
from adiaprod.quadrature import cumulative_integral, fro_norms
from adiaprod.signals import HamiltonianSignal
from scenarios import (class1_acceptance, random_separated_matrix,
                       recurrence_oscillator, slow_generic_coeffs,
                       stark_linear)


def oscillator_signal(steps=2000, tau=1.0):
    return osc.hamiltonian_signal(recurrence_oscillator(tau), steps)


class TestTrackLevels:
    def test_constant_hamiltonian(self):
        rng = np.random.default_rng(1)
        M = random_separated_matrix(rng, 3)
        sig = HamiltonianSignal.constant(M, 1.0, 100)
        track = ex.track_levels(sig)
        for n in range(track.n_levels):
            assert np.max(np.abs(track.eigenvalues[n] - track.eigenvalues[n][0])) < 1e-12
            drift = np.max(np.abs(track.right[n] - track.right[n][0]))
            assert drift < 1e-12

    def test_oscillator_levels_do_not_reorder(self):
        sig = oscillator_signal()
        track = ex.track_levels(sig)
        w = 1.0 + 0.1 * np.sin(sig.grid)
        assert np.max(np.abs(track.eigenvalues[0] + w)) < 1e-10
        assert np.max(np.abs(track.eigenvalues[1] - w)) < 1e-10

    def test_overlap_continuity(self):
        sig = oscillator_signal()
        track = ex.track_levels(sig)
        for n in range(track.n_levels):
            steps = np.abs(np.diff(track.right[n][:, :, 0], axis=0))
            assert np.max(steps) < 10.0 * sig.dt

    def test_stark_track_matches_closed_form_projectors(self):
        s = stark_linear(tau=1.0)
        sig = st.hamiltonian_signal(s, 2000)
        track = ex.track_levels(sig)
        # compare gauge-invariant level projectors against closed forms
        for k in (0, 500, 1500, 2000):
            t = sig.grid[k]
            system = st.eigensystem(s, t)
            for n, lv in enumerate(system.levels):
                proj_closed = lv.right @ lv.left.conj().T
                proj = track.right[n][k] @ track.left[n][k].conj().T
                assert np.max(np.abs(proj - proj_closed)) < 1e-9

    def test_level_crossing_detected(self):
        def value(ts):
            out = np.zeros((len(ts), 2, 2), dtype=complex)
            out[:, 0, 0] = ts - 0.5
            out[:, 1, 1] = 0.5 - ts
            return out

        sig = HamiltonianSignal.from_function(2, 1.0, 100, value)
        with pytest.raises((LevelCrossing, DegeneracyChange)):
            ex.track_levels(sig)


class TestCouplings:
    def test_constant_hamiltonian_has_no_couplings(self):
        rng = np.random.default_rng(2)
        sig = HamiltonianSignal.constant(random_separated_matrix(rng, 2), 1.0, 50)
        track = ex.track_levels(sig)
        coup = ex.coupling_matrices(track)
        for n in range(2):
            for m in range(2):
                assert np.max(np.abs(coup.block(n, m))) < 1e-10

    def test_stark_couplings(self):
        s = stark_linear(tau=1.0)
        sig = st.hamiltonian_signal(s, 2000)
        track = ex.track_levels(sig, initial=st.eigensystem(s, 0.0))
        coup = ex.coupling_matrices(track, sig)
        A12 = coup.block(0, 1)  # level 0 is E=0, level 1 the degenerate one
        # anchored gauge at t = 0: A^{12}_{11}(0) = -thetadot exactly
        assert abs(A12[0, 0, 0] - (-0.3)) < 1e-6
        # along the track the magnitude is gauge-invariant
        assert np.max(np.abs(np.abs(A12[:, 0, 0]) - 0.3)) < 1e-6
        assert np.max(np.abs(A12[:, 0, 1])) < 1e-8

    def test_finite_difference_matches_dhdt_route(self):
        coeffs = tl.random_smooth_coeffs(3, tau=1.0, steps=1000)
        sig = coeffs.to_signal()
        track = ex.track_levels(sig)
        coup = ex.coupling_matrices(track, sig)
        assert coup.cross_defect is not None
        assert coup.cross_defect < 1e-6


class TestDynamicalFactor:
    def test_constant_hermitian(self):
        H = np.diag([1.5, -0.5]).astype(complex)
        sig = HamiltonianSignal.constant(H, 1.0, 100)
        track = ex.track_levels(sig)
        for n, E in enumerate([-0.5, 1.5]):
            K = ex.dynamical_factor(track, n)
            assert np.max(np.abs(K[:, 0, 0] - np.exp(-1j * E * sig.grid))) < 1e-12

    def test_stark_degenerate_factor(self):
        # K^n itself is gauge-dependent; the level-projected propagator
        # Psi_n(t) K^n(t) Phi_n(0)^H is not, so compare that
        s = stark_linear(tau=1.0)
        steps = 2000
        sig = st.hamiltonian_signal(s, steps)
        track = ex.track_levels(sig, initial=st.eigensystem(s, 0.0))
        adiab = st.adiabatic_propagator(s, steps)
        K2 = ex.dynamical_factor(track, 1)
        part_engine = np.einsum("kdc,kce,ef->kdf", track.right[1], K2,
                                track.left[1][0].conj().T)
        system0 = st.eigensystem(s, 0.0)
        worst = 0.0
        for k in (0, 700, 2000):
            system = st.eigensystem(s, sig.grid[k])
            part_closed = (system.levels[1].right @ adiab.k2[k]
                           @ system0.levels[1].left.conj().T)
            worst = max(worst, np.max(np.abs(part_engine[k] - part_closed)))
        assert worst < 1e-6
        assert np.allclose(K2[0], np.eye(2), atol=1e-12)


class TestAdiabaticPropagator:
    def test_constant_hamiltonian(self):
        rng = np.random.default_rng(4)
        M = random_separated_matrix(rng, 3)
        sig = HamiltonianSignal.constant(M, 1.0, 200)
        track = ex.track_levels(sig)
        u0, u0inv = ex.adiabatic_propagator(track)
        worst = max(np.max(np.abs(u0.values[k] - matrix_exp(-1j * M * sig.grid[k])))
                    for k in range(0, 201, 20))
        assert worst < 1e-10

    def test_inverse_consistency(self):
        sig = slow_generic_coeffs(1000).to_signal()
        track = ex.track_levels(sig)
        u0, u0inv = ex.adiabatic_propagator(track)
        prod = np.einsum("kij,kjl->kil", u0.values, u0inv.values)
        assert np.max(fro_norms(prod - np.eye(2))) < 1e-10

    def test_stark_u0_matches_closed_form(self):
        s = stark_linear(tau=1.0)
        steps = 20000
        sig = st.hamiltonian_signal(s, steps)
        track = ex.track_levels(sig)
        u0, _ = ex.adiabatic_propagator(track)
        closed = st.adiabatic_propagator(s, steps)
        assert np.max(fro_norms(u0.values - closed.u0.values)) < 1e-8


class TestCanonicalTransform:
    def test_identity_gauge(self):
        sig = oscillator_signal(500)
        out = ex.canonical_transform(
            sig, np.tile(np.eye(2, dtype=complex), (len(sig.grid), 1, 1)))
        assert np.max(fro_norms(out.sample() - sig.sample())) < 1e-12

    def test_scalar_phase_removes_trace(self):
        sig = HamiltonianSignal.constant(np.diag([2.0, 0.0]), 1.0, 400)
        tr = 2.0
        phase = np.exp(1j * tr * sig.grid / 2.0)
        g = phase[:, None, None] * np.eye(2)
        out = ex.canonical_transform(sig, g)
        mats = out.sample()
        # d/dt of the tabulated gauge is second order in the grid spacing
        assert np.max(np.abs(mats[:, 0, 0] + mats[:, 1, 1])) < 10.0 * sig.dt**2
        assert np.allclose(mats[len(mats) // 2], np.diag([1.0, -1.0]), atol=1e-5)

    def test_interaction_picture(self):
        # g = U^-1 of the exact propagator transforms H to ~0 up to the
        # second-order differencing of the tabulated gauge
        sig = slow_generic_coeffs(2000).to_signal()
        U = oracle.propagate(sig)
        out = ex.canonical_transform(sig, U.inverse())
        assert np.max(fro_norms(out.sample())) < 50.0 * sig.dt**2

    def test_singular_transform(self):
        sig = oscillator_signal(100)
        g = np.zeros((len(sig.grid), 2, 2), dtype=complex)
        with pytest.raises(SingularTransform):
            ex.canonical_transform(sig, g)


class TestAdiabaticStep:
    def test_constant_input_is_adiabatically_exact(self):
        rng = np.random.default_rng(6)
        sig = HamiltonianSignal.constant(random_separated_matrix(rng, 2), 1.0, 200)
        step = ex.adiabatic_step(sig)
        assert np.max(fro_norms(step.h1.sample())) < 1e-10

    def test_stark_h1_matches_closed_form(self):
        s = stark_linear(tau=1.0)
        steps = 20000
        sig = st.hamiltonian_signal(s, steps)
        step = ex.adiabatic_step(sig, initial=st.eigensystem(s, 0.0))
        closed = st.h1(s, steps).sample()
        assert np.max(fro_norms(step.h1.sample() - closed)) < 1e-8

    def test_class3_h1_matches_closed_form(self):
        coeffs = osc.to_twolevel(recurrence_oscillator(), 40000)
        step = ex.adiabatic_step(coeffs.to_signal())
        closed = tl.class3_step(coeffs).h1.matrices()
        assert np.max(fro_norms(step.h1.sample() - closed)) < 1e-8

    def test_two_routes_agree(self):
        sig = slow_generic_coeffs(2000).to_signal()
        step = ex.adiabatic_step(sig)  # raises ConsistencyError on failure
        assert step.route_defect < 1e-4


class TestExpand:
    def test_constant_terminates_immediately(self):
        rng = np.random.default_rng(8)
        for dim in (2, 3):
            sig = HamiltonianSignal.constant(random_separated_matrix(rng, dim),
                                             1.0, 200)
            res = ex.expand(sig, L_max=3)
            assert str(res.status) == "Terminated(0)"

    def test_class1_terminates_after_two_factors(self):
        sig = class1_acceptance().to_signal()
        res = ex.expand(sig, eps_trunc=1e-6, L_max=3)
        assert str(res.status) == "Terminated(1)"
        assert len(res.factors) == 2
        assert res.residual_norms[1] < 1e-9

    def test_class3_reports_cycle(self):
        sig = osc.to_twolevel(recurrence_oscillator(), 20000).to_signal()
        res = ex.expand(sig, L_max=4, eps_cycle=1e-5 * (1.0 + 2.0))
        assert str(res.status) == "Cyclic(2)"
        assert len(res.factors) == 2

    def test_generic_hits_the_cap(self):
        sig = slow_generic_coeffs(2000).to_signal()
        res = ex.expand(sig, L_max=3)
        assert str(res.status) == "Truncated(3)"
        assert len(res.factors) == 4
        assert len(res.residual_norms) == 4


class TestAssemble:
    def test_single_factor(self):
        sig = oscillator_signal(500)
        res = ex.expand(sig, L_max=0)
        table = ex.assemble(res)
        assert np.array_equal(table.values, res.factors[0].values)

    def test_identity_at_time_zero(self):
        sig = slow_generic_coeffs(500).to_signal()
        res = ex.expand(sig, L_max=1)
        assert np.array_equal(ex.assemble(res, 0.0), np.eye(2))

    def test_class1_assembly_matches_oracle(self):
        coeffs = class1_acceptance()
        sig = coeffs.to_signal()
        res = ex.expand(sig, eps_trunc=1e-6, L_max=3)
        ref = oracle.propagate(sig)
        err = np.max(fro_norms(ex.assemble(res).values - ref.values))
        assert err < 1e-6


class TestInvariants:
    def test_determinant_identity(self):
        # the midpoint path-ordering makes the assembled determinant honor
        # the Liouville identity to second order in the grid spacing
        defects = []
        for steps in (1000, 2000):
            coeffs = tl.random_smooth_coeffs(9, steps=steps)
            sig = coeffs.to_signal()
            res = ex.expand(sig, L_max=1)
            U = ex.assemble(res).values
            Hs = sig.sample()
            tr = Hs[:, 0, 0] + Hs[:, 1, 1]
            expected = np.exp(-1j * cumulative_integral(tr, sig.dt))
            defects.append(np.max(np.abs(np.linalg.det(U) - expected)))
            assert defects[-1] < 10.0 * sig.dt**2
        assert defects[0] / defects[1] > 3.0

    def test_hermitian_input_gives_unitary_u0(self):
        s = stark_linear(tau=1.0)
        sig = st.hamiltonian_signal(s, 2000)
        step = ex.adiabatic_step(sig)
        gram = np.einsum("kij,kil->kjl", step.u0.values.conj(), step.u0.values)
        assert np.max(np.abs(gram - np.eye(3))) < 1e-8

    def test_biorthonormality_along_track(self):
        sig = slow_generic_coeffs(500).to_signal()
        track = ex.track_levels(sig)
        for k in (0, 100, 499):
            system = track.system_at(k)
            assert system.biortho_defect() < 1e-9
            assert system.completeness_defect() < 1e-9
