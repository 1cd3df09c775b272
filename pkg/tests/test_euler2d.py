import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cxeuler.errors import InvalidFitWindow, ResolutionExhausted
from cxeuler.euler2d import (
    SolverConfig,
    VorticityState,
    analytic_data,
    biot_savart,
    diagnostics,
    from_shear,
    illposedness_signature,
    integrate,
    linear_growth_check,
    step,
    to_shear,
    velocity_grid,
    vorticity_rhs,
)
from cxeuler.fourier import FourierField
from cxeuler.shear import ShearState
from cxeuler.shear import integrate as shear_integrate


def LOOSE(K, dt=1e-3):
    # tail detector off: these checks are about the dynamics, not resolution
    return SolverConfig(K=K, dt=dt, tail_threshold=1.0)


def wavevectors(K):
    ks = np.arange(-K, K + 1)
    return np.meshgrid(ks, ks, indexing="ij")


class TestBiotSavart:
    def test_single_mode(self):
        # omega = e^{i x1}: psi = -e^{i x1}, u = (-psi_2, psi_1) = (0, -i e^{i x1})
        om = FourierField.from_modes(2, 2, {(1, 0): 1.0})
        u = biot_savart(om)
        np.testing.assert_allclose(u.coeff((1, 0)), [0.0, -1j], atol=1e-16)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1))
    def test_divergence_free_and_curl(self, seed):
        rng = np.random.default_rng(seed)
        st_ = analytic_data(6, rng)
        u = biot_savart(st_.omega, st_.mean_u).coeffs
        k1, k2 = wavevectors(6)
        # exact in real arithmetic; the two integer products round independently
        scale = np.hypot(k1, k2) * np.linalg.norm(u, axis=0)
        assert np.all(np.abs(k1 * u[0] + k2 * u[1]) <= 4 * np.finfo(float).eps * scale)
        curl = 1j * k1 * u[1] - 1j * k2 * u[0]
        np.testing.assert_allclose(curl, st_.omega.coeffs[0], atol=1e-15)

    def test_zero_vorticity_is_constant_flow(self):
        u = biot_savart(FourierField.zeros(2, 3), (1 + 2j, -0.5))
        assert np.count_nonzero(u.coeffs) == 2
        np.testing.assert_array_equal(u.coeff((0, 0)), [1 + 2j, -0.5])

    def test_nonzero_mean_rejected(self):
        with pytest.raises(ValueError):
            biot_savart(FourierField.from_modes(2, 2, {(0, 0): 1.0}))


class TestRhs:
    def test_steady_constant_flow(self):
        st_ = VorticityState(FourierField.zeros(2, 8), np.array([0.3 - 1j, 2.0]))
        dw, dm = vorticity_rhs(st_)
        assert not np.any(dw.coeffs)
        assert not np.any(dm)

    def test_real_data_keeps_mean(self):
        st_ = analytic_data(8, np.random.default_rng(1), real=True, sigma=1.0)
        _, dm = vorticity_rhs(st_, LOOSE(8))
        assert np.abs(dm).max() < 1e-15

    def test_mean_equation_by_quadrature(self):
        # d/dt mean(u_k) = i Im mean(conj(u_l) d_k u_l), evaluated on a fine grid
        st_ = analytic_data(6, np.random.default_rng(2), sigma=0.8)
        _, dm = vorticity_rhs(st_, LOOSE(6))
        K, M = 6, 40
        u = biot_savart(st_.omega, np.zeros(2)).coeffs
        k1, k2 = wavevectors(K)
        from cxeuler.fourier import to_grid

        ug = to_grid(u, K, M, 2)
        expected = []
        for kk in (k1, k2):
            du = to_grid(1j * kk * u, K, M, 2)
            expected.append(1j * np.mean(np.sum(np.conj(ug) * du, axis=0)).imag)
        np.testing.assert_allclose(dm, expected, atol=1e-14)

    def test_tail_check(self):
        st_ = VorticityState.from_modes(8, {(8, 0): 1.0, (1, 0): 1.0})
        with pytest.raises(ResolutionExhausted) as exc:
            vorticity_rhs(st_, SolverConfig(K=8))
        # velocity energy: 1/64 at (8, 0) against 1 at (1, 0)
        assert exc.value.tail == pytest.approx((1 / 64) / (1 + 1 / 64), rel=1e-12)


class TestConfig:
    def test_negative_dt(self):
        with pytest.raises(ValueError, match="dt"):
            SolverConfig(dt=-1e-3)

    def test_small_cutoff(self):
        with pytest.raises(ValueError, match="K"):
            SolverConfig(K=3)


class TestStep:
    def test_zero_fixed_point(self):
        st_ = VorticityState(FourierField.zeros(2, 6), np.zeros(2))
        new = step(st_, SolverConfig(K=6))
        assert not np.any(new.omega.coeffs) and not np.any(new.mean_u)

    def test_richardson_order(self):
        st0 = analytic_data(16, np.random.default_rng(3), amplitude=0.5, sigma=0.8)
        T = 0.4

        def run(dt):
            return integrate(st0, LOOSE(16, dt), T, sample_every=10**6).states[-1].omega.coeffs

        a, b, c = run(0.02), run(0.01), run(0.005)
        order = math.log2(np.abs(a - b).max() / np.abs(b - c).max())
        assert order >= 3.8

    def test_divergence_free_after_steps(self):
        st_ = analytic_data(12, np.random.default_rng(4))
        traj = integrate(st_, LOOSE(12, 1e-2), 0.2, sample_every=5)
        k1, k2 = wavevectors(12)
        for s in traj.states:
            u = biot_savart(s.omega, s.mean_u).coeffs
            scale = np.hypot(k1, k2) * np.linalg.norm(u, axis=0)
            assert np.all(np.abs(k1 * u[0] + k2 * u[1]) <= 4 * np.finfo(float).eps * scale)

    def test_real_data_stays_real(self):
        st_ = analytic_data(16, np.random.default_rng(5), amplitude=0.5, sigma=1.5, real=True)
        traj = integrate(st_, SolverConfig(K=16, dt=1e-3), 1.0, sample_every=250)
        for s in traj.states:
            assert np.abs(velocity_grid(s).imag).max() <= 1e-12


class TestDiagnostics:
    def test_real_data_enstrophy(self):
        st_ = analytic_data(8, np.random.default_rng(6), real=True)
        d = diagnostics(st_)
        assert abs(d.enstrophy.imag) < 1e-15
        assert d.enstrophy.real > 0
        assert d.enstrophy.real == pytest.approx(d.enstrophy_hermitian, rel=1e-13)

    def test_single_mode_enstrophy_vanishes(self):
        d = diagnostics(VorticityState.from_modes(4, {(1, 0): 1.0}))
        assert d.enstrophy == 0
        assert d.enstrophy_hermitian == 1.0

    def test_casimir_against_fine_grid(self):
        st_ = analytic_data(5, np.random.default_rng(7))
        from cxeuler.fourier import to_grid

        w = to_grid(st_.omega.coeffs[0], 5, 64, 2)
        assert diagnostics(st_).casimir3 == pytest.approx(np.mean(w**3), abs=1e-16)

    def test_conservation_short_run(self):
        st_ = analytic_data(24, np.random.default_rng(8))
        traj = integrate(st_, LOOSE(24), 0.3, sample_every=100)
        for name in ("energy", "enstrophy", "casimir3"):
            s = traj.series(name)
            assert np.abs(s - s[0]).max() / abs(s[0]) <= 1e-6
        m = traj.series("mean_re")
        assert np.abs(m - m[0]).max() <= 1e-6 * np.linalg.norm(m[0])


class TestGrowth:
    def test_unstable_mode(self):
        g = linear_growth_check((-1j, 0), (1, 0))
        assert g.predicted == 1.0
        assert g.within(0.01)

    def test_decaying_mode(self):
        g = linear_growth_check((-1j, 0), (-1, 0))
        assert g.predicted == -1.0
        assert g.within(0.01)

    def test_real_flow_oscillates(self):
        g = linear_growth_check((0.7, -0.2), (1, 1), T=2.0)
        assert g.predicted == 0.0
        assert abs(g.measured) < 1e-6

    def test_nonlinear_window_rejected(self):
        with pytest.raises(InvalidFitWindow):
            linear_growth_check((-1j, 0), (1, 0), delta=1e-1)


class TestShearConsistency:
    def test_round_trip(self):
        s = ShearState.from_modes(0.3, {1: 0.2, -2: 0.1j})
        assert np.allclose(to_shear(from_shear(s)).bk, s.bk)

    def test_rejects_x2_dependence(self):
        with pytest.raises(ValueError):
            to_shear(VorticityState.from_modes(4, {(1, 1): 1.0}))

    def test_trajectories_agree(self):
        rng = np.random.default_rng(9)
        modes = {k: 0.3 * complex(rng.standard_normal(), rng.standard_normal()) / k**2
                 for k in range(-5, 6) if k}
        s = ShearState.from_modes(0.4, modes, K=16)
        sh = shear_integrate(s, 1.0, 1e-3, sample_every=100)
        tr = integrate(from_shear(s), SolverConfig(K=16, dt=1e-3), 1.0, sample_every=100)
        for a, b in zip(sh.states, tr.states):
            back = to_shear(b, atol=1e-10)
            assert abs(back.q - a.q) <= 1e-8
            assert np.abs(back.bk - a.bk).max() <= 1e-8


@pytest.mark.slow
def test_exhaustion_time_falls_with_cutoff():
    times = illposedness_signature(K_list=(32, 64, 128))
    vals = [times[K] for K in (32, 64, 128)]
    assert all(v is not None for v in vals)
    assert vals[0] > vals[1] > vals[2]
