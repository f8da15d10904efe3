import numpy as np
import pytest

from couette_lab.domain import DomainConfig, SpectralGrid, SpectralGrid2D
from couette_lab.errors import StepSizeError
from couette_lab.linear import evolve_zero_modes
from couette_lab.streak import (
    StreakState, run_streak, state_from_velocity, step_streak, streak_rhs,
    taylor_green, velocities,
)


@pytest.fixture(scope="module")
def grid2():
    return SpectralGrid2D(2.0, 1.0, 32, 32)


def random_state(grid2, seed, amp, nu):
    rng = np.random.default_rng(seed)
    omega = grid2.dealias(grid2.forward(rng.standard_normal(grid2.shape_real))) * amp
    omega = np.where(grid2.k2 > 0, omega, 0.0)
    u1 = grid2.dealias(grid2.forward(rng.standard_normal(grid2.shape_real))) * amp
    return StreakState(omega, u1, 0.0, nu)


class TestRhs:
    def test_zero_velocity_pure_heat_on_u1(self, grid2):
        # omega = 0 forces no advection and no lift-up source
        rng = np.random.default_rng(0)
        u1 = grid2.dealias(grid2.forward(rng.standard_normal(grid2.shape_real)))
        st = StreakState(np.zeros_like(u1), u1, 0.0, 1e-2)
        domega, du1 = streak_rhs(grid2, st)
        # the u1-gradient cross terms cancel in the curl up to FFT roundoff
        assert np.max(np.abs(domega)) < 1e-12
        assert np.max(np.abs(du1)) < 1e-13

    def test_taylor_green_is_advection_free(self, grid2):
        omega, _, _ = taylor_green(grid2, 0.7)
        st = StreakState(omega, np.zeros_like(omega), 0.0, 0.0)
        domega, _ = streak_rhs(grid2, st)
        assert np.max(np.abs(domega)) <= 1e-13 * np.max(np.abs(omega))

    def test_matches_convolution_8x8(self):
        g = SpectralGrid2D(1.0, 1.0, 8, 8)
        st = random_state(g, 1, 0.5, 0.0)
        domega, du1 = streak_rhs(g, st)

        # brute-force convolution of -(u.grad omega) and -(u.grad u1) - u2
        u2, u3 = velocities(g, st.omega)

        def conv_adv(target):
            full = lambda c: np.fft.fft2(g.inverse(c)) / g.n_total
            w_y = full(1j * g.ky * target)
            w_z = full(1j * g.kz * target)
            a2 = full(u2)
            a3 = full(u3)
            idx = np.fft.fftfreq(8, 1 / 8).astype(int)
            out = np.zeros((8, 8), complex)
            for i1 in range(8):
                for j1 in range(8):
                    if max(abs(idx[i1]), abs(idx[j1])) > 2:
                        continue
                    shift = (idx[i1], idx[j1])
                    out += a2[i1, j1] * np.roll(w_y, shift, axis=(0, 1))
                    out += a3[i1, j1] * np.roll(w_z, shift, axis=(0, 1))
            band = (np.abs(idx)[:, None] <= 2) & (np.abs(idx)[None, :] <= 2)
            return np.where(band, -out, 0.0)[:, :5]

        target_omega = conv_adv(st.omega)
        target_u1 = conv_adv(st.u1) - u2
        scale = max(np.max(np.abs(target_omega)), 1e-30)
        assert np.max(np.abs(domega - target_omega)) <= 1e-12 * scale
        assert np.max(np.abs(du1 - target_u1)) <= 1e-12 * scale


class TestStep:
    def test_taylor_green_exact_decay_64(self):
        g = SpectralGrid2D(2.0, 1.0, 64, 64)
        omega, _, _ = taylor_green(g, 0.01)
        nu = 0.01
        st = StreakState(omega.copy(), np.zeros_like(omega), 0.0, nu)
        dt, T = 0.01, 1.0
        for _ in range(int(T / dt)):
            st = step_streak(g, st, dt)
        lam = nu * ((2 * np.pi / g.Ly) ** 2 + (2 * np.pi / g.Lz) ** 2)
        exact = omega * np.exp(-lam * T)
        err = np.max(np.abs(st.omega - exact)) / np.max(np.abs(exact))
        assert err <= 1e-6

    def test_dt_halving_fourth_order(self, grid2):
        results = []
        for dt, n in ((0.02, 25), (0.01, 50), (0.005, 100)):
            st = random_state(grid2, 2, 0.3, 1e-3)
            for _ in range(n):
                st = step_streak(grid2, st, dt)
            results.append(np.concatenate([st.omega.ravel(), st.u1.ravel()]))
        e1 = np.max(np.abs(results[0] - results[1]))
        e2 = np.max(np.abs(results[1] - results[2]))
        assert 11 < e1 / e2 < 21

    def test_zero_state_stays_zero(self, grid2):
        st = StreakState(np.zeros(grid2.shape_spec, complex),
                         np.zeros(grid2.shape_spec, complex), 0.0, 1e-3)
        out = step_streak(grid2, st, 0.05)
        assert np.all(out.omega == 0) and np.all(out.u1 == 0)

    def test_cfl_violation_raises(self, grid2):
        st = random_state(grid2, 3, 50.0, 1e-3)
        with pytest.raises(StepSizeError):
            step_streak(grid2, st, 1.0)

    def test_incompressibility_and_mean_pinned(self, grid2):
        st = random_state(grid2, 4, 0.2, 1e-3)
        for _ in range(20):
            st = step_streak(grid2, st, 0.01)
        u2, u3 = velocities(grid2, st.omega)
        div = np.abs(1j * grid2.ky * u2 + 1j * grid2.kz * u3)
        assert div.max() <= 1e-12 * max(grid2.l2_norm(u2), 1e-30)
        assert abs(u2[0, 0]) == 0.0 and abs(u3[0, 0]) == 0.0

    def test_enstrophy_nonincreasing(self, grid2):
        st = random_state(grid2, 5, 0.4, 5e-3)
        ens = [grid2.l2_norm(st.omega) ** 2]
        for _ in range(80):
            st = step_streak(grid2, st, 0.005)
            ens.append(grid2.l2_norm(st.omega) ** 2)
        diffs = np.diff(ens)
        assert np.all(diffs <= 1e-12 * ens[0])


class TestRun:
    def test_zero_data_zero_forever(self, grid2):
        st = StreakState(np.zeros(grid2.shape_spec, complex),
                         np.zeros(grid2.shape_spec, complex), 0.0, 1e-3)
        rec = run_streak(grid2, st, 2.0, out_interval=0.5)
        assert all(r["u1_L2"] == 0.0 and r["enstrophy"] == 0.0 for r in rec.rows)
        assert rec.flag == "completed"

    def test_liftup_matches_linear_prediction(self, grid2):
        # amplitude 1e-6 data: u1 follows the zero-mode linear formula to 1e-4
        delta, nu = 1e-6, 1e-3
        st = random_state(grid2, 6, 1.0, nu)
        scale = delta / max(grid2.l2_norm(st.u1), grid2.l2_norm(st.omega))
        st = StreakState(st.omega * scale, st.u1 * scale, 0.0, nu)
        u2, u3 = velocities(grid2, st.omega)
        u_in = np.array([st.u1, u2, u3])
        rec = run_streak(grid2, st.copy(), 10.0, dt_max=0.02, out_interval=10.0)
        final = rec.final_state
        pred = evolve_zero_modes(u_in, 10.0, nu, grid2.k2)
        err = grid2.l2_norm(final.u1 - pred[0]) / grid2.l2_norm(pred[0])
        assert err <= 1e-4

    def test_u1_growth_tracks_eps_over_nu_scaling(self, grid2):
        # sup_t |u1| / (eps * min(t, heat time)) stays bounded
        nu, eps = 2e-3, 1e-5
        st = random_state(grid2, 7, 1.0, nu)
        u2, u3 = velocities(grid2, st.omega)
        norm0 = np.sqrt(grid2.l2_norm(st.u1) ** 2 + grid2.l2_norm(u2) ** 2
                        + grid2.l2_norm(u3) ** 2)
        scale = eps / norm0
        st = StreakState(st.omega * scale, st.u1 * scale, 0.0, nu)
        rec = run_streak(grid2, st, 20.0, dt_max=0.05, out_interval=1.0)
        lam_min = (2 * np.pi / grid2.Ly) ** 2
        for row in rec.rows[1:]:
            cap = eps * min(row["t"], 1.0 / (nu * lam_min))
            assert row["u1_L2"] <= 10.0 * cap + 2 * eps


class TestStateFromVelocity:
    def test_omega_consistency(self, grid2):
        rng = np.random.default_rng(8)
        phi = grid2.dealias(grid2.forward(rng.standard_normal(grid2.shape_real)))
        u2 = 1j * grid2.kz * phi
        u3 = -1j * grid2.ky * phi
        st = state_from_velocity(grid2, np.zeros_like(phi), u2, u3, 0.0, 1e-3)
        v2, v3 = velocities(grid2, st.omega)
        assert np.max(np.abs(v2 - u2)) <= 1e-12 * max(np.max(np.abs(u2)), 1e-30)
        assert np.max(np.abs(v3 - u3)) <= 1e-12 * max(np.max(np.abs(u3)), 1e-30)
