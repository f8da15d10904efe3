import numpy as np
import pytest

from couette_lab.config import SimConfig
from couette_lab.domain import DomainConfig, SpectralGrid, SpectralGrid2D
from couette_lab.errors import RemapScheduleError, StepSizeError
from couette_lab.linear import LinearPropagator
from couette_lab.solver3d import (
    NonlinearState, nonlinear_rhs, q_fields, remap, run_simulation, step,
)
from couette_lab.streak import StreakState, state_from_velocity, step_streak, velocities


@pytest.fixture(scope="module")
def grid():
    return SpectralGrid(DomainConfig(Nx=16, Ny=16, Nz=16))


def div_free_data(grid, seed=0, t=0.0):
    rng = np.random.default_rng(seed)
    u = np.array([grid.forward(rng.standard_normal(grid.shape_real)) for _ in range(3)])
    u = grid.project_div_free(grid.dealias(u), t)
    norm = np.sqrt(sum(grid.l2_norm(c) ** 2 for c in u))
    return u / norm


class TestRhs:
    def test_zero_state(self, grid):
        u = np.zeros((3,) + grid.shape_spec, complex)
        assert np.max(np.abs(nonlinear_rhs(grid, u, 1.0))) == 0.0

    def test_x_independent_matches_streak_rhs(self, grid):
        g2 = SpectralGrid2D.from_domain(grid.config)
        rng = np.random.default_rng(1)
        omega = g2.dealias(g2.forward(rng.standard_normal(g2.shape_real))) * 0.1
        omega = np.where(g2.k2 > 0, omega, 0.0)
        u1 = g2.dealias(g2.forward(rng.standard_normal(g2.shape_real))) * 0.1
        u2, u3 = velocities(g2, omega)
        u = np.zeros((3,) + grid.shape_spec, complex)
        u[0][0], u[1][0], u[2][0] = u1, u2, u3

        from couette_lab.streak import streak_rhs
        N = nonlinear_rhs(grid, u, 3.7)
        dom2, du1_2 = streak_rhs(g2, StreakState(omega, u1, 3.7, 0.0))
        dom3 = 1j * (grid.eta_eff(3.7)[0] * N[2][0] - grid.kz[0] * N[1][0])
        scale = max(np.max(np.abs(dom2)), 1e-30)
        assert np.max(np.abs(dom3 - dom2)) <= 1e-10 * scale
        assert np.max(np.abs(N[0][0] - du1_2)) <= 1e-10 * scale
        assert max(np.max(np.abs(grid.nonzero_part(c))) for c in N) <= 1e-14

    def test_tiny_amplitude_matches_linearized(self, grid):
        delta = 1e-8
        u = delta * div_free_data(grid, 2)
        t = 1.3
        N = nonlinear_rhs(grid, u, t)
        ee = grid.eta_eff(t)
        lap = grid.kx**2 + ee**2 + grid.kz**2
        lap_safe = np.where(lap > 0, lap, 1.0)
        lin = np.empty_like(u)
        lin[0] = -u[1] + 2 * grid.kx**2 * u[1] / lap_safe
        lin[1] = 2 * grid.kx * ee * u[1] / lap_safe
        lin[2] = 2 * grid.kx * grid.kz * u[1] / lap_safe
        lin[1] = np.where(grid.mi == 0, 0.0, lin[1])
        lin[2] = np.where(grid.mi == 0, 0.0, lin[2])
        lin[0] = np.where(grid.mi == 0, -u[1], lin[0])
        err = np.max(np.abs(N - lin))
        assert err <= 10 * delta * np.max(np.abs(u)) / delta**0  # O(delta^2) rel O(delta)
        assert err / np.max(np.abs(u)) <= 1e-6


class TestStep:
    def test_tiny_amplitude_matches_linear_propagator(self, grid):
        delta, nu, T, dt = 1e-8, 1e-3, 1.0, 0.01
        u = delta * div_free_data(grid, 3)
        st = NonlinearState(u.copy(), 0.0, nu)
        for _ in range(int(T / dt)):
            st = step(grid, st, dt)
        lin = LinearPropagator(grid, u, nu, quad_dt=0.001).evolve(T)
        assert np.max(np.abs(st.u - lin)) / np.max(np.abs(lin)) <= 1e-5

    def test_dt_halving_fourth_order(self, grid):
        u0 = 0.05 * div_free_data(grid, 4)
        outs = []
        for dt, n in ((0.02, 25), (0.01, 50), (0.005, 100)):
            st = NonlinearState(u0.copy(), 0.0, nu=0.0)
            for _ in range(n):
                st = step(grid, st, dt)
            outs.append(st.u)
        e1 = np.max(np.abs(outs[0] - outs[1]))
        e2 = np.max(np.abs(outs[1] - outs[2]))
        assert 11 < e1 / e2 < 21

    def test_inviscid_energy_budget(self, grid):
        u0 = 0.3 * div_free_data(grid, 5)
        st = NonlinearState(u0, 0.0, nu=0.0)

        def energy(s):
            return 0.5 * sum(grid.l2_norm(c) ** 2 for c in s.u)

        def production(s):
            return grid.inner(s.u[0], s.u[1])

        dt = 1e-3
        half = step(grid, st, dt / 2)
        full = step(grid, st, dt)
        resid = abs((energy(full) - energy(st))
                    + dt * (production(st) + 4 * production(half) + production(full)) / 6)
        assert resid / dt <= 1e-6

    def test_divergence_and_reality_invariants(self, grid):
        st = NonlinearState(0.1 * div_free_data(grid, 6), 0.0, nu=1e-3)
        for _ in range(20):
            st = step(grid, st, 0.02)
        scale = np.sqrt(sum(grid.l2_norm(c) ** 2 for c in st.u))
        assert np.max(np.abs(grid.divergence(st.u, st.t))) <= 1e-10 * scale
        # reality: rfft layout plus real inverse round trip
        for c in st.u:
            f = grid.inverse(c)
            assert np.max(np.abs(grid.forward(f) - c)) <= 1e-13 * np.max(np.abs(c))

    def test_cfl_violation_raises(self, grid):
        st = NonlinearState(50.0 * div_free_data(grid, 7), 0.0, nu=1e-3)
        with pytest.raises(StepSizeError):
            step(grid, st, 1.0)

    def test_q_fields_consistency(self, grid):
        st = NonlinearState(div_free_data(grid, 8), 1.7, nu=1e-3, remaps=0)
        q = q_fields(grid, st)
        back = np.where(grid.lap_L(st.t) > 0, -q / np.where(grid.lap_L(st.t) > 0,
                                                            grid.lap_L(st.t), 1.0), 0.0)
        nz = grid.lap_L(st.t) > 0
        assert np.max(np.abs(np.where(nz, back - st.u, 0.0))) <= 1e-12


class TestRemap:
    def test_k0_modes_unchanged(self, grid):
        u = np.zeros((3,) + grid.shape_spec, complex)
        rng = np.random.default_rng(9)
        u[0][0] = SpectralGrid2D.from_domain(grid.config).dealias(
            SpectralGrid2D.from_domain(grid.config).forward(
                rng.standard_normal((grid.Ny, grid.Nz))))
        st = NonlinearState(u.copy(), grid.t_remap, 1e-3)
        out, lost = remap(grid, st)
        assert lost == 0.0
        assert np.all(out.u[0][0] == u[0][0])
        assert out.remaps == 1

    def test_single_mode_index_shift(self):
        g = SpectralGrid(DomainConfig(Lx=1.0, Ly=1.0, Lz=1.0, Nx=16, Ny=16, Nz=16))
        u = np.zeros((3,) + g.shape_spec, complex)
        u[0][1, 1, 0] = 1.0 + 2.0j
        u[0][-1, -1, 0] = np.conj(1.0 + 2.0j)
        st = NonlinearState(u, g.t_remap, 1e-3)
        out, lost = remap(g, st)
        assert lost == 0.0
        assert out.u[0][1, 0, 0] == 1.0 + 2.0j
        assert out.u[0][1, 1, 0] == 0.0

    def test_round_trip_physical_field(self, grid):
        u = div_free_data(grid, 10, t=grid.t_remap)
        # band-limit hard so the shift discards nothing
        tight = (np.abs(grid.mi) <= 2) & (np.abs(grid.ni) <= 2) & (grid.pi <= 2)
        u = np.where(tight, u, 0.0)
        st = NonlinearState(u.copy(), grid.t_remap, 1e-3, remaps=0)
        out, lost = remap(grid, st)
        assert lost == 0.0
        ee0 = grid.eta_eff(st.t, 0)
        ee1 = grid.eta_eff(out.t, 1)
        rng = np.random.default_rng(0)
        for _ in range(5):
            x, y, z = rng.uniform(0, 1, 3) * (grid.Lx, grid.Ly, grid.Lz)
            ph0 = np.exp(1j * (grid.kx * x + ee0 * y + grid.kz * z))
            ph1 = np.exp(1j * (grid.kx * x + ee1 * y + grid.kz * z))
            v0 = np.sum(grid.mode_weight * (st.u[0] * ph0).real)
            v1 = np.sum(grid.mode_weight * (out.u[0] * ph1).real)
            assert v0 == pytest.approx(v1, abs=1e-12)

    def test_off_schedule_rejected(self, grid):
        st = NonlinearState(np.zeros((3,) + grid.shape_spec, complex),
                            0.37 * grid.t_remap, 1e-3)
        with pytest.raises(RemapScheduleError):
            remap(grid, st)


class TestRunSimulation:
    def test_zero_data_all_zero(self, grid):
        sim = SimConfig(nu=5e-2)
        rec = run_simulation(grid, np.zeros((3,) + grid.shape_spec, complex), sim)
        assert rec.flag == "completed"
        assert all(r["E_total"] == 0.0 for r in rec.rows)

    def test_pure_streak_data_matches_run_streak(self, grid):
        from couette_lab.streak import run_streak
        g2 = SpectralGrid2D.from_domain(grid.config)
        rng = np.random.default_rng(11)
        omega = g2.dealias(g2.forward(rng.standard_normal(g2.shape_real))) * 1e-3
        omega = np.where(g2.k2 > 0, omega, 0.0)
        u1 = g2.dealias(g2.forward(rng.standard_normal(g2.shape_real))) * 1e-3
        u2, u3 = velocities(g2, omega)
        u = np.zeros((3,) + grid.shape_spec, complex)
        u[0][0], u[1][0], u[2][0] = u1, u2, u3

        sim = SimConfig(nu=8e-3)
        sim.dt_max = 0.02
        sim.out_interval = 0.5
        rec3 = run_simulation(grid, u, sim)
        st2 = StreakState(omega.copy(), u1.copy(), 0.0, sim.nu)
        rec2 = run_streak(g2, st2, rec3.horizon, dt_max=sim.dt_max, cfl=sim.cfl,
                          out_interval=sim.out_interval, segment=grid.t_remap)
        f3, f2 = rec3.final_state, rec2.final_state
        om3 = 1j * (grid.eta_eff(f3.t, f3.remaps)[0] * f3.u[2][0]
                    - grid.kz[0] * f3.u[1][0])
        scale = max(np.max(np.abs(f2.omega)), 1e-30)
        assert abs(f3.t - f2.t) < 1e-9
        assert np.max(np.abs(om3 - f2.omega)) <= 1e-8 * scale
        assert np.max(np.abs(f3.u[0][0] - f2.u1)) <= 1e-8 * scale

    def test_transition_monitor_truncates(self, grid):
        sim = SimConfig(nu=5e-2)
        u = 1e-4 * div_free_data(grid, 12)
        calls = []

        def monitor(record):
            calls.append(record.times[-1])
            return len(calls) >= 2

        rec = run_simulation(grid, u, sim, transition_monitor=monitor)
        assert rec.flag == "transitioned"
        assert rec.times[-1] < rec.horizon
