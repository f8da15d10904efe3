"""Full 3D nonlinear perturbation dynamics in the shearing frame.

The Couette transport term is absorbed into the moving wavenumber
eta_eff = eta - k t; the stiff nu*Delta_L part is integrated exactly by the
per-mode factor exp(-DeltaPhi) and the rest by a Lawson RK4.  Wavenumbers are
periodically re-centered (remap) so eta_eff stays on the resolved band.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .domain import SpectralGrid
from .errors import BlowupError, RemapScheduleError, StepSizeError
from .linear import phi_dissipation

U_BLOW = 1e6


@dataclass
class NonlinearState:
    u: np.ndarray          # (3, Nx, Ny, Nzr) shearing-frame coefficients
    t: float
    nu: float
    remaps: int = 0

    def copy(self):
        return NonlinearState(self.u.copy(), self.t, self.nu, self.remaps)


def q_fields(grid, state):
    """Q^i = Delta_L u^i by symbol multiplication (symbol is -|xi_t|^2)."""
    return -grid.lap_L(state.t, state.remaps) * state.u


def nonlinear_rhs(grid: SpectralGrid, u, t, remaps=0, return_umax=False):
    """Non-stiff tendency: projected advection + lift-up + frame pressure.

    The advection enters in rotational form u x omega (its gradient part is
    removed by the projection); quadratic products are 2/3-dealiased.
    """
    ee = grid.eta_eff(t, remaps)
    w1 = 1j * (ee * u[2] - grid.kz * u[1])
    w2 = 1j * (grid.kz * u[0] - grid.kx * u[2])
    w3 = 1j * (grid.kx * u[1] - ee * u[0])

    ur = np.array([grid.inverse(c) for c in u])
    wr = np.array([grid.inverse(c) for c in (w1, w2, w3)])
    cross = np.array([
        ur[1] * wr[2] - ur[2] * wr[1],
        ur[2] * wr[0] - ur[0] * wr[2],
        ur[0] * wr[1] - ur[1] * wr[0],
    ])
    F = np.array([grid.dealias(grid.forward(c)) for c in cross])
    F[0] -= u[1]                       # lift-up coupling
    N = grid.project_div_free(F, t, remaps)
    # pressure response of the absorbed Couette transport, keeps xi_t.u = 0
    lap = grid.kx**2 + ee**2 + grid.kz**2
    inv = np.where(lap > 0, 1.0 / np.where(lap > 0, lap, 1.0), 0.0)
    frame = grid.kx * u[1] * inv
    N[0] += grid.kx * frame
    N[1] += ee * frame
    N[2] += grid.kz * frame
    if return_umax:
        return N, float(np.max(np.abs(ur)))
    return N


def _if_factor(grid, t0, h, nu, remaps):
    """exp(-nu int_{t0}^{t0+h} |xi_tau|^2 dtau) on the stored layout."""
    ee = grid.eta_eff(t0, remaps)
    return np.exp(-phi_dissipation(h, grid.kx, ee, grid.kz, nu))


def step(grid: SpectralGrid, state: NonlinearState, dt, cfl=0.5):
    """One Lawson (integrating-factor) RK4 step; 4th-order in dt."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    u0, t0, nu, r = state.u, state.t, state.nu, state.remaps
    h = dt

    k1, umax = nonlinear_rhs(grid, u0, t0, r, return_umax=True)
    if not np.isfinite(umax) or umax > U_BLOW:
        raise BlowupError(f"velocity amplitude {umax} at t={t0}")
    hmin = min(grid.Lx / grid.Nx, grid.Ly / grid.Ny, grid.Lz / grid.Nz)
    if umax > 0 and dt > cfl * hmin / umax:
        raise StepSizeError(
            f"dt={dt} exceeds advective CFL bound {cfl * hmin / umax:.3e} at t={t0}")

    Eh = _if_factor(grid, t0, h / 2, nu, r)
    Eh2 = _if_factor(grid, t0 + h / 2, h / 2, nu, r)
    Ef = Eh * Eh2

    k2 = nonlinear_rhs(grid, Eh * (u0 + (h / 2) * k1), t0 + h / 2, r)
    k3 = nonlinear_rhs(grid, Eh * u0 + (h / 2) * k2, t0 + h / 2, r)
    k4 = nonlinear_rhs(grid, Ef * u0 + h * Eh2 * k3, t0 + h, r)
    u1 = Ef * u0 + (h / 6.0) * (Ef * k1 + 2.0 * Eh2 * (k2 + k3) + k4)

    u1 = grid.project_div_free(u1, t0 + h, r)
    return NonlinearState(u1, t0 + h, nu, r)


def remap(grid: SpectralGrid, state: NonlinearState):
    """Reindex n -> n - m so eta_eff stays centered; off-band modes are zeroed.

    Exact on the represented field; returns (new_state, discarded_energy).
    """
    tr = grid.t_remap
    sched = state.t / tr
    if abs(sched - round(sched)) > 1e-8 * max(1.0, abs(sched)):
        raise RemapScheduleError(
            f"remap at t={state.t} is off the schedule (interval {tr})")
    Ny = grid.Ny
    n_half = Ny // 2
    n_old = grid.ni.ravel()
    new = np.zeros_like(state.u)
    discarded = 0.0
    for im, m in enumerate(grid.mi.ravel()):
        n_new = n_old - m
        valid = (n_new >= -n_half) & (n_new <= n_half - 1)
        dst = np.mod(n_new[valid], Ny)
        new[:, im, dst, :] = state.u[:, im, valid, :]
        if not np.all(valid):
            lost = state.u[:, im, ~valid, :]
            discarded += float(np.sum(grid.mode_weight * np.abs(lost) ** 2))
    out = NonlinearState(new, state.t, state.nu, state.remaps + 1)
    return out, discarded


@dataclass
class RunRecord:
    nu: float
    horizon: float
    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    u0_times: list = field(default_factory=list)
    u0_history: list = field(default_factory=list)   # (3, Ny, Nzr) k=0 slices
    u_neq_l2: list = field(default_factory=list)
    u_l2: list = field(default_factory=list)
    discard_total: float = 0.0
    flag: str = "completed"
    final_state: NonlinearState | None = None
    meta: dict = field(default_factory=dict)


def run_simulation(grid: SpectralGrid, u_in, sim, diag_row=None,
                   transition_monitor=None):
    """March u_in to the horizon, emitting diagnostics every out_interval.

    sim: SimConfig-like with nu, cfl, dt_max, horizon_multiple, out_interval.
    diag_row(grid, state) -> dict adds full diagnostic columns; the reduced
    norms needed for classification are always collected.
    transition_monitor(record) -> bool may truncate a flagged run early.
    """
    nu = sim.nu
    horizon = sim.horizon_multiple * nu ** (-1.0 / 3.0)
    wall_budget = getattr(sim, "wall_budget", 0.0)
    wall_start = time.perf_counter()
    state = NonlinearState(np.array(u_in, dtype=complex), 0.0, nu)
    state.u = grid.project_div_free(grid.dealias(state.u), 0.0, 0)

    record = RunRecord(nu=nu, horizon=horizon,
                       meta={"cfl": sim.cfl, "dt_max": sim.dt_max,
                             "out_interval": sim.out_interval})
    tr = grid.t_remap

    def observe(st):
        e_zero = sum(grid.l2_norm(grid.x_average(c)) ** 2 for c in st.u) / 2.0
        e_neq = sum(grid.l2_norm(grid.nonzero_part(c)) ** 2 for c in st.u) / 2.0
        record.times.append(st.t)
        record.u0_times.append(st.t)
        record.u0_history.append(np.array([c[0].copy() for c in st.u]))
        record.u_neq_l2.append(float(np.sqrt(2.0 * e_neq)))
        record.u_l2.append(float(np.sqrt(2.0 * (e_zero + e_neq))))
        row = {"t": st.t, "E_total": e_zero + e_neq, "E_zero": e_zero,
               "E_nonzero": e_neq,
               "div_max": _div_max(grid, st),
               "remap_discard": record.discard_total}
        if diag_row is not None:
            row.update(diag_row(grid, st))
        record.rows.append(row)

    observe(state)
    next_out = sim.out_interval
    hmin = min(grid.Lx / grid.Nx, grid.Ly / grid.Ny, grid.Lz / grid.Nz)

    def plan_dt(seg_end):
        umax = max(_umax(grid, state), 1e-12)
        dt_want = min(sim.dt_max, sim.cfl * hmin / umax)
        n_sub = max(1, int(np.ceil((seg_end - state.t) / dt_want - 1e-12)))
        return (seg_end - state.t) / n_sub

    try:
        while state.t < horizon - 1e-12:
            if wall_budget > 0 and time.perf_counter() - wall_start > wall_budget:
                record.flag = "incomplete"
                record.final_state = state
                return record
            seg_end = min((state.remaps + 1) * tr, horizon)
            dt = plan_dt(seg_end)
            while state.t < seg_end - 1e-12:
                try:
                    state = step(grid, state, min(dt, seg_end - state.t), cfl=sim.cfl)
                except StepSizeError:
                    dt = plan_dt(seg_end)
                    if dt < 1e-7:
                        raise BlowupError(f"CFL collapse at t={state.t}") from None
                    continue
                if state.t >= next_out - 1e-9:
                    observe(state)
                    next_out += sim.out_interval
                    if transition_monitor is not None and transition_monitor(record):
                        record.flag = "transitioned"
                        record.final_state = state
                        return record
            if abs(state.t / tr - round(state.t / tr)) < 1e-8 and state.t < horizon - 1e-12:
                state, lost = remap(grid, state)
                total = sum(grid.l2_norm(c) ** 2 for c in state.u)
                record.discard_total += lost / max(total + lost, 1e-300)
    except BlowupError:
        record.flag = "blowup"
        record.final_state = state
        return record

    if record.times[-1] < state.t - 1e-9:
        observe(state)
    record.final_state = state
    return record


def _umax(grid, state):
    return float(max(np.max(np.abs(grid.inverse(c))) for c in state.u))


def _div_max(grid, state):
    d = np.max(np.abs(grid.divergence(state.u, state.t, state.remaps)))
    scale = max(np.sqrt(sum(grid.l2_norm(c) ** 2 for c in state.u)), 1e-300)
    return float(d / scale)
