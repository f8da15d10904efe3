"""x-independent (2.5D) dynamics: 2D Navier-Stokes in (y,z) plus forced u1.

Vorticity-streamfunction formulation: omega = d_y u3 - d_z u2 determines
(u2, u3) through a scalar Poisson solve; u1 rides along as a forced
advection-diffusion field (the lift-up source).  The right-hand side is
assembled exactly like the k=0 slice of the 3D solver so the two agree to
roundoff on shared data.
"""

from dataclasses import dataclass, field

import numpy as np

from .domain import SpectralGrid2D
from .errors import BlowupError, StepSizeError

U_BLOW = 1e6


@dataclass
class StreakState:
    omega: np.ndarray     # (Ny, Nzr) scalar vorticity coefficients
    u1: np.ndarray        # (Ny, Nzr) streamwise velocity coefficients
    t: float
    nu: float

    def copy(self):
        return StreakState(self.omega.copy(), self.u1.copy(), self.t, self.nu)


def velocities(grid: SpectralGrid2D, omega):
    """(u2, u3) from omega via the streamfunction; mean flow pinned to zero."""
    k2 = grid.k2
    inv = np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)
    phi = omega * inv
    u2 = 1j * grid.kz * phi
    u3 = -1j * grid.ky * phi
    return u2, u3


def streak_rhs(grid: SpectralGrid2D, state: StreakState, return_umax=False):
    """Non-stiff tendencies (d omega/dt, d u1/dt) excluding nu*Laplacian.

    Built from the same rotational-form cross product as the 3D solver:
    omega_vec = (omega, d_z u1, -d_y u1), F = dealias(u x omega_vec),
    d u1/dt = F1 - u2, d omega/dt = curl_(y,z) (F2, F3).
    """
    u2, u3 = velocities(grid, state.omega)
    w1 = state.omega
    w2 = 1j * grid.kz * state.u1
    w3 = -1j * grid.ky * state.u1

    u1r = grid.inverse(state.u1)
    u2r = grid.inverse(u2)
    u3r = grid.inverse(u3)
    w1r = grid.inverse(w1)
    w2r = grid.inverse(w2)
    w3r = grid.inverse(w3)

    F1 = grid.dealias(grid.forward(u2r * w3r - u3r * w2r))
    F2 = grid.dealias(grid.forward(u3r * w1r - u1r * w3r))
    F3 = grid.dealias(grid.forward(u1r * w2r - u2r * w1r))

    du1 = F1 - u2
    domega = 1j * (grid.ky * F3 - grid.kz * F2)
    if return_umax:
        umax = float(max(np.max(np.abs(u1r)), np.max(np.abs(u2r)), np.max(np.abs(u3r))))
        return domega, du1, umax
    return domega, du1


def step_streak(grid: SpectralGrid2D, state: StreakState, dt, cfl=0.5):
    """Lawson RK4 with the exact heat factor exp(-nu k^2 dt); 4th order."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    nu, h = state.nu, dt
    dw1, du1_1, umax = streak_rhs(grid, state, return_umax=True)
    if not np.isfinite(umax) or umax > U_BLOW:
        raise BlowupError(f"velocity amplitude {umax} at t={state.t}")
    hmin = min(grid.Ly / grid.Ny, grid.Lz / grid.Nz)
    if umax > 0 and dt > cfl * hmin / umax:
        raise StepSizeError(
            f"dt={dt} exceeds advective CFL bound {cfl * hmin / umax:.3e} at t={state.t}")

    Eh = np.exp(-nu * grid.k2 * (h / 2))
    Ef = Eh * Eh

    def rhs(omega, u1):
        return streak_rhs(grid, StreakState(omega, u1, 0.0, nu))

    w0, v0 = state.omega, state.u1
    k1 = (dw1, du1_1)
    k2 = rhs(Eh * (w0 + (h / 2) * k1[0]), Eh * (v0 + (h / 2) * k1[1]))
    k3 = rhs(Eh * w0 + (h / 2) * k2[0], Eh * v0 + (h / 2) * k2[1])
    k4 = rhs(Ef * w0 + h * Eh * k3[0], Ef * v0 + h * Eh * k3[1])

    w1 = Ef * w0 + (h / 6.0) * (Ef * k1[0] + 2.0 * Eh * (k2[0] + k3[0]) + k4[0])
    v1 = Ef * v0 + (h / 6.0) * (Ef * k1[1] + 2.0 * Eh * (k2[1] + k3[1]) + k4[1])
    return StreakState(w1, v1, state.t + h, nu)


def state_from_velocity(grid: SpectralGrid2D, u1, u2, u3, t, nu):
    omega = 1j * (grid.ky * u3 - grid.kz * u2)
    return StreakState(grid.dealias(omega), grid.dealias(np.asarray(u1, complex)), t, nu)


def taylor_green(grid: SpectralGrid2D, amplitude=1.0):
    """Exact single-shell NSE solution: decays by exp(-nu(a^2+b^2)t)."""
    a = 2 * np.pi / grid.Ly
    b = 2 * np.pi / grid.Lz
    phi = amplitude * np.sin(a * grid.y) * np.sin(b * grid.z)
    u2 = amplitude * b * np.sin(a * grid.y) * np.cos(b * grid.z)
    u3 = -amplitude * a * np.cos(a * grid.y) * np.sin(b * grid.z)
    omega = grid.forward((a * a + b * b) * phi)
    return omega, grid.forward(u2), grid.forward(u3)


@dataclass
class StreakRecord:
    nu: float
    times: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    final_state: StreakState | None = None
    flag: str = "completed"


def run_streak(grid: SpectralGrid2D, state: StreakState, T, dt_max=0.05,
               cfl=0.5, out_interval=0.5, s_norm=3.0, segment=None):
    """March to time T emitting (t, |u1|_L2, |u1|_HN, |(u2,u3)|_L2, enstrophy).

    Stepping is planned over segments of length `segment` (default
    out_interval) with the same ceil rule as the 3D driver, so runs on shared
    x-independent data produce directly comparable rows.
    """
    from .diagnostics import sobolev_norm_2d

    record = StreakRecord(nu=state.nu)
    seg = out_interval if segment is None else segment

    def observe(st):
        u2, u3 = velocities(grid, st.omega)
        record.times.append(st.t)
        record.rows.append({
            "t": st.t,
            "u1_L2": grid.l2_norm(st.u1),
            "u1_HN": sobolev_norm_2d(grid, st.u1, s_norm),
            "u23_L2": float(np.sqrt(grid.l2_norm(u2) ** 2 + grid.l2_norm(u3) ** 2)),
            "enstrophy": grid.l2_norm(st.omega) ** 2,
        })

    observe(state)
    next_out = out_interval
    hmin = min(grid.Ly / grid.Ny, grid.Lz / grid.Nz)

    def plan_dt(seg_end):
        _, _, umax = streak_rhs(grid, state, return_umax=True)
        dt_want = min(dt_max, cfl * hmin / max(umax, 1e-12))
        n_sub = max(1, int(np.ceil((seg_end - state.t) / dt_want - 1e-12)))
        return (seg_end - state.t) / n_sub

    try:
        while state.t < T - 1e-12:
            seg_end = min((np.floor(state.t / seg + 1e-9) + 1) * seg, T)
            dt = plan_dt(seg_end)
            while state.t < seg_end - 1e-12:
                try:
                    state = step_streak(grid, state, min(dt, seg_end - state.t), cfl=cfl)
                except StepSizeError:
                    dt = plan_dt(seg_end)
                    if dt < 1e-7:
                        raise BlowupError(f"CFL collapse at t={state.t}") from None
                    continue
                if state.t >= next_out - 1e-9:
                    observe(state)
                    next_out += out_interval
    except BlowupError:
        record.flag = "blowup"
        record.final_state = state
        return record
    if record.times[-1] < state.t - 1e-9:
        observe(state)
    record.final_state = state
    return record
