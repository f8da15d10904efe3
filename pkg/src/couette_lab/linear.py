"""Exact evolution of the linearized problem around Couette, per mode.

Zero modes follow the lift-up formulas; k != 0 modes evolve q2 = |xi_t|^2 u2
by the pure moving-frame heat flow, recover u2 by symbol division (inviscid
damping / Orr transient), and integrate the u1, u3 forced equations with the
exact integrating factor exp(-Phi) plus composite-Simpson quadrature of the
closed-form forcing.
"""

import numpy as np

from .domain import SpectralGrid


def phi_dissipation(t, k, eta, l, nu):
    """Phi = nu * int_0^t (k^2 + (eta - k tau)^2 + l^2) dtau, exactly."""
    t = np.asarray(t, float)
    k = np.asarray(k, float)
    eta = np.asarray(eta, float)
    l = np.asarray(l, float)
    ksafe = np.where(k != 0, k, 1.0)
    cubic = (eta**3 - (eta - k * t) ** 3) / (3.0 * ksafe)
    out = nu * np.where(
        k != 0,
        (k * k + l * l) * t + cubic,
        (eta * eta + l * l) * t,
    )
    return out if out.shape else float(out)


def evolve_zero_modes(u0_in, t, nu, k2):
    """Lift-up closed form on k=0 spectra.

    u0_in: (3, ...) zero-mode coefficient arrays; k2: eta^2 + l^2 per mode.
    """
    heat = np.exp(-nu * t * k2)
    out = np.empty_like(u0_in)
    out[0] = heat * (u0_in[0] - t * u0_in[1])
    out[1] = heat * u0_in[1]
    out[2] = heat * u0_in[2]
    return out


def evolve_q2(q2_in, t, k, eta, l, nu):
    """q2(t) = exp(-Phi(t)) q2_in (k != 0)."""
    return np.exp(-phi_dissipation(t, k, eta, l, nu)) * q2_in


def recover_u2(q2, t, k, eta, l):
    """u2 = q2 / (k^2 + (eta - kt)^2 + l^2) (k != 0)."""
    return q2 / (k * k + (eta - k * t) ** 2 + l * l)


def u13_forcing_coefficients(s, k, eta, l):
    """Integrands c1, c3 with u2(s) scaled out: c_j(s) = F_j(s) e^{Phi(s)} / q2_in."""
    lap = k * k + (eta - k * s) ** 2 + l * l
    lap = np.where(lap > 0, lap, 1.0)
    c1 = (-1.0 + 2.0 * k * k / lap) / lap
    c3 = (2.0 * k * l) / lap**2
    return c1, c3


class LinearPropagator:
    """Vectorized linear solution operator over a full spectral grid.

    Integrates the u1/u3 forcing by cumulative composite Simpson with step
    `quad_dt` (self-convergence order 4); everything else is closed form.
    """

    def __init__(self, grid: SpectralGrid, u_in, nu, quad_dt=0.01):
        if quad_dt <= 0:
            raise ValueError("quadrature step must be positive")
        self.grid = grid
        self.nu = nu
        self.quad_dt = quad_dt
        self.u_in = np.array(u_in, dtype=complex)
        self.k = grid.kx
        self.eta = grid.ky
        self.l = grid.kz
        self.knz = self.k != 0
        lap0 = grid.lap_L(0.0)
        self.q2_in = lap0 * self.u_in[1]

    def _phi(self, t):
        return phi_dissipation(t, self.k, self.eta, self.l, self.nu)

    def evolve(self, t):
        """Solution coefficients at a single time t >= 0."""
        return self.evolve_series([t])[0]

    def evolve_series(self, times):
        """Solution at increasing times, sharing one Simpson sweep."""
        times = list(times)
        if any(b < a for a, b in zip(times, times[1:])) or (times and times[0] < 0):
            raise ValueError("times must be nondecreasing and nonnegative")
        out = []
        I1 = np.zeros(self.grid.shape_spec, dtype=complex)
        I3 = np.zeros(self.grid.shape_spec, dtype=complex)
        s_done = 0.0
        for t in times:
            if t > s_done:
                n_pairs = max(1, int(np.ceil((t - s_done) / (2.0 * self.quad_dt))))
                h = (t - s_done) / (2.0 * n_pairs)
                for j in range(n_pairs):
                    s0 = s_done + 2 * j * h
                    g0 = u13_forcing_coefficients(s0, self.k, self.eta, self.l)
                    g1 = u13_forcing_coefficients(s0 + h, self.k, self.eta, self.l)
                    g2 = u13_forcing_coefficients(s0 + 2 * h, self.k, self.eta, self.l)
                    I1 += (h / 3.0) * (g0[0] + 4.0 * g1[0] + g2[0])
                    I3 += (h / 3.0) * (g0[1] + 4.0 * g1[1] + g2[1])
                s_done = t
            out.append(self._assemble(t, I1, I3))
        return out

    def _assemble(self, t, I1, I3):
        decay = np.exp(-self._phi(t))
        lap_t = self.grid.lap_L(t)
        lap_t = np.where(lap_t > 0, lap_t, 1.0)
        u = np.empty_like(self.u_in)
        u[0] = decay * (self.u_in[0] + self.q2_in * I1)
        u[1] = decay * self.q2_in / lap_t
        u[2] = decay * (self.u_in[2] + self.q2_in * I3)
        # k = 0 modes: lift-up closed form overrides
        heat = np.exp(-self.nu * t * (self.eta**2 + self.l**2))
        u[0] = np.where(self.knz, u[0], heat * (self.u_in[0] - t * self.u_in[1]))
        u[1] = np.where(self.knz, u[1], heat * self.u_in[1])
        u[2] = np.where(self.knz, u[2], heat * self.u_in[2])
        return u


def fit_decay_envelope(times, norms, nu, window=None):
    """Least-squares fit of log(norm) = log(C) - c * nu * t^3.

    The fit runs past the Orr window, over t in [0.5, 3] * nu^(-1/3) by
    default.  Returns (C, c, residual_rms); underflowed samples are dropped.
    """
    times = np.asarray(times, float)
    norms = np.asarray(norms, float)
    if window is None:
        tref = nu ** (-1.0 / 3.0)
        window = (0.5 * tref, 3.0 * tref)
    sel = (times >= window[0]) & (times <= window[1]) & (norms > 1e-290)
    if sel.sum() < 3:
        raise ValueError("fewer than 3 usable samples in the fit window")
    x = nu * times[sel] ** 3
    y = np.log(norms[sel])
    A = np.vstack([np.ones_like(x), -x]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - y) ** 2)))
    return float(np.exp(coef[0])), float(coef[1]), resid


def linear_decay_report(grid, u_in, nu, times, s_norm=3.0, quad_dt=0.01):
    """Time series of the linear norms plus fitted decay envelopes.

    Columns: L2 and H^s norms of the nonzero-x part of u2 and (u1,u3), the
    zero-mode norms, and the inviscid-damping monitor t^2 ||u2_neq||.
    """
    from .diagnostics import sobolev_norm

    prop = LinearPropagator(grid, u_in, nu, quad_dt=quad_dt)
    states = prop.evolve_series(times)
    rows = []
    for t, u in zip(times, states):
        un = [grid.nonzero_part(c) for c in u]
        u0 = [grid.x_average(c) for c in u]
        u2_l2 = grid.l2_norm(un[1])
        u13_l2 = float(np.sqrt(grid.l2_norm(un[0]) ** 2 + grid.l2_norm(un[2]) ** 2))
        rows.append({
            "t": t,
            "u2_neq_L2": u2_l2,
            "u2_neq_Hs": sobolev_norm(grid, un[1], s_norm),
            "u13_neq_L2": u13_l2,
            "u13_neq_Hs": float(np.sqrt(
                sobolev_norm(grid, un[0], s_norm) ** 2 + sobolev_norm(grid, un[2], s_norm) ** 2)),
            "u1_0_L2": grid.l2_norm(u0[0]),
            "u23_0_L2": float(np.sqrt(grid.l2_norm(u0[1]) ** 2 + grid.l2_norm(u0[2]) ** 2)),
            "t2_u2_neq_L2": t * t * u2_l2,
        })

    report = {"nu": nu, "s_norm": s_norm, "rows": rows}
    ts = np.array([r["t"] for r in rows])
    if nu > 0:
        try:
            C13, c13, r13 = fit_decay_envelope(ts, [r["u13_neq_Hs"] for r in rows], nu)
            report["u13_envelope"] = {"C": C13, "c": c13, "residual_rms": r13}
            C2, c2, r2 = fit_decay_envelope(ts, [r["u2_neq_Hs"] for r in rows], nu)
            report["u2_envelope"] = {"C": C2, "c": c2, "residual_rms": r2}
        except ValueError as exc:
            report["envelope_error"] = str(exc)
    sup = max((r["t2_u2_neq_L2"] for r in rows), default=0.0)
    report["sup_t2_u2_neq"] = sup
    if "u2_envelope" in report:
        c2 = report["u2_envelope"]["c"]
        report["sup_t2_exp_u2_neq"] = max(
            (r["t"] ** 2 * np.exp(min(c2 * nu * r["t"] ** 3, 600.0)) * r["u2_neq_L2"]
             for r in rows), default=0.0)
    return report
