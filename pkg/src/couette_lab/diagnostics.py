"""Auxiliary coordinate fields (psi, g, G), weighted norms and reports.

The coordinate shift psi solves d/dt(t psi) + u0.grad(t psi) = u0^1 - t u0^2
+ nu t Lap(psi) from t psi -> 0 at t=0, diagnosed from the zero-mode history
of a run.  Bootstrap norms weight Sobolev norms with the multiplier stacks
A = m^(1/2) M <D>^N and B = m M <D>^N; all weights are evaluated in the
shearing frame.
"""

from dataclasses import dataclass, field

import numpy as np

from . import multipliers as mult
from .domain import SpectralGrid, SpectralGrid2D
from .errors import StepSizeError
from .solver3d import RunRecord, q_fields

DIAGNOSTICS_COLUMNS = [
    "t", "E_total", "E_zero", "E_nonzero", "div_max",
    "HN_Q1_0_over_t", "B_Q1_neq", "A_Q2", "B_Q3",
    "M_Q2_neq_Nm1", "M_U1_neq_Nm1",
    "U1_0_Nm1", "U2_0_Nm1", "U3_0_Nm1",
    "g_Nm1_t2", "psi_Hs", "remap_discard",
]


# ---------------------------------------------------------------------------
# Sobolev and multiplier-weighted norms
# ---------------------------------------------------------------------------

def sobolev_norm(grid: SpectralGrid, c, s, remaps=0):
    """||<D>^s f||_L2 with <x> = sqrt(1+x^2) on the true wavenumbers."""
    if s < 0:
        raise ValueError("Sobolev index must be nonnegative")
    et = grid.eta_true(remaps)
    w = (1.0 + grid.kx**2 + et**2 + grid.kz**2) ** (s / 2.0)
    return float(np.sqrt(np.sum(grid.mode_weight * (w * np.abs(c)) ** 2)))


def sobolev_norm_2d(grid: SpectralGrid2D, c, s):
    if s < 0:
        raise ValueError("Sobolev index must be nonnegative")
    w = (1.0 + grid.ky**2 + grid.kz**2) ** (s / 2.0)
    return float(np.sqrt(np.sum(grid.mode_weight * (w * np.abs(c)) ** 2)))


def multiplier_field(grid: SpectralGrid, name, t, params, remaps=0, alpha=0.5):
    """Per-mode multiplier stack evaluated on the stored layout."""
    k = np.broadcast_to(grid.kx, grid.shape_spec)
    eta = np.broadcast_to(grid.eta_true(remaps), grid.shape_spec)
    l = np.broadcast_to(grid.kz, grid.shape_spec)
    if name == "one":
        return np.ones(grid.shape_spec)
    if name == "m":
        return mult.eval_m(t, k, eta, l, params)
    if name == "M":
        return mult.eval_M(t, k, eta, l, params)
    if name == "A":
        return np.sqrt(mult.eval_m(t, k, eta, l, params)) * mult.eval_M(t, k, eta, l, params)
    if name in ("B", "mM"):
        return mult.eval_m(t, k, eta, l, params) * mult.eval_M(t, k, eta, l, params)
    if name == "sqrt_mdot_m":
        return (np.sqrt(mult.eval_neg_MdotM(t, k, eta, l, params, which="product"))
                * mult.eval_m(t, k, eta, l, params) ** alpha)
    raise ValueError(f"unknown weight {name!r}")


def weighted_norm(grid: SpectralGrid, c, weight, s, t, params, remaps=0, alpha=0.5):
    """Multiplier-weighted H^s norm of one coefficient array."""
    w = multiplier_field(grid, weight, t, params, remaps, alpha)
    et = grid.eta_true(remaps)
    ds = (1.0 + grid.kx**2 + et**2 + grid.kz**2) ** (s / 2.0)
    return float(np.sqrt(np.sum(grid.mode_weight * (w * ds * np.abs(c)) ** 2)))


# ---------------------------------------------------------------------------
# Per-output-time diagnostics row
# ---------------------------------------------------------------------------

def bootstrap_row(grid: SpectralGrid, state, params, sigma):
    """Multiplier-weighted norm columns for one state snapshot.

    The m and M fields are evaluated once per snapshot and shared by all
    weighted columns.
    """
    N = sigma - 2.0
    t, r = state.t, state.remaps
    Q = q_fields(grid, state)
    Qneq = [grid.nonzero_part(q) for q in Q]
    Q0_1 = grid.x_average(Q[0])
    U0 = [grid.x_average(c) for c in state.u]
    U1neq = grid.nonzero_part(state.u[0])
    jap_t = np.sqrt(1.0 + t * t)

    m_arr = multiplier_field(grid, "m", t, params, r)
    M_arr = multiplier_field(grid, "M", t, params, r)
    et = grid.eta_true(r)
    dN = (1.0 + grid.kx**2 + et**2 + grid.kz**2) ** (N / 2.0)
    dNm1 = (1.0 + grid.kx**2 + et**2 + grid.kz**2) ** ((N - 1.0) / 2.0)

    def wnorm(c, warr, ds):
        return float(np.sqrt(np.sum(grid.mode_weight * (warr * ds * np.abs(c)) ** 2)))

    q1_0_hn = wnorm(Q0_1, 1.0, dN)
    row = {
        "HN_Q1_0_over_t": q1_0_hn / jap_t,
        "_Q1_0_HN": q1_0_hn,
        "B_Q1_neq": wnorm(Qneq[0], m_arr * M_arr, dN),
        "A_Q2": wnorm(Q[1], np.sqrt(m_arr) * M_arr, dN),
        "B_Q3": wnorm(Q[2], m_arr * M_arr, dN),
        "M_Q2_neq_Nm1": wnorm(Qneq[1], M_arr, dNm1),
        "M_U1_neq_Nm1": wnorm(U1neq, M_arr, dNm1),
        "U1_0_Nm1": wnorm(U0[0], 1.0, dNm1),
        "U2_0_Nm1": wnorm(U0[1], 1.0, dNm1),
        "U3_0_Nm1": wnorm(U0[2], 1.0, dNm1),
    }
    row["_U1_0_short"] = row["U1_0_Nm1"] / jap_t
    return row


def make_diag_row(params, sigma):
    """run_simulation callback adding the bootstrap columns to every row."""
    def diag_row(grid, state):
        return bootstrap_row(grid, state, params, sigma)
    return diag_row


# ---------------------------------------------------------------------------
# psi / g coordinate diagnostics
# ---------------------------------------------------------------------------

@dataclass
class PsiSeries:
    nu: float
    times: list = field(default_factory=list)
    chi: list = field(default_factory=list)     # spectral t*psi
    psi: list = field(default_factory=list)     # spectral psi (t >= t_min)
    psi_y: list = field(default_factory=list)   # real-space slope fields
    psi_z: list = field(default_factory=list)
    G: list = field(default_factory=list)       # (1+psi_y)^2 + psi_z^2 - 1
    meta: dict = field(default_factory=dict)


def _interp_history(times, arrays, t):
    times = np.asarray(times)
    if t <= times[0]:
        return arrays[0]
    if t >= times[-1]:
        return arrays[-1]
    j = int(np.searchsorted(times, t)) - 1
    w = (t - times[j]) / (times[j + 1] - times[j])
    return (1.0 - w) * arrays[j] + w * arrays[j + 1]


def coefficient_slopes(grid2: SpectralGrid2D, psi_hat, tol=1e-10, max_pow=60):
    """psi_y, psi_z from the geometric series in d_Y C, truncated at `tol`.

    Requires the slope sup-norm to stay below 1/2; quadratic products are
    dealiased so every partial sum is an exact convolution.
    """
    dyc = grid2.inverse(1j * grid2.ky * psi_hat)
    dzc = grid2.inverse(1j * grid2.kz * psi_hat)
    amax = float(np.max(np.abs(dyc)))
    if amax >= 0.5:
        raise ValueError(f"slope series diverges: sup|d_Y C| = {amax:.3f} >= 1/2")
    # sum_j (d_Y C)^j computed in real space with spectral re-truncation
    geom = np.ones_like(dyc)
    term = np.ones_like(dyc)
    n_terms = max_pow
    for j in range(1, max_pow + 1):
        term = grid2.inverse(grid2.dealias(grid2.forward(term * dyc)))
        geom = geom + term
        if amax > 0 and amax ** (j + 1) / (1.0 - amax) < tol:
            n_terms = j
            break
    psi_y = grid2.inverse(grid2.dealias(grid2.forward(dyc * geom)))
    psi_z = grid2.inverse(grid2.dealias(grid2.forward(dzc * geom)))
    return psi_y, psi_z, n_terms


def solve_psi(grid2: SpectralGrid2D, u0_times, u0_history, nu, dt=0.02,
              t_end=None, record_times=None, cfl=0.5, chi_init=None, t_start=0.0):
    """Integrate chi = t*psi along a zero-mode history; record psi for t >= 1.

    u0_history: (3, Ny, Nzr) spectral zero-mode snapshots at u0_times.
    The advection by (u0^2, u0^3) is pseudo-spectral with dealiasing; the
    nu-diffusion is handled by the exact heat factor inside a Lawson RK4.
    """
    if t_end is None:
        t_end = u0_times[-1]
    if record_times is None:
        record_times = [t for t in u0_times if t >= 1.0 - 1e-9 and t <= t_end + 1e-9]
    record_times = sorted(record_times)
    series = PsiSeries(nu=nu, meta={"dt": dt})
    hmin = min(grid2.Ly / grid2.Ny, grid2.Lz / grid2.Nz)

    def u0_at(t):
        return _interp_history(u0_times, u0_history, t)

    def rhs(chi, t):
        u0 = u0_at(t)
        u2r = grid2.inverse(u0[1])
        u3r = grid2.inverse(u0[2])
        umax = max(np.max(np.abs(u2r)), np.max(np.abs(u3r)))
        if umax > 0 and dt > cfl * hmin / umax:
            raise StepSizeError(
                f"psi advection CFL violated at t={t}: dt={dt} > {cfl * hmin / umax:.3e}")
        dyx = grid2.inverse(1j * grid2.ky * chi)
        dzx = grid2.inverse(1j * grid2.kz * chi)
        adv = grid2.dealias(grid2.forward(u2r * dyx + u3r * dzx))
        return -adv + u0[0] - t * u0[1]

    chi = np.zeros(grid2.shape_spec, complex) if chi_init is None else np.array(chi_init, complex)
    t = t_start
    rec = list(record_times)

    def maybe_record(chi, t):
        while rec and t >= rec[0] - 1e-9:
            tr = rec.pop(0)
            psi_hat = chi / max(tr, 1e-12)
            series.times.append(tr)
            series.chi.append(chi.copy())
            series.psi.append(psi_hat)
            try:
                py, pz, _ = coefficient_slopes(grid2, psi_hat)
            except ValueError as exc:
                series.meta.setdefault("slope_failures", []).append((tr, str(exc)))
                py = pz = np.full(grid2.shape_real, np.nan)
            series.psi_y.append(py)
            series.psi_z.append(pz)
            series.G.append((1.0 + py) ** 2 + pz**2 - 1.0)

    maybe_record(chi, t)
    while t < t_end - 1e-12:
        h = min(dt, t_end - t, (rec[0] - t) if rec else dt)
        h = max(h, 1e-9)
        Eh = np.exp(-nu * grid2.k2 * (h / 2))
        Ef = Eh * Eh
        k1 = rhs(chi, t)
        k2 = rhs(Eh * (chi + (h / 2) * k1), t + h / 2)
        k3 = rhs(Eh * chi + (h / 2) * k2, t + h / 2)
        k4 = rhs(Ef * chi + h * Eh * k3, t + h)
        chi = Ef * chi + (h / 6.0) * (Ef * k1 + 2.0 * Eh * (k2 + k3) + k4)
        t += h
        maybe_record(chi, t)
    return series


def compute_g(grid2: SpectralGrid2D, psi_series: PsiSeries, u0_times, u0_history):
    """g = (u0^1 - psi)/t on the psi sample times (t >= 1)."""
    out = []
    for t, psi_hat in zip(psi_series.times, psi_series.psi):
        u0 = _interp_history(u0_times, u0_history, t)
        out.append((u0[0] - psi_hat) / t)
    return out


def evolve_g_decay(grid2: SpectralGrid2D, g1, times, u0_times, u0_history, nu,
                   dt=0.01, cfl=0.5):
    """Evolve d_t g + u0.grad g = -(2/t) g + nu Lap g from g(times[0]).

    Reference route for the decay equation; the quadratic feedback term of
    the full system is dropped (linear-regime check).
    """
    hmin = min(grid2.Ly / grid2.Ny, grid2.Lz / grid2.Nz)
    g = np.array(g1, complex)
    t = times[0]
    out = [g.copy()]

    def rhs(gh, s):
        u0 = _interp_history(u0_times, u0_history, s)
        u2r = grid2.inverse(u0[1])
        u3r = grid2.inverse(u0[2])
        umax = max(np.max(np.abs(u2r)), np.max(np.abs(u3r)))
        if umax > 0 and dt > cfl * hmin / umax:
            raise StepSizeError(f"g advection CFL violated at t={s}")
        dy = grid2.inverse(1j * grid2.ky * gh)
        dz = grid2.inverse(1j * grid2.kz * gh)
        adv = grid2.dealias(grid2.forward(u2r * dy + u3r * dz))
        return -adv - (2.0 / s) * gh

    for t_next in times[1:]:
        while t < t_next - 1e-12:
            h = min(dt, t_next - t)
            Eh = np.exp(-nu * grid2.k2 * (h / 2))
            Ef = Eh * Eh
            k1 = rhs(g, t)
            k2 = rhs(Eh * (g + (h / 2) * k1), t + h / 2)
            k3 = rhs(Eh * g + (h / 2) * k2, t + h / 2)
            k4 = rhs(Ef * g + h * Eh * k3, t + h)
            g = Ef * g + (h / 6.0) * (Ef * k1 + 2.0 * Eh * (k2 + k3) + k4)
            t += h
        out.append(g.copy())
    return out


# ---------------------------------------------------------------------------
# Record assembly and reports
# ---------------------------------------------------------------------------

def finalize_records(grid: SpectralGrid, record: RunRecord, sigma, psi_dt=0.02):
    """Fill psi/g columns of a run's rows from its zero-mode history."""
    N = sigma - 2.0
    grid2 = SpectralGrid2D.from_domain(grid.config)
    psi = solve_psi(grid2, record.u0_times, record.u0_history, record.nu, dt=psi_dt)
    gs = compute_g(grid2, psi, record.u0_times, record.u0_history)
    by_time = {round(t, 9): j for j, t in enumerate(psi.times)}
    for row in record.rows:
        j = by_time.get(round(row["t"], 9))
        if j is None:
            row.setdefault("g_Nm1_t2", 0.0)
            row.setdefault("psi_Hs", 0.0)
        else:
            row["g_Nm1_t2"] = psi.times[j] ** 2 * sobolev_norm_2d(grid2, gs[j], N - 1.0)
            row["psi_Hs"] = sobolev_norm_2d(grid2, psi.psi[j], N + 2.0)
            row["_g_Np2"] = sobolev_norm_2d(grid2, gs[j], N + 2.0)
    record.meta["psi_series"] = psi
    record.meta["g_series"] = gs
    return record


BOOTSTRAP_RATIOS = [
    # (id, row key, sup over time of key, epsilon * nu^power denominator)
    ("Q1_0_short", "HN_Q1_0_over_t", 0.0),
    ("Q1_0", "_Q1_0_HN", -1.0),
    ("Q1_neq", "B_Q1_neq", -1.0 / 3.0),
    ("Q2", "A_Q2", 0.0),
    ("Q3", "B_Q3", 0.0),
    ("Q2_low", "M_Q2_neq_Nm1", 0.0),
    ("U1_0_short", "_U1_0_short", 0.0),
    ("U1_0", "U1_0_Nm1", -1.0),
    ("U2_0", "U2_0_Nm1", 0.0),
    ("U3_0", "U3_0_Nm1", 0.0),
    ("U1_neq", "M_U1_neq_Nm1", 0.0),
    ("g_decay", "g_Nm1_t2", 0.0),
    ("g_high", "_g_Np2", 0.0),
    ("C", "psi_Hs", -1.0),
]


def run_ratios(record: RunRecord, eps):
    """Sup-in-time of each bootstrap quantity over its eps*nu-power scale."""
    nu = record.nu
    out = {}
    for rid, key, pw in BOOTSTRAP_RATIOS:
        vals = [row[key] for row in record.rows if key in row]
        sup = max(vals) if vals else 0.0
        out[rid] = sup / (eps * nu**pw)
    return out


def bootstrap_report(entries, stability_factor=4.0):
    """Cross-nu stability report for the bootstrap quantities.

    entries: list of {nu, eps, record}; every record must carry the full
    diagnostic rows.  A ratio passes when finite and, across the sweep,
    max/min <= stability_factor (ratios indistinguishable from zero pass as
    trivially stable).
    """
    table = {}
    for e in entries:
        rr = run_ratios(e["record"], e["eps"])
        for rid, val in rr.items():
            table.setdefault(rid, {})[e["nu"]] = val
    report = []
    for rid, by_nu in table.items():
        vals = np.array(list(by_nu.values()))
        finite = bool(np.all(np.isfinite(vals)))
        nonzero = vals[vals > 1e-14]
        stable = bool(finite and (nonzero.size == 0
                                  or nonzero.max() / nonzero.min() <= stability_factor))
        report.append({
            "inequality_id": rid,
            "ratio": float(vals.max()) if vals.size else 0.0,
            "by_nu": {f"{nu:g}": float(v) for nu, v in by_nu.items()},
            "pass": finite and stable,
        })
    return {"ratios": report, "stability_factor": stability_factor,
            "pass": all(r["pass"] for r in report)}


def streak_convergence_metric(record: RunRecord):
    """First time ||u_neq|| halves, its nu^(1/3)-scaled ratio, and the series.

    The crossing is located by log-linear interpolation between output
    samples, so the metric does not inherit the output-grid granularity.
    """
    base = record.u_neq_l2[0]
    t_half = float("inf")
    if base > 0:
        target = 0.5 * base
        for (t0, v0), (t1, v1) in zip(zip(record.times, record.u_neq_l2),
                                      zip(record.times[1:], record.u_neq_l2[1:])):
            if v1 <= target:
                if v0 <= target or v1 <= 0.0:
                    t_half = t0 if v0 <= target else t1
                else:
                    w = (np.log(v0) - np.log(target)) / (np.log(v0) - np.log(v1))
                    t_half = t0 + w * (t1 - t0)
                break
    residual = [(t, (v / base if base > 0 else 0.0))
                for t, v in zip(record.times, record.u_neq_l2)]
    ratio = t_half * record.nu ** (1.0 / 3.0) if np.isfinite(t_half) else float("inf")
    if base == 0.0:
        t_half, ratio = 0.0, 0.0
    return float(t_half), float(ratio), residual
