"""Figure builders over the campaign JSON / diagnostics CSV schemas.

The plotting layer never recomputes physics: every annotated number is read
verbatim from the upstream artifact.  Styles are pinned so regenerating a
figure from the same inputs is deterministic.
"""

import csv
import json

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

STYLE = {
    "figure.figsize": (6.0, 4.2),
    "figure.dpi": 130,
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.25,
    "savefig.bbox": "tight",
}

NORM_FLOOR = 1e-300


class SchemaError(ValueError):
    """Input artifact does not match its documented schema."""


def read_campaign(path):
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if "points" not in data:
        raise SchemaError(f"{path}: campaign JSON lacks 'points'")
    for p in data["points"]:
        missing = {"nu", "eps_star", "eps_lo", "eps_hi"} - set(p)
        if missing:
            raise SchemaError(f"{path}: campaign point lacks {sorted(missing)}")
    return data


def read_csv_columns(path, required):
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise SchemaError(f"{path}: empty CSV")
        missing = [c for c in required if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        rows = [{k: float(v) for k, v in row.items()} for row in reader]
    return rows


def _save(fig, out_path):
    fig.savefig(out_path, metadata={"Software": None})
    plt.close(fig)


def plot_threshold(campaign_path, out_path):
    """Log-log threshold scatter with the harness's fitted slope.

    Reference slopes 3/2 and 31/20 are drawn through the sweep midpoint; the
    gamma annotation repeats the harness value exactly (never refit here).
    Returns the caption text.
    """
    data = read_campaign(campaign_path)
    points = data["points"]
    if len(points) < 3:
        raise SchemaError(f"{campaign_path}: need >= 3 threshold points, "
                          f"got {len(points)}")
    gamma = data.get("gamma")
    if gamma is None:
        raise SchemaError(f"{campaign_path}: campaign carries no fitted gamma")
    intercept = data.get("intercept")

    nus = np.array([p["nu"] for p in points])
    stars = np.array([p["eps_star"] for p in points])
    los = np.array([p["eps_lo"] for p in points])
    his = np.array([p["eps_hi"] for p in points])

    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.errorbar(nus, stars, yerr=[stars - los, his - stars], fmt="o",
                    color="k", capsize=3, label="measured threshold")
        xs = np.array([nus.min() * 0.8, nus.max() * 1.25])
        if intercept is not None:
            ax.plot(xs, np.exp(intercept) * xs**gamma, "-", color="tab:blue",
                    label=f"fit: gamma = {gamma:.6g}")
        x_mid = np.exp(np.mean(np.log(nus)))
        y_mid = np.exp(np.mean(np.log(stars)))
        for slope, style, name in ((1.5, "--", "3/2"), (31 / 20, ":", "31/20")):
            ax.plot(xs, y_mid * (xs / x_mid) ** slope, style, color="tab:gray",
                    label=f"reference slope {name}")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("inverse Reynolds number nu")
        ax.set_ylabel("threshold amplitude eps*")
        ax.set_title(f"Stability threshold: gamma = {gamma:.6g}")
        ax.legend(fontsize=8)
        _save(fig, out_path)

    caption = (f"Threshold amplitudes over nu with fitted exponent "
               f"gamma = {gamma:.6g}; reference slopes 3/2 and 31/20. "
               f"Indicator: {data.get('indicator', {})}")
    return {"gamma": gamma, "caption": caption, "n_points": len(points)}


def plot_decay(csv_path, fit_path, out_path):
    """Semilog norm decay curves with the fitted envelopes overlaid.

    The envelope constants (C, c) come from the fit JSON; a nu mismatch
    between the two artifacts is an error.
    """
    with open(fit_path, encoding="utf-8") as f:
        fit = json.load(f)
    rows = read_csv_columns(csv_path, ["t", "u2_neq_L2", "u2_neq_Hs",
                                       "u13_neq_L2", "u13_neq_Hs", "nu"])
    nus = {row["nu"] for row in rows}
    if "nu" not in fit:
        raise SchemaError(f"{fit_path}: fit JSON lacks 'nu'")
    if len(nus) != 1 or abs(nus.pop() - fit["nu"]) > 1e-15 * max(1.0, fit["nu"]):
        raise SchemaError(
            f"nu mismatch between {csv_path} and {fit_path}")
    nu = fit["nu"]

    t = np.array([row["t"] for row in rows])
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for col, color, label in (("u2_neq_Hs", "tab:blue", "||u2_neq||"),
                                  ("u13_neq_Hs", "tab:red", "||(u1,u3)_neq||")):
            vals = np.maximum([row[col] for row in rows], NORM_FLOOR)
            ax.semilogy(t, vals, "-", color=color, label=label)
        drawn = {}
        for key, color in (("u2_envelope", "tab:blue"), ("u13_envelope", "tab:red")):
            env = fit.get(key)
            if env:
                ax.semilogy(t, np.maximum(env["C"] * np.exp(-env["c"] * nu * t**3),
                                          NORM_FLOOR),
                            "--", color=color, alpha=0.7,
                            label=f"{key}: C={env['C']:.6g}, c={env['c']:.6g}")
                drawn[key] = (env["C"], env["c"])
        if nu > 0:
            tref = nu ** (-1.0 / 3.0)
            ax.axvline(tref, color="gray", lw=0.8, alpha=0.6)
        ax.set_xlabel("t")
        ax.set_ylabel("Sobolev norm")
        ax.set_ylim(bottom=max(min(
            min((row["u2_neq_Hs"] for row in rows), default=1.0),
            min((row["u13_neq_Hs"] for row in rows), default=1.0), 1e-18) * 0.5,
            1e-30))
        ax.set_title(f"Linear decay envelopes at nu = {nu:g}")
        ax.legend(fontsize=8)
        _save(fig, out_path)
    return {"nu": nu, "envelopes": drawn}


def plot_bootstrap(report_paths, out_path):
    """Grouped bars of the bootstrap ratios across a nu sweep."""
    if not report_paths:
        raise SchemaError("no bootstrap reports given")
    reports = []
    for p in report_paths:
        with open(p, encoding="utf-8") as f:
            data = json.load(f)
        if "ratios" not in data:
            raise SchemaError(f"{p}: bootstrap JSON lacks 'ratios'")
        reports.append(data)
    base = reports[0]["ratios"]
    ids = [r["inequality_id"] for r in base]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7.5, 4.2))
        width = 0.8 / len(reports)
        x = np.arange(len(ids))
        for j, rep in enumerate(reports):
            by_id = {r["inequality_id"]: r for r in rep["ratios"]}
            vals = [max(by_id[i]["ratio"], NORM_FLOOR) if i in by_id else NORM_FLOOR
                    for i in ids]
            ax.bar(x + j * width, vals, width, label=f"report {j}")
        ax.set_yscale("log")
        ax.set_xticks(x + 0.4 - width / 2)
        ax.set_xticklabels(ids, rotation=60, ha="right", fontsize=7)
        ax.set_ylabel("sup ratio / (eps nu-power)")
        ax.set_title("Bootstrap quantities over their theoretical scales")
        ax.legend(fontsize=8)
        _save(fig, out_path)
    return {"ids": ids, "n_reports": len(reports)}
