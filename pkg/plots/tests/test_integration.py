"""End-to-end: render figures from artifacts the primary CLI actually wrote."""

import json
import os

import numpy as np
import pytest

pytest.importorskip("couette_lab")

from couette_lab.cli import main as lab_main
from couette_plots.figures import plot_decay, plot_threshold

TP = 2 * np.pi


@pytest.fixture(scope="module")
def small_cfg(tmp_path_factory):
    d = tmp_path_factory.mktemp("cfg")
    p = d / "small.cfg"
    p.write_text(
        f"domain.Lx = {TP}\ndomain.Ly = {TP}\ndomain.Lz = {TP}\n"
        "domain.Nx = 12\ndomain.Ny = 12\ndomain.Nz = 12\n"
        "data.band = 3\nsolver.nu = 1e-2\n"
    )
    return str(p)


def test_decay_figure_from_linear_report(small_cfg, tmp_path):
    art = str(tmp_path / "art")
    assert lab_main(["linear-report", "--config", small_cfg, "--out-dir", art]) == 0
    csv_p = os.path.join(art, "linear_decay.csv")
    fit_p = os.path.join(art, "linear_fit.json")
    out = str(tmp_path / "decay.png")
    info = plot_decay(csv_p, fit_p, out)
    assert os.path.exists(out)
    fit = json.load(open(fit_p))
    for key in ("u2_envelope", "u13_envelope"):
        if key in fit:
            assert info["envelopes"][key] == (fit[key]["C"], fit[key]["c"])


def test_threshold_figure_from_synthetic_sweep(tmp_path, monkeypatch):
    # drive the harness sweep with a synthetic nu^1.5 classifier, then render
    import couette_lab.threshold as th

    def fake_runner(grid, u_unit, cfg, nu):
        def run(eps):
            verdict = "transitioned" if eps > nu**1.5 else "laminar"
            return {"result": verdict, "flag": "completed", "sup_u_l2": 0.0,
                    "u_neq_final_over_initial": 0.0, "t_final": 1.0,
                    "wall_seconds": 0.0}
        return run

    monkeypatch.setattr(th, "_default_runner", fake_runner)
    from couette_lab.config import SimConfig
    from couette_lab.domain import DomainConfig
    from couette_lab.io import write_json

    cfg = SimConfig()
    cfg.domain = DomainConfig(Nx=8, Ny=8, Nz=8)
    cfg.data.band = 2
    report = th.sweep(cfg)
    path = str(tmp_path / "campaign.json")
    write_json(report, path)
    out = str(tmp_path / "threshold.png")
    info = plot_threshold(path, out)
    assert os.path.exists(out)
    assert info["gamma"] == report["gamma"]
