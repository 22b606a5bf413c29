"""SVG rendering of experiment reports.

Byte-identical output across runs: fixed hash salt, no timestamps in the
SVG metadata, and all data comes from the report object rather than
global state. Missing series are skipped with a warning so partial
reports still render what they have.
"""

from __future__ import annotations

import math
import warnings
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import ExperimentReport  # noqa: E402

__all__ = ["emit_plots"]


def _style() -> None:
    plt.rcParams["svg.hashsalt"] = "cauchylab"
    plt.rcParams["figure.figsize"] = (6.4, 4.2)
    plt.rcParams["axes.grid"] = True
    plt.rcParams["grid.alpha"] = 0.3


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _series(report: ExperimentReport, name: str):
    s = report.series.get(name)
    if s is None:
        warnings.warn(f"report {report.exp_id} has no series {name!r}; "
                      "skipping its plot")
    return s


def _plot_a(report, out: Path) -> list[Path]:
    files = []
    pw = _series(report, "pairwise")
    if pw:
        fig, ax = plt.subplots()
        labels = [f"{a:g} vs {b:g}" for a, b in zip(pw["a"], pw["b"])]
        ax.bar(range(len(labels)), pw["distance"], color="steelblue")
        ax.set_xticks(range(len(labels)), labels, rotation=30)
        ax.set_ylabel("L2 distance on the strip")
        ax.set_title("zero-loss family: pairwise separation")
        files.append(_save(fig, out / "a_pairwise.svg"))
    fl = _series(report, "family_loss")
    if fl:
        fig, ax = plt.subplots()
        ax.plot(fl["a"], fl["loss"], "o-")
        ax.set_xlabel("family parameter a")
        ax.set_ylabel("discretized loss")
        ax.set_title("every member sits at zero loss")
        files.append(_save(fig, out / "a_family_loss.svg"))
    return files


def _plot_loss_curve(ax, series, label=None) -> None:
    steps = np.asarray(series["step"], dtype=float)
    total = np.asarray(series["total"], dtype=float)
    ax.semilogy(steps, np.maximum(total, 1e-300), label=label)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")


def _plot_b(report, out: Path) -> list[Path]:
    files = []
    ls = _series(report, "loss")
    if ls:
        fig, ax = plt.subplots()
        _plot_loss_curve(ax, ls, "total")
        ax.semilogy(ls["step"], np.maximum(ls["residual"], 1e-300),
                    label="residual part")
        ax.semilogy(ls["step"], np.maximum(ls["initial"], 1e-300),
                    label="initial part")
        ax.legend()
        ax.set_title("transport training loss")
        files.append(_save(fig, out / "b_loss.svg"))
    wt = _series(report, "wall_trace")
    if wt:
        fig, ax = plt.subplots()
        ax.plot(wt["tau"], wt["E"])
        ax.set_xlabel("time on the inflow wall")
        ax.set_ylabel("error trace E")
        ax.set_title("error entering along the wall")
        files.append(_save(fig, out / "b_wall_trace.svg"))
    ef = _series(report, "error_field")
    if ef:
        fig, ax = plt.subplots()
        xs = np.asarray(ef["xs"])
        ts = np.asarray(ef["ts"])
        vals = np.asarray(ef["values"])
        pc = ax.pcolormesh(xs, ts, vals.T, shading="nearest",
                           cmap="viridis")
        ax.plot([-1.0, 0.0], [0.0, 1.0], "w--", lw=1.2,
                label="boundary characteristic")
        fig.colorbar(pc, ax=ax, label="|error|")
        ax.set_xlabel("x")
        ax.set_ylabel("t")
        ax.legend(loc="lower right")
        ax.set_title("error concentrates past the last characteristic")
        files.append(_save(fig, out / "b_error_field.svg"))
    dr = _series(report, "drift")
    if dr:
        fig, ax = plt.subplots()
        ax.plot(dr["tau"], dr["drift"], "o", label="measured drift")
        ax.plot(dr["tau"], dr["budget"], "-", label="residual budget")
        ax.set_xlabel("characteristic foot time")
        ax.set_ylabel("|value change along characteristic|")
        ax.legend()
        ax.set_title("drift stays under the residual budget")
        files.append(_save(fig, out / "b_drift.svg"))
    return files


def _plot_c(report, out: Path) -> list[Path]:
    files = []
    sep = _series(report, "separation")
    if sep:
        fig, ax = plt.subplots()
        ax.plot(sep["amplitude"], sep["l2"], "o-")
        ax.set_xlabel("far-mass amplitude")
        ax.set_ylabel("in-window L2 separation")
        ax.set_title("far initial data moves the near solution")
        files.append(_save(fig, out / "c_separation.svg"))
    sl = _series(report, "slices_t1")
    if sl:
        fig, ax = plt.subplots()
        ax.plot(sl["x"], sl["base_t1"], label="near-only, t=1")
        if "far_t1" in sl:
            ax.plot(sl["x"], sl["far_t1"], label="with far mass, t=1")
        ax.set_xlabel("x")
        ax.set_ylabel("u")
        ax.legend()
        ax.set_title("end profiles with and without far mass")
        files.append(_save(fig, out / "c_slices_t1.svg"))
    return files


def _plot_d1(report, out: Path) -> list[Path]:
    files = []
    er = _series(report, "errors")
    if er:
        fig, ax = plt.subplots()
        ax.loglog(er["n"], er["sigmoid"], "o-", label="smooth step")
        ax.loglog(er["n"], er["relu"], "s-", label="piecewise-linear step")
        ax.loglog(er["n"], er["relu_law"], "k--",
                  label="closed form sqrt(1/n - 4/(3n^2))")
        ax.set_xlabel("sharpness n")
        ax.set_ylabel("L2 error vs indicator")
        ax.legend()
        ax.set_title("step fits converge")
        files.append(_save(fig, out / "d1_errors.svg"))
    ws = _series(report, "weights")
    if ws:
        fig, ax = plt.subplots()
        ax.loglog(ws["n"], ws["sigmoid"], "o-", label="smooth step")
        ax.loglog(ws["n"], ws["relu"], "s-", label="piecewise-linear step")
        ax.set_xlabel("sharpness n")
        ax.set_ylabel("largest weight magnitude")
        ax.legend()
        ax.set_title("weights blow up as the step sharpens")
        files.append(_save(fig, out / "d1_weights.svg"))
    return files


def _plot_d2(report, out: Path) -> list[Path]:
    files = []
    cells = _series(report, "cells")
    if not cells:
        return files
    bits = np.asarray(cells["bits"])
    dxs = np.asarray(cells["dx"], dtype=float)
    errs = np.asarray(cells["error"], dtype=float)
    preds = np.asarray(cells["prediction"], dtype=float)
    for b in sorted(set(bits.tolist())):
        sel = bits == b
        x = dxs[sel]
        y = errs[sel]
        fig, ax = plt.subplots()
        ax.loglog(x, y, "o", label="achieved error")
        ax.loglog(x, preds[sel], "s", label="predicted floor")
        if len(x) > 1:
            slope, intercept = np.polyfit(np.log(x), np.log(y), 1)
            xf = np.linspace(min(x), max(x), 50)
            ax.loglog(xf, np.exp(intercept) * xf ** slope, "k--",
                      label=f"fit slope {slope:.3f}")
        ax.set_xlabel("grid spacing")
        ax.set_ylabel("L2 error at the stop scale")
        ax.legend()
        ax.set_title(f"error floor scaling at p={b} mantissa bits")
        files.append(_save(fig, out / f"d2_scaling_p{b}.svg"))
    return files


def _plot_e(report, out: Path) -> list[Path]:
    files = []
    sl = _series(report, "slices")
    if sl:
        t_tags = sorted({k.split("_t", 1)[1] for k in sl if "_t" in k},
                        key=float)
        for tag in t_tags:
            fig, ax = plt.subplots()
            ax.plot(sl["x"], sl[f"ref_t{tag}"], "k-", label="reference")
            if f"pinn_t{tag}" in sl:
                ax.plot(sl["x"], sl[f"pinn_t{tag}"], "r--",
                        label="physics-trained")
            if f"data_t{tag}" in sl:
                ax.plot(sl["x"], sl[f"data_t{tag}"], "b:",
                        label="sample fit")
            ax.set_xlabel("x")
            ax.set_ylabel("u")
            ax.legend()
            ax.set_title(f"profiles at t = {tag}")
            files.append(_save(fig, out / f"e_slice_t{tag}.svg"))
    for name in ("loss_adam", "loss_sgd", "loss_data"):
        ls = report.series.get(name)
        if ls:
            fig, ax = plt.subplots()
            _plot_loss_curve(ax, ls)
            ax.set_title(f"training loss: {name.split('_', 1)[1]}")
            files.append(_save(fig, out / f"e_{name}.svg"))
    return files


_PLOTTERS = {"A": _plot_a, "B": _plot_b, "C": _plot_c, "D1": _plot_d1,
             "D2": _plot_d2, "E": _plot_e}


def emit_plots(report: ExperimentReport, out_dir: "str | Path"
               ) -> list[Path]:
    """Render the report's series to SVG files in out_dir."""
    _style()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    plotter = _PLOTTERS.get(report.exp_id)
    if plotter is None:
        warnings.warn(f"no plotter for experiment {report.exp_id!r}")
        return []
    return plotter(report, out)
