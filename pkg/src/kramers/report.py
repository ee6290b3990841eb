"""Output rendering: atomic file writes, delimited tables and figures.

Every figure is rendered to a file next to the delimited output; nothing
opens a window (the Agg backend is forced so the CLI works headless).
"""

from __future__ import annotations

import json
import os
import tempfile

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def write_text(path, text: str):
    """Write atomically: temp file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, payload: dict):
    write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def with_suffix(path, suffix: str) -> str:
    base, _ = os.path.splitext(os.fspath(path))
    return base + suffix


def _new_axes(xlabel, ylabel, title):
    fig, ax = plt.subplots(figsize=(6.0, 4.0), layout="constrained")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    return fig, ax


def _save(fig, path):
    fig.savefig(path, dpi=150)
    plt.close(fig)


def convergence_figure(table, path, title="Exceedance probability vs mass"):
    fig, ax = _new_axes("mass m", "P(sup distance > eps)", title)
    for eps in sorted({r.epsilon for r in table.rows}):
        rows = [r for r in table.rows if r.epsilon == eps]
        m = np.array([r.m for r in rows])
        p = np.array([r.p_exceed for r in rows])
        lo = np.clip(p - np.array([r.ci_low for r in rows]), 0.0, None)
        hi = np.clip(np.array([r.ci_high for r in rows]) - p, 0.0, None)
        ax.errorbar(m, p, yerr=[lo, hi], marker="o", capsize=3, label=f"eps={eps:g}")
    ax.set_xscale("log")
    ax.set_ylim(-0.05, 1.05)
    ax.legend()
    _save(fig, path)


def exit_figure(table, path, title="Exit probability vs mass"):
    fig, ax = _new_axes("mass m", "P(exit by horizon)", title)
    m = np.array([r.m for r in table.rows])
    p = np.array([r.p_exit for r in table.rows])
    lo = np.clip(p - np.array([r.ci_low for r in table.rows]), 0.0, None)
    hi = np.clip(np.array([r.ci_high for r in table.rows]) - p, 0.0, None)
    ax.errorbar(m, p, yerr=[lo, hi], marker="s", capsize=3, color="tab:red")
    ax.set_xscale("log")
    ax.set_ylim(-0.05, 1.05)
    _save(fig, path)


def trajectory_figure(pair, path, title="Coupled trajectories"):
    fig, (ax1, ax2) = plt.subplots(
        2, 1, figsize=(6.5, 5.5), sharex=True, layout="constrained"
    )
    t = pair.times
    n = pair.x_m.shape[1]
    for i in range(n):
        ax1.plot(t, pair.x_m[:, i], lw=0.7, label=f"inertial x_{i+1}")
        ax1.plot(t, pair.x_limit[:, i], lw=0.7, ls="--", label=f"limit x_{i+1}")
    ax1.set_ylabel("position")
    ax1.set_title(title)
    ax1.legend(fontsize=8)
    finite = np.isfinite(pair.distances)
    ax2.plot(t[finite], pair.distances[finite], lw=0.7, color="tab:green")
    ax2.set_xlabel("t")
    ax2.set_ylabel("|x_m - x|")
    _save(fig, path)


def drift_check_figure(positions, pipeline, analytic, path, title="Noise-induced drift check"):
    fig, (ax1, ax2) = plt.subplots(
        2, 1, figsize=(6.0, 5.5), sharex=True, layout="constrained"
    )
    coord = np.asarray(positions)[:, 0]
    order = np.argsort(coord)
    for i in range(pipeline.shape[1]):
        ax1.plot(coord[order], analytic[order, i], lw=1.0, label=f"analytic S_{i+1}")
        ax1.plot(coord[order], pipeline[order, i], lw=0.0, marker=".", ms=2,
                 label=f"pipeline S_{i+1}")
    ax1.set_ylabel("S(x)")
    ax1.set_title(title)
    ax1.legend(fontsize=8)
    err = np.abs(pipeline - analytic).max(axis=1)
    ax2.semilogy(coord[order], np.maximum(err[order], 1e-18), lw=0.8, color="tab:purple")
    ax2.set_xlabel("x_1")
    ax2.set_ylabel("max abs error")
    _save(fig, path)


def shells_figure(report, path, title="Candidate growth toward the domain edge"):
    fig, ax = _new_axes("shell index k", "min V on complement", title)
    ks = [s["k"] for s in report["p1"]]
    mins = [s["v_min"] for s in report["p1"]]
    ax.loglog(ks, mins, marker="o")
    _save(fig, path)
