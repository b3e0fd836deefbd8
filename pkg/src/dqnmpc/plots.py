"""SVG figures for campaign artifacts.

All output is deterministic: a fixed svg.hashsalt pins matplotlib's
generated element ids and the date metadata is stripped, so re-running
a campaign reproduces byte-identical files.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_regulation_summary", "plot_kkt_residuals",
           "plot_iteration_hist", "plot_cost_curves", "plot_tracking_errors"]

matplotlib.rcParams["svg.hashsalt"] = "dqnmpc"

_COLORS = {"dq": "#1f77b4", "baseline": "#d62728"}
_KKT_NAMES = ("stationarity", "eq_feas", "ineq_feas", "comp")


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _by_controller(records):
    out = {}
    for rec in records:
        out.setdefault(rec.controller, []).append(rec)
    return out


def plot_regulation_summary(records, path):
    """Initial pose error scatter, converged vs not, one panel per controller."""
    groups = _by_controller(records)
    fig, axes = plt.subplots(1, max(len(groups), 1), figsize=(5 * len(groups), 4),
                             squeeze=False)
    for ax, (ctl, recs) in zip(axes[0], sorted(groups.items())):
        for rec in recs:
            p0 = np.linalg.norm(rec.x[0, 0:3] - rec.ref_x[0, 0:3])
            q = rec.x[0, 6:10]
            o0 = 2.0 * np.arctan2(np.linalg.norm(q[1:]), abs(q[0]))
            ax.plot(p0, o0, "o" if rec.converged else "x",
                    color=_COLORS.get(ctl, "k"), ms=5,
                    alpha=0.8 if rec.converged else 1.0)
        ax.set_xlabel("initial position error [m]")
        ax.set_ylabel("initial rotation angle [rad]")
        ax.set_title(f"{ctl}: o converged, x not")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_kkt_residuals(records, path):
    """Box plots of the four KKT residuals over converged per-step solves."""
    groups = _by_controller(records)
    fig, axes = plt.subplots(1, max(len(groups), 1), figsize=(5 * len(groups), 4),
                             squeeze=False)
    for ax, (ctl, recs) in zip(axes[0], sorted(groups.items())):
        cols = [[] for _ in range(4)]
        for rec in recs:
            ok = np.array([s == "converged" for s in rec.status])
            for j in range(4):
                cols[j].extend(rec.kkt[ok, j])
        data = [np.maximum(np.asarray(c, float), 1e-20) for c in cols]
        if all(len(c) for c in data):
            ax.boxplot(data, tick_labels=_KKT_NAMES, whis=(0, 100))
        ax.set_yscale("log")
        ax.set_ylabel("residual")
        ax.set_title(f"{ctl}: KKT residuals at convergence")
        ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_iteration_hist(records, path):
    """Histogram of per-step SQP iteration counts by controller."""
    groups = _by_controller(records)
    fig, ax = plt.subplots(figsize=(6, 4))
    top = 1
    for ctl, recs in sorted(groups.items()):
        top = max(top, int(max(rec.sqp_iters.max(initial=1) for rec in recs)))
    bins = np.arange(0.5, top + 1.5)
    for ctl, recs in sorted(groups.items()):
        allit = np.concatenate([rec.sqp_iters for rec in recs])
        ax.hist(allit, bins=bins, alpha=0.55, label=ctl,
                color=_COLORS.get(ctl, "k"))
    ax.set_xlabel("SQP iterations per solve")
    ax.set_ylabel("count")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_cost_curves(table, path):
    """Orientation cost versus rotation angle for both cost families."""
    table = np.asarray(table, float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(table[:, 0], table[:, 1], color=_COLORS["dq"], label="log-map cost")
    ax.plot(table[:, 0], table[:, 2], color=_COLORS["baseline"],
            label="imaginary-part cost")
    ax.set_xlabel("rotation error angle [rad]")
    ax.set_ylabel("cost (unit weights)")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    _save(fig, path)


def plot_tracking_errors(records, path):
    """Position/orientation error time series, one column per scenario."""
    scens = sorted({rec.scenario for rec in records})
    fig, axes = plt.subplots(2, len(scens), figsize=(4 * len(scens), 6),
                             squeeze=False, sharex="col")
    for j, scen in enumerate(scens):
        for rec in records:
            if rec.scenario != scen:
                continue
            pe = np.linalg.norm(rec.x[:, 0:3] - rec.ref_x[:, 0:3], axis=1)
            qe = np.empty(len(rec.t))
            for k in range(len(rec.t)):
                d = rec.ref_x[k, 6:10]
                r = rec.x[k, 6:10]
                w = abs(float(d @ r))
                qe[k] = 2.0 * np.arccos(min(w, 1.0))
            c = _COLORS.get(rec.controller, "k")
            axes[0][j].plot(rec.t, pe, color=c, label=rec.controller, lw=1)
            axes[1][j].plot(rec.t, qe, color=c, lw=1)
        axes[0][j].set_title(scen)
        axes[0][j].grid(True, alpha=0.3)
        axes[1][j].grid(True, alpha=0.3)
        axes[1][j].set_xlabel("t [s]")
    axes[0][0].set_ylabel("position error [m]")
    axes[1][0].set_ylabel("rotation angle error [rad]")
    axes[0][0].legend()
    fig.tight_layout()
    _save(fig, path)
