"""PNG figures for the CLI ``--figures`` flag.

matplotlib is an optional dependency (``pip install artifact[plot]``) and is
imported only when a figure is requested.
"""

from pathlib import Path

import numpy as np

from .experiments import COMPONENTS, euler_angles


def _pyplot():
    try:
        import matplotlib
    except ImportError:
        raise ImportError("--figures needs matplotlib; install it with 'pip install artifact[plot]'") from None
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    fig.clf()
    return path


def plot_positions(traj, path, ctrl=None):
    """North/east position and Euler angles against time."""
    plt = _pyplot()
    fig, axes = plt.subplots(2, 3, figsize=(12, 6), sharex=True)
    t = traj.times
    x = traj.states[:, 10:13]
    ang = euler_angles(traj.states)
    for i, name in enumerate(("x", "y", "z")):
        axes[0, i].plot(t, x[:, i])
        axes[0, i].set_ylabel(f"{name} [m]")
    for i, name in enumerate(("phi", "theta", "psi")):
        axes[1, i].plot(t, ang[:, i])
        axes[1, i].set_ylabel(f"{name} [rad]")
        axes[1, i].set_xlabel("t [s]")
    if ctrl is not None and np.isfinite(ctrl.t_on):
        for ax in axes.flat:
            ax.axvline(ctrl.t_on, color="0.7", lw=0.8, ls="--")
    fig.suptitle(f"{traj.method}, h = {traj.h:g} ({traj.verdict.value})")
    return _save(fig, path)


def plot_order_study(study, path):
    """Log-log endpoint error against step size, one panel per component."""
    plt = _pyplot()
    fig, axes = plt.subplots(2, 2, figsize=(10, 8))
    methods = sorted({r["method"] for r in study.rows})
    for ax, comp in zip(axes.flat, COMPONENTS):
        for m in methods:
            rows = [r for r in study.rows if r["method"] == m and r["verdict"] == "completed"]
            hs = [r["h"] for r in rows]
            slope, _ = study.slopes.get((m, comp), (float("nan"), 0))
            ax.loglog(hs, [r[comp] for r in rows], "o-", ms=3, label=f"{m} (slope {slope:.2f})")
        ax.set_title(comp)
        ax.set_xlabel("h")
        ax.set_ylabel("relative error")
        ax.legend(fontsize=8)
    return _save(fig, path)


def plot_time_series(ts, path):
    """One panel per column, reference drawn dashed."""
    plt = _pyplot()
    k = len(ts.columns)
    fig, axes = plt.subplots(1, k, figsize=(6 * k, 4), squeeze=False)
    for j, col in enumerate(ts.columns):
        ax = axes[0, j]
        for label, data in ts.series.items():
            style = "k--" if label == "reference" else "-"
            ax.plot(ts.times, data[:, j], style, lw=1, label=label)
        ax.set_xlabel("t [s]")
        ax.set_ylabel(col)
        ax.legend(fontsize=8)
    fig.suptitle(f"h = {ts.h:g}")
    return _save(fig, path)
