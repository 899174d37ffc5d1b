"""Figure rendering for the report path: every plot goes straight to a file.

Uses the Agg backend so runs are headless and the emitted PNGs are
byte-stable for identical inputs.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .planar_system import PlanarSystem, purity_rate

_RC = {
    "figure.dpi": 150,
    "savefig.dpi": 150,
    "lines.linewidth": 1.4,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def _draw_ellipsoid_boundary(ax, system: PlanarSystem, extent=1.05):
    xs = np.linspace(-extent, extent, 400)
    ys = np.linspace(-extent, extent, 400)
    X, Y = np.meshgrid(xs, ys)
    F = purity_rate(X, Y, system)
    ax.contour(X, Y, F, levels=[0.0], colors="gray", linewidths=0.9, linestyles="--")
    ax.add_patch(plt.Circle((0, 0), 1.0, fill=False, color="black", linewidth=0.7))


def apogee_figure(thetas, g, geometry, path):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.0, 3.4))
        ax.plot(thetas, g)
        ax.axhline(geometry.apogee_radius, color="tab:red", linewidth=0.8, linestyle=":")
        ax.set_xlabel("direction angle")
        ax.set_ylabel("chimney radius g")
        ax.set_title(f"apogee radius {geometry.apogee_radius:.6f}")
        _save(fig, path)


def ritz_figure(profile, system: PlanarSystem, path):
    """Trajectory through the chimney and the recovered control profile."""
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.2, 3.6))
        _draw_ellipsoid_boundary(ax1, system)
        ax1.plot(profile.x, profile.y, color="tab:blue")
        ax1.plot([profile.x[0], profile.x[-1]], [profile.y[0], profile.y[-1]], "k.", markersize=6)
        ax1.set_xlabel("x")
        ax1.set_ylabel("y")
        ax1.set_aspect("equal")
        ax1.set_title("time-minimal curve")
        ax2.plot(profile.x, profile.u, color="tab:orange")
        ax2.set_xlabel("x")
        ax2.set_ylabel("u")
        ax2.set_title("recovered control")
        _save(fig, path)


def bangbang_figure(result, system: PlanarSystem, path):
    """Switching trajectory against the two constant-sign comparison arcs."""
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5.2, 4.6))
        _draw_ellipsoid_boundary(ax, system)
        traj = result.trajectory
        ax.plot(result.constant_plus.q[:, 0], result.constant_plus.q[:, 1],
                color="tab:olive", linewidth=0.9, label="u = +1 throughout")
        ax.plot(result.constant_minus.q[:, 0], result.constant_minus.q[:, 1],
                color="tab:purple", linewidth=0.9, label="u = -1 throughout")
        ax.plot(traj.q[:, 0], traj.q[:, 1], color="tab:blue", label="switching")
        for t, q in result.schedule.switches:
            ax.plot(q[0], q[1], "r.", markersize=7)
        ax.set_xlabel("x")
        ax.set_ylabel("y")
        ax.set_aspect("equal")
        ax.legend(loc="best", fontsize=7)
        ax.set_title(f"bang-bang arcs, initial sign {int(result.schedule.initial_sign):+d}")
        _save(fig, path)


def trajectory_figure(traj, system: PlanarSystem | None, path):
    with plt.rc_context(_RC):
        fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8.2, 3.6))
        if traj.q.shape[1] == 2:
            if system is not None:
                _draw_ellipsoid_boundary(ax1, system)
            ax1.plot(traj.q[:, 0], traj.q[:, 1], color="tab:blue")
            ax1.set_xlabel("x")
            ax1.set_ylabel("y")
            ax1.set_aspect("equal")
        else:
            for k, label in enumerate("xyz"):
                ax1.plot(traj.t, traj.q[:, k], label=label)
            ax1.set_xlabel("t")
            ax1.legend(fontsize=7)
        ax1.set_title("state")
        ax2.plot(traj.t, traj.purity, color="tab:green")
        ax2.set_xlabel("t")
        ax2.set_ylabel("purity")
        ax2.set_title("purity along the run")
        _save(fig, path)
