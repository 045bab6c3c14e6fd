"""Figures written to files: Poincare-sphere paths, ensembles and Mueller matrices."""
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_LABELS = ("$S_1$", "$S_2$", "$S_3$")


def _sphere_axes(fig, pos=111):
    ax = fig.add_subplot(pos, projection="3d")
    u, v = np.mgrid[0:2 * np.pi:40j, 0:np.pi:20j]
    ax.plot_wireframe(np.cos(u) * np.sin(v), np.sin(u) * np.sin(v), np.cos(v),
                      color="0.85", linewidth=0.4)
    t = np.linspace(0, 2 * np.pi, 200)
    ax.plot(np.cos(t), np.sin(t), 0 * t, color="0.6", linewidth=0.8)
    ax.set_xlabel(_LABELS[0])
    ax.set_ylabel(_LABELS[1])
    ax.set_zlabel(_LABELS[2])
    ax.set_box_aspect((1, 1, 1))
    ax.set_xlim(-1, 1)
    ax.set_ylim(-1, 1)
    ax.set_zlim(-1, 1)
    return ax


def plot_trajectory(trajectory, path, eigen_axis=None, title=None):
    """Draw one sampled trajectory on the sphere and save it to ``path``."""
    pts = trajectory.points()
    fig = plt.figure(figsize=(5, 5))
    ax = _sphere_axes(fig)
    ax.plot(pts[:, 0], pts[:, 1], pts[:, 2], color="C3", linewidth=1.5)
    ax.scatter(*pts[0], color="C3", s=30, label="input")
    ax.scatter(*pts[-1], color="C0", s=30, label="output")
    if eigen_axis is not None:
        e = np.asarray(eigen_axis)
        ax.plot([-e[0], e[0]], [-e[1], e[1]], [-e[2], e[2]], "k--", linewidth=1, label="$S_E$")
    ax.legend(loc="upper left", fontsize=8)
    if title:
        ax.set_title(title)
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_ensemble(stats, path, title=None, max_points=2000):
    pts = stats.points[:max_points]
    fig = plt.figure(figsize=(5, 5))
    ax = _sphere_axes(fig)
    ax.scatter(pts[:, 0], pts[:, 1], pts[:, 2], s=2, color="C0", alpha=0.5)
    ax.set_title(title or f"resultant length {stats.resultant_length:.3f}")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_report(report, path):
    """Mueller estimate, its element sigmas and the retarder factor as heat maps."""
    panels = [
        ("M", report.mueller["m"]),
        ("sigma(M)", report.mueller["element_sigma"]),
        ("M_R", report.decomposition["m_retard"]),
    ]
    fig, axes = plt.subplots(1, 3, figsize=(11, 3.6))
    for ax, (name, flat) in zip(axes, panels):
        m = np.asarray(flat).reshape(4, 4)
        lim = np.max(np.abs(m)) or 1.0
        cmap = "viridis" if name.startswith("sigma") else "RdBu_r"
        vmin = 0 if name.startswith("sigma") else -lim
        im = ax.imshow(m, cmap=cmap, vmin=vmin, vmax=lim)
        for (i, j), val in np.ndenumerate(m):
            ax.text(j, i, f"{val:.2g}", ha="center", va="center", fontsize=7)
        ax.set_title(name)
        ax.set_xticks(range(4))
        ax.set_yticks(range(4))
        fig.colorbar(im, ax=ax, shrink=0.8)
    circ = report.birefringence.get("circular", {})
    lin = report.birefringence.get("linear", {})
    fig.suptitle(f"dn_CB = {circ.get('delta_n', float('nan')):.4g}   "
                 f"dn_LB = {lin.get('delta_n', float('nan')):.4g}")
    fig.savefig(path, dpi=120, bbox_inches="tight")
    plt.close(fig)
    return path
