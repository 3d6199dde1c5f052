"""Static SVG plots from a solve/verify run directory.

Every figure is emitted as SVG plus a CSV carrying the plotted series, so
the data can be re-rendered elsewhere. The SVG output is deterministic
(fixed hash salt, no embedded date): re-running report on a copied run
directory reproduces the files byte for byte.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "assetguard"

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .runio import MissingArtifact  # noqa: E402

__all__ = ["generate_report"]

_EVADER_COLOR = "tab:red"
_PURSUER_COLOR = "tab:blue"
_ASSET_COLOR = "black"


def _savefig(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _load_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data


def _write_csv(path, header, columns):
    np.savetxt(path, np.column_stack(columns), delimiter=",",
               header=",".join(header), comments="", fmt="%.10g")


def _iteration_dirs(run_dir: Path):
    return sorted((run_dir / "iterations").glob("iter_*"))


def _style(converged):
    return "-" if converged else "--"


def _plot_iteration_evolution(run_dir: Path, out_dir: Path, asset_pos):
    it_dirs = _iteration_dirs(run_dir)
    picks = sorted({1, 2, 3, 5, 10, len(it_dirs)} & set(range(1, len(it_dirs) + 1)))
    fig, axes = plt.subplots(2, 3, figsize=(13, 7), sharex=True, sharey=True)
    for ax, idx in zip(axes.ravel(), picks):
        it_dir = it_dirs[idx - 1]
        meta = json.loads((it_dir / "meta.json").read_text())
        ev = _load_csv(it_dir / "evader.csv")
        ax.plot(ev[:, 1], ev[:, 3], _style(meta["evader"]["converged"]),
                color=_EVADER_COLOR, label="evader")
        for name, info in meta["pursuers"].items():
            pu = _load_csv(it_dir / f"{name}.csv")
            ax.plot(pu[:, 1], pu[:, 3], _style(info["converged"]),
                    color=_PURSUER_COLOR, label=name)
        ax.plot([asset_pos[0]], [asset_pos[2]], "o", color=_ASSET_COLOR, ms=5)
        ax.set_title(f"iteration {idx}", fontsize=10)
        ax.grid(alpha=0.3)
    for ax in axes.ravel()[len(picks):]:
        ax.axis("off")
    axes[0, 0].legend(fontsize=8)
    for ax in axes[-1]:
        ax.set_xlabel("x [ft]")
    for ax in axes[:, 0]:
        ax.set_ylabel("altitude [ft]")
    fig.suptitle("best-response evolution (dashed = not converged)")
    _savefig(fig, out_dir / "iterations.svg")


def _plot_final_3d(run_dir: Path, out_dir: Path, asset_pos):
    it_dir = _iteration_dirs(run_dir)[-1]
    meta = json.loads((it_dir / "meta.json").read_text())
    fig = plt.figure(figsize=(8, 6))
    ax = fig.add_subplot(projection="3d")
    ev = _load_csv(it_dir / "evader.csv")
    ax.plot(ev[:, 1], ev[:, 2], ev[:, 3], _style(meta["evader"]["converged"]),
            color=_EVADER_COLOR, label="evader")
    for name, info in meta["pursuers"].items():
        pu = _load_csv(it_dir / f"{name}.csv")
        ax.plot(pu[:, 1], pu[:, 2], pu[:, 3], _style(info["converged"]),
                color=_PURSUER_COLOR, label=name)
    ax.scatter([asset_pos[0]], [asset_pos[1]], [asset_pos[2]], color=_ASSET_COLOR, s=30)
    ax.set_xlabel("x [ft]")
    ax.set_ylabel("y [ft]")
    ax.set_zlabel("z [ft]")
    ax.legend(fontsize=8)
    ax.set_title("final iteration, 3-D")
    _savefig(fig, out_dir / "trajectory_3d.svg")


def _recorded_evader_csv(run_dir: Path):
    log = json.loads((run_dir / "run_log.json").read_text())
    ev = [r for r in log.get("recorded", []) if r["player"] == "evader"]
    if not ev:
        return None
    return run_dir / ev[-1]["file"]


def _plot_states(run_dir: Path, out_dir: Path):
    src = _recorded_evader_csv(run_dir)
    if src is None:
        src = _iteration_dirs(run_dir)[-1] / "evader.csv"
    data = _load_csv(src)
    t = data[:, 0]
    fig, axes = plt.subplots(2, 3, figsize=(13, 6), sharex=True)
    labels = ["p_x [ft]", "p_y [ft]", "p_z [ft]", "v_x [ft/s]", "v_y [ft/s]", "v_z [ft/s]"]
    for i, (ax, lab) in enumerate(zip(axes.ravel(), labels)):
        ax.plot(t, data[:, 1 + i], color=_EVADER_COLOR)
        ax.set_ylabel(lab)
        ax.grid(alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("t [s]")
    fig.suptitle("evader position and velocity")
    _savefig(fig, out_dir / "states.svg")
    _write_csv(out_dir / "states.csv",
               ["t", "p_x", "p_y", "p_z", "v_x", "v_y", "v_z"],
               [t] + [data[:, 1 + i] for i in range(6)])


def _plot_mach_cd(run_dir: Path, out_dir: Path, atmo):
    src = _recorded_evader_csv(run_dir)
    if src is None:
        src = _iteration_dirs(run_dir)[-1] / "evader.csv"
    data = _load_csv(src)
    t, mach = data[:, 0], data[:, 10]
    cd = atmo.drag_coeff.eval(mach)
    fig, ax1 = plt.subplots(figsize=(8, 4.5))
    ax1.plot(t, mach, color=_EVADER_COLOR, label="Mach")
    ax1.set_xlabel("t [s]")
    ax1.set_ylabel("Mach", color=_EVADER_COLOR)
    ax1.grid(alpha=0.3)
    ax2 = ax1.twinx()
    ax2.plot(t, cd, color="tab:green", label="C_D")
    ax2.set_ylabel("drag coefficient", color="tab:green")
    fig.suptitle("evader Mach number and drag coefficient")
    _savefig(fig, out_dir / "mach_cd.svg")
    _write_csv(out_dir / "mach_cd.csv", ["t", "mach", "c_d"], [t, mach, cd])


def _plot_accel(run_dir: Path, out_dir: Path, bounds_g):
    it_dir = _iteration_dirs(run_dir)[-1]
    meta = json.loads((it_dir / "meta.json").read_text())
    g = 32.174
    fig, axes = plt.subplots(3, 1, figsize=(9, 8), sharex=True)
    series, headers = [], ["t"]
    ev = _load_csv(it_dir / "evader.csv")
    for i, ax in enumerate(axes):
        ax.plot(ev[:, 0], ev[:, 7 + i] / g, color=_EVADER_COLOR, label="evader")
        ax.axhline(bounds_g["evader"], color=_EVADER_COLOR, lw=0.6, ls=":")
        ax.axhline(-bounds_g["evader"], color=_EVADER_COLOR, lw=0.6, ls=":")
    series += [ev[:, 0]] + [ev[:, 7 + i] / g for i in range(3)]
    headers += ["evader_u_x_g", "evader_u_y_g", "evader_u_z_g"]
    best = meta.get("best_pursuer")
    if best:
        pu = _load_csv(it_dir / f"{best}.csv")
        for i, ax in enumerate(axes):
            ax.plot(pu[:, 0], pu[:, 7 + i] / g, color=_PURSUER_COLOR, label=best)
            ax.axhline(bounds_g["pursuer"], color=_PURSUER_COLOR, lw=0.6, ls=":")
            ax.axhline(-bounds_g["pursuer"], color=_PURSUER_COLOR, lw=0.6, ls=":")
    for ax, lab in zip(axes, ["u_x [G]", "u_y [G]", "u_z [G]"]):
        ax.set_ylabel(lab)
        ax.grid(alpha=0.3)
    axes[0].legend(fontsize=8)
    axes[-1].set_xlabel("t [s]")
    fig.suptitle("commanded accelerations with box bounds")
    _savefig(fig, out_dir / "accel.svg")
    if best:
        n = min(len(ev), len(pu))
        series = [s[:n] for s in series] + [pu[:n, 7 + i] / g for i in range(3)]
        headers += [f"{best}_u_x_g", f"{best}_u_y_g", f"{best}_u_z_g"]
    _write_csv(out_dir / "accel.csv", headers, series)


def _plot_verification(run_dir: Path, out_dir: Path, asset_pos):
    ver_dir = run_dir / "verify"
    if not (ver_dir / "engagements.csv").exists():
        return False
    fig, ax = plt.subplots(figsize=(8, 6))
    pred = _recorded_evader_csv(run_dir)
    if pred is not None:
        data = _load_csv(pred)
        ax.plot(data[:, 1], data[:, 3], "--", color=_EVADER_COLOR, label="evader (planned)")
    sim = ver_dir / "evader_sim.csv"
    if sim.exists():
        data = _load_csv(sim)
        ax.plot(data[:, 1], data[:, 3], "-", color=_EVADER_COLOR, label="evader (simulated)")
    for path in sorted(ver_dir.glob("pursuer_*.csv")):
        data = _load_csv(path)
        ax.plot(data[:, 1], data[:, 3], "--", color=_PURSUER_COLOR, lw=0.7, alpha=0.7)
    ax.plot([asset_pos[0]], [asset_pos[2]], "o", color=_ASSET_COLOR, ms=6, label="asset")
    ax.set_xlabel("x [ft]")
    ax.set_ylabel("altitude [ft]")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    ax.set_title("open-loop replay vs guided pursuer instances")
    _savefig(fig, out_dir / "verification.svg")
    return True


def generate_report(run_dir) -> Path:
    """Emit all available plots for a run directory; returns the plots dir."""
    from .scenario import parse_scenario

    run_dir = Path(run_dir)
    if not (run_dir / "run_log.json").exists():
        raise MissingArtifact(f"{run_dir}: no run_log.json (run `solve` first)")
    if not _iteration_dirs(run_dir):
        raise MissingArtifact(f"{run_dir}: no completed iterations to plot")
    scenario = parse_scenario(run_dir / "scenario.toml")
    atmo = scenario.atmosphere()
    asset_pos = scenario.asset_position
    out_dir = run_dir / "plots"
    out_dir.mkdir(exist_ok=True)

    bounds_g = {"evader": scenario.evader.u_max_g,
                "pursuer": max((p.u_max_g for p in scenario.pursuers), default=0.0)}
    _plot_iteration_evolution(run_dir, out_dir, asset_pos)
    _plot_final_3d(run_dir, out_dir, asset_pos)
    _plot_states(run_dir, out_dir)
    _plot_mach_cd(run_dir, out_dir, atmo)
    _plot_accel(run_dir, out_dir, bounds_g)
    _plot_verification(run_dir, out_dir, asset_pos)
    return out_dir
