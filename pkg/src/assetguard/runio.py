"""Run-directory serialization.

A solve run is self-describing on disk: the resolved scenario, one CSV per
player per iteration, per-solve SCP histories, the recorded winning
strategies, and a JSON log with convergence flags and the iteration
metric. Verification and report artifacts land in subdirectories of the
same run directory.

Trajectory CSVs carry the fixed column order
t, p_x, p_y, p_z, v_x, v_y, v_z, u_x, u_y, u_z, mach.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import scp as scp_mod
from .atmosphere import AtmosphereModel
from .dynamics import mach as mach_of
from .ibr import IbrIteration, IbrRecord, RecordedStrategy
from .scenario import Scenario, serialize_scenario
from .transcription import Trajectory

__all__ = [
    "TRAJECTORY_COLUMNS",
    "write_trajectory_csv",
    "read_trajectory_csv",
    "init_run_dir",
    "save_iteration",
    "save_summary",
    "load_run_state",
    "MissingArtifact",
]

TRAJECTORY_COLUMNS = ["t", "p_x", "p_y", "p_z", "v_x", "v_y", "v_z",
                      "u_x", "u_y", "u_z", "mach"]


class MissingArtifact(FileNotFoundError):
    """A pipeline stage needs an output the run directory does not have."""


def write_trajectory_csv(path, times, states, inputs, atmo: AtmosphereModel):
    states = np.asarray(states, dtype=float)
    inputs = np.asarray(inputs, dtype=float)
    m = mach_of(states, atmo)
    data = np.column_stack([np.asarray(times, dtype=float), states, inputs, m])
    header = ",".join(TRAJECTORY_COLUMNS)
    np.savetxt(path, data, delimiter=",", header=header, comments="", fmt="%.12g")


def write_planned_trajectory(path, traj: Trajectory, atmo: AtmosphereModel):
    write_trajectory_csv(path, traj.times, traj.states, traj.inputs, atmo)


def read_trajectory_csv(path, converged: bool = False) -> Trajectory:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    times = data[:, 0]
    return Trajectory(states=data[:, 1:7], inputs=data[:, 7:10],
                      final_time=float(times[-1]), converged=converged)


def init_run_dir(run_dir, scenario: Scenario) -> Path:
    run_dir = Path(run_dir)
    for sub in ("iterations", "history", "recorded"):
        (run_dir / sub).mkdir(parents=True, exist_ok=True)
    serialize_scenario(scenario, run_dir / "scenario.toml")
    return run_dir


def _iteration_dir(run_dir, index: int) -> Path:
    return Path(run_dir) / "iterations" / f"iter_{index:02d}"


def save_iteration(run_dir, scenario: Scenario, iteration: IbrIteration,
                   record: IbrRecord, atmo: AtmosphereModel):
    """Persist one completed IBR iteration plus the rolling run log."""
    it_dir = _iteration_dir(run_dir, iteration.index)
    it_dir.mkdir(parents=True, exist_ok=True)
    write_planned_trajectory(it_dir / "evader.csv", iteration.evader_result.trajectory, atmo)
    for spec, res in zip(scenario.pursuers, iteration.pursuer_results):
        write_planned_trajectory(it_dir / f"{spec.name}.csv", res.trajectory, atmo)
    meta = {
        "index": iteration.index,
        "evader": {
            "converged": iteration.evader_result.trajectory.converged,
            "final_time_s": iteration.evader_result.trajectory.final_time,
            "scp_iterations": iteration.evader_result.iterations,
            "note": iteration.evader_result.note,
        },
        "pursuers": {
            spec.name: {
                "converged": res.trajectory.converged,
                "final_time_s": res.trajectory.final_time,
                "scp_iterations": res.iterations,
                "note": res.note,
            }
            for spec, res in zip(scenario.pursuers, iteration.pursuer_results)
        },
        "best_pursuer": (scenario.pursuers[iteration.best_pursuer].name
                         if iteration.best_pursuer is not None else None),
        "best_pursuer_time_s": iteration.best_pursuer_time,
    }
    (it_dir / "meta.json").write_text(json.dumps(meta, indent=1))

    hist_dir = Path(run_dir) / "history"
    scp_mod.export_history(iteration.evader_result.history,
                           hist_dir / f"iter_{iteration.index:02d}_evader.csv")
    for spec, res in zip(scenario.pursuers, iteration.pursuer_results):
        scp_mod.export_history(res.history,
                               hist_dir / f"iter_{iteration.index:02d}_{spec.name}.csv")
    save_summary(run_dir, scenario, record, atmo, complete=False)


def save_summary(run_dir, scenario: Scenario, record: IbrRecord,
                 atmo: AtmosphereModel, complete: bool):
    run_dir = Path(run_dir)
    rec_dir = run_dir / "recorded"
    rec_entries = []
    for r in record.recorded:
        fname = f"{r.player}_iter_{r.iteration:02d}.csv"
        write_planned_trajectory(rec_dir / fname, r.trajectory, atmo)
        rec_entries.append({
            "iteration": r.iteration,
            "player": r.player,
            "file": f"recorded/{fname}",
            "converged": r.trajectory.converged,
            "final_time_s": r.trajectory.final_time,
            "terminal_speed_fts": float(np.linalg.norm(r.trajectory.states[-1, 3:6])),
        })
    done_on_disk = len([p for p in (run_dir / "iterations").glob("iter_*")
                        if (p / "meta.json").exists()])
    summary = {
        "scenario": scenario.name,
        "complete": complete,
        "iterations_done": done_on_disk,
        "n_ibr": scenario.n_ibr,
        "recorded": rec_entries,
        "winner": (rec_entries[-1] if rec_entries else None),
        "frobenius_deltas": record.frobenius_deltas,
        "notes": record.notes,
    }
    (run_dir / "run_log.json").write_text(json.dumps(summary, indent=1))


def load_run_state(run_dir):
    """Reload a (possibly partial) solve run for resuming or verification.

    Returns (summary dict, iterations list, recorded list). Iterations hold
    (index, evader Trajectory, {pursuer name: Trajectory}).
    """
    run_dir = Path(run_dir)
    log = run_dir / "run_log.json"
    if not log.exists():
        raise MissingArtifact(f"{run_dir}: no run_log.json (run `solve` first)")
    summary = json.loads(log.read_text())
    iterations = []
    for it_dir in sorted((run_dir / "iterations").glob("iter_*")):
        meta_path = it_dir / "meta.json"
        if not meta_path.exists():
            continue  # incomplete iteration from an interrupted run
        meta = json.loads(meta_path.read_text())
        evader = read_trajectory_csv(it_dir / "evader.csv",
                                     converged=meta["evader"]["converged"])
        pursuers = {}
        for name, info in meta["pursuers"].items():
            pursuers[name] = read_trajectory_csv(it_dir / f"{name}.csv",
                                                 converged=info["converged"])
        iterations.append((meta["index"], evader, pursuers, meta))
    recorded = []
    for entry in summary.get("recorded", []):
        traj = read_trajectory_csv(run_dir / entry["file"], converged=entry["converged"])
        recorded.append(RecordedStrategy(entry["iteration"], entry["player"], traj))
    return summary, iterations, recorded
