"""The outer game loop: alternating best responses with winner recording.

Each iteration solves every pursuer's best response against the previous
evader trajectory (in parallel, since the pursuers' problems are
decoupled), then the evader's best response against the fresh pursuer
trajectories. A player's converged solution is recorded whenever the
opponent's subsequent solve fails to converge: that is the candidate
winning strategy. Un-converged solutions still carry forward.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import dynamics, scp, simulation
from .scenario import Scenario
from .scp import ScpResult
from .transcription import StructuralInfeasibility, Trajectory

__all__ = [
    "RecordedStrategy",
    "IbrIteration",
    "IbrRecord",
    "ibr_run",
    "frobenius_delta",
    "best_pursuer",
    "default_guesses",
]


TUBE_REFRESH_DELTA = 0.05  # scaled Frobenius change that re-flies the tubes


@dataclass(frozen=True)
class RecordedStrategy:
    iteration: int        # iteration that produced the trajectory
    player: str           # "evader" or the pursuer's name
    trajectory: Trajectory


@dataclass
class IbrIteration:
    index: int                          # 1-based
    pursuer_results: list[ScpResult]
    best_pursuer: int | None            # index into pursuer_results
    best_pursuer_time: float | None
    evader_result: ScpResult


@dataclass
class IbrRecord:
    iterations: list[IbrIteration] = field(default_factory=list)
    recorded: list[RecordedStrategy] = field(default_factory=list)
    frobenius_deltas: list[float] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def winner(self) -> RecordedStrategy | None:
        """Most recent recording, or None ('no winner recorded')."""
        return self.recorded[-1] if self.recorded else None

    def recorded_evaders(self) -> list[RecordedStrategy]:
        return [r for r in self.recorded if r.player == "evader"]


def frobenius_delta(prev: Trajectory, curr: Trajectory) -> float:
    """Frobenius norm of the node-wise scaled state difference."""
    if prev.node_count != curr.node_count:
        raise ValueError("trajectories must have the same node count")
    scale = np.array([dynamics.CHAR_LENGTH] * 3 + [dynamics.CHAR_SPEED] * 3)
    return float(np.linalg.norm((curr.states - prev.states) / scale))


def best_pursuer(results: list[ScpResult]):
    """Pick the pursuer representing P: minimal final time, converged first.

    Returns (index, final_time, any_converged). When no solve converged the
    minimum is over the un-converged times and the flag is False; converged
    solutions win over smaller but dynamically infeasible times.
    """
    if not results:
        raise ValueError("no pursuer results")
    conv = [i for i, r in enumerate(results) if r.trajectory.converged]
    pool = conv if conv else range(len(results))
    idx = min(pool, key=lambda i: results[i].trajectory.final_time)
    return idx, results[idx].trajectory.final_time, bool(conv)


def default_guesses(scenario: Scenario):
    """Initial trajectories: guidance-law flyout for an evader facing
    pursuers (straight line otherwise), straight pursuit lines for the
    pursuers."""
    if scenario.pursuers:
        e0 = scp.evasive_flyout_guess(scenario.evader, scenario.pursuers,
                                      scenario.asset_position,
                                      scenario.atmosphere(), scenario.params)
    else:
        e0 = scp.straight_line_guess(scenario.evader, scenario.asset_position)
    p0 = [scp.pursuit_guess(p, e0) for p in scenario.pursuers]
    return e0, p0


def ibr_run(scenario: Scenario, e0: Trajectory, p0: list[Trajectory],
            n_ibr: int | None = None, n_scp: int | None = None,
            verbose: bool = False, iteration_hook=None,
            first_iteration: int = 1, record: IbrRecord | None = None) -> IbrRecord:
    """Run the alternating best-response loop for n_ibr iterations.

    iteration_hook(iteration: IbrIteration, record: IbrRecord) is invoked
    after each completed iteration (used for checkpointing by the CLI).
    Resumed runs pass first_iteration > 1 with e0/p0 the last stored
    iterates and ``record`` seeded from disk; the initial trajectories then
    count as a solved iterate for the convergence metric.
    """
    if len(p0) != len(scenario.pursuers):
        raise ValueError("one initial guess per pursuer required")
    n_ibr = scenario.n_ibr if n_ibr is None else n_ibr
    n_scp = scenario.n_scp if n_scp is None else n_scp
    if n_ibr < 1:
        raise ValueError("need at least one iteration")

    atmo = scenario.atmosphere()
    record = IbrRecord() if record is None else record
    initial_is_iterate = first_iteration > 1
    e_curr = e0
    p_curr = list(p0)
    # The evader's threat set: the pursuers' optimized responses plus their
    # conventional-guidance flyouts against the current evader iterate,
    # remembered over a few iterations. Pure single-plan alternation
    # limit-cycles here (each marginal dodge defeats only the one frozen
    # plan and is re-intercepted next round); the guided tubes and the
    # short memory accumulate the corridor blockage until strategies that
    # defeat the guidance family itself emerge.
    threat_history: list[list[Trajectory]] = []
    tube_set: list[Trajectory] = []
    tube_anchor: Trajectory | None = None

    def solve_pursuer(i):
        spec = scenario.pursuers[i]
        try:
            return scp.scp_solve(
                "pursuer", spec, p_curr[i], atmo, scenario.params,
                scenario.weights, evader=e_curr, n_scp=n_scp)
        except StructuralInfeasibility as exc:
            # empty deadline window: the pursuer cannot respond at all;
            # carry the previous trajectory forward, un-converged
            return ScpResult(p_curr[i].copy(converged=False), False, 0, [],
                             note=f"structurally infeasible: {exc}")

    for i in range(first_iteration, first_iteration + n_ibr):
        if scenario.pursuers:
            with ThreadPoolExecutor(max_workers=min(4, len(scenario.pursuers))) as pool:
                p_results = list(pool.map(solve_pursuer, range(len(scenario.pursuers))))
        else:
            p_results = []
        new_p = [r.trajectory for r in p_results]
        any_p_conv = any(t.converged for t in new_p)
        if p_results:
            bp_idx, bp_time, _ = best_pursuer(p_results)
        else:
            bp_idx, bp_time = None, None

        if not any_p_conv and e_curr.converged:
            record.recorded.append(RecordedStrategy(i - 1, "evader", e_curr))
        for r in p_results:
            if r.note:
                record.notes.append(f"iteration {i}: {r.note}")

        p_curr = new_p
        # Only dynamically feasible opponent plans enter the keep-out set:
        # an unconverged plan is virtual-control-supported (it "touches"
        # the evader by teleporting), and treating that artifact as a real
        # trajectory forces a pointless keep-out dance around it every
        # iteration. The guided flyout tubes, which are always dynamically
        # real, carry the threat pressure instead.
        threats_now = [p for p in p_curr if p.converged]
        if scenario.guidance_threats:
            # regenerate the guided tubes only when a usable (converged)
            # evader iterate has moved materially since the last flyout:
            # tubes against virtual-control-supported paths are noise, and
            # re-flying them against every micro-change keeps kicking the
            # loop off its fixed point. Once the path settles the threat
            # environment freezes and the alternation becomes a fixed-point
            # iteration on a frozen problem.
            stale = (tube_anchor is None or
                     (e_curr.converged and
                      frobenius_delta(tube_anchor, e_curr) > TUBE_REFRESH_DELTA))
            if stale:
                tube_set = simulation.guidance_threat_tubes(
                    e_curr, scenario.evader, scenario.pursuers, atmo)
                tube_anchor = e_curr
            threats_now += tube_set
        threat_history.append(threats_now)
        del threat_history[:-scenario.evasion_memory]
        threats = [traj for batch in threat_history for traj in batch]
        e_result = scp.scp_solve(
            "evader", scenario.evader, e_curr, atmo, scenario.params,
            scenario.weights, asset_pos=scenario.asset_position,
            pursuers=threats, n_scp=n_scp)
        e_new = e_result.trajectory
        if e_result.note:
            record.notes.append(f"iteration {i}: evader: {e_result.note}")

        if any_p_conv and not e_new.converged:
            record.recorded.append(
                RecordedStrategy(i, scenario.pursuers[bp_idx].name, p_curr[bp_idx]))

        if i >= 2 or (initial_is_iterate and i >= first_iteration):
            record.frobenius_deltas.append(frobenius_delta(e_curr, e_new))
        e_curr = e_new

        iteration = IbrIteration(i, p_results, bp_idx, bp_time, e_result)
        record.iterations.append(iteration)
        if verbose:
            pstat = ",".join(
                f"{scenario.pursuers[j].name}:{'C' if t.converged else 'u'}"
                f"({t.final_time:.2f}s)" for j, t in enumerate(p_curr))
            print(f"  ibr {i:2d}: [{pstat}] evader:"
                  f"{'C' if e_new.converged else 'u'}({e_new.final_time:.2f}s) "
                  f"recorded={len(record.recorded)}")
        if iteration_hook is not None:
            iteration_hook(iteration, record)

    if record.winner is None:
        record.notes.append("no winner recorded")
    return record
