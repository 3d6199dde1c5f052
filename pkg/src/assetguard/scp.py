"""Penalized-trust-region sequential solve loop.

Each iteration linearizes and discretizes about the previous iterate,
assembles the conic subproblem, and solves it. Convergence requires both
a negligible virtual-control penalty (the solution is dynamically feasible
without slack) and a negligible trust-region penalty (the solution stayed
at its linearization point), at the same iterate. Non-converged solutions
are still returned: the game loop uses them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import conic, dynamics, transcription
from .atmosphere import AtmosphereModel
from .conic import SolverSettings
from .dynamics import PlayerSpec
from .transcription import EngagementParams, SubproblemWeights, Trajectory

__all__ = [
    "ScpIterate",
    "ScpResult",
    "scp_solve",
    "straight_line_guess",
    "pursuit_guess",
    "export_history",
]

DEFAULT_N_SCP = 20


@dataclass(frozen=True)
class ScpIterate:
    objective: float
    j_vc: float
    j_tr: float
    status: str


@dataclass
class ScpResult:
    trajectory: Trajectory
    converged: bool
    iterations: int
    history: list[ScpIterate] = field(default_factory=list)
    note: str = ""
    ltv: transcription.LtvModel | None = None


def straight_line_guess(spec: PlayerSpec, target_pos, final_time: float | None = None) -> Trajectory:
    """Crude initializer: straight-line positions, constant velocity, zero input.

    The default final time is distance over the player's initial speed.
    """
    p0 = spec.x0[:3]
    target_pos = np.asarray(target_pos, dtype=float)
    dist = float(np.linalg.norm(target_pos - p0))
    speed0 = float(np.linalg.norm(spec.x0[3:6]))
    if final_time is None:
        final_time = dist / speed0 if speed0 > 0.0 and dist > 0.0 else 1.0
    final_time = max(final_time, 1e-2)
    K = spec.node_count
    alpha = np.linspace(0.0, 1.0, K)[:, None]
    states = np.empty((K, 6))
    states[:, :3] = (1.0 - alpha) * p0 + alpha * target_pos
    states[:, 3:6] = (target_pos - p0) / final_time
    return Trajectory(states=states, inputs=np.zeros((K, 3)), final_time=final_time)


def pursuit_guess(spec: PlayerSpec, evader_guess: Trajectory) -> Trajectory:
    """Straight-line guess toward the evader's predicted position."""
    speed0 = max(float(np.linalg.norm(spec.x0[3:6])), 1.0)
    t_close = float(np.linalg.norm(evader_guess.states[0, :3] - spec.x0[:3])) / speed0
    target = evader_guess.state_at(min(t_close, evader_guess.final_time))[:3]
    return straight_line_guess(spec, target)


def evasive_flyout_guess(e_spec: PlayerSpec, pursuers: list[PlayerSpec],
                         asset_pos, atmo: AtmosphereModel,
                         params: EngagementParams, dt: float = 0.02,
                         reaction_s: float = 2.5) -> Trajectory:
    """Guidance-law flyout initializer for an evader among pursuers.

    Simulates a simple reactive law against guided chasers: brake hard
    while any closing pursuer is inside its reaction envelope (respecting
    the Mach floor), otherwise home on the asset at full authority. The
    integrated path is dynamically feasible by construction and lives in
    the evade-then-reach homotopy class; a straight-line guess anchors the
    solve in the dash class instead, where the keep-out geometry wedges it.
    """
    from . import simulation

    asset_pos = np.asarray(asset_pos, dtype=float)
    asset_state = np.r_[asset_pos, np.zeros(3)]
    u_max = e_spec.u_max
    mach_floor = e_spec.mach_min + 0.01

    evading = [False]  # latched: once threatened, bleed speed to the floor

    def law(t, x, threats):
        v = x[3:6]
        speed = float(np.linalg.norm(v))
        a_local = float(atmo.speed_of_sound.eval(x[2]))
        v_floor = mach_floor * a_local
        for xp in threats:
            rel = x[:3] - xp[:3]
            dist = float(np.linalg.norm(rel))
            closing = float((xp[3:6] - v) @ rel / max(dist, 1.0))
            envelope = params.r_evade + reaction_s * max(closing, 0.0)
            if dist < envelope and closing > 0.0:
                evading[0] = True
                break
        if evading[0]:
            if speed > 1.05 * v_floor and speed > 1.0:
                # bleed speed and keep the high ground: threats below must
                # spend their whole divert budget climbing
                cmd = -v / speed + np.array([0.0, 0.0, 0.35])
                return u_max * cmd / np.linalg.norm(cmd)
            evading[0] = False
        to_asset = asset_pos - x[:3]
        dist = float(np.linalg.norm(to_asset))
        if dist < 1.0 or speed < 1.0:
            return np.zeros(3)
        direction = to_asset / dist
        align = float(v @ direction) / speed
        if align < 0.80 and speed < 1.15 * v_floor:
            # max-rate turn at the Mach floor: pure centripetal command
            perp = direction - align * v / speed
            nrm = float(np.linalg.norm(perp))
            if nrm < 1e-6:
                # anti-parallel: break the symmetry with a dive
                perp = np.array([0.0, 0.0, -1.0]) - (-v[2] / speed**2) * v
                nrm = float(np.linalg.norm(perp))
                if nrm < 1e-6:
                    perp, nrm = np.array([0.0, 1.0, 0.0]), 1.0
            cmd = u_max * perp / nrm
            if speed < v_floor:
                cmd = cmd + 0.3 * u_max * v / speed
            return np.clip(cmd, -u_max, u_max)
        # velocity-error steering: bleed toward the floor while misaligned;
        # home at a managed speed once pointed at the target (the sprint
        # home is marginally faster but hands re-attacking interceptors a
        # hot, predictable tail-chase)
        v_cap = max(0.6 * float(np.linalg.norm(e_spec.x0[3:6])), 2.0 * v_floor)
        v_des = direction * (v_floor if align < 0.80 else min(speed + u_max, v_cap))
        cmd = np.clip(1.5 * (v_des - v), -u_max, u_max)
        if speed < 1.04 * v_floor:
            along = float(cmd @ v) / speed
            if along < 0.0:
                cmd = cmd - along * v / speed
        return np.clip(cmd, -u_max, u_max)

    instances = simulation.make_instances(pursuers, laws=("pn",), ratios=(3.0,))
    xp = np.stack([inst.spec.x0 for inst in instances]) if instances else np.zeros((0, 6))
    x = e_spec.x0.copy()
    t = 0.0
    t_max = min(params.t_hi, params.t_asset)
    samples_t, samples_x, samples_u = [0.0], [x.copy()], [law(0.0, x, xp)]
    n_max = int(np.ceil(t_max / dt))
    for _ in range(n_max):
        u_e = np.clip(law(t, x, xp), -u_max, u_max)

        def f_e(xe):
            return dynamics.state_deriv(xe, u_e, e_spec, atmo)

        k1 = f_e(x)
        k2 = f_e(x + 0.5 * dt * k1)
        k3 = f_e(x + 0.5 * dt * k2)
        k4 = f_e(x + dt * k3)
        x_new = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if len(instances):
            ae = u_e + dynamics.drag_accel(x, e_spec, atmo)
            nav = np.array([inst.law.nav_ratio for inst in instances])
            apn = np.zeros(len(instances), dtype=bool)
            umax_p = np.array([inst.spec.u_max for inst in instances])
            up = simulation._pn_batch(xp, x, ae, nav, apn, umax_p)

            def f_p(xpb):
                out = np.empty_like(xpb)
                out[:, :3] = xpb[:, 3:6]
                for j, inst in enumerate(instances):
                    out[j, 3:6] = up[j] + dynamics.drag_accel(xpb[j], inst.spec, atmo)
                return out

            q1 = f_p(xp)
            q2 = f_p(xp + 0.5 * dt * q1)
            q3 = f_p(xp + 0.5 * dt * q2)
            q4 = f_p(xp + dt * q3)
            xp = xp + dt / 6.0 * (q1 + 2 * q2 + 2 * q3 + q4)
        x = x_new
        t += dt
        samples_t.append(t)
        samples_x.append(x.copy())
        samples_u.append(u_e)
        if np.linalg.norm(x[:3] - asset_pos) <= max(2.0 * params.r_capture, 50.0):
            break

    times = np.asarray(samples_t)
    states = np.asarray(samples_x)
    inputs = np.asarray(samples_u)
    K = e_spec.node_count
    tk = np.linspace(0.0, times[-1], K)
    st = np.stack([np.interp(tk, times, states[:, i]) for i in range(6)], axis=1)
    ut = np.stack([np.interp(tk, times, inputs[:, i]) for i in range(3)], axis=1)
    return Trajectory(states=st, inputs=ut, final_time=float(times[-1]))


def scp_solve(role: str, spec: PlayerSpec, nominal: Trajectory, atmo: AtmosphereModel,
              params: EngagementParams, weights: SubproblemWeights,
              asset_pos=None, pursuers: list[Trajectory] | None = None,
              evader: Trajectory | None = None, n_scp: int = DEFAULT_N_SCP,
              solver_settings: SolverSettings | None = None,
              verbose: bool = False) -> ScpResult:
    """Run the SCP subroutine for one player's best response.

    role "evader" requires asset_pos (and optionally pursuers); role
    "pursuer" requires the fixed evader trajectory. Returns after both
    convergence conditions hold simultaneously or after n_scp iterations;
    the last iterate is returned either way, flagged by its converged bit.
    """
    if role not in ("evader", "pursuer"):
        raise ValueError(f"unknown problem kind {role!r}")
    if role == "evader" and asset_pos is None:
        raise ValueError("evader problem needs the asset position")
    if role == "pursuer" and evader is None:
        raise ValueError("pursuer problem needs the evader trajectory")
    if n_scp < 1:
        raise ValueError("need at least one iteration")

    scales = dynamics.make_scales(spec)
    settings = solver_settings or SolverSettings()
    current = nominal.copy(converged=False)
    history: list[ScpIterate] = []
    ltv = None

    for it in range(n_scp):
        try:
            ltv = transcription.discretize_foh(current, spec, atmo, scales)
        except FloatingPointError as exc:
            return ScpResult(current, False, len(history), history,
                             note=f"discretization failure: {exc}", ltv=ltv)
        # StructuralInfeasibility from the assemblers propagates: an empty
        # time window is game information, not a solver failure
        if role == "evader":
            prob = transcription.assemble_evader_subproblem(
                ltv, current, spec, scales, atmo, asset_pos,
                pursuers or [], params, weights)
        else:
            prob = transcription.assemble_pursuer_subproblem(
                ltv, current, spec, scales, atmo, evader, params, weights)
        sol = conic.solve(prob, settings)
        if sol.status == "numerical_error":
            history.append(ScpIterate(np.nan, np.nan, np.nan, sol.status))
            return ScpResult(current, False, len(history), history,
                             note="conic solver numerical error", ltv=ltv)
        if sol.status in ("infeasible", "unbounded"):
            # virtual controls make dynamics infeasibility representable, so a
            # certified infeasible subproblem means the constraint structure
            # itself conflicts (e.g. the pursuer deadline)
            history.append(ScpIterate(np.nan, np.nan, np.nan, sol.status))
            return ScpResult(current, False, len(history), history,
                             note=f"subproblem {sol.status}", ltv=ltv)

        j_vc, j_tr = transcription.penalty_values(sol.x, prob.layout, current,
                                                  scales, weights)
        history.append(ScpIterate(float(sol.objective), j_vc, j_tr, sol.status))
        conv = (sol.status == "optimal" and j_vc <= weights.eps_vc
                and j_tr <= weights.eps_tr)
        current = transcription.trajectory_from_solution(
            sol.x, prob.layout, scales, converged=conv)
        if verbose:
            print(f"    scp {it + 1:2d}: T={current.final_time:8.4f}s "
                  f"J_vc={j_vc:.3e} J_tr={j_tr:.3e} {sol.status}")
        if conv:
            break
        if (len(history) >= 3 and j_tr <= weights.eps_tr
                and j_vc > weights.eps_vc
                and abs(j_vc - history[-2].j_vc) <= 1e-3 * max(j_vc, 1e-30)
                and abs(history[-2].j_vc - history[-3].j_vc)
                <= 1e-3 * max(history[-2].j_vc, 1e-30)):
            # stalled at an artificial fixed point: the iterate no longer
            # moves but still leans on the relaxation terms; further
            # iterations just reproduce it
            return ScpResult(current, False, len(history), history,
                             note="stalled on persistent relaxation", ltv=ltv)

    return ScpResult(current, current.converged, len(history), history, ltv=ltv)


def export_history(history: list[ScpIterate], path):
    """Write per-iteration (objective, J_vc, J_tr, status) rows to CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "objective", "j_vc", "j_tr", "status"])
        for i, rec in enumerate(history, start=1):
            writer.writerow([i, f"{rec.objective:.12g}", f"{rec.j_vc:.12g}",
                             f"{rec.j_tr:.12g}", rec.status])
