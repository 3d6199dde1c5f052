"""Closed-loop verification: nonlinear integration, conventional pursuer
guidance, engagement adjudication, and LQR tracking of a reference.

The planner's output is an open-loop strategy; this module answers whether
it survives contact with pursuers flown by proportional navigation. True
PN is realized in 3-D through the line-of-sight angular velocity:

    r = p_target - p_pursuer,  v_rel = v_target - v_pursuer
    Omega = (r x v_rel) / (r . r)
    a_cmd = N' * (v_rel x Omega), projected normal to the LOS

which equals the textbook N' * V_c * LOSrate command in the rotation
plane. Augmented PN adds N'/2 times the target acceleration component
normal to the LOS, using the target's true acceleration (the strongest
adversary assumption). Commands are clipped to the pursuer's box bound.

Intercepts are adjudicated with within-step closest-approach interpolation
so high closing speeds cannot step over the capture ball.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import dynamics
from .atmosphere import AtmosphereModel
from .dynamics import G_ACCEL, PlayerSpec
from .transcription import LtvModel, Trajectory

__all__ = [
    "GuidanceLaw",
    "PursuerInstance",
    "EngagementResult",
    "integrate",
    "pn_accel",
    "run_engagement",
    "verify_open_loop",
    "lqr_gains",
    "tracking_input_fn",
    "simulate_closed_loop",
    "replay_node_states",
    "reintegration_position_error",
    "DEFAULT_DT",
    "ARRIVAL_SLACK",
]

DEFAULT_DT = 0.01        # s
ARRIVAL_SLACK = 100.0    # ft added to r_capture for asset-arrival adjudication:
                         # 1% of the characteristic length, the same budget the
                         # dynamic-feasibility audit allows for open-loop drift
TUBE_CLEARANCE = 100.0   # ft the planner must clear guided threat tubes by:
                         # interception-scale margin, far above r_capture


@dataclass(frozen=True)
class GuidanceLaw:
    kind: str            # "pn" | "apn"
    nav_ratio: float     # N'

    def __post_init__(self):
        if self.kind not in ("pn", "apn"):
            raise ValueError(f"unknown guidance law {self.kind!r}")
        if self.nav_ratio <= 0.0:
            raise ValueError("navigation ratio must be positive")


@dataclass(frozen=True)
class PursuerInstance:
    name: str
    spec: PlayerSpec
    law: GuidanceLaw

    @property
    def label(self) -> str:
        return f"{self.name}/{self.law.kind}{self.law.nav_ratio:g}"


@dataclass
class EngagementResult:
    times: np.ndarray
    evader_states: np.ndarray            # (N, 6)
    evader_inputs: np.ndarray            # (N, 3)
    pursuer_states: np.ndarray           # (n_inst, N, 6)
    instances: list[PursuerInstance]
    min_separation: np.ndarray           # (n_inst,)
    t_closest: np.ndarray                # (n_inst,)
    asset_miss: float
    t_asset_miss: float
    outcome: str                         # evader_reaches_asset | pursuer_intercepts | timeout
    outcome_time: float | None
    arrive_radius: float
    capture_radius: float
    intercepted_by: int | None = None


def integrate(x0, input_fn, spec: PlayerSpec, atmo: AtmosphereModel, t_span, dt):
    """Fixed-step RK4 on the point-mass dynamics with a time-based input.

    input_fn(t) returns the commanded acceleration, which is clipped to the
    player's box bound before use. Returns (times, states, inputs) sampled
    at t0 + j*dt. Aborts on non-finite states.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    t0, t1 = t_span
    n = max(1, int(np.ceil((t1 - t0) / dt - 1e-12)))
    times = t0 + dt * np.arange(n + 1)
    states = np.empty((n + 1, 6))
    inputs = np.empty((n + 1, 3))
    states[0] = np.asarray(x0, dtype=float)
    bound = spec.u_max

    def u_of(t):
        return np.clip(np.asarray(input_fn(t), dtype=float), -bound, bound)

    def f(t, x):
        return dynamics.state_deriv(x, u_of(t), spec, atmo)

    for j in range(n):
        t, x = times[j], states[j]
        inputs[j] = u_of(t)
        k1 = f(t, x)
        k2 = f(t + 0.5 * dt, x + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, x + 0.5 * dt * k2)
        k4 = f(t + dt, x + dt * k3)
        states[j + 1] = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(states[j + 1])):
            raise FloatingPointError(f"integration diverged at t={t + dt:.3f}s")
    inputs[n] = u_of(times[n])
    return times, states, inputs


def pn_accel(pursuer_state, evader_state, law: GuidanceLaw,
             evader_accel=None, u_max: float | None = None):
    """Commanded pursuer acceleration under (augmented) proportional navigation."""
    p = np.asarray(pursuer_state, dtype=float)
    e = np.asarray(evader_state, dtype=float)
    r = e[:3] - p[:3]
    nr2 = float(r @ r)
    if nr2 <= 0.0:
        raise ValueError("zero relative position: engagement already terminal")
    v_rel = e[3:6] - p[3:6]
    omega = np.cross(r, v_rel) / nr2
    a = law.nav_ratio * np.cross(v_rel, omega)
    rhat = r / np.sqrt(nr2)
    a = a - (a @ rhat) * rhat
    if law.kind == "apn":
        a_t = np.zeros(3) if evader_accel is None else np.asarray(evader_accel, dtype=float)
        a_t_perp = a_t - (a_t @ rhat) * rhat
        a = a + 0.5 * law.nav_ratio * a_t_perp
    if u_max is not None:
        a = np.clip(a, -u_max, u_max)
    return a


def _pn_batch(xp, xe, a_e, nav, apn_mask, u_max):
    """Vectorized PN/APN command for a batch of pursuer instances."""
    r = xe[:3][None, :] - xp[:, :3]
    nr2 = np.maximum(np.einsum("ij,ij->i", r, r), 1e-9)
    v_rel = xe[3:6][None, :] - xp[:, 3:6]
    omega = np.cross(r, v_rel) / nr2[:, None]
    a = nav[:, None] * np.cross(v_rel, omega)
    rhat = r / np.sqrt(nr2)[:, None]
    a -= np.einsum("ij,ij->i", a, rhat)[:, None] * rhat
    a_t_perp = a_e[None, :] - np.einsum("j,ij->i", a_e, rhat)[:, None] * rhat
    a += np.where(apn_mask[:, None], 0.5 * nav[:, None] * a_t_perp, 0.0)
    return np.clip(a, -u_max[:, None], u_max[:, None])


def run_engagement(evader_input_fn, e_spec: PlayerSpec, e_x0,
                   instances: list[PursuerInstance], atmo: AtmosphereModel,
                   asset_pos, capture_radius: float, arrive_radius: float,
                   t_max: float, dt: float = DEFAULT_DT,
                   evader_u_clip: float | None = None) -> EngagementResult:
    """Integrate one engagement and adjudicate it.

    evader_input_fn(t, x_evader) may be open-loop (ignore the state) or a
    tracking law. Every pursuer instance flies its own guidance law against
    the simulated evader; the instances do not interact with each other.
    """
    n_inst = len(instances)
    asset_pos = np.asarray(asset_pos, dtype=float)
    e_clip = e_spec.u_max if evader_u_clip is None else evader_u_clip
    s_over_m = np.array([inst.spec.ref_area / inst.spec.mass for inst in instances])
    p_umax = np.array([inst.spec.u_max for inst in instances])
    nav = np.array([inst.law.nav_ratio for inst in instances])
    apn = np.array([inst.law.kind == "apn" for inst in instances])

    n = max(1, int(np.ceil(t_max / dt - 1e-12)))
    times = dt * np.arange(n + 1)
    xe_hist = np.empty((n + 1, 6))
    ue_hist = np.empty((n + 1, 3))
    xp_hist = np.empty((n_inst, n + 1, 6))
    xe = np.asarray(e_x0, dtype=float).copy()
    xp = np.stack([inst.spec.x0 for inst in instances]) if n_inst else np.zeros((0, 6))
    xe_hist[0] = xe
    xp_hist[:, 0] = xp

    def drag_batch(x):
        v = x[:, 3:6]
        speed = np.linalg.norm(v, axis=1)
        rho = atmo.density.eval(x[:, 2])
        cd = atmo.drag_coeff.eval(speed / atmo.speed_of_sound.eval(x[:, 2]))
        return (-0.5 * s_over_m * rho * cd * speed)[:, None] * v

    def derivs(t, xe_, xp_):
        ue = np.clip(np.asarray(evader_input_fn(t, xe_), dtype=float), -e_clip, e_clip)
        ae = ue + dynamics.drag_accel(xe_, e_spec, atmo)
        dxe = np.empty(6)
        dxe[:3] = xe_[3:6]
        dxe[3:6] = ae
        if n_inst:
            up = _pn_batch(xp_, xe_, ae, nav, apn, p_umax)
            dxp = np.empty_like(xp_)
            dxp[:, :3] = xp_[:, 3:6]
            dxp[:, 3:6] = up + drag_batch(xp_)
        else:
            dxp = xp_
        return dxe, dxp, ue

    for j in range(n):
        t = times[j]
        k1e, k1p, ue = derivs(t, xe, xp)
        ue_hist[j] = ue
        k2e, k2p, _ = derivs(t + 0.5 * dt, xe + 0.5 * dt * k1e, xp + 0.5 * dt * k1p)
        k3e, k3p, _ = derivs(t + 0.5 * dt, xe + 0.5 * dt * k2e, xp + 0.5 * dt * k2p)
        k4e, k4p, _ = derivs(t + dt, xe + dt * k3e, xp + dt * k3p)
        xe = xe + (dt / 6.0) * (k1e + 2 * k2e + 2 * k3e + k4e)
        xp = xp + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        if not (np.all(np.isfinite(xe)) and np.all(np.isfinite(xp))):
            raise FloatingPointError(f"engagement integration diverged at t={t + dt:.3f}s")
        xe_hist[j + 1] = xe
        xp_hist[:, j + 1] = xp
    ue_hist[n] = np.clip(np.asarray(evader_input_fn(times[n], xe), dtype=float),
                         -e_clip, e_clip)

    return _adjudicate(times, xe_hist, ue_hist, xp_hist, instances, asset_pos,
                       capture_radius, arrive_radius, dt)


def _first_crossing(rel, times, radius):
    """First time ||rel(t)|| <= radius under piecewise-linear motion, else inf."""
    d = np.linalg.norm(rel, axis=-1)
    if d[0] <= radius:
        return times[0]
    r0 = rel[:-1]
    dr = np.diff(rel, axis=0)
    a = np.einsum("ij,ij->i", dr, dr)
    b = 2.0 * np.einsum("ij,ij->i", r0, dr)
    c = np.einsum("ij,ij->i", r0, r0) - radius**2
    disc = b * b - 4.0 * a * c
    with np.errstate(divide="ignore", invalid="ignore"):
        s = (-b - np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a)
    hit = (disc >= 0.0) & (s >= 0.0) & (s <= 1.0) & (a > 0.0)
    # also catch a sample already inside (covers a == 0 edge cases)
    inside = d[1:] <= radius
    candidates = np.where(hit, s, np.where(inside, 1.0, np.inf))
    idx = np.where(np.isfinite(candidates))[0]
    if idx.size == 0:
        return np.inf
    j = idx[0]
    return times[j] + candidates[j] * (times[j + 1] - times[j])


def _closest_approach(rel, times):
    """(min distance, time) with within-step linear interpolation."""
    r0 = rel[:-1]
    dr = np.diff(rel, axis=0)
    a = np.einsum("ij,ij->i", dr, dr)
    b = np.einsum("ij,ij->i", r0, dr)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.clip(np.where(a > 0.0, -b / a, 0.0), 0.0, 1.0)
    pmin = r0 + s[:, None] * dr
    dmin = np.linalg.norm(pmin, axis=1)
    dmin = np.append(dmin, np.linalg.norm(rel[-1]))
    s = np.append(s, 0.0)
    j = int(np.argmin(dmin))
    t = times[j] + (s[j] * (times[j + 1] - times[j]) if j < len(times) - 1 else 0.0)
    return float(dmin[j]), float(t)


def _adjudicate(times, xe_hist, ue_hist, xp_hist, instances, asset_pos,
                capture_radius, arrive_radius, dt):
    n_inst = len(instances)
    rel_asset = xe_hist[:, :3] - asset_pos[None, :]
    t_arrive = _first_crossing(rel_asset, times, arrive_radius)
    t_hits = np.array([
        _first_crossing(xp_hist[i, :, :3] - xe_hist[:, :3], times, capture_radius)
        for i in range(n_inst)
    ]) if n_inst else np.zeros(0)

    t_int = float(np.min(t_hits)) if n_inst and np.any(np.isfinite(t_hits)) else np.inf
    if t_int < t_arrive:
        outcome, t_out = "pursuer_intercepts", t_int
        hit_by = int(np.argmin(t_hits))
    elif np.isfinite(t_arrive):
        outcome, t_out = "evader_reaches_asset", t_arrive
        hit_by = None
    else:
        outcome, t_out = "timeout", None
        hit_by = None

    # closest approaches over the live window only
    end = len(times) if t_out is None else min(len(times), int(np.ceil(t_out / dt)) + 1)
    end = max(end, 2)
    min_sep = np.empty(n_inst)
    t_ca = np.empty(n_inst)
    for i in range(n_inst):
        min_sep[i], t_ca[i] = _closest_approach(
            xp_hist[i, :end, :3] - xe_hist[:end, :3], times[:end])
    asset_miss, t_miss = _closest_approach(rel_asset[:end], times[:end])

    return EngagementResult(
        times=times, evader_states=xe_hist, evader_inputs=ue_hist,
        pursuer_states=xp_hist, instances=list(instances),
        min_separation=min_sep, t_closest=t_ca,
        asset_miss=asset_miss, t_asset_miss=t_miss,
        outcome=outcome, outcome_time=t_out,
        arrive_radius=arrive_radius, capture_radius=capture_radius,
        intercepted_by=hit_by,
    )


def make_instances(pursuers: list[PlayerSpec], laws=("pn", "apn"),
                   ratios=(3.0, 4.0, 5.0)) -> list[PursuerInstance]:
    """The verification roster: every (pursuer, law, ratio) combination."""
    return [
        PursuerInstance(p.name, p, GuidanceLaw(kind, float(r)))
        for p in pursuers for kind in laws for r in ratios
    ]


def guidance_threat_tubes(evader_traj: Trajectory, e_spec: PlayerSpec,
                          pursuers: list[PlayerSpec], atmo: AtmosphereModel,
                          laws=("pn", "apn"), ratios=(3.0, 4.0, 5.0),
                          dt: float = 0.02, node_stride: int = 3) -> list[Trajectory]:
    """Conventional-guidance flyouts against the evader's current plan.

    Each pursuer instance from the verification roster chases the replayed
    plan; its path up to closest approach is returned as a fixed threat
    trajectory. The planner must clear these tubes in addition to the
    opponents' optimized responses: a plan that only defeats the latest
    optimized response is re-intercepted next round by a guided pursuer,
    so the tubes are what drive the loop out of that cycle.
    """
    if not pursuers:
        return []
    instances = make_instances(pursuers, laws, ratios)
    res = run_engagement(
        lambda t, _x: evader_traj.input_at(t), e_spec, evader_traj.states[0],
        instances, atmo, asset_pos=evader_traj.states[-1, :3],
        capture_radius=1e-6, arrive_radius=1e-6,
        t_max=evader_traj.final_time, dt=dt)
    tubes = []
    for i in range(len(instances)):
        # cut the tube at the first attack's closest approach: once the
        # chaser whiffs and opens out, the remainder of its flight is just
        # a re-attack on a non-reacting replay, and carrying it would drape
        # keep-out rows over the entire plan
        d = np.linalg.norm(res.pursuer_states[i, :, :3] - res.evader_states[:, :3], axis=1)
        j_end = len(d) - 1
        running_min = d[0]
        for j in range(1, len(d)):
            running_min = min(running_min, d[j])
            if d[j] > 1.5 * running_min + 100.0 and running_min < d[0]:
                j_end = int(np.argmin(d[:j + 1]))
                break
        t_end = max(res.times[j_end], 3 * dt)
        n_end = min(int(np.ceil(t_end / dt)) + 1, len(res.times))
        idx = np.r_[np.arange(0, n_end - 1, node_stride), n_end - 1]
        tubes.append(Trajectory(
            states=res.pursuer_states[i, idx],
            inputs=np.zeros((idx.size, 3)),
            final_time=float(res.times[idx[-1]]) if res.times[idx[-1]] > 0 else 3 * dt,
            keep_out=TUBE_CLEARANCE,
        ))
    return tubes


def verify_open_loop(evader_traj: Trajectory, e_spec: PlayerSpec,
                     pursuers: list[PlayerSpec], atmo: AtmosphereModel,
                     asset_pos, capture_radius: float,
                     laws=("pn", "apn"), ratios=(3.0, 4.0, 5.0),
                     t_max: float = 60.0, dt: float = DEFAULT_DT,
                     arrival_slack: float = ARRIVAL_SLACK) -> EngagementResult:
    """Replay the evader's planned inputs open-loop against every pursuer
    instance (laws x ratios per pursuer) and adjudicate the engagement."""
    instances = make_instances(pursuers, laws, ratios)
    return run_engagement(
        lambda t, _x: evader_traj.input_at(t), e_spec, evader_traj.states[0],
        instances, atmo, asset_pos, capture_radius,
        capture_radius + arrival_slack, t_max, dt)


# ---------------------------------------------------------------------------
# LQR tracking


def lqr_gains(ltv: LtvModel, q_state=1.0, r_input=1.0, q_terminal=1.0e3):
    """Backward Riccati recursion on the discrete LTV model (scaled units).

    The two FOH input maps are lumped (B = Bm + Bp) for feedback design.
    Scalars broadcast to diagonal weight matrices. Returns gains with
    u_k = -K_k @ state_deviation_k, shape (K-1, 3, 6).
    """
    nx, nu = 6, 3
    Q = np.eye(nx) * q_state if np.isscalar(q_state) else np.asarray(q_state, dtype=float)
    R = np.eye(nu) * r_input if np.isscalar(r_input) else np.asarray(r_input, dtype=float)
    QT = np.eye(nx) * q_terminal if np.isscalar(q_terminal) else np.asarray(q_terminal, dtype=float)
    n_int = ltv.n_intervals
    gains = np.empty((n_int, nu, nx))
    P = QT.copy()
    for k in range(n_int - 1, -1, -1):
        A = ltv.A[k]
        B = ltv.Bm[k] + ltv.Bp[k]
        S = R + B.T @ P @ B
        K = np.linalg.solve(S, B.T @ P @ A)
        P = Q + A.T @ P @ A - (B.T @ P @ A).T @ K
        if not np.all(np.isfinite(P)):
            raise FloatingPointError(f"Riccati recursion diverged at interval {k}")
        gains[k] = K
    return gains


def tracking_input_fn(reference: Trajectory, gains, scales):
    """Closed-loop input: reference feedforward plus scaled-state feedback."""
    n_int = gains.shape[0]

    def fn(t, x):
        tau = np.clip(t / reference.final_time, 0.0, 1.0)
        k = min(int(tau * n_int), n_int - 1)
        dchi = scales.scale_state(x) - scales.scale_state(reference.state_at(t))
        dmu = -gains[k] @ dchi
        return reference.input_at(t) + dmu * scales.u_scale

    return fn


def simulate_closed_loop(reference: Trajectory, ltv: LtvModel, e_spec: PlayerSpec,
                         pursuers: list[PlayerSpec], atmo: AtmosphereModel,
                         asset_pos, capture_radius: float,
                         laws=("pn", "apn"), ratios=(3.0, 4.0, 5.0),
                         q_state=1.0, r_input=1.0, q_terminal=1.0e3,
                         t_max: float = 60.0, dt: float = DEFAULT_DT,
                         arrival_slack: float = ARRIVAL_SLACK,
                         input_buffer_g: float = 1.0) -> EngagementResult:
    """LQR-tracked replay of the reference trajectory.

    The closed-loop input bound is the planning bound plus ``input_buffer_g``
    (the planner leaves that much headroom for corrective action).
    """
    gains = lqr_gains(ltv, q_state, r_input, q_terminal)
    scales = dynamics.make_scales(e_spec)
    fn = tracking_input_fn(reference, gains, scales)
    instances = make_instances(pursuers, laws, ratios)
    return run_engagement(
        fn, e_spec, reference.states[0], instances, atmo, asset_pos,
        capture_radius, capture_radius + arrival_slack, t_max, dt,
        evader_u_clip=(e_spec.u_max_g + input_buffer_g) * G_ACCEL)


# ---------------------------------------------------------------------------
# dynamic-feasibility audit


def replay_node_states(traj: Trajectory, spec: PlayerSpec, atmo: AtmosphereModel,
                       substeps: int = 60) -> np.ndarray:
    """Integrate the trajectory's FOH inputs through the nonlinear dynamics,
    node to node, returning the simulated states at the node times."""
    out = np.empty_like(traj.states)
    out[0] = traj.states[0]
    t_nodes = traj.times
    x = traj.states[0].copy()
    bound = spec.u_max if spec.u_max > 0 else np.inf

    def f(t, x_):
        u = np.clip(traj.input_at(t), -bound, bound)
        return dynamics.state_deriv(x_, u, spec, atmo)

    for k in range(traj.node_count - 1):
        h = (t_nodes[k + 1] - t_nodes[k]) / substeps
        t = t_nodes[k]
        for _ in range(substeps):
            k1 = f(t, x)
            k2 = f(t + 0.5 * h, x + 0.5 * h * k1)
            k3 = f(t + 0.5 * h, x + 0.5 * h * k2)
            k4 = f(t + h, x + h * k3)
            x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            t += h
        out[k + 1] = x
    return out


def reintegration_position_error(traj: Trajectory, spec: PlayerSpec,
                                 atmo: AtmosphereModel) -> float:
    """Max node position error of the nonlinear replay, in ft."""
    sim = replay_node_states(traj, spec, atmo)
    return float(np.max(np.linalg.norm(sim[:, :3] - traj.states[:, :3], axis=1)))
