"""Transcription of each player's free-final-time trajectory problem into a
canonical conic subproblem.

Time is normalized to tau = t/T with the final time T a decision variable,
the dynamics are linearized about a nominal trajectory and discretized
exactly under a first-order hold on the input (state transition matrix plus
convolution integrals per interval, each interval restarted at the nominal
node in multiple-shooting fashion). Non-convex constraints become
supporting half-spaces about the nominal; virtual controls and trust-region
cones complete the penalized subproblem.

All subproblem quantities live in scaled variables (see dynamics.make_scales);
trajectories at the module boundary are physical (ft, ft/s, s).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import dynamics
from .atmosphere import AtmosphereModel
from .conic import ConicProblem, SocConstraint
from .dynamics import PlayerSpec, ScaledVars

__all__ = [
    "Trajectory",
    "LtvModel",
    "SubproblemWeights",
    "EngagementParams",
    "SubproblemLayout",
    "StructuralInfeasibility",
    "DegenerateNode",
    "discretize_foh",
    "propagate_nodes",
    "convexify_min_mach",
    "convexify_evasion",
    "capture_constraint",
    "assemble_evader_subproblem",
    "assemble_pursuer_subproblem",
]

NX, NU = 6, 3
MIN_MACH_SPEED_FLOOR = 1.0  # ft/s; below this the Mach gradient is ill-defined


class StructuralInfeasibility(Exception):
    """The subproblem is infeasible by construction (e.g. empty time window)."""


class DegenerateNode(Exception):
    """A nominal node cannot be convexified (diagnostic carried in args)."""


@dataclass
class Trajectory:
    """One player's discrete solution: K state/input nodes and a final time.

    keep_out overrides the engagement evasion radius when this trajectory
    appears in an opponent's threat set (used by the guided-flyout threat
    tubes, which demand interception-scale rather than evasion-scale
    clearance); None means the scenario radius applies.
    """

    states: np.ndarray          # (K, 6) ft / ft/s
    inputs: np.ndarray          # (K, 3) ft/s^2
    final_time: float           # s
    converged: bool = False
    keep_out: float | None = None

    def __post_init__(self):
        self.states = np.asarray(self.states, dtype=float)
        self.inputs = np.asarray(self.inputs, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != NX:
            raise ValueError("states must be (K, 6)")
        if self.inputs.shape != (self.states.shape[0], NU):
            raise ValueError("inputs must be (K, 3)")
        if self.states.shape[0] < 2:
            raise ValueError("need at least two nodes")
        if not self.final_time > 0.0:
            raise ValueError("final time must be positive")

    @property
    def node_count(self) -> int:
        return self.states.shape[0]

    @property
    def tau(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.node_count)

    @property
    def times(self) -> np.ndarray:
        return self.tau * self.final_time

    def state_at(self, t):
        """Linear interpolation of the state nodes in physical time (clamped)."""
        t = np.clip(np.asarray(t, dtype=float), 0.0, self.final_time)
        out = np.empty(np.shape(t) + (NX,))
        for i in range(NX):
            out[..., i] = np.interp(t, self.times, self.states[:, i])
        return out

    def input_at(self, t):
        """First-order-hold input at physical time (zero beyond the final node)."""
        t_arr = np.asarray(t, dtype=float)
        out = np.empty(np.shape(t_arr) + (NU,))
        for i in range(NU):
            out[..., i] = np.interp(t_arr, self.times, self.inputs[:, i])
        return np.where((t_arr <= self.final_time)[..., None], out, 0.0)

    def copy(self, **updates) -> "Trajectory":
        kw = dict(states=self.states.copy(), inputs=self.inputs.copy(),
                  final_time=self.final_time, converged=self.converged,
                  keep_out=self.keep_out)
        kw.update(updates)
        return Trajectory(**kw)


@dataclass
class LtvModel:
    """Per-interval discretized LTV dynamics in scaled variables:

    chi_{k+1} = A_k chi_k + Bm_k mu_k + Bp_k mu_{k+1} + Sig_k That + off_k
    """

    A: np.ndarray     # (K-1, 6, 6)
    Bm: np.ndarray    # (K-1, 6, 3)
    Bp: np.ndarray    # (K-1, 6, 3)
    Sig: np.ndarray   # (K-1, 6)
    off: np.ndarray   # (K-1, 6)

    @property
    def n_intervals(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class SubproblemWeights:
    w_vc: float = 1.0e5
    w_tr: float = 1.0
    eps_vc: float = 1.0e-2
    eps_tr: float = 1.0e-5

    def __post_init__(self):
        if not (self.w_vc > self.w_tr > 0.0):
            raise ValueError("need w_vc >> w_tr > 0")
        if self.eps_vc <= 0.0 or self.eps_tr <= 0.0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class EngagementParams:
    """Scenario-level radii and time bounds shared by all subproblems."""

    r_capture: float           # ft
    r_evade: float             # ft
    t_asset: float = 60.0      # s, upper bound on the evader's final time
    t_lo: float = 1.0          # s
    t_hi: float = 60.0         # s
    t_margin: float = 0.1      # s, margin encoding the strict pursuer deadline
    # optionally keep a threat's terminal position occupied after its own
    # horizon ends (off by default: the keep-out window truncates at the
    # threat's final time)
    threat_persistence: bool = False


@dataclass(frozen=True)
class SubproblemLayout:
    """Variable offsets inside the stacked decision vector.

    Order: node states (K*6), node inputs (K*3), scaled final time (1),
    virtual controls ((K-1)*6), their 1-norm epigraph slacks ((K-1)*6),
    trust-region epigraph slacks (K), keep-out buffer slacks (n_buffer,
    one per evasion row; zero for pursuer problems).
    """

    K: int
    n_buffer: int = 0

    @property
    def off_x(self): return 0

    @property
    def off_u(self): return self.K * NX

    @property
    def off_T(self): return self.K * (NX + NU)

    @property
    def off_nu(self): return self.off_T + 1

    @property
    def off_abs(self): return self.off_nu + (self.K - 1) * NX

    @property
    def off_tr(self): return self.off_abs + (self.K - 1) * NX

    @property
    def off_buf(self): return self.off_tr + self.K

    @property
    def n_vars(self): return self.off_buf + self.n_buffer

    def x_idx(self, k): return self.off_x + k * NX + np.arange(NX)

    def u_idx(self, k): return self.off_u + k * NU + np.arange(NU)

    def nu_idx(self, k): return self.off_nu + k * NX + np.arange(NX)

    def abs_idx(self, k): return self.off_abs + k * NX + np.arange(NX)

    def extract(self, vec):
        """Split a solution vector into (chi, mu, That, nu), all scaled."""
        K = self.K
        chi = vec[self.off_x:self.off_x + K * NX].reshape(K, NX)
        mu = vec[self.off_u:self.off_u + K * NU].reshape(K, NU)
        that = float(vec[self.off_T])
        nu = vec[self.off_nu:self.off_nu + (K - 1) * NX].reshape(K - 1, NX)
        return chi, mu, that, nu

    def buffers(self, vec):
        return vec[self.off_buf:self.off_buf + self.n_buffer]


# ---------------------------------------------------------------------------
# discretization


def _scaled_jacobians(chi, mu, spec, atmo, scales, t_phys):
    """A(tau), B(tau), Sigma(tau) of the scaled, time-normalized dynamics."""
    x = scales.unscale_state(chi)
    u = scales.unscale_input(mu)
    A_p, B_p = dynamics.jacobians(x, u, spec, atmo, scales)
    sx, su = scales.x_scale, scales.u_scale
    A_s = t_phys * (A_p * (sx[None, :] / sx[:, None]))
    B_s = t_phys * (B_p * (su[None, :] / sx[:, None]))
    f_p = dynamics.state_deriv(x, u, spec, atmo)
    Sig = scales.t_scale * (f_p / sx)
    return A_s, B_s, Sig


def discretize_foh(nominal: Trajectory, spec: PlayerSpec, atmo: AtmosphereModel,
                   scales: ScaledVars | None = None, n_substeps: int = 10,
                   deriv_and_jac=None) -> LtvModel:
    """Exact FOH discretization of the linearized, time-normalized dynamics.

    Integrates the state-transition matrix and the convolution integrals for
    the linearly-held input terms, the final-time sensitivity, and the
    offset over each interval with fixed-step RK4, restarting every interval
    at its nominal node. All intervals integrate as one batch.

    deriv_and_jac(x, u) -> (f, A, B), if given, replaces the point-mass
    model with arbitrary physical-variable dynamics (used by the tests to
    check against closed-form discretizations).
    """
    if scales is None:
        scales = dynamics.make_scales(spec)
    K = nominal.node_count
    n_int = K - 1
    dtau = 1.0 / n_int
    t_phys = nominal.final_time
    that = t_phys / scales.t_scale

    chi_nodes = scales.scale_state(nominal.states)
    mu_nodes = scales.scale_input(nominal.inputs)
    mu0, mu1 = mu_nodes[:-1], mu_nodes[1:]

    xt = chi_nodes[:-1].copy()                  # (n_int, 6) integrated nominal
    Phi = np.broadcast_to(np.eye(NX), (n_int, NX, NX)).copy()
    PBm = np.zeros((n_int, NX, NU))
    PBp = np.zeros((n_int, NX, NU))
    PSig = np.zeros((n_int, NX))
    Pom = np.zeros((n_int, NX))

    def model(chi, mu):
        if deriv_and_jac is None:
            return _scaled_jacobians(chi, mu, spec, atmo, scales, t_phys)
        x = scales.unscale_state(chi)
        u = scales.unscale_input(mu)
        f_p, A_p, B_p = deriv_and_jac(x, u)
        sx, su = scales.x_scale, scales.u_scale
        A_s = t_phys * (A_p * (sx[None, :] / sx[:, None]))
        B_s = t_phys * (B_p * (su[None, :] / sx[:, None]))
        return A_s, B_s, scales.t_scale * (f_p / sx)

    def rates(sigma, state):
        """sigma in [0,1] across the interval; state = (xt, Phi, PBm, PBp, PSig, Pom)."""
        x_, Phi_, _, _, _, _ = state
        mu_s = (1.0 - sigma) * mu0 + sigma * mu1
        A_s, B_s, Sig_s = model(x_, mu_s)
        om_s = -(np.einsum("kij,kj->ki", A_s, x_) + np.einsum("kij,kj->ki", B_s, mu_s))
        Phi_inv = np.linalg.inv(Phi_)
        dx = Sig_s * that
        dPhi = A_s @ Phi_
        PB = Phi_inv @ B_s
        return (
            dx * dtau,
            dPhi * dtau,
            PB * ((1.0 - sigma) * dtau),
            PB * (sigma * dtau),
            np.einsum("kij,kj->ki", Phi_inv, Sig_s) * dtau,
            np.einsum("kij,kj->ki", Phi_inv, om_s) * dtau,
        )

    state = (xt, Phi, PBm, PBp, PSig, Pom)
    h = 1.0 / n_substeps
    for j in range(n_substeps):
        s0 = j * h
        k1 = rates(s0, state)
        k2 = rates(s0 + 0.5 * h, tuple(a + 0.5 * h * b for a, b in zip(state, k1)))
        k3 = rates(s0 + 0.5 * h, tuple(a + 0.5 * h * b for a, b in zip(state, k2)))
        k4 = rates(s0 + h, tuple(a + h * b for a, b in zip(state, k3)))
        state = tuple(
            a + (h / 6.0) * (b1 + 2.0 * b2 + 2.0 * b3 + b4)
            for a, b1, b2, b3, b4 in zip(state, k1, k2, k3, k4)
        )

    _, Phi, PBm, PBp, PSig, Pom = state
    if not all(np.all(np.isfinite(arr)) for arr in state):
        bad = [k for k in range(n_int) if not np.all(np.isfinite(Phi[k]))]
        raise FloatingPointError(f"discretization diverged on interval(s) {bad}")
    A_k = Phi
    Bm_k = A_k @ PBm
    Bp_k = A_k @ PBp
    Sig_k = np.einsum("kij,kj->ki", A_k, PSig)
    off_k = np.einsum("kij,kj->ki", A_k, Pom)
    return LtvModel(A=A_k, Bm=Bm_k, Bp=Bp_k, Sig=Sig_k, off=off_k)


def propagate_nodes(model: LtvModel, chi, mu, that):
    """One-interval LTV propagation of each node; returns predicted chi_{k+1}."""
    return (
        np.einsum("kij,kj->ki", model.A, chi[:-1])
        + np.einsum("kij,kj->ki", model.Bm, mu[:-1])
        + np.einsum("kij,kj->ki", model.Bp, mu[1:])
        + model.Sig * that
        + model.off
    )


# ---------------------------------------------------------------------------
# constraint convexification


def convexify_min_mach(x_nominal, u_nominal, spec: PlayerSpec, atmo: AtmosphereModel,
                       scales: ScaledVars, fd_step: float = 1e-6):
    """First-order expansion of M_min - M(x) <= 0 about a nominal node.

    Returns (row, rhs, resid) with ``row @ chi_k <= rhs`` in scaled state
    variables and ``resid`` the constraint residual at the nominal itself.
    """
    x_nominal = np.asarray(x_nominal, dtype=float)
    speed = float(np.linalg.norm(x_nominal[3:6]))
    if speed < MIN_MACH_SPEED_FLOOR:
        raise DegenerateNode(f"nominal speed {speed:.3g} ft/s too small for Mach gradient")
    chi_bar = scales.scale_state(x_nominal)
    m_bar = float(dynamics.mach(x_nominal, atmo))
    grad = np.zeros(NX)
    for i in range(NX):
        cp, cm = chi_bar.copy(), chi_bar.copy()
        cp[i] += fd_step
        cm[i] -= fd_step
        grad[i] = (dynamics.mach(scales.unscale_state(cp), atmo)
                   - dynamics.mach(scales.unscale_state(cm), atmo)) / (2.0 * fd_step)
    resid = spec.mach_min - m_bar
    # M_min - M_bar - grad'(chi - chi_bar) <= 0
    row = -grad
    rhs = -spec.mach_min + m_bar - grad @ chi_bar
    return row, rhs, resid


def convexify_evasion(x_evader_nominal, pursuer_pos, r_evade: float, scales: ScaledVars):
    """Supporting half-space of the keep-out ball about the nominal geometry.

    Returns (row, rhs): ``row @ chi_pos <= rhs`` on the evader's scaled
    position components, conservative with respect to
    ||pursuer_pos - p|| >= r_evade.
    """
    p_bar = np.asarray(x_evader_nominal, dtype=float)[:3]
    pursuer_pos = np.asarray(pursuer_pos, dtype=float)
    delta = pursuer_pos - p_bar
    dist = float(np.linalg.norm(delta))
    if dist <= 0.0:
        delta = np.array([1.0, 0.0, 0.0])  # degenerate tie-break, fixed direction
        dist = 0.0
        dhat = delta
    else:
        dhat = delta / dist
    length = scales.x_scale[0]
    # r_e - |delta| + dhat'(p - p_bar) <= 0, all scaled by the length unit
    row = dhat
    rhs = (dist - r_evade + dhat @ p_bar) / length
    return row, rhs


def capture_constraint(n_vars: int, pos_indices, target_pos, radius: float,
                       scales: ScaledVars) -> SocConstraint:
    """||p(T) - target||_2 <= radius as one second-order cone (scaled)."""
    pos_indices = np.asarray(pos_indices)
    length = scales.x_scale[0]
    F = sp.csr_matrix(
        (np.ones(3), (np.arange(3), pos_indices)), shape=(3, n_vars))
    return SocConstraint(F=F, g=-np.asarray(target_pos, dtype=float) / length,
                         e=np.zeros(n_vars), f=radius / length)


# ---------------------------------------------------------------------------
# subproblem assembly


class _Coo:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, r, c, v):
        r = np.atleast_1d(r)
        c = np.atleast_1d(c)
        v = np.atleast_1d(v)
        n = max(r.size, c.size, v.size)
        self.rows.extend(np.broadcast_to(r, (n,)).tolist())
        self.cols.extend(np.broadcast_to(c, (n,)).tolist())
        self.vals.extend(np.broadcast_to(np.asarray(v, dtype=float), (n,)).tolist())

    def matrix(self, shape):
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=shape)


def _base_problem(ltv: LtvModel, nominal: Trajectory, spec: PlayerSpec,
                  scales: ScaledVars, atmo: AtmosphereModel,
                  weights: SubproblemWeights, t_window, n_buffer: int = 0):
    """Cost, dynamics equalities, bounds, min-Mach rows, epigraphs, trust cones.

    Shared between the evader and pursuer assemblies. Returns the pieces
    plus the layout and scaled nominal for the caller to extend.
    """
    K = nominal.node_count
    lay = SubproblemLayout(K, n_buffer)
    n = lay.n_vars
    chi_bar = scales.scale_state(nominal.states)
    mu_bar = scales.scale_input(nominal.inputs)
    that_bar = nominal.final_time / scales.t_scale

    cost = np.zeros(n)
    cost[lay.off_T] = 1.0
    cost[lay.off_abs:lay.off_abs + (K - 1) * NX] = weights.w_vc
    cost[lay.off_tr:lay.off_tr + K] = weights.w_tr
    cost[lay.off_buf:lay.off_buf + n_buffer] = weights.w_vc

    # dynamics with virtual controls, then pinned initial state
    eq = _Coo()
    beq = np.zeros((K - 1) * NX + NX)
    for k in range(K - 1):
        r0 = k * NX
        rows = r0 + np.arange(NX)
        eq.add(rows, lay.x_idx(k + 1), np.ones(NX))
        for j in range(NX):
            eq.add(np.full(NX, r0 + j), lay.x_idx(k), -ltv.A[k, j])
            eq.add(np.full(NU, r0 + j), lay.u_idx(k), -ltv.Bm[k, j])
            eq.add(np.full(NU, r0 + j), lay.u_idx(k + 1), -ltv.Bp[k, j])
        eq.add(rows, np.full(NX, lay.off_T), -ltv.Sig[k])
        eq.add(rows, lay.nu_idx(k), -np.ones(NX))
        beq[rows] = ltv.off[k]
    r0 = (K - 1) * NX
    eq.add(r0 + np.arange(NX), lay.x_idx(0), np.ones(NX))
    beq[r0 + np.arange(NX)] = chi_bar[0]

    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[lay.off_u:lay.off_u + K * NU] = -1.0   # |u| <= u_max, scaled
    ub[lay.off_u:lay.off_u + K * NU] = 1.0
    t_lo, t_hi = t_window
    if t_hi < t_lo:
        raise StructuralInfeasibility(
            f"final-time window [{t_lo:.3f}, {t_hi:.3f}] s is empty")
    lb[lay.off_T] = t_lo / scales.t_scale
    ub[lay.off_T] = t_hi / scales.t_scale
    lb[lay.off_abs:lay.off_abs + (K - 1) * NX] = 0.0
    lb[lay.off_tr:lay.off_tr + K] = 0.0
    lb[lay.off_buf:lay.off_buf + n_buffer] = 0.0

    ineq = _Coo()
    hvals = []
    row = 0
    # 1-norm epigraph for the virtual controls
    for k in range(K - 1):
        nu_i, ab_i = lay.nu_idx(k), lay.abs_idx(k)
        ineq.add(row + np.arange(NX), nu_i, np.ones(NX))
        ineq.add(row + np.arange(NX), ab_i, -np.ones(NX))
        hvals.extend([0.0] * NX)
        row += NX
        ineq.add(row + np.arange(NX), nu_i, -np.ones(NX))
        ineq.add(row + np.arange(NX), ab_i, -np.ones(NX))
        hvals.extend([0.0] * NX)
        row += NX
    # linearized minimum-Mach at every node
    mach_skipped = []
    for k in range(K):
        try:
            mrow, mrhs, _ = convexify_min_mach(
                nominal.states[k], nominal.inputs[k], spec, atmo, scales)
        except DegenerateNode:
            mach_skipped.append(k)
            continue
        ineq.add(np.full(NX, row), lay.x_idx(k), mrow)
        hvals.append(mrhs)
        row += 1

    socs = []
    for k in range(K):
        coo = _Coo()
        coo.add(np.arange(NX), lay.x_idx(k), np.ones(NX))
        coo.add(NX + np.arange(NU), lay.u_idx(k), np.ones(NU))
        coo.add(NX + NU, lay.off_T, 1.0)
        g = -np.concatenate([chi_bar[k], mu_bar[k], [that_bar]])
        e = np.zeros(n)
        e[lay.off_tr + k] = 1.0
        socs.append(SocConstraint(F=coo.matrix((NX + NU + 1, n)), g=g, e=e, f=0.0))

    return lay, n, cost, eq, beq, lb, ub, ineq, hvals, row, socs, mach_skipped


EVASION_ANCHORS_PER_NODE = 4


def evasion_anchors_in(window: float, final_time: float, node_count: int) -> int:
    """Number of keep-out anchor points inside the active window."""
    span = window / final_time * (node_count - 1)
    return max(1, int(np.ceil(span * EVASION_ANCHORS_PER_NODE)))


def assemble_evader_subproblem(ltv: LtvModel, nominal: Trajectory, spec: PlayerSpec,
                               scales: ScaledVars, atmo: AtmosphereModel,
                               asset_pos, pursuers: list[Trajectory],
                               params: EngagementParams,
                               weights: SubproblemWeights) -> ConicProblem:
    """Convex evader subproblem about the nominal.

    Minimum scaled time plus penalties; capture cone at the final node;
    supporting-hyperplane keep-out rows against each threat trajectory
    over the window min(T_E, T_threat), with threat positions interpolated
    on their own time grids (frozen from the previous iterate).

    Keep-out rows are anchored on a grid finer than the nodes (closing
    speeds cross the whole evasion ball between adjacent nodes, so
    node-only enforcement lets a plan thread the gaps, including exactly
    at the window endpoint, the opponent's planned interception instant).
    Each row carries a nonnegative buffer slack penalized like the virtual
    controls: conflicting half-spaces from several threats about a wedged
    nominal would otherwise make the subproblem certifiably infeasible,
    which the loop treats as unusable; with buffers the pressure shows up
    in the penalty and the iterate remains usable.
    """
    t_hi = min(params.t_hi, params.t_asset)

    # precompute keep-out row descriptors to size the buffer block
    evade_rows = []
    for purs in pursuers:
        if params.threat_persistence:
            window = nominal.final_time
        else:
            window = min(nominal.final_time, purs.final_time)
        frac_hi = window / nominal.final_time
        n_anchor = evasion_anchors_in(window, nominal.final_time, nominal.node_count)
        for f in np.linspace(0.0, frac_hi, 1 + n_anchor):
            t_anchor = f * nominal.final_time
            kf = min(int(np.floor(f * (nominal.node_count - 1))), nominal.node_count - 2)
            theta = f * (nominal.node_count - 1) - kf
            x_bar = (1.0 - theta) * nominal.states[kf] + theta * nominal.states[kf + 1]
            p_pos = purs.state_at(t_anchor)[:3]
            radius = params.r_evade if purs.keep_out is None else purs.keep_out
            erow, erhs = convexify_evasion(x_bar, p_pos, radius, scales)
            evade_rows.append((kf, theta, erow, erhs))

    pieces = _base_problem(ltv, nominal, spec, scales, atmo, weights,
                           (params.t_lo, t_hi), n_buffer=len(evade_rows))
    lay, n, cost, eq, beq, lb, ub, ineq, hvals, row, socs, _ = pieces

    for i, (kf, theta, erow, erhs) in enumerate(evade_rows):
        if theta < 1e-12:
            ineq.add(np.full(3, row), lay.x_idx(kf)[:3], erow)
        else:
            ineq.add(np.full(3, row), lay.x_idx(kf)[:3], (1.0 - theta) * erow)
            ineq.add(np.full(3, row), lay.x_idx(kf + 1)[:3], theta * erow)
        ineq.add(row, lay.off_buf + i, -1.0)
        hvals.append(erhs)
        row += 1

    socs.append(capture_constraint(n, lay.x_idx(lay.K - 1)[:3],
                                   np.asarray(asset_pos, dtype=float),
                                   params.r_capture, scales))

    return ConicProblem(
        c=cost, A=eq.matrix((beq.size, n)), b=beq, lb=lb, ub=ub,
        G=ineq.matrix((row, n)), h=np.asarray(hvals), socs=socs, layout=lay)


def assemble_pursuer_subproblem(ltv: LtvModel, nominal: Trajectory, spec: PlayerSpec,
                                scales: ScaledVars, atmo: AtmosphereModel,
                                evader: Trajectory, params: EngagementParams,
                                weights: SubproblemWeights) -> ConicProblem:
    """Convex pursuer subproblem: intercept the fixed evader trajectory.

    The evader position at the pursuer's free final time enters through a
    first-order time expansion about the nominal final time; the strict
    deadline T < T_E is encoded as T <= T_E - t_margin. Raises
    StructuralInfeasibility when that window is empty.
    """
    t_hi = min(params.t_hi, evader.final_time - params.t_margin)
    if t_hi <= params.t_lo:
        raise StructuralInfeasibility(
            f"pursuer deadline {t_hi:.3f} s does not exceed the floor {params.t_lo:.3f} s")
    pieces = _base_problem(ltv, nominal, spec, scales, atmo, weights,
                           (params.t_lo, t_hi))
    lay, n, cost, eq, beq, lb, ub, ineq, hvals, row, socs, _ = pieces

    length = scales.x_scale[0]
    t_bar = min(nominal.final_time, t_hi)
    e_state = evader.state_at(t_bar)
    p_bar, v_bar = e_state[:3], e_state[3:6]
    coo = _Coo()
    coo.add(np.arange(3), lay.x_idx(lay.K - 1)[:3], np.ones(3))
    coo.add(np.arange(3), np.full(3, lay.off_T), -v_bar * scales.t_scale / length)
    g = -p_bar / length + (v_bar * scales.t_scale / length) * (t_bar / scales.t_scale)
    socs.append(SocConstraint(F=coo.matrix((3, n)), g=g, e=np.zeros(n),
                              f=params.r_capture / length))

    return ConicProblem(
        c=cost, A=eq.matrix((beq.size, n)), b=beq, lb=lb, ub=ub,
        G=ineq.matrix((row, n)), h=np.asarray(hvals), socs=socs, layout=lay)


def trajectory_from_solution(vec, lay: SubproblemLayout, scales: ScaledVars,
                             converged: bool = False) -> Trajectory:
    """Unscale a subproblem solution vector back into a physical trajectory."""
    chi, mu, that, _ = lay.extract(vec)
    return Trajectory(
        states=scales.unscale_state(chi),
        inputs=scales.unscale_input(mu),
        final_time=that * scales.t_scale,
        converged=converged,
    )


def penalty_values(vec, lay: SubproblemLayout, nominal: Trajectory,
                   scales: ScaledVars, weights: SubproblemWeights):
    """(J_vc, J_tr) of a solution vector relative to the nominal, scaled units.

    J_vc aggregates every fictitious relaxation: the dynamics virtual
    controls and the keep-out buffer slacks. Both must vanish for a
    dynamically feasible, constraint-satisfying solution.
    """
    chi, mu, that, nu = lay.extract(vec)
    chi_bar = scales.scale_state(nominal.states)
    mu_bar = scales.scale_input(nominal.inputs)
    that_bar = nominal.final_time / scales.t_scale
    j_vc = weights.w_vc * (np.abs(nu).sum() + np.abs(lay.buffers(vec)).sum())
    dev = np.concatenate(
        [chi - chi_bar, mu - mu_bar, np.full((lay.K, 1), that - that_bar)], axis=1)
    j_tr = weights.w_tr * np.linalg.norm(dev, axis=1).sum()
    return float(j_vc), float(j_tr)
