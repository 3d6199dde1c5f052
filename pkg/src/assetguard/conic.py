"""Reference solver for the canonical convex subproblem:

    minimize    c'x
    subject to  A x = b
                lb <= x <= ub
                G x <= h
                ||F_i x + g_i||_2 <= e_i'x + f_i   for each cone i

Internally the problem is restated in conic standard form (equalities plus
a single cone inequality G_std x + s = h_std, s in nonneg-orthant x
second-order cones) and solved with a primal-dual interior-point method on
the homogeneous self-dual embedding: Nesterov-Todd scaling, Mehrotra
predictor-corrector, sparse LU on the reduced KKT system with one step of
iterative refinement. The embedding yields infeasibility certificates
rather than timeouts, which the game loop relies on.

Alternative backends can be registered through ``ConicBackend``; the
in-repo interior-point method is the default and the only one bundled.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

__all__ = [
    "SocConstraint",
    "ConicProblem",
    "ConicSolution",
    "SolverSettings",
    "KktReport",
    "solve",
    "check_kkt",
]


def _as_sparse(mat, shape):
    if mat is None:
        return sp.csr_matrix(shape)
    if sp.issparse(mat):
        return mat.tocsr().astype(float)
    return sp.csr_matrix(np.atleast_2d(np.asarray(mat, dtype=float)))


@dataclass
class SocConstraint:
    """||F x + g||_2 <= e'x + f."""

    F: object
    g: np.ndarray
    e: np.ndarray
    f: float

    def __post_init__(self):
        self.g = np.atleast_1d(np.asarray(self.g, dtype=float))
        self.e = np.asarray(self.e, dtype=float)
        self.f = float(self.f)
        self.F = _as_sparse(self.F, (self.g.size, self.e.size))
        if self.F.shape != (self.g.size, self.e.size):
            raise ValueError("inconsistent second-order cone dimensions")


@dataclass
class ConicProblem:
    """Canonical convex subproblem in solver-agnostic form."""

    c: np.ndarray
    A: object = None
    b: np.ndarray | None = None
    lb: np.ndarray | None = None
    ub: np.ndarray | None = None
    G: object = None
    h: np.ndarray | None = None
    socs: list[SocConstraint] = field(default_factory=list)
    layout: object = None   # opaque metadata for the caller (variable map)

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.b = np.zeros(0) if self.b is None else np.atleast_1d(np.asarray(self.b, dtype=float))
        self.A = _as_sparse(self.A, (self.b.size, n))
        self.h = np.zeros(0) if self.h is None else np.atleast_1d(np.asarray(self.h, dtype=float))
        self.G = _as_sparse(self.G, (self.h.size, n))
        self.lb = np.full(n, -np.inf) if self.lb is None else np.asarray(self.lb, dtype=float)
        self.ub = np.full(n, np.inf) if self.ub is None else np.asarray(self.ub, dtype=float)
        if self.A.shape != (self.b.size, n) or self.G.shape != (self.h.size, n):
            raise ValueError("matrix shapes inconsistent with vector lengths")
        if self.lb.shape != (n,) or self.ub.shape != (n,):
            raise ValueError("bound vectors must match the variable count")
        if np.any(self.lb > self.ub):
            raise ValueError("lower bound exceeds upper bound")
        for soc in self.socs:
            if soc.e.size != n:
                raise ValueError("cone constraint references out-of-range variables")

    @property
    def n(self) -> int:
        return self.c.size

    def dump(self, path):
        """Write a plain-text description of the problem for offline inspection."""
        with open(path, "w") as fh:
            fh.write(f"variables: {self.n}\n")
            fh.write(f"equalities: {self.A.shape[0]}\n")
            fh.write(f"inequalities: {self.G.shape[0]}\n")
            fh.write(f"second-order cones: {[s.g.size + 1 for s in self.socs]}\n")
            fh.write(f"finite lower bounds: {int(np.sum(np.isfinite(self.lb)))}\n")
            fh.write(f"finite upper bounds: {int(np.sum(np.isfinite(self.ub)))}\n")
            np.savetxt(fh, self.c[None, :], header="cost", comments="# ")
            if self.b.size:
                np.savetxt(fh, self.b[None, :], header="eq rhs", comments="# ")
            if self.h.size:
                np.savetxt(fh, self.h[None, :], header="ineq rhs", comments="# ")


@dataclass
class SolverSettings:
    feastol: float = 1e-8
    abstol: float = 1e-8
    reltol: float = 1e-8
    max_iter: int = 100
    step_frac: float = 0.99
    refine_steps: int = 1
    verbose: bool = False


@dataclass
class ConicSolution:
    status: str                 # optimal | infeasible | unbounded | max_iter | numerical_error
    x: np.ndarray
    objective: float
    duals: dict
    residuals: dict             # primal, dual, gap, relgap
    iterations: int
    solve_time: float

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"


# ---------------------------------------------------------------------------
# cone arithmetic


class _Cone:
    """Nonnegative orthant of size l followed by second-order cones."""

    def __init__(self, l: int, soc_dims: list[int]):
        self.l = l
        self.soc_dims = list(soc_dims)
        self.dim = l + sum(soc_dims)
        self.degree = l + len(soc_dims)
        self._groups = {}
        off = l
        for d in self.soc_dims:
            self._groups.setdefault(d, []).append(off)
            off += d
        self._idx = {
            d: np.asarray(starts)[:, None] + np.arange(d)[None, :]
            for d, starts in self._groups.items()
        }

    def e(self):
        out = np.zeros(self.dim)
        out[: self.l] = 1.0
        for d, idx in self._idx.items():
            out[idx[:, 0]] = 1.0
        return out

    def margin(self, u):
        """Smallest distance of u from each cone boundary (negative = outside)."""
        vals = []
        if self.l:
            vals.append(np.min(u[: self.l]))
        for d, idx in self._idx.items():
            blk = u[idx]
            vals.append(np.min(blk[:, 0] - np.linalg.norm(blk[:, 1:], axis=1)))
        return min(vals) if vals else np.inf

    def max_step(self, u, du):
        """Largest alpha >= 0 with u + alpha*du inside the cone (u interior)."""
        alpha = np.inf
        if self.l:
            neg = du[: self.l] < 0.0
            if np.any(neg):
                alpha = min(alpha, np.min(-u[: self.l][neg] / du[: self.l][neg]))
        for d, idx in self._idx.items():
            ub, db = u[idx], du[idx]
            # margin crossing: (u0+a d0)^2 - |u1+a d1|^2 = qa a^2 + 2 qb a + qc = 0
            # with qc > 0 from the interior; first positive root is the boundary
            qa = db[:, 0] ** 2 - np.sum(db[:, 1:] ** 2, axis=1)
            qb = ub[:, 0] * db[:, 0] - np.sum(ub[:, 1:] * db[:, 1:], axis=1)
            qc = ub[:, 0] ** 2 - np.sum(ub[:, 1:] ** 2, axis=1)
            disc = qb * qb - qa * qc
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.sqrt(np.maximum(disc, 0.0))
                cand = np.full((ub.shape[0], 3), np.inf)
                quad = (np.abs(qa) > 1e-300) & (disc >= 0.0)
                cand[quad, 0] = ((-qb - r) / qa)[quad]
                cand[quad, 1] = ((-qb + r) / qa)[quad]
                lin = (~quad) & (qb < 0.0)
                cand[lin, 2] = (-qc / (2.0 * qb))[lin]
            cand[cand <= 0.0] = np.inf
            block_alpha = cand.min()
            alpha = min(alpha, float(block_alpha))
        return alpha

    def prod(self, u, v):
        """Jordan product u o v."""
        out = np.empty(self.dim)
        if self.l:
            out[: self.l] = u[: self.l] * v[: self.l]
        for d, idx in self._idx.items():
            ub, vb = u[idx], v[idx]
            out[idx[:, 0]] = np.sum(ub * vb, axis=1)
            out[idx[:, 1:].reshape(-1)] = (
                ub[:, :1] * vb[:, 1:] + vb[:, :1] * ub[:, 1:]
            ).reshape(-1)
        return out

    def div(self, lmbda, gamma):
        """Solve lmbda o u = gamma for u."""
        out = np.empty(self.dim)
        if self.l:
            out[: self.l] = gamma[: self.l] / lmbda[: self.l]
        for d, idx in self._idx.items():
            lb, gb = lmbda[idx], gamma[idx]
            det = lb[:, 0] ** 2 - np.sum(lb[:, 1:] ** 2, axis=1)
            u0 = (lb[:, 0] * gb[:, 0] - np.sum(lb[:, 1:] * gb[:, 1:], axis=1)) / det
            out[idx[:, 0]] = u0
            out[idx[:, 1:].reshape(-1)] = ((gb[:, 1:] - u0[:, None] * lb[:, 1:]) / lb[:, :1]).reshape(-1)
        return out


class _NTScaling:
    """Nesterov-Todd scaling W with W z = W^{-1} s = lambda."""

    def __init__(self, cone: _Cone, s, z):
        self.cone = cone
        self.lmbda = np.empty(cone.dim)
        if cone.l:
            self.w_nn = np.sqrt(s[: cone.l] / z[: cone.l])
            self.lmbda[: cone.l] = np.sqrt(s[: cone.l] * z[: cone.l])
        else:
            self.w_nn = np.zeros(0)
        self.beta = {}
        self.v = {}
        for d, idx in cone._idx.items():
            sb, zb = s[idx], z[idx]
            a_s = np.sqrt(sb[:, 0] ** 2 - np.sum(sb[:, 1:] ** 2, axis=1))
            a_z = np.sqrt(zb[:, 0] ** 2 - np.sum(zb[:, 1:] ** 2, axis=1))
            beta = np.sqrt(a_s / a_z)
            sn = sb / a_s[:, None]
            zn = zb / a_z[:, None]
            gam = np.sqrt((1.0 + np.sum(sn * zb / a_z[:, None], axis=1)) / 2.0)
            # scaling point, then hyperbolic Householder vector
            wbar = sn.copy()
            wbar[:, 0] += zn[:, 0]
            wbar[:, 1:] -= zn[:, 1:]
            wbar /= 2.0 * gam[:, None]
            v = wbar.copy()
            v[:, 0] += 1.0
            v /= np.sqrt(2.0 * (wbar[:, 0] + 1.0))[:, None]
            self.beta[d] = beta
            self.v[d] = v
            # scaled variable lambda
            dd = sn[:, 0] + zn[:, 0] + 2.0 * gam
            lam = np.empty_like(sb)
            lam[:, 0] = gam
            lam[:, 1:] = (
                ((gam + zn[:, 0]) / dd)[:, None] * sn[:, 1:]
                + ((gam + sn[:, 0]) / dd)[:, None] * zn[:, 1:]
            )
            lam *= np.sqrt(a_s * a_z)[:, None]
            self.lmbda[idx.reshape(-1)] = lam.reshape(-1)

    def apply(self, u):
        """W u."""
        out = np.empty(self.cone.dim)
        if self.cone.l:
            out[: self.cone.l] = self.w_nn * u[: self.cone.l]
        for d, idx in self.cone._idx.items():
            ub = u[idx]
            v = self.v[d]
            ju = ub.copy()
            ju[:, 1:] *= -1.0
            vu = np.sum(v * ub, axis=1)
            out[idx.reshape(-1)] = (self.beta[d][:, None] * (2.0 * v * vu[:, None] - ju)).reshape(-1)
        return out

    def apply_inv(self, u):
        """W^{-1} u."""
        out = np.empty(self.cone.dim)
        if self.cone.l:
            out[: self.cone.l] = u[: self.cone.l] / self.w_nn
        for d, idx in self.cone._idx.items():
            ub = u[idx]
            v = self.v[d]
            ju = ub.copy()
            ju[:, 1:] *= -1.0
            jv = v.copy()
            jv[:, 1:] *= -1.0
            vju = np.sum(v * ju, axis=1)
            out[idx.reshape(-1)] = ((2.0 * jv * vju[:, None] - ju) / self.beta[d][:, None]).reshape(-1)
        return out

    def w_squared(self):
        """W^2 as a sparse block-diagonal matrix for the KKT system."""
        blocks = []
        if self.cone.l:
            blocks.append(sp.diags(self.w_nn**2))
        counters = {d: 0 for d in self.cone._idx}
        J = {d: np.diag(np.r_[1.0, -np.ones(d - 1)]) for d in self.cone._idx}
        for d in self.cone.soc_dims:
            k = counters[d]
            counters[d] += 1
            v = self.v[d][k]
            H = 2.0 * np.outer(v, v) - J[d]
            blocks.append(self.beta[d][k] ** 2 * (H @ H))
        if not blocks:
            return sp.csr_matrix((0, 0))
        return sp.block_diag(blocks, format="csr")


# ---------------------------------------------------------------------------
# standard-form conversion


class _StandardForm:
    """G_std x + s = h_std with s in the product cone, plus row bookkeeping."""

    def __init__(self, prob: ConicProblem):
        n = prob.n
        rows = []
        rhs = []
        self.ub_idx = np.where(np.isfinite(prob.ub))[0]
        self.lb_idx = np.where(np.isfinite(prob.lb))[0]
        n_ub, n_lb = self.ub_idx.size, self.lb_idx.size

        if n_ub:
            rows.append(sp.csr_matrix(
                (np.ones(n_ub), (np.arange(n_ub), self.ub_idx)), shape=(n_ub, n)))
            rhs.append(prob.ub[self.ub_idx])
        if n_lb:
            rows.append(sp.csr_matrix(
                (-np.ones(n_lb), (np.arange(n_lb), self.lb_idx)), shape=(n_lb, n)))
            rhs.append(-prob.lb[self.lb_idx])
        if prob.h.size:
            rows.append(prob.G)
            rhs.append(prob.h)
        l = n_ub + n_lb + prob.h.size

        soc_dims = []
        for soc in prob.socs:
            head = sp.csr_matrix(-soc.e[None, :])
            rows.append(sp.vstack([head, -soc.F], format="csr"))
            rhs.append(np.concatenate(([soc.f], soc.g)))
            soc_dims.append(soc.g.size + 1)

        self.G = sp.vstack(rows, format="csr") if rows else sp.csr_matrix((0, n))
        self.h = np.concatenate(rhs) if rhs else np.zeros(0)
        self.cone = _Cone(l, soc_dims)
        self.n_ub, self.n_lb, self.n_ineq = n_ub, n_lb, prob.h.size

    def split_duals(self, z):
        """Map a standard-form dual vector back to the caller's blocks."""
        out = {"ub": np.zeros(0), "lb": np.zeros(0), "ineq": np.zeros(0), "soc": []}
        off = 0
        out["ub"] = z[off:off + self.n_ub]
        off += self.n_ub
        out["lb"] = z[off:off + self.n_lb]
        off += self.n_lb
        out["ineq"] = z[off:off + self.n_ineq]
        off += self.n_ineq
        for d in self.cone.soc_dims:
            out["soc"].append(z[off:off + d])
            off += d
        return out


class _Kkt:
    """Sparse LU on the reduced system [[0 A' G'],[A 0 0],[G 0 -W^2]]."""

    def __init__(self, A: sp.csr_matrix, G: sp.csr_matrix):
        self.A = A.tocsr()
        self.G = G.tocsr()
        self.n = A.shape[1]
        self.p = A.shape[0]
        self.m = G.shape[0]
        self._lu = None
        self._Kcsc = None

    def factor(self, W2, reg: float = 0.0):
        n, p, m = self.n, self.p, self.m
        blocks = [
            [sp.csr_matrix((n, n)) if reg == 0.0 else sp.eye(n) * reg, self.A.T, self.G.T],
            [self.A, sp.csr_matrix((p, p)) if reg == 0.0 else -sp.eye(p) * reg, None],
            [self.G, None, -W2 if reg == 0.0 else -(W2 + sp.eye(m) * reg)],
        ]
        K = sp.bmat(blocks, format="csc")
        self._Kcsc = K
        self._lu = splu(K)

    def solve(self, rx, ry, rz, refine_steps=1):
        rhs = np.concatenate([rx, ry, rz])
        sol = self._lu.solve(rhs)
        for _ in range(refine_steps):
            resid = rhs - self._Kcsc @ sol
            sol = sol + self._lu.solve(resid)
        n, p = self.n, self.p
        return sol[:n], sol[n:n + p], sol[n + p:]


# ---------------------------------------------------------------------------
# the interior-point method


def _ipm_solve(prob: ConicProblem, settings: SolverSettings) -> ConicSolution:
    t0 = time.perf_counter()
    n = prob.n
    c, A, b = prob.c, prob.A, prob.b
    std = _StandardForm(prob)
    G, h, cone = std.G, std.h, std.cone
    m, p = cone.dim, b.size

    def finish(status, x, y, z, s, iters, extra=None):
        duals = {"eq": y}
        duals.update(std.split_duals(z))
        res = extra or {}
        return ConicSolution(
            status=status, x=x, objective=float(c @ x), duals=duals,
            residuals=res, iterations=iters, solve_time=time.perf_counter() - t0,
        )

    if m == 0:
        # equality-constrained LP: stationarity c + A'y = 0, Ax = b
        K = sp.bmat([[sp.csr_matrix((n, n)), A.T], [A, None]], format="csc")
        try:
            sol = splu(K).solve(np.concatenate([-c, b]))
        except RuntimeError:
            return finish("numerical_error", np.zeros(n), np.zeros(p), np.zeros(0), np.zeros(0), 0)
        x, y = sol[:n], sol[n:]
        ok = np.linalg.norm(c + A.T @ y) <= settings.feastol * (1 + np.linalg.norm(c))
        return finish("optimal" if ok else "unbounded", x, y, np.zeros(0), np.zeros(0), 0,
                      {"primal": float(np.linalg.norm(A @ x - b)), "dual": 0.0, "gap": 0.0, "relgap": 0.0})

    kkt = _Kkt(A, G)
    e = cone.e()

    # initial point: least-norm primal/dual from a W = I KKT solve
    try:
        kkt.factor(sp.eye(m, format="csr"))
        x, _, zhat = kkt.solve(np.zeros(n), b, h, settings.refine_steps)
        s = -zhat
        xd, y, z = kkt.solve(-c, np.zeros(p), np.zeros(m), settings.refine_steps)
    except RuntimeError:
        try:
            kkt.factor(sp.eye(m, format="csr"), reg=1e-10)
            x, _, zhat = kkt.solve(np.zeros(n), b, h, settings.refine_steps)
            s = -zhat
            xd, y, z = kkt.solve(-c, np.zeros(p), np.zeros(m), settings.refine_steps)
        except RuntimeError:
            return finish("numerical_error", np.zeros(n), np.zeros(p), np.zeros(m), np.zeros(m), 0)

    ms = cone.margin(s)
    if ms < 1e-6:
        s = s + (1.0 - ms) * e
    mz = cone.margin(z)
    if mz < 1e-6:
        z = z + (1.0 - mz) * e
    tau, kappa = 1.0, 1.0

    nrm_b = max(1.0, np.linalg.norm(b))
    nrm_h = max(1.0, np.linalg.norm(h))
    nrm_c = max(1.0, np.linalg.norm(c))
    best = None

    for it in range(settings.max_iter):
        res_x = A.T @ y + G.T @ z + c * tau
        res_y = A @ x - b * tau
        res_z = G @ x + s - h * tau
        res_t = kappa + c @ x + b @ y + h @ z
        mu = (s @ z + tau * kappa) / (cone.degree + 1)

        # stopping metrics on the tau-normalized candidate
        xc, yc, sc, zc = x / tau, y / tau, s / tau, z / tau
        pcost = float(c @ xc)
        dcost = float(-(b @ yc) - h @ zc)
        gap = float(sc @ zc)
        if pcost < 0.0:
            relgap = gap / -pcost
        elif dcost > 0.0:
            relgap = gap / dcost
        else:
            relgap = np.inf
        pres = max(np.linalg.norm(A @ xc - b) / nrm_b, np.linalg.norm(G @ xc + sc - h) / nrm_h)
        dres = np.linalg.norm(A.T @ yc + G.T @ zc + c) / nrm_c
        metrics = {"primal": pres, "dual": dres, "gap": gap, "relgap": relgap}
        if settings.verbose:
            print(f"  ipm {it:3d}: pcost={pcost:+.6e} gap={gap:.2e} pres={pres:.2e} "
                  f"dres={dres:.2e} tau={tau:.2e} kappa={kappa:.2e}")
        best = (xc, yc, zc, sc, metrics)

        if pres <= settings.feastol and dres <= settings.feastol and (
                gap <= settings.abstol or relgap <= settings.reltol):
            return finish("optimal", xc, yc, zc, sc, it, metrics)

        # infeasibility certificates
        by_hz = float(b @ y + h @ z)
        if by_hz < 0.0:
            scale = -1.0 / by_hz
            pinf = np.linalg.norm(A.T @ (y * scale) + G.T @ (z * scale)) / nrm_c
            if pinf <= settings.feastol:
                return finish("infeasible", xc, y * scale, z * scale, sc, it, metrics)
        ctx = float(c @ x)
        if ctx < 0.0:
            scale = -1.0 / ctx
            dinf = max(np.linalg.norm(A @ (x * scale)) / nrm_b,
                       np.linalg.norm(G @ (x * scale) + s * scale) / nrm_h)
            if dinf <= settings.feastol:
                return finish("unbounded", x * scale, yc, zc, s * scale, it, metrics)

        if not np.isfinite(mu) or mu <= 0.0:
            return finish("numerical_error", xc, yc, zc, sc, it, metrics)

        # NT scaling and KKT factorization for this iteration
        try:
            W = _NTScaling(cone, s, z)
            kkt.factor(W.w_squared())
        except (RuntimeError, FloatingPointError, ValueError):
            try:
                kkt.factor(W.w_squared(), reg=1e-12)
            except Exception:
                return finish("numerical_error", xc, yc, zc, sc, it, metrics)
        lam = W.lmbda

        vx, vy, vz = kkt.solve(-c, b, h, settings.refine_steps)
        denom_v = float(c @ vx + b @ vy + h @ vz) - kappa / tau

        def direction(gamma_s, gamma_tau):
            wdiv = W.apply(cone.div(lam, gamma_s))
            ux, uy, uz = kkt.solve(-res_x, -res_y, -res_z + wdiv, settings.refine_steps)
            dtau = (-res_t + gamma_tau / tau - (c @ ux + b @ uy + h @ uz)) / denom_v
            dx = ux + dtau * vx
            dy = uy + dtau * vy
            dz = uz + dtau * vz
            ds = -wdiv - W.apply(W.apply(dz))
            dkappa = -(gamma_tau + kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa

        # affine (predictor) direction
        gs_aff = cone.prod(lam, lam)
        dxa, dya, dza, dsa, dta, dka = direction(gs_aff, tau * kappa)
        alpha = cone.max_step(s, dsa)
        alpha = min(alpha, cone.max_step(z, dza))
        if dta < 0.0:
            alpha = min(alpha, -tau / dta)
        if dka < 0.0:
            alpha = min(alpha, -kappa / dka)
        alpha_aff = min(1.0, alpha)
        mu_aff = ((s + alpha_aff * dsa) @ (z + alpha_aff * dza)
                  + (tau + alpha_aff * dta) * (kappa + alpha_aff * dka)) / (cone.degree + 1)
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3

        # combined (corrector) direction with Mehrotra second-order term
        corr = cone.prod(W.apply_inv(dsa), W.apply(dza))
        gs = gs_aff + corr - sigma * mu * e
        gt = tau * kappa + dta * dka - sigma * mu
        dx, dy, dz, ds, dt, dk = direction(gs, gt)

        alpha = cone.max_step(s, ds)
        alpha = min(alpha, cone.max_step(z, dz))
        if dt < 0.0:
            alpha = min(alpha, -tau / dt)
        if dk < 0.0:
            alpha = min(alpha, -kappa / dk)
        step = min(1.0, settings.step_frac * alpha)
        if not np.isfinite(step) or step <= 0.0:
            return finish("numerical_error", xc, yc, zc, sc, it, metrics)

        x = x + step * dx
        y = y + step * dy
        z = z + step * dz
        s = s + step * ds
        tau += step * dt
        kappa += step * dk
        if tau <= 0.0 or kappa < 0.0 or cone.margin(s) <= 0.0 or cone.margin(z) <= 0.0:
            return finish("numerical_error", xc, yc, zc, sc, it, metrics)

    xc, yc, zc, sc, metrics = best
    return finish("max_iter", xc, yc, zc, sc, settings.max_iter, metrics)


# ---------------------------------------------------------------------------
# public interface

ConicBackend = Callable[[ConicProblem, SolverSettings], ConicSolution]

_BACKENDS: dict[str, ConicBackend] = {"reference": _ipm_solve}


def register_backend(name: str, backend: ConicBackend):
    _BACKENDS[name] = backend


def solve(problem: ConicProblem, settings: Optional[SolverSettings] = None,
          backend: str = "reference") -> ConicSolution:
    """Solve the conic problem; deterministic for identical inputs."""
    return _BACKENDS[backend](problem, settings or SolverSettings())


@dataclass
class KktReport:
    primal: float          # equality + cone feasibility violation norm
    dual: float            # stationarity violation norm
    complementarity: float
    duality_gap: float

    def max_residual(self) -> float:
        return max(self.primal, self.dual, self.complementarity, self.duality_gap)


def check_kkt(problem: ConicProblem, solution: ConicSolution) -> KktReport:
    """Recompute the KKT residuals from the problem data alone.

    Uses only the primal/dual vectors in the solution, not any solver
    internals, so it doubles as an independent certificate of optimality.
    """
    x = solution.x
    d = solution.duals
    c, A, b, G, h = problem.c, problem.A, problem.b, problem.G, problem.h

    viol = []
    if b.size:
        viol.append(A @ x - b)
    fin_ub = np.isfinite(problem.ub)
    fin_lb = np.isfinite(problem.lb)
    if np.any(fin_ub):
        viol.append(np.maximum(0.0, x[fin_ub] - problem.ub[fin_ub]))
    if np.any(fin_lb):
        viol.append(np.maximum(0.0, problem.lb[fin_lb] - x[fin_lb]))
    if h.size:
        viol.append(np.maximum(0.0, G @ x - h))
    for soc in problem.socs:
        viol.append(np.atleast_1d(max(0.0, np.linalg.norm(soc.F @ x + soc.g) - (soc.e @ x + soc.f))))
    primal = float(np.linalg.norm(np.concatenate(viol))) if viol else 0.0

    # stationarity: c + A'y + sum of constraint-gradient terms
    r = c.copy()
    if b.size:
        r += A.T @ d["eq"]
    ub_idx = np.where(fin_ub)[0]
    lb_idx = np.where(fin_lb)[0]
    if ub_idx.size:
        r[ub_idx] += d["ub"]
    if lb_idx.size:
        r[lb_idx] -= d["lb"]
    if h.size:
        r += G.T @ d["ineq"]
    comp_terms = []
    if ub_idx.size:
        comp_terms.append(d["ub"] * (problem.ub[ub_idx] - x[ub_idx]))
    if lb_idx.size:
        comp_terms.append(d["lb"] * (x[lb_idx] - problem.lb[lb_idx]))
    if h.size:
        comp_terms.append(d["ineq"] * (h - G @ x))
    for soc, zs in zip(problem.socs, d["soc"]):
        s_blk = np.concatenate(([soc.e @ x + soc.f], soc.F @ x + soc.g))
        r -= soc.e * zs[0]
        r -= soc.F.T @ zs[1:]
        comp_terms.append(np.atleast_1d(zs @ s_blk))
    dual = float(np.linalg.norm(r))
    comp = float(np.abs(np.concatenate(comp_terms)).sum()) if comp_terms else 0.0

    dual_obj = 0.0
    if b.size:
        dual_obj -= b @ d["eq"]
    if ub_idx.size:
        dual_obj -= problem.ub[ub_idx] @ d["ub"]
    if lb_idx.size:
        dual_obj += problem.lb[lb_idx] @ d["lb"]
    if h.size:
        dual_obj -= h @ d["ineq"]
    for soc, zs in zip(problem.socs, d["soc"]):
        dual_obj -= soc.f * zs[0] + soc.g @ zs[1:]
    gap = float(abs(c @ x - dual_obj) / (1.0 + abs(c @ x)))
    return KktReport(primal=primal, dual=dual, complementarity=comp, duality_gap=gap)
