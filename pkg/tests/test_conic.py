import numpy as np
import pytest

from assetguard import conic
from assetguard.conic import ConicProblem, SocConstraint, SolverSettings, check_kkt, solve


def norm_epigraph_problem():
    # min t  s.t.  ||(x, y)|| <= t, x = 3, y = 4
    return ConicProblem(
        c=np.array([0.0, 0.0, 1.0]),
        A=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        b=np.array([3.0, 4.0]),
        socs=[SocConstraint(F=np.array([[1.0, 0, 0], [0, 1.0, 0]]), g=np.zeros(2),
                            e=np.array([0.0, 0.0, 1.0]), f=0.0)],
    )


def one_norm_problem(target):
    # min sum |x_i| (epigraph) s.t. x = target
    n = target.size
    G = np.zeros((2 * n, 2 * n))
    for i in range(n):
        G[i, i] = 1.0
        G[i, n + i] = -1.0
        G[n + i, i] = -1.0
        G[n + i, n + i] = -1.0
    A = np.zeros((n, 2 * n))
    A[:, :n] = np.eye(n)
    return ConicProblem(c=np.r_[np.zeros(n), np.ones(n)], A=A, b=target,
                        G=G, h=np.zeros(2 * n))


def random_socp(rng, n_soc=1):
    """Small random SOCP with a known-feasible interior point."""
    n = rng.integers(3, 8)
    c = rng.normal(size=n)
    x_int = rng.normal(size=n)
    lb = x_int - rng.uniform(1.0, 3.0, size=n)
    ub = x_int + rng.uniform(1.0, 3.0, size=n)
    socs = []
    for _ in range(n_soc):
        m = rng.integers(2, min(n, 4))
        F = rng.normal(size=(m, n))
        g = -F @ x_int + rng.normal(0, 0.1, size=m)
        e = np.zeros(n)
        f = np.linalg.norm(F @ x_int + g) + rng.uniform(0.5, 2.0)
        socs.append(SocConstraint(F=F, g=g, e=e, f=f))
    n_ineq = rng.integers(1, 4)
    G = rng.normal(size=(n_ineq, n))
    h = G @ x_int + rng.uniform(0.2, 1.5, size=n_ineq)
    return ConicProblem(c=c, lb=lb, ub=ub, G=G, h=h, socs=socs)


class TestBasics:
    def test_norm_epigraph(self):
        sol = solve(norm_epigraph_problem())
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(5.0, abs=1e-6)
        assert np.allclose(sol.x, [3.0, 4.0, 5.0], atol=1e-6)

    def test_one_norm_encoding(self):
        target = np.array([1.5, -2.0, 0.3])
        sol = solve(one_norm_problem(target))
        assert sol.status == "optimal"
        assert sol.objective == pytest.approx(np.abs(target).sum(), abs=1e-7)

    def test_infeasible_certificate(self):
        prob = ConicProblem(c=np.array([1.0]), G=np.array([[1.0], [-1.0]]),
                            h=np.array([-1.0, -1.0]))
        assert solve(prob).status == "infeasible"

    def test_unbounded_certificate(self):
        prob = ConicProblem(c=np.array([1.0]), G=np.array([[1.0]]), h=np.array([0.0]))
        assert solve(prob).status == "unbounded"

    def test_validation(self):
        with pytest.raises(ValueError):
            ConicProblem(c=np.zeros(2), lb=np.array([1.0, 0.0]), ub=np.array([0.0, 1.0]))
        with pytest.raises(ValueError):
            ConicProblem(c=np.zeros(2), A=np.ones((1, 3)), b=np.ones(1))

    def test_dump(self, tmp_path):
        path = tmp_path / "prob.txt"
        norm_epigraph_problem().dump(path)
        text = path.read_text()
        assert "variables: 3" in text and "second-order cones: [3]" in text


class TestRandomProblems:
    def test_kkt_residuals_on_50_random_socps(self):
        rng = np.random.default_rng(42)
        for _ in range(50):
            prob = random_socp(rng)
            sol = solve(prob)
            assert sol.status == "optimal"
            rep = check_kkt(prob, sol)
            assert rep.primal <= 1e-6
            assert rep.dual <= 1e-6
            assert rep.duality_gap <= 1e-6

    def test_objective_matches_grid_oracle(self):
        # exhaustive 2-variable grid oracle, coarse pass then local refine
        rng = np.random.default_rng(7)
        for _ in range(12):
            c = rng.normal(size=2)
            center = rng.uniform(-0.4, 0.4, size=2)
            radius = rng.uniform(0.4, 1.2)
            gline = rng.normal(size=2)
            hline = gline @ center + rng.uniform(0.1, 0.6)
            prob = ConicProblem(
                c=c, lb=np.full(2, -2.0), ub=np.full(2, 2.0),
                G=gline[None, :], h=np.array([hline]),
                socs=[SocConstraint(F=np.eye(2), g=-center, e=np.zeros(2), f=radius)])
            sol = solve(prob)
            assert sol.status == "optimal"

            def best_on_grid(lo, hi, m=301):
                xs = np.linspace(lo[0], hi[0], m)
                ys = np.linspace(lo[1], hi[1], m)
                X, Y = np.meshgrid(xs, ys)
                P = np.stack([X.ravel(), Y.ravel()], axis=1)
                feas = (np.linalg.norm(P - center, axis=1) <= radius)
                feas &= (P @ gline <= hline)
                feas &= np.all((P >= -2.0) & (P <= 2.0), axis=1)
                vals = P @ c
                vals[~feas] = np.inf
                k = np.argmin(vals)
                return vals[k], P[k]

            lo, hi = np.full(2, -2.0), np.full(2, 2.0)
            best = np.inf
            for _zoom in range(5):
                v, p = best_on_grid(lo, hi)
                best = min(best, v)
                step = (hi[0] - lo[0]) / 300
                # near a curved boundary the best lattice point sits up to
                # ~sqrt(2 r h) along the arc from the true optimum
                half = 6.0 * step + np.sqrt(3.0 * radius * step)
                lo, hi = p - half, p + half
            assert best == pytest.approx(sol.objective, abs=1e-4)

    def test_cost_scaling_leaves_minimizer(self):
        rng = np.random.default_rng(3)
        prob = random_socp(rng)
        sol1 = solve(prob)
        prob2 = ConicProblem(c=7.5 * prob.c, lb=prob.lb, ub=prob.ub,
                             G=prob.G, h=prob.h, socs=prob.socs)
        sol2 = solve(prob2)
        assert np.allclose(sol1.x, sol2.x, atol=1e-6)
        assert sol2.objective == pytest.approx(7.5 * sol1.objective, rel=1e-6)

    def test_determinism(self):
        rng1 = np.random.default_rng(9)
        rng2 = np.random.default_rng(9)
        p1, p2 = random_socp(rng1), random_socp(rng2)
        s1, s2 = solve(p1), solve(p2)
        assert s1.status == s2.status
        assert s1.objective == s2.objective
        assert np.array_equal(s1.x, s2.x)
        assert s1.iterations == s2.iterations


class TestCheckKkt:
    def test_optimal_solution_consistent(self):
        prob = norm_epigraph_problem()
        sol = solve(prob)
        rep = check_kkt(prob, sol)
        assert rep.max_residual() <= 1e-6

    def test_perturbed_primal_detected(self):
        prob = norm_epigraph_problem()
        sol = solve(prob)
        sol.x = sol.x.copy()
        sol.x[0] += 1e-2
        rep = check_kkt(prob, sol)
        assert rep.primal >= 1e-3

    def test_zero_vector_residual_is_rhs_norm(self):
        prob = ConicProblem(c=np.zeros(3), A=np.eye(3), b=np.array([1.0, 2.0, 2.0]))
        sol = conic.ConicSolution(
            status="optimal", x=np.zeros(3), objective=0.0,
            duals={"eq": np.zeros(3), "ub": np.zeros(0), "lb": np.zeros(0),
                   "ineq": np.zeros(0), "soc": []},
            residuals={}, iterations=0, solve_time=0.0)
        rep = check_kkt(prob, sol)
        assert rep.primal == pytest.approx(3.0)  # ||b|| = 3

    def test_duality_gap_bound_at_optimum(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            prob = random_socp(rng)
            sol = solve(prob)
            assert sol.status == "optimal"
            rep = check_kkt(prob, sol)
            assert rep.duality_gap <= 1e-6 * (1.0 + abs(sol.objective))


def test_tight_settings_reach_high_accuracy():
    prob = norm_epigraph_problem()
    sol = solve(prob, SolverSettings(feastol=1e-10, abstol=1e-10, reltol=1e-10))
    assert sol.status == "optimal"
    assert abs(sol.objective - 5.0) < 1e-8
