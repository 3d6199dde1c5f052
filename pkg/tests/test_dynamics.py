import numpy as np
import pytest

from assetguard import dynamics
from assetguard.dynamics import (
    G_ACCEL,
    PlayerSpec,
    drag_accel,
    jacobians,
    mach,
    make_scales,
    state_deriv,
)


class TestMach:
    def test_zero_velocity(self, atmo, evader_spec):
        x = np.array([0.0, 0.0, 10000.0, 0.0, 0.0, 0.0])
        assert mach(x, atmo) == 0.0

    def test_speed_equals_sound(self, atmo):
        a = atmo.speed_of_sound.eval(20000.0)
        x = np.array([0.0, 0.0, 20000.0, a, 0.0, 0.0])
        assert mach(x, atmo) == pytest.approx(1.0, rel=1e-12)

    def test_table_lookup(self, atmo):
        x = np.array([0.0, 0.0, 30000.0, 0.0, 3000.0, 0.0])
        assert mach(x, atmo) == pytest.approx(3000.0 / atmo.speed_of_sound.eval(30000.0))


class TestDrag:
    def test_zero_velocity_zero_drag(self, atmo, evader_spec):
        x = np.zeros(6)
        x[2] = 30000.0
        assert np.allclose(drag_accel(x, evader_spec, atmo), 0.0)

    def test_antiparallel_to_velocity(self, atmo, evader_spec):
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = np.r_[rng.uniform(-1e4, 1e4, 2), rng.uniform(0, 5e4),
                      rng.uniform(-3e3, 3e3, 3)]
            if np.linalg.norm(x[3:6]) < 1.0:
                continue
            d = drag_accel(x, evader_spec, atmo)
            assert d @ x[3:6] < 0.0

    def test_hand_evaluated_magnitude(self, atmo):
        # direct evaluation of the drag formula with explicit table lookups
        m, s = 1000.0, np.pi / 4 * 25.0
        spec = PlayerSpec("p", "pursuer", m, s, 8.0, 0.5, 30, np.zeros(6))
        x = np.array([0.0, 0.0, 30000.0, 3000.0, 0.0, 0.0])
        rho = atmo.density.eval(30000.0)
        cd = atmo.drag_coeff.eval(3000.0 / atmo.speed_of_sound.eval(30000.0))
        expected = -0.5 * (s / m) * rho * cd * 3000.0 * np.array([3000.0, 0.0, 0.0])
        assert np.allclose(drag_accel(x, spec, atmo), expected, rtol=1e-14)


class TestStateDeriv:
    def test_rest_equilibrium(self, atmo, evader_spec):
        x = np.zeros(6)
        x[2] = 30000.0
        assert np.allclose(state_deriv(x, np.zeros(3), evader_spec, atmo), 0.0)

    def test_vacuum_reduces_to_double_integrator(self, thin_atmo, evader_spec):
        x = np.array([0.0, 0.0, 30000.0, 1000.0, -500.0, 200.0])
        u = np.array([10.0, 20.0, -5.0])
        d = state_deriv(x, u, evader_spec, thin_atmo)
        assert np.allclose(d[:3], x[3:6])
        assert np.allclose(d[3:6], u, atol=1e-12)

    def test_coast_matches_drag_only(self, atmo, evader_spec):
        d = state_deriv(evader_spec.x0, np.zeros(3), evader_spec, atmo)
        assert np.allclose(d[:3], evader_spec.x0[3:6])
        assert np.allclose(d[3:6], drag_accel(evader_spec.x0, evader_spec, atmo))

    def test_frame_invariance_about_z(self, atmo, evader_spec):
        theta = 0.83
        c, s = np.cos(theta), np.sin(theta)
        R = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
        x = np.array([5000.0, -2000.0, 28000.0, 2200.0, 900.0, -150.0])
        u = np.array([30.0, -60.0, 90.0])
        xr = np.concatenate([R @ x[:3], R @ x[3:6]])
        d = state_deriv(x, u, evader_spec, atmo)
        dr = state_deriv(xr, R @ u, evader_spec, atmo)
        assert np.allclose(dr[:3], R @ d[:3], rtol=1e-10, atol=1e-9)
        assert np.allclose(dr[3:6], R @ d[3:6], rtol=1e-10, atol=1e-9)


class TestJacobians:
    def test_structure(self, atmo, evader_spec):
        A, B = jacobians(evader_spec.x0, np.zeros(3), evader_spec, atmo)
        assert np.allclose(B[:3, :], 0.0, atol=1e-9)
        assert np.allclose(B[3:6, :], np.eye(3), atol=1e-9)
        assert np.allclose(A[:3, 3:6], np.eye(3), atol=1e-9)
        assert np.allclose(A[:3, :3], 0.0, atol=1e-9)

    def test_altitude_sensitivity_vs_independent_oracle(self, atmo, evader_spec):
        x = evader_spec.x0
        A, _ = jacobians(x, np.zeros(3), evader_spec, atmo)
        h = 1e-8 * abs(x[2])  # different step size than the implementation
        xp, xm = x.copy(), x.copy()
        xp[2] += h
        xm[2] -= h
        col = (state_deriv(xp, np.zeros(3), evader_spec, atmo)
               - state_deriv(xm, np.zeros(3), evader_spec, atmo)) / (2 * h)
        assert A[3, 2] != 0.0
        assert A[3, 2] == pytest.approx(col[3], rel=1e-4)

    def test_taylor_second_order(self, atmo, evader_spec):
        rng = np.random.default_rng(11)
        scales = make_scales(evader_spec)
        ratios = []
        for _ in range(50):
            x = np.r_[rng.uniform(-1e4, 1e4, 2), rng.uniform(5e3, 6e4),
                      rng.normal(0, 1500, 3)]
            if np.linalg.norm(x[3:6]) < 100.0:
                x[3] += 500.0
            u = rng.uniform(-100, 100, 3)
            A, B = jacobians(x, u, evader_spec, atmo, scales)
            dx = rng.normal(0, 1, 6) * scales.x_scale * 1e-3
            du = rng.normal(0, 1, 3) * scales.u_scale * 1e-3
            f0 = state_deriv(x, u, evader_spec, atmo)

            def taylor_err(fac):
                f1 = state_deriv(x + fac * dx, u + fac * du, evader_spec, atmo)
                pred = f0 + A @ (fac * dx) + B @ (fac * du)
                return np.linalg.norm(f1 - pred)

            e1, e2 = taylor_err(1.0), taylor_err(0.5)
            if e1 > 1e-11:  # below that, roundoff dominates
                ratios.append(e1 / max(e2, 1e-300))
        assert np.median(ratios) >= 3.5

    def test_batched_matches_single(self, atmo, evader_spec):
        rng = np.random.default_rng(5)
        xs = np.column_stack([rng.uniform(-1e4, 1e4, (4, 2)),
                              rng.uniform(1e4, 4e4, 4),
                              rng.normal(0, 1000, (4, 3))])
        us = rng.uniform(-50, 50, (4, 3))
        A_b, B_b = jacobians(xs, us, evader_spec, atmo)
        for i in range(4):
            A_i, B_i = jacobians(xs[i], us[i], evader_spec, atmo)
            assert np.allclose(A_b[i], A_i)
            assert np.allclose(B_b[i], B_i)


class TestScaling:
    def test_round_trip(self, evader_spec):
        sc = make_scales(evader_spec)
        rng = np.random.default_rng(0)
        x = rng.normal(0, 1e4, 6)
        u = rng.normal(0, 100, 3)
        assert np.allclose(sc.unscale_state(sc.scale_state(x)), x, rtol=1e-12)
        assert np.allclose(sc.unscale_input(sc.scale_input(u)), u, rtol=1e-12)

    def test_shift_point_maps_to_zero(self, evader_spec):
        sc = make_scales(evader_spec)
        assert np.allclose(sc.scale_state(sc.x_shift), 0.0)

    def test_characteristic_position_scaling(self, evader_spec):
        sc = make_scales(evader_spec)
        chi = sc.scale_state(np.array([-10000.0, 0.0, 31000.0, 0.0, 0.0, 0.0]))
        assert np.allclose(chi[:3], [-1.0, 0.0, 3.1])

    def test_dimension_mismatch(self, evader_spec):
        sc = make_scales(evader_spec)
        with pytest.raises(ValueError):
            sc.scale_state(np.zeros(5))


class TestPlayerSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            PlayerSpec("x", "evader", -1.0, 1.0, 1.0, 0.5, 30, np.zeros(6))
        with pytest.raises(ValueError):
            PlayerSpec("x", "chaser", 1.0, 1.0, 1.0, 0.5, 30, np.zeros(6))
        with pytest.raises(ValueError):
            PlayerSpec("x", "evader", 1.0, 1.0, 1.0, 1.5, 30, np.zeros(6))
        with pytest.raises(ValueError):
            PlayerSpec("x", "evader", 1.0, 1.0, 1.0, 0.5, 1, np.zeros(6))

    def test_u_max_in_fps2(self, evader_spec):
        assert evader_spec.u_max == pytest.approx(7.0 * G_ACCEL)
