import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from assetguard import atmosphere
from assetguard.atmosphere import build_table, load_atmosphere, load_table


def hermite_segment_derivative(table, x):
    """Closed-form derivative of the cubic segment containing x (oracle)."""
    j = min(np.searchsorted(table.knots, x, side="right") - 1, table.knots.size - 2)
    j = max(j, 0)
    h = table.knots[j + 1] - table.knots[j]
    t = (x - table.knots[j]) / h
    dh00 = 6 * t**2 - 6 * t
    dh10 = 3 * t**2 - 4 * t + 1
    dh01 = -6 * t**2 + 6 * t
    dh11 = 3 * t**2 - 2 * t
    return (table.values[j] * dh00 / h + table.slopes[j] * dh10
            + table.values[j + 1] * dh01 / h + table.slopes[j + 1] * dh11)


class TestBuildTable:
    def test_constant_data(self):
        t = build_table([0.0, 1.0], [5.0, 5.0])
        assert t.eval(0.37) == pytest.approx(5.0, abs=1e-15)
        assert t.eval_derivative(0.5) == pytest.approx(0.0, abs=1e-12)

    def test_linear_data_reproduced(self):
        t = build_table([0.0, 1.0, 2.0], [0.0, 1.0, 2.0])
        assert t.eval(0.5) == pytest.approx(0.5, abs=1e-14)
        assert t.eval_derivative(0.5) == pytest.approx(1.0, rel=1e-9)

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            build_table([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            build_table([1.0, 0.0], [1.0, 2.0])
        with pytest.raises(ValueError):
            build_table([0.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            build_table([0.0], [1.0])

    def test_extrema_slopes_zero(self):
        t = build_table([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
        assert t.slopes[1] == 0.0


class TestBundledTables:
    def test_knot_readback_exact(self, atmo):
        for table in (atmo.density, atmo.speed_of_sound, atmo.drag_coeff):
            vals = table.eval(table.knots)
            assert np.array_equal(vals, table.values)

    def test_sea_level_speed_of_sound_matches_file(self, atmo):
        path = atmosphere._bundled("speed_of_sound_us1976.txt")
        first = [ln for ln in path.read_text().splitlines()
                 if ln.strip() and not ln.startswith("#")][0]
        assert atmo.speed_of_sound.eval(0.0) == float(first.split()[1])

    def test_density_decays_with_altitude(self, atmo):
        assert atmo.density.eval(30000.0) < atmo.density.eval(0.0)

    def test_clamping_counts_events(self, atmo):
        table = load_table(atmosphere._bundled("drag_coefficient_v2.txt"))
        before = table.clamp_events
        lo = table.eval(-1.0)
        hi = table.eval(99.0)
        assert lo == table.values[0] and hi == table.values[-1]
        assert table.clamp_events == before + 2

    def test_cd_peak_near_drag_divergence(self, atmo):
        machs = np.linspace(0.0, 5.0, 501)
        cd = atmo.drag_coeff.eval(machs)
        assert abs(machs[np.argmax(cd)] - 1.2) < 0.05


class TestDerivatives:
    def test_cd_derivative_matches_segment_oracle(self, atmo):
        for x in (2.0, 1.7):
            got = atmo.drag_coeff.eval_derivative(x)
            ref = hermite_segment_derivative(atmo.drag_coeff, x)
            assert got == pytest.approx(ref, rel=1e-4)

    def test_derivative_oracle_100_points_per_table(self, atmo):
        rng = np.random.default_rng(7)
        for table in (atmo.density, atmo.speed_of_sound, atmo.drag_coeff):
            lo, hi = table.span
            xs = rng.uniform(lo, hi, size=100)
            # keep clear of knots where the second derivative jumps
            nearest = table.knots[np.argmin(np.abs(xs[:, None] - table.knots[None, :]), axis=1)]
            xs = np.where(np.abs(xs - nearest) < 1e-3 * (hi - lo), xs + 2e-3 * (hi - lo), xs)
            xs = np.clip(xs, lo, hi)
            for x in xs:
                ref = hermite_segment_derivative(table, x)
                got = table.eval_derivative(x)
                assert got == pytest.approx(ref, rel=1e-4, abs=1e-12 * max(1, abs(ref)))

    def test_c1_one_sided_differences_agree_at_knots(self, atmo):
        # left/right finite differences straddling interior knots; the
        # characteristic slope floors the relative scale where d ~ 0
        for table in (atmo.density, atmo.speed_of_sound, atmo.drag_coeff):
            span = table.span[1] - table.span[0]
            char = (table.values.max() - table.values.min()) / span
            h = 1e-7 * span
            for xk in table.knots[1:-1]:
                left = (table.eval(xk) - table.eval(xk - h)) / h
                right = (table.eval(xk + h) - table.eval(xk)) / h
                assert abs(left - right) / max(abs(left), abs(right), char) < 1e-3


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=0, max_value=10**6))
def test_monotone_data_stays_bracketed(seed):
    rng = np.random.default_rng(seed)
    n = rng.integers(3, 12)
    knots = np.cumsum(rng.uniform(0.1, 2.0, size=n))
    values = np.cumsum(rng.uniform(0.0, 1.0, size=n))  # nondecreasing
    t = build_table(knots, values)
    xs = rng.uniform(knots[0], knots[-1], size=64)
    j = np.clip(np.searchsorted(knots, xs, side="right") - 1, 0, n - 2)
    y = t.eval(xs)
    assert np.all(y >= values[j] - 1e-9 * (1 + np.abs(values[j])))
    assert np.all(y <= values[j + 1] + 1e-9 * (1 + np.abs(values[j + 1])))


def test_positive_table_validation(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("0.0 1.0\n1.0 -2.0\n")
    dens = load_table(atmosphere._bundled("density_us1976.txt"))
    sos = load_table(atmosphere._bundled("speed_of_sound_us1976.txt"))
    with pytest.raises(ValueError):
        atmosphere.AtmosphereModel(density=dens, speed_of_sound=sos,
                                   drag_coeff=load_table(bad))


def test_load_atmosphere_default_paths():
    model = load_atmosphere()
    assert model.density.span == (0.0, 150000.0)
    assert model.drag_coeff.span == (0.0, 5.0)
