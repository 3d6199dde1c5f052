"""Tabular atmosphere model: density and speed of sound vs altitude,
drag coefficient vs Mach number.

Tables are interpolated with shape-preserving piecewise cubic Hermite
polynomials (harmonic-mean slope limiter), so monotone runs of the data
stay monotone and the interpolant is C1. Derivatives are estimated by
central finite differences on the interpolant rather than from the
segment polynomials, which keeps the same code path usable for
multi-dimensional tables later.

Units: ft, slug, s. Density in slug/ft^3, speed of sound in ft/s.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

__all__ = [
    "InterpTable",
    "AtmosphereModel",
    "build_table",
    "load_table",
    "load_atmosphere",
    "DEFAULT_TABLE_FILES",
]

DEFAULT_TABLE_FILES = {
    "density": "density_us1976.txt",
    "speed_of_sound": "speed_of_sound_us1976.txt",
    "drag_coeff": "drag_coefficient_v2.txt",
}

# relative step for finite-difference derivatives of the interpolant
_FD_REL_STEP = 1e-6


class InterpTable:
    """Shape-preserving cubic Hermite interpolant of a sampled 1-D table.

    Evaluation outside the knot span clamps to the nearest endpoint value;
    clamp events are counted in ``clamp_events`` for diagnostics (plain int,
    not synchronized -- the tables themselves are immutable after build).
    """

    __slots__ = ("knots", "values", "slopes", "clamp_events")

    def __init__(self, knots, values, slopes):
        self.knots = np.asarray(knots, dtype=float)
        self.values = np.asarray(values, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        self.clamp_events = 0
        if self.knots.ndim != 1:
            raise ValueError("knots must be one-dimensional")
        if not (self.knots.shape == self.values.shape == self.slopes.shape):
            raise ValueError("knots, values and slopes must have equal length")
        if self.knots.size < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(self.knots) <= 0.0):
            raise ValueError("knots must be strictly increasing")
        self.knots.flags.writeable = False
        self.values.flags.writeable = False
        self.slopes.flags.writeable = False

    @property
    def span(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        """Interpolant value at ``x`` (scalar or array), clamped to the span."""
        x_arr = np.asarray(x, dtype=float)
        scalar = x_arr.ndim == 0
        x_arr = np.atleast_1d(x_arr)

        lo, hi = self.knots[0], self.knots[-1]
        n_clamped = int(np.count_nonzero((x_arr < lo) | (x_arr > hi)))
        if n_clamped:
            self.clamp_events += n_clamped
        xc = np.clip(x_arr, lo, hi)

        j = np.clip(np.searchsorted(self.knots, xc, side="right") - 1, 0, self.knots.size - 2)
        h = self.knots[j + 1] - self.knots[j]
        t = (xc - self.knots[j]) / h
        # Hermite basis
        t2 = t * t
        h00 = (1.0 + 2.0 * t) * (1.0 - t) ** 2
        h10 = t * (1.0 - t) ** 2
        h01 = t2 * (3.0 - 2.0 * t)
        h11 = t2 * (t - 1.0)
        y = (
            self.values[j] * h00
            + h * self.slopes[j] * h10
            + self.values[j + 1] * h01
            + h * self.slopes[j + 1] * h11
        )
        return float(y[0]) if scalar else y

    def eval_derivative(self, x):
        """Central finite-difference derivative of the interpolant at ``x``.

        The step is max(1e-6*|x|, 1e-6*span); one-sided at the span
        boundaries because evaluation clamps there.
        """
        x_arr = np.atleast_1d(np.asarray(x, dtype=float))
        scalar = np.asarray(x, dtype=float).ndim == 0
        lo, hi = self.knots[0], self.knots[-1]
        xc = np.clip(x_arr, lo, hi)
        step = np.maximum(_FD_REL_STEP * np.abs(xc), _FD_REL_STEP * (hi - lo))
        xp = np.minimum(xc + step, hi)
        xm = np.maximum(xc - step, lo)
        d = (self.eval(xp) - self.eval(xm)) / (xp - xm)
        d = np.atleast_1d(d)
        return float(d[0]) if scalar else d


def _pchip_slopes(knots: np.ndarray, values: np.ndarray) -> np.ndarray:
    """Monotone-preserving Hermite slopes (weighted harmonic mean limiter).

    Slopes at local extrema of the data are zero, so monotone data spans
    produce monotone interpolants and there is no overshoot.
    """
    n = knots.size
    h = np.diff(knots)
    delta = np.diff(values) / h
    d = np.zeros(n)

    if n == 2:
        d[:] = delta[0]
        return d

    # interior: weighted harmonic mean when secants agree in sign, else 0
    for i in range(1, n - 1):
        if delta[i - 1] * delta[i] <= 0.0:
            d[i] = 0.0
        else:
            w1 = 2.0 * h[i] + h[i - 1]
            w2 = h[i] + 2.0 * h[i - 1]
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i])

    d[0] = _edge_slope(h[0], h[1], delta[0], delta[1])
    d[-1] = _edge_slope(h[-1], h[-2], delta[-1], delta[-2])
    return d


def _edge_slope(h0, h1, d0, d1):
    # one-sided three-point estimate, limited to preserve shape
    d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
    if d * d0 <= 0.0:
        return 0.0
    if d0 * d1 < 0.0 and abs(d) > 3.0 * abs(d0):
        return 3.0 * d0
    return d


def build_table(knots, values) -> InterpTable:
    """Build a shape-preserving Hermite table from samples.

    Raises ValueError for non-increasing knots, length mismatch, or fewer
    than two samples.
    """
    knots = np.asarray(knots, dtype=float)
    values = np.asarray(values, dtype=float)
    if knots.ndim != 1 or values.ndim != 1:
        raise ValueError("knots and values must be one-dimensional")
    if knots.size != values.size:
        raise ValueError(f"length mismatch: {knots.size} knots, {values.size} values")
    if knots.size < 2:
        raise ValueError("need at least two samples")
    if np.any(np.diff(knots) <= 0.0):
        raise ValueError("knots must be strictly increasing")
    return InterpTable(knots, values, _pchip_slopes(knots, values))


def load_table(path) -> InterpTable:
    """Load a two-column whitespace-separated table file ('#' comments)."""
    rows = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"{path}: expected two columns, got {line!r}")
        rows.append((float(parts[0]), float(parts[1])))
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least two data rows")
    arr = np.asarray(rows)
    return build_table(arr[:, 0], arr[:, 1])


@dataclass(frozen=True)
class AtmosphereModel:
    """The three lookup tables the dynamics need."""

    density: InterpTable       # slug/ft^3 vs altitude ft
    speed_of_sound: InterpTable  # ft/s vs altitude ft
    drag_coeff: InterpTable    # dimensionless vs Mach

    def __post_init__(self):
        if np.any(self.density.values <= 0.0):
            raise ValueError("density table must be strictly positive")
        if np.any(self.speed_of_sound.values <= 0.0):
            raise ValueError("speed-of-sound table must be strictly positive")
        if np.any(self.drag_coeff.values <= 0.0):
            raise ValueError("drag-coefficient table must be strictly positive")


def _bundled(name: str) -> Path:
    return Path(resources.files("assetguard").joinpath("data", name))


def load_atmosphere(density_path=None, speed_of_sound_path=None, drag_coeff_path=None) -> AtmosphereModel:
    """Load the atmosphere tables, falling back to the bundled data files."""
    return AtmosphereModel(
        density=load_table(density_path or _bundled(DEFAULT_TABLE_FILES["density"])),
        speed_of_sound=load_table(
            speed_of_sound_path or _bundled(DEFAULT_TABLE_FILES["speed_of_sound"])
        ),
        drag_coeff=load_table(drag_coeff_path or _bundled(DEFAULT_TABLE_FILES["drag_coeff"])),
    )
