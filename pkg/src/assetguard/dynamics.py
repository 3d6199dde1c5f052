"""Point-mass-with-drag flight dynamics shared by every body in the game.

State layout x = [px, py, pz, vx, vy, vz] (ft, ft/s), inertial frame at sea
level with z up. Input u is a commanded acceleration (ft/s^2). The only
other modeled acceleration is atmospheric drag; there is deliberately no
gravity term (gravity could be added in ``state_deriv`` as an extension,
but the baseline model omits it).

All functions broadcast over leading axes, so a (N, 6) batch of states is
evaluated in one call.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .atmosphere import AtmosphereModel

__all__ = [
    "G_ACCEL",
    "PlayerSpec",
    "ScaledVars",
    "make_scales",
    "mach",
    "drag_accel",
    "state_deriv",
    "jacobians",
]

G_ACCEL = 32.174  # standard gravity, ft/s^2

# characteristic units used for nondimensionalization
CHAR_LENGTH = 1.0e4   # ft
CHAR_SPEED = 3.0e3    # ft/s
CHAR_TIME = 10.0      # s

ROLES = ("evader", "pursuer", "asset")


@dataclass(frozen=True)
class PlayerSpec:
    """Physical and constraint parameters of one body."""

    name: str
    role: str
    mass: float          # slugs
    ref_area: float      # ft^2
    u_max_g: float       # input bound in multiples of G
    mach_min: float      # lower Mach bound, dimensionless
    node_count: int      # trajectory nodes K
    x0: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def __post_init__(self):
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float))
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.mass <= 0.0:
            raise ValueError("mass must be positive")
        if self.ref_area <= 0.0:
            raise ValueError("reference area must be positive")
        if self.u_max_g < 0.0:
            raise ValueError("input bound must be nonnegative")
        if not 0.0 <= self.mach_min < 1.0:
            raise ValueError("minimum Mach must be in [0, 1)")
        if self.node_count < 2:
            raise ValueError("need at least two trajectory nodes")
        if self.x0.shape != (6,):
            raise ValueError("initial state must have six components")

    @property
    def u_max(self) -> float:
        """Input bound in ft/s^2."""
        return self.u_max_g * G_ACCEL


@dataclass(frozen=True)
class ScaledVars:
    """Diagonal affine map between physical and nondimensional variables.

    chi = (x - x_shift) / x_scale, mu = (u - u_shift) / u_scale, and the
    free final time scales by t_scale. Shifts are zero by default.
    """

    x_scale: np.ndarray
    u_scale: np.ndarray
    t_scale: float
    x_shift: np.ndarray = field(default_factory=lambda: np.zeros(6))
    u_shift: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("x_scale", "u_scale", "x_shift", "u_shift"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if np.any(self.x_scale <= 0.0) or np.any(self.u_scale <= 0.0) or self.t_scale <= 0.0:
            raise ValueError("scales must be positive")

    def scale_state(self, x):
        x = np.asarray(x, dtype=float)
        self._check(x, 6)
        return (x - self.x_shift) / self.x_scale

    def unscale_state(self, chi):
        chi = np.asarray(chi, dtype=float)
        self._check(chi, 6)
        return chi * self.x_scale + self.x_shift

    def scale_input(self, u):
        u = np.asarray(u, dtype=float)
        self._check(u, 3)
        return (u - self.u_shift) / self.u_scale

    def unscale_input(self, mu):
        mu = np.asarray(mu, dtype=float)
        self._check(mu, 3)
        return mu * self.u_scale + self.u_shift

    @staticmethod
    def _check(arr, n):
        if arr.shape[-1] != n:
            raise ValueError(f"expected trailing dimension {n}, got {arr.shape}")


def make_scales(spec: PlayerSpec) -> ScaledVars:
    """Characteristic-unit scaling for one player.

    Positions scale by 10,000 ft, velocities by 3,000 ft/s (engagement
    magnitudes), inputs by the player's own acceleration bound, time by 10 s.
    """
    accel = spec.u_max if spec.u_max > 0.0 else G_ACCEL
    return ScaledVars(
        x_scale=np.array([CHAR_LENGTH] * 3 + [CHAR_SPEED] * 3),
        u_scale=np.full(3, accel),
        t_scale=CHAR_TIME,
    )


def mach(x, atmo: AtmosphereModel):
    """Mach number ||v|| / a(altitude); broadcasts over leading axes."""
    x = np.asarray(x, dtype=float)
    speed = np.linalg.norm(x[..., 3:6], axis=-1)
    return speed / atmo.speed_of_sound.eval(x[..., 2])


def drag_accel(x, spec: PlayerSpec, atmo: AtmosphereModel):
    """Drag acceleration -(1/2)(S/m) rho C_D ||v|| v, antiparallel to v."""
    x = np.asarray(x, dtype=float)
    v = x[..., 3:6]
    speed = np.linalg.norm(v, axis=-1)
    rho = atmo.density.eval(x[..., 2])
    cd = atmo.drag_coeff.eval(speed / atmo.speed_of_sound.eval(x[..., 2]))
    coeff = -0.5 * (spec.ref_area / spec.mass) * rho * cd * speed
    return coeff[..., None] * v


def state_deriv(x, u, spec: PlayerSpec, atmo: AtmosphereModel):
    """Time derivative (v, u + drag) of the six-component state."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    out = np.empty(np.broadcast_shapes(x.shape, u.shape[:-1] + (6,)), dtype=float)
    out[..., 0:3] = x[..., 3:6]
    out[..., 3:6] = u + drag_accel(x, spec, atmo)
    return out


def jacobians(x, u, spec: PlayerSpec, atmo: AtmosphereModel,
              scales: ScaledVars | None = None, rel_step: float = 1e-6):
    """Central finite-difference Jacobians (A, B) of ``state_deriv``.

    Perturbations are taken as ``rel_step`` in scaled units (i.e. the
    physical step for coordinate i is rel_step * scale_i), which keeps the
    differencing well conditioned across the disparate magnitudes of
    position, velocity, and acceleration. Returned A (..., 6, 6) and
    B (..., 6, 3) are Jacobians with respect to the physical variables.
    """
    if scales is None:
        scales = make_scales(spec)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    batch = np.broadcast_shapes(x.shape[:-1], u.shape[:-1])
    x = np.broadcast_to(x, batch + (6,)).copy()
    u = np.broadcast_to(u, batch + (3,)).copy()

    A = np.empty(batch + (6, 6))
    B = np.empty(batch + (6, 3))
    for i in range(6):
        h = rel_step * scales.x_scale[i]
        xp = x.copy()
        xm = x.copy()
        xp[..., i] += h
        xm[..., i] -= h
        A[..., :, i] = (state_deriv(xp, u, spec, atmo) - state_deriv(xm, u, spec, atmo)) / (2.0 * h)
    for i in range(3):
        h = rel_step * scales.u_scale[i]
        up = u.copy()
        um = u.copy()
        up[..., i] += h
        um[..., i] -= h
        B[..., :, i] = (state_deriv(x, up, spec, atmo) - state_deriv(x, um, spec, atmo)) / (2.0 * h)
    return A, B
