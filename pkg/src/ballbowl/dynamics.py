"""Ball-in-bowl physics core.

The ball is modelled as two decoupled planar pendulums driven by the pivot
(bowl) acceleration, one per horizontal axis:

    theta_dd_i = -(g/L) * sin(theta_i) - (a_i/L) * cos(theta_i) - c * omega_i

The bowl is an admittance-rendered virtual mass: damped free mass in the
horizontal plane, and in z a one-sided spring-damper table plus a constant
downward loading force that is active only while the bowl is lifted.

All integration is classic explicit 4th-order Runge-Kutta at a fixed
timestep.  The numeric kernels are numba-compiled and shared by the
single-step API below and the batch trial engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

from ._jit import njit
from .errors import ParameterError, SimulationFault

TWO_PI = 2.0 * math.pi


def resonant_length(f_res: float, gravity: float = 9.81) -> float:
    """Pendulum length whose small-oscillation frequency is ``f_res`` Hz."""
    if not (f_res > 0.0):
        raise ParameterError(f"resonant frequency must be positive, got {f_res}")
    if not (gravity > 0.0):
        raise ParameterError(f"gravity must be positive, got {gravity}")
    return gravity / (TWO_PI * f_res) ** 2


def resonant_frequency(length: float, gravity: float = 9.81) -> float:
    """Inverse of :func:`resonant_length`: sqrt(g/L) / 2*pi."""
    if not (length > 0.0):
        raise ParameterError(f"pendulum length must be positive, got {length}")
    return math.sqrt(gravity / length) / TWO_PI


RESONANT_FREQ_HZ = 1.88
DEFAULT_PENDULUM_LENGTH = resonant_length(RESONANT_FREQ_HZ, 9.81)


@dataclass(frozen=True)
class SimParams:
    """Physical constants of one simulated session.

    Defaults realize the 1.88 Hz ball resonance; bowl admittance and table
    constants emulate a compliant robot end-effector with a resting surface.
    """

    pendulum_length: float = DEFAULT_PENDULUM_LENGTH
    gravity: float = 9.81
    ball_mass: float = 0.25
    angular_damping: float = 0.3          # 1/s
    rim_angle: float = 1.0                # rad, fall-out threshold
    reentry_angle: float = 0.5            # rad, hysteresis reentry
    virtual_mass: float = 3.0             # kg
    virtual_damping: float = 10.0         # N*s/m, horizontal only
    table_height: float = 0.0             # m
    table_stiffness: float = 2000.0       # N/m, one-sided
    table_damping: float = 170.0          # N*s/m while in contact (near-critical)
    loading_force: float = 0.0            # N downward, only while lifted
    physics_dt: float = 1e-3              # s
    record_rate: float = 100.0            # Hz
    contact_tol: float = 0.002            # m, lift detection band above table

    def __post_init__(self) -> None:
        if not (self.pendulum_length > 0.0):
            raise ParameterError("pendulum_length must be > 0")
        if not (self.ball_mass > 0.0):
            raise ParameterError("ball_mass must be > 0")
        if not (self.virtual_mass > 0.0):
            raise ParameterError("virtual_mass must be > 0")
        if not (0.0 < self.reentry_angle < self.rim_angle < math.pi / 2):
            raise ParameterError(
                "require 0 < reentry_angle < rim_angle < pi/2, got "
                f"reentry={self.reentry_angle}, rim={self.rim_angle}"
            )
        if not (0.0 < self.physics_dt <= 1e-3):
            raise ParameterError("physics_dt must be in (0, 0.001] s")
        steps = 1.0 / (self.physics_dt * self.record_rate)
        if abs(steps - round(steps)) > 1e-9 or round(steps) < 1:
            raise ParameterError(
                "record_rate must divide the physics rate evenly: "
                f"1/(dt*rate) = {steps}"
            )
        if self.loading_force < 0.0:
            raise ParameterError("loading_force must be >= 0")
        if self.angular_damping < 0.0:
            raise ParameterError("angular_damping must be >= 0")

    @property
    def record_every(self) -> int:
        """Physics steps between two recorded force samples."""
        return round(1.0 / (self.physics_dt * self.record_rate))

    @property
    def resonant_freq(self) -> float:
        return resonant_frequency(self.pendulum_length, self.gravity)

    def with_loading(self, force: float) -> "SimParams":
        return replace(self, loading_force=force)


@dataclass
class BallState:
    """Pendulum deflection of the ball, per horizontal axis."""

    theta_x: float = 0.0
    theta_y: float = 0.0
    omega_x: float = 0.0
    omega_y: float = 0.0
    in_bowl: bool = True


@dataclass
class BowlState:
    """Admittance-rendered bowl (end-effector) state."""

    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    vx: float = 0.0
    vy: float = 0.0
    vz: float = 0.0
    lifted: bool = False


@dataclass(frozen=True)
class ForceSample:
    """One recorded user-force sample (net force applied at the end-effector)."""

    t: float
    fx: float
    fy: float
    fz: float


# --------------------------------------------------------------------------
# numeric kernels (shared with the batch engine)
# --------------------------------------------------------------------------

@njit(cache=True)
def _ball_alpha(theta: float, omega: float, accel: float,
                g: float, L: float, c: float) -> float:
    return -(g / L) * math.sin(theta) - (accel / L) * math.cos(theta) - c * omega


@njit(cache=True)
def _ball_axis_rk4(theta: float, omega: float, accel: float,
                   g: float, L: float, c: float, dt: float):
    """One RK4 step of a single pivot-driven pendulum axis (accel held)."""
    k1t = omega
    k1o = _ball_alpha(theta, omega, accel, g, L, c)
    t2 = theta + 0.5 * dt * k1t
    o2 = omega + 0.5 * dt * k1o
    k2t = o2
    k2o = _ball_alpha(t2, o2, accel, g, L, c)
    t3 = theta + 0.5 * dt * k2t
    o3 = omega + 0.5 * dt * k2o
    k3t = o3
    k3o = _ball_alpha(t3, o3, accel, g, L, c)
    t4 = theta + dt * k3t
    o4 = omega + dt * k3o
    k4t = o4
    k4o = _ball_alpha(t4, o4, accel, g, L, c)
    theta_new = theta + dt / 6.0 * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
    omega_new = omega + dt / 6.0 * (k1o + 2.0 * k2o + 2.0 * k3o + k4o)
    return theta_new, omega_new


@njit(cache=True)
def _reaction_axis(theta: float, omega: float, alpha: float,
                   m: float, L: float) -> float:
    return -m * L * (alpha * math.cos(theta) - omega * omega * math.sin(theta))


@njit(cache=True)
def _bowl_haxis_rk4(p: float, v: float, force: float,
                    M: float, B: float, dt: float):
    """Horizontal bowl axis: M*a = force - B*v, force held over the step."""
    k1p = v
    k1v = (force - B * v) / M
    v2 = v + 0.5 * dt * k1v
    k2p = v2
    k2v = (force - B * v2) / M
    v3 = v + 0.5 * dt * k2v
    k3p = v3
    k3v = (force - B * v3) / M
    v4 = v + dt * k3v
    k4p = v4
    k4v = (force - B * v4) / M
    p_new = p + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p)
    v_new = v + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return p_new, v_new


@njit(cache=True)
def _bowl_z_accel(z: float, vz: float, fz: float, M: float,
                  table_h: float, k_t: float, c_t: float) -> float:
    f = fz
    if z < table_h:
        f += k_t * (table_h - z) - c_t * vz
    return f / M


@njit(cache=True)
def _bowl_z_rk4(z: float, vz: float, fz: float, M: float,
                table_h: float, k_t: float, c_t: float, dt: float):
    """Vertical bowl axis with one-sided table contact (fz held over the step)."""
    k1z = vz
    k1v = _bowl_z_accel(z, vz, fz, M, table_h, k_t, c_t)
    z2 = z + 0.5 * dt * k1z
    v2 = vz + 0.5 * dt * k1v
    k2z = v2
    k2v = _bowl_z_accel(z2, v2, fz, M, table_h, k_t, c_t)
    z3 = z + 0.5 * dt * k2z
    v3 = vz + 0.5 * dt * k2v
    k3z = v3
    k3v = _bowl_z_accel(z3, v3, fz, M, table_h, k_t, c_t)
    z4 = z + dt * k3z
    v4 = vz + dt * k3v
    k4z = v4
    k4v = _bowl_z_accel(z4, v4, fz, M, table_h, k_t, c_t)
    z_new = z + dt / 6.0 * (k1z + 2.0 * k2z + 2.0 * k3z + k4z)
    v_new = vz + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return z_new, v_new


# --------------------------------------------------------------------------
# single-step API
# --------------------------------------------------------------------------

def _check_dt(params: SimParams, dt: float | None) -> float:
    if dt is None:
        return params.physics_dt
    if abs(dt - params.physics_dt) > 1e-15:
        raise ParameterError(f"dt must equal physics_dt={params.physics_dt}, got {dt}")
    return dt


def update_in_bowl(in_bowl: bool, theta_x: float, theta_y: float,
                   params: SimParams) -> bool:
    """Hysteresis rule: out above rim_angle, back in only below reentry_angle."""
    mag = math.hypot(theta_x, theta_y)
    if in_bowl and mag > params.rim_angle:
        return False
    if not in_bowl and mag < params.reentry_angle:
        return True
    return in_bowl


def ball_angular_accel(ball: BallState, pivot_accel: tuple[float, float],
                       params: SimParams) -> tuple[float, float]:
    """Instantaneous angular acceleration of both axes for a given pivot accel."""
    g, L, c = params.gravity, params.pendulum_length, params.angular_damping
    return (
        _ball_alpha(ball.theta_x, ball.omega_x, pivot_accel[0], g, L, c),
        _ball_alpha(ball.theta_y, ball.omega_y, pivot_accel[1], g, L, c),
    )


def step_ball(ball: BallState, pivot_accel: tuple[float, float],
              params: SimParams, dt: float | None = None) -> BallState:
    """Advance the ball one physics step under a held pivot acceleration."""
    dt = _check_dt(params, dt)
    ax, ay = pivot_accel
    if not all(map(math.isfinite, (ball.theta_x, ball.theta_y, ball.omega_x,
                                   ball.omega_y, ax, ay))):
        raise SimulationFault("non-finite ball state or pivot acceleration")
    g, L, c = params.gravity, params.pendulum_length, params.angular_damping
    tx, ox = _ball_axis_rk4(ball.theta_x, ball.omega_x, ax, g, L, c, dt)
    ty, oy = _ball_axis_rk4(ball.theta_y, ball.omega_y, ay, g, L, c, dt)
    if not all(map(math.isfinite, (tx, ty, ox, oy))):
        raise SimulationFault("ball state diverged")
    return BallState(tx, ty, ox, oy, update_in_bowl(ball.in_bowl, tx, ty, params))


def ball_reaction_force(ball: BallState, ball_accel: tuple[float, float],
                        params: SimParams) -> tuple[float, float]:
    """Horizontal reaction force the ball applies to the bowl (and hand).

    ``ball_accel`` must be the angular acceleration consistent with the same
    step (see :func:`ball_angular_accel`).
    """
    m, L = params.ball_mass, params.pendulum_length
    ax, ay = ball_accel
    if not all(map(math.isfinite, (ball.theta_x, ball.theta_y, ball.omega_x,
                                   ball.omega_y, ax, ay))):
        raise SimulationFault("non-finite input to reaction force")
    return (
        _reaction_axis(ball.theta_x, ball.omega_x, ax, m, L),
        _reaction_axis(ball.theta_y, ball.omega_y, ay, m, L),
    )


def step_bowl(bowl: BowlState, user_force: tuple[float, float, float],
              ball_force: tuple[float, float], params: SimParams,
              dt: float | None = None) -> BowlState:
    """Advance the bowl one physics step under held user and ball forces.

    Loading is applied when the bowl enters the step lifted; the lift flag is
    recomputed from the new height afterwards.
    """
    dt = _check_dt(params, dt)
    fux, fuy, fuz = user_force
    fbx, fby = ball_force
    vals = (bowl.x, bowl.y, bowl.z, bowl.vx, bowl.vy, bowl.vz,
            fux, fuy, fuz, fbx, fby)
    if not all(map(math.isfinite, vals)):
        raise SimulationFault("non-finite bowl state or force")
    M, B = params.virtual_mass, params.virtual_damping
    x, vx = _bowl_haxis_rk4(bowl.x, bowl.vx, fux + fbx, M, B, dt)
    y, vy = _bowl_haxis_rk4(bowl.y, bowl.vy, fuy + fby, M, B, dt)
    fz = fuz - (params.loading_force if bowl.lifted else 0.0)
    z, vz = _bowl_z_rk4(bowl.z, bowl.vz, fz, M, params.table_height,
                        params.table_stiffness, params.table_damping, dt)
    if not all(map(math.isfinite, (x, y, z, vx, vy, vz))):
        raise SimulationFault("bowl state diverged")
    lifted = z > params.table_height + params.contact_tol
    return BowlState(x, y, z, vx, vy, vz, lifted)
