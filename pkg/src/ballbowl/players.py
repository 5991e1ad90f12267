"""Closed-loop synthetic participants.

A controller turns the visible task state into a commanded force through four
stages: a proportional-derivative pull toward the nearest remaining flag plus
a strategy-specific ball term, a pure dead time (movement onset delay), a
one-pole low-pass (force modulation bandwidth), and a magnitude clip.

The vertical channel holds the bowl at hover height against the loading
force.  It is a tonic postural component: gated by the onset delay at trial
start and low-pass filtered, but not routed through the reactive dead time
(delayed vertical feedback around the undamped virtual mass would limit-cycle
at stroke-scale delays, which is not the phenomenon being modelled; the
published onset delays concern initiation of directional movement).

Two profiles bracket the task's 1.88 Hz resonance: a control-like profile
reacting faster than resonance with a resonance-cancelling strategy, and a
stroke-like profile reacting slower, relying on a low-frequency swirl, with
bandwidth that degrades under abduction loading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ._jit import njit
from .dynamics import BallState, BowlState, SimParams
from .errors import ParameterError

TWO_PI = 2.0 * math.pi

# controller parameter array layout (shared with the engine kernel)
CP_MODE = 0
CP_NDELAY = 1
CP_ALPHA = 2
CP_MAXF = 3
CP_KP = 4
CP_KD = 5
CP_CANCEL = 6
CP_SWIRL_AMP = 7
CP_SWIRL_FREQ = 8
CP_KZ = 9
CP_KDZ = 10
CP_HOVER = 11
CP_REST = 12
CP_BALLD = 13
CP_SIZE = 14

MODE_EXTERNAL = 0
MODE_CANCEL = 1
MODE_SWIRL = 2
MODE_POINTER = 3

STRATEGIES = {"resonance-cancel": MODE_CANCEL, "low-frequency-swirl": MODE_SWIRL}


@dataclass(frozen=True)
class ControllerParams:
    """Tunable description of one synthetic participant."""

    strategy: str = "resonance-cancel"
    onset_delay: float = 0.33        # s, pure dead time
    bandwidth: float = 3.2           # Hz, low-pass corner on commanded force
    load_bandwidth_slope: float = 0.0  # Hz per % load, <= 0
    max_force: float = 100.0         # N, output magnitude clip
    noise_std: float = 0.0           # N, white command noise per axis
    rng_seed: int = 0
    kp: float = 130.0                # N/m toward target flag
    kd: float = 22.0                 # N*s/m on bowl velocity
    cancel_gain: float = 1.0         # resonance-cancel: -gain * ball force
    swirl_amp: float = 0.0           # N, circular bias amplitude
    swirl_freq: float = 0.35         # Hz
    ball_damping: float = 0.0        # N*s/rad, force in phase with ball velocity
    kz: float = 30.0                 # N/m vertical hold impedance
    kdz: float = 30.0                # N*s/m vertical damping impedance
    hover_z: float = 0.05            # m above the table while working

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ParameterError(f"unknown strategy {self.strategy!r}")
        if self.onset_delay < 0.0:
            raise ParameterError("onset_delay must be >= 0")
        if not (self.bandwidth > 0.0):
            raise ParameterError("bandwidth must be > 0")
        if self.bandwidth + self.load_bandwidth_slope * 50.0 <= 0.0:
            raise ParameterError("bandwidth must stay positive at 50% load")
        if self.max_force <= 0.0:
            raise ParameterError("max_force must be > 0")

    def effective_bandwidth(self, loading_level: int) -> float:
        return self.bandwidth + self.load_bandwidth_slope * loading_level


def control_profile(**overrides) -> ControllerParams:
    """Able-bodied-like participant: fast onset (0.33 s mean), 3.2 Hz force
    bandwidth (above the 1.88 Hz ball resonance), cancels ball feedback."""
    base = ControllerParams(
        strategy="resonance-cancel",
        onset_delay=0.33,
        bandwidth=3.2,
        load_bandwidth_slope=0.0,
        max_force=100.0,
        noise_std=0.2,
        kp=130.0,
        kd=18.0,
        cancel_gain=1.0,
        ball_damping=2.0,
    )
    return replace(base, **overrides) if overrides else base


def stroke_profile(**overrides) -> ControllerParams:
    """Stroke-like participant: slow onset (0.99 s mean), 1.04 Hz bandwidth
    (below resonance) degrading -0.01 Hz per % load, moves the bowl in a slow
    swirl instead of cancelling the ball."""
    base = ControllerParams(
        strategy="low-frequency-swirl",
        onset_delay=0.99,
        bandwidth=1.04,
        load_bandwidth_slope=-0.017,
        max_force=70.0,
        noise_std=0.25,
        kp=55.0,
        kd=16.0,
        cancel_gain=0.0,
        swirl_amp=0.25,
        swirl_freq=0.35,
    )
    return replace(base, **overrides) if overrides else base


PROFILES = {"control": control_profile, "stroke": stroke_profile}


# --------------------------------------------------------------------------
# per-step kernels (shared with the trial engine)
# --------------------------------------------------------------------------

@njit(cache=True)
def _nearest_flag(flags, collected, x, y):
    best = -1
    best_d2 = 1e300
    for i in range(flags.shape[0]):
        if collected[i] == 0:
            dx = flags[i, 0] - x
            dy = flags[i, 1] - y
            d2 = dx * dx + dy * dy
            if d2 < best_d2:
                best_d2 = d2
                best = i
    return best


@njit(cache=True)
def _clip3(fx, fy, fz, max_force):
    mag = math.sqrt(fx * fx + fy * fy + fz * fz)
    if mag > max_force:
        s = max_force / mag
        return fx * s, fy * s, fz * s
    return fx, fy, fz


@njit(cache=True)
def _controller_step(cp, step, t, ball, bowl, fball_x, fball_y, flags,
                     collected, noise_x, noise_y, loading, filt, ring):
    """One synthetic-controller step.

    The dead time delays the task stimulus, not the motor loop: ``ring``
    holds the nearest-remaining-flag position per step (indexed by step
    modulo its length; reading before writing yields the target from exactly
    n_delay steps ago), so any change in the flag set takes onset_delay
    seconds to alter the output.  Self-state feedback (bowl, ball) acts
    without delay, the way proprioception and entrained prediction do;
    routing it through the dead time would only produce a limit cycle that
    has nothing to do with the measured onset-delay phenomenon.

    Every command then passes the bandwidth low-pass and the magnitude clip.
    The vertical channel is tonic: loading support ramps through the same
    low-pass once the onset delay has elapsed, and an instantaneous
    limb-impedance spring-damper raises the bowl to hover height only after
    the tonic drive can carry the load (avoids bouncing across the table
    contact band).
    """
    best = _nearest_flag(flags, collected, bowl[0], bowl[1])
    nd = int(cp[CP_NDELAY])
    if nd > 0:
        k = step % nd
        tx = ring[k, 0]
        ty = ring[k, 1]
        tv = ring[k, 2]
        if best >= 0:
            ring[k, 0] = flags[best, 0]
            ring[k, 1] = flags[best, 1]
            ring[k, 2] = 1.0
        else:
            ring[k, 2] = 0.0
    elif best >= 0:
        tx = flags[best, 0]
        ty = flags[best, 1]
        tv = 1.0
    else:
        tx = ty = tv = 0.0

    u_ff = loading if step >= nd else 0.0
    a = cp[CP_ALPHA]
    # two cascaded one-pole stages per channel: a single pole would leave
    # ~30% of white-noise power above twice the corner frequency
    filt[2] += a * (u_ff - filt[2])
    filt[5] += a * (filt[2] - filt[5])
    lift_ready = step >= nd and filt[5] >= 0.99 * loading - 1e-9

    # no aiming while resting: horizontal work starts with the lift intent,
    # so transit toward the first flag is paid task time at every load level
    ux = 0.0
    uy = 0.0
    dx = 0.0
    dy = 0.0
    if tv > 0.5 and lift_ready:
        ux = cp[CP_KP] * (tx - bowl[0])
        uy = cp[CP_KP] * (ty - bowl[1])
        mode = int(cp[CP_MODE])
        if mode == MODE_CANCEL:
            ux -= cp[CP_CANCEL] * fball_x
            uy -= cp[CP_CANCEL] * fball_y
        elif mode == MODE_SWIRL:
            ph = TWO_PI * cp[CP_SWIRL_FREQ] * t
            ux += cp[CP_SWIRL_AMP] * math.cos(ph)
            uy += cp[CP_SWIRL_AMP] * math.sin(ph)
        ux += cp[CP_BALLD] * ball[2] + noise_x
        uy += cp[CP_BALLD] * ball[3] + noise_y
        # intrinsic limb viscosity: instantaneous, not a neurally
        # bandwidth-limited command (keeps the loop damped at low corners)
        dx = -cp[CP_KD] * bowl[3]
        dy = -cp[CP_KD] * bowl[4]

    filt[0] += a * (ux - filt[0])
    filt[1] += a * (uy - filt[1])
    filt[3] += a * (filt[0] - filt[3])
    filt[4] += a * (filt[1] - filt[4])
    # tonic vertical drive is applied only once it can carry the load;
    # until then the impedance holds the bowl down on the table
    ff_out = filt[5] if lift_ready else 0.0
    z_cmd = cp[CP_HOVER] if lift_ready else cp[CP_REST]
    fz = ff_out + cp[CP_KZ] * (z_cmd - bowl[2]) - cp[CP_KDZ] * bowl[5]
    return _clip3(filt[3] + dx, filt[4] + dy, fz, cp[CP_MAXF])


@njit(cache=True)
def _pointer_force(cp, bowl, px, py, lift, loading):
    """Critically damped virtual coupling from pointer target to bowl; the
    coupling force is what gets recorded as the user force."""
    fx = cp[CP_KP] * (px - bowl[0]) - cp[CP_KD] * bowl[3]
    fy = cp[CP_KP] * (py - bowl[1]) - cp[CP_KD] * bowl[4]
    z_cmd = cp[CP_HOVER] if lift else cp[CP_REST]
    fz = cp[CP_KZ] * (z_cmd - bowl[2]) - cp[CP_KDZ] * bowl[5]
    if lift:
        fz += loading
    return _clip3(fx, fy, fz, cp[CP_MAXF])


def build_cp_array(params: ControllerParams, sim: SimParams,
                   loading_level: int) -> np.ndarray:
    """Pack controller constants for the kernels, resolving the effective
    bandwidth at the given loading level."""
    bw = params.effective_bandwidth(loading_level)
    if bw <= 0.0:
        raise ParameterError(f"effective bandwidth {bw} Hz <= 0 at load {loading_level}%")
    cp = np.zeros(CP_SIZE)
    cp[CP_MODE] = STRATEGIES[params.strategy]
    cp[CP_NDELAY] = round(params.onset_delay / sim.physics_dt)
    cp[CP_ALPHA] = 1.0 - math.exp(-TWO_PI * bw * sim.physics_dt)
    cp[CP_MAXF] = params.max_force
    cp[CP_KP] = params.kp
    cp[CP_KD] = params.kd
    cp[CP_CANCEL] = params.cancel_gain
    cp[CP_SWIRL_AMP] = params.swirl_amp
    cp[CP_SWIRL_FREQ] = params.swirl_freq
    cp[CP_KZ] = params.kz
    cp[CP_KDZ] = params.kdz
    cp[CP_HOVER] = sim.table_height + params.hover_z
    cp[CP_REST] = sim.table_height - 0.005
    cp[CP_BALLD] = params.ball_damping
    return cp


def pointer_cp_array(sim: SimParams, max_force: float = 200.0,
                     kp: float = 300.0, hover_z: float = 0.03) -> np.ndarray:
    """Coupling constants for human pointer input (critically damped in xy)."""
    cp = np.zeros(CP_SIZE)
    cp[CP_MODE] = MODE_POINTER
    cp[CP_MAXF] = max_force
    cp[CP_KP] = kp
    cp[CP_KD] = 2.0 * math.sqrt(kp * sim.virtual_mass)
    cp[CP_KZ] = 400.0
    cp[CP_KDZ] = 2.0 * math.sqrt(400.0 * sim.virtual_mass) + 30.0
    cp[CP_HOVER] = sim.table_height + hover_z
    cp[CP_REST] = sim.table_height - 0.005
    return cp


class ForceController:
    """Stateful wrapper around the controller kernel for one trial.

    Holds the dead-time delay line, the low-pass filter state, and the noise
    stream; feed it the simulation state once per physics step.
    """

    def __init__(self, params: ControllerParams, sim: SimParams,
                 loading_level: int, loading_force: float,
                 seed: int | None = None):
        self.params = params
        self.sim = sim
        self.loading_level = loading_level
        self.loading_force = loading_force
        self.cp = build_cp_array(params, sim, loading_level)
        n_delay = int(self.cp[CP_NDELAY])
        self.ring = np.zeros((max(n_delay, 1), 3))
        self.filt = np.zeros(6)
        self.step_index = 0
        self._rng = np.random.default_rng(params.rng_seed if seed is None else seed)

    def noise_array(self, n_steps: int) -> np.ndarray:
        """Pre-draw the command noise for a whole trial (engine fast path)."""
        if self.params.noise_std <= 0.0:
            return np.zeros((0, 2))
        return self._rng.standard_normal((n_steps, 2)) * self.params.noise_std

    def plan_force(self, ball: BallState, bowl: BowlState,
                   ball_force: tuple[float, float], flags: np.ndarray,
                   collected: np.ndarray, t: float) -> tuple[float, float, float]:
        """Advance one physics step and return the commanded force."""
        if self.params.noise_std > 0.0:
            nx, ny = self._rng.standard_normal(2) * self.params.noise_std
        else:
            nx = ny = 0.0
        ball_arr = np.array([ball.theta_x, ball.theta_y, ball.omega_x,
                             ball.omega_y, 1.0 if ball.in_bowl else 0.0])
        bowl_arr = np.array([bowl.x, bowl.y, bowl.z, bowl.vx, bowl.vy, bowl.vz,
                             1.0 if bowl.lifted else 0.0])
        out = _controller_step(self.cp, self.step_index, t, ball_arr, bowl_arr,
                               ball_force[0], ball_force[1], flags, collected,
                               nx, ny, self.loading_force, self.filt, self.ring)
        self.step_index += 1
        return out
