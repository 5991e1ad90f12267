"""Fixed-timestep trial engine.

One kernel advances the coupled ball/bowl system, applies the active force
source (synthetic controller, external force, or pointer coupling), records
force samples at the recording rate, emits task events, and enforces the
collection and task-time rules.  The same kernel serves batch simulation
(run to completion) and the live session server (chunked stepping).

Per step, the ball reaction force is evaluated from the current state using
the previous step's pivot acceleration (explicit one-step coupling), then the
ball and bowl advance under forces held constant across the RK4 stages.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .dynamics import (
    BallState,
    BowlState,
    SimParams,
    _ball_alpha,
    _ball_axis_rk4,
    _bowl_haxis_rk4,
    _bowl_z_rk4,
    _reaction_axis,
)
from .errors import ParameterError
from .players import (
    CP_MODE,
    CP_SIZE,
    MODE_EXTERNAL,
    MODE_POINTER,
    ForceController,
    _controller_step,
    _pointer_force,
)
from .task import (
    DEFAULT_COLLECTION_TOL,
    TRIAL_TIME_LIMIT,
    FlagDistribution,
    TrialSpec,
    TrialState,
    Workspace,
    distributions_by_id,
    scale_distribution,
)

# physics parameter array layout
P_L = 0
P_G = 1
P_MBALL = 2
P_CANG = 3
P_RIM = 4
P_REENTRY = 5
P_M = 6
P_B = 7
P_TABLEH = 8
P_KT = 9
P_CT = 10
P_LOAD = 11
P_DT = 12
P_CTOL = 13
P_COLTOL = 14
P_TLIMIT = 15
P_SIZE = 16

# misc float state
M_APX = 0
M_APY = 1
M_TASKTIME = 2
M_ELIGIBLE = 3
M_DURATION = 4
M_SIZE = 5

# int64 counters
C_STEP = 0
C_SAMP = 1
C_EVENT = 2
C_NCOLL = 3
C_SIZE = 4

STATUS_RUNNING = 0
STATUS_TIME = 1
STATUS_ALL_FLAGS = 2
STATUS_FAULT = 3
STATUS_OVERFLOW = 4

EV_LIFT = 1
EV_REST = 2
EV_COLLECT = 3
EV_FALLOUT = 4
EV_REENTRY = 5

EVENT_NAMES = {EV_LIFT: "lift", EV_REST: "rest", EV_COLLECT: "collect",
               EV_FALLOUT: "fall_out", EV_REENTRY: "reentry"}
EVENT_CODES = {v: k for k, v in EVENT_NAMES.items()}

MAX_EVENTS = 4096


@njit(cache=True)
def _run_steps(n_max, phys, record_every, cp, filt, ring, noise, ext,
               ball, bowl, misc, collected, flags, counters, samples, events):
    """Advance up to ``n_max`` physics steps; returns a STATUS_* code.

    STATUS_RUNNING means the step budget ran out with the trial still live.
    """
    L = phys[P_L]
    g = phys[P_G]
    m = phys[P_MBALL]
    c_ang = phys[P_CANG]
    rim = phys[P_RIM]
    reentry = phys[P_REENTRY]
    M = phys[P_M]
    B = phys[P_B]
    table_h = phys[P_TABLEH]
    k_t = phys[P_KT]
    c_t = phys[P_CT]
    loading = phys[P_LOAD]
    dt = phys[P_DT]
    contact_tol = phys[P_CTOL]
    tol = phys[P_COLTOL]
    t_limit = phys[P_TLIMIT]
    n_flags = flags.shape[0]
    mode = int(cp[CP_MODE])

    for _ in range(n_max):
        step = counters[C_STEP]
        t = step * dt
        if t >= t_limit - 1e-12:
            misc[M_DURATION] = t_limit
            return STATUS_TIME

        alpha_x = _ball_alpha(ball[0], ball[2], misc[M_APX], g, L, c_ang)
        alpha_y = _ball_alpha(ball[1], ball[3], misc[M_APY], g, L, c_ang)
        fbx = _reaction_axis(ball[0], ball[2], alpha_x, m, L)
        fby = _reaction_axis(ball[1], ball[3], alpha_y, m, L)

        if mode == MODE_EXTERNAL:
            fux = ext[0]
            fuy = ext[1]
            fuz = ext[2]
        elif mode == MODE_POINTER:
            fux, fuy, fuz = _pointer_force(cp, bowl, ext[0], ext[1],
                                           ext[2] > 0.5, loading)
        else:
            nx = 0.0
            ny = 0.0
            if noise.shape[0] > 0:
                nx = noise[step, 0]
                ny = noise[step, 1]
            fux, fuy, fuz = _controller_step(cp, step, t, ball, bowl, fbx,
                                             fby, flags, collected, nx, ny,
                                             loading, filt, ring)

        if step % record_every == 0:
            k = counters[C_SAMP]
            samples[k, 0] = t
            samples[k, 1] = fux
            samples[k, 2] = fuy
            samples[k, 3] = fuz
            counters[C_SAMP] = k + 1

        lifted0 = bowl[6] > 0.5
        if lifted0 and counters[C_NCOLL] < n_flags:
            misc[M_TASKTIME] += dt

        ax = (fux + fbx - B * bowl[3]) / M
        ay = (fuy + fby - B * bowl[4]) / M

        ball[0], ball[2] = _ball_axis_rk4(ball[0], ball[2], ax, g, L, c_ang, dt)
        ball[1], ball[3] = _ball_axis_rk4(ball[1], ball[3], ay, g, L, c_ang, dt)
        bowl[0], bowl[3] = _bowl_haxis_rk4(bowl[0], bowl[3], fux + fbx, M, B, dt)
        bowl[1], bowl[4] = _bowl_haxis_rk4(bowl[1], bowl[4], fuy + fby, M, B, dt)
        fz = fuz - (loading if lifted0 else 0.0)
        bowl[2], bowl[5] = _bowl_z_rk4(bowl[2], bowl[5], fz, M, table_h,
                                       k_t, c_t, dt)
        misc[M_APX] = ax
        misc[M_APY] = ay
        counters[C_STEP] = step + 1
        te = (step + 1) * dt

        ok = (math.isfinite(ball[0]) and math.isfinite(ball[1])
              and math.isfinite(ball[2]) and math.isfinite(ball[3])
              and math.isfinite(bowl[0]) and math.isfinite(bowl[1])
              and math.isfinite(bowl[2]) and math.isfinite(bowl[3])
              and math.isfinite(bowl[4]) and math.isfinite(bowl[5]))
        if not ok:
            misc[M_DURATION] = te
            return STATUS_FAULT

        mag = math.hypot(ball[0], ball[1])
        if ball[4] > 0.5:
            if mag > rim:
                ball[4] = 0.0
                if counters[C_EVENT] >= events.shape[0]:
                    return STATUS_OVERFLOW
                events[counters[C_EVENT], 0] = te
                events[counters[C_EVENT], 1] = EV_FALLOUT
                events[counters[C_EVENT], 2] = -1.0
                counters[C_EVENT] += 1
        else:
            if mag < reentry:
                ball[4] = 1.0
                if counters[C_EVENT] >= events.shape[0]:
                    return STATUS_OVERFLOW
                events[counters[C_EVENT], 0] = te
                events[counters[C_EVENT], 1] = EV_REENTRY
                events[counters[C_EVENT], 2] = -1.0
                counters[C_EVENT] += 1

        lifted1 = bowl[2] > table_h + contact_tol
        if lifted1 != lifted0:
            if counters[C_EVENT] >= events.shape[0]:
                return STATUS_OVERFLOW
            events[counters[C_EVENT], 0] = te
            events[counters[C_EVENT], 1] = EV_LIFT if lifted1 else EV_REST
            events[counters[C_EVENT], 2] = -1.0
            counters[C_EVENT] += 1
        bowl[6] = 1.0 if lifted1 else 0.0

        eligible = ball[4] > 0.5 and lifted1
        misc[M_ELIGIBLE] = 1.0 if eligible else 0.0

        if eligible and counters[C_NCOLL] < n_flags:
            best = -1
            best_d2 = 1e300
            for i in range(n_flags):
                if collected[i] == 0:
                    dx = flags[i, 0] - bowl[0]
                    dy = flags[i, 1] - bowl[1]
                    d2 = dx * dx + dy * dy
                    if d2 < best_d2:
                        best_d2 = d2
                        best = i
            if best >= 0 and best_d2 <= tol * tol:
                collected[best] = 1
                counters[C_NCOLL] += 1
                if counters[C_EVENT] >= events.shape[0]:
                    return STATUS_OVERFLOW
                events[counters[C_EVENT], 0] = te
                events[counters[C_EVENT], 1] = EV_COLLECT
                events[counters[C_EVENT], 2] = best
                counters[C_EVENT] += 1
                if counters[C_NCOLL] == n_flags:
                    misc[M_DURATION] = te
                    return STATUS_ALL_FLAGS
    return STATUS_RUNNING


@dataclass(frozen=True)
class TrialEvent:
    t: float
    kind: str
    flag_index: int = -1


@dataclass
class TrialLog:
    """Everything recorded for one task attempt."""

    spec: TrialSpec
    trace: np.ndarray                 # (n_samples, 4): t, fx, fy, fz
    events: tuple[TrialEvent, ...]
    final: TrialState
    valid: bool
    duration: float                   # trial wall duration, s
    flags: np.ndarray                 # scaled flag positions (m)
    subject: str = ""
    group: str = ""

    @property
    def flags_collected(self) -> int:
        return self.final.collected_count

    @property
    def task_time(self) -> float:
        return self.final.task_time


class TrialRunner:
    """Owns the array state of one running trial.

    Use :meth:`run` for a closed-loop synthetic controller, or repeatedly call
    :meth:`set_force` / :meth:`set_pointer` + :meth:`step_chunk` when the
    force source is external (live session, scripted replay).
    """

    def __init__(self, spec: TrialSpec, params: SimParams, flags: np.ndarray,
                 controller: ForceController | None = None,
                 tolerance: float = DEFAULT_COLLECTION_TOL,
                 time_limit: float = TRIAL_TIME_LIMIT,
                 start_xy: tuple[float, float] = (0.0, 0.0),
                 pointer_cp: np.ndarray | None = None):
        self.spec = spec
        self.params = params
        self.time_limit = float(time_limit)
        self.flags = np.ascontiguousarray(flags, dtype=float)
        if self.flags.ndim != 2 or self.flags.shape[1] != 2:
            raise ParameterError("flags must be an (n, 2) array")

        self.phys = np.array([
            params.pendulum_length, params.gravity, params.ball_mass,
            params.angular_damping, params.rim_angle, params.reentry_angle,
            params.virtual_mass, params.virtual_damping, params.table_height,
            params.table_stiffness, params.table_damping, params.loading_force,
            params.physics_dt, params.contact_tol, tolerance, self.time_limit,
        ])
        self.record_every = params.record_every
        self.n_steps_max = int(round(self.time_limit / params.physics_dt))

        self.ball = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
        self.bowl = np.zeros(7)
        self.bowl[0], self.bowl[1] = start_xy
        self.bowl[2] = params.table_height
        self.misc = np.zeros(M_SIZE)
        self.misc[M_DURATION] = self.time_limit
        self.counters = np.zeros(C_SIZE, dtype=np.int64)
        self.collected = np.zeros(self.flags.shape[0], dtype=np.uint8)

        n_samples = math.ceil(self.time_limit * params.record_rate)
        self.samples = np.zeros((n_samples, 4))
        self.events = np.zeros((MAX_EVENTS, 3))
        self.ext = np.zeros(3)
        self.status = STATUS_RUNNING

        self.controller = controller
        if controller is not None:
            self.cp = controller.cp
            self.filt = controller.filt
            self.ring = controller.ring
            self.noise = controller.noise_array(self.n_steps_max)
        elif pointer_cp is not None:
            self.cp = pointer_cp
            self.filt = np.zeros(6)
            self.ring = np.zeros((1, 3))
            self.noise = np.zeros((0, 2))
        else:
            self.cp = np.zeros(CP_SIZE)
            self.cp[CP_MODE] = MODE_EXTERNAL
            self.filt = np.zeros(6)
            self.ring = np.zeros((1, 3))
            self.noise = np.zeros((0, 2))

    # -- stepping ----------------------------------------------------------

    def step_chunk(self, n_steps: int) -> int:
        if self.status == STATUS_RUNNING:
            self.status = _run_steps(
                n_steps, self.phys, self.record_every, self.cp, self.filt,
                self.ring, self.noise, self.ext, self.ball, self.bowl,
                self.misc, self.collected, self.flags, self.counters,
                self.samples, self.events)
        return self.status

    def run(self) -> int:
        """Run to completion (closed-loop sources only)."""
        return self.step_chunk(self.n_steps_max + 1)

    def set_force(self, fx: float, fy: float, fz: float) -> None:
        self.ext[0] = fx
        self.ext[1] = fy
        self.ext[2] = fz

    def set_pointer(self, px: float, py: float, lift: bool) -> None:
        self.ext[0] = px
        self.ext[1] = py
        self.ext[2] = 1.0 if lift else 0.0

    # -- views -------------------------------------------------------------

    @property
    def sim_time(self) -> float:
        return float(self.counters[C_STEP]) * self.params.physics_dt

    @property
    def terminated(self) -> bool:
        return self.status != STATUS_RUNNING

    @property
    def faulted(self) -> bool:
        return self.status in (STATUS_FAULT, STATUS_OVERFLOW)

    def ball_state(self) -> BallState:
        b = self.ball
        return BallState(b[0], b[1], b[2], b[3], b[4] > 0.5)

    def bowl_state(self) -> BowlState:
        w = self.bowl
        return BowlState(w[0], w[1], w[2], w[3], w[4], w[5], w[6] > 0.5)

    def trial_state(self) -> TrialState:
        remaining = tuple(int(i) for i in np.flatnonzero(self.collected == 0))
        return TrialState(
            remaining=remaining,
            collected_count=int(self.counters[C_NCOLL]),
            task_time=float(self.misc[M_TASKTIME]),
            eligible=bool(self.misc[M_ELIGIBLE] > 0.5),
            wall_time=float(min(self.sim_time, self.misc[M_DURATION])),
        )

    def remaining_flags(self) -> np.ndarray:
        return self.flags[self.collected == 0]

    def event_list(self) -> tuple[TrialEvent, ...]:
        n = int(self.counters[C_EVENT])
        out = []
        for i in range(n):
            t, code, aux = self.events[i]
            out.append(TrialEvent(float(t), EVENT_NAMES[int(code)], int(aux)))
        return tuple(out)

    def build_log(self, subject: str = "", group: str = "") -> TrialLog:
        duration = float(self.misc[M_DURATION]) if self.terminated else self.sim_time
        n = int(self.counters[C_SAMP])
        return TrialLog(
            spec=self.spec,
            trace=self.samples[:n].copy(),
            events=self.event_list(),
            final=self.trial_state(),
            valid=not self.faulted,
            duration=duration,
            flags=self.flags.copy(),
            subject=subject,
            group=group,
        )


def run_simulation(spec: TrialSpec, force_source, params: SimParams,
                   workspace: Workspace | None = None,
                   distributions: dict[str, FlagDistribution] | None = None,
                   tolerance: float = DEFAULT_COLLECTION_TOL,
                   time_limit: float = TRIAL_TIME_LIMIT,
                   subject: str = "", group: str = "") -> TrialLog:
    """Simulate one trial to completion and return its log.

    ``force_source`` is a :class:`ForceController`, or a callable
    ``f(t, ball, bowl) -> (fx, fy, fz)`` evaluated once per physics step,
    or None for a zero-force (null) input stream.
    """
    ws = workspace or Workspace()
    table = distributions_by_id(distributions)
    if spec.distribution not in table:
        raise ParameterError(f"unknown distribution {spec.distribution!r}")
    flags = scale_distribution(table[spec.distribution], ws, tolerance)

    controller = force_source if isinstance(force_source, ForceController) else None
    runner = TrialRunner(spec, params, flags, controller=controller,
                         tolerance=tolerance, time_limit=time_limit,
                         start_xy=ws.center)
    if controller is not None:
        runner.run()
    else:
        stream = force_source if callable(force_source) else None
        while not runner.terminated:
            if stream is not None:
                f = stream(runner.sim_time, runner.ball_state(), runner.bowl_state())
                runner.set_force(*f)
            runner.step_chunk(1)
    return runner.build_log(subject=subject, group=group)
