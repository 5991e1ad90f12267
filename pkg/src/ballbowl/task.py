"""Flag-collection task rules and the randomized 45-trial session protocol.

Flag distributions are fixed parameterized shapes (20 flags each) defined in
normalized [0,1]^2 coordinates; one (A) is the training grid, the five others
(B-F) are used for data collection.  Distributions are scaled uniformly into a
per-subject workspace rectangle, preserving shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import BallState, BowlState
from .errors import ConfigurationError, ParameterError

LOADING_LEVELS = (0, 20, 50)
COLLECTION_IDS = ("B", "C", "D", "E", "F")
SETS_PER_SESSION = 9
TRIALS_PER_SET = 5
DEFAULT_COLLECTION_TOL = 0.015  # m
TRIAL_TIME_LIMIT = 20.0         # s


@dataclass(frozen=True)
class Workspace:
    """Conservative reachable rectangle, meters."""

    x_min: float = -0.25
    x_max: float = 0.25
    y_min: float = -0.20
    y_max: float = 0.20

    def __post_init__(self) -> None:
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ParameterError("workspace must satisfy x_min < x_max, y_min < y_max")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


@dataclass(frozen=True)
class FlagDistribution:
    """20 flag positions in normalized unit-square coordinates."""

    id: str
    points: np.ndarray
    role: str  # "training" | "collection"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.shape != (20, 2):
            raise ParameterError(f"distribution {self.id}: need exactly 20 points")
        if pts.min() < 0.0 or pts.max() > 1.0:
            raise ParameterError(f"distribution {self.id}: points must lie in [0,1]^2")

    def min_spacing(self) -> float:
        d = self.points[:, None, :] - self.points[None, :, :]
        dist = np.hypot(d[..., 0], d[..., 1])
        np.fill_diagonal(dist, np.inf)
        return float(dist.min())


def _grid_training() -> np.ndarray:
    xs = np.linspace(0.1, 0.9, 4)
    ys = np.linspace(0.1, 0.9, 5)
    return np.array([(x, y) for x in xs for y in ys])


def _ring() -> np.ndarray:
    ang = 2.0 * np.pi * np.arange(20) / 20.0
    return np.column_stack([0.5 + 0.4 * np.cos(ang), 0.5 + 0.4 * np.sin(ang)])


def _two_clusters() -> np.ndarray:
    def cluster(cx: float, cy: float) -> np.ndarray:
        ring = 2.0 * np.pi * np.arange(9) / 9.0
        pts = [(cx, cy)]
        pts += [(cx + 0.16 * math.cos(a), cy + 0.16 * math.sin(a)) for a in ring]
        return np.array(pts)

    return np.vstack([cluster(0.27, 0.27), cluster(0.73, 0.73)])


def _diagonal_band() -> np.ndarray:
    u = np.linspace(0.1, 0.9, 20)
    off = np.where(np.arange(20) % 2 == 0, 0.06, -0.06) / math.sqrt(2.0)
    return np.column_stack([u - off, u + off])


def _cross() -> np.ndarray:
    horiz = [(x, 0.5) for x in np.linspace(0.05, 0.95, 10)]
    vert_y = [0.05, 0.14, 0.23, 0.32, 0.41, 0.59, 0.68, 0.77, 0.86, 0.95]
    vert = [(0.5, y) for y in vert_y]
    return np.array(horiz + vert)


def _scatter() -> np.ndarray:
    # Fixed-seed rejection sampling; the seed is a constant of the artifact,
    # so the shape is a frozen approximation, not user-seed dependent.
    rng = np.random.default_rng(20)
    pts: list[tuple[float, float]] = []
    while len(pts) < 20:
        x, y = rng.uniform(0.05, 0.95, size=2)
        if all(math.hypot(x - px, y - py) >= 0.1 for px, py in pts):
            pts.append((float(x), float(y)))
    return np.array(pts)


def builtin_distributions() -> tuple[FlagDistribution, ...]:
    """The six built-in flag shapes: A trains, B-F collect data."""
    return (
        FlagDistribution("A", _grid_training(), "training"),
        FlagDistribution("B", _ring(), "collection"),
        FlagDistribution("C", _two_clusters(), "collection"),
        FlagDistribution("D", _diagonal_band(), "collection"),
        FlagDistribution("E", _cross(), "collection"),
        FlagDistribution("F", _scatter(), "collection"),
    )


def distributions_by_id(
    overrides: dict[str, FlagDistribution] | None = None,
) -> dict[str, FlagDistribution]:
    table = {d.id: d for d in builtin_distributions()}
    if overrides:
        table.update(overrides)
    return table


def scale_distribution(dist: FlagDistribution, ws: Workspace,
                       tolerance: float = DEFAULT_COLLECTION_TOL) -> np.ndarray:
    """Map normalized flags into the workspace with a single uniform scale.

    The unit square is fitted centered into the workspace rectangle (limited
    by the short side), preserving the distribution's aspect ratio.
    """
    scale = min(ws.width, ws.height)
    if dist.min_spacing() * scale < 2.0 * tolerance:
        raise ConfigurationError(
            f"workspace too small for distribution {dist.id}: scaled flag spacing "
            f"{dist.min_spacing() * scale:.4f} m < 2 x tolerance {2 * tolerance:.4f} m"
        )
    x0 = ws.x_min + 0.5 * (ws.width - scale)
    y0 = ws.y_min + 0.5 * (ws.height - scale)
    out = np.empty_like(dist.points)
    out[:, 0] = x0 + scale * dist.points[:, 0]
    out[:, 1] = y0 + scale * dist.points[:, 1]
    return out


@dataclass(frozen=True)
class TrialSpec:
    """One task attempt within a session."""

    distribution: str
    loading_level: int
    set_index: int
    trial_index: int
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.loading_level not in LOADING_LEVELS:
            raise ParameterError(
                f"loading_level must be one of {LOADING_LEVELS}, got {self.loading_level}"
            )


@dataclass
class TrialState:
    """Live bookkeeping of one trial."""

    remaining: tuple[int, ...]            # indices into the scaled flag array
    collected_count: int = 0
    task_time: float = 0.0
    eligible: bool = False
    wall_time: float = 0.0


def check_collection(state: TrialState, bowl: BowlState, ball: BallState,
                     flag_index: int, flag_xy: tuple[float, float],
                     tolerance: float) -> TrialState:
    """Collect one flag iff ball is in the bowl, the bowl is lifted, and the
    bowl sits within ``tolerance`` of the flag.  Idempotent per flag."""
    eligible = ball.in_bowl and bowl.lifted
    state = replace_state(state, eligible=eligible)
    if not eligible or flag_index not in state.remaining:
        return state
    if math.hypot(bowl.x - flag_xy[0], bowl.y - flag_xy[1]) <= tolerance:
        remaining = tuple(i for i in state.remaining if i != flag_index)
        return replace_state(state, remaining=remaining,
                             collected_count=state.collected_count + 1)
    return state


def accrue_task_time(state: TrialState, bowl: BowlState, dt: float) -> TrialState:
    """task_time advances only while lifted and before the final collection."""
    if bowl.lifted and state.remaining:
        return replace_state(state, task_time=state.task_time + dt)
    return state


def replace_state(state: TrialState, **kw) -> TrialState:
    out = TrialState(state.remaining, state.collected_count, state.task_time,
                     state.eligible, state.wall_time)
    for k, v in kw.items():
        setattr(out, k, v)
    return out


@dataclass(frozen=True)
class Protocol:
    """Ordered 45-trial session: 9 sets of 5 trials."""

    seed: int
    trials: tuple[TrialSpec, ...]

    def __post_init__(self) -> None:
        if len(self.trials) != SETS_PER_SESSION * TRIALS_PER_SET:
            raise ParameterError("protocol must contain exactly 45 trials")
        sets: dict[int, list[TrialSpec]] = {}
        for t in self.trials:
            sets.setdefault(t.set_index, []).append(t)
        if sorted(sets) != list(range(1, SETS_PER_SESSION + 1)):
            raise ParameterError("set indices must cover 1..9")
        load_of_set = {}
        for s, items in sets.items():
            if sorted(t.distribution for t in items) != sorted(COLLECTION_IDS):
                raise ParameterError(f"set {s} must contain each of B-F exactly once")
            loads = {t.loading_level for t in items}
            if len(loads) != 1:
                raise ParameterError(f"set {s} mixes loading levels")
            load_of_set[s] = loads.pop()
        for level in LOADING_LEVELS:
            n = sum(1 for v in load_of_set.values() if v == level)
            if n != 3:
                raise ParameterError(f"loading level {level} used in {n} sets, expected 3")

    def sets(self) -> list[list[TrialSpec]]:
        out: list[list[TrialSpec]] = [[] for _ in range(SETS_PER_SESSION)]
        for t in self.trials:
            out[t.set_index - 1].append(t)
        return out


def generate_protocol(seed: int) -> Protocol:
    """Randomized session: load order is a permutation of three repeats of each
    level; each set holds a random permutation of the five collection shapes."""
    rng = np.random.default_rng(seed)
    load_order = rng.permutation(np.repeat(LOADING_LEVELS, 3))
    trials: list[TrialSpec] = []
    index = 1
    for set_i, load in enumerate(load_order, start=1):
        for dist in rng.permutation(np.array(COLLECTION_IDS)):
            trials.append(TrialSpec(
                distribution=str(dist),
                loading_level=int(load),
                set_index=set_i,
                trial_index=index,
                rng_seed=int(rng.integers(0, 2 ** 63 - 1)),
            ))
            index += 1
    return Protocol(seed=seed, trials=tuple(trials))
