"""Session configuration: plain-text INI with sections.

Schema (all keys optional; defaults shown in README):

    [subject]       id, group, max_sabd_force
    [workspace]     x_min, x_max, y_min, y_max
    [simulation]    any SimParams field except loading_force (set per trial)
    [session]       time_limit, collection_tolerance, snapshot_rate
    [controller]    profile = control|stroke|human, plus any ControllerParams
                    field as an override
    [protocol]      seed
    [distribution.X]  points = x1,y1; x2,y2; ...  (exactly 20 pairs, unit square)
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .dynamics import SimParams
from .errors import ConfigurationError
from .players import PROFILES, ControllerParams
from .task import (
    DEFAULT_COLLECTION_TOL,
    TRIAL_TIME_LIMIT,
    FlagDistribution,
    Workspace,
)


@dataclass
class SessionConfig:
    subject: str = "demo"
    group: str = "control-like"
    max_sabd_force: float = 60.0
    workspace: Workspace = field(default_factory=Workspace)
    sim: SimParams = field(default_factory=SimParams)
    profile: str = "control"            # control | stroke | human
    controller: ControllerParams | None = None  # resolved profile + overrides
    protocol_seed: int = 0
    time_limit: float = TRIAL_TIME_LIMIT
    collection_tolerance: float = DEFAULT_COLLECTION_TOL
    snapshot_rate: float = 60.0
    distributions: dict[str, FlagDistribution] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.max_sabd_force <= 0.0:
            raise ConfigurationError("max_sabd_force must be > 0")
        if self.profile not in ("human", *PROFILES):
            raise ConfigurationError(
                f"unknown controller profile {self.profile!r}; "
                f"expected one of {sorted(PROFILES)} or 'human'"
            )
        if self.controller is None and self.profile != "human":
            self.controller = PROFILES[self.profile]()

    def loading_newtons(self, loading_level: int) -> float:
        return self.max_sabd_force * loading_level / 100.0

    def sim_for_level(self, loading_level: int) -> SimParams:
        return self.sim.with_loading(self.loading_newtons(loading_level))


def _coerce(raw: str, pytype):
    if pytype is bool:
        low = raw.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigurationError(f"invalid boolean {raw!r}")
    return pytype(raw)


def _dataclass_from_section(cls, section, base):
    kwargs = {}
    valid = {f.name: f.type for f in fields(cls)}
    for key, raw in section.items():
        if key not in valid:
            raise ConfigurationError(f"unknown key {key!r} for {cls.__name__}")
        ftype = type(getattr(base, key))
        kwargs[key] = _coerce(raw, ftype)
    return replace(base, **kwargs)


def _parse_points(raw: str):
    pts = []
    for chunk in raw.replace("\n", ";").split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        xy = chunk.split(",")
        if len(xy) != 2:
            raise ConfigurationError(f"bad point {chunk!r}; expected 'x,y'")
        pts.append((float(xy[0]), float(xy[1])))
    return pts


def load_config(path: str | Path | None) -> SessionConfig:
    """Load a session configuration file; missing path means all defaults."""
    cfg = SessionConfig()
    if path is None:
        return cfg
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    parser = configparser.ConfigParser()
    try:
        parser.read(path)
    except configparser.Error as e:
        raise ConfigurationError(f"cannot parse {path}: {e}") from e

    try:
        if parser.has_section("subject"):
            s = parser["subject"]
            cfg.subject = s.get("id", cfg.subject)
            cfg.group = s.get("group", cfg.group)
            if "max_sabd_force" in s:
                cfg.max_sabd_force = float(s["max_sabd_force"])
        if parser.has_section("workspace"):
            cfg.workspace = _dataclass_from_section(
                Workspace, parser["workspace"], cfg.workspace)
        if parser.has_section("simulation"):
            cfg.sim = _dataclass_from_section(
                SimParams, parser["simulation"], cfg.sim)
        if parser.has_section("session"):
            s = parser["session"]
            cfg.time_limit = float(s.get("time_limit", cfg.time_limit))
            cfg.collection_tolerance = float(
                s.get("collection_tolerance", cfg.collection_tolerance))
            cfg.snapshot_rate = float(s.get("snapshot_rate", cfg.snapshot_rate))
        if parser.has_section("controller"):
            s = dict(parser["controller"])
            cfg.profile = s.pop("profile", cfg.profile)
            if cfg.profile == "human":
                if s:
                    raise ConfigurationError(
                        "controller overrides are not valid for profile=human")
                cfg.controller = None
            else:
                if cfg.profile not in PROFILES:
                    raise ConfigurationError(
                        f"unknown controller profile {cfg.profile!r}")
                base = PROFILES[cfg.profile]()
                overrides = {}
                valid = {f.name for f in fields(ControllerParams)}
                for key, raw in s.items():
                    if key not in valid:
                        raise ConfigurationError(
                            f"unknown controller key {key!r}")
                    cur = getattr(base, key)
                    overrides[key] = _coerce(raw, type(cur))
                cfg.controller = replace(base, **overrides)
        if parser.has_section("protocol"):
            cfg.protocol_seed = int(parser["protocol"].get("seed", cfg.protocol_seed))
        for name in parser.sections():
            if name.startswith("distribution."):
                dist_id = name.split(".", 1)[1]
                pts = _parse_points(parser[name].get("points", ""))
                role = parser[name].get("role", "collection")
                cfg.distributions[dist_id] = FlagDistribution(dist_id, pts, role)
    except (ValueError, KeyError) as e:
        raise ConfigurationError(f"invalid config {path}: {e}") from e
    # re-run validation with final values
    cfg.__post_init__()
    return cfg


def config_to_dict(cfg: SessionConfig) -> dict:
    """JSON-friendly echo of the effective configuration (for manifests)."""
    out = {
        "subject": cfg.subject,
        "group": cfg.group,
        "max_sabd_force": cfg.max_sabd_force,
        "workspace": vars(cfg.workspace).copy(),
        "simulation": {f.name: getattr(cfg.sim, f.name) for f in fields(SimParams)},
        "profile": cfg.profile,
        "protocol_seed": cfg.protocol_seed,
        "time_limit": cfg.time_limit,
        "collection_tolerance": cfg.collection_tolerance,
        "snapshot_rate": cfg.snapshot_rate,
    }
    if cfg.controller is not None:
        out["controller"] = {f.name: getattr(cfg.controller, f.name)
                             for f in fields(ControllerParams)}
    if cfg.distributions:
        out["distributions"] = {
            k: d.points.tolist() for k, d in cfg.distributions.items()}
    return out
