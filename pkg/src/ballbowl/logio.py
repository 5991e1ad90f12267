"""Trial-log persistence: line-delimited JSON records, one file per trial,
plus a session manifest that indexes the archive.

Every file starts with a header record carrying the schema version; floats
are serialized with shortest round-trip repr so write->read->write is
byte-identical.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .engine import TrialEvent, TrialLog
from .errors import BallBowlError
from .task import TrialSpec, TrialState

SCHEMA_VERSION = 1


class LogFormatError(BallBowlError):
    """Malformed or incompatible trial-log file."""


def _spec_dict(spec: TrialSpec) -> dict:
    return {
        "distribution": spec.distribution,
        "loading_level": spec.loading_level,
        "set_index": spec.set_index,
        "trial_index": spec.trial_index,
        "rng_seed": spec.rng_seed,
    }


def write_trial_log(log: TrialLog, path: str | Path) -> None:
    path = Path(path)
    lines = []
    header = {
        "record": "header",
        "schema": SCHEMA_VERSION,
        "subject": log.subject,
        "group": log.group,
        "spec": _spec_dict(log.spec),
        "duration": log.duration,
        "valid": log.valid,
        "flags": [[float(x), float(y)] for x, y in log.flags],
    }
    lines.append(json.dumps(header))
    for t, fx, fy, fz in log.trace:
        lines.append(json.dumps({"record": "sample", "t": float(t),
                                 "fx": float(fx), "fy": float(fy),
                                 "fz": float(fz)}))
    for ev in log.events:
        lines.append(json.dumps({"record": "event", "t": ev.t, "kind": ev.kind,
                                 "flag_index": ev.flag_index}))
    final = log.final
    lines.append(json.dumps({
        "record": "final",
        "remaining": list(final.remaining),
        "collected_count": final.collected_count,
        "task_time": final.task_time,
        "eligible": final.eligible,
        "wall_time": final.wall_time,
    }))
    path.write_text("\n".join(lines) + "\n")


def read_trial_log(path: str | Path) -> TrialLog:
    path = Path(path)
    header = None
    samples: list[tuple] = []
    events: list[TrialEvent] = []
    final = None
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise LogFormatError(f"{path}:{lineno}: bad JSON: {e}") from e
        kind = rec.get("record")
        if kind == "header":
            if rec.get("schema") != SCHEMA_VERSION:
                raise LogFormatError(
                    f"{path}: unsupported schema {rec.get('schema')}")
            header = rec
        elif kind == "sample":
            samples.append((rec["t"], rec["fx"], rec["fy"], rec["fz"]))
        elif kind == "event":
            events.append(TrialEvent(rec["t"], rec["kind"], rec["flag_index"]))
        elif kind == "final":
            final = rec
        else:
            raise LogFormatError(f"{path}:{lineno}: unknown record {kind!r}")
    if header is None or final is None:
        raise LogFormatError(f"{path}: missing header or final record")
    spec = TrialSpec(**header["spec"])
    state = TrialState(
        remaining=tuple(final["remaining"]),
        collected_count=final["collected_count"],
        task_time=final["task_time"],
        eligible=final["eligible"],
        wall_time=final["wall_time"],
    )
    trace = np.array(samples, dtype=float) if samples else np.zeros((0, 4))
    return TrialLog(
        spec=spec,
        trace=trace,
        events=tuple(events),
        final=state,
        valid=header["valid"],
        duration=header["duration"],
        flags=np.array(header["flags"], dtype=float),
        subject=header["subject"],
        group=header["group"],
    )


def write_manifest(path: str | Path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")


def read_manifest(path: str | Path) -> dict:
    path = Path(path)
    if not path.exists():
        raise LogFormatError(f"manifest not found: {path}")
    manifest = json.loads(path.read_text())
    if manifest.get("schema") != SCHEMA_VERSION:
        raise LogFormatError(f"{path}: unsupported schema {manifest.get('schema')}")
    return manifest
