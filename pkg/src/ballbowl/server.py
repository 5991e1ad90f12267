"""Live session server: one player drives the simulation over a WebSocket.

The server is authoritative: it steps the physics at the fixed timestep,
applies the latest client input each step, streams state snapshots at the
declared rate, and persists trial logs in the batch schema.  All messages are
JSON text frames with a mandatory protocol version field.

Message catalogue (v1)
----------------------
client -> server:
    {"v":1, "type":"join"}
    {"v":1, "type":"start_trial"}
    {"v":1, "type":"input", "px":x, "py":y, "lift":bool [, "t":sim_s] [, "last":bool]}
    {"v":1, "type":"input", "fx":N, "fy":N, "fz":N [, "t":sim_s] [, "last":bool]}
    {"v":1, "type":"rest"}
server -> client:
    {"v":1, "type":"joined", ...session summary...}
    {"v":1, "type":"trial_started", "trial":i, "set":s, "distribution":d}
    {"v":1, "type":"snapshot", "seq":n, "t":s, "bowl":[x,y,z],
     "ball":[tx,ty], "in_bowl":b, "lifted":b, "eligible":b,
     "flags":[[x,y]...], "collected":n, "time_left":s, "trial":i, "set":s}
    {"v":1, "type":"trial_complete", "summary":{...}}
    {"v":1, "type":"session_complete"}
    {"v":1, "type":"error", "code":c, "message":m}

Inputs may carry a simulation timestamp ``t``: the server applies them at
that simulation time, which makes scripted replays deterministic regardless
of network timing.  Untimestamped inputs apply immediately (sticky latest).
With ``pace="fast"`` the loop steps as fast as input coverage allows instead
of tracking the wall clock (used for replay and tests).
"""

from __future__ import annotations

import asyncio
import heapq
import json
import math
import time
from pathlib import Path

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .config import SessionConfig, config_to_dict
from .engine import TrialRunner
from .logio import SCHEMA_VERSION, write_manifest, write_trial_log
from .players import pointer_cp_array
from .task import distributions_by_id, generate_protocol, scale_distribution

PROTOCOL_VERSION = 1


def _error(code: str, message: str) -> dict:
    return {"v": PROTOCOL_VERSION, "type": "error", "code": code,
            "message": message}


class LiveSession:
    """State machine for one player's 45-trial session."""

    def __init__(self, config: SessionConfig, out_dir: str | Path | None = None,
                 pace: str = "realtime"):
        if pace not in ("realtime", "fast"):
            raise ValueError(f"unknown pace {pace!r}")
        self.config = config
        self.pace = pace
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.protocol = generate_protocol(config.protocol_seed)
        self.trial_cursor = 0
        self.runner: TrialRunner | None = None
        self.socket: WebSocket | None = None
        self.seq = 0
        self.trial_files: list[str] = []
        self.drift_frac = 0.0
        # input state
        self._force_mode = False
        self._queue: list[tuple[float, int, tuple]] = []  # (t, n, payload)
        self._queue_n = 0
        self._coverage_steps = 0
        self._input_open_ended = True
        self._input_event = asyncio.Event()
        self._aborted = False
        self._trial_finished = True  # no trial yet

    # -- messaging ---------------------------------------------------------

    async def send(self, payload: dict) -> None:
        if self.socket is None:
            return
        try:
            await self.socket.send_text(json.dumps(payload))
        except Exception:
            self.socket = None  # peer went away; the trial still completes

    def joined_summary(self) -> dict:
        cfg = self.config
        return {
            "v": PROTOCOL_VERSION,
            "type": "joined",
            "subject": cfg.subject,
            "group": cfg.group,
            "trials": len(self.protocol.trials),
            "snapshot_rate": cfg.snapshot_rate,
            "time_limit": cfg.time_limit,
            "workspace": {"x_min": cfg.workspace.x_min, "x_max": cfg.workspace.x_max,
                          "y_min": cfg.workspace.y_min, "y_max": cfg.workspace.y_max},
            "table_height": cfg.sim.table_height,
            "next_trial": self.trial_cursor + 1,
        }

    # -- input handling ----------------------------------------------------

    def handle_input(self, msg: dict) -> dict | None:
        if self.runner is None or self.runner.terminated:
            return _error("no_trial", "no trial running; send start_trial first")
        if "fx" in msg or "fy" in msg or "fz" in msg:
            try:
                payload = ("force", float(msg.get("fx", 0.0)),
                           float(msg.get("fy", 0.0)), float(msg.get("fz", 0.0)))
            except (TypeError, ValueError):
                return _error("bad_input", "force fields must be numbers")
        elif "px" in msg or "py" in msg:
            try:
                payload = ("pointer", float(msg.get("px", 0.0)),
                           float(msg.get("py", 0.0)), bool(msg.get("lift", False)))
            except (TypeError, ValueError):
                return _error("bad_input", "pointer fields must be numbers")
        else:
            return _error("bad_input", "input needs fx/fy/fz or px/py/lift")
        self._any_input = True
        t_in = msg.get("t")
        dt = self.config.sim.physics_dt
        if t_in is None:
            self._apply_input(payload)
            self._coverage_steps = self.runner.n_steps_max + 1
            self._input_open_ended = True
        else:
            try:
                t_in = float(t_in)
            except (TypeError, ValueError):
                return _error("bad_input", "t must be a number")
            if not math.isfinite(t_in) or t_in < 0:
                return _error("bad_input", "t must be finite and >= 0")
            self._queue_n += 1
            heapq.heappush(self._queue, (t_in, self._queue_n, payload))
            # force holds one sample period beyond the newest timestamp
            self._coverage_steps = max(
                self._coverage_steps,
                int(round(t_in / dt)) + max(self.runner.record_every, 1))
            self._input_open_ended = False
        if msg.get("last"):
            self._input_open_ended = True
            self._coverage_steps = self.runner.n_steps_max + 1
        self._input_event.set()
        return None

    def _apply_input(self, payload: tuple) -> None:
        kind = payload[0]
        if kind == "force":
            if not self._force_mode:
                self.runner.cp = self._force_cp
                self._force_mode = True
            self.runner.set_force(payload[1], payload[2], payload[3])
        else:
            if self._force_mode:
                self.runner.cp = self._pointer_cp
                self._force_mode = False
            self.runner.set_pointer(payload[1], payload[2], payload[3])

    def handle_rest(self) -> None:
        if self.runner is None:
            return
        if self._force_mode:
            self.runner.set_force(0.0, 0.0, 0.0)
        else:
            ext = self.runner.ext
            self.runner.set_pointer(ext[0], ext[1], False)

    # -- trial lifecycle ---------------------------------------------------

    def start_trial(self) -> dict | None:
        if self.runner is not None and not self.runner.terminated:
            return _error("trial_running", "a trial is already in progress")
        if self.trial_cursor >= len(self.protocol.trials):
            return _error("session_done", "all trials completed")
        spec = self.protocol.trials[self.trial_cursor]
        cfg = self.config
        sim = cfg.sim_for_level(spec.loading_level)
        flags = scale_distribution(
            distributions_by_id(cfg.distributions or None)[spec.distribution],
            cfg.workspace, cfg.collection_tolerance)
        self._pointer_cp = pointer_cp_array(sim)
        self._force_cp = np.zeros_like(self._pointer_cp)  # MODE_EXTERNAL
        self.runner = TrialRunner(spec, sim, flags,
                                  tolerance=cfg.collection_tolerance,
                                  time_limit=cfg.time_limit,
                                  start_xy=cfg.workspace.center,
                                  pointer_cp=self._pointer_cp)
        self.runner.set_pointer(*cfg.workspace.center, False)
        self._force_mode = False
        self._queue.clear()
        self._queue_n = 0
        self._any_input = False
        if self.pace == "fast":
            # input-gated: do not race ahead of a replay client's first
            # timestamped input; free-run only after a short grace window
            self._coverage_steps = 0
            self._input_open_ended = False
        else:
            self._coverage_steps = self.runner.n_steps_max + 1
            self._input_open_ended = True
        self._aborted = False
        self._trial_finished = False
        return None

    def snapshot(self) -> dict:
        r = self.runner
        spec = r.spec
        state = r.trial_state()
        self.seq += 1
        return {
            "v": PROTOCOL_VERSION,
            "type": "snapshot",
            "seq": self.seq,
            "t": r.sim_time,
            "bowl": [r.bowl[0], r.bowl[1], r.bowl[2]],
            "ball": [r.ball[0], r.ball[1]],
            "in_bowl": bool(r.ball[4] > 0.5),
            "lifted": bool(r.bowl[6] > 0.5),
            "eligible": state.eligible,
            "flags": [[float(x), float(y)] for x, y in r.remaining_flags()],
            "collected": state.collected_count,
            "time_left": max(self.config.time_limit - r.sim_time, 0.0),
            "trial": spec.trial_index,
            "set": spec.set_index,
            "distribution": spec.distribution,
        }

    def _finish_trial(self) -> dict | None:
        """Persist the trial and advance the cursor; safe to call twice
        (the websocket teardown path finalizes synchronously because the
        stepping task may be cancelled with it)."""
        if self._trial_finished:
            return None
        self._trial_finished = True
        r = self.runner
        valid = not r.faulted and not self._aborted
        log = r.build_log(subject=self.config.subject, group=self.config.group)
        log.valid = valid
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)
            name = f"trial_{r.spec.trial_index:02d}.jsonl"
            write_trial_log(log, self.out_dir / name)
            self.trial_files.append(name)
            write_manifest(self.out_dir / "manifest.json", {
                "schema": SCHEMA_VERSION,
                "seed": self.config.protocol_seed,
                "subjects_per_group": 0,
                "config": config_to_dict(self.config),
                "subjects": [{
                    "id": self.config.subject,
                    "group": self.config.group,
                    "protocol_seed": self.config.protocol_seed,
                    "files": list(self.trial_files),
                }],
            })
        self.trial_cursor += 1
        return {
            "v": PROTOCOL_VERSION,
            "type": "trial_complete",
            "summary": {
                "trial": r.spec.trial_index,
                "set": r.spec.set_index,
                "distribution": r.spec.distribution,
                "loading_level": r.spec.loading_level,
                "flags_collected": log.flags_collected,
                "task_time": log.task_time,
                "duration": log.duration,
                "valid": log.valid,
                "drift": self.drift_frac,
            },
        }

    async def run_trial(self) -> None:
        """Step the active trial to completion, emitting snapshots."""
        r = self.runner
        dt = self.config.sim.physics_dt
        snap_dt = 1.0 / self.config.snapshot_rate
        wall0 = time.monotonic()
        await self.send(self.snapshot())
        next_snap_step = int(r.counters[0]) + max(int(round(snap_dt / dt)), 1)

        while not r.terminated and not self._aborted:
            step = int(r.counters[0])
            # apply all inputs due at or before the current step
            while self._queue and int(round(self._queue[0][0] / dt)) <= step:
                _, _, payload = heapq.heappop(self._queue)
                self._apply_input(payload)
            # barrier: next queued input, next snapshot, pacing target
            barrier = r.n_steps_max + 1
            if self._queue:
                barrier = min(barrier, int(round(self._queue[0][0] / dt)))
            barrier = min(barrier, next_snap_step)
            if not self._input_open_ended:
                barrier = min(barrier, self._coverage_steps)
            if self.pace == "realtime":
                wall_steps = int((time.monotonic() - wall0) / dt)
                barrier = min(barrier, wall_steps)
            chunk = barrier - step
            if chunk > 0:
                r.step_chunk(chunk)
            stepped = int(r.counters[0]) > step

            if int(r.counters[0]) >= next_snap_step:
                await self.send(self.snapshot())
                next_snap_step += max(int(round(snap_dt / dt)), 1)

            if r.terminated:
                break
            if not stepped:
                if self.pace == "realtime":
                    await asyncio.sleep(0.002)
                else:
                    # fast pace is input-bound: wait for more coverage; a
                    # trial that never sees input free-runs after the grace
                    self._input_event.clear()
                    try:
                        await asyncio.wait_for(self._input_event.wait(), 1.0)
                    except asyncio.TimeoutError:
                        if not self._any_input:
                            self._input_open_ended = True
            else:
                await asyncio.sleep(0)

        wall_elapsed = time.monotonic() - wall0
        if self.pace == "realtime" and r.sim_time > 0:
            self.drift_frac = abs(r.sim_time - wall_elapsed) / max(r.sim_time, 1e-9)
        else:
            self.drift_frac = 0.0
        await self.send(self.snapshot())
        summary = self._finish_trial()
        if summary is not None:
            await self.send(summary)
            if self.trial_cursor >= len(self.protocol.trials):
                await self.send({"v": PROTOCOL_VERSION,
                                 "type": "session_complete"})


def create_app(config: SessionConfig, out_dir: str | Path | None = None,
               pace: str = "realtime", static_dir: str | Path | None = None,
               ) -> FastAPI:
    app = FastAPI(title="ballbowl live session")
    session = LiveSession(config, out_dir=out_dir, pace=pace)
    app.state.session = session

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        if session.socket is not None:
            await ws.send_text(json.dumps(_error(
                "session_full", "another player is connected")))
            await ws.close()
            return
        session.socket = ws
        trial_task: asyncio.Task | None = None
        try:
            while True:
                raw = await ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError:
                    await session.send(_error("bad_json", "not valid JSON"))
                    continue
                if not isinstance(msg, dict) or msg.get("v") != PROTOCOL_VERSION:
                    await session.send(_error(
                        "bad_version",
                        f"messages must carry v={PROTOCOL_VERSION}"))
                    continue
                mtype = msg.get("type")
                if mtype == "join":
                    await session.send(session.joined_summary())
                elif mtype == "start_trial":
                    err = session.start_trial()
                    if err is not None:
                        await session.send(err)
                        continue
                    spec = session.runner.spec
                    await session.send({
                        "v": PROTOCOL_VERSION, "type": "trial_started",
                        "trial": spec.trial_index, "set": spec.set_index,
                        "distribution": spec.distribution,
                        "loading_level": spec.loading_level,
                    })
                    trial_task = asyncio.create_task(session.run_trial())
                elif mtype == "input":
                    err = session.handle_input(msg)
                    if err is not None:
                        await session.send(err)
                elif mtype == "rest":
                    session.handle_rest()
                else:
                    await session.send(_error(
                        "bad_type", f"unknown message type {mtype!r}"))
        except WebSocketDisconnect:
            pass
        finally:
            session.socket = None
            if session.runner is not None and not session._trial_finished:
                # mid-trial disconnect invalidates the attempt; finalize
                # synchronously because this task (and the stepping task)
                # can be cancelled as soon as the connection ends
                session._aborted = True
                session._input_event.set()
                session._finish_trial()
            if trial_task is not None and not trial_task.done():
                trial_task.cancel()

    if static_dir is not None and Path(static_dir).exists():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=static_dir, html=True),
                  name="ui")
    return app
