"""Live session server: wire protocol, authoritative stepping, real-time
pacing, persistence, and headless/serve loopback equivalence."""

import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from ballbowl.config import SessionConfig
from ballbowl.engine import run_simulation
from ballbowl.logio import read_trial_log
from ballbowl.players import ForceController, control_profile
from ballbowl.server import create_app
from ballbowl.spectral import compute_trial_metrics
from ballbowl.task import generate_protocol


def send(ws, **msg):
    ws.send_text(json.dumps(msg))


def recv(ws):
    return json.loads(ws.receive_text())


def recv_until(ws, mtype, limit=100000):
    for _ in range(limit):
        msg = recv(ws)
        if msg["type"] == mtype:
            return msg
    raise AssertionError(f"no {mtype} message within {limit} frames")


def make_app(tmp_path, **cfg_kw):
    cfg = SessionConfig(**cfg_kw)
    app = create_app(cfg, out_dir=tmp_path / "live", pace=cfg_kw.pop("pace", None)
                     or "fast")
    return app, cfg


class TestWireProtocol:
    def test_join_and_errors(self, tmp_path):
        cfg = SessionConfig()
        app = create_app(cfg, out_dir=None, pace="fast")
        with TestClient(app).websocket_connect("/ws") as ws:
            send(ws, v=1, type="join")
            joined = recv(ws)
            assert joined["type"] == "joined"
            assert joined["trials"] == 45
            assert joined["workspace"]["x_max"] == cfg.workspace.x_max

            ws.send_text("this is not json")
            assert recv(ws)["code"] == "bad_json"
            send(ws, type="join")  # missing version
            assert recv(ws)["code"] == "bad_version"
            send(ws, v=1, type="warp")
            assert recv(ws)["code"] == "bad_type"
            send(ws, v=1, type="input", fx=1.0, fy=0.0, fz=0.0)
            assert recv(ws)["code"] == "no_trial"

    def test_second_client_rejected(self, tmp_path):
        app = create_app(SessionConfig(), out_dir=None, pace="fast")
        client = TestClient(app)
        with client.websocket_connect("/ws") as ws1:
            send(ws1, v=1, type="join")
            recv(ws1)
            with client.websocket_connect("/ws") as ws2:
                msg = recv(ws2)
                assert msg["type"] == "error"
                assert msg["code"] == "session_full"

    def test_null_input_trial(self, tmp_path):
        # no input at all: bowl rests, timer runs out, zero task time
        cfg = SessionConfig(time_limit=1.0)
        app = create_app(cfg, out_dir=tmp_path, pace="fast")
        with TestClient(app).websocket_connect("/ws") as ws:
            send(ws, v=1, type="start_trial")
            started = recv(ws)
            assert started["type"] == "trial_started"
            done = recv_until(ws, "trial_complete")
            assert done["summary"]["flags_collected"] == 0
            assert done["summary"]["task_time"] == 0.0
            assert done["summary"]["valid"]

    def test_snapshot_stream(self, tmp_path):
        cfg = SessionConfig(time_limit=1.0)
        app = create_app(cfg, out_dir=None, pace="fast")
        with TestClient(app).websocket_connect("/ws") as ws:
            send(ws, v=1, type="start_trial")
            recv(ws)
            seqs, times = [], []
            while True:
                msg = recv(ws)
                if msg["type"] == "trial_complete":
                    break
                assert msg["type"] == "snapshot"
                seqs.append(msg["seq"])
                times.append(msg["t"])
                assert len(msg["flags"]) == 20
                assert msg["collected"] == 0
                assert not msg["lifted"]
            assert seqs == sorted(seqs)
            assert len(seqs) >= 0.9 * cfg.snapshot_rate * cfg.time_limit
            dt = np.diff([t for t in times if t > 0])
            assert np.all(dt > 0)

    def test_pointer_play_collects_flag(self, tmp_path):
        cfg = SessionConfig(time_limit=5.0)
        app = create_app(cfg, out_dir=tmp_path, pace="fast")
        with TestClient(app).websocket_connect("/ws") as ws:
            send(ws, v=1, type="start_trial")
            recv(ws)
            first = recv_until(ws, "snapshot")
            target = first["flags"][0]
            send(ws, v=1, type="input", px=target[0], py=target[1], lift=True)
            done = recv_until(ws, "trial_complete")
            assert done["summary"]["flags_collected"] >= 1
        log = read_trial_log(tmp_path / "trial_01.jsonl")
        assert log.flags_collected >= 1
        assert any(e.kind == "collect" for e in log.events)

    def test_disconnect_mid_trial_invalidates(self, tmp_path):
        cfg = SessionConfig(time_limit=10.0)
        app = create_app(cfg, out_dir=tmp_path, pace="realtime")
        client = TestClient(app)
        with client.websocket_connect("/ws") as ws:
            send(ws, v=1, type="start_trial")
            recv(ws)
            recv_until(ws, "snapshot", limit=10)
        # context exit closes the socket mid-trial; the server finishes and
        # persists the trial as invalid
        log = read_trial_log(tmp_path / "trial_01.jsonl")
        assert not log.valid


class TestRealTime:
    def test_wall_clock_drift_under_one_percent(self, tmp_path):
        cfg = SessionConfig(time_limit=2.0)
        app = create_app(cfg, out_dir=None, pace="realtime")
        with TestClient(app).websocket_connect("/ws") as ws:
            send(ws, v=1, type="start_trial")
            recv(ws)
            done = recv_until(ws, "trial_complete")
            assert done["summary"]["duration"] == pytest.approx(2.0)
            assert done["summary"]["drift"] < 0.01


class TestLoopback:
    def test_replay_matches_headless_metrics(self, tmp_path):
        # headless reference: the first protocol trial of a fixed seed
        cfg = SessionConfig(protocol_seed=123)
        spec = generate_protocol(cfg.protocol_seed).trials[0]
        sim = cfg.sim_for_level(spec.loading_level)
        ctrl = ForceController(control_profile(), sim, spec.loading_level,
                               sim.loading_force, seed=spec.rng_seed)
        headless = run_simulation(spec, ctrl, sim, workspace=cfg.workspace,
                                  tolerance=cfg.collection_tolerance,
                                  time_limit=cfg.time_limit,
                                  subject=cfg.subject, group=cfg.group)
        assert headless.flags_collected > 0

        app = create_app(cfg, out_dir=tmp_path, pace="fast")
        with TestClient(app).websocket_connect("/ws") as ws:
            send(ws, v=1, type="start_trial")
            recv(ws)
            rows = headless.trace
            for i, (t, fx, fy, fz) in enumerate(rows):
                send(ws, v=1, type="input", t=float(t), fx=float(fx),
                     fy=float(fy), fz=float(fz), last=i == len(rows) - 1)
            done = recv_until(ws, "trial_complete")

        replay = read_trial_log(tmp_path / f"trial_{spec.trial_index:02d}.jsonl")
        assert replay.valid
        f_res = cfg.sim.resonant_freq
        m_head = compute_trial_metrics(headless, f_res)
        m_replay = compute_trial_metrics(replay, f_res)
        for field in ("time_per_target", "peak_near_resonance_x",
                      "peak_near_resonance_y", "high_low_ratio_x",
                      "high_low_ratio_y"):
            a = getattr(m_head, field)
            b = getattr(m_replay, field)
            assert a is not None and b is not None
            assert abs(b - a) / abs(a) < 0.01, field
        assert abs(replay.task_time - headless.task_time) / headless.task_time < 0.01
        assert replay.flags_collected == headless.flags_collected
