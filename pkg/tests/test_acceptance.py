"""Acceptance gate.

Each test implements one primary acceptance criterion at its stated
tolerance and prints a single PASS/FAIL line (run with -s to see them
live).  The two secondary criteria are covered by tests/test_server.py
(loopback equivalence) and the frontend vitest suite (UI rule conformance).
"""

import time

import numpy as np
import pytest

from ballbowl.anova import mixed_anova, rm_anova_2way
from ballbowl.config import SessionConfig
from ballbowl.dynamics import BallState, SimParams, resonant_length, step_ball
from ballbowl.pipeline import analyze_logs, export_analysis, load_archive, simulate_cohort
from ballbowl.spectral import compute_trial_metrics, fft_spectrum
from ballbowl.task import generate_protocol

from test_anova import cells_from_array, oracle_mixed, oracle_rm
from test_dynamics import pendulum_energy
from test_pipeline_cli import tree_digest


def report(name: str, ok: bool, detail: str = "") -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def test_c1_resonance_fidelity():
    """Free oscillation at L = resonant_length(1.88) measures 1.88 Hz +-0.5%."""
    L = resonant_length(1.88, 9.81)
    p = SimParams(pendulum_length=L, angular_damping=0.0)
    step_ball(BallState(theta_x=0.01), (0.0, 0.0), p)  # warm the JIT
    t0 = time.perf_counter()
    ball = BallState(theta_x=0.01)
    n = int(20 / 1.88 / p.physics_dt)
    ts = np.empty(n)
    xs = np.empty(n)
    t = 0.0
    for i in range(n):
        ball = step_ball(ball, (0.0, 0.0), p)
        t += p.physics_dt
        ts[i] = t
        xs[i] = ball.theta_x
    idx = np.where(np.diff(np.sign(xs)) != 0)[0]
    cross = ts[idx] - xs[idx] * (ts[idx + 1] - ts[idx]) / (xs[idx + 1] - xs[idx])
    f = 1.0 / (2.0 * np.diff(cross).mean())
    elapsed = time.perf_counter() - t0
    err = abs(f - 1.88) / 1.88
    report("resonance fidelity", err < 0.005 and elapsed < 5.0,
           f"f={f:.5f} Hz, err={100 * err:.4f}%, runtime={elapsed:.2f}s")


def test_c2_energy_conservation():
    """Undamped, unforced pendulum conserves energy to 1e-6 over 20 s at 1 ms."""
    p = SimParams(angular_damping=0.0, physics_dt=1e-3)
    ball = BallState(theta_x=0.3, theta_y=-0.15)
    e0 = pendulum_energy(ball, p)
    worst = 0.0
    for _ in range(20_000):
        ball = step_ball(ball, (0.0, 0.0), p)
        worst = max(worst, abs(pendulum_energy(ball, p) - e0) / e0)
    report("energy conservation", worst < 1e-6, f"max rel drift={worst:.2e}")


@pytest.fixture(scope="module")
def mini_cohort():
    cfg = SessionConfig()
    logs, _ = simulate_cohort(cfg, subjects_per_group=1, seed=77)
    return cfg, logs


def test_c3_spectral_normalization(mini_cohort):
    """Every valid trial spectrum sums to 1 +-1e-9; metrics are k-invariant."""
    cfg, logs = mini_cohort
    f_res = cfg.sim.resonant_freq
    worst_sum = 0.0
    checked = 0
    for log in logs:
        if not log.valid:
            continue
        for axis in ("x", "y"):
            spec = fft_spectrum(log, axis)
            worst_sum = max(worst_sum, abs(spec.power[1:].sum() - 1.0))
            checked += 1
    worst_metric = 0.0
    for log in logs[::15][:6]:
        base = compute_trial_metrics(log, f_res)
        for k in (0.1, 3.7, 1000.0):
            scaled_log = type(log)(
                spec=log.spec, trace=log.trace * [1.0, k, k, k],
                events=log.events, final=log.final, valid=log.valid,
                duration=log.duration, flags=log.flags,
                subject=log.subject, group=log.group)
            m = compute_trial_metrics(scaled_log, f_res)
            for f in ("peak_near_resonance_x", "peak_near_resonance_y",
                      "high_low_ratio_x", "high_low_ratio_y"):
                a, b = getattr(base, f), getattr(m, f)
                if a is not None and b is not None:
                    worst_metric = max(worst_metric, abs(a - b))
    report("spectral normalization",
           worst_sum < 1e-9 and worst_metric <= 1e-9 and checked >= 150,
           f"{checked} spectra, worst |sum-1|={worst_sum:.2e}, "
           f"worst metric shift={worst_metric:.2e}")


def test_c4_transform_correctness():
    """2 Hz sine -> one non-DC bin at 2.00 Hz with power 1; Parseval on 100
    random traces within 1e-6 relative."""
    t = np.arange(2000) / 100.0
    trace = np.zeros((2000, 4))
    trace[:, 0] = t
    trace[:, 1] = np.sin(2 * np.pi * 2.0 * t)
    trace[:, 2] = trace[:, 1]
    spec = fft_spectrum(trace, "x")
    k = int(spec.power.argmax())
    single_bin = (abs(spec.frequencies[k] - 2.0) < 1e-9
                  and abs(spec.power[k] - 1.0) < 1e-9
                  and np.all(np.delete(spec.power, k) < 1e-9))
    rng = np.random.default_rng(4242)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(520, 2001))
        x = rng.normal(size=n) * rng.uniform(0.1, 10) + rng.uniform(-5, 5)
        tr = np.zeros((n, 4))
        tr[:, 0] = np.arange(n) / 100.0
        tr[:, 1] = x
        s = fft_spectrum(tr, "x")
        want = np.sum((x - x.mean()) ** 2) / n
        worst = max(worst, abs(s.raw_power[1:].sum() - want) / want)
    report("transform correctness", single_bin and worst < 1e-6,
           f"single-bin={single_bin}, worst Parseval rel err={worst:.2e}")


def test_c5_anova_oracle_equivalence():
    """100 random balanced 6x3x5x2 datasets: F/p match the loop-coded oracle
    within 1e-6; eps in [0.5, 1] for the 3-level factor; p_gg >= p."""
    rng = np.random.default_rng(99)
    t0 = time.perf_counter()
    worst = 0.0
    eps_ok = True
    pgg_ok = True
    for _ in range(100):
        Yg = (rng.normal(size=(2, 6, 3, 5))
              + rng.normal(scale=rng.uniform(0.2, 2.0), size=(2, 6, 1, 1))
              + rng.normal(scale=rng.uniform(0, 1.0), size=(2, 1, 3, 1))
              + rng.normal(scale=rng.uniform(0, 1.0), size=(1, 1, 1, 5)))
        groups = ["a"] * 6 + ["b"] * 6
        cells = cells_from_array(Yg.reshape(12, 3, 5), groups)
        res = mixed_anova(cells)
        want = oracle_mixed(Yg)
        for name, (F, pval) in want.items():
            row = res.effect(name)
            worst = max(worst, abs(row.F - F) / max(abs(F), 1e-9),
                        abs(row.p - pval))
        for gi, g in enumerate(("a", "b")):
            gcells = [c for c in cells if c.group == g]
            rres = rm_anova_2way(gcells)
            rwant = oracle_rm(Yg[gi])
            for name, (F, pval) in rwant.items():
                row = rres.effect(name)
                worst = max(worst, abs(row.F - F) / max(abs(F), 1e-9),
                            abs(row.p - pval))
            eps = rres.effect("load").gg_epsilon
            eps_ok = eps_ok and 0.5 - 1e-12 <= eps <= 1.0 + 1e-12
        for row in res.effects:
            if row.gg_epsilon is not None and row.gg_epsilon < 1.0:
                pgg_ok = pgg_ok and row.p_gg >= row.p - 1e-15
            if row.effect == "load":
                eps_ok = eps_ok and 0.5 - 1e-12 <= row.gg_epsilon <= 1.0 + 1e-12
    elapsed = time.perf_counter() - t0
    report("ANOVA oracle equivalence",
           worst < 1e-6 and eps_ok and pgg_ok and elapsed < 60.0,
           f"worst F/p err={worst:.2e}, eps bounds={eps_ok}, "
           f"p_gg>=p={pgg_ok}, runtime={elapsed:.1f}s")


def test_c6_protocol_invariants():
    """10^4 seeded protocols: 3 sets per level, per-set permutations of B-F."""
    ok = True
    for seed in range(10_000):
        proto = generate_protocol(seed)  # validates all invariants on build
        loads = [s[0].loading_level for s in proto.sets()]
        ok = ok and all(loads.count(l) == 3 for l in (0, 20, 50))
        if not ok:
            break
    report("protocol invariants", ok, "10000 seeds")


def test_c7_qualitative_reproduction():
    """10 six-plus-six cohorts with default profiles reproduce the directional
    group x loading effects."""
    t0 = time.perf_counter()
    cfg = SessionConfig()
    all_ok = True
    details = []
    for seed in range(1, 11):
        logs, _ = simulate_cohort(cfg, subjects_per_group=6, seed=seed)
        res = analyze_logs(logs, f_res=cfg.sim.resonant_freq)

        def cell_mean(metric, group, load):
            vals = [c.value for c in res.cells[metric]
                    if c.group == group and c.load == load]
            return float(np.mean(vals))

        pk_c = [cell_mean("peak_near_resonance_x", "control-like", l)
                for l in (0, 20, 50)]
        pk_s = [cell_mean("peak_near_resonance_x", "stroke-like", l)
                for l in (0, 20, 50)]
        tpt_c = [cell_mean("time_per_target", "control-like", l)
                 for l in (0, 20, 50)]
        tpt_s = [cell_mean("time_per_target", "stroke-like", l)
                 for l in (0, 20, 50)]
        ratio_s = [cell_mean("high_low_ratio_x", "stroke-like", l)
                   for l in (0, 20, 50)]
        a = all(c > s for c, s in zip(pk_c, pk_s))
        rel_s = (tpt_s[2] - tpt_s[0]) / tpt_s[0]
        rel_c = (tpt_c[2] - tpt_c[0]) / tpt_c[0]
        b = tpt_s[0] < tpt_s[1] < tpt_s[2] and rel_s > rel_c
        c = ratio_s[0] > ratio_s[1] > ratio_s[2]
        all_ok = all_ok and a and b and c
        details.append(f"seed{seed}:{'+' if a and b and c else '-'}")
    elapsed = time.perf_counter() - t0
    report("qualitative result reproduction",
           all_ok and elapsed < 600.0,
           f"{' '.join(details)}, runtime={elapsed:.0f}s")


def test_c8_pipeline_determinism(tmp_path):
    """simulate + analyze twice with fixed seeds -> byte-identical outputs."""
    cfg = SessionConfig()
    digests = []
    for run in ("r1", "r2"):
        arch = tmp_path / run / "archive"
        tables = tmp_path / run / "tables"
        simulate_cohort(cfg, subjects_per_group=2, seed=5, out_dir=arch)
        logs, _ = load_archive(arch)
        result = analyze_logs(logs, f_res=cfg.sim.resonant_freq)
        export_analysis(result, tables, full_spectra_logs=logs)
        digests.append((tree_digest(arch), tree_digest(tables)))
    report("pipeline determinism", digests[0] == digests[1],
           f"archive+tables sha256 equal={digests[0] == digests[1]}")
