"""Batch cohort simulation and the analysis pipeline.

Simulation: N synthetic subjects per group, each running the full randomized
45-trial protocol.  Per-subject controller parameters get a small fixed
heterogeneity jitter (seeded, deterministic) so the cohort has realistic
between-subject variance.  Analysis: per-trial metrics, aggregated spectra
per group x load, and the five ANOVA tables (mixed design plus per-group
repeated measures), with undefined metrics tracked in a data-quality report.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .anova import AnovaResult, CellData, mixed_anova, rm_anova_2way
from .config import SessionConfig, config_to_dict
from .engine import TrialLog, run_simulation
from .errors import BallBowlError, DegenerateDataError, DesignError
from .logio import SCHEMA_VERSION, read_manifest, read_trial_log, write_manifest, write_trial_log
from .players import PROFILES, ControllerParams, ForceController
from .spectral import TrialMetrics, aggregate_spectra, compute_trial_metrics, fft_spectrum
from .task import generate_protocol

GROUPS = (("control-like", "control"), ("stroke-like", "stroke"))
METRIC_FIELDS = ("time_per_target", "peak_near_resonance_x", "peak_near_resonance_y",
                 "high_low_ratio_x", "high_low_ratio_y")

# per-subject heterogeneity: fractional half-ranges of a uniform jitter
_JITTER = {"kp": 0.10, "bandwidth": 0.05, "onset_delay": 0.10, "noise_std": 0.10}


def subject_profile(base: ControllerParams, subject_seed: int) -> ControllerParams:
    """Apply the deterministic per-subject parameter jitter."""
    rng = np.random.default_rng(subject_seed)
    over = {}
    for name, frac in _JITTER.items():
        over[name] = getattr(base, name) * float(rng.uniform(1 - frac, 1 + frac))
    return replace(base, **over)


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def simulate_subject(config: SessionConfig, subject_id: str, group: str,
                     profile: ControllerParams, protocol_seed: int) -> list[TrialLog]:
    """Run the full 45-trial protocol for one synthetic subject."""
    protocol = generate_protocol(protocol_seed)
    logs = []
    for spec in protocol.trials:
        sim = config.sim_for_level(spec.loading_level)
        controller = ForceController(profile, sim, spec.loading_level,
                                     sim.loading_force, seed=spec.rng_seed)
        logs.append(run_simulation(
            spec, controller, sim,
            workspace=config.workspace,
            distributions=config.distributions or None,
            tolerance=config.collection_tolerance,
            time_limit=config.time_limit,
            subject=subject_id, group=group))
    return logs


def simulate_cohort(config: SessionConfig, subjects_per_group: int, seed: int,
                    out_dir: str | Path | None = None,
                    ) -> tuple[list[TrialLog], dict]:
    """Simulate a two-group cohort; optionally persist the trial-log archive."""
    if subjects_per_group < 1:
        raise BallBowlError("subjects_per_group must be >= 1")
    all_logs: list[TrialLog] = []
    subjects_meta = []
    for gi, (group, profile_name) in enumerate(GROUPS):
        base = PROFILES[profile_name]()
        for si in range(subjects_per_group):
            subject_id = f"{profile_name[:3]}{si + 1:02d}"
            subject_seed = _derived_seed(seed, gi, si, 0)
            protocol_seed = _derived_seed(seed, gi, si, 1)
            profile = subject_profile(base, subject_seed)
            logs = simulate_subject(config, subject_id, group, profile,
                                    protocol_seed)
            all_logs.extend(logs)
            subjects_meta.append({
                "id": subject_id,
                "group": group,
                "protocol_seed": protocol_seed,
                "profile": {f.name: getattr(profile, f.name)
                            for f in fields(ControllerParams)},
                "files": [f"{subject_id}/trial_{log.spec.trial_index:02d}.jsonl"
                          for log in logs],
            })
    manifest = {
        "schema": SCHEMA_VERSION,
        "seed": seed,
        "subjects_per_group": subjects_per_group,
        "config": config_to_dict(config),
        "subjects": subjects_meta,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for log, rel in zip(all_logs,
                            (f for s in subjects_meta for f in s["files"])):
            path = out / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            write_trial_log(log, path)
        write_manifest(out / "manifest.json", manifest)
    return all_logs, manifest


def load_archive(in_dir: str | Path) -> tuple[list[TrialLog], dict]:
    in_dir = Path(in_dir)
    manifest = read_manifest(in_dir / "manifest.json")
    logs = []
    for subj in manifest["subjects"]:
        for rel in subj["files"]:
            logs.append(read_trial_log(in_dir / rel))
    return logs, manifest


# --------------------------------------------------------------------------
# analysis
# --------------------------------------------------------------------------

@dataclass
class AnalysisResult:
    metrics: list[TrialMetrics]
    quality: list[dict]
    cells: dict[str, list[CellData]]                 # metric -> cell data
    anova: dict[str, dict[str, AnovaResult | str]]   # metric -> design -> result
    aggregates: dict[tuple[str, int, str], object]   # (group, load, axis) -> Spectrum
    excluded_subjects: dict[str, list[str]] = field(default_factory=dict)


def metric_cells(metrics: list[TrialMetrics], metric: str,
                 reduction: str = "mean",
                 ) -> tuple[list[CellData], dict[str, list[str]], list[dict]]:
    """Reduce trial metrics to one subject-level value per (load, distribution).

    Returns the cells, subjects excluded for incomplete designs, and
    data-quality notes for cells averaged over fewer than all repeats.
    """
    if reduction not in ("mean", "first"):
        raise BallBowlError(f"unknown cell reduction {reduction!r}")
    by_cell: dict[tuple[str, str, int, str], list[tuple[int, float | None]]] = {}
    for m in metrics:
        key = (m.subject, m.group, m.loading_level, m.distribution)
        by_cell.setdefault(key, []).append((m.trial_index, getattr(m, metric)))
    notes: list[dict] = []
    values: dict[tuple[str, str, int, str], float] = {}
    incomplete: dict[str, list[str]] = {}
    for key, entries in sorted(by_cell.items()):
        entries.sort()
        vals = [v for _, v in entries if v is not None]
        if not vals:
            subj = key[0]
            incomplete.setdefault(subj, []).append(
                f"{metric}: no valid repeats for load={key[2]} dist={key[3]}")
            continue
        if len(vals) < len(entries):
            notes.append({"subject": key[0], "metric": metric,
                          "loading_level": key[2], "distribution": key[3],
                          "note": f"cell mean over {len(vals)}/{len(entries)} repeats"})
        values[key] = vals[0] if reduction == "first" else float(np.mean(vals))
    cells = [CellData(subject=k[0], group=k[1], load=k[2], distribution=k[3],
                      value=v)
             for k, v in sorted(values.items())
             if k[0] not in incomplete]
    return cells, incomplete, notes


def analyze_logs(logs: list[TrialLog], f_res: float,
                 reduction: str = "mean") -> AnalysisResult:
    """Full analysis of an archive: metrics, aggregated spectra, ANOVA tables."""
    metrics = [compute_trial_metrics(log, f_res) for log in logs]
    quality: list[dict] = []
    for m in metrics:
        for issue in m.issues:
            quality.append({"subject": m.subject, "trial_index": m.trial_index,
                            "loading_level": m.loading_level,
                            "distribution": m.distribution, "note": issue})

    # aggregated spectra per group x load x axis
    spectra_groups: dict[tuple[str, int, str], list] = {}
    for log in logs:
        if not log.valid:
            continue
        for axis in ("x", "y"):
            try:
                spec = fft_spectrum(log, axis,
                                    trial_id=f"{log.subject}/{log.spec.trial_index}")
            except BallBowlError:
                continue
            key = (log.group, log.spec.loading_level, axis)
            spectra_groups.setdefault(key, []).append(spec)
    aggregates = {key: aggregate_spectra(specs)
                  for key, specs in sorted(spectra_groups.items())}

    cells: dict[str, list[CellData]] = {}
    anova: dict[str, dict[str, AnovaResult | str]] = {}
    excluded: dict[str, list[str]] = {}
    for metric in METRIC_FIELDS:
        mcells, incomplete, notes = metric_cells(metrics, metric, reduction)
        quality.extend(notes)
        for subj, reasons in incomplete.items():
            excluded.setdefault(subj, []).extend(reasons)
            quality.append({"subject": subj, "trial_index": "",
                            "loading_level": "", "distribution": "",
                            "note": f"excluded from {metric} ANOVA: "
                                    f"{len(reasons)} empty cells"})
        cells[metric] = mcells
        tables: dict[str, AnovaResult | str] = {}
        groups = sorted({c.group for c in mcells})
        subj_per_group = {g: len({c.subject for c in mcells if c.group == g})
                          for g in groups}
        try:
            if len(groups) >= 2 and all(n >= 2 for n in subj_per_group.values()):
                tables["mixed"] = mixed_anova(mcells, factors=("load", "task"))
            else:
                tables["mixed"] = ("skipped: need >=2 subjects in each of 2 "
                                   f"groups, have {subj_per_group}")
        except (DesignError, DegenerateDataError) as e:
            tables["mixed"] = f"error: {e}"
        for g in groups:
            gcells = [c for c in mcells if c.group == g]
            try:
                if subj_per_group[g] >= 2:
                    tables[f"rm:{g}"] = rm_anova_2way(gcells, factors=("load", "task"))
                else:
                    tables[f"rm:{g}"] = "skipped: single subject"
            except (DesignError, DegenerateDataError) as e:
                tables[f"rm:{g}"] = f"error: {e}"
        anova[metric] = tables
    return AnalysisResult(metrics=metrics, quality=quality, cells=cells,
                          anova=anova, aggregates=aggregates,
                          excluded_subjects=excluded)


# --------------------------------------------------------------------------
# CSV export
# --------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    path.write_text(buf.getvalue())


def export_analysis(result: AnalysisResult, out_dir: str | Path,
                    full_spectra_logs: list[TrialLog] | None = None) -> list[Path]:
    """Write the analysis tables; returns the created file paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    path = out / "metrics.csv"
    header = ["subject", "group", "set_index", "trial_index", "loading_level",
              "distribution", "flags_collected", "task_time", *METRIC_FIELDS]
    rows = [[m.subject, m.group, m.set_index, m.trial_index, m.loading_level,
             m.distribution, m.flags_collected, m.task_time,
             *(getattr(m, f) for f in METRIC_FIELDS)]
            for m in result.metrics]
    _write_csv(path, header, rows)
    written.append(path)

    path = out / "data_quality.csv"
    _write_csv(path, ["subject", "trial_index", "loading_level", "distribution",
                      "note"],
               [[q.get("subject"), q.get("trial_index"), q.get("loading_level"),
                 q.get("distribution"), q.get("note")] for q in result.quality])
    written.append(path)

    path = out / "spectra_aggregate.csv"
    rows = []
    for (group, load, axis), spec in result.aggregates.items():
        for f, p in zip(spec.frequencies, spec.power):
            rows.append([group, load, axis, float(f), float(p)])
    _write_csv(path, ["group", "loading_level", "axis", "f_hz", "power"], rows)
    written.append(path)

    if full_spectra_logs is not None:
        path = out / "spectra.csv"
        rows = []
        for log in full_spectra_logs:
            if not log.valid:
                continue
            for axis in ("x", "y"):
                try:
                    spec = fft_spectrum(log, axis)
                except BallBowlError:
                    continue
                for f, p in zip(spec.frequencies, spec.power):
                    rows.append([log.subject, log.spec.trial_index, axis,
                                 float(f), float(p)])
        _write_csv(path, ["subject", "trial_index", "axis", "f_hz", "power"], rows)
        written.append(path)

    anova_header = ["design", "effect", "F", "df_num", "df_den", "p",
                    "mauchly_W", "mauchly_p", "gg_epsilon", "p_gg"]
    for metric, tables in result.anova.items():
        path = out / f"anova_{metric}.csv"
        rows = []
        for design, res in tables.items():
            if isinstance(res, str):
                rows.append([design, res] + [None] * (len(anova_header) - 2))
                continue
            for row in res.effects:
                rows.append([design, row.effect, row.F, row.df_num, row.df_den,
                             row.p, row.mauchly_W, row.mauchly_p,
                             row.gg_epsilon, row.p_gg])
        _write_csv(path, anova_header, rows)
        written.append(path)
    return written
