"""Frequency decomposition of force traces and the per-trial metrics.

Per trial and axis: discrete Fourier transform of the recorded force, squared
magnitudes folded to one side and divided by trial length (raw power), then
scaled so power over the non-DC bins sums to one.  The DC bin carries the
static load/arm-weight offset and is excluded from normalization and metrics,
which makes every metric invariant to both trace scaling and constant
offsets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import TrialLog
from .errors import (
    AnalysisError,
    DegenerateSpectrumError,
    MetricUndefinedError,
    RatioUndefinedError,
)

MIN_TRIAL_SECONDS = 5.2
DEFAULT_CUTOFF_HZ = 1.0
RESONANCE_WINDOW_HZ = 1.0
AGGREGATE_GRID_DF = 0.05

AXIS_COLUMNS = {"x": 1, "y": 2}


@dataclass
class Spectrum:
    """One-sided normalized power spectrum of a single axis of one trial."""

    frequencies: np.ndarray
    power: np.ndarray          # normalized: non-DC bins sum to 1, DC set to 0
    axis: str
    trial_id: str = ""
    raw_power: np.ndarray = field(default=None, repr=False)  # pre-normalization

    @property
    def df(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])


def _trace_array(trace) -> np.ndarray:
    if isinstance(trace, TrialLog):
        return trace.trace
    if isinstance(trace, (list, tuple)) and trace and hasattr(trace[0], "fx"):
        arr = np.asarray([(s.t, s.fx, s.fy, s.fz) for s in trace], dtype=float)
    else:
        arr = np.asarray(trace, dtype=float)
    if arr.ndim != 2 or arr.shape[1] < 3:
        raise AnalysisError("trace must be an (n, >=3) array of t, fx, fy[, fz]")
    return arr


def fft_spectrum(trace, axis: str, record_rate: float = 100.0,
                 trial_id: str = "") -> Spectrum:
    """Normalized one-sided power spectrum of the selected force axis.

    Raw bin power is |X_k|^2 / N^2 with one-sided folding, so the non-DC sum
    equals the mean-removed signal energy divided by trace length (Parseval).
    """
    if axis not in AXIS_COLUMNS:
        raise AnalysisError(f"axis must be 'x' or 'y', got {axis!r}")
    arr = _trace_array(trace)
    n = arr.shape[0]
    if n < int(MIN_TRIAL_SECONDS * record_rate):
        raise AnalysisError(
            f"trace too short for analysis: {n} samples < "
            f"{int(MIN_TRIAL_SECONDS * record_rate)}"
        )
    dt_col = np.diff(arr[:, 0])
    if dt_col.size and (np.abs(dt_col - 1.0 / record_rate) > 1e-9).any():
        raise AnalysisError("trace is not uniformly sampled at the record rate")
    x = arr[:, AXIS_COLUMNS[axis]]
    if np.ptp(x) == 0.0:
        raise DegenerateSpectrumError(
            f"constant {axis}-force trace has no non-DC energy"
        )
    X = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, d=1.0 / record_rate)
    raw = (np.abs(X) ** 2) / (n * n)
    raw[1:] *= 2.0
    if n % 2 == 0:
        raw[-1] /= 2.0  # Nyquist bin is not mirrored
    total = raw[1:].sum()
    if total <= 0.0:
        raise DegenerateSpectrumError("zero non-DC energy")
    power = raw / total
    power[0] = 0.0
    return Spectrum(frequencies=freqs, power=power, axis=axis,
                    trial_id=trial_id, raw_power=raw)


def peak_near_resonance(spec: Spectrum, f_res: float,
                        window: float = RESONANCE_WINDOW_HZ) -> float:
    """Maximum normalized bin power within +-window of the resonant frequency."""
    mask = (np.abs(spec.frequencies - f_res) <= window) & (spec.frequencies > 0)
    if not mask.any():
        raise AnalysisError(
            f"no spectral bins within +-{window} Hz of {f_res} Hz"
        )
    return float(spec.power[mask].max())


def high_low_ratio(spec: Spectrum, cutoff: float = DEFAULT_CUTOFF_HZ) -> float:
    """Power at or above the cutoff divided by power below it (DC excluded)."""
    f = spec.frequencies
    low = (f > 0) & (f < cutoff)
    high = f >= cutoff
    if not low.any() or not high.any():
        raise AnalysisError(f"no bins on both sides of the {cutoff} Hz cutoff")
    low_sum = float(spec.power[low].sum())
    high_sum = float(spec.power[high].sum())
    # power is normalized to unit sum, so anything at rounding scale is a
    # numerical zero and the ratio would be meaningless amplification
    if low_sum < 1e-15:
        raise RatioUndefinedError("zero low-frequency energy; ratio undefined")
    return high_sum / low_sum


def time_per_target(log: TrialLog) -> float:
    """Task time divided by flags collected, seconds per flag."""
    if log.flags_collected == 0:
        raise MetricUndefinedError("no flags collected; time-per-target undefined")
    return log.task_time / log.flags_collected


def aggregate_spectra(spectra: list[Spectrum], grid_df: float = AGGREGATE_GRID_DF,
                      f_max: float = 50.0) -> Spectrum:
    """Per-bin mean across trials after resampling to a common frequency grid."""
    if not spectra:
        raise AnalysisError("cannot aggregate an empty spectrum group")
    axis = spectra[0].axis
    if any(s.axis != axis for s in spectra):
        raise AnalysisError("cannot aggregate spectra from different axes")
    grid = np.arange(0.0, f_max + grid_df / 2, grid_df)
    acc = np.zeros_like(grid)
    for s in spectra:
        acc += np.interp(grid, s.frequencies, s.power)
    acc /= len(spectra)
    return Spectrum(frequencies=grid, power=acc, axis=axis,
                    trial_id=f"aggregate(n={len(spectra)})")


@dataclass
class TrialMetrics:
    """The five per-trial performance metrics; None when undefined."""

    subject: str
    group: str
    set_index: int
    trial_index: int
    loading_level: int
    distribution: str
    flags_collected: int
    task_time: float
    time_per_target: float | None = None
    peak_near_resonance_x: float | None = None
    peak_near_resonance_y: float | None = None
    high_low_ratio_x: float | None = None
    high_low_ratio_y: float | None = None
    issues: tuple[str, ...] = ()


def compute_trial_metrics(log: TrialLog, f_res: float,
                          cutoff: float = DEFAULT_CUTOFF_HZ,
                          record_rate: float = 100.0) -> TrialMetrics:
    """All metrics for one trial, recording per-metric failure reasons."""
    issues: list[str] = []
    m = TrialMetrics(
        subject=log.subject,
        group=log.group,
        set_index=log.spec.set_index,
        trial_index=log.spec.trial_index,
        loading_level=log.spec.loading_level,
        distribution=log.spec.distribution,
        flags_collected=log.flags_collected,
        task_time=log.task_time,
    )
    if not log.valid:
        m.issues = ("invalid-trial",)
        return m
    try:
        m.time_per_target = time_per_target(log)
    except MetricUndefinedError as e:
        issues.append(f"time_per_target: {e}")
    for axis in ("x", "y"):
        try:
            spec = fft_spectrum(log, axis, record_rate=record_rate,
                                trial_id=f"{log.subject}/{log.spec.trial_index}")
        except AnalysisError as e:
            issues.append(f"spectrum_{axis}: {e}")
            continue
        setattr(m, f"peak_near_resonance_{axis}", peak_near_resonance(spec, f_res))
        try:
            setattr(m, f"high_low_ratio_{axis}", high_low_ratio(spec, cutoff))
        except RatioUndefinedError as e:
            issues.append(f"high_low_ratio_{axis}: {e}")
    m.issues = tuple(issues)
    return m
