"""Statistical functionals over LLD tracks: the frozen "egemaps-lite-88" layout.

88 clip-level descriptors with eGeMAPS-style semantics (means, coefficients
of variation, percentiles 20/50/80, ranges, rising/falling contour slopes,
and temporal rates). Names and order are frozen per layout name; numerical
parity with OpenSMILE is explicitly not claimed.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks

from speechconf.errors import UnfilledSlot
from speechconf.features.llds import LLDSeries

SEMITONE_REF_HZ = 27.5
COV_FLOOR = 1e-6  # |mean| floor for coefficient-of-variation slots
LOUDNESS_PEAK_PROMINENCE_DB = 3.0


def _ext10(p: str) -> list[str]:
    return [
        f"{p}_amean", f"{p}_stddev_norm", f"{p}_p20", f"{p}_p50", f"{p}_p80",
        f"{p}_range_p20_p80", f"{p}_rising_slope_amean", f"{p}_rising_slope_stddev",
        f"{p}_falling_slope_amean", f"{p}_falling_slope_stddev",
    ]


def _six(p: str) -> list[str]:
    return _ext10(p)[:6]


def _two(p: str) -> list[str]:
    return _ext10(p)[:2]


_SLOTS_88: list[str] = (
    _ext10("f0_semitone")
    + _ext10("loudness_db")
    + _six("jitter_local")
    + _six("shimmer_local")
    + _six("hnr_db")
    + _six("alpha_ratio_v")
    + _six("slope_0_500_v")
    + _six("slope_500_1500_v")
    + _two("alpha_ratio_uv")
    + _two("slope_0_500_uv")
    + _two("slope_500_1500_uv")
    + [s for k in range(1, 5) for s in _two(f"mfcc{k}")]
    + [s for k in range(1, 5) for s in _two(f"mfcc{k}_v")]
    + _two("loudness_db_v")
    + _two("loudness_db_uv")
    + [
        "voiced_segments_per_sec",
        "voiced_segment_len_amean",
        "voiced_segment_len_stddev",
        "unvoiced_segment_len_amean",
        "unvoiced_segment_len_stddev",
        "loudness_peaks_per_sec",
    ]
)
assert len(_SLOTS_88) == 88 and len(set(_SLOTS_88)) == 88


@dataclass(frozen=True)
class FeatureLayout:
    name: str
    slots: tuple[str, ...]

    def __post_init__(self):
        if len(self.slots) != 88 or len(set(self.slots)) != 88:
            raise ValueError("layout must contain exactly 88 unique slot names")


EGEMAPS_LITE_88 = FeatureLayout(name="egemaps-lite-88", slots=tuple(_SLOTS_88))


def _smooth3(y: np.ndarray) -> np.ndarray:
    if len(y) < 3:
        return y.copy()
    out = y.copy()
    out[1:-1] = (y[:-2] + y[1:-1] + y[2:]) / 3.0
    return out


def _monotone_run_slopes(y: np.ndarray, dt: float) -> tuple[list[float], list[float]]:
    """Slopes of maximal rising/falling runs of a contour, in units per second."""
    rising: list[float] = []
    falling: list[float] = []
    if len(y) < 2:
        return rising, falling
    start = 0
    direction = 0
    for i in range(1, len(y)):
        d = np.sign(y[i] - y[i - 1])
        if d == 0:
            continue
        if direction == 0:
            direction = d
        elif d != direction:
            slope = (y[i - 1] - y[start]) / ((i - 1 - start) * dt)
            (rising if direction > 0 else falling).append(float(slope))
            start = i - 1
            direction = d
    if direction != 0:
        slope = (y[-1] - y[start]) / ((len(y) - 1 - start) * dt)
        (rising if direction > 0 else falling).append(float(slope))
    return rising, falling


def _stats2(track: np.ndarray) -> dict[str, float]:
    """amean + stddev_norm, zeros on an empty track."""
    if len(track) == 0:
        return {"amean": 0.0, "stddev_norm": 0.0}
    m = float(np.mean(track))
    s = float(np.std(track))
    return {"amean": m, "stddev_norm": s / max(abs(m), COV_FLOOR)}


def _stats6(track: np.ndarray) -> dict[str, float]:
    out = _stats2(track)
    if len(track) == 0:
        out.update({"p20": 0.0, "p50": 0.0, "p80": 0.0, "range_p20_p80": 0.0})
        return out
    p20, p50, p80 = (float(np.percentile(track, q)) for q in (20, 50, 80))
    out.update({"p20": p20, "p50": p50, "p80": p80, "range_p20_p80": p80 - p20})
    return out


def _slope_stats(runs: list[np.ndarray], dt: float) -> dict[str, float]:
    rising: list[float] = []
    falling: list[float] = []
    for run in runs:
        r, f = _monotone_run_slopes(_smooth3(run), dt)
        rising.extend(r)
        falling.extend(f)

    def pack(vals: list[float], key: str) -> dict[str, float]:
        if not vals:
            return {f"{key}_amean": 0.0, f"{key}_stddev": 0.0}
        a = np.asarray(vals)
        return {f"{key}_amean": float(a.mean()), f"{key}_stddev": float(a.std())}

    return pack(rising, "rising_slope") | pack(falling, "falling_slope")


def _prefixed(prefix: str, stats: dict[str, float]) -> dict[str, float]:
    return {f"{prefix}_{k}": v for k, v in stats.items()}


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """[start, stop) index pairs of maximal True runs."""
    out = []
    i = 0
    n = len(mask)
    while i < n:
        if mask[i]:
            j = i
            while j < n and mask[j]:
                j += 1
            out.append((i, j))
            i = j
        else:
            i += 1
    return out


def apply_functionals(llds: LLDSeries, layout: FeatureLayout = EGEMAPS_LITE_88) -> np.ndarray:
    """Fill every slot of `layout` from the LLD tracks, in layout order.

    Deterministic: identical inputs give bit-identical output. On fully
    unvoiced input the voiced-only slots are 0 and a warning is emitted;
    callers in the pipeline also flag the vector (see FeatureVector).
    """
    voiced = llds.voiced_flag.astype(bool)
    unvoiced = ~voiced
    if not voiced.any():
        warnings.warn("no voiced frames: voiced-only functionals set to 0", stacklevel=2)

    values: dict[str, float] = {}
    dt = llds.hop_s

    # F0 contour in semitones, per voiced run
    f0_sem_runs = []
    for a, b in _runs(voiced):
        f0_sem_runs.append(12.0 * np.log2(llds.f0_hz[a:b] / SEMITONE_REF_HZ))
    f0_sem_all = np.concatenate(f0_sem_runs) if f0_sem_runs else np.zeros(0)
    values.update(_prefixed("f0_semitone", _stats6(f0_sem_all) | _slope_stats(f0_sem_runs, dt)))

    loud = llds.rms_db
    values.update(_prefixed("loudness_db", _stats6(loud) | _slope_stats([loud], dt)))
    values.update(_prefixed("loudness_db_v", _stats2(loud[voiced])))
    values.update(_prefixed("loudness_db_uv", _stats2(loud[unvoiced])))

    periods = llds.period_lengths_s
    amps = llds.period_peak_amps
    jitter = np.zeros(0)
    shimmer = np.zeros(0)
    if len(periods) >= 2:
        jitter = np.abs(np.diff(periods)) / np.mean(periods)
    if len(amps) >= 2 and np.mean(amps) > 0:
        shimmer = np.abs(np.diff(amps)) / np.mean(amps)
    values.update(_prefixed("jitter_local", _stats6(jitter)))
    values.update(_prefixed("shimmer_local", _stats6(shimmer)))

    values.update(_prefixed("hnr_db", _stats6(llds.hnr_db[voiced])))
    values.update(_prefixed("alpha_ratio_v", _stats6(llds.alpha_ratio[voiced])))
    values.update(_prefixed("slope_0_500_v", _stats6(llds.spectral_slope_0_500[voiced])))
    values.update(_prefixed("slope_500_1500_v", _stats6(llds.spectral_slope_500_1500[voiced])))
    values.update(_prefixed("alpha_ratio_uv", _stats2(llds.alpha_ratio[unvoiced])))
    values.update(_prefixed("slope_0_500_uv", _stats2(llds.spectral_slope_0_500[unvoiced])))
    values.update(_prefixed("slope_500_1500_uv", _stats2(llds.spectral_slope_500_1500[unvoiced])))

    for k in range(1, llds.mfcc.shape[1] + 1):
        values.update(_prefixed(f"mfcc{k}", _stats2(llds.mfcc[:, k - 1])))
        values.update(_prefixed(f"mfcc{k}_v", _stats2(llds.mfcc[voiced, k - 1])))

    v_runs = _runs(voiced)
    uv_runs = _runs(unvoiced)
    v_lens = np.asarray([(b - a) * dt for a, b in v_runs])
    uv_lens = np.asarray([(b - a) * dt for a, b in uv_runs])
    dur = max(llds.duration_s, 1e-9)
    peaks, _ = find_peaks(_smooth3(loud), prominence=LOUDNESS_PEAK_PROMINENCE_DB)
    values["voiced_segments_per_sec"] = len(v_runs) / dur
    values["voiced_segment_len_amean"] = float(v_lens.mean()) if len(v_lens) else 0.0
    values["voiced_segment_len_stddev"] = float(v_lens.std()) if len(v_lens) else 0.0
    values["unvoiced_segment_len_amean"] = float(uv_lens.mean()) if len(uv_lens) else 0.0
    values["unvoiced_segment_len_stddev"] = float(uv_lens.std()) if len(uv_lens) else 0.0
    values["loudness_peaks_per_sec"] = len(peaks) / dur

    out = np.empty(88, dtype=np.float64)
    for i, slot in enumerate(layout.slots):
        if slot not in values:
            raise UnfilledSlot(f"layout {layout.name!r} slot {slot!r} is not computable")
        out[i] = values[slot]
    return out
