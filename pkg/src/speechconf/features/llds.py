"""Per-frame low-level descriptors: F0, energy, harmonicity, spectra, periods.

The pitch tracker is deliberately simple: normalized autocorrelation peak
search inside the configured F0 range, with a clarity threshold for the
voicing decision. Per-period tracks (for jitter/shimmer) come from
fundamental-band zero crossings guided by the frame-level F0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from speechconf import dsp, kernels
from speechconf.audio_io import CANONICAL_RATE, AudioClip
from speechconf.errors import ClipTooShort, NonCanonicalRate

LOG_EPS = 1e-10

# local maxima within this fraction of the global NCC peak compete as period
# candidates; the shortest wins, which suppresses sub-harmonic (octave-down)
# picks on strongly periodic frames
PEAK_CANDIDATE_RATIO = 0.97


@dataclass
class FrameConfig:
    frame_len_ms: float = 25.0
    hop_ms: float = 10.0
    f0_min: float = 55.0
    f0_max: float = 1000.0
    mel_bands: int = 26
    mfcc_count: int = 4
    clarity_threshold: float = 0.45

    def __post_init__(self):
        if not self.frame_len_ms > self.hop_ms > 0:
            raise ValueError("need frame_len_ms > hop_ms > 0")
        if not 0 < self.f0_min < self.f0_max < CANONICAL_RATE / 2:
            raise ValueError("need 0 < f0_min < f0_max < Nyquist")

    def frame_len(self, rate: int) -> int:
        return int(round(self.frame_len_ms * rate / 1000.0))

    def hop(self, rate: int) -> int:
        return int(round(self.hop_ms * rate / 1000.0))


@dataclass
class LLDSeries:
    """Frame-synchronous tracks plus per-period tracks for jitter/shimmer."""

    f0_hz: np.ndarray           # 0 where unvoiced
    voiced_flag: np.ndarray     # bool
    rms_db: np.ndarray
    hnr_db: np.ndarray          # meaningful on voiced frames only
    spectral_slope_0_500: np.ndarray
    spectral_slope_500_1500: np.ndarray
    alpha_ratio: np.ndarray
    mfcc: np.ndarray            # (n_frames, mfcc_count), coefficients 1..k
    period_lengths_s: np.ndarray
    period_peak_amps: np.ndarray
    hop_s: float
    duration_s: float

    @property
    def n_frames(self) -> int:
        return len(self.f0_hz)


def _fft_size_for(frame_len: int) -> int:
    n = 1
    while n < frame_len:
        n *= 2
    return n


def _band_energy(power: np.ndarray, freqs: np.ndarray, lo: float, hi: float) -> np.ndarray:
    sel = (freqs >= lo) & (freqs < hi)
    return power[:, sel].sum(axis=1)


def _band_slope(log_mag: np.ndarray, freqs: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Least-squares slope of the dB spectrum against frequency, per frame."""
    sel = (freqs >= lo) & (freqs < hi)
    f = freqs[sel]
    y = log_mag[:, sel]
    fc = f - f.mean()
    denom = float(np.sum(fc * fc))
    return (y @ fc) / denom


def _parabolic_refine(values: np.ndarray, i: int) -> tuple[float, float]:
    """Refine a discrete peak at index i; returns (offset in [-0.5, 0.5], height)."""
    if i <= 0 or i >= len(values) - 1:
        return 0.0, float(values[i])
    a, b, c = float(values[i - 1]), float(values[i]), float(values[i + 1])
    denom = a - 2.0 * b + c
    if abs(denom) < 1e-18:
        return 0.0, b
    off = 0.5 * (a - c) / denom
    off = float(np.clip(off, -0.5, 0.5))
    return off, b - 0.25 * (a - c) * off


def _pick_period(ncc_row: np.ndarray, lag_min: int) -> tuple[float, float]:
    """Choose the period lag from one frame's NCC curve.

    Takes the shortest local maximum within PEAK_CANDIDATE_RATIO of the
    global peak, parabolic-refined. Returns (fractional lag, clarity).
    """
    n = len(ncc_row)
    best = float(ncc_row.max())
    if best <= 0.0:
        return 0.0, 0.0
    interior = np.arange(1, n - 1)
    is_max = (ncc_row[interior] >= ncc_row[interior - 1]) & (
        ncc_row[interior] >= ncc_row[interior + 1]
    )
    cands = interior[is_max & (ncc_row[interior] >= PEAK_CANDIDATE_RATIO * best)]
    i = int(cands[0]) if len(cands) else int(np.argmax(ncc_row))
    off, height = _parabolic_refine(ncc_row, i)
    return lag_min + i + off, min(height, 1.0)


def compute_llds(clip: AudioClip, cfg: FrameConfig | None = None) -> LLDSeries:
    """Extract all frame-level and period-level descriptors for one clip."""
    cfg = cfg or FrameConfig()
    if clip.sample_rate != CANONICAL_RATE:
        raise NonCanonicalRate(f"expected {CANONICAL_RATE} Hz, got {clip.sample_rate}")
    rate = clip.sample_rate
    frame_len, hop = cfg.frame_len(rate), cfg.hop(rate)
    if len(clip.samples) < frame_len + 2 * hop:
        raise ClipTooShort(f"clip {clip.id}: need at least 3 frames")

    frames = dsp.frame_signal(clip.samples, frame_len, hop)
    n_frames = frames.shape[0]

    rms = np.sqrt(np.mean(frames * frames, axis=1))
    rms_db = 20.0 * np.log10(rms + LOG_EPS)

    # pitch & harmonicity from normalized autocorrelation
    lag_min = max(2, int(np.floor(rate / cfg.f0_max)))
    lag_max = min(frame_len - 2, int(np.ceil(rate / cfg.f0_min)))
    ncc = kernels.ncc_matrix(frames, lag_min, lag_max)

    f0 = np.zeros(n_frames)
    clarity = np.zeros(n_frames)
    energies = np.sum(frames * frames, axis=1)
    for i in range(n_frames):
        if energies[i] < 1e-14:
            continue
        lag, c = _pick_period(ncc[i], lag_min)
        if lag > 0:
            clarity[i] = c
            f0[i] = rate / lag
    voiced = clarity >= cfg.clarity_threshold
    f0 = np.where(voiced, np.clip(f0, cfg.f0_min, cfg.f0_max), 0.0)
    c_safe = np.clip(clarity, 1e-6, 1.0 - 1e-6)
    hnr_db = np.where(voiced, 10.0 * np.log10(c_safe / (1.0 - c_safe)), 0.0)

    # spectral tracks from one Hann FFT per frame
    nfft = _fft_size_for(frame_len)
    win = dsp.hann(frame_len)
    spec = np.fft.rfft(frames * win, n=nfft, axis=1)
    power = np.abs(spec) ** 2
    freqs = np.fft.rfftfreq(nfft, d=1.0 / rate)
    log_mag = 20.0 * np.log10(np.abs(spec) + LOG_EPS)

    e_low = _band_energy(power, freqs, 50.0, 1000.0)
    e_high = _band_energy(power, freqs, 1000.0, 5000.0)
    alpha_ratio = 10.0 * np.log10((e_low + LOG_EPS) / (e_high + LOG_EPS))
    slope_0_500 = _band_slope(log_mag, freqs, 0.0, 500.0)
    slope_500_1500 = _band_slope(log_mag, freqs, 500.0, 1500.0)

    fb = dsp.mel_filterbank(cfg.mel_bands, nfft, rate)
    mel_log = np.log(power @ fb.T + LOG_EPS)
    mfcc_all = dsp.dct_ii_ortho(mel_log, cfg.mfcc_count + 1)
    mfcc = mfcc_all[:, 1:]

    periods, peak_amps = _extract_periods(clip.samples, rate, f0, voiced, hop, cfg)

    return LLDSeries(
        f0_hz=f0,
        voiced_flag=voiced,
        rms_db=rms_db,
        hnr_db=hnr_db,
        spectral_slope_0_500=slope_0_500,
        spectral_slope_500_1500=slope_500_1500,
        alpha_ratio=alpha_ratio,
        mfcc=mfcc,
        period_lengths_s=periods,
        period_peak_amps=peak_amps,
        hop_s=hop / rate,
        duration_s=len(clip.samples) / rate,
    )


def _extract_periods(x: np.ndarray, rate: int, f0: np.ndarray, voiced: np.ndarray,
                     hop: int, cfg: FrameConfig) -> tuple[np.ndarray, np.ndarray]:
    """Pitch-period boundaries from zero crossings of the fundamental band.

    The signal is low-passed at 1.5x the median voiced F0 so each glottal
    cycle produces exactly one rising zero crossing. Crossings are kept only
    inside voiced regions and periods outside the configured F0 range are
    dropped as gross errors.
    """
    if not voiced.any():
        return np.zeros(0), np.zeros(0)
    med_f0 = float(np.median(f0[voiced]))
    cutoff = min(1.5 * med_f0, rate / 2.0 * 0.95)
    kern = dsp.kaiser_sinc_kernel(129, cutoff / (rate / 2.0))
    lp = np.convolve(x, kern, mode="same")

    rising = np.nonzero((lp[:-1] < 0.0) & (lp[1:] >= 0.0))[0]
    if len(rising) < 3:
        return np.zeros(0), np.zeros(0)
    frac = lp[rising] / (lp[rising] - lp[rising + 1])
    times = (rising + frac) / rate

    # a crossing counts only if its containing frame is voiced
    frame_idx = np.clip((rising // hop), 0, len(voiced) - 1)
    keep = voiced[frame_idx]
    times = times[keep]
    starts = rising[keep]
    if len(times) < 3:
        return np.zeros(0), np.zeros(0)

    periods = np.diff(times)
    t_lo, t_hi = 1.0 / cfg.f0_max, 1.0 / cfg.f0_min
    ok = (periods >= t_lo) & (periods <= t_hi)

    amps = np.zeros(len(periods))
    absx = np.abs(x)
    for k in np.nonzero(ok)[0]:
        a, b = starts[k], starts[k + 1]
        if b <= a + 1:
            ok[k] = False
            continue
        seg = absx[a:b]
        j = int(np.argmax(seg))
        off, h = _parabolic_refine(seg, j)
        amps[k] = max(h, float(seg[j]))
    return periods[ok], amps[ok]
