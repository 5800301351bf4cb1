"""Shared DSP primitives: framing, STFT, mel filterbank, windowed-sinc filters."""

from __future__ import annotations

import numpy as np


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    """Slice a 1-D signal into (n_frames, frame_len) without copying the tail.

    Frames start at multiples of `hop`; the last partial frame is dropped.
    """
    x = np.asarray(x, dtype=np.float64)
    if len(x) < frame_len:
        return np.empty((0, frame_len), dtype=np.float64)
    n_frames = 1 + (len(x) - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n_frames)[:, None]
    return x[idx]


def hann(n: int) -> np.ndarray:
    # periodic Hann so 75%-overlap STFT satisfies COLA
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def stft(x: np.ndarray, fft_size: int, hop: int) -> tuple[np.ndarray, int]:
    """Hann STFT with reflection-free zero padding.

    Returns (spectrogram of shape (n_frames, fft_size//2+1), padded_length).
    The padding makes overlap-add reconstruction exact for the original span.
    """
    x = np.asarray(x, dtype=np.float64)
    pad = fft_size  # half-window lead-in/out keeps COLA weight constant inside
    xp = np.concatenate([np.zeros(pad), x, np.zeros(pad + fft_size)])
    frames = frame_signal(xp, fft_size, hop)
    win = hann(fft_size)
    return np.fft.rfft(frames * win, axis=1), len(xp)


def istft(spec: np.ndarray, fft_size: int, hop: int, out_len: int) -> np.ndarray:
    """Inverse of `stft` for the same fft_size/hop; returns out_len samples."""
    frames = np.fft.irfft(spec, n=fft_size, axis=1)
    win = hann(fft_size)
    n_frames = frames.shape[0]
    total = fft_size + hop * (n_frames - 1)
    y = np.zeros(total)
    wsum = np.zeros(total)
    for i in range(n_frames):
        start = i * hop
        y[start:start + fft_size] += frames[i] * win
        wsum[start:start + fft_size] += win * win
    valid = wsum > 1e-12
    y[valid] /= wsum[valid]
    pad = fft_size
    return y[pad:pad + out_len]


def mel_filterbank(n_bands: int, fft_size: int, sample_rate: int,
                   fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular mel filterbank, HTK mel scale, shape (n_bands, fft_size//2+1)."""
    if fmax is None:
        fmax = sample_rate / 2.0

    def to_mel(f):
        return 2595.0 * np.log10(1.0 + np.asarray(f) / 700.0)

    def from_mel(m):
        return 700.0 * (10.0 ** (np.asarray(m) / 2595.0) - 1.0)

    mel_pts = np.linspace(to_mel(fmin), to_mel(fmax), n_bands + 2)
    hz_pts = from_mel(mel_pts)
    bins = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate)
    fb = np.zeros((n_bands, len(bins)))
    for b in range(n_bands):
        lo, mid, hi = hz_pts[b], hz_pts[b + 1], hz_pts[b + 2]
        up = (bins - lo) / max(mid - lo, 1e-12)
        down = (hi - bins) / max(hi - mid, 1e-12)
        fb[b] = np.clip(np.minimum(up, down), 0.0, None)
    return fb


def dct_ii_ortho(x: np.ndarray, n_out: int) -> np.ndarray:
    """Orthonormal DCT-II along the last axis, keeping the first n_out coeffs."""
    n = x.shape[-1]
    k = np.arange(n_out)[:, None]
    t = (np.arange(n)[None, :] + 0.5) * np.pi / n
    basis = np.cos(k * t) * np.sqrt(2.0 / n)
    basis[0] /= np.sqrt(2.0)
    return x @ basis.T


def kaiser_sinc_kernel(num_taps: int, cutoff: float, beta: float = 8.0) -> np.ndarray:
    """Symmetric low-pass FIR: sinc truncated by a Kaiser window.

    `cutoff` is normalized to Nyquist (1.0 = Nyquist). Odd tap counts give
    exact zero phase when applied with mode='same'.
    """
    m = np.arange(num_taps) - (num_taps - 1) / 2.0
    h = cutoff * np.sinc(cutoff * m)
    h *= np.kaiser(num_taps, beta)
    return h / h.sum()


def resample_sinc(x: np.ndarray, src_rate: int, dst_rate: int,
                  num_taps: int = 64, beta: float = 8.0) -> np.ndarray:
    """Windowed-sinc (Kaiser) resampling to an arbitrary rate.

    Evaluates the band-limited interpolant at each output instant using
    num_taps neighbouring input samples. Cutoff sits at the smaller of the
    two Nyquist frequencies.
    """
    x = np.asarray(x, dtype=np.float64)
    if src_rate == dst_rate:
        return x.copy()
    n_out = int(round(len(x) * dst_rate / src_rate))
    if n_out == 0 or len(x) == 0:
        return np.zeros(0, dtype=np.float64)
    ratio = src_rate / dst_rate
    cutoff = min(1.0, 1.0 / ratio)  # relative to source Nyquist
    half = num_taps // 2
    win = np.kaiser(num_taps, beta)
    out = np.empty(n_out, dtype=np.float64)
    # block over output samples to bound the (block, num_taps) gather
    block = 8192
    offsets = np.arange(num_taps) - half + 1
    for start in range(0, n_out, block):
        stop = min(start + block, n_out)
        t = np.arange(start, stop) * ratio
        base = np.floor(t).astype(np.int64)
        frac = t - base
        idx = base[:, None] + offsets[None, :]
        taps = (offsets[None, :] - frac[:, None])  # sample positions rel. to t
        w = cutoff * np.sinc(cutoff * taps) * win[None, :]
        w /= w.sum(axis=1, keepdims=True)
        idx = np.clip(idx, 0, len(x) - 1)
        out[start:stop] = np.sum(x[idx] * w, axis=1)
    return out
