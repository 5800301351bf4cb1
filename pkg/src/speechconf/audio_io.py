"""Audio ingestion: WAV loading, canonical 16 kHz mono form, spectral-gate denoise."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from speechconf import dsp, kernels
from speechconf.errors import (
    ClipTooShort,
    CorruptHeader,
    EmptyClip,
    NonCanonicalRate,
    UnsupportedEncoding,
)

CANONICAL_RATE = 16000
TARGET_PEAK = 0.95

# accepted clip length range in seconds; outside it we warn, never reject
EXPECTED_DURATION = (5.0, 12.0)


@dataclass
class AudioClip:
    id: str
    samples: np.ndarray  # float64, mono, amplitudes in [-1, 1]
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    @property
    def is_canonical(self) -> bool:
        return self.sample_rate == CANONICAL_RATE


@dataclass
class DenoiseConfig:
    noise_floor_percentile: float = 0.1
    gate_threshold_db: float = 6.0
    fft_size: int = 1024
    smoothing_bands: int = 2
    atten_db: float = field(default=40.0)  # attenuation applied to gated bins

    def __post_init__(self):
        if not 0.0 <= self.noise_floor_percentile < 1.0:
            raise ValueError("noise_floor_percentile must be in [0, 1)")
        if self.gate_threshold_db < 0:
            raise ValueError("gate_threshold_db must be >= 0")
        if self.fft_size < 2 or self.fft_size & (self.fft_size - 1):
            raise ValueError("fft_size must be a power of two")
        if self.smoothing_bands < 0:
            raise ValueError("smoothing_bands must be >= 0")


def _decode_pcm(raw: bytes, fmt_code: int, bits: int, n_channels: int) -> np.ndarray:
    if fmt_code == 3:  # IEEE float
        if bits == 32:
            x = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        elif bits == 64:
            x = np.frombuffer(raw, dtype="<f8").astype(np.float64)
        else:
            raise UnsupportedEncoding(f"{bits}-bit float WAV not supported")
    elif fmt_code == 1:
        if bits == 8:  # stored unsigned
            x = (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
        elif bits == 16:
            x = np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
        elif bits == 24:
            b = np.frombuffer(raw, dtype=np.uint8)
            b = b[: (len(b) // 3) * 3].reshape(-1, 3).astype(np.int64)
            v = b[:, 0] | (b[:, 1] << 8) | (b[:, 2] << 16)
            v = np.where(v >= 1 << 23, v - (1 << 24), v)
            x = v.astype(np.float64) / float(1 << 23)
        elif bits == 32:
            x = np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)
        else:
            raise UnsupportedEncoding(f"{bits}-bit integer PCM not supported")
    else:
        raise UnsupportedEncoding(f"WAV format code {fmt_code} is not PCM")
    if n_channels == 2:
        x = x[: (len(x) // 2) * 2].reshape(-1, 2).mean(axis=1)
    return x


def load_clip(path: str | Path) -> AudioClip:
    """Read a RIFF/WAVE PCM file into an AudioClip (stereo averaged to mono)."""
    path = Path(path)
    data = path.read_bytes()  # raises FileNotFoundError
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptHeader(f"{path}: not a RIFF/WAVE file")

    fmt = None
    pcm = None
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise CorruptHeader(f"{path}: truncated fmt chunk")
            fmt = struct.unpack_from("<HHIIHH", body, 0)
        elif cid == b"data":
            pcm = body
        pos += 8 + size + (size & 1)  # chunks are word-aligned
    if fmt is None or pcm is None:
        raise CorruptHeader(f"{path}: missing fmt or data chunk")

    fmt_code, n_channels, rate, _, _, bits = fmt
    if fmt_code == 0xFFFE:  # WAVE_FORMAT_EXTENSIBLE wraps the real code
        raise UnsupportedEncoding(f"{path}: extensible WAV not supported")
    if n_channels not in (1, 2):
        raise UnsupportedEncoding(f"{path}: {n_channels} channels (need mono or stereo)")
    samples = _decode_pcm(pcm, fmt_code, bits, n_channels)
    return AudioClip(id=path.stem, samples=samples, sample_rate=int(rate))


def save_clip(clip: AudioClip, path: str | Path) -> None:
    """Write 16-bit PCM mono WAV."""
    x = np.clip(clip.samples, -1.0, 1.0)
    pcm = np.round(x * 32767.0).astype("<i2").tobytes()
    hdr = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, 1, 1, clip.sample_rate, clip.sample_rate * 2, 2, 16,
        b"data", len(pcm),
    )
    Path(path).write_bytes(hdr + pcm)


def preprocess(clip: AudioClip, target_rate: int = CANONICAL_RATE) -> AudioClip:
    """Resample to the target rate (windowed-sinc, Kaiser 64 taps) and
    peak-normalize to 0.95. All-zero clips pass through unscaled.

    Idempotent: a clip already at the target rate and peak is returned
    sample-exact.
    """
    if len(clip.samples) == 0:
        raise EmptyClip(f"clip {clip.id} has no samples")
    x = clip.samples
    if clip.sample_rate != target_rate:
        x = dsp.resample_sinc(x, clip.sample_rate, target_rate, num_taps=64)
    peak = float(np.max(np.abs(x))) if len(x) else 0.0
    if peak > 0.0 and abs(peak - TARGET_PEAK) > 1e-12:
        x = x * (TARGET_PEAK / peak)
    out = AudioClip(id=clip.id, samples=x, sample_rate=target_rate)
    lo, hi = EXPECTED_DURATION
    if not lo <= out.duration <= hi:
        warnings.warn(
            f"clip {clip.id}: duration {out.duration:.2f}s outside [{lo}, {hi}]s",
            stacklevel=2,
        )
    return out


def denoise(clip: AudioClip, cfg: DenoiseConfig | None = None) -> AudioClip:
    """Stationary spectral gating.

    Noise floor per STFT band is the noise_floor_percentile magnitude over
    time; bins below floor + gate_threshold_db are attenuated by atten_db,
    with the gain mask smoothed across smoothing_bands neighbours. Gains
    never exceed 1, so no band gains energy.
    """
    cfg = cfg or DenoiseConfig()
    if not clip.is_canonical:
        raise NonCanonicalRate(f"denoise needs {CANONICAL_RATE} Hz, got {clip.sample_rate}")
    if len(clip.samples) <= cfg.fft_size:
        raise ClipTooShort(
            f"clip {clip.id}: {len(clip.samples)} samples <= fft_size {cfg.fft_size}"
        )
    hop = cfg.fft_size // 4
    spec, _ = dsp.stft(clip.samples, cfg.fft_size, hop)
    mag = np.abs(spec)
    floor = np.percentile(mag, cfg.noise_floor_percentile * 100.0, axis=0)
    gains = kernels.spectral_gate_gains(
        mag,
        floor,
        10.0 ** (cfg.gate_threshold_db / 20.0),
        10.0 ** (-cfg.atten_db / 20.0),
        cfg.smoothing_bands,
    )
    y = dsp.istft(spec * gains, cfg.fft_size, hop, len(clip.samples))
    return AudioClip(id=clip.id, samples=np.clip(y, -1.0, 1.0), sample_rate=clip.sample_rate)
