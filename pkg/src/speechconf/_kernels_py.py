"""Pure-numpy implementations of the hot per-frame kernels.

Used when the compiled extension is unavailable (or forced via
SPEECHCONF_PURE_PYTHON=1). Must stay numerically interchangeable with
speechconf._kernels_cy; the parity test pins the two together.
"""

from __future__ import annotations

import numpy as np


def ncc_matrix(frames: np.ndarray, lag_min: int, lag_max: int) -> np.ndarray:
    """Normalized cross-correlation per frame and lag.

    frames: (n_frames, width) float64. Returns (n_frames, lag_max-lag_min+1)
    with entries sum(x[t]*x[t+lag]) / sqrt(sum(x[:w-lag]^2) * sum(x[lag:]^2)),
    zero where either energy underflows.
    """
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    n_frames, width = frames.shape
    n_lags = lag_max - lag_min + 1
    out = np.zeros((n_frames, n_lags), dtype=np.float64)
    sq = frames * frames
    # cumulative energies let every lag's head/tail energy come from one pass
    csum = np.concatenate([np.zeros((n_frames, 1)), np.cumsum(sq, axis=1)], axis=1)
    total = csum[:, -1]
    for j, lag in enumerate(range(lag_min, lag_max + 1)):
        if lag >= width:
            continue
        num = np.einsum("ij,ij->i", frames[:, : width - lag], frames[:, lag:])
        e_head = csum[:, width - lag]
        e_tail = total - csum[:, lag]
        denom = np.sqrt(e_head * e_tail)
        ok = denom > 1e-24
        out[ok, j] = num[ok] / denom[ok]
    return out


def spectral_gate_gains(mag: np.ndarray, floor: np.ndarray, threshold_lin: float,
                        atten: float, smooth_bands: int) -> np.ndarray:
    """Attenuation mask for stationary spectral gating.

    mag: (n_frames, n_bins) magnitudes; floor: per-bin noise floor.
    Bins below floor*threshold_lin get gain `atten`, others 1.0; the mask is
    then smoothed across neighbouring bands. Gains never exceed 1.
    """
    gate = floor[None, :] * threshold_lin
    gains = np.where(mag >= gate, 1.0, atten)
    if smooth_bands > 0:
        k = 2 * smooth_bands + 1
        kernel = np.ones(k) / k
        pad = np.pad(gains, ((0, 0), (smooth_bands, smooth_bands)), mode="edge")
        sm = np.empty_like(gains)
        for i in range(gains.shape[0]):
            sm[i] = np.convolve(pad[i], kernel, mode="valid")
        gains = np.minimum(sm, 1.0)
    return gains
