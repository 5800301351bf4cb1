# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-frame kernels. Mirrors speechconf._kernels_py exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def ncc_matrix(cnp.ndarray[cnp.float64_t, ndim=2] frames, int lag_min, int lag_max):
    cdef Py_ssize_t n_frames = frames.shape[0]
    cdef Py_ssize_t width = frames.shape[1]
    cdef Py_ssize_t n_lags = lag_max - lag_min + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_frames, n_lags))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] csum = np.zeros(width + 1)
    cdef Py_ssize_t i, j, t, lag
    cdef double num, e_head, e_tail, denom, v

    for i in range(n_frames):
        csum[0] = 0.0
        for t in range(width):
            v = frames[i, t]
            csum[t + 1] = csum[t] + v * v
        for j in range(n_lags):
            lag = lag_min + j
            if lag >= width:
                continue
            num = 0.0
            for t in range(width - lag):
                num += frames[i, t] * frames[i, t + lag]
            e_head = csum[width - lag]
            e_tail = csum[width] - csum[lag]
            denom = sqrt(e_head * e_tail)
            if denom > 1e-24:
                out[i, j] = num / denom
    return out


def spectral_gate_gains(cnp.ndarray[cnp.float64_t, ndim=2] mag,
                        cnp.ndarray[cnp.float64_t, ndim=1] floor,
                        double threshold_lin, double atten, int smooth_bands):
    cdef Py_ssize_t n_frames = mag.shape[0]
    cdef Py_ssize_t n_bins = mag.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gains = np.empty((n_frames, n_bins))
    cdef Py_ssize_t i, b, k
    cdef Py_ssize_t lo, hi
    cdef double acc, width
    cdef cnp.ndarray[cnp.float64_t, ndim=1] row

    for i in range(n_frames):
        for b in range(n_bins):
            gains[i, b] = 1.0 if mag[i, b] >= floor[b] * threshold_lin else atten

    if smooth_bands > 0:
        width = 2 * smooth_bands + 1
        row = np.empty(n_bins)
        for i in range(n_frames):
            for b in range(n_bins):
                acc = 0.0
                for k in range(b - smooth_bands, b + smooth_bands + 1):
                    if k < 0:
                        acc += gains[i, 0]
                    elif k >= n_bins:
                        acc += gains[i, n_bins - 1]
                    else:
                        acc += gains[i, k]
                acc /= width
                row[b] = acc if acc < 1.0 else 1.0
            for b in range(n_bins):
                gains[i, b] = row[b]
    return gains
