# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the per-window hot kernels (see _pykernels for the
reference semantics). Kept deliberately small: FIR filtering, Welch bin
powers and the MLP forward pass are the only loops hot enough to matter."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, exp

cnp.import_array()

BACKEND = "compiled"

# DFT twiddle tables keyed by segment length; built once, ~0.5 MB at 250.
_twiddles = {}


cdef inline Py_ssize_t _mirror(Py_ssize_t j, Py_ssize_t n) nogil:
    # reflect-without-edge-repeat, matching np.pad(mode="reflect")
    if j < 0:
        j = -j
    if j >= n:
        j = 2 * n - 2 - j
    return j


def fir_filter(x, taps):
    """Same-length convolution with reflect padding (see _pykernels)."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hv = np.ascontiguousarray(taps, dtype=np.float64)
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t k = hv.shape[0]
    if k % 2 != 1:
        raise ValueError("taps length must be odd")
    cdef Py_ssize_t m = (k - 1) // 2
    cdef cnp.ndarray[cnp.float64_t, ndim=1] pad = np.empty(n + 2 * m, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] rev = np.empty(k, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t i, j, k4
    cdef double a0, a1, a2, a3
    with nogil:
        for i in range(n + 2 * m):
            pad[i] = xv[_mirror(i - m, n)]
        for j in range(k):
            rev[j] = hv[k - 1 - j]
        # four partial sums keep the FMA pipeline busy; order is fixed and
        # deterministic, just not identical to a naive left-to-right sum
        k4 = k - (k % 4)
        for i in range(n):
            a0 = 0.0
            a1 = 0.0
            a2 = 0.0
            a3 = 0.0
            for j in range(0, k4, 4):
                a0 += rev[j] * pad[i + j]
                a1 += rev[j + 1] * pad[i + j + 1]
                a2 += rev[j + 2] * pad[i + j + 2]
                a3 += rev[j + 3] * pad[i + j + 3]
            for j in range(k4, k):
                a0 += rev[j] * pad[i + j]
            out[i] = (a0 + a1) + (a2 + a3)
    return out


def welch_bin_powers(x, window, hop, kmin, kmax):
    """Averaged one-sided periodogram power for bins kmin..kmax.

    Direct DFT over the requested bins with cached twiddle tables; the
    normalisation matches _pykernels.welch_bin_powers exactly.
    """
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wv = np.ascontiguousarray(window, dtype=np.float64)
    cdef Py_ssize_t nseg = wv.shape[0]
    cdef Py_ssize_t n = xv.shape[0]
    cdef Py_ssize_t nbins = nseg // 2 + 1
    cdef Py_ssize_t k0 = kmin, k1 = kmax, h = hop
    if n < nseg:
        raise ValueError("input shorter than one segment")
    if not (0 <= k0 <= k1 < nbins):
        raise ValueError("bin range out of bounds")

    tab = _twiddles.get(nseg)
    if tab is None:
        grid = 2.0 * np.pi * np.outer(np.arange(nbins), np.arange(nseg)) / nseg
        tab = (np.cos(grid), np.sin(grid))
        _twiddles[nseg] = tab
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ct = tab[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] st = tab[1]

    cdef cnp.ndarray[cnp.float64_t, ndim=1] acc = np.zeros(k1 - k0 + 1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] seg = np.empty(nseg, dtype=np.float64)
    cdef Py_ssize_t nsegs = 0, start = 0
    cdef Py_ssize_t i, k
    cdef double mean, re, im, u, scale

    u = 0.0
    for i in range(nseg):
        u += wv[i] * wv[i]

    with nogil:
        while start + nseg <= n:
            mean = 0.0
            for i in range(nseg):
                mean += xv[start + i]
            mean /= nseg
            for i in range(nseg):
                seg[i] = (xv[start + i] - mean) * wv[i]
            for k in range(k0, k1 + 1):
                re = 0.0
                im = 0.0
                for i in range(nseg):
                    re += seg[i] * ct[k, i]
                    im -= seg[i] * st[k, i]
                acc[k - k0] += re * re + im * im
            nsegs += 1
            start += h
    for k in range(k0, k1 + 1):
        scale = 1.0 if (k == 0 or (nseg % 2 == 0 and k == nbins - 1)) else 2.0
        acc[k - k0] *= scale / (nsegs * nseg * u)
    return acc


def mlp_forward(x, mean, std, w1, b1, w2, b2):
    """z-score (clamped to +-5 sigma), ReLU hidden layer, softmax output."""
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mv = np.ascontiguousarray(mean, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] sv = np.ascontiguousarray(std, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w1v = np.ascontiguousarray(w1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b1v = np.ascontiguousarray(b1, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] w2v = np.ascontiguousarray(w2, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] b2v = np.ascontiguousarray(b2, dtype=np.float64)
    cdef Py_ssize_t d = xv.shape[0]
    cdef Py_ssize_t nh = b1v.shape[0]
    cdef Py_ssize_t no = b2v.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] z = np.empty(d, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] hid = np.empty(nh, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(no, dtype=np.float64)
    cdef Py_ssize_t i, j
    cdef double acc, mx, s
    with nogil:
        for i in range(d):
            acc = (xv[i] - mv[i]) / sv[i]
            if acc > 5.0:
                acc = 5.0
            elif acc < -5.0:
                acc = -5.0
            z[i] = acc
        for j in range(nh):
            acc = b1v[j]
            for i in range(d):
                acc += z[i] * w1v[i, j]
            hid[j] = acc if acc > 0.0 else 0.0
        mx = -1e300
        for j in range(no):
            acc = b2v[j]
            for i in range(nh):
                acc += hid[i] * w2v[i, j]
            out[j] = acc
            if acc > mx:
                mx = acc
        s = 0.0
        for j in range(no):
            out[j] = exp(out[j] - mx)
            s += out[j]
        for j in range(no):
            out[j] /= s
    return out
