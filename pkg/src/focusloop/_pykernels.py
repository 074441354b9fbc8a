"""Pure-numpy implementations of the per-window hot kernels.

This is the import-time fallback when the compiled extension is missing;
``focusloop.kernels`` picks between the two. Both backends implement the
same math and agree to ~1e-12 relative, so every caller is backend-blind.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def fir_filter(x, taps):
    """Same-length linear convolution with reflect padding.

    ``taps`` must have odd length; the (len-1)/2-sample group delay is
    absorbed by taking the centred slice, so output sample i stays aligned
    with input sample i (timestamps need no shift).
    """
    x = np.asarray(x, dtype=np.float64)
    taps = np.asarray(taps, dtype=np.float64)
    if len(taps) % 2 != 1:
        raise ValueError("taps length must be odd")
    m = (len(taps) - 1) // 2
    padded = np.pad(x, m, mode="reflect")
    return np.convolve(padded, taps, mode="valid")


def welch_bin_powers(x, window, hop, kmin, kmax):
    """Averaged one-sided periodogram power for DFT bins kmin..kmax.

    Segments of len(window) samples every ``hop``, constant-detrended and
    windowed. Normalisation is chosen so that summing bins 1..nseg/2 gives
    the signal variance when all power sits below Nyquist (Parseval); a
    band power is then just the sum of its bins.
    """
    x = np.asarray(x, dtype=np.float64)
    window = np.asarray(window, dtype=np.float64)
    nseg = len(window)
    if len(x) < nseg:
        raise ValueError("input shorter than one segment")
    nbins = nseg // 2 + 1
    if not (0 <= kmin <= kmax < nbins):
        raise ValueError("bin range out of bounds")
    starts = np.arange(0, len(x) - nseg + 1, hop)
    segs = np.stack([x[s : s + nseg] for s in starts])
    segs = segs - segs.mean(axis=1, keepdims=True)
    spec = np.fft.rfft(segs * window, axis=1)
    power = np.abs(spec) ** 2
    scale = np.full(nbins, 2.0)
    scale[0] = 1.0
    if nseg % 2 == 0:
        scale[-1] = 1.0
    u = float(np.dot(window, window))
    psd = (power * scale).mean(axis=0) / (nseg * u)
    return psd[kmin : kmax + 1].copy()


def mlp_forward(x, mean, std, w1, b1, w2, b2):
    """z-score (clamped to +-5 sigma), ReLU hidden layer, softmax output."""
    z = np.clip((np.asarray(x, dtype=np.float64) - mean) / std, -5.0, 5.0)
    h = np.maximum(z @ w1 + b1, 0.0)
    logits = h @ w2 + b2
    logits = logits - logits.max()
    e = np.exp(logits)
    return e / e.sum()
