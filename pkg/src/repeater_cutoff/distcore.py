"""Numeric primitives for truncated discrete distributions.

All sequences are 1-D float64 numpy arrays indexed by time step. A truncated
PMF of horizon ``ttr`` has ``ttr + 1`` entries (t = 0..ttr).
"""

import numpy as np
import scipy.fft
from scipy.signal import lfilter

from .errors import EmptyInputError, LengthMismatchError, NumericalError

__all__ = [
    "FFT_THRESHOLD",
    "NEGATIVE_ATOL",
    "as_sequence",
    "clamp_negative",
    "convolve_circular",
    "convolve_linear",
    "decayed_window_sums",
    "dft",
    "fft_length",
    "prefix_sums",
    "window_sums",
]

#: Convolutions with at least this many output entries use the FFT route.
FFT_THRESHOLD = 64

#: Negative round-off below this magnitude is set to zero, larger is an error.
NEGATIVE_ATOL = 1e-15

#: Relative guard for large transforms: round-off scales with the magnitude
#: of the transformed data.
NEGATIVE_RTOL = 1e-13


def as_sequence(x, name="x"):
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"{name} contains NaN or Inf entries")
    return arr


def clamp_negative(x, scale=1.0, what="sequence"):
    """Zero out negative round-off in ``x`` (in place) and return it.

    Entries more negative than ``max(NEGATIVE_ATOL, NEGATIVE_RTOL * scale)``
    cannot be round-off and raise :class:`NumericalError`.
    """
    if x.size == 0:
        return x
    lowest = x.min()
    if lowest < 0.0:
        tol = max(NEGATIVE_ATOL, NEGATIVE_RTOL * scale)
        if lowest < -tol:
            raise NumericalError(
                f"{what} has a negative entry {lowest:.3e} beyond round-off ({tol:.1e})")
        np.maximum(x, 0.0, out=x)
    return x


def fft_length(n):
    """Smallest fast transform length >= n."""
    return scipy.fft.next_fast_len(int(n), real=True)


def convolve_linear(a, b):
    """Linear convolution of two equal-length sequences, truncated to that length.

    ``out[t] = sum_{t'=0..t} a[t - t'] * b[t']``. If both inputs are
    non-negative the output is clamped against negative FFT round-off.
    """
    a = as_sequence(a, "a")
    b = as_sequence(b, "b")
    if a.size != b.size:
        raise LengthMismatchError(f"length mismatch: {a.size} vs {b.size}")
    n = a.size
    if n == 0:
        return np.zeros(0)
    if n < FFT_THRESHOLD:
        return np.convolve(a, b)[:n]
    size = fft_length(2 * n - 1)
    out = scipy.fft.irfft(scipy.fft.rfft(a, size) * scipy.fft.rfft(b, size), size)[:n]
    if a.min() >= 0.0 and b.min() >= 0.0:
        clamp_negative(out, scale=a.max() * b.max() * n, what="convolution")
    return out


def convolve_circular(a, b, L):
    """Circular convolution of period ``L`` via forward transform, product, inverse."""
    if L == 0:
        raise EmptyInputError("circular convolution of period 0")
    a = as_sequence(a, "a")
    b = as_sequence(b, "b")
    if a.size != L or b.size != L:
        raise LengthMismatchError(f"expected length {L}, got {a.size} and {b.size}")
    return np.real(dft(dft(a) * dft(b), inverse=True))


def dft(x, inverse=False):
    """Discrete Fourier transform ``y_j = sum_k x_k exp(-2 pi i j k / L)``.

    ``inverse=True`` applies the exact inverse (with the 1/L factor).
    """
    x = np.asarray(x)
    if x.size == 0:
        raise EmptyInputError("dft of an empty sequence")
    return scipy.fft.ifft(x) if inverse else scipy.fft.fft(x)


def prefix_sums(weights, g):
    """``out[t] = sum_{s <= t} weights[s] * g[s]``."""
    weights = as_sequence(weights, "weights")
    g = as_sequence(g, "g")
    if weights.size != g.size:
        raise LengthMismatchError(f"length mismatch: {weights.size} vs {g.size}")
    return np.cumsum(weights * g)


def window_sums(x, width=None):
    """``out[t] = sum_{s = t - width .. t} x[s]`` (whole prefix if ``width`` is None)."""
    c = np.cumsum(x)
    if width is None or width >= x.size:
        return c
    out = c.copy()
    out[width + 1:] -= c[:-(width + 1)]
    return out


def decayed_window_sums(x, ratio, width=None):
    """``out[t] = sum_{s = t - width .. t} x[s] * ratio**(t - s)`` for ``0 <= ratio <= 1``.

    Evaluated with the stable recurrence ``h[t] = ratio * h[t-1] + x[t]``, so
    no intermediate grows beyond the plain prefix sum even when ``ratio**-t``
    would overflow.
    """
    if ratio == 1.0:
        return window_sums(x, width)
    h = lfilter([1.0], [1.0, -ratio], x)
    if width is None or width >= x.size:
        return h
    out = h.copy()
    out[width + 1:] -= ratio ** (width + 1) * h[:-(width + 1)]
    return out
