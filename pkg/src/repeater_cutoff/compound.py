"""Compound-geometric aggregation of attempt kernels.

For failure kernel ``pf`` and any kernel ``x`` this computes

    S[x](t) = sum_{k>=1} [(pf * ... * pf) (k-1 times) * x](t)

on the window t = 0..ttr, either by iterated convolution or as the
geometric series ``F^-1[F[x] / (1 - F[pf])]`` on a zero-padded array.
"""

import math

import numpy as np
import scipy.fft

from .distcore import clamp_negative, convolve_linear, fft_length
from .errors import NumericalSingularityError
from .protocol import Backend
from .states import LinkState

__all__ = [
    "TAIL_TOL",
    "compound_direct",
    "compound_fourier",
    "compound_swap",
    "fft_noise_floor",
    "geometric_sums",
    "geometric_sums_direct",
    "geometric_sums_fourier",
]

#: Iterated convolution stops once the running term carries less mass.
TAIL_TOL = 1e-15

SINGULAR_TOL = 1e-14


def geometric_sums_direct(pf, xs, tail_tol=TAIL_TOL):
    """Iterated-convolution evaluation of ``S[x]`` for each ``x`` in ``xs``.

    Every attempt lasts at least one step (``pf[0] == 0``), so at most
    ``ttr`` terms reach the window.
    """
    pf = np.asarray(pf, dtype=np.float64)
    n = pf.size
    terms = [np.array(x, dtype=np.float64) for x in xs]
    totals = [t.copy() for t in terms]
    if not pf.any():
        return totals
    for _ in range(n):
        terms = [convolve_linear(t, pf) for t in terms]
        mass = max(float(np.abs(t).sum()) for t in terms)
        if mass == 0.0:
            break
        for total, t in zip(totals, terms):
            total += t
        if mass < tail_tol:
            break
    return totals


def _geometric_fourier(pf, xs, padding_factor):
    """``(sums, transform length, min |1 - F[pf]|)``; see geometric_sums_fourier."""
    pf = np.asarray(pf, dtype=np.float64)
    n = pf.size
    size = fft_length(padding_factor * n)
    denom = 1.0 - scipy.fft.rfft(pf, size)
    smallest = float(np.abs(denom).min())
    if smallest < SINGULAR_TOL:
        raise NumericalSingularityError(
            f"|1 - F[pf]| = {smallest:.2e}: the failure kernel carries all the mass, "
            "success is impossible")
    out = []
    for x in xs:
        x = np.asarray(x, dtype=np.float64)
        res = scipy.fft.irfft(scipy.fft.rfft(x, size) / denom, size)[:n]
        if x.min() >= 0.0:
            clamp_negative(res, scale=float(np.abs(x).sum()) / smallest, what="compound sum")
        out.append(res)
    return out, size, smallest


def geometric_sums_fourier(pf, xs, padding_factor=3):
    """Fourier-space evaluation of ``S[x]`` on arrays zero-padded to ``C * len``.

    Mass that the untruncated series would place beyond the padded length
    wraps around (circular convolution); the error is exponentially small
    in ``padding_factor``.
    """
    return _geometric_fourier(pf, xs, padding_factor)[0]


def geometric_sums(pf, xs, backend, padding_factor=3):
    if Backend(backend) is Backend.DIRECT:
        return geometric_sums_direct(pf, xs)
    return geometric_sums_fourier(pf, xs, padding_factor)


def fft_noise_floor(size, scale):
    """Magnitude below which a value from a length-``size`` transform is round-off."""
    return 8.0 * np.finfo(np.float64).eps * math.log2(max(size, 2)) * scale


def _link_state(pmf, num, floor=0.0):
    pmf[0] = 0.0
    num[0] = 0.0
    if floor > 0.0:
        # unresolvable entries would get a meaningless noise/noise Werner ratio
        noise = pmf <= floor
        pmf[noise] = 0.0
        num[noise] = 0.0
    return LinkState.from_numerator(pmf, num)


def compound_direct(kernels):
    """Output link of a unit by iterated convolution of its attempt kernels."""
    pmf, num = geometric_sums_direct(kernels.pf, [kernels.ps, kernels.ws_num])
    return _link_state(pmf, num)


def compound_fourier(kernels, padding_factor=3):
    """Output link of a unit via the Fourier-space geometric series."""
    (pmf, num), size, smallest = _geometric_fourier(
        kernels.pf, [kernels.ps, kernels.ws_num], padding_factor)
    floor = fft_noise_floor(size, float(np.abs(kernels.ps).sum()) / smallest)
    return _link_state(pmf, num, floor)


def compound_swap(m, mw, p_swap, backend, padding_factor=3):
    """Swap without cut-off: the constant ``p_swap`` factors out of the series.

    ``m`` is Pr(max(TA, TB) = t) and ``mw`` the same sum weighted by the
    output Werner parameter ``w'_A * w'_B``. Computes
    ``sum_k p (1-p)^(k-1) m^{*(k-1)} * [m, mw]``.
    """
    m = np.asarray(m, dtype=np.float64)
    mw = np.asarray(mw, dtype=np.float64)
    q = 1.0 - p_swap
    if Backend(backend) is Backend.DIRECT:
        pmf = p_swap * m
        num = p_swap * mw
        terms = [m, mw]
        coeff = p_swap
        for _ in range(m.size):
            if q == 0.0:
                break
            terms = [convolve_linear(t, m) for t in terms]
            coeff *= q
            step = coeff * terms[0]
            pmf += step
            num += coeff * terms[1]
            mass = float(step.sum())
            if mass < TAIL_TOL:
                break
        return _link_state(pmf, num)
    size = fft_length(padding_factor * m.size)
    fm = scipy.fft.rfft(m, size)
    denom = 1.0 - q * fm
    smallest = float(np.abs(denom).min())
    if smallest < SINGULAR_TOL:
        raise NumericalSingularityError(f"|1 - (1-p) F[m]| = {smallest:.2e}")
    pmf = scipy.fft.irfft(p_swap * fm / denom, size)[:m.size]
    num = scipy.fft.irfft(p_swap * scipy.fft.rfft(mw, size) / denom, size)[:m.size]
    clamp_negative(pmf, scale=1.0 / smallest, what="swap pmf")
    clamp_negative(num, scale=1.0 / smallest, what="swap werner numerator")
    return _link_state(pmf, num, fft_noise_floor(size, float(m.sum()) / smallest))
