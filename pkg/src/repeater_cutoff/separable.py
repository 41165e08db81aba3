"""O(ttr) attempt kernels for units whose p and p*w_out separate in tA and tB.

Splitting the pairs with ``max(tA, tB) = t`` into ``tA = t >= tB`` and
``tB = t > tA``, every kernel entry becomes ``pA(t) * f(t) * G(t)`` plus the
mirrored term, where ``G`` is a (possibly decayed, possibly windowed) prefix
sum over the waiting link. Time cut-offs only restrict the prefix window;
fidelity cut-offs do not, and are rejected.
"""

import math

import numpy as np

from .distcore import clamp_negative, decayed_window_sums, window_sums
from .errors import UnsupportedCombinationError
from .kernels import _check_pair
from .protocol import Kind, Strategy
from .states import SelectionKernels

__all__ = ["attempt_kernels_separable", "selection_kernels_separable"]


def _tail_above(p, out_mass):
    """``Pr(T > t)`` for every t, using the known mass beyond the window."""
    rev = np.cumsum(p[::-1])[::-1]
    above = np.empty_like(p)
    above[:-1] = rev[1:]
    above[-1] = 0.0
    return above + out_mass


def selection_kernels_separable(A, B, unit, spec, hardware):
    _check_pair(A, B)
    if spec is not None and spec.strategy is Strategy.FIDELITY:
        raise UnsupportedCombinationError(
            "fidelity cut-offs depend on Werner parameters, not on times; "
            "use the direct or fourier backend")
    n = A.pmf.size - 1
    pA, wA, pB, wB = A.pmf, A.werner, B.pmf, B.werner
    ratio = 1.0 if hardware.t_coh == math.inf else math.exp(-1.0 / hardware.t_coh)

    width = None
    if spec is not None and spec.strategy is Strategy.DIF_TIME and spec.tau < n:
        width = int(spec.tau)

    puA, pvB = pA * wA, pB * wB
    # region tA = t >= tB: sums over the waiting link B, tB in [t - tau, t]
    SB0 = window_sums(pB, width)
    SBv = decayed_window_sums(pvB, ratio, width)
    # region tB = t > tA: sums over A, tA in [t - tau, t - 1]
    SA0 = window_sums(pA, width) - pA
    SAu = decayed_window_sums(puA, ratio, width) - puA

    m_pass = pA * SB0 + pB * SA0
    mw_pass = puA * SBv + pvB * SAu
    if unit is Kind.SWAP:
        p = hardware.p_swap
        pss = p * m_pass
        psf = (1.0 - p) * m_pass
        wnum = p * mw_pass
    else:
        pss = 0.5 * (m_pass + mw_pass)
        psf = 0.5 * (m_pass - mw_pass)
        wnum = (pA * (wA * SB0 + SBv + 4.0 * wA * SBv)
                + pB * (SAu + wB * SA0 + 4.0 * wB * SAu)) / 6.0

    fail = np.zeros(n + 1)
    tail_mass = 0.0
    if spec is not None:
        tau = spec.tau
        out_A = max(0.0, 1.0 - pA.sum())
        out_B = max(0.0, 1.0 - pB.sum())
        if spec.strategy is Strategy.MAX_TIME and tau < n:
            keep = np.arange(n + 1) <= tau
            pss, psf, wnum = pss * keep, psf * keep, wnum * keep
        if spec.strategy is Strategy.MAX_TIME and tau <= n:
            tau = int(tau)
            cdf_A, cdf_B = pA[:tau + 1].sum(), pB[:tau + 1].sum()
            fail[tau] = 1.0 - cdf_A * cdf_B
            tail_mass = 1.0 - (1.0 - out_A) * (1.0 - out_B)
        elif spec.strategy is Strategy.DIF_TIME and tau < n:
            tau = int(tau)
            # pair with min time s fails at s + tau when the partner comes after that
            above_A = _tail_above(pA, out_A)
            above_B = _tail_above(pB, out_B)
            s = np.arange(1, n + 1 - tau)
            fail[s + tau] = pA[s] * above_B[s + tau] + pB[s] * above_A[s + tau]
            tail_mass = float((pA[s] * out_B + pB[s] * out_A).sum())

    for arr, what in ((pss, "P_ss"), (psf, "P_sf"), (wnum, "W_suc numerator"), (fail, "P_f'")):
        clamp_negative(arr, what=what)
    return SelectionKernels(pss, psf, fail, wnum, tail_mass=tail_mass)


def attempt_kernels_separable(A, B, unit, spec, hardware, padding_factor=3):
    """Per-attempt kernels in O(ttr) (plus the Fourier cut-off loop if ``spec``)."""
    from .kernels import attempt_from_selection
    from .protocol import Backend

    sel = selection_kernels_separable(A, B, unit, spec, hardware)
    if spec is None:
        return sel.as_attempt()
    return attempt_from_selection(sel, Backend.FAST, padding_factor)
