"""Attempt kernels of SWAP and DIST units by explicit double sums over input times.

This is the O(ttr^2) reference route (DIRECT and FOURIER backends). Every
pair ``(tA, tB)`` of input delivery times inside the window is visited once.
"""

import math

import numba as nb
import numpy as np

from .errors import LengthMismatchError
from .protocol import Kind, Strategy
from .states import AttemptKernels, SelectionKernels

__all__ = [
    "UNIT_DIST",
    "UNIT_SWAP",
    "cutoff_fail_tails",
    "decay_table",
    "dist_attempt_kernels",
    "selection_kernels_direct",
    "swap_attempt_kernels",
    "strategy_code",
]

UNIT_SWAP = 0
UNIT_DIST = 1

_NO_CUT, _DIF, _MAX, _FID = 0, 1, 2, 3


def strategy_code(spec):
    if spec is None:
        return _NO_CUT
    return {Strategy.DIF_TIME: _DIF, Strategy.MAX_TIME: _MAX, Strategy.FIDELITY: _FID}[spec.strategy]


def decay_table(n, t_coh):
    """``exp(-d / t_coh)`` for d = 0..n."""
    if t_coh == math.inf:
        return np.ones(n + 1)
    return np.exp(-np.arange(n + 1) / t_coh)


def _int_tau(spec, n):
    if spec is None or spec.strategy is Strategy.FIDELITY:
        return n + 1
    return int(min(spec.tau, n + 1))


@nb.njit(cache=True)
def _pair_sums(pA, wA, pB, wB, decay, unit, p_swap, strat, tau, w_cut):
    """Visit every pair ``(tA, tB)`` in the window once.

    Pairs are grouped by ``t = max(tA, tB)``; for each t the moments
    ``sum prob``, ``sum prob*u*v`` and ``sum prob*(u+v)`` of the passing pairs
    are accumulated, from which both unit types follow.
    """
    size = pA.shape[0]
    n = size - 1
    pss = np.zeros(size)
    psf = np.zeros(size)
    pfc = np.zeros(size)
    wnum = np.zeros(size)
    for t in range(size):
        m = 0.0
        muv = 0.0
        msum = 0.0
        fail = 0.0
        time_ok = strat != 2 or t <= tau
        # tA = t >= tB: link B waits and decays
        a = pA[t]
        if a != 0.0:
            u = wA[t]
            for tB in range(t + 1):
                b = pB[tB]
                if b == 0.0:
                    continue
                d = t - tB
                v = wB[tB] * decay[d]
                prob = a * b
                if strat == 1:
                    passed = d <= tau
                elif strat == 3:
                    passed = u >= w_cut and v >= w_cut
                else:
                    passed = time_ok
                if passed:
                    m += prob
                    muv += prob * u * v
                    msum += prob * (u + v)
                elif strat == 1:
                    if tB + tau <= n:
                        pfc[tB + tau] += prob
                else:
                    fail += prob
        # tB = t > tA: link A waits and decays
        b = pB[t]
        if b != 0.0:
            v = wB[t]
            for tA in range(t):
                a2 = pA[tA]
                if a2 == 0.0:
                    continue
                d = t - tA
                u = wA[tA] * decay[d]
                prob = a2 * b
                if strat == 1:
                    passed = d <= tau
                elif strat == 3:
                    passed = u >= w_cut and v >= w_cut
                else:
                    passed = time_ok
                if passed:
                    m += prob
                    muv += prob * u * v
                    msum += prob * (u + v)
                elif strat == 1:
                    if tA + tau <= n:
                        pfc[tA + tau] += prob
                else:
                    fail += prob
        if unit == 0:
            pss[t] = p_swap * m
            psf[t] = (1.0 - p_swap) * m
            wnum[t] = p_swap * muv
        else:
            pss[t] = 0.5 * (m + muv)
            psf[t] = 0.5 * (m - muv)
            wnum[t] = (msum + 4.0 * muv) / 6.0
        if fail != 0.0:
            # MAX_TIME rejects at tau, FIDELITY at the later delivery time
            tf = tau if strat == 2 else t
            if tf <= n:
                pfc[tf] += fail
    return pss, psf, pfc, wnum


def cutoff_fail_tails(pA, pB, spec):
    """Rejections caused by a partner delivered after the window.

    Input links are delivered eventually with probability one, so a partner
    beyond ``ttr`` has total mass ``1 - covered``. For DIF_TIME such pairs
    fail at ``t_min + tau``, for MAX_TIME at ``tau``; FIDELITY rejections
    happen at the later delivery time, always outside the window.
    """
    n = pA.size - 1
    tails = np.zeros(n + 1)
    if spec is None or spec.strategy is Strategy.FIDELITY or spec.tau > n:
        return tails
    tau = int(spec.tau)
    out_A = max(0.0, 1.0 - pA.sum())
    out_B = max(0.0, 1.0 - pB.sum())
    if spec.strategy is Strategy.DIF_TIME:
        if tau < n:
            tails[tau + 1:] = pA[1:n + 1 - tau] * out_B + pB[1:n + 1 - tau] * out_A
    else:
        tails[tau] = 1.0 - (1.0 - out_A) * (1.0 - out_B)
    return tails


def _check_pair(A, B):
    if A.pmf.size != B.pmf.size:
        raise LengthMismatchError(
            f"input windows differ: ttr={A.pmf.size - 1} vs ttr={B.pmf.size - 1}")


def selection_kernels_direct(A, B, unit, spec, hardware):
    """Kernels for one input-pair draw by the explicit O(ttr^2) double sum."""
    _check_pair(A, B)
    n = A.pmf.size - 1
    unit_code = UNIT_SWAP if unit in (Kind.SWAP, UNIT_SWAP) else UNIT_DIST
    pss, psf, pfc, wnum = _pair_sums(
        A.pmf, A.werner, B.pmf, B.werner, decay_table(n, hardware.t_coh),
        unit_code, float(hardware.p_swap), strategy_code(spec), _int_tau(spec, n),
        float(spec.w_cut) if spec is not None and spec.w_cut is not None else 0.0,
    )
    tails = cutoff_fail_tails(A.pmf, B.pmf, spec)
    return SelectionKernels(pss, psf, pfc + tails, wnum, tail_mass=float(tails.sum()))


def swap_attempt_kernels(A, B, hardware):
    """Swap attempt: waits for both links, succeeds with constant ``p_swap``."""
    return selection_kernels_direct(A, B, Kind.SWAP, None, hardware).as_attempt()


def dist_attempt_kernels(A, B, hardware):
    """Distillation attempt with Werner-dependent success probability."""
    return selection_kernels_direct(A, B, Kind.DIST, None, hardware).as_attempt()


def attempt_from_selection(sel, backend, padding_factor):
    """Compound the inner cut-off loop into per-unit-attempt kernels.

    Rejected draws are retried until a pair passes; the pass is followed by a
    success (``ps``) or failure (``pf``) of the unit itself.
    """
    from .compound import geometric_sums

    ps, pf, ws = geometric_sums(sel.cut_fail, [sel.pass_succ, sel.pass_fail, sel.ws_num],
                                backend, padding_factor)
    return AttemptKernels(ps, pf, ws)
