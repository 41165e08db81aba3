"""Value types passed between the kernel, compounding and evaluation stages."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["AttemptKernels", "LinkState", "SelectionKernels", "werner_from_numerator"]


def werner_from_numerator(pmf, numerator):
    """``numerator / pmf`` where ``pmf > 0``, 0 elsewhere, clipped to [0, 1]."""
    werner = np.zeros_like(pmf)
    mask = pmf > 0.0
    werner[mask] = numerator[mask] / pmf[mask]
    return np.clip(werner, 0.0, 1.0, out=werner)


@dataclass(frozen=True, eq=False)
class LinkState:
    """Delivery-time distribution of a link and its average Werner parameter.

    ``pmf[t]`` is Pr(T = t) for t = 0..ttr and ``werner[t]`` the average
    Werner parameter of links delivered at step t (0 where ``pmf[t] == 0``).
    """

    pmf: np.ndarray
    werner: np.ndarray

    def __post_init__(self):
        if self.pmf.shape != self.werner.shape:
            raise ValueError(f"pmf and werner lengths differ: {self.pmf.shape} vs {self.werner.shape}")

    @classmethod
    def from_numerator(cls, pmf, numerator):
        pmf = np.asarray(pmf, dtype=np.float64)
        return cls(pmf, werner_from_numerator(pmf, np.asarray(numerator, dtype=np.float64)))

    @property
    def ttr(self):
        return self.pmf.size - 1

    @property
    def covered_mass(self):
        """Pr(T <= ttr)."""
        return float(self.pmf.sum())

    @property
    def cdf(self):
        return np.cumsum(self.pmf)

    @property
    def fidelity(self):
        return (1.0 + 3.0 * self.werner) / 4.0

    @property
    def weighted_werner(self):
        """``pmf * werner``, the quantity the compounding actually propagates."""
        return self.pmf * self.werner


@dataclass(frozen=True, eq=False)
class AttemptKernels:
    """Joint time/outcome distributions of one attempt of a unit.

    ``ps[t] = Pr(M=t, Y=1)``, ``pf[t] = Pr(M=t, Y=0)`` and ``ws_num[t]`` is
    ``ps[t]`` times the average output Werner parameter of successes at t.
    """

    ps: np.ndarray
    pf: np.ndarray
    ws_num: np.ndarray


@dataclass(frozen=True, eq=False)
class SelectionKernels:
    """Per-draw kernels of a unit whose input pair passes through a cut-off.

    ``pass_succ`` / ``pass_fail``: the pair passes the cut-off and the unit
    then succeeds / fails (time = max of the input times). ``cut_fail``: the
    pair is rejected (time = strategy-specific failure time). ``ws_num`` is
    ``pass_succ`` times the average output Werner parameter.

    ``tail_mass`` is the part of ``cut_fail`` contributed by partner links
    delivered after the truncation window (their total mass is known to be
    ``1 - covered``), so that ``sum(pass_succ + pass_fail + cut_fail) -
    tail_mass`` equals the product of the input masses.
    """

    pass_succ: np.ndarray
    pass_fail: np.ndarray
    cut_fail: np.ndarray
    ws_num: np.ndarray
    tail_mass: float = 0.0

    def window_pair_mass(self):
        return float(self.pass_succ.sum() + self.pass_fail.sum() + self.cut_fail.sum()
                     - self.tail_mass)

    def as_attempt(self):
        """Kernels of a unit without cut-off (nothing is ever rejected)."""
        return AttemptKernels(self.pass_succ, self.pass_fail, self.ws_num)
