"""BB84 secret-key rate of a truncated delivery-time / Werner distribution."""

from dataclasses import asdict, dataclass

import numpy as np

from .errors import NoKeyError

__all__ = [
    "SecretKeyReport",
    "binary_entropy",
    "choose_ttr",
    "secret_key_fraction",
    "secret_key_rate",
    "truncated_averages",
]


def binary_entropy(p):
    """``h(p) = -p log2 p - (1-p) log2(1-p)`` with ``h(0) = h(1) = 0``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p} outside [0, 1]")
    if p == 0.0 or p == 1.0:
        return 0.0
    return float(-p * np.log2(p) - (1.0 - p) * np.log2(1.0 - p))


def secret_key_fraction(w):
    """BB84 key fraction of a Werner state; both bases have error rate (1-w)/2."""
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"Werner parameter {w} outside [0, 1]")
    return max(0.0, 1.0 - 2.0 * binary_entropy((1.0 - w) / 2.0))


def truncated_averages(link):
    """Average waiting time and Werner parameter under restart-at-truncation.

    A run that has not delivered by ``ttr`` is abandoned after ``ttr`` steps
    and restarted, so the number of runs is geometric in the covered mass.
    """
    pmf = link.pmf
    p_tr = float(pmf.sum())
    if p_tr <= 0.0:
        raise NoKeyError("no probability mass within the truncation window")
    t = np.arange(pmf.size)
    t_bar = link.ttr * (1.0 - p_tr) / p_tr + float((t * pmf).sum()) / p_tr
    w_bar = float((link.werner * pmf).sum()) / p_tr
    return t_bar, min(max(w_bar, 0.0), 1.0)


@dataclass(frozen=True)
class SecretKeyReport:
    t_bar: float
    w_bar: float
    f_bar: float
    r: float
    rate: float
    covered_mass: float

    def to_dict(self):
        return asdict(self)


def secret_key_rate(link, pointwise=False):
    """Secret-key fraction divided by the average waiting time.

    By default the fraction is evaluated at the averaged Werner parameter.
    ``pointwise=True`` averages ``r(W(t))`` over delivery times instead
    (sensitivity studies only).
    """
    t_bar, w_bar = truncated_averages(link)
    if pointwise:
        mass = link.pmf.sum()
        r = float(sum(p * secret_key_fraction(float(w))
                      for p, w in zip(link.pmf, link.werner) if p > 0.0) / mass)
    else:
        r = secret_key_fraction(w_bar)
    return SecretKeyReport(
        t_bar=t_bar,
        w_bar=w_bar,
        f_bar=(1.0 + 3.0 * w_bar) / 4.0,
        r=r,
        rate=r / t_bar,
        covered_mass=link.covered_mass,
    )


def choose_ttr(evaluate, start, target=0.99, max_ttr=2**24):
    """Double ``ttr`` from ``start`` until ``evaluate(ttr)`` covers ``target`` mass.

    ``evaluate`` maps a truncation time to a LinkState. Returns
    ``(ttr, link)``; stops at ``max_ttr`` even if the target is not reached.
    """
    ttr = int(start)
    while True:
        link = evaluate(ttr)
        if link.covered_mass >= target or ttr >= max_ttr:
            return ttr, link
        ttr = min(2 * ttr, max_ttr)
