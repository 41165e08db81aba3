import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import geometric_link
from repeater_cutoff import LinkState
from repeater_cutoff.errors import NoKeyError
from repeater_cutoff.keyrate import (
    binary_entropy,
    choose_ttr,
    secret_key_fraction,
    secret_key_rate,
    truncated_averages,
)


def test_binary_entropy_values():
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.11) == pytest.approx(0.499916, abs=1e-6)
    with pytest.raises(ValueError):
        binary_entropy(1.5)


@given(st.floats(0.0, 1.0))
def test_binary_entropy_symmetric(p):
    assert binary_entropy(p) == pytest.approx(binary_entropy(1.0 - p), abs=1e-12)


def test_key_fraction_values():
    assert secret_key_fraction(1.0) == 1.0
    assert secret_key_fraction(0.98) == pytest.approx(0.838414, abs=1e-6)
    assert secret_key_fraction(0.5) == 0.0
    # zero crossing: (1 - w)/2 = 0.110028
    assert secret_key_fraction(0.7799) == 0.0
    assert secret_key_fraction(0.7801) > 0.0


@given(st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_key_fraction_monotone(a, b):
    lo, hi = sorted((a, b))
    assert secret_key_fraction(lo) <= secret_key_fraction(hi)


def test_truncated_averages_restart_semantics():
    # p = 1/2, ttr = 1: each run delivers at step 1 with probability 1/2,
    # otherwise 1 step is lost, so the mean is 2
    t_bar, w_bar = truncated_averages(geometric_link(0.5, 1, 0.9))
    assert t_bar == pytest.approx(2.0)
    assert w_bar == pytest.approx(0.9)


@given(st.floats(0.05, 0.9), st.integers(1, 200))
def test_truncated_mean_of_geometric_is_exact(p, ttr):
    # restarting a memoryless process at ttr does not change its mean
    t_bar, _ = truncated_averages(geometric_link(p, ttr))
    assert t_bar == pytest.approx(1.0 / p, rel=1e-10)


def test_secret_key_rate_report():
    link = geometric_link(0.25, 400, 0.98)
    rep = secret_key_rate(link)
    assert rep.t_bar == pytest.approx(4.0)
    assert rep.r == pytest.approx(0.838414, abs=1e-6)
    assert rep.rate == pytest.approx(0.838414 / 4, abs=1e-6)
    assert rep.f_bar == pytest.approx(0.985)
    assert set(rep.to_dict()) == {"t_bar", "w_bar", "f_bar", "r", "rate", "covered_mass"}


def test_pointwise_fraction_differs_from_averaged():
    pmf = np.array([0.0, 0.5, 0.5])
    link = LinkState(pmf, np.array([0.0, 1.0, 0.6]))
    assert secret_key_rate(link).r == pytest.approx(secret_key_fraction(0.8))
    assert secret_key_rate(link, pointwise=True).r == pytest.approx(0.5)


def test_empty_window_has_no_key():
    with pytest.raises(NoKeyError):
        secret_key_rate(LinkState(np.zeros(5), np.zeros(5)))


def test_choose_ttr_doubles_until_covered():
    seen = []

    def evaluate(ttr):
        seen.append(ttr)
        return geometric_link(0.01, ttr)

    ttr, link = choose_ttr(evaluate, 16, target=0.99)
    assert seen == [16, 32, 64, 128, 256, 512]
    assert link.covered_mass >= 0.99 and ttr == 512
    ttr, _ = choose_ttr(evaluate, 16, target=0.9999999, max_ttr=100)
    assert ttr == 100
    assert math.isfinite(ttr)
