import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from repeater_cutoff import Backend
from repeater_cutoff.compound import (
    compound_direct,
    compound_fourier,
    compound_swap,
    geometric_sums_direct,
    geometric_sums_fourier,
)
from repeater_cutoff.errors import NumericalSingularityError
from repeater_cutoff.states import AttemptKernels


def renewal_oracle(pf, x):
    """S(t) = x(t) + sum_s pf(s) S(t - s), solved forward in t."""
    n = len(pf)
    S = np.zeros(n)
    for t in range(n):
        S[t] = x[t] + sum(pf[s] * S[t - s] for s in range(1, t + 1))
    return S


def random_attempt(rng, n, fail_mass):
    ps = rng.random(n) * (rng.random(n) < 0.5)
    pf = rng.random(n) * (rng.random(n) < 0.5)
    ps[0] = pf[0] = 0.0
    ps[1] += 0.01
    pf[1] += 0.01
    ps *= (1 - fail_mass) / ps.sum()
    pf *= fail_mass / pf.sum()
    return ps, pf


@given(st.integers(2, 60), st.floats(0.0, 0.95), st.integers(0, 10**6))
def test_direct_sums_match_renewal_recursion(n, fail_mass, seed):
    rng = np.random.default_rng(seed)
    ps, pf = random_attempt(rng, n, fail_mass)
    (S,) = geometric_sums_direct(pf, [ps])
    np.testing.assert_allclose(S, renewal_oracle(pf, ps), atol=1e-14)


@given(st.integers(2, 60), st.floats(0.0, 0.3), st.integers(0, 10**6))
def test_fourier_sums_match_renewal_recursion(n, fail_mass, seed):
    # attempts last at most n steps, so reaching 16 n takes at least 16
    # failures; with 30% failures per attempt the wrapped mass is < 0.3**16
    rng = np.random.default_rng(seed)
    ps, pf = random_attempt(rng, n, fail_mass)
    (S,) = geometric_sums_fourier(pf, [ps], padding_factor=16)
    np.testing.assert_allclose(S, renewal_oracle(pf, ps), atol=1e-12)


def test_geometric_attempts_give_geometric_pmf():
    # one-step attempts succeeding with probability q: Pr(T = t) = q (1-q)^(t-1)
    q, n = 0.3, 50
    ps, pf = np.zeros(n), np.zeros(n)
    ps[1], pf[1] = q, 1 - q
    t = np.arange(1, n)
    expected = np.concatenate([[0.0], q * (1 - q) ** (t - 1)])
    k = AttemptKernels(ps, pf, 0.8 * ps)
    for link in (compound_direct(k), compound_fourier(k, 3)):
        np.testing.assert_allclose(link.pmf, expected, atol=1e-13)
        assert np.all(link.werner[1:] == pytest.approx(0.8))


def test_fourier_aliasing_shrinks_with_padding():
    rng = np.random.default_rng(5)
    ps, pf = random_attempt(rng, 40, 0.7)
    exact = renewal_oracle(pf, ps)
    errs = [np.abs(geometric_sums_fourier(pf, [ps], c)[0] - exact).max() for c in (2, 4, 64)]
    assert errs[0] > errs[1] > errs[2]
    assert errs[2] < 1e-10


def test_certain_failure_is_singular():
    pf = np.zeros(8)
    pf[1] = 1.0
    with pytest.raises(NumericalSingularityError):
        geometric_sums_fourier(pf, [np.zeros(8)])
    # the direct route simply never succeeds
    assert not geometric_sums_direct(pf, [np.zeros(8)])[0].any()


@given(st.integers(2, 40), st.floats(0.1, 1.0), st.integers(0, 10**6))
def test_compound_swap_matches_general_compounding(n, p_swap, seed):
    rng = np.random.default_rng(seed)
    m = rng.random(n)
    m[0] = 0.0
    m *= 0.9 / m.sum()
    mw = m * rng.uniform(0.3, 1.0, n)
    k = AttemptKernels(p_swap * m, (1 - p_swap) * m, p_swap * mw)
    general = compound_direct(k)
    out = compound_swap(m, mw, p_swap, Backend.DIRECT)
    np.testing.assert_allclose(out.pmf, general.pmf, atol=1e-13)
    np.testing.assert_allclose(out.weighted_werner, general.weighted_werner, atol=1e-13)
    if p_swap >= 0.5:
        # reaching 64 n needs 64 failures of probability <= 0.45 each
        out = compound_swap(m, mw, p_swap, Backend.FOURIER, padding_factor=64)
        np.testing.assert_allclose(out.pmf, general.pmf, atol=1e-12)
        np.testing.assert_allclose(out.weighted_werner, general.weighted_werner, atol=1e-12)
