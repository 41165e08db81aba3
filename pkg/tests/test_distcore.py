import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from repeater_cutoff.distcore import (
    FFT_THRESHOLD,
    clamp_negative,
    convolve_circular,
    convolve_linear,
    decayed_window_sums,
    dft,
    prefix_sums,
    window_sums,
)
from repeater_cutoff.errors import EmptyInputError, LengthMismatchError, NumericalError

probs = st.floats(0.0, 1.0, allow_nan=False)


def pmf_arrays(n_min=1, n_max=200):
    return st.integers(n_min, n_max).flatmap(lambda n: arrays(np.float64, n, elements=probs))


def naive_convolve(a, b):
    n = len(a)
    return np.array([sum(a[t - s] * b[s] for s in range(t + 1)) for t in range(n)])


@pytest.mark.parametrize("a, b, expected", [
    ([0, 1, 0], [0, 1, 0], [0, 0, 1]),
    ([0, 0.5, 0.5], [0, 1, 0], [0, 0, 0.5]),
    ([0, 0.5, 0.25, 0.125], [0, 0.5, 0.25, 0.125], [0, 0, 0.25, 0.25]),
])
def test_convolve_linear_examples(a, b, expected):
    np.testing.assert_allclose(convolve_linear(a, b), expected, atol=1e-15)


def test_convolve_linear_errors():
    with pytest.raises(LengthMismatchError):
        convolve_linear([1, 2], [1, 2, 3])
    assert convolve_linear([], []).size == 0


@pytest.mark.parametrize("n", [5, FFT_THRESHOLD - 1, FFT_THRESHOLD, 300])
def test_convolve_linear_matches_naive_on_both_sides_of_crossover(n):
    rng = np.random.default_rng(n)
    a, b = rng.random(n), rng.random(n)
    np.testing.assert_allclose(convolve_linear(a, b), naive_convolve(a, b), rtol=1e-12, atol=1e-12)


@given(pmf_arrays(), st.data())
def test_convolve_linear_commutative_and_associative(a, data):
    b = data.draw(arrays(np.float64, a.size, elements=probs))
    c = data.draw(arrays(np.float64, a.size, elements=probs))
    scale = max(1.0, a.size)
    assert np.abs(convolve_linear(a, b) - convolve_linear(b, a)).max() <= 1e-12 * scale
    left = convolve_linear(convolve_linear(a, b), c)
    right = convolve_linear(a, convolve_linear(b, c))
    assert np.abs(left - right).max() <= 1e-12 * scale**2


@given(pmf_arrays(n_max=100), st.data())
def test_full_convolution_mass_is_product(a, data):
    b = data.draw(arrays(np.float64, a.size, elements=probs))
    a = a / max(a.sum(), 1.0)
    b = b / max(b.sum(), 1.0)
    pad = np.zeros(2 * a.size)
    A, B = pad.copy(), pad.copy()
    A[:a.size], B[:b.size] = a, b
    assert abs(convolve_linear(A, B).sum() - a.sum() * b.sum()) <= 1e-12


def test_convolve_circular_examples():
    np.testing.assert_allclose(convolve_circular([1, 0], [0, 1], 2), [0, 1], atol=1e-15)
    np.testing.assert_allclose(convolve_circular([0, 1], [0, 1], 2), [1, 0], atol=1e-15)
    with pytest.raises(EmptyInputError):
        convolve_circular([], [], 0)
    with pytest.raises(LengthMismatchError):
        convolve_circular([1, 0], [1], 2)


@given(st.integers(1, 60), st.integers(0, 10**6))
def test_circular_equals_linear_when_nothing_wraps(n, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random(n), rng.random(n)
    L = 2 * n
    A, B = np.zeros(L), np.zeros(L)
    A[:n], B[:n] = a, b
    np.testing.assert_allclose(convolve_circular(A, B, L), convolve_linear(A, B), atol=1e-12)


def test_dft_examples():
    np.testing.assert_allclose(dft([1, 0, 0, 0]), [1, 1, 1, 1])
    np.testing.assert_allclose(dft([1, 1, 1, 1]), [4, 0, 0, 0], atol=1e-15)
    x = np.random.default_rng(0).random(1024)
    np.testing.assert_allclose(dft(dft(x), inverse=True).real, x, atol=1e-12)
    with pytest.raises(EmptyInputError):
        dft([])


@given(st.integers(1, 64), st.floats(-3, 3), st.floats(-3, 3), st.integers(0, 10**6))
def test_dft_linear(n, alpha, beta, seed):
    rng = np.random.default_rng(seed)
    x, y = rng.random(n), rng.random(n)
    np.testing.assert_allclose(dft(alpha * x + beta * y), alpha * dft(x) + beta * dft(y), atol=1e-12 * n)


def test_prefix_sums():
    np.testing.assert_allclose(prefix_sums([0, 0.5, 0.5], [1, 1, 1]), [0, 0.5, 1.0])
    assert not prefix_sums([0.2, 0.3], [0, 0]).any()
    rng = np.random.default_rng(3)
    w, g = rng.random(100), rng.random(100)
    naive = [sum(w[s] * g[s] for s in range(t + 1)) for t in range(100)]
    np.testing.assert_allclose(prefix_sums(w, g), naive, rtol=1e-14, atol=1e-14)


@given(st.integers(1, 80), st.integers(0, 90), st.floats(0.0, 1.0), st.integers(0, 10**6))
def test_window_sums_against_loops(n, width, ratio, seed):
    x = np.random.default_rng(seed).random(n)
    plain = [x[max(0, t - width):t + 1].sum() for t in range(n)]
    decayed = [sum(x[s] * ratio ** (t - s) for s in range(max(0, t - width), t + 1)) for t in range(n)]
    np.testing.assert_allclose(window_sums(x, width), plain, atol=1e-12)
    np.testing.assert_allclose(decayed_window_sums(x, ratio, width), decayed, atol=1e-12)


def test_decayed_sums_do_not_overflow_for_long_horizons():
    # ratio**-t would overflow long before t = 10**5
    x = np.full(10**5, 1e-5)
    out = decayed_window_sums(x, np.exp(-1 / 50.0))
    assert np.isfinite(out).all()
    assert out[-1] == pytest.approx(1e-5 / (1 - np.exp(-1 / 50.0)), rel=1e-9)


def test_clamp_negative():
    x = np.array([0.5, -1e-16, 0.2])
    clamp_negative(x)
    assert x.tolist() == [0.5, 0.0, 0.2]
    with pytest.raises(NumericalError):
        clamp_negative(np.array([0.5, -1e-6]))
    # larger transforms get a proportionally larger allowance
    clamp_negative(np.array([1.0, -1e-13]), scale=10.0)
