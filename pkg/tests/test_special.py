import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from relay_vi.special import EULER_GAMMA, digamma, gammaln


def test_digamma_at_one():
    assert abs(digamma(1.0) + 0.5772156649015329) < 1e-15
    assert EULER_GAMMA == pytest.approx(0.5772156649015329, abs=1e-16)


def test_digamma_at_half():
    assert abs(digamma(0.5) - (-EULER_GAMMA - 2 * math.log(2))) < 1e-14


@pytest.mark.parametrize("x", [1e-6, 1e-3, 0.1, 0.5, 1.0, 2.5, 9.99, 10.0, 37.2, 1e3, 1e6, 1e8])
def test_against_high_precision(x):
    mpmath.mp.dps = 30
    assert abs(digamma(x) - float(mpmath.digamma(x))) <= 1e-10 * max(1, abs(digamma(x)))
    assert abs(gammaln(x) - float(mpmath.loggamma(x))) <= 1e-10 * max(1, abs(gammaln(x)))


@given(st.floats(1e-4, 1e6))
@settings(max_examples=200, deadline=None)
def test_recurrences(x):
    assert abs(digamma(x + 1) - digamma(x) - 1 / x) < 1e-10 * max(1.0, 1 / x)
    assert abs(gammaln(x) - math.lgamma(x)) < 1e-10 * max(1.0, abs(math.lgamma(x)))


def test_vectorized():
    x = np.array([[0.5, 1.0], [3.0, 100.0]])
    out = digamma(x)
    assert out.shape == x.shape
    assert out[0, 1] == digamma(1.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.nan, np.inf * -1])
def test_rejects_nonpositive(bad):
    with pytest.raises(ValueError):
        digamma(bad)
    with pytest.raises(ValueError):
        gammaln(bad)
