import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from poissoncdo.quadrature import integrate


def test_polynomial_exact():
    assert integrate(lambda x: x ** 5, 0.0, 2.0) == pytest.approx(64 / 6, rel=1e-14)


def test_reversed_and_empty():
    assert integrate(np.exp, 1.0, 0.0) == pytest.approx(-(math.e - 1))
    assert integrate(np.exp, 2.0, 2.0) == 0.0


def test_infinite_limits_rejected():
    with pytest.raises(ValueError):
        integrate(np.exp, 0.0, math.inf)


def test_peaked_integrand_is_refined():
    # narrow Gaussian bump: needs adaptive subdivision
    f = lambda x: np.exp(-((x - 0.3) / 1e-3) ** 2)
    assert integrate(f, 0.0, 1.0, rel_tol=1e-10) == pytest.approx(1e-3 * math.sqrt(math.pi), rel=1e-9)


@settings(max_examples=30)
@given(st.floats(0.1, 20.0), st.floats(0.01, 5.0))
def test_exponential_decay(nu, hi):
    got = integrate(lambda x: np.exp(-nu * x), 0.0, hi)
    assert got == pytest.approx(-math.expm1(-nu * hi) / nu, rel=1e-9)
