import math

import pytest

from knnentropy.quadrature import QuadratureError, gk_integrate, integrate_decaying


def test_polynomial_exact():
    val, err = gk_integrate(lambda t: t ** 6 - 2 * t, 0.0, 2.0)
    assert val == pytest.approx(128 / 7 - 4, rel=1e-14)
    assert err >= 0


def test_oscillatory():
    val, _ = gk_integrate(math.sin, 0.0, 20 * math.pi, rtol=1e-12, atol=1e-12)
    assert abs(val) < 1e-10


def test_endpoint_singularity():
    val, _ = gk_integrate(lambda t: 1 / math.sqrt(t) if t > 0 else 0.0, 0.0, 1.0, rtol=1e-9)
    assert val == pytest.approx(2.0, rel=1e-8)


def test_reversed_limits():
    val, _ = gk_integrate(math.exp, 1.0, 0.0)
    assert val == pytest.approx(-(math.e - 1), rel=1e-13)


def test_decaying_gamma_integral():
    # Gamma(4.5) by direct integration
    val, _ = integrate_decaying(lambda t: t ** 3.5 * math.exp(-t), 0.0, rtol=1e-11)
    assert val == pytest.approx(math.gamma(4.5), rel=1e-10)


def test_failure_reported():
    with pytest.raises(QuadratureError):
        gk_integrate(lambda t: math.sin(1 / t) / t if t > 0 else 0.0, 0.0, 1.0,
                     rtol=1e-14, max_intervals=20)
