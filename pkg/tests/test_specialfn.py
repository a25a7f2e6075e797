import math

import numpy as np
import pytest
from scipy.integrate import quad

from kslogistic import specialfn as sf
from kslogistic.specialfn import HypergeomSpec, ParameterDomainError, SeriesNonConvergence


def test_gamma_values():
    assert sf.gamma(1) == pytest.approx(1.0, abs=1e-15)
    assert sf.gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    ref = quad(lambda t: t**2.7 * math.exp(-t), 0, np.inf, epsabs=1e-13, epsrel=1e-13)[0]
    assert abs(sf.gamma(3.7) - ref) < 1e-10
    z = 0.3 + 0.4j
    assert sf.gamma(z + 1) == pytest.approx(z * sf.gamma(z), rel=1e-13)
    for pole in (0, -1, -7):
        with pytest.raises(ParameterDomainError):
            sf.gamma(pole)


def test_spec_domain_checks():
    with pytest.raises(ParameterDomainError):
        HypergeomSpec((1.0, 1.0), (-2.0,), 0.5)
    with pytest.raises(ParameterDomainError):
        HypergeomSpec((1.0, 1.0), (1.5,), 1.0)  # Re(excess) = -0.5
    with pytest.raises(ParameterDomainError):
        HypergeomSpec((1.0,), (2.0,), 1.5)


def test_gauss_summation():
    val = sf.hyp([0.3, 0.2], [1.7], 1.0)
    assert abs(val - sf.gauss_sum(0.3, 0.2, 1.7)) < 1e-10


def test_zero_upper_parameter_truncates():
    assert sf.hyp([0.0, 2.5, 1.0], [3.0, 0.7], 1.0) == 1.0
    r = sf.pfq_result(HypergeomSpec((-2.0, 1.0), (3.0,), 0.5))
    # 1 + (-2)(1)/3 z + (-2)(-1)(1)(2)/(3*4*2) z^2
    assert r.value == pytest.approx(1 - 2 / 3 * 0.5 + 4 / 24 * 0.25, abs=1e-15)


def test_3f2_small_delta():
    d = 0.05
    val = sf.hyp([1 + d, d - 0.5, 1 + d], [2 * d + 1, 1.5 + d], 1.0)
    assert abs(val - (0.5 + d)) < 5e-3


def test_series_cap_reported():
    spec = HypergeomSpec((1.0, 1.0), (2.0,), 0.9999, max_terms=50)
    with pytest.raises(SeriesNonConvergence):
        sf.pfq(spec)


def test_euler_lift_1f0_to_2f1():
    inner = HypergeomSpec((0.4,), (), 0.6)
    lifted = sf.euler_integral_lift(inner, 0.7, 1.9)
    assert abs(lifted - sf.hyp([0.4, 0.7], [1.9], 0.6)) < 1e-8


def test_euler_lift_trivial_inner():
    inner = HypergeomSpec((0.0, 1.0), (2.0,), 1.0)
    assert abs(sf.euler_integral_lift(inner, 0.8, 2.3) - 1.0) < 1e-10


def test_euler_lift_4f3():
    d = 0.1
    inner = HypergeomSpec((1.0, 0.5, 2.0), (2 - d, 2 + d), 1.0)
    lifted = sf.euler_integral_lift(inner, 2.0, 2.5)
    assert abs(lifted - sf.hyp([1.0, 0.5, 2.0, 2.0], [2 - d, 2 + d, 2.5], 1.0)) < 1e-8


def test_euler_lift_domain():
    with pytest.raises(ParameterDomainError):
        sf.euler_integral_lift(HypergeomSpec((1.0,), (2.0,), 0.5), 2.0, 1.0)


def test_derivative_recursion():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a = rng.uniform(0.1, 2.0, 2)
        b = rng.uniform(0.5, 3.0, 1)
        z, h = 0.5, 1e-5
        f = lambda zz: sf.hyp(a, b, zz)
        fd = (f(z + h) - f(z - h)) / (2 * h)
        ana = sf.pfq_derivative(HypergeomSpec(tuple(a), tuple(b), z))
        assert abs(fd - ana) < 1e-6 * max(1.0, abs(ana))


@pytest.mark.parametrize("z", [0.05, 0.3, 0.6, 0.9])
def test_euler_transformation(z):
    a, b, c = 0.3, 0.8, 1.9
    assert abs(sf.hyp([a, b], [c], z) - sf.euler_transform_2f1(a, b, c, z)) < 1e-10


def test_complex_parameters_at_unit_argument():
    d = 0.2 + 0.1j
    val = sf.hyp([1 + d, d - 0.5, 1 + d], [2 * d + 1, 1.5 + d], 1.0)
    import mpmath
    ref = complex(mpmath.hyper([1 + d, d - 0.5, 1 + d], [2 * d + 1, 1.5 + d], 1))
    assert abs(val - ref) < 1e-10
