import math

import mpmath
import pytest
from scipy import special

from trendtest.stats import betainc, f_sf, normal_cdf, t_two_sided_pvalue, two_sided_normal_pvalue

mpmath.mp.dps = 40


@pytest.mark.parametrize("x", [-3, -2, -1, 0, 1, 2, 3])
def test_normal_cdf_against_high_precision(x):
    exact = float(mpmath.ncdf(x))
    assert abs(normal_cdf(x) - exact) < 1e-10


def test_two_sided_pvalue_identity():
    for t in (-2.5, -1.0, 0.0, 0.3, 4.0):
        assert two_sided_normal_pvalue(t) == pytest.approx(2 * normal_cdf(-abs(t)), abs=1e-15)
    assert two_sided_normal_pvalue(0.0) == 1.0
    assert two_sided_normal_pvalue(math.inf) == 0.0


BETA_CASES = [
    (0.5, 0.5, 0.2), (1.0, 1.0, 0.7), (2.0, 3.0, 0.4), (10.0, 2.0, 0.9),
    (0.5, 30.0, 0.01), (50.0, 50.0, 0.5), (3.5, 0.5, 0.999), (1.5, 7.0, 0.15),
]


@pytest.mark.parametrize("a, b, x", BETA_CASES)
def test_betainc_against_mpmath(a, b, x):
    exact = float(mpmath.betainc(a, b, 0, x, regularized=True))
    assert betainc(a, b, x) == pytest.approx(exact, abs=1e-12)


def test_betainc_edges():
    assert betainc(2.0, 3.0, 0.0) == 0.0
    assert betainc(2.0, 3.0, 1.0) == 1.0
    with pytest.raises(ValueError):
        betainc(-1.0, 1.0, 0.5)


F_TRIPLES = [
    (0.5, 1, 10), (1.0, 2, 20), (3.84, 1, 1000), (2.5, 3, 30), (10.0, 5, 7),
    (0.1, 4, 4), (1.7, 12, 60), (4.2, 2, 9), (0.95, 40, 200), (25.0, 1, 3),
]


@pytest.mark.parametrize("f, d1, d2", F_TRIPLES)
def test_f_sf_against_incomplete_beta_oracle(f, d1, d2):
    # oracle: the F survival function written through scipy's incomplete beta
    oracle = special.betainc(d2 / 2, d1 / 2, d2 / (d2 + d1 * f))
    assert abs(f_sf(f, d1, d2) - oracle) < 1e-8


@pytest.mark.parametrize("t, df", [(0.0, 5), (1.0, 10), (2.0, 3), (-2.7, 40), (5.0, 1000)])
def test_t_pvalue_against_mpmath(t, df):
    # two-sided tail from the t density integrated in high precision
    dens = lambda s: mpmath.gamma((df + 1) / 2) / (mpmath.sqrt(df * mpmath.pi) * mpmath.gamma(df / 2)) \
        * (1 + s * s / df) ** (-(df + 1) / 2)
    exact = float(2 * mpmath.quad(dens, [abs(t), mpmath.inf]))
    assert t_two_sided_pvalue(t, df) == pytest.approx(exact, abs=1e-10)
