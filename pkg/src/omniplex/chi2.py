"""Chi-square distribution via the regularized incomplete gamma function.

The lower regularized gamma ``P(a, x)`` uses its power series for
``x < a + 1`` and the complementary continued fraction (modified Lentz)
otherwise, following the classic Numerical Recipes split.
"""

import math

from scipy.optimize import brentq

from .errors import InvalidArgument

EPS = 1e-16
TINY = 1e-300
MAX_ITER = 100_000


def _gamma_series(a, x):
    # P(a, x) by series
    ap = a
    term = 1.0 / a
    total = term
    for _ in range(MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x):
    # Q(a, x) by continued fraction
    b = x + 1.0 - a
    c = 1.0 / TINY
    d = 1.0 / b
    h = d
    for i in range(1, MAX_ITER):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < TINY:
            d = TINY
        c = b + an / c
        if abs(c) < TINY:
            c = TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < EPS:
            break
    return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h


def gammainc_lower(a, x):
    """Regularized lower incomplete gamma ``P(a, x)``."""
    if a <= 0 or x < 0:
        raise InvalidArgument("need a > 0 and x >= 0")
    if x == 0:
        return 0.0
    if x < a + 1.0:
        return _gamma_series(a, x)
    return 1.0 - _gamma_cf(a, x)


def gammainc_upper(a, x):
    """Regularized upper incomplete gamma ``Q(a, x) = 1 - P(a, x)``."""
    if a <= 0 or x < 0:
        raise InvalidArgument("need a > 0 and x >= 0")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _gamma_series(a, x)
    return _gamma_cf(a, x)


class Chi2:
    """Chi-square distribution with ``df`` degrees of freedom."""

    def __init__(self, df):
        if int(df) != df or df < 1:
            raise InvalidArgument(f"degrees of freedom must be a positive integer, got {df}")
        self.df = int(df)

    def cdf(self, x):
        if x < 0:
            raise InvalidArgument("chi-square cdf needs x >= 0")
        return gammainc_lower(self.df / 2.0, x / 2.0)

    def sf(self, x):
        if x < 0:
            raise InvalidArgument("chi-square sf needs x >= 0")
        return gammainc_upper(self.df / 2.0, x / 2.0)

    def quantile(self, p):
        if not 0.0 < p < 1.0:
            raise InvalidArgument("quantile level must lie in (0, 1)")
        hi = max(2.0 * self.df, 1.0)
        while self.cdf(hi) < p:
            hi *= 2.0
        return brentq(lambda x: self.cdf(x) - p, 0.0, hi, xtol=1e-12, rtol=1e-15, maxiter=500)

    def __repr__(self):
        return f"Chi2(df={self.df})"


def chi2(df):
    return Chi2(df)
