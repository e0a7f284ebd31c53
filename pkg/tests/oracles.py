"""Independent reference computations used by the test-suite.

Nothing here imports the code under test.
"""

import math

import mpmath
import numpy as np


def rtn_kernel_mp(t, gamma, dps=30):
    """Literal cosh/sinh formula in multiprecision arithmetic."""
    with mpmath.workdps(dps):
        t, g = mpmath.mpf(t), mpmath.mpf(gamma)
        d = mpmath.sqrt(g * g - 4)
        if d == 0:
            return float(mpmath.exp(-g * t) * (1 + g * t))
        return float(mpmath.re(mpmath.exp(-g * t) * (mpmath.cosh(d * t) + g / d * mpmath.sinh(d * t))))


def rtn_kernel_complex(t, gamma):
    """G(t, gamma) from the roots of r^2 + 2 gamma r + 4 = 0, in complex arithmetic.

    Nodes within 1e-3 of the critical rate gamma = 2 lose digits to the
    1/delta factor and are recomputed with :func:`rtn_kernel_mp`.
    """
    gamma_r = np.atleast_1d(np.asarray(gamma, dtype=float))
    gc = gamma_r.astype(complex)
    delta = np.sqrt(gc * gc - 4.0)
    rp, rm = -gc + delta, -gc - delta
    with np.errstate(invalid="ignore", divide="ignore"):
        g = ((rp * np.exp(rm * t) - rm * np.exp(rp * t)) / (rp - rm)).real
    for i in np.flatnonzero(np.abs(gamma_r - 2.0) < 1e-3):
        g[i] = rtn_kernel_mp(t, gamma_r[i])
    return g if np.ndim(gamma) else float(g[0])


def color_weight_literal(gamma, alpha, g1, g2):
    if alpha == 1:
        return 1.0 / (gamma * math.log(g2 / g1))
    return (alpha - 1) / gamma**alpha * ((g1 * g2) ** (alpha - 1) / (g2 ** (alpha - 1) - g1 ** (alpha - 1)))


def simpson(y, h):
    n = len(y) - 1
    assert n % 2 == 0
    return h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())


class SimpsonLambda:
    """Composite Simpson on a uniform log-rate grid with ``n`` intervals."""

    def __init__(self, g1=1e-4, g2=1e4, n=10**6):
        a, b = math.log(g1), math.log(g2)
        self.u = np.linspace(a, b, n + 1)
        # u[1] - u[0] would carry a ~1e-11 relative cancellation error
        self.h = (b - a) / n
        self.gamma = np.exp(self.u)
        self.g1, self.g2 = g1, g2

    def __call__(self, t, alpha):
        if t == 0:
            return 1.0
        w = color_weight_literal(self.gamma, alpha, self.g1, self.g2) * self.gamma
        return simpson(rtn_kernel_complex(t, self.gamma) * w, self.h)


def gamma_series(x, n_terms=200):
    """Gamma via the Weierstrass product, valid for any non-pole x (slow, independent)."""
    euler = 0.57721566490153286061
    # log|Gamma| = -euler x - log|x| + sum_k [x/k - log|1 + x/k|]
    k = np.arange(1, 2_000_001, dtype=float)
    s = np.sum(x / k - np.log1p(x / k))
    # tail correction for the truncated sum: sum_{k>K} (x^2 / 2k^2) ~ x^2 / (2K)
    s += x * x / (2 * k[-1])
    val = math.exp(-euler * x + s) / abs(x)
    sign = 1.0
    if x < 0:
        sign = (-1.0) ** (math.floor(-x) + 1)
    return sign * val
