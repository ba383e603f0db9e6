"""Independent reference computations used by the tests.

None of these import the package's numerical routines; they take a
different (slower, more literal) route to each quantity.
"""
import math

import numpy as np
from scipy import integrate, optimize, stats


def bl_lp_full(atoms_a, masses_a, atoms_b, masses_b):
    """Bounded Lipschitz LP with every pairwise Lipschitz constraint (HiGHS)."""
    x = np.union1d(atoms_a, atoms_b)
    c = np.zeros(x.size)
    c[np.searchsorted(x, atoms_a)] += masses_a
    c[np.searchsorted(x, atoms_b)] -= masses_b
    rows, rhs = [], []
    for i in range(x.size):
        for j in range(i + 1, x.size):
            r = np.zeros(x.size)
            r[i], r[j] = 1.0, -1.0
            rows += [r, -r]
            rhs += [x[j] - x[i]] * 2
    res = optimize.linprog(
        -c,
        A_ub=np.array(rows) if rows else None,
        b_ub=np.array(rhs) if rhs else None,
        bounds=[(-1, 1)] * x.size,
        method="highs",
    )
    return -res.fun


def avar_resample(sample, alpha):
    """Lower-tail average of a sorted sample by explicit quantile integration."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    # integrate the quantile function over (0, alpha) piece by piece
    total, p = 0.0, 0.0
    for i in range(n):
        hi = min((i + 1) / n, alpha)
        if hi > p:
            total += (hi - p) * x[i]
            p = hi
        if p >= alpha:
            break
    return -total / alpha


def riemann_bridge_variance(alpha, cells=1000):
    """Midpoint rule on a cells x cells grid for U(0,1) and g = AVaR(alpha)."""
    s = (np.arange(cells) + 0.5) / cells
    d = np.where(s < alpha, 1.0 / alpha, 0.0)
    total = 0.0
    for i in range(cells):
        cov = np.minimum(s[i], s) - s[i] * s
        total += d[i] * np.dot(d, cov)
    return total / cells**2


def arcsine_ar1_at_zero(rho, K=200):
    """Long-run covariance at t = 0 via the orthant law Phi2(0,0;r) = 1/4 + asin(r)/(2 pi)."""
    return 0.25 + 2.0 * sum(math.asin(rho ** (k - 1)) / (2 * math.pi) for k in range(2, K + 1))


def bvn_quad(h, k, r):
    """P(Z1 <= h, Z2 <= k) by conditioning on Z1."""
    f = lambda z: stats.norm.pdf(z) * stats.norm.cdf((k - r * z) / math.sqrt(1 - r * r))
    return integrate.quad(f, -np.inf, h, epsabs=1e-14, epsrel=1e-13)[0]


def avar_influence_variance_normal(alpha):
    """Var((q - X)_+) / alpha^2 for X ~ N(0, 1), q the alpha-quantile."""
    q = stats.norm.ppf(alpha)
    m1 = integrate.quad(lambda x: (q - x) * stats.norm.pdf(x), -np.inf, q, epsabs=1e-14)[0]
    m2 = integrate.quad(lambda x: (q - x) ** 2 * stats.norm.pdf(x), -np.inf, q, epsabs=1e-14)[0]
    return (m2 - m1 * m1) / alpha**2


def avar_normal_closed_form(alpha):
    q = stats.norm.ppf(alpha)
    return stats.norm.pdf(q) / alpha


def ks_vs_uniform(sample, a, b):
    """sup |F_n - F| against U(a, b) from the order statistics."""
    x = np.sort(sample)
    n = x.size
    F = np.clip((x - a) / (b - a), 0, 1)
    return max(np.max(np.arange(1, n + 1) / n - F), np.max(F - np.arange(n) / n))
