"""Independent reference implementations used only by the tests."""

import itertools
import math

import numpy as np
from scipy.special import ndtri


def pair_expectation(f, c11, c22, c12, h_scale=0.25, width=9.0):
    """E f(x1) f(x2) for a centered bivariate normal, by a tensor trapezoid
    rule in Cholesky coordinates x = L z."""
    l11 = math.sqrt(c11)
    l21 = c12 / l11 if l11 > 0 else 0.0
    l22 = math.sqrt(max(c22 - l21 * l21, 0.0))
    h = min(0.25, h_scale / max(l11, math.hypot(l21, l22), 1e-300))
    m = int(math.ceil(width / h))
    z = np.arange(-m, m + 1) * h
    w = np.exp(-0.5 * z * z)
    w /= w.sum()
    x1 = l11 * z[:, None] + 0.0 * z[None, :]
    x2 = l21 * z[:, None] + l22 * z[None, :]
    return float(w @ (f(x1) * f(x2)) @ w)


def covariance_map_generic(cov, rho, gamma, n, f=np.tanh):
    """Right-hand side of the K-group covariance equation:
    C'_ab = (gamma_a gamma_b)^-1 sum_{a'b'} B_aa' B_bb' E f(x_a') f(x_b'),
    with B = n diag(gamma) rho diag(gamma). The Gaussian normalization is
    the K-dimensional one, and each pair only needs its 2D marginal."""
    cov = np.asarray(cov, float)
    gamma = np.asarray(gamma, float)
    k = cov.shape[0]
    b = n * gamma[:, None] * np.asarray(rho, float) * gamma[None, :]
    g = np.empty((k, k))
    for a, c in itertools.product(range(k), repeat=2):
        g[a, c] = pair_expectation(f, cov[a, a], cov[c, c], cov[a, c])
    return (b @ g @ b.T) / np.outer(gamma, gamma)


def stratified_normal(n, gen):
    """One draw per equal-probability stratum of N(0, 1)."""
    u = (np.arange(n) + gen.random(n)) / n
    return ndtri(u)


def best_two_partition_inertia(x):
    """Global optimum of the 2-means objective by enumerating all splits."""
    n = x.shape[0]
    best = math.inf
    for mask in range(1, 2 ** (n - 1)):
        sel = np.array([(mask >> i) & 1 for i in range(n)], bool)
        a, b = x[sel], x[~sel]
        val = ((a - a.mean(0)) ** 2).sum() + ((b - b.mean(0)) ** 2).sum()
        best = min(best, val)
    return best
