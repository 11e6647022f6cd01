"""Mean-field covariance equation for the untrained tanh GNN on the
symmetric two-group SBM.

With two equal groups the group-state covariance is parametrized by the
within-group second moment ``c11`` and the between-group one ``c12``.
Stationarity of the layer map requires

    c11 = 1/4 [(c_in^2 + c_out^2) g_d + 2 c_in c_out g_o]
    c12 = 1/4 [2 c_in c_out g_d + (c_in^2 + c_out^2) g_o]

with ``g_d = E[tanh(x1)^2]`` and ``g_o = E[tanh(x1) tanh(x2)]`` under the
covariance ``[[c11, c12], [c12, c11]]``. The groups are indistinguishable
when ``c11 == c12``; the boundary ``eps*(c)`` separates parameters where
this symmetric solution attracts the iteration from those where a
solution with ``c11 > c12`` takes over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

DETECT_THRESHOLD = 1e-6


@dataclass(frozen=True)
class Covariance2:
    c11: float
    c12: float

    @property
    def gap(self) -> float:
        return self.c11 - self.c12

    @property
    def rel_gap(self) -> float:
        return self.gap / self.c11 if self.c11 > 0 else 0.0


@dataclass(frozen=True)
class BlockAffinity:
    c_in: float
    c_out: float

    @classmethod
    def from_degree_eps(cls, c: float, eps: float) -> "BlockAffinity":
        c_in = 2.0 * c / (1.0 + eps)
        return cls(c_in, eps * c_in)

    @property
    def matrix(self) -> np.ndarray:
        """``B[s, s'] = N gamma_s rho_ss' gamma_s'`` for gamma = 1/2."""
        return np.array([[self.c_in, self.c_out], [self.c_out, self.c_in]]) / 4.0


@dataclass(frozen=True)
class QuadratureSpec:
    """Gaussian expectations of tanh products.

    ``trapezoid`` integrates in the rotated coordinates ``(x1 + x2)/2`` and
    ``(x1 - x2)/2``, which are independent, with a uniform grid of spacing
    ``min(step, sd/2)`` over ``+-width`` standard deviations. The integrand
    is analytic in a strip of half-width pi/2, so the rule converges
    geometrically regardless of how the variance compares to the scale of
    tanh. ``gauss-hermite`` uses ``nodes`` Hermite nodes per dimension on
    the same coordinates; it needs many nodes once the variance is large.
    """

    scheme: str = "trapezoid"
    step: float = 0.25
    width: float = 9.0
    nodes: int = 96

    def refined(self) -> "QuadratureSpec":
        return replace(self, step=self.step / 2, nodes=self.nodes * 2)

    def rule(self, sd: float) -> tuple[np.ndarray, np.ndarray]:
        """Nodes and normalized weights for ``E f(x)``, ``x ~ N(0, sd^2)``."""
        if sd <= 0.0:
            return np.zeros(1), np.ones(1)
        if self.scheme == "trapezoid":
            h = min(self.step, sd / 2.0)
            m = int(math.ceil(self.width * sd / h))
            x = np.arange(-m, m + 1) * h
            w = np.exp(-0.5 * (x / sd) ** 2)
        elif self.scheme == "gauss-hermite":
            z, w = np.polynomial.hermite_e.hermegauss(self.nodes)
            x = sd * z
        else:
            raise ValueError(f"unknown quadrature scheme {self.scheme!r}")
        return x, w / w.sum()


@dataclass(frozen=True)
class MeanFieldSolution:
    cov: Covariance2
    iterations: int
    converged: bool
    gaps: np.ndarray = field(repr=False)  # gap after every iteration

    @property
    def gap(self) -> float:
        return self.cov.gap

    @property
    def rel_gap(self) -> float:
        return self.cov.rel_gap

    @property
    def detectable(self) -> bool:
        return self.rel_gap > DETECT_THRESHOLD


class NoTransitionError(ValueError):
    pass


def _tanh_prime_sq(x):
    return (1.0 - np.tanh(x) ** 2) ** 2


def gaussian_expectation(f, variance: float, q: QuadratureSpec = QuadratureSpec()) -> float:
    """``E f(x)`` for ``x ~ N(0, variance)``."""
    x, w = q.rule(math.sqrt(max(variance, 0.0)))
    return float(np.dot(w, f(x)))


def gaussian_phi_moments(cov: Covariance2, q: QuadratureSpec = QuadratureSpec()) -> tuple[float, float]:
    """``(E tanh(x1)^2, E tanh(x1) tanh(x2))`` for the symmetric 2x2 covariance."""
    c11, c12 = cov.c11, cov.c12
    if c11 < 0 or abs(c12) > c11 * (1 + 1e-12) + 1e-300:
        raise ValueError(f"covariance ({c11}, {c12}) is not positive semidefinite")
    if c11 == 0.0:
        return 0.0, 0.0
    s, ws = q.rule(math.sqrt(max(0.5 * (c11 + c12), 0.0)))
    d, wd = q.rule(math.sqrt(max(0.5 * (c11 - c12), 0.0)))
    a = np.tanh(s[:, None] + d[None, :])
    b = np.tanh(s[:, None] - d[None, :])
    g_d = ws @ (0.5 * (a * a + b * b)) @ wd
    # odd integrand: uncorrelated coordinates give exactly zero
    g_o = 0.0 if c12 == 0.0 else ws @ (a * b) @ wd
    return float(g_d), float(g_o)


def sc_map(cov: Covariance2, b: BlockAffinity, q: QuadratureSpec = QuadratureSpec()) -> Covariance2:
    g_d, g_o = gaussian_phi_moments(cov, q)
    same = b.c_in**2 + b.c_out**2
    cross = 2.0 * b.c_in * b.c_out
    return Covariance2(0.25 * (same * g_d + cross * g_o), 0.25 * (cross * g_d + same * g_o))


@lru_cache(maxsize=256)
def undetectable_fixed_point(c: float, q: QuadratureSpec = QuadratureSpec(),
                             tol: float = 1e-14, max_iter: int = 100_000) -> float:
    """Variance ``C`` of the indistinguishable-groups solution,
    ``C = c^2 E[tanh(x)^2]`` with ``x ~ N(0, C)``."""
    if not c > 1.0:
        raise ValueError(f"need c > 1, got {c}")
    f = lambda x: np.tanh(x) ** 2
    scale = c * c
    var = scale
    for _ in range(max_iter):
        nxt = scale * gaussian_expectation(f, var, q)
        if abs(nxt - var) <= tol * nxt:
            return nxt
        var = nxt
    return var


def solve_fixed_point(c: float, eps: float, q: QuadratureSpec = QuadratureSpec(),
                      tol: float = 1e-10, max_iter: int = 10_000, damping: float = 0.5,
                      init: Covariance2 | None = None) -> MeanFieldSolution:
    """Damped iteration of :func:`sc_map` started just off the symmetric
    solution, ``(1.01 C*, 0.99 C*)``, unless ``init`` is given."""
    if not c > 1.0:
        raise ValueError(f"need c > 1, got {c}")
    if not 0.0 <= eps <= 1.0:
        raise ValueError(f"eps must lie in [0, 1], got {eps}")
    b = BlockAffinity.from_degree_eps(c, eps)
    if init is None:
        star = undetectable_fixed_point(c, q)
        init = Covariance2(1.01 * star, 0.99 * star)
    cur = init
    gaps = []
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new = sc_map(cur, b, q)
        new = Covariance2((1 - damping) * cur.c11 + damping * new.c11,
                          (1 - damping) * cur.c12 + damping * new.c12)
        change = max(abs(new.c11 - cur.c11), abs(new.c12 - cur.c12)) / abs(new.c11)
        cur = new
        gaps.append(cur.gap)
        if change < tol:
            converged = True
            break
    return MeanFieldSolution(cur, it, converged, np.asarray(gaps))


def stability_eigenvalue(c: float, eps: float, q: QuadratureSpec = QuadratureSpec(),
                         c_star: float | None = None) -> float:
    """Per-step gain of a small gap at the symmetric solution:
    ``((c_in - c_out)/2)^2 E[tanh'(x)^2]``, ``x ~ N(0, C*)``."""
    if c_star is None:
        c_star = undetectable_fixed_point(c, q)
    b = BlockAffinity.from_degree_eps(c, eps)
    return 0.25 * (b.c_in - b.c_out) ** 2 * gaussian_expectation(_tanh_prime_sq, c_star, q)


def linear_stability_eps(c: float, q: QuadratureSpec = QuadratureSpec()) -> float:
    """Root of ``stability_eigenvalue(c, eps) = 1`` in eps.

    Since ``(c_in - c_out)/2 = c (1 - eps)/(1 + eps)``, the root is
    ``(c r - 1)/(c r + 1)`` with ``r = sqrt(E[tanh'(x)^2])``.
    """
    c_star = undetectable_fixed_point(c, q)
    r = math.sqrt(gaussian_expectation(_tanh_prime_sq, c_star, q))
    if c * r <= 1.0:
        raise NoTransitionError(f"symmetric solution is stable for every eps at c = {c}")
    return (c * r - 1.0) / (c * r + 1.0)


def critical_eps(c: float, q: QuadratureSpec = QuadratureSpec(), tol_eps: float = 1e-3,
                 **solver) -> float:
    """Bisection on eps for the largest value with a surviving gap."""
    def detectable(eps):
        return solve_fixed_point(c, eps, q, **solver).detectable

    lo, hi = 0.0, 1.0
    if not detectable(lo) or detectable(hi):
        raise NoTransitionError(f"no detectability transition in [0, 1] at c = {c}")
    while hi - lo > tol_eps:
        mid = 0.5 * (lo + hi)
        if detectable(mid):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def boundary_table(c_values, q: QuadratureSpec = QuadratureSpec(), tol_eps: float = 1e-3):
    """Rows ``(c, eps_star, eps_it)``; eps_star is nan where no transition exists."""
    from .sbm import it_detectability_limit

    rows = []
    for c in c_values:
        try:
            e = critical_eps(float(c), q, tol_eps)
        except NoTransitionError:
            e = math.nan
        rows.append((float(c), e, it_detectability_limit(float(c))))
    return rows
