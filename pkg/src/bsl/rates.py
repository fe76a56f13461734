"""Large-deviation quantities for the labels and the explicit inequality bounds.

Bernoulli closed forms live next to a generic finite-support law whose
cumulant generating function is evaluated by log-sum-exp; the two routes are
cross-checked in the tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

LOG2 = math.log(2.0)

_BISECT_ITERS = 200
_BISECT_TOL = 1e-12


class BoundNotApplicable(ValueError):
    """The hypotheses of an inequality do not hold for the requested arguments."""


def _xlogy_ratio(x: float, num: float, den: float) -> float:
    # x * log(num / den) with the convention 0 * log(. / 0) = 0
    if x == 0.0:
        return 0.0
    return x * (math.log(num) - math.log(den))


def entropy_rate(p: float, q: float) -> float:
    """H(p, q) = q log(p/q) + (1-q) log((1-p)/(1-q)); non-positive, zero iff q = p."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")
    return _xlogy_ratio(q, p, q) + _xlogy_ratio(1.0 - q, 1.0 - p, 1.0 - q)


def critical_slope(p: float) -> float:
    """c(p): the root of H(p, c) + log 2 = 0 on (p, 1], by bisection."""
    if not 0.0 < p <= 0.5:
        raise ValueError(f"p must lie in (0, 1/2], got {p}")
    if p == 0.5:
        return 1.0
    lo, hi = p + 1e-9, 1.0 - 1e-15
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if entropy_rate(p, mid) + LOG2 > 0.0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= _BISECT_TOL:
            break
    return 0.5 * (lo + hi)


def search_slope(p: float) -> float:
    """c(p) extended to the degenerate test laws used by the search code.

    For p >= 1/2 the all-ones subtree is a (super)critical branching process,
    so the best linear growth rate is 1; for p = 0 every sum is 0.
    """
    if p <= 0.0:
        return 0.0
    if p >= 0.5:
        return 1.0
    return critical_slope(p)


def bernoulli_cgf(p: float, t: float) -> float:
    """phi(t) = log(1 - p + p e^t)."""
    return float(np.logaddexp(math.log1p(-p), math.log(p) + t))


def tilted_mean(p: float, lam: float) -> float:
    w = p * math.exp(lam)
    return w / (w + 1.0 - p)


def lambda_star(p: float, c: float) -> float:
    """Optimal tilt for a Bernoulli(p) law: log(c(1-p) / (p(1-c)))."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not p < c < 1.0:
        raise ValueError(f"need p < c < 1, got p={p}, c={c}")
    lam = math.log(c * (1.0 - p) / (p * (1.0 - c)))
    if abs(tilted_mean(p, lam) - c) > 1e-12:
        raise ArithmeticError(f"tilted mean mismatch at p={p}, c={c}")
    return lam


def rate(p: float, c: float) -> float:
    """phi(lambda*) - c lambda*, which equals H(p, c) for Bernoulli labels."""
    lam = lambda_star(p, c)
    return bernoulli_cgf(p, lam) - c * lam


def chernoff_tail_bound(p: float, c: float, n: int, beta: float) -> float:
    """exp(n H(p, c) - lambda*(c) beta), an upper bound on P(S_n >= cn + beta)."""
    if n < 0 or beta < 0:
        raise ValueError("need n >= 0 and beta >= 0")
    lam = lambda_star(p, c)
    return math.exp(n * entropy_rate(p, c) - lam * beta)


def p_crit() -> float:
    """The Bernoulli parameter with c(p) = 1/2, i.e. the root of 16 p (1 - p) = 1."""
    return (2.0 - math.sqrt(3.0)) / 4.0


def kappa(p0: float) -> float:
    if not 0.0 < p0 < 0.5:
        raise ValueError(f"p0 must lie in (0, 1/2), got {p0}")
    return math.pi * math.log(1.0 / (4.0 * p0)) / (4.0 * math.sqrt(1.0 - 2.0 * p0))


def confinement_bound(sigma2: float, L: float, N: int) -> float:
    """Upper bound on P(|S_1|, ..., |S_N| <= L) for a centred walk with steps bounded by 1."""
    if L < 1.0:
        raise BoundNotApplicable(f"need L >= 1, got {L}")
    if not 0.0 < sigma2 <= 1.0:
        raise BoundNotApplicable(f"need 0 < sigma2 <= 1, got {sigma2}")
    if not N > 9.0 * math.e * L * L / sigma2:
        raise BoundNotApplicable(
            f"need N > 9e L^2 / sigma2 = {9.0 * math.e * L * L / sigma2:.4g}, got N={N}"
        )
    return math.exp(-sigma2 * N / (36.0 * math.e * L * L))


def concentration_bound(alpha: float, beta: float, beta_prime: float, T: int) -> float:
    """Chebyshev-type bound alpha / ((beta' - beta)^2 T) on P(S_T > beta' T), capped at 1."""
    if not beta_prime > beta:
        raise BoundNotApplicable(f"need beta_prime > beta, got {beta_prime} <= {beta}")
    if alpha < 0 or T < 1:
        raise ValueError("need alpha >= 0 and T >= 1")
    return min(1.0, alpha / ((beta_prime - beta) ** 2 * T))


@dataclass(frozen=True)
class FiniteLaw:
    """A law with finitely many atoms ``(value, probability)``."""

    atoms: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("law needs at least one atom")
        probs = [w for _, w in self.atoms]
        if any(w <= 0 for w in probs):
            raise ValueError("atom probabilities must be positive")
        if abs(math.fsum(probs) - 1.0) > 1e-12:
            raise ValueError("atom probabilities must sum to 1")

    @classmethod
    def bernoulli(cls, p: float) -> FiniteLaw:
        return cls(((0.0, 1.0 - p), (1.0, p)))

    @property
    def values(self) -> np.ndarray:
        return np.array([x for x, _ in self.atoms])

    @property
    def log_weights(self) -> np.ndarray:
        return np.log([w for _, w in self.atoms])

    def mean(self) -> float:
        return math.fsum(x * w for x, w in self.atoms)

    def variance(self) -> float:
        m = self.mean()
        return math.fsum(w * (x - m) ** 2 for x, w in self.atoms)

    def ess_sup(self) -> float:
        return max(x for x, _ in self.atoms)

    def centered(self) -> FiniteLaw:
        m = self.mean()
        return FiniteLaw(tuple((x - m, w) for x, w in self.atoms))

    def cgf(self, t: float) -> float:
        return float(logsumexp(self.log_weights + t * self.values))

    def tilted_mean(self, t: float) -> float:
        a = self.log_weights + t * self.values
        w = np.exp(a - logsumexp(a))
        return float(np.dot(w, self.values))

    def lambda_star(self, c: float) -> float:
        """Solve tilted_mean(lambda) = c by bisection (the tilted mean is increasing)."""
        if not self.mean() < c < self.ess_sup():
            raise ValueError(f"c={c} must lie strictly between the mean and the ess. sup")
        lo, hi = 0.0, 1.0
        while self.tilted_mean(hi) < c:
            hi *= 2.0
            if hi > 1e6:
                raise ArithmeticError("tilt bracket diverged")
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if self.tilted_mean(mid) < c:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-15 * max(1.0, hi):
                break
        return 0.5 * (lo + hi)

    def rate(self, c: float) -> float:
        lam = self.lambda_star(c)
        return self.cgf(lam) - c * lam

    def critical_slope(self) -> float:
        """The c with rate(c) = -log 2, or the ess. sup when the top atom is already that likely."""
        top = self.ess_sup()
        p_top = math.fsum(w for x, w in self.atoms if x == top)
        if math.log(p_top) >= -LOG2:
            return top
        lo, hi = self.mean() + 1e-12, top - 1e-12
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (lo + hi)
            if self.rate(mid) + LOG2 > 0.0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= _BISECT_TOL:
                break
        return 0.5 * (lo + hi)
