"""Single-site equilibrium marginals ``mu^theta(z) ~ exp(theta z) / r(|z|)!``.

Marginals are truncated to a finite support chosen so that a certified
geometric bound on the discarded mass is below ``tol``.  Sampling is by
inverse CDF with the uniform passed in by the caller, which makes the
common-uniform monotone coupling of two marginals automatic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .rates import RateFunction, Regime, log_factorials

DEFAULT_TOL = 1e-12
DEFAULT_SUPPORT_CAP = 1 << 14


class DivergentSeriesError(ValueError):
    """The normalising series Z(theta) diverges."""


class DominationError(RuntimeError):
    """Two marginals expected to be stochastically ordered are not."""


@dataclass(frozen=True, eq=False)
class Marginal:
    theta: float
    rate: RateFunction
    lo: int
    hi: int
    log_weights: np.ndarray = field(repr=False)
    log_Z: float
    tail_bound: float

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    @cached_property
    def pmf(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_Z)

    @cached_property
    def cdf(self) -> np.ndarray:
        c = np.cumsum(self.pmf)
        c /= c[-1]
        c[-1] = 1.0
        return c

    @property
    def Z(self) -> float:
        return math.exp(self.log_Z)

    def prob(self, z: int) -> float:
        z = int(z)
        if z < self.lo or z > self.hi:
            return 0.0
        return float(self.pmf[z - self.lo])

    def cdf_at(self, z) -> np.ndarray:
        """P(X <= z), vectorised, valid outside the support."""
        z = np.asarray(z)
        idx = np.clip(z - self.lo, -1, self.hi - self.lo)
        out = np.where(idx < 0, 0.0, self.cdf[np.maximum(idx, 0)])
        return out

    def expect(self, f: Callable[[np.ndarray], np.ndarray]) -> float:
        return float(np.sum(f(self.support) * self.pmf))

    def to_text(self) -> str:
        return "".join(f"{z} {p:.17g}\n" for z, p in zip(self.support, self.pmf))


def _log_weights(rate: RateFunction, theta: float, lo: int, hi: int, lf: np.ndarray) -> np.ndarray:
    z = np.arange(lo, hi + 1)
    return theta * z - lf[np.abs(z)]


def build_marginal(rate: RateFunction, theta: float, tol: float = DEFAULT_TOL,
                   support_cap: int = DEFAULT_SUPPORT_CAP, min_support: int = 0) -> Marginal:
    """Truncated equilibrium marginal with certified relative tail mass below ``tol``.

    ``min_support`` forces the support out to at least ``|z| <= min_support``;
    marginals that are sampled with common uniforms need a common support,
    otherwise the ordering can fail on the discarded tails.
    """
    theta = float(theta)
    zero_range = rate.regime is Regime.ZERO_RANGE
    if not rate.divergent and math.exp(theta) >= rate.sup:
        raise DivergentSeriesError(
            f"Z(theta) diverges: e^theta = {math.exp(theta):g} >= sup r = {rate.sup:g}")
    M = 8
    while M < min_support:
        M *= 2
    while True:
        if M > support_cap:
            raise DivergentSeriesError(
                f"tail bound not certified below {tol:g} within support cap {support_cap}")
        lf = log_factorials(rate, M + 1)
        lo = 0 if zero_range else -M
        lw = _log_weights(rate, theta, lo, M, lf)
        log_z = float(logsumexp(lw))
        r_next = rate(M + 1)
        tail = 0.0
        ok = True
        # bound the mass of {|z| >= M}: edge point plus a geometric majorant beyond it
        for sign, edge in ((1, lw[-1]), (-1, lw[0])):
            if sign == -1 and zero_range:
                continue
            q = math.exp(sign * theta) / r_next
            if q >= 1.0:
                ok = False
                break
            tail += math.exp(edge - log_z) / (1.0 - q)
        if ok and tail < tol:
            return Marginal(theta, rate, lo, M, lw, log_z, tail)
        M *= 2


def mean_density(m: Marginal) -> float:
    return float(np.sum(m.support * m.pmf))


def variance(m: Marginal) -> float:
    mu = mean_density(m)
    return float(np.sum((m.support - mu) ** 2 * m.pmf))


def mean_rates(m: Marginal) -> tuple[float, float]:
    """``(E r(omega), E r(-omega))``; analytically ``(e^theta, e^-theta)`` for bricklayers."""
    z = m.support
    lp = m.log_weights - m.log_Z
    right = float(np.sum(np.exp(m.rate.log_rates(z) + lp)))
    left = float(np.sum(np.exp(m.rate.log_rates(-z) + lp)))
    return right, left


def exponential_moment(m: Marginal, c: float) -> tuple[float, int, bool]:
    """Truncated ``E e^{c|z|}``, the index past which terms decay, and whether they do.

    Terms ``e^{c|z|} mu(z)`` shrink by the factor ``e^{c +- theta} / r(|z|+1)``
    per step outward, so they decay monotonically once ``r(|z|+1)`` exceeds
    ``e^{c + |theta|}``.
    """
    z = m.support
    terms = np.exp(c * np.abs(z) + m.log_weights - m.log_Z)
    thresh = math.exp(c + abs(m.theta))
    z_star = 0
    while m.rate(z_star + 1) <= thresh:
        z_star += 1
        if z_star > m.hi:
            return float(terms.sum()), z_star, False
    pos = terms[z >= z_star]
    neg = terms[z <= -z_star][::-1]
    decays = bool(np.all(np.diff(pos) < 0) and np.all(np.diff(neg) < 0))
    return float(terms.sum()), z_star, decays


def attainable_density(rate: RateFunction) -> tuple[float, float]:
    if rate.regime is Regime.ZERO_RANGE:
        return 0.0, math.inf
    return -math.inf, math.inf


def invert_density(rate: RateFunction, rho: float, tol: float = 1e-8,
                   marginal_tol: float = DEFAULT_TOL) -> float:
    """theta with ``|mean_density(theta) - rho| < tol``, by bracketed bisection."""
    lo_rho, hi_rho = attainable_density(rate)
    if not lo_rho < rho < hi_rho:
        raise ValueError(f"density {rho} outside attainable range ({lo_rho}, {hi_rho})")

    def dens(theta):
        return mean_density(build_marginal(rate, theta, marginal_tol))

    theta_max = math.inf if rate.divergent else math.log(rate.sup)
    lo, hi = -1.0, min(1.0, theta_max - 0.5)
    while dens(lo) >= rho:
        lo = 2 * lo if lo < 0 else lo - 1.0
        if lo < -1e6:
            raise ValueError(f"could not bracket density {rho} from below")
    gap = theta_max - hi
    while dens(hi) <= rho:
        if math.isinf(theta_max):
            hi = 2 * hi if hi > 0 else hi + 1.0
        else:
            gap /= 2
            hi = theta_max - gap
            if gap < 1e-12:
                raise ValueError(f"could not bracket density {rho} from above")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        d = dens(mid)
        if abs(d - rho) < tol:
            return mid
        if d < rho:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(mid)):
            break
    return 0.5 * (lo + hi)


def sample_marginal(m: Marginal, u):
    """Inverse-CDF sample; scalar in, int out, array in, array out."""
    idx = np.searchsorted(m.cdf, u, side="left")
    idx = np.minimum(idx, m.hi - m.lo)
    out = idx + m.lo
    if np.ndim(out) == 0:
        return int(out)
    return out.astype(np.int64)


def check_domination(m1: Marginal, m2: Marginal, slack: float = 1e-12) -> None:
    """Raise unless ``m1 <= m2`` stochastically (CDF of m1 above CDF of m2 everywhere)."""
    zs = np.arange(min(m1.lo, m2.lo), max(m1.hi, m2.hi) + 1)
    c1, c2 = m1.cdf_at(zs), m2.cdf_at(zs)
    bad = np.nonzero(c1 < c2 - slack)[0]
    if bad.size:
        z = int(zs[bad[0]])
        raise DominationError(f"CDF ordering violated at z={z}: {c1[bad[0]]} < {c2[bad[0]]}")


def common_support(*ms: Marginal) -> tuple[Marginal, ...]:
    """The same marginals rebuilt, where needed, on the widest of their supports."""
    M = max(m.hi for m in ms)
    return tuple(m if m.hi == M else build_marginal(m.rate, m.theta, min_support=M) for m in ms)


def monotone_coupled_sample(m1: Marginal, m2: Marginal, u):
    """Common-uniform pair ``(z1, z2)`` with ``z1 <= z2``."""
    if m1.rate != m2.rate:
        raise ValueError("monotone coupling needs a common rate function")
    if m1.theta > m2.theta:
        raise ValueError(f"need theta1 <= theta2, got {m1.theta} > {m2.theta}")
    m1, m2 = common_support(m1, m2)
    z1, z2 = sample_marginal(m1, u), sample_marginal(m2, u)
    if np.any(np.asarray(z1) > np.asarray(z2)):
        raise DominationError("monotone coupling produced z1 > z2")
    return z1, z2


@dataclass
class GoodMeasureSpec:
    """Product law sandwiched between ``mu^theta1`` and ``mu^theta2`` site by site.

    ``profile`` maps a site to the theta of its marginal.
    """

    rate: RateFunction
    theta1: float
    theta2: float
    profile: Callable[[int], float]
    tol: float = DEFAULT_TOL
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self.theta1 <= self.theta2:
            raise ValueError(f"need theta1 <= theta2, got {self.theta1}, {self.theta2}")

    @classmethod
    def product(cls, rate, theta1, theta2, theta=None, **kw) -> "GoodMeasureSpec":
        theta = theta1 if theta is None else theta
        return cls(rate, theta1, theta2, lambda i, _t=theta: _t, **kw)

    @classmethod
    def step(cls, rate, theta1, theta2, **kw) -> "GoodMeasureSpec":
        """``mu^theta2`` on sites ``i <= 0`` and ``mu^theta1`` on ``i >= 1``."""
        return cls(rate, theta1, theta2, lambda i: theta2 if i <= 0 else theta1, **kw)

    def marginal(self, theta: float) -> Marginal:
        if theta not in self._cache:
            if "support" not in self._cache:
                self._cache["support"] = max(build_marginal(self.rate, t, self.tol).hi
                                             for t in (self.theta1, self.theta2))
            self._cache[theta] = build_marginal(self.rate, theta, self.tol,
                                                min_support=self._cache["support"])
        return self._cache[theta]

    @property
    def lower(self) -> Marginal:
        return self.marginal(self.theta1)

    @property
    def upper(self) -> Marginal:
        return self.marginal(self.theta2)

    def at(self, site: int) -> Marginal:
        return self.marginal(self.profile(site))

    def certify(self, sites) -> None:
        for th in sorted({self.profile(i) for i in sites}):
            m = self.marginal(th)
            check_domination(self.lower, m)
            check_domination(m, self.upper)


def sample_good_measure(spec: GoodMeasureSpec, sites: tuple[int, int], seed=None, rng=None):
    """Per-site common-uniform triple ``(eta, zeta, xi)`` over inclusive ``sites``."""
    lo, hi = sites
    idx = range(lo, hi + 1)
    spec.certify(idx)
    rng = np.random.default_rng(seed) if rng is None else rng
    u = rng.random(hi - lo + 1)
    eta = sample_marginal(spec.lower, u)
    xi = sample_marginal(spec.upper, u)
    zeta = np.array([sample_marginal(spec.at(i), u[k]) for k, i in enumerate(idx)], dtype=np.int64)
    if np.any(eta > zeta) or np.any(zeta > xi):
        raise DominationError("good-measure sandwich violated")
    return eta, zeta, xi


def sample_profile(spec: GoodMeasureSpec, sites: tuple[int, int], u: np.ndarray) -> np.ndarray:
    """Vectorised zeta-sample for a batch of uniforms ``u`` of shape (..., n_sites)."""
    lo, hi = sites
    out = np.empty(u.shape, dtype=np.int64)
    for k, i in enumerate(range(lo, hi + 1)):
        out[..., k] = sample_marginal(spec.at(i), u[..., k])
    return out
