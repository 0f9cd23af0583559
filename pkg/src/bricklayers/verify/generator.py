"""Cylinder test functions and exact generator evaluation."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import mpmath
import numpy as np

from ..dynamics import LatticeState, ProcessSpec, column_rates
from ..equilibrium import build_marginal
from ..rates import RateFunction, Regime, log_factorials

DEFAULT_STATE_CAP = 2_000_000


class StateSpaceTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class CylinderFunction:
    """``phi`` depending on sites ``support[0]..support[1]`` only.

    ``f`` is vectorised: it receives an integer array whose last axis runs
    over the support sites and returns an array of the leading shape.
    """

    support: tuple[int, int]
    f: Callable[[np.ndarray], np.ndarray]
    bound: float
    name: str = "phi"

    @property
    def width(self) -> int:
        return self.support[1] - self.support[0] + 1

    def on(self, omega: np.ndarray, lo: int) -> np.ndarray:
        """Evaluate on increments ``omega[..., k]`` at sites ``lo + k``."""
        a, b = self.support
        return np.asarray(self.f(omega[..., a - lo:b - lo + 1]), dtype=float)

    def __call__(self, state: LatticeState) -> float:
        return float(self.on(state.omega, state.lo))

    @classmethod
    def constant(cls, c: float, site: int = 0) -> "CylinderFunction":
        return cls((site, site), lambda w: np.full(w.shape[:-1], float(c)), abs(c), f"const({c})")

    @classmethod
    def indicator(cls, site: int, value: int) -> "CylinderFunction":
        return cls((site, site), lambda w: (w[..., 0] == value).astype(float), 1.0,
                   f"1{{w_{site}={value}}}")

    @classmethod
    def indicator_ge(cls, site: int, value: int) -> "CylinderFunction":
        return cls((site, site), lambda w: (w[..., 0] >= value).astype(float), 1.0,
                   f"1{{w_{site}>={value}}}")

    @classmethod
    def coordinate(cls, site: int) -> "CylinderFunction":
        return cls((site, site), lambda w: w[..., 0].astype(float), math.inf, f"w_{site}")

    @classmethod
    def abs_sum(cls, a: int, b: int) -> "CylinderFunction":
        return cls((a, b), lambda w: np.abs(w).sum(axis=-1).astype(float), math.inf, f"sum|w|[{a},{b}]")


def _columns_touching(phi: CylinderFunction) -> range:
    a, b = phi.support
    return range(a - 1, b + 1)


def _rate_arrays(rate: RateFunction, z: np.ndarray) -> np.ndarray:
    if not z.size:
        return z.astype(float)
    k = int(np.abs(z).max())
    table = np.array([float(rate(int(x))) for x in range(-k, k + 1)])
    return table[z + k]


def apply_generator(rate: RateFunction, kind: ProcessSpec | None, phi: CylinderFunction,
                    omega, lo: int | None = None) -> np.ndarray | float:
    """``(L phi)(omega)`` as an exact finite sum.

    ``kind=None`` is the infinite-volume generator; only columns touching the
    support contribute.  Otherwise the finite-volume rates of ``kind`` are
    used.  ``omega`` may be a :class:`LatticeState` or an array (last axis =
    sites from ``lo``), in which case the result is vectorised.
    """
    scalar = isinstance(omega, LatticeState)
    if scalar:
        lo = omega.lo
        om = omega.omega[None, :]
    else:
        om = np.asarray(omega, dtype=np.int64)
        if om.ndim == 1:
            om = om[None, :]
            scalar = True
    if kind is not None and kind.rate != rate:
        raise ValueError("kind carries a different rate function")
    base = phi.on(om, lo)
    total = np.zeros(om.shape[0])
    cols = _columns_touching(phi)
    for c in cols:
        k = c - lo
        if k < 0 or k + 1 >= om.shape[1]:
            raise ValueError(f"omega window does not cover column {c}")
        if kind is None:
            rt = _rate_arrays(rate, om[:, k]) + _rate_arrays(rate, -om[:, k + 1])
        else:
            rt = np.array([sum(column_rates(kind, row, lo, c, rate)) for row in om.tolist()])
        moved = om.copy()
        moved[:, k] -= 1
        moved[:, k + 1] += 1
        total += rt * (phi.on(moved, lo) - base)
    return float(total[0]) if scalar else total


@dataclass
class GeneratorResidual:
    residual: float
    M: int
    states: int
    tail_estimate: float | None
    precision: int | None


def _weights_float(rate, theta, M, zero_range):
    m = build_marginal(rate, theta)
    z = np.arange(0 if zero_range else -M, M + 1)
    lf = log_factorials(rate, M + 1)
    return z, np.exp(theta * z - lf[np.abs(z)] - m.log_Z)


def generator_mean_zero(rate: RateFunction, theta: float, left: int, right: int, phi: CylinderFunction,
                        M: int, precision: int | None = None, state_cap: int = DEFAULT_STATE_CAP,
                        with_tail: bool = True) -> GeneratorResidual:
    """``sum_omega mu(omega) (G phi)(omega)`` over ``|omega_i| <= M``, ``left <= i <= right``,
    for the boundary-driven generator ``G``; zero up to truncation when the
    product equilibrium is invariant.

    ``precision`` switches to mpmath arithmetic with that many digits.
    """
    a, b = phi.support
    if a < left or b > right:
        raise ValueError("phi must be supported inside [left, right]")
    zero_range = rate.regime is Regime.ZERO_RANGE
    n = right - left + 1
    per = M + 1 if zero_range else 2 * M + 1
    size = per ** n
    if size > state_cap:
        raise StateSpaceTooLarge(f"{size} states exceed the cap {state_cap}; use a smaller volume")
    spec = ProcessSpec.boundary(left, right, theta, rate)
    zs = np.arange(0 if zero_range else -M, M + 1)
    grid = np.array(list(itertools.product(zs, repeat=n)), dtype=np.int64).reshape(-1, n)
    # pad with the two boundary sites (never read by the rates)
    om = np.zeros((grid.shape[0], n + 2), dtype=np.int64)
    om[:, 1:-1] = grid
    lo = left - 1
    base = phi.on(om, lo)
    cols = list(spec.columns)
    if precision is None:
        _, w1 = _weights_float(rate, theta, M, zero_range)
        weight = np.prod(w1[grid - zs[0]], axis=1)
        total = 0.0
        r = {int(z): float(rate(int(z))) for z in range(-M - 1, M + 2)}
        vl, vr = spec.virtual_rates
        for c in cols:
            k = c - lo
            right_r = np.full(len(om), vl) if c == left - 1 else np.vectorize(r.get)(om[:, k])
            left_r = np.full(len(om), vr) if c == right else np.vectorize(r.get)(-om[:, k + 1])
            moved = om.copy()
            moved[:, k] -= 1
            moved[:, k + 1] += 1
            total += float(np.sum(weight * (right_r + left_r) * (phi.on(moved, lo) - base)))
        res = total
    else:
        res = float(_residual_mp(rate, theta, spec, phi, om, grid, zs, base, lo, precision))
    tail = None
    if with_tail and precision is None:
        marg = build_marginal(rate, theta)
        m_ref = marg.hi
        if m_ref <= M:
            # the box already holds all but the certified marginal tail
            tail = n * marg.tail_bound
        elif (m_ref + 1 if zero_range else 2 * m_ref + 1) ** n <= state_cap:
            ref = generator_mean_zero(rate, theta, left, right, phi, m_ref, None, state_cap, False)
            tail = abs(res - ref.residual)
    return GeneratorResidual(res, M, size, tail, precision)


def _residual_mp(rate, theta, spec, phi, om, grid, zs, base, lo, digits):
    with mpmath.workdps(digits):
        th = mpmath.mpf(theta)
        zr = rate.regime is Regime.ZERO_RANGE
        # normalising constant to well beyond the working precision
        logf = [mpmath.mpf(0)]
        n = 1
        while True:
            logf.append(logf[-1] + mpmath.log(rate.mp(n)))
            n += 1
            if n > 8 and -(logf[-1]) + abs(th) * n < -digits * 2.4:
                break
        K = len(logf) - 1
        Z = mpmath.fsum(mpmath.exp(th * z - logf[abs(z)]) for z in range(0 if zr else -K, K + 1))
        mu = {int(z): mpmath.exp(th * int(z) - logf[abs(int(z))]) / Z for z in zs}
        rr = {}

        def r(z):
            if z not in rr:
                rr[z] = rate.mp(z)
            return rr[z]
        vl = mpmath.exp(th)
        vr = mpmath.mpf(0) if zr else mpmath.exp(-th)
        left, right = spec.left, spec.right
        deltas = {}
        for c in spec.columns:
            k = c - lo
            moved = om.copy()
            moved[:, k] -= 1
            moved[:, k + 1] += 1
            deltas[c] = phi.on(moved, lo) - base
        total = mpmath.mpf(0)
        rows = grid.tolist()
        omr = om.tolist()
        for idx, row in enumerate(rows):
            w = mpmath.mpf(1)
            for z in row:
                w *= mu[z]
            g = mpmath.mpf(0)
            o = omr[idx]
            for c in spec.columns:
                dphi = deltas[c][idx]
                if dphi == 0:
                    continue
                k = c - lo
                a = vl if c == left - 1 else r(o[k])
                bb = vr if c == right else r(-o[k + 1])
                g += (a + bb) * mpmath.mpf(float(dphi))
            total += w * g
        return total
