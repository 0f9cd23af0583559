"""Jump-rate functions for the bricklayers' and totally asymmetric zero-range processes.

A rate function ``r`` maps an integer increment to a nonnegative jump rate.
Bricklayer ``i`` lays a brick to its right at rate ``r(omega_i)`` and to its
left at rate ``r(-omega_i)``.  For bricklayers the reciprocity
``r(z) * r(1 - z) == 1`` ties negative arguments to positive ones; in the
zero-range regime ``r`` vanishes on ``z <= 0``.

All factorial-type products are carried in log space: with exponential rates
``r(n)!`` grows like ``exp(beta n^2 / 2)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import mpmath
import numpy as np

DEFAULT_VALIDATION_RANGE = (-50, 50)


class RateTableError(ValueError):
    """Malformed rate table; ``index`` is the offending ``z``."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class Regime(str, enum.Enum):
    BRICKLAYERS = "bricklayers"
    ZERO_RANGE = "zero_range"


@dataclass(frozen=True)
class RateFunction:
    """Base class; subclasses supply ``_positive`` for ``z >= 1``."""

    regime: Regime
    beta_bound: float

    # -- family hooks -------------------------------------------------
    def _positive(self, z: int) -> float:
        raise NotImplementedError

    def _positive_mp(self, z: int):
        return mpmath.mpf(self._positive(z))

    def _explicit(self, z: int) -> float | None:
        """Explicitly declared value at ``z`` overriding the regime rule."""
        return None

    # -- public -------------------------------------------------------
    @property
    def name(self) -> str:
        return type(self).__name__

    @property
    def sup(self) -> float:
        """Supremum of the rate; ``inf`` for unbounded families."""
        return math.inf

    @property
    def divergent(self) -> bool:
        return math.isinf(self.sup)

    def __call__(self, z: int) -> float:
        z = int(z)
        v = self._explicit(z)
        if v is not None:
            return v
        if z >= 1:
            return self._positive(z)
        if self.regime is Regime.ZERO_RANGE:
            return 0.0
        return 1.0 / self(1 - z)

    def mp(self, z: int):
        """Rate as an mpmath number, for high-precision oracles."""
        z = int(z)
        v = self._explicit(z)
        if v is not None:
            return mpmath.mpf(v)
        if z >= 1:
            return self._positive_mp(z)
        if self.regime is Regime.ZERO_RANGE:
            return mpmath.mpf(0)
        return 1 / self.mp(1 - z)

    def log_rate(self, z: int) -> float:
        v = self(z)
        return math.log(v) if v > 0 else -math.inf

    def log_rates(self, zs) -> np.ndarray:
        return np.array([self.log_rate(int(z)) for z in zs], dtype=float)

    def rates(self, zs) -> np.ndarray:
        return np.array([self(int(z)) for z in zs], dtype=float)

    def to_config(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class ExponentialBricklayers(RateFunction):
    """``r(z) = exp(beta (z - 1/2))``; reciprocity holds identically."""

    beta: float = 1.0
    regime: Regime = field(default=Regime.BRICKLAYERS, init=False)
    beta_bound: float = field(default=0.0, init=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "beta_bound", float(self.beta))

    def __call__(self, z: int) -> float:
        return math.exp(self.beta * (int(z) - 0.5))

    def _positive(self, z: int) -> float:
        return math.exp(self.beta * (z - 0.5))

    def _positive_mp(self, z: int):
        return mpmath.exp(mpmath.mpf(self.beta) * (z - mpmath.mpf(1) / 2))

    def mp(self, z: int):
        return self._positive_mp(int(z))

    def log_rate(self, z: int) -> float:
        return self.beta * (int(z) - 0.5)

    def log_rates(self, zs) -> np.ndarray:
        return self.beta * (np.asarray(zs, dtype=float) - 0.5)

    def rates(self, zs) -> np.ndarray:
        return np.exp(self.log_rates(zs))

    def to_config(self) -> dict:
        return {"family": "exponential", "beta": self.beta}


@dataclass(frozen=True)
class ZeroRangeBounded(RateFunction):
    """Zero-range analogue of the exponential family: ``exp(beta (z - 1/2))`` for ``z >= 1``."""

    beta: float = 1.0
    regime: Regime = field(default=Regime.ZERO_RANGE, init=False)
    beta_bound: float = field(default=0.0, init=False)

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be positive, got {self.beta}")
        object.__setattr__(self, "beta_bound", float(self.beta))

    def _positive(self, z: int) -> float:
        return math.exp(self.beta * (z - 0.5))

    def _positive_mp(self, z: int):
        return mpmath.exp(mpmath.mpf(self.beta) * (z - mpmath.mpf(1) / 2))

    def to_config(self) -> dict:
        return {"family": "zero_range_exponential", "beta": self.beta}


@dataclass(frozen=True)
class ZeroRangeLinearCapped(RateFunction):
    """``r(z) = min(z, cap)`` for ``z >= 1``, zero otherwise."""

    cap: float = 1.0
    regime: Regime = field(default=Regime.ZERO_RANGE, init=False)
    beta_bound: float = field(default=1.0, kw_only=True)

    def __post_init__(self):
        if not self.cap > 0:
            raise ValueError(f"cap must be positive, got {self.cap}")

    @property
    def sup(self) -> float:
        return float(self.cap)

    def _positive(self, z: int) -> float:
        return float(min(z, self.cap))

    def to_config(self) -> dict:
        return {"family": "zero_range_linear_capped", "cap": self.cap,
                "beta_bound": self.beta_bound}


_EXTRAPOLATIONS = ("constant", "linear", "geometric")


@dataclass(frozen=True)
class TableDefined(RateFunction):
    """Rates read from a table on a contiguous integer support.

    Beyond the largest tabulated ``z`` the table is continued by
    ``extrapolation``; below the smallest, the regime rule applies
    (``1 / r(1 - z)`` for bricklayers, ``0`` for zero range).
    """

    values: tuple[tuple[int, float], ...] = ()
    extrapolation: str = "geometric"
    regime: Regime = field(default=Regime.BRICKLAYERS, kw_only=True)
    beta_bound: float = field(default=1.0, kw_only=True)

    def __post_init__(self):
        if not self.values:
            raise ValueError("rate table is empty")
        zs = [z for z, _ in self.values]
        if len(set(zs)) != len(zs):
            raise ValueError("rate table has duplicate entries")
        ordered = tuple(sorted((int(z), float(v)) for z, v in self.values))
        for (z0, _), (z1, _) in zip(ordered, ordered[1:]):
            if z1 != z0 + 1:
                raise RateTableError(f"rate table has a gap in its support at z={z0 + 1}", z0 + 1)
        if ordered[0][0] > 1:
            raise RateTableError(
                f"rate table must start at or below z=1, starts at z={ordered[0][0]}", ordered[0][0])
        if any(v < 0 for _, v in ordered):
            bad = next(z for z, v in ordered if v < 0)
            raise RateTableError(f"negative rate in table at z={bad}", bad)
        if self.extrapolation not in _EXTRAPOLATIONS:
            raise ValueError(f"unknown extrapolation {self.extrapolation!r}")
        if self.extrapolation != "constant" and len(ordered) < 2:
            raise ValueError(f"{self.extrapolation} extrapolation needs at least two entries")
        object.__setattr__(self, "values", ordered)
        object.__setattr__(self, "regime", Regime(self.regime))

    @property
    def zmin(self) -> int:
        return self.values[0][0]

    @property
    def zmax(self) -> int:
        return self.values[-1][0]

    def _explicit(self, z: int) -> float | None:
        if self.zmin <= z <= self.zmax:
            return self.values[z - self.zmin][1]
        if z > self.zmax:
            return self._extrapolate(z)
        return None

    def _extrapolate(self, z: int) -> float:
        last = self.values[-1][1]
        k = z - self.zmax
        if self.extrapolation == "constant":
            return last
        prev = self.values[-2][1]
        if self.extrapolation == "linear":
            return last + k * (last - prev)
        return last * (last / prev) ** k

    def _positive(self, z: int) -> float:
        raise AssertionError("table covers every z >= 1")

    @property
    def sup(self) -> float:
        if self.extrapolation != "constant" and self.values[-1][1] > self.values[-2][1]:
            return math.inf
        return max(v for _, v in self.values)

    @classmethod
    def from_file(cls, path: str | Path, **kw) -> "TableDefined":
        """Load a two-column whitespace text file of ``z r(z)`` rows."""
        rows = []
        for line in Path(path).read_text().splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            z, v = line.split()[:2]
            rows.append((int(z), float(v)))
        return cls(values=tuple(rows), **kw)

    def to_config(self) -> dict:
        return {"family": "table", "values": [[z, v] for z, v in self.values],
                "regime": self.regime.value, "beta_bound": self.beta_bound,
                "extrapolation": self.extrapolation}


def rate_from_config(cfg: Mapping) -> RateFunction:
    """Build a rate function from a config mapping (``family`` + parameters)."""
    cfg = dict(cfg)
    family = cfg.pop("family")
    if family == "exponential":
        return ExponentialBricklayers(beta=float(cfg.get("beta", 1.0)))
    if family == "zero_range_exponential":
        return ZeroRangeBounded(beta=float(cfg.get("beta", 1.0)))
    if family == "zero_range_linear_capped":
        return ZeroRangeLinearCapped(cap=float(cfg.get("cap", 1.0)),
                                     beta_bound=float(cfg.get("beta_bound", 1.0)))
    if family == "table":
        kw = {k: cfg[k] for k in ("regime", "beta_bound", "extrapolation") if k in cfg}
        if "path" in cfg:
            return TableDefined.from_file(cfg["path"], **kw)
        return TableDefined(values=tuple((int(z), float(v)) for z, v in cfg["values"]), **kw)
    raise ValueError(f"unknown rate family {family!r}")


# ---------------------------------------------------------------------------
# validation


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    mandatory: bool = True
    first_violation: int | None = None
    note: str = ""


@dataclass(frozen=True)
class ValidationReport:
    rate: RateFunction
    z_range: tuple[int, int]
    conditions: tuple[ConditionResult, ...]
    strictly_increasing: bool
    sup_rate: float

    @property
    def usable(self) -> bool:
        return all(c.passed for c in self.conditions if c.mandatory)

    @property
    def ergodicity_checks_available(self) -> bool:
        return self.usable and self.strictly_increasing

    def condition(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self) -> str:
        lines = [f"{self.rate.name} on z in [{self.z_range[0]}, {self.z_range[1]}]:"]
        for c in self.conditions:
            if c.passed:
                flag = "pass"
            elif c.first_violation is None:
                flag = "FAIL"
            else:
                flag = f"FAIL at z={c.first_violation}"
            tag = "" if c.mandatory else " (informational)"
            lines.append(f"  {c.name}: {flag}{tag}" + (f" -- {c.note}" if c.note else ""))
        return "\n".join(lines)


def _first(zs, pred):
    for z in zs:
        if not pred(z):
            return z
    return None


def validate_rate_function(rate: RateFunction,
                           z_range: tuple[int, int] = DEFAULT_VALIDATION_RANGE) -> ValidationReport:
    """Check monotonicity, reciprocity / vanishing, divergence and the exponential bound."""
    lo, hi = int(z_range[0]), int(z_range[1])
    if lo > hi:
        raise ValueError(f"empty validation range [{lo}, {hi}]")
    zs = range(lo, hi + 1)
    bricks = rate.regime is Regime.BRICKLAYERS
    conds = []

    # nondecreasing everywhere in range; strictness tracked on the effective domain
    nondec = _first(range(lo, hi), lambda z: rate(z + 1) >= rate(z))
    eff = range(lo, hi) if bricks else range(max(lo, 1), hi)
    strict_viol = _first(eff, lambda z: rate(z + 1) > rate(z))
    strict = nondec is None and strict_viol is None
    note = "" if strict else "not strictly increasing: ergodicity checks unavailable"
    conds.append(ConditionResult("monotone", nondec is None, True, nondec, note))

    if bricks:
        def recip_ok(z):
            a, b = rate(z), rate(1 - z)
            if a <= 0 or b <= 0:
                return False
            return abs(math.log(a) + math.log(b)) < 1e-12
        bad = [max(z, 1 - z) for z in zs if not recip_ok(z)]
        conds.append(ConditionResult("reciprocity", not bad, True, min(bad) if bad else None))
    else:
        bad = _first((z for z in zs if z <= 0), lambda z: rate(z) == 0.0)
        conds.append(ConditionResult("vanishes_nonpositive", bad is None, True, bad))

    sup = rate.sup
    if math.isinf(sup):
        conds.append(ConditionResult("divergence", True, bricks))
    else:
        conds.append(ConditionResult(
            "divergence", False, bricks, None,
            f"bounded: sup r = {sup:g}, requires e^theta < {sup:g}"))

    beta = rate.beta_bound
    bound_viol = _first((z for z in zs if z > 0),
                        lambda z: rate.log_rate(z) < beta * z)
    conds.append(ConditionResult("exponential_bound", beta > 0 and bound_viol is None, True,
                                 bound_viol, f"beta = {beta:g}"))
    return ValidationReport(rate, (lo, hi), tuple(conds), strict, sup)


def eval_rate(rate: RateFunction, z: int) -> float:
    return rate(z)


def rate_factorial(rate: RateFunction, n: int) -> float:
    """``log r(n)!`` with ``r(0)! = 1``."""
    n = int(n)
    if n < 0:
        raise ValueError("rate_factorial needs n >= 0")
    if n == 0:
        return 0.0
    if rate(1) <= 0:
        raise ValueError("r(1) = 0: rate factorial undefined for n >= 1")
    return math.fsum(rate.log_rate(y) for y in range(1, n + 1))


def log_factorials(rate: RateFunction, n_max: int) -> np.ndarray:
    """Array ``a`` with ``a[n] = log r(n)!`` for ``0 <= n <= n_max``."""
    out = np.zeros(n_max + 1)
    if n_max >= 1:
        lr = rate.log_rates(np.arange(1, n_max + 1))
        if not np.all(np.isfinite(lr)):
            bad = int(np.argmin(np.isfinite(lr))) + 1
            raise ValueError(f"r({bad}) = 0: rate factorial undefined")
        out[1:] = np.cumsum(lr)
    return out
