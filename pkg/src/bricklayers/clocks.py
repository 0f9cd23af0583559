"""Planar Poisson clocks ``N_i`` realised lazily and reproducibly.

Each column ``i`` owns two independent rate-1 Poisson point processes on
``(t, y) in R_+^2``: one drives the bricklayer at ``i`` laying right, the
other the bricklayer at ``i + 1`` laying left.  A channel running at rate
``lambda`` fires at the points with ``y < lambda``.

A plane is cut into level strips ``(0, b], (b, 2b], (2b, 4b], ...``; each
strip is a one-dimensional Poisson process in time with uniform marks,
generated in fixed-size chunks.  Chunk ``c`` of strip ``k`` is drawn from a
Philox stream keyed by ``(seed, column, direction, strip)`` with counter
``c``, so the realised points never depend on the order of queries.
"""
from __future__ import annotations

import enum
import math
from bisect import bisect_right

import numpy as np

MASK64 = (1 << 64) - 1
DEFAULT_ENVELOPE_CAP = math.exp(64.0)
CHUNK = 32


class Direction(enum.IntEnum):
    RIGHT = 0  # bricklayer i lays on column i
    LEFT = 1  # bricklayer i + 1 lays on column i


class EnvelopeOverflowError(RuntimeError):
    """A rate level beyond the configured envelope cap was requested."""


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, k: int) -> int:
    """Seed of replica ``k``: ``splitmix64(splitmix64(master) ^ k)``."""
    return splitmix64(splitmix64(int(master) & MASK64) ^ (int(k) & MASK64))


def _stream_key(seed: int, column: int, direction: int, strip: int) -> tuple[int, int]:
    h = splitmix64(int(column) & MASK64)
    h = splitmix64(h ^ int(direction))
    h = splitmix64(h ^ int(strip))
    return splitmix64(int(seed) & MASK64), h


class Strip:
    """Points of one plane with marks in ``(y_lo, y_hi]``, sorted by time."""

    __slots__ = ("y_lo", "y_hi", "key", "times", "ys", "chunks", "t_gen")

    def __init__(self, y_lo: float, y_hi: float, key: tuple[int, int]):
        self.y_lo = y_lo
        self.y_hi = y_hi
        self.key = key
        self.times: list[float] = []
        self.ys: list[float] = []
        self.chunks = 0
        self.t_gen = 0.0  # all points with t <= t_gen are realised

    def _grow(self) -> None:
        bitgen = np.random.Philox(key=np.array(self.key, dtype=np.uint64),
                                  counter=np.array([0, self.chunks, 0, 0], dtype=np.uint64))
        g = np.random.Generator(bitgen)
        width = self.y_hi - self.y_lo
        gaps = g.standard_exponential(CHUNK) / width
        times = self.t_gen + np.cumsum(gaps)
        ys = self.y_lo + width * (1.0 - g.random(CHUNK))  # in (y_lo, y_hi]
        if times[0] <= self.t_gen or np.any(np.diff(times) <= 0):
            raise RuntimeError("Poisson strip produced a repeated timestamp")
        self.times.extend(times.tolist())
        self.ys.extend(ys.tolist())
        self.chunks += 1
        self.t_gen = float(times[-1])

    def ensure(self, horizon: float) -> None:
        while self.t_gen < horizon:
            self._grow()

    def first(self, after_t: float, level: float, until: float):
        """Earliest ``(t, y)`` with ``after_t < t <= until`` and ``y < level``, or None."""
        times, ys = self.times, self.ys
        while self.t_gen <= after_t:
            self._grow()
        k = bisect_right(times, after_t)
        full = self.y_hi <= level
        while True:
            while k >= len(times):
                if self.t_gen >= until:
                    return None
                self._grow()
            t = times[k]
            if t > until:
                return None
            if full or ys[k] <= level:
                return t, ys[k]
            k += 1

    def count(self, t_lo: float, t_hi: float, y_hi: float) -> int:
        self.ensure(t_hi)
        a = bisect_right(self.times, t_lo)
        b = bisect_right(self.times, t_hi)
        return sum(1 for y in self.ys[a:b] if y < y_hi)


class Plane:
    """One ``N_i`` for a fixed (column, direction)."""

    def __init__(self, seed: int, column: int, direction: int, base: float = 1.0,
                 envelope_cap: float = DEFAULT_ENVELOPE_CAP):
        self.seed = seed
        self.column = column
        self.direction = int(direction)
        self.base = base
        self.envelope_cap = envelope_cap
        self.strips: list[Strip] = []
        self.anomalies = 0

    @property
    def envelope_level(self) -> float:
        return self.strips[-1].y_hi if self.strips else 0.0

    @property
    def horizon(self) -> float:
        return min((s.t_gen for s in self.strips), default=0.0)

    def _strip_bounds(self, k: int) -> tuple[float, float]:
        if k == 0:
            return 0.0, self.base
        return self.base * 2.0 ** (k - 1), self.base * 2.0 ** k

    def extend_envelope(self, new_level: float) -> None:
        if new_level > self.envelope_cap:
            raise EnvelopeOverflowError(
                f"rate level {new_level:g} exceeds envelope cap {self.envelope_cap:g} "
                f"on column {self.column}, direction {Direction(self.direction).name}")
        while self.envelope_level < new_level:
            k = len(self.strips)
            lo, hi = self._strip_bounds(k)
            self.strips.append(Strip(lo, hi, _stream_key(self.seed, self.column, self.direction, k)))

    def extend_horizon(self, new_t: float) -> None:
        for s in self.strips:
            s.ensure(new_t)

    def next_point(self, after_t: float, level: float, until: float = math.inf):
        if level <= 0.0:
            return None
        if level > self.envelope_level:
            self.extend_envelope(level)
        best = None
        limit = until
        for s in self.strips:
            if s.y_lo >= level:
                break
            hit = s.first(after_t, level, limit)
            if hit is not None and (best is None or hit[0] < best[0]):
                best = hit
                limit = hit[0]
        if best is not None and best[1] == level:
            self.anomalies += 1
        return best

    def points(self, t_hi: float, y_hi: float) -> list[tuple[float, float]]:
        """All realised points in ``(0, t_hi] x (0, y_hi)``, sorted by time."""
        self.extend_envelope(y_hi)
        out = []
        for s in self.strips:
            if s.y_lo >= y_hi:
                break
            s.ensure(t_hi)
            k = bisect_right(s.times, t_hi)
            out.extend((t, y) for t, y in zip(s.times[:k], s.ys[:k]) if y < y_hi)
        out.sort()
        return out


class PoissonPlaneSet:
    """All clocks of one realisation, keyed by a 64-bit master seed."""

    def __init__(self, seed: int, base: float = 1.0, envelope_cap: float = DEFAULT_ENVELOPE_CAP):
        self.seed = int(seed) & MASK64
        self.base = base
        self.envelope_cap = envelope_cap
        self.planes: dict[tuple[int, int], Plane] = {}

    def plane(self, column: int, direction: int) -> Plane:
        key = (int(column), int(direction))
        p = self.planes.get(key)
        if p is None:
            p = Plane(self.seed, key[0], key[1], self.base, self.envelope_cap)
            self.planes[key] = p
        return p

    def next_point(self, column: int, direction: int, after_t: float, level: float,
                   until: float = math.inf):
        """Earliest point of ``N_(column, direction)`` with ``t > after_t`` and ``y < level``."""
        return self.plane(column, direction).next_point(after_t, level, until)

    @property
    def anomalies(self) -> int:
        return sum(p.anomalies for p in self.planes.values())

    def fresh(self) -> "PoissonPlaneSet":
        """Same seed, nothing realised yet: regenerates identical points."""
        return PoissonPlaneSet(self.seed, self.base, self.envelope_cap)


def next_point(ps: PoissonPlaneSet, i: int, direction: int, after_t: float, level: float,
               until: float = math.inf):
    return ps.next_point(i, direction, after_t, level, until)


def extend_envelope(plane: Plane, new_level: float) -> Plane:
    plane.extend_envelope(new_level)
    return plane


def extend_horizon(plane: Plane, new_t: float) -> Plane:
    plane.extend_horizon(new_t)
    return plane
