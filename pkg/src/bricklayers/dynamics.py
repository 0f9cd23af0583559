"""Event-driven finite-volume dynamics on shared Poisson clocks.

Two finite-volume processes are supported.  The ``[l, r]``-monotone process
freezes every column outside ``l..r-1``.  The boundary-driven ``(l, r, theta)``
process adds a virtual bricklayer on each side of ``[l, r]``: column ``l-1``
grows from the left at rate ``e^theta`` and column ``r`` from the right at
rate ``e^-theta``.  Both run on the same event loop, which also drives
coupled runs with several members.
"""
from __future__ import annotations

import enum
import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .clocks import Direction, PoissonPlaneSet
from .rates import RateFunction, Regime

RIGHT, LEFT = int(Direction.RIGHT), int(Direction.LEFT)
INT64_MAX = (1 << 63) - 1
DEFAULT_MAX_EVENTS = 10_000_000


class SimulationLimitError(RuntimeError):
    """The event-count safety limit was reached."""


class Kind(str, enum.Enum):
    MONOTONE = "monotone"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class ProcessSpec:
    """Which finite-volume process to run.

    ``boundary_rates`` overrides the virtual bricklayer rates
    ``(e^theta, e^-theta)``; it exists for negative controls.  ``clamp``
    suppresses any jump that would take an increment in ``[left, right]``
    outside ``[-clamp, clamp]``, giving a finite state space.
    """

    kind: Kind
    left: int
    right: int
    rate: RateFunction
    theta: float | None = None
    clamp: int | None = None
    boundary_rates: tuple[float, float] | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.MONOTONE:
            if not self.left < self.right:
                raise ValueError(f"monotone process needs left < right, got [{self.left}, {self.right}]")
        else:
            if not self.left <= self.right:
                raise ValueError(f"boundary process needs left <= right, got ({self.left}, {self.right})")
            if self.theta is None and self.boundary_rates is None:
                raise ValueError("boundary process needs theta")
        if self.clamp is not None and self.clamp < 1:
            raise ValueError("clamp must be a positive integer")

    @classmethod
    def monotone(cls, left: int, right: int, rate: RateFunction, **kw) -> "ProcessSpec":
        return cls(Kind.MONOTONE, left, right, rate, **kw)

    @classmethod
    def boundary(cls, left: int, right: int, theta: float, rate: RateFunction, **kw) -> "ProcessSpec":
        return cls(Kind.BOUNDARY, left, right, rate, theta=float(theta), **kw)

    @property
    def zero_range(self) -> bool:
        return self.rate.regime is Regime.ZERO_RANGE

    @property
    def virtual_rates(self) -> tuple[float, float]:
        if self.boundary_rates is not None:
            return self.boundary_rates
        if self.kind is Kind.MONOTONE:
            return 0.0, 0.0
        right = 0.0 if self.zero_range else math.exp(-self.theta)
        return math.exp(self.theta), right

    @property
    def columns(self) -> range:
        """Columns that can grow."""
        if self.kind is Kind.MONOTONE:
            return range(self.left, self.right)
        return range(self.left - 1, self.right + 1)

    @property
    def window(self) -> tuple[int, int]:
        """Smallest site window holding every increment the rates read."""
        return self.left - 1, self.right + 1

    def to_config(self) -> dict:
        d = {"kind": self.kind.value, "left": self.left, "right": self.right,
             "rate": self.rate.to_config()}
        if self.theta is not None:
            d["theta"] = self.theta
        if self.clamp is not None:
            d["clamp"] = self.clamp
        if self.boundary_rates is not None:
            d["boundary_rates"] = list(self.boundary_rates)
        return d


def memo_rate(rate: RateFunction) -> Callable[[int], float]:
    cache: dict[int, float] = {}

    def r(z: int) -> float:
        v = cache.get(z)
        if v is None:
            v = cache[z] = float(rate(z))
        return v
    return r


def column_rates(spec: ProcessSpec, omega: Sequence[int], lo: int, c: int,
                 r: Callable[[int], float]) -> tuple[float, float]:
    """(right-lay, left-lay) rate of column ``c`` with ``omega[k]`` the increment at site ``lo + k``."""
    left, right = spec.left, spec.right
    if spec.kind is Kind.MONOTONE:
        if not left <= c < right:
            return 0.0, 0.0
        a, b = r(omega[c - lo]), r(-omega[c + 1 - lo])
    else:
        if c == left - 1:
            a, b = spec.virtual_rates[0], r(-omega[left - lo])
        elif c == right:
            a, b = r(omega[right - lo]), spec.virtual_rates[1]
        elif left <= c < right:
            a, b = r(omega[c - lo]), r(-omega[c + 1 - lo])
        else:
            return 0.0, 0.0
    m = spec.clamp
    if m is not None:
        if (left <= c <= right and omega[c - lo] - 1 < -m) or \
                (left <= c + 1 <= right and omega[c + 1 - lo] + 1 > m):
            return 0.0, 0.0
    return a, b


@dataclass
class LatticeState:
    """Increments on sites ``lo..hi`` and heights of columns ``lo..hi-1``."""

    lo: int
    omega: np.ndarray
    heights: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=np.int64)
        self.heights = np.asarray(self.heights, dtype=np.int64)
        if self.omega.ndim != 1 or len(self.heights) != len(self.omega) - 1:
            raise ValueError("need len(heights) == len(omega) - 1")

    @property
    def hi(self) -> int:
        return self.lo + len(self.omega) - 1

    @property
    def window(self) -> tuple[int, int]:
        return self.lo, self.hi

    @classmethod
    def from_omega(cls, omega, lo: int, anchor: int = 0, time: float = 0.0) -> "LatticeState":
        omega = np.asarray(omega, dtype=np.int64)
        return cls(lo, omega, heights_from_increments(omega, lo, anchor), time)

    @classmethod
    def flat(cls, lo: int, hi: int) -> "LatticeState":
        return cls.from_omega(np.zeros(hi - lo + 1, dtype=np.int64), lo)

    def w(self, site: int) -> int:
        return int(self.omega[site - self.lo])

    def h(self, column: int) -> int:
        return int(self.heights[column - self.lo])

    def copy(self) -> "LatticeState":
        return LatticeState(self.lo, self.omega.copy(), self.heights.copy(), self.time)

    def consistent(self) -> bool:
        """Increments of interior sites equal height differences."""
        return bool(np.array_equal(self.omega[1:-1], self.heights[:-1] - self.heights[1:]))

    def __eq__(self, other):
        return (isinstance(other, LatticeState) and self.lo == other.lo and self.time == other.time
                and np.array_equal(self.omega, other.omega)
                and np.array_equal(self.heights, other.heights))


def heights_from_increments(omega, lo: int, anchor: int = 0) -> np.ndarray:
    """Heights of columns ``lo..hi-1`` from ``omega_i = h_{i-1} - h_i``.

    Column 0 carries ``anchor`` when it lies in the window, otherwise the
    leftmost column does.
    """
    omega = np.asarray(omega, dtype=np.int64)
    n = len(omega) - 1
    if n < 0:
        raise ValueError("empty window")
    # h_j = h_lo - sum_{k=lo+1}^{j} omega_k
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    rel = np.concatenate(([0], -np.cumsum(omega[1:n], dtype=np.int64)))
    ref = -lo if 0 <= -lo < n else 0
    return rel - rel[ref] + anchor


def increments_from_heights(heights, omega_lo: int, omega_hi: int) -> np.ndarray:
    """Inverse of :func:`heights_from_increments`; the two edge increments are not
    determined by the window's heights and must be supplied."""
    h = np.asarray(heights, dtype=np.int64)
    return np.concatenate(([omega_lo], h[:-1] - h[1:], [omega_hi])).astype(np.int64)


@dataclass
class Trajectory:
    spec: ProcessSpec
    initial: LatticeState
    T: float
    events: list[tuple[float, int, int]] = field(default_factory=list)
    snapshots: list[LatticeState] = field(default_factory=list)
    final: LatticeState | None = None
    seed: int | None = None
    stopped_at: float | None = None

    def replay(self, until: float = math.inf) -> LatticeState:
        s = self.initial.copy()
        lo = s.lo
        for t, i, _d in self.events:
            if t > until:
                break
            apply_jump(s.omega, s.heights, lo, i)
            s.time = t
        s.time = min(until, self.T) if math.isfinite(until) else self.T
        return s


def apply_jump(omega, heights, lo: int, i: int) -> None:
    """omega -> omega^{(i,i+1)}: one brick on column ``i``."""
    k = i - lo
    omega[k] -= 1
    omega[k + 1] += 1
    heights[k] += 1


class _Member:
    __slots__ = ("spec", "lo", "omega", "heights", "events", "snapshots", "r")

    def __init__(self, spec: ProcessSpec, state: LatticeState):
        lo, hi = state.window
        wl, wh = spec.window
        if lo > wl or hi < wh:
            raise ValueError(f"state window [{lo}, {hi}] does not cover [{wl}, {wh}]")
        self.spec = spec
        self.lo = lo
        self.omega = [int(x) for x in state.omega]
        self.heights = [int(x) for x in state.heights]
        self.events: list[tuple[float, int, int]] = []
        self.snapshots: list[LatticeState] = []
        self.r = memo_rate(spec.rate)

    def rates(self, c: int) -> tuple[float, float]:
        return column_rates(self.spec, self.omega, self.lo, c, self.r)

    def state(self, t: float) -> LatticeState:
        return LatticeState(self.lo, np.array(self.omega, dtype=np.int64),
                            np.array(self.heights, dtype=np.int64), t)


def run_members(members: list[_Member], clocks: PoissonPlaneSet, T: float,
                snapshot_times: Sequence[float] = (), max_events: int = DEFAULT_MAX_EVENTS,
                monitor: Callable | None = None, stop: Callable | None = None) -> float | None:
    """Shared event loop.  Returns the stop time if ``stop`` ended the run early.

    A point ``(t, y)`` on the plane of ``(column, direction)`` makes every
    member whose rate on that channel exceeds ``y`` jump.  Each channel keeps
    one candidate point queried at the largest member rate; after a jump
    only channels of the neighbouring columns are re-queried, always from the
    same plane.
    """
    cols = sorted(set().union(*(m.spec.columns for m in members)))
    colset = set(cols)
    level: dict[tuple[int, int], float] = {}
    cand: dict[tuple[int, int], tuple[float, float] | None] = {}
    version: dict[tuple[int, int], int] = {}
    heap: list = []

    def query(ch, after):
        lv = level[ch]
        p = clocks.next_point(ch[0], ch[1], after, lv, T) if lv > 0.0 else None
        cand[ch] = p
        version[ch] = version.get(ch, 0) + 1
        if p is not None:
            heapq.heappush(heap, (p[0], ch[0], ch[1], version[ch]))

    for c in cols:
        rs = [m.rates(c) for m in members]
        for d in (RIGHT, LEFT):
            level[(c, d)] = max(x[d] for x in rs)
            query((c, d), 0.0)

    snaps = sorted(s for s in snapshot_times if 0.0 <= s <= T)
    si = 0
    n_events = 0
    while heap:
        t, c, d, ver = heapq.heappop(heap)
        ch = (c, d)
        if ver != version[ch]:
            continue
        while si < len(snaps) and snaps[si] < t:
            for m in members:
                m.snapshots.append(m.state(snaps[si]))
            si += 1
        y = cand[ch][1]
        for m in members:
            lv = m.rates(c)[d]
            if lv > y or (lv == y and lv > 0.0):
                apply_jump(m.omega, m.heights, m.lo, c)
                m.events.append((t, c, d))
        n_events += 1
        if n_events > max_events:
            raise SimulationLimitError(f"event limit {max_events} reached at t={t}")
        for c2 in (c - 1, c, c + 1):
            if c2 not in colset:
                continue
            rs = [m.rates(c2) for m in members]
            for d2 in (RIGHT, LEFT):
                ch2 = (c2, d2)
                new = max(x[d2] for x in rs)
                if ch2 == ch or new != level[ch2]:
                    level[ch2] = new
                    query(ch2, t)
        if monitor is not None:
            monitor(t, members)
        if stop is not None and stop(t, members):
            for m in members:
                m.snapshots.append(m.state(t))
            return t
    while si < len(snaps):
        for m in members:
            m.snapshots.append(m.state(snaps[si]))
        si += 1
    return None


def rate_field(spec: ProcessSpec, state: LatticeState, i: int) -> tuple[float, float]:
    lo, hi = state.window
    if not lo <= i < hi:
        raise ValueError(f"column {i} outside window [{lo}, {hi}]")
    return column_rates(spec, state.omega.tolist(), lo, i, spec.rate)


def simulate(spec: ProcessSpec, init: LatticeState, T: float, clocks: PoissonPlaneSet,
             snapshot_times: Sequence[float] = (), max_events: int = DEFAULT_MAX_EVENTS) -> Trajectory:
    m = _Member(spec, init)
    run_members([m], clocks, T, snapshot_times, max_events)
    return Trajectory(spec, init.copy(), T, m.events, m.snapshots, m.state(T), clocks.seed)


@dataclass
class WindowLimitResult:
    stabilized: bool
    target: tuple[int, int]
    T: float
    radius: int | None
    doublings: int | None
    events: list[tuple[float, int, int]]
    heights: dict[int, int]
    volumes: list[tuple[int, int]]
    restricted: list[bytes]

    @property
    def consecutive_identical(self) -> bool:
        return self.stabilized and self.restricted[-1] == self.restricted[-2]


def restrict_events(events, a: int, b: int) -> list[tuple[float, int, int]]:
    """Events on columns ``a <= i < b``."""
    return [e for e in events if a <= e[1] < b]


def events_bytes(events) -> bytes:
    return "".join(f"{t!r} {i} {d}\n" for t, i, d in events).encode()


def window_limit(rate: RateFunction, init: LatticeState, target: tuple[int, int], T: float,
                 clocks: PoissonPlaneSet, w: int | None = None, k_max: int = 12,
                 max_events: int = DEFAULT_MAX_EVENTS) -> WindowLimitResult:
    """Run ``[-2^k w, 2^k w]``-monotone processes on shared clocks until two
    consecutive volumes produce identical events on columns ``a..b-1``."""
    a, b = target
    if w is None:
        w = max(abs(a), abs(b), 1)
    volumes, restricted = [], []
    prev = None
    traj = None
    for k in range(k_max + 1):
        left, right = -(2 ** k) * w, (2 ** k) * w
        if left - 1 < init.lo or right + 1 > init.hi:
            break
        spec = ProcessSpec.monotone(left, right, rate)
        traj = simulate(spec, init, T, clocks, max_events=max_events)
        ev = restrict_events(traj.events, a, b)
        volumes.append((left, right))
        restricted.append(events_bytes(ev))
        if prev is not None and restricted[-1] == restricted[-2]:
            hs = {i: traj.final.h(i) for i in range(a, b)}
            return WindowLimitResult(True, target, T, (2 ** (k - 1)) * w, k, ev, hs, volumes, restricted)
        prev = ev
    hs = {i: traj.final.h(i) for i in range(a, b)} if traj is not None else {}
    return WindowLimitResult(False, target, T, None, None, prev or [], hs, volumes, restricted)
