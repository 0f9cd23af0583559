"""Vectorised direct-method simulation of many independent replicas.

This engine draws its randomness per replica rather than from shared
Poisson planes, so it has the same law as :func:`dynamics.simulate` but
not the same paths.  It serves the large-replica statistical checks.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import Kind, ProcessSpec
from .rates import RateFunction


class RateLookup:
    """``r(z)`` on an integer range, grown on demand."""

    def __init__(self, rate: RateFunction, k: int = 64):
        self.rate = rate
        self.k = 0
        self._build(k)

    def _build(self, k: int) -> None:
        z = np.arange(-k, k + 1)
        self.table = np.array([float(self.rate(int(x))) for x in z])
        self.k = k

    def __call__(self, z: np.ndarray) -> np.ndarray:
        if z.size:
            m = int(np.abs(z).max())
            if m > self.k:
                self._build(max(2 * self.k, m))
        return self.table[z + self.k]


@dataclass
class BatchResult:
    spec: ProcessSpec
    lo: int
    T: float
    omega: np.ndarray            # (R, n) increments at T
    growth: np.ndarray           # (R, ncols) bricks added per column by T
    snapshot_times: np.ndarray
    snapshots: np.ndarray        # (S, R, n)
    snapshot_growth: np.ndarray  # (S, R, ncols)
    events: np.ndarray           # (R,) event counts

    @property
    def columns(self) -> np.ndarray:
        return np.asarray(self.spec.columns)


def _rates(spec: ProcessSpec, om: np.ndarray, lo: int, cols: np.ndarray, r: RateLookup) -> np.ndarray:
    k = cols - lo
    right = r(om[:, k])
    left = r(-om[:, k + 1])
    if spec.kind is Kind.BOUNDARY:
        vl, vr = spec.virtual_rates
        right[:, 0] = vl
        left[:, -1] = vr
    m = spec.clamp
    if m is not None:
        a, b = spec.left, spec.right
        block = np.zeros_like(right, dtype=bool)
        inside_i = (cols >= a) & (cols <= b)
        inside_j = (cols + 1 >= a) & (cols + 1 <= b)
        block |= inside_i & (om[:, k] - 1 < -m)
        block |= inside_j & (om[:, k + 1] + 1 > m)
        right[block] = 0.0
        left[block] = 0.0
    return np.concatenate([right, left], axis=1)


def simulate_batch(spec: ProcessSpec, omega0: np.ndarray, lo: int, T: float, rng: np.random.Generator,
                   snapshot_times=(), chunk: int = 100_000, max_iter: int = 10_000_000) -> BatchResult:
    """Run ``R`` independent replicas from the rows of ``omega0`` (sites ``lo..``) up to ``T``."""
    omega0 = np.array(omega0, dtype=np.int64, ndmin=2)
    R, n = omega0.shape
    wl, wh = spec.window
    if lo > wl or lo + n - 1 < wh:
        raise ValueError("replica window does not cover the process window")
    cols = np.asarray(spec.columns)
    nc = len(cols)
    snaps = np.asarray(sorted(s for s in snapshot_times if 0 <= s <= T), dtype=float)
    S = len(snaps)
    out_om = omega0.copy()
    out_g = np.zeros((R, nc), dtype=np.int64)
    out_sn = np.zeros((S, R, n), dtype=np.int64)
    out_sg = np.zeros((S, R, nc), dtype=np.int64)
    out_ev = np.zeros(R, dtype=np.int64)
    r = RateLookup(spec.rate)
    ks = cols - lo
    for c0 in range(0, R, chunk):
        sl = slice(c0, min(R, c0 + chunk))
        om = out_om[sl]
        g = out_g[sl]
        ev = out_ev[sl]
        B = om.shape[0]
        t = np.zeros(B)
        idx = np.arange(B)
        for _ in range(max_iter):
            if idx.size == 0:
                break
            o = om[idx]
            rates = _rates(spec, o, lo, cols, r)
            cum = np.cumsum(rates, axis=1)
            total = cum[:, -1]
            with np.errstate(divide="ignore"):
                dt = rng.standard_exponential(idx.size) / total
            t_new = t[idx] + dt
            for s in range(S):
                hit = (t[idx] <= snaps[s]) & (t_new > snaps[s])
                if hit.any():
                    out_sn[s, c0 + idx[hit]] = o[hit]
                    out_sg[s, c0 + idx[hit]] = g[idx[hit]]
            go = t_new <= T
            idx, t_new, cum, total = idx[go], t_new[go], cum[go], total[go]
            t[idx] = t_new
            u = (1.0 - rng.random(idx.size)) * total  # in (0, total]
            ch = (cum < u[:, None]).sum(axis=1)
            ch = np.minimum(ch, 2 * nc - 1)
            c = ch % nc
            rows = idx
            om[rows, ks[c]] -= 1
            om[rows, ks[c] + 1] += 1
            g[rows, c] += 1
            ev[rows] += 1
        else:
            raise RuntimeError("batch iteration limit reached")
    return BatchResult(spec, lo, T, out_om, out_g, snaps, out_sn, out_sg, out_ev)
