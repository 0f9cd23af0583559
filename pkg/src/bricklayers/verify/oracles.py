"""Exact transient law of tiny clamped processes by matrix exponential."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from ..dynamics import ProcessSpec, column_rates
from ..rates import Regime


@dataclass
class TransientLaw:
    spec: ProcessSpec
    t: float
    states: list[tuple[int, ...]]   # increments on sites left..right
    probs: np.ndarray

    def marginal(self, site: int) -> dict[int, float]:
        k = site - self.spec.left
        out: dict[int, float] = {}
        for s, p in zip(self.states, self.probs):
            out[s[k]] = out.get(s[k], 0.0) + float(p)
        return out


def generator_matrix(spec: ProcessSpec) -> tuple[list[tuple[int, ...]], np.ndarray]:
    """Rate matrix of a clamped process on its finite state space.

    Sites outside ``[left, right]`` never influence the rates and are
    dropped from the state.
    """
    if spec.clamp is None:
        raise ValueError("the oracle needs a clamped process")
    m = spec.clamp
    n = spec.right - spec.left + 1
    lo_v = 0 if spec.rate.regime is Regime.ZERO_RANGE else -m
    states = list(itertools.product(range(lo_v, m + 1), repeat=n))
    index = {s: k for k, s in enumerate(states)}
    Q = np.zeros((len(states), len(states)))
    lo = spec.left - 1
    for s, k in index.items():
        om = [0, *s, 0]
        for c in spec.columns:
            rt = sum(column_rates(spec, om, lo, c, spec.rate))
            if rt == 0.0:
                continue
            new = list(om)
            new[c - lo] -= 1
            new[c + 1 - lo] += 1
            tgt = tuple(new[1:-1])
            if tgt == s:
                continue
            j = index.get(tgt)
            if j is None:
                raise AssertionError(f"clamped jump left the state space: {s} -> {tgt}")
            Q[k, j] += rt
    Q[np.diag_indices_from(Q)] = -Q.sum(axis=1)
    return states, Q


def transient_law(spec: ProcessSpec, start: tuple[int, ...], t: float) -> TransientLaw:
    states, Q = generator_matrix(spec)
    p0 = np.zeros(len(states))
    p0[states.index(tuple(start))] = 1.0
    p = p0 @ expm(Q * t)
    p = np.clip(p, 0.0, None)
    return TransientLaw(spec, t, states, p / p.sum())


def total_variation(p: dict[int, float], q: dict[int, float]) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys)
