"""Layer delimiters and per-user, per-layer power allocation.

Layer 0 is the sentinel interval ``(-inf, 1]``.  Layer ``m >= 1`` is the
m-th finite interval ``[floor, ceiling]`` between consecutive sorted
delimiters, and every formula written with ``q_{m+1} - q_m`` is evaluated
as that interval's width, with ``q_m`` in a denominator read as its floor.

Users are numbered 1..K throughout; user K is the one whose receiver is
interfered.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ChannelConfig, ensure_valid


@dataclass(frozen=True)
class LayerInterval:
    index: int
    floor: float
    ceiling: float

    @property
    def width(self) -> float:
        return self.ceiling - self.floor

    @property
    def is_sentinel(self) -> bool:
        return self.index == 0


SENTINEL = LayerInterval(0, -math.inf, 1.0)


@dataclass(frozen=True)
class LayerPlan:
    """Delimiters and power allocation for one channel configuration.

    ``alloc`` has shape ``(K, M + 1)``; row ``k - 1`` holds user k's power on
    layers ``0..M``.  ``active[m]`` is the set of users with nonzero power on
    layer m.
    """

    K: int
    gains: tuple
    powers: tuple
    q: tuple
    intervals: tuple
    alloc: np.ndarray

    @property
    def M(self) -> int:
        return len(self.intervals) - 1

    @property
    def finite_layers(self) -> tuple:
        return self.intervals[1:]

    @property
    def active(self) -> list:
        return [frozenset(int(k) + 1 for k in np.flatnonzero(self.alloc[:, m] > 0))
                for m in range(self.M + 1)]

    @property
    def active_tx(self) -> list:
        return [u - {self.K} for u in self.active]

    @property
    def layers_of_user(self) -> dict:
        return {k: frozenset(int(m) for m in np.flatnonzero(self.alloc[k - 1] > 0))
                for k in range(1, self.K + 1)}

    def gain(self, k: int) -> float:
        """Power gain of user k at receiver K (``a_K = 1``)."""
        return 1.0 if k == self.K else self.gains[k - 1]

    def to_dict(self) -> dict:
        return {
            "q": list(self.q),
            "alloc": self.alloc.tolist(),
            "active": [sorted(u) for u in self.active],
        }


def compute_delimiters(config: ChannelConfig) -> list:
    """Sorted, de-duplicated delimiters turned into layer intervals.

    Candidates are ``a_i P_i`` and ``a_i`` for every interferer, kept only
    when strictly above 1, together with ``P_K`` and 1.
    """
    ensure_valid(config)
    candidates = set()
    for a, p in zip(config.gains, config.powers):
        candidates.update(v for v in (a * p, a) if v > 1.0)
    candidates.update((config.powers[-1], 1.0))
    # values at or below 1 other than the 1 itself never delimit a finite layer
    q = sorted(v for v in candidates if v >= 1.0)
    intervals = [SENTINEL]
    for m, (lo, hi) in enumerate(zip(q[:-1], q[1:]), start=1):
        intervals.append(LayerInterval(m, lo, hi))
    return intervals


def allocate_power(config: ChannelConfig, intervals=None) -> LayerPlan:
    ensure_valid(config)
    if intervals is None:
        intervals = compute_delimiters(config)
    K = config.K
    alloc = np.zeros((K, len(intervals)))
    for k in range(K - 1):
        a, p = config.gains[k], config.powers[k]
        if a == 0:
            continue
        # capped at the budget: a weak, low-power user fits entirely in layer 0
        alloc[k, 0] = min(max(1.0 / a - 1.0, 0.0), p)
        for layer in intervals[1:]:
            if a * p >= layer.ceiling and layer.floor >= a:
                alloc[k, layer.index] = layer.width / a
    p_K = config.powers[-1]
    for layer in intervals[1:]:
        if p_K >= layer.ceiling:
            alloc[K - 1, layer.index] = layer.width
    alloc.setflags(write=False)
    q = (1.0, *(layer.ceiling for layer in intervals[1:]))
    return LayerPlan(K, config.gains, config.powers, q, tuple(intervals), alloc)


def build_plan(config: ChannelConfig) -> LayerPlan:
    return allocate_power(config, compute_delimiters(config))


@dataclass(frozen=True)
class AlignmentReport:
    aligned: bool
    max_alignment_violation: float
    worst_entry: tuple | None
    max_power_excess: float
    feasible: bool

    @property
    def ok(self) -> bool:
        return self.aligned and self.feasible


def check_alignment(plan: LayerPlan, alloc=None, tol: float = 1e-9) -> AlignmentReport:
    """Check received-power alignment and per-user power feasibility.

    ``alloc`` overrides the plan's matrix, which lets callers audit a
    perturbed allocation against the same layer geometry.  Violations are
    reported in absolute terms; the pass/fail flags compare against ``tol``
    scaled by the layer width (alignment) or the user's budget (power).
    """
    alloc = plan.alloc if alloc is None else np.asarray(alloc, dtype=float)
    worst, worst_entry, aligned = 0.0, None, True
    for layer in plan.finite_layers:
        m = layer.index
        for k in np.flatnonzero(alloc[:, m] > 0):
            user = int(k) + 1
            err = abs(plan.gain(user) * alloc[k, m] - layer.width)
            aligned &= err <= tol * max(1.0, layer.width)
            if err > worst:
                worst, worst_entry = err, (user, m)
    budgets = np.asarray(plan.powers)
    excess = alloc.sum(axis=1) - budgets
    feasible = bool(np.all(excess <= tol * np.maximum(1.0, budgets)))
    return AlignmentReport(bool(aligned), float(worst), worst_entry,
                           max(float(excess.max()), 0.0), feasible)
