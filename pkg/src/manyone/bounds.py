"""Secrecy sum-rate bounds, per-layer rate caps and the constant-gap check."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import ChannelConfig, KTooSmall, cap, ensure_valid, half_log2_plus
from .layering import LayerPlan, build_plan

# slack for floating comparisons of bound values
TOL = 1e-9


class DegenerateSweep(ValueError):
    pass


def f_of_K(K: int) -> float:
    """Per-channel constant subtracted by the achievable bound."""
    if K < 3:
        raise KTooSmall(f"K must be at least 3, got {K}", "/K")
    log_k = math.log2(K)
    return (2 * K - 1) * ((K - 1) / 2 + (K + 1) / 2 * log_k) + 0.5 * log_k


def strongest_interferer(config: ChannelConfig) -> int:
    """1-based index maximizing ``a_i P_i``; ties go to the lowest index."""
    products = [a * p for a, p in zip(config.gains, config.powers)]
    return int(np.argmax(products)) + 1


def weakest_link(config: ChannelConfig) -> int:
    """1-based index minimizing ``a_i``; ties go to the lowest index."""
    return int(np.argmin(config.gains)) + 1


def lower_bound(config: ChannelConfig) -> float:
    """Achievable secrecy sum rate, unclamped (usually negative at low SNR)."""
    ensure_valid(config)
    total = sum(half_log2_plus(p) for p in config.powers)
    i_bar, i_tilde = strongest_interferer(config), weakest_link(config)
    peak = config.gains[i_bar - 1] * config.powers[i_bar - 1]
    if peak > 0:
        total -= half_log2_plus(peak / max(1.0, config.gains[i_tilde - 1]))
    return total - f_of_K(config.K)


def upper_bound(config: ChannelConfig) -> float:
    ensure_valid(config)
    K = config.K
    c = max([1.0, *config.gains])
    received = sum(a * p for a, p in zip(config.gains, config.powers))
    return sum(cap(p) for p in config.powers) - cap(received / ((K - 1) * c))


def is_case1(config: ChannelConfig) -> bool:
    """Every interference link is weaker than the direct links."""
    return all(a < 1 for a in config.gains)


def is_case2(config: ChannelConfig) -> bool:
    """Interferers share one gain and one power budget."""
    return len(set(config.gains)) == 1 and len(set(config.powers[:-1])) == 1


def gap_budget_case1(K: int) -> float:
    return K / 2 + math.log2(K - 1) + f_of_K(K)


def gap_budget_case2(K: int) -> float:
    return K / 2 + f_of_K(K)


@dataclass(frozen=True)
class BoundsReport:
    lower_raw: float
    lower: float
    upper: float
    fK: float
    gap: float
    case1: bool
    case2: bool
    gap_budget: Optional[float]

    @property
    def within_budget(self) -> bool:
        return self.gap_budget is None or self.gap <= self.gap_budget + TOL

    def to_dict(self) -> dict:
        return {
            "lower_raw": self.lower_raw,
            "lower": self.lower,
            "upper": self.upper,
            "fK": self.fK,
            "gap": self.gap,
            "case1": self.case1,
            "case2": self.case2,
            "gap_budget": self.gap_budget,
        }


def gap_report(config: ChannelConfig) -> BoundsReport:
    """Both bounds, their gap, and the tightest applicable constant budget.

    When both cases apply the smaller (case-2) budget is reported.
    """
    lo, up = lower_bound(config), upper_bound(config)
    K = config.K
    case1, case2 = is_case1(config), is_case2(config)
    budget = None
    if case2:
        budget = gap_budget_case2(K)
    elif case1:
        budget = gap_budget_case1(K)
    return BoundsReport(lo, max(0.0, lo), up, f_of_K(K), up - lo, case1, case2, budget)


@dataclass(frozen=True)
class LayerRateCaps:
    """Rate caps for the finite layers ``1..M`` (index ``m - 1`` here).

    ``r_K_cap`` is what receiver K tolerates when decoding the aligned sum,
    ``r_k_cap`` what an interferer's own receiver tolerates; the operating
    rate of a layer is the smaller one.
    """

    r_K_cap: tuple
    r_k_cap: tuple

    @property
    def rate(self) -> tuple:
        return self.r_K_cap


def layer_rate_caps(plan: LayerPlan) -> LayerRateCaps:
    K = plan.K
    r_K, r_k = [], []
    for layer in plan.finite_layers:
        r_K.append(half_log2_plus(layer.width / (K * layer.floor)))
        r_k.append(half_log2_plus(layer.width / layer.floor))
    return LayerRateCaps(tuple(r_K), tuple(r_k))


def layer0_rate(power: float) -> float:
    """Rate of an interferer's layer-0 codebook at its own receiver.

    Equals ``0.5 * log2(1 / a_k)`` whenever the layer-0 power is not capped
    by the user's budget.
    """
    return cap(power)


@dataclass(frozen=True)
class LayerContributions:
    """Per-layer secrecy sum-rate contributions and the mode chosen.

    ``modes[m]`` is one of ``"confidential"`` (users 1..K-1 send secrets,
    user K jams with a random lattice point), ``"user_K"`` (only user K
    carries a message) or ``"idle"``.
    """

    values: tuple
    modes: tuple

    @property
    def total(self) -> float:
        return float(sum(self.values))


def layer_sum_contributions(plan: LayerPlan, caps: Optional[LayerRateCaps] = None) -> LayerContributions:
    if caps is None:
        caps = layer_rate_caps(plan)
    K = plan.K
    log_k = math.log2(K)
    active, active_tx = plan.active, plan.active_tx

    senders = sorted(active_tx[0])
    if senders:
        v0 = sum(layer0_rate(plan.alloc[k - 1, 0]) for k in senders) - 0.5 * log_k
        values, modes = [max(v0, 0.0)], ["confidential" if v0 > 0 else "idle"]
    else:
        values, modes = [0.0], ["idle"]

    for layer in plan.finite_layers:
        m = layer.index
        rate = caps.rate[m - 1]
        options = {"idle": 0.0}
        if K in active[m]:
            options["user_K"] = rate
            # jamming by user K is what keeps the aligned sum uninformative
            if active_tx[m]:
                options["confidential"] = len(active_tx[m]) * rate - log_k
        # dict order makes ties resolve to the earliest option, i.e. idle
        mode = max(options, key=options.get)
        values.append(options[mode])
        modes.append(mode)
    return LayerContributions(tuple(values), tuple(modes))


def achievable_sum_rate(config: ChannelConfig) -> float:
    """Secrecy sum rate from the per-layer accounting of the layered scheme."""
    return layer_sum_contributions(build_plan(config)).total


@dataclass(frozen=True)
class DoFEstimate:
    powers: tuple
    lower: tuple
    upper: tuple
    lower_slope: float
    upper_slope: float
    fit_points: int


def _fit_slope(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.polyfit(x, y, 1)[0])


def dof_sweep(base: ChannelConfig, powers: Sequence[float]) -> DoFEstimate:
    """Slopes of both bounds against ``0.5 * log2(P)`` with every ``P_i = P``.

    The fit uses the points within the top decade of the sweep (``P`` at
    least a tenth of the largest power), or the last three points when the
    decade holds fewer.
    """
    ensure_valid(base)
    powers = np.asarray(sorted(powers), dtype=float)
    if len(powers) < 3:
        raise DegenerateSweep(f"need at least 3 sweep points, got {len(powers)}")
    lower, upper = [], []
    for p in powers:
        cfg = ChannelConfig(base.K, base.gains, [p] * base.K)
        lower.append(lower_bound(cfg))
        upper.append(upper_bound(cfg))
    lower, upper = np.asarray(lower), np.asarray(upper)
    window = powers >= powers[-1] / 10
    if window.sum() < 3:
        window = np.zeros(len(powers), dtype=bool)
        window[-3:] = True
    x = 0.5 * np.log2(powers[window])
    return DoFEstimate(
        tuple(powers), tuple(lower), tuple(upper),
        _fit_slope(x, lower[window]), _fit_slope(x, upper[window]), int(window.sum()),
    )


def geometric_powers(lo_exp: float, hi_exp: float, points: int, base: float = 2.0) -> list:
    """``points`` powers spaced evenly in exponent between ``base**lo_exp`` and ``base**hi_exp``."""
    return list(base ** np.linspace(lo_exp, hi_exp, points))


# --- randomized scans --------------------------------------------------------


def _log_uniform(rng, lo, hi, size=None):
    return 10 ** rng.uniform(math.log10(lo), math.log10(hi), size)


def random_config(rng, K: int, case: Optional[int] = None,
                  gain_range=(1e-2, 1e2), power_range=(1e-1, 1e4)) -> ChannelConfig:
    """Random channel; ``case`` 1 draws every gain in ``[0, 1)``, case 2 a symmetric one."""
    if case == 1:
        gains = rng.uniform(0.0, 1.0, K - 1)
        powers = _log_uniform(rng, *power_range, K)
    elif case == 2:
        gains = [_log_uniform(rng, *gain_range)] * (K - 1)
        p = _log_uniform(rng, *power_range)
        powers = [p] * (K - 1) + [_log_uniform(rng, *power_range)]
    else:
        gains = _log_uniform(rng, *gain_range, K - 1)
        powers = _log_uniform(rng, *power_range, K)
    return ChannelConfig(K, gains, powers)


@dataclass(frozen=True)
class GapScan:
    case: int
    K: int
    trials: int
    seed: int
    worst_gap: float
    budget: float
    violations: int
    worst_config: Optional[ChannelConfig]

    def to_dict(self) -> dict:
        return {
            "case": self.case,
            "K": self.K,
            "trials": self.trials,
            "seed": self.seed,
            "worst_gap": self.worst_gap,
            "budget": self.budget,
            "violations": self.violations,
            "worst_config": None if self.worst_config is None else self.worst_config.to_dict(),
        }


def gap_scan(case: int, trials: int, seed: int, K: int = 3) -> GapScan:
    """Largest ``upper - lower_raw`` over random configs of one constant-gap case."""
    if case not in (1, 2):
        raise ValueError(f"case must be 1 or 2, got {case}")
    budget = gap_budget_case1(K) if case == 1 else gap_budget_case2(K)
    rng = np.random.default_rng(seed)
    worst, worst_cfg, violations = -math.inf, None, 0
    for _ in range(trials):
        cfg = random_config(rng, K, case)
        gap = upper_bound(cfg) - lower_bound(cfg)
        if gap > budget + TOL:
            violations += 1
        if gap > worst:
            worst, worst_cfg = gap, cfg
    return GapScan(case, K, trials, seed, worst, budget, violations, worst_cfg)
