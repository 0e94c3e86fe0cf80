"""Monte Carlo link-level simulation of the layered lattice scheme.

Every finite layer uses one integer nested lattice pair shared by all its
users, normalized to unit power and scaled by ``sqrt(P_{k,m})``, so the
users' contributions arrive at receiver K on a common scaled lattice.
Receiver K peels layers top-down, decoding the reduced sum of the layer's
lattice points and stripping it before descending; receivers 1..K-1 peel
their own layers the same way.

Dithers are redrawn uniformly on the fundamental region for every block
from the seeded stream and are known to all receivers.  Gaussian noise is
``Generator.standard_normal`` on a PCG64 stream seeded by
``SeedSequence(seed, spawn_key=(shard,))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import layer_rate_caps, layer_sum_contributions
from .core import ChannelConfig, ensure_valid
from .lattice import NestedLatticePair, centered_mod
from .layering import LayerPlan, build_plan

MAX_CODEBOOK = 10**6
DEFAULT_MARGIN = 1.0


class CodebookTooLarge(ValueError):
    pass


class UserInactive(ValueError):
    pass


def shard_rng(seed: int, shard: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(shard,))))


def nesting_ratio(rate_cap: float, margin: float) -> int:
    """Largest integer ``q`` with ``log2(q) <= rate_cap - margin``; 0 if below 2."""
    budget = rate_cap - margin
    if budget < 1.0:
        return 0
    q = int(math.floor(2.0**budget))
    # guard against 2**x landing just under an integer
    if math.log2(q + 1) <= budget:
        q += 1
    return q


@dataclass(frozen=True)
class CodedLayerConfig:
    """One layer's shared lattice pair and the users' scale factors.

    ``index`` 0 is an interferer's private layer-0 codebook (then ``users``
    holds that one user); ``mode`` follows the per-layer accounting.
    """

    index: int
    pair: NestedLatticePair
    powers: dict
    mode: str = "confidential"
    rate_cap: float = 0.0
    margin: float = DEFAULT_MARGIN

    @property
    def unit_scale(self) -> float:
        """Factor mapping the dithered lattice to unit per-dimension power."""
        return math.sqrt(12.0) / self.pair.q

    @property
    def rate(self) -> float:
        return self.pair.rate

    @property
    def users(self) -> tuple:
        return tuple(sorted(self.powers))

    def amplitude(self, k: int) -> float:
        return math.sqrt(self.powers[k]) * self.unit_scale


def _check_codebook(pair: NestedLatticePair) -> None:
    if pair.size > MAX_CODEBOOK:
        raise CodebookTooLarge(f"codebook of {pair.size} points exceeds {MAX_CODEBOOK}")


def draw_codewords(pair: NestedLatticePair, rng, trials: int) -> np.ndarray:
    lo = pair.coordinate_range[0]
    return rng.integers(lo, lo + pair.q, size=(trials, pair.N))


def draw_dithers(pair: NestedLatticePair, rng, trials: int) -> np.ndarray:
    # uniform on [-q/2, q/2); the boundary has measure zero
    return rng.uniform(-pair.q / 2, pair.q / 2, size=(trials, pair.N))


def mod_channel_decode_trial(layer: CodedLayerConfig, interference_power: float,
                             noise_variance: float, seed: int, trials: int = 1,
                             dither=None) -> np.ndarray:
    """Single-user mod-lattice channel: success flags for ``trials`` blocks.

    The received block is ``(t + d)`` scaled to unit power plus uniform
    interference of the given total power and Gaussian noise; the decoder
    strips the dither, reduces modulo the coarse lattice and picks the
    nearest codeword.
    """
    pair = layer.pair
    _check_codebook(pair)
    rng = shard_rng(seed)
    t = draw_codewords(pair, rng, trials)
    d = draw_dithers(pair, rng, trials) if dither is None else np.broadcast_to(dither, t.shape)
    g = layer.unit_scale
    received = g * centered_mod(t + d, pair.q)
    if interference_power > 0:
        half = math.sqrt(3.0 * interference_power)
        received = received + rng.uniform(-half, half, size=t.shape)
    if noise_variance > 0:
        received = received + math.sqrt(noise_variance) * rng.standard_normal(t.shape)
    y = centered_mod(received / g - d, pair.q)
    t_hat = pair.nearest_codeword(y)
    return np.all(t_hat == t, axis=1)


@dataclass
class ReceiverStats:
    """Error counts of one receiver; ``layer_errors`` is keyed by layer index."""

    receiver: int
    layers: tuple
    trials: int = 0
    block_errors: int = 0
    layer_errors: dict = field(default_factory=dict)
    wraps: dict = field(default_factory=dict)

    @property
    def block_error_rate(self) -> float:
        return self.block_errors / self.trials if self.trials else 0.0

    def merge(self, other: "ReceiverStats") -> None:
        self.trials += other.trials
        self.block_errors += other.block_errors
        for m in self.layers:
            self.layer_errors[m] = self.layer_errors.get(m, 0) + other.layer_errors.get(m, 0)
            self.wraps[m] = self.wraps.get(m, 0) + other.wraps.get(m, 0)

    def to_dict(self) -> dict:
        return {
            "receiver": self.receiver,
            "trials": self.trials,
            "block_errors": self.block_errors,
            "block_error_rate": self.block_error_rate,
            "layers": [
                {"layer": m, "errors": self.layer_errors.get(m, 0), "wraps": self.wraps.get(m, 0)}
                for m in self.layers
            ],
        }


@dataclass(frozen=True)
class CodedScheme:
    """All coded layers of a plan at a given margin."""

    plan: LayerPlan
    layers: tuple  # finite layers with q >= 2, ascending index
    private: dict  # user k -> layer-0 CodedLayerConfig
    N: int
    margin: float

    def layer(self, m: int):
        for lay in self.layers:
            if lay.index == m:
                return lay
        return None

    def rates(self) -> dict:
        out = {str(lay.index): lay.rate for lay in self.layers}
        for k, lay in self.private.items():
            out[f"0/{k}"] = lay.rate
        return out


def build_scheme(plan: LayerPlan, margin: float = DEFAULT_MARGIN, N: int = 1) -> CodedScheme:
    """Pick each layer's nesting ratio from its binding rate cap less ``margin``.

    Layers whose budget cannot carry even ``q = 2`` stay silent.
    """
    caps = layer_rate_caps(plan)
    modes = layer_sum_contributions(plan, caps).modes
    layers = []
    for layer in plan.finite_layers:
        m = layer.index
        q = nesting_ratio(caps.rate[m - 1], margin)
        users = {int(k) + 1: float(plan.alloc[k, m]) for k in np.flatnonzero(plan.alloc[:, m] > 0)}
        if q < 2 or not users:
            continue
        mode = modes[m] if modes[m] != "idle" else "user_K"
        pair = NestedLatticePair(N, q)
        _check_codebook(pair)
        layers.append(CodedLayerConfig(m, pair, users, mode, caps.rate[m - 1], margin))
    private = {}
    for k in range(1, plan.K):
        p0 = float(plan.alloc[k - 1, 0])
        if p0 <= 0:
            continue
        # the codeword sits on unit noise only at its own receiver
        cap0 = 0.5 * math.log2(p0) if p0 > 1 else 0.0
        q = nesting_ratio(cap0, margin)
        if q >= 2:
            pair = NestedLatticePair(N, q)
            _check_codebook(pair)
            private[k] = CodedLayerConfig(0, pair, {k: p0}, "confidential", cap0, margin)
    return CodedScheme(plan, tuple(layers), private, N, margin)


@dataclass
class _Draw:
    """One shard's transmitted symbols: ``t[(k, m)]``, ``d[(k, m)]``, ``x[(k, m)]``."""

    t: dict
    d: dict
    x: dict  # transmitted signal, already scaled by the user's amplitude


def _draw_symbols(scheme: CodedScheme, rng, trials: int) -> _Draw:
    K = scheme.plan.K
    t, d, x = {}, {}, {}
    for lay in scheme.layers:
        for k in lay.users:
            tk = draw_codewords(lay.pair, rng, trials)
            if lay.mode == "user_K" and k != K:
                tk = np.zeros_like(tk)
            dk = draw_dithers(lay.pair, rng, trials)
            t[k, lay.index], d[k, lay.index] = tk, dk
            x[k, lay.index] = lay.amplitude(k) * centered_mod(tk + dk, lay.pair.q)
    for k, lay in scheme.private.items():
        tk = draw_codewords(lay.pair, rng, trials)
        dk = draw_dithers(lay.pair, rng, trials)
        t[k, 0], d[k, 0] = tk, dk
        x[k, 0] = lay.amplitude(k) * centered_mod(tk + dk, lay.pair.q)
    return _Draw(t, d, x)


def received_at_K(scheme: CodedScheme, draw: _Draw, upto: int = None) -> np.ndarray:
    """Noiseless receiver-K superposition of layers ``<= upto`` (all when None)."""
    plan = scheme.plan
    out = 0.0
    for (k, m), xk in draw.x.items():
        if upto is None or m <= upto:
            out = out + math.sqrt(plan.gain(k)) * xk
    return out


def received_at_k(draw: _Draw, k: int, upto: int = None) -> np.ndarray:
    out = 0.0
    for (user, m), xk in draw.x.items():
        if user == k and (upto is None or m <= upto):
            out = out + xk
    return out


def _peel(residual, g, pair, dither_sum, truth, lower_true):
    """Decode one layer from ``residual`` and strip it.

    Returns the error flags, the wrap flags of the lower-layer residue and
    the residual handed to the next layer down.
    """
    v = residual / g - dither_sum
    t_hat = pair.nearest_codeword(centered_mod(v, pair.q))
    errors = np.any(t_hat != truth, axis=1)
    wraps = ~pair.in_region(lower_true / g)
    return errors, wraps, g * centered_mod(v - t_hat, pair.q)


def _shape(trials, N):
    return np.zeros((trials, N))


def simulate_receiver_K(plan: LayerPlan, scheme: CodedScheme, trials: int, seed: int,
                        noise_variance: float = 1.0, shard: int = 0, draw: _Draw = None,
                        noise=None) -> ReceiverStats:
    """Sequential decoding at receiver K over the coded layers, top-down."""
    K = plan.K
    layer_ids = tuple(lay.index for lay in scheme.layers)
    stats = ReceiverStats(K, layer_ids, trials)
    if trials == 0:
        return stats
    if draw is None:
        rng = shard_rng(seed, shard)
        draw = _draw_symbols(scheme, rng, trials)
        noise = math.sqrt(noise_variance) * rng.standard_normal((trials, scheme.N))
    residual = _shape(trials, scheme.N) + received_at_K(scheme, draw) + noise
    failed = np.zeros(trials, dtype=bool)
    for lay in reversed(scheme.layers):
        m = lay.index
        width = plan.intervals[m].width
        g = math.sqrt(width) * lay.unit_scale
        dsum = sum(draw.d[k, m] for k in lay.users)
        truth = centered_mod(sum(draw.t[k, m] for k in lay.users), lay.pair.q)
        lower_true = _shape(trials, scheme.N) + received_at_K(scheme, draw, upto=m - 1) + noise
        errors, wraps, residual = _peel(residual, g, lay.pair, dsum, truth, lower_true)
        failed |= errors
        stats.layer_errors[m] = int(failed.sum())
        stats.wraps[m] = int(wraps.sum())
    stats.block_errors = int(failed.sum())
    return stats


def simulate_receiver_k(plan: LayerPlan, scheme: CodedScheme, k: int, trials: int, seed: int,
                        noise_variance: float = 1.0, shard: int = 0, draw: _Draw = None,
                        noise=None) -> ReceiverStats:
    """Sequential decoding of user k's own layers at receiver k.

    Starts at the user's highest coded layer; layers where the user's point
    is fixed to zero are subtracted as known signals.
    """
    if not 1 <= k < plan.K:
        raise UserInactive(f"receiver {k} is not an interferer's receiver")
    mine = [lay for lay in scheme.layers if k in lay.users]
    if k in scheme.private:
        mine.insert(0, scheme.private[k])
    if not mine and not plan.layers_of_user[k]:
        raise UserInactive(f"user {k} has no power on any layer")
    layer_ids = tuple(lay.index for lay in mine)
    stats = ReceiverStats(k, layer_ids, trials)
    if trials == 0:
        return stats
    if draw is None:
        rng = shard_rng(seed, shard)
        draw = _draw_symbols(scheme, rng, trials)
        noise = math.sqrt(noise_variance) * rng.standard_normal((trials, scheme.N))
    residual = _shape(trials, scheme.N) + received_at_k(draw, k) + noise
    failed = np.zeros(trials, dtype=bool)
    for lay in reversed(mine):
        m = lay.index
        if lay.mode == "user_K" and m > 0:
            residual = residual - draw.x[k, m]
            stats.layer_errors[m] = int(failed.sum())
            stats.wraps[m] = 0
            continue
        g = lay.amplitude(k)
        lower_true = _shape(trials, scheme.N) + received_at_k(draw, k, upto=m - 1) + noise
        errors, wraps, residual = _peel(residual, g, lay.pair, draw.d[k, m], draw.t[k, m], lower_true)
        failed |= errors
        stats.layer_errors[m] = int(failed.sum())
        stats.wraps[m] = int(wraps.sum())
    stats.block_errors = int(failed.sum())
    return stats


@dataclass
class SimResult:
    config: dict
    seed: int
    trials: int
    shards: int
    margin: float
    N: int
    noise_variance: float
    rates: dict
    modes: dict
    receivers: dict  # receiver id -> ReceiverStats
    power: dict  # user -> empirical average power per dimension

    def block_error_rates(self) -> dict:
        return {r: s.block_error_rate for r, s in self.receivers.items()}

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "seed": self.seed,
            "trials": self.trials,
            "shards": self.shards,
            "margin": self.margin,
            "N": self.N,
            "noise_variance": self.noise_variance,
            "rates": self.rates,
            "modes": self.modes,
            "receivers": [self.receivers[r].to_dict() for r in sorted(self.receivers)],
            "empirical_power": {str(k): v for k, v in sorted(self.power.items())},
        }

    def layer_rows(self) -> list:
        """``(layer, receiver, errors, trials)`` rows for the per-layer CSV."""
        rows = []
        for r in sorted(self.receivers):
            s = self.receivers[r]
            for m in s.layers:
                rows.append((m, r, s.layer_errors.get(m, 0), s.trials))
        return rows


def _shard_sizes(trials: int, shards: int) -> list:
    base, extra = divmod(trials, shards)
    return [base + (1 if i < extra else 0) for i in range(shards)]


def end_to_end_report(config: ChannelConfig, margin: float = DEFAULT_MARGIN, trials: int = 10_000,
                      seed: int = 0, shards: int = 1, N: int = 1,
                      noise_variance: float = 1.0) -> SimResult:
    """Run every receiver over the same transmitted blocks and aggregate.

    Each shard draws its blocks from its own substream; counts are summed,
    so the result depends only on ``(config, margin, trials, seed, shards)``.
    """
    ensure_valid(config)
    if shards < 1:
        raise ValueError("shards must be at least 1")
    plan = build_plan(config)
    scheme = build_scheme(plan, margin, N)
    K = plan.K
    interferers = [k for k in range(1, K) if plan.layers_of_user[k]]
    totals = {K: ReceiverStats(K, tuple(lay.index for lay in scheme.layers))}
    power_sum = {k: 0.0 for k in range(1, K + 1)}
    for k in interferers:
        totals[k] = simulate_receiver_k(plan, scheme, k, 0, seed)
    for shard, n in enumerate(_shard_sizes(trials, shards)):
        if n == 0:
            continue
        rng = shard_rng(seed, shard)
        draw = _draw_symbols(scheme, rng, n)
        noise_K = math.sqrt(noise_variance) * rng.standard_normal((n, N))
        totals[K].merge(simulate_receiver_K(plan, scheme, n, seed, draw=draw, noise=noise_K))
        for k in interferers:
            noise_k = math.sqrt(noise_variance) * rng.standard_normal((n, N))
            totals[k].merge(simulate_receiver_k(plan, scheme, k, n, seed, draw=draw, noise=noise_k))
        for k in power_sum:
            power_sum[k] += float(np.sum(np.square(received_at_k(draw, k))))
    denom = trials * N
    power = {k: (v / denom if denom else 0.0) for k, v in power_sum.items()}
    modes = {str(lay.index): lay.mode for lay in scheme.layers}
    return SimResult(config.to_dict(), seed, trials, shards, margin, N, noise_variance,
                     scheme.rates(), modes, totals, power)
