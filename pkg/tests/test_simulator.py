import json
import math

import numpy as np
import pytest

from manyone.core import ChannelConfig
from manyone.lattice import NestedLatticePair, centered_mod
from manyone.layering import build_plan
from manyone.simulator import (
    CodebookTooLarge,
    CodedLayerConfig,
    UserInactive,
    _draw_symbols,
    build_scheme,
    end_to_end_report,
    mod_channel_decode_trial,
    nesting_ratio,
    received_at_K,
    received_at_k,
    shard_rng,
    simulate_receiver_K,
    simulate_receiver_k,
)

# interferers on layer 0 and a shared layer, plus user-K-only layers
MIXED = ChannelConfig(3, [0.01, 0.02], [1e4, 1e5, 1e6])
SYMMETRIC = ChannelConfig.symmetric(3, 1, 1e3)


def qfunc(x):
    return 0.5 * math.erfc(x / math.sqrt(2))


def single_layer(q, N=1):
    return CodedLayerConfig(1, NestedLatticePair(N, q), {1: 1.0})


class TestNestingRatio:
    @pytest.mark.parametrize("cap, margin, q", [(4.0, 1.0, 8), (3.0, 1.0, 4), (1.5, 1.0, 0), (2.0, 1.0, 2)])
    def test_values(self, cap, margin, q):
        assert nesting_ratio(cap, margin) == q

    def test_rate_under_budget(self):
        for cap in np.linspace(1, 12, 200):
            q = nesting_ratio(cap, 0.3)
            if q:
                assert math.log2(q) <= cap - 0.3 + 1e-12 < math.log2(q + 1)


class TestModChannel:
    def test_noiseless(self):
        ok = mod_channel_decode_trial(single_layer(16), 0.0, 0.0, seed=1, trials=2000)
        assert ok.all()

    def test_scalar_oracle(self):
        # rate 4 bits, signal-to-noise ratio 2**(2 * (4 + 1)): one bit of margin
        layer, noise = single_layer(16), 2.0**-10
        ok = mod_channel_decode_trial(layer, 0.0, noise, seed=2, trials=10_000)
        sigma = math.sqrt(noise) / layer.unit_scale
        expected = 2 * qfunc(0.5 / sigma)
        err = 1 - ok.mean()
        assert err < 0.05
        assert err == pytest.approx(expected, abs=4 * math.sqrt(expected / 10_000) + 1e-4)

    def test_above_cap(self):
        ok = mod_channel_decode_trial(single_layer(16), 0.0, 1.0, seed=3, trials=10_000)
        assert 1 - ok.mean() > 0.2

    def test_noise_trend(self):
        errs = [1 - mod_channel_decode_trial(single_layer(16), 0.0, v, seed=4, trials=10_000).mean()
                for v in (4e-3, 2e-3, 1e-3)]
        assert errs[0] >= errs[1] >= errs[2]

    def test_interference_counts(self):
        quiet = mod_channel_decode_trial(single_layer(8), 0.0, 2e-3, seed=5, trials=10_000).mean()
        loud = mod_channel_decode_trial(single_layer(8), 0.02, 2e-3, seed=5, trials=10_000).mean()
        assert loud < quiet

    def test_fixed_dither(self):
        ok = mod_channel_decode_trial(single_layer(5, 2), 0.0, 0.0, seed=6, trials=100, dither=[0.3, -1.2])
        assert ok.all()

    def test_guard(self):
        with pytest.raises(CodebookTooLarge):
            mod_channel_decode_trial(single_layer(1001, 2), 0.0, 1.0, seed=1)


class TestScheme:
    def test_worked_has_no_coded_layers(self, worked):
        scheme = build_scheme(build_plan(worked), margin=1.0)
        assert scheme.layers == () and scheme.private == {}

    def test_rates_respect_caps(self):
        scheme = build_scheme(build_plan(MIXED), margin=0.5)
        for lay in scheme.layers:
            assert lay.rate <= lay.rate_cap - 0.5 + 1e-12
        assert set(scheme.private) == {1, 2}

    def test_alignment_at_receiver_K(self):
        plan = build_plan(MIXED)
        scheme = build_scheme(plan, margin=0.0)
        draw = _draw_symbols(scheme, shard_rng(9), 500)
        for lay in scheme.layers:
            m = lay.index
            g = math.sqrt(plan.intervals[m].width) * lay.unit_scale
            layer_part = received_at_K(scheme, draw, m) - received_at_K(scheme, draw, m - 1)
            aligned = g * sum(centered_mod(draw.t[k, m] + draw.d[k, m], lay.pair.q) for k in lay.users)
            np.testing.assert_allclose(layer_part, aligned, rtol=1e-12, atol=1e-9)

    def test_transmit_power(self):
        plan = build_plan(MIXED)
        scheme = build_scheme(plan, margin=0.0)
        n = 20_000
        draw = _draw_symbols(scheme, shard_rng(10), n)
        for k in range(1, plan.K + 1):
            samples = np.square(received_at_k(draw, k)).ravel()
            bound = MIXED.powers[k - 1]
            assert samples.mean() <= bound + 3 * samples.std() / math.sqrt(samples.size)


class TestReceiverK:
    def test_single_layer_margin(self):
        plan = build_plan(SYMMETRIC)
        scheme = build_scheme(plan, margin=1.0)
        assert len(scheme.layers) == 1
        stats = simulate_receiver_K(plan, scheme, 10_000, seed=1)
        lay = scheme.layers[0]
        sigma = 1 / (math.sqrt(plan.intervals[1].width) * lay.unit_scale)
        assert stats.block_error_rate < 0.05
        assert stats.block_error_rate <= 2 * qfunc(0.5 / sigma) + 0.005

    @pytest.mark.parametrize("margin", [0.5, 1.0])
    def test_noiseless(self, margin):
        plan = build_plan(MIXED)
        scheme = build_scheme(plan, margin)
        stats = simulate_receiver_K(plan, scheme, 5000, seed=2, noise_variance=0.0)
        assert stats.block_errors == 0
        assert all(v == 0 for v in stats.layer_errors.values())
        assert all(v == 0 for v in stats.wraps.values())

    def test_noiseless_single_layer_any_margin(self):
        plan = build_plan(SYMMETRIC)
        stats = simulate_receiver_K(plan, build_scheme(plan, -0.5), 5000, seed=2, noise_variance=0.0)
        assert stats.block_errors == 0

    def test_wraps_without_margin(self):
        plan = build_plan(SYMMETRIC)
        stats = simulate_receiver_K(plan, build_scheme(plan, 1.0), 5000, seed=2, noise_variance=1e4)
        assert stats.wraps[1] > 0

    def test_margin_zero_elevated(self):
        plan = build_plan(MIXED)
        hi = simulate_receiver_K(plan, build_scheme(plan, 0.0), 10_000, seed=3)
        lo = simulate_receiver_K(plan, build_scheme(plan, 1.0), 10_000, seed=3)
        assert hi.block_error_rate > lo.block_error_rate

    def test_errors_propagate(self):
        plan = build_plan(MIXED)
        scheme = build_scheme(plan, margin=-1.0)
        stats = simulate_receiver_K(plan, scheme, 5000, seed=4)
        counts = [stats.layer_errors[m] for m in reversed(stats.layers)]
        assert counts == sorted(counts)
        assert stats.block_errors == counts[-1]


class TestReceiverk:
    def test_weak_user_reaches_layer0(self):
        plan = build_plan(MIXED)
        stats = simulate_receiver_k(plan, build_scheme(plan, 0.5), 1, 1000, seed=5)
        assert stats.layers[0] == 0

    def test_noiseless(self):
        plan = build_plan(MIXED)
        scheme = build_scheme(plan, margin=-0.5)
        for k in (1, 2):
            assert simulate_receiver_k(plan, scheme, k, 2000, seed=6, noise_variance=0.0).block_errors == 0

    def test_margin(self):
        plan = build_plan(SYMMETRIC)
        scheme = build_scheme(plan, margin=1.0)
        for k in (1, 2):
            assert simulate_receiver_k(plan, scheme, k, 10_000, seed=7).block_error_rate < 0.05

    def test_inactive(self):
        plan = build_plan(ChannelConfig(3, [0, 2], [5, 5, 5]))
        with pytest.raises(UserInactive):
            simulate_receiver_k(plan, build_scheme(plan), 1, 10, seed=0)
        with pytest.raises(UserInactive):
            simulate_receiver_k(plan, build_scheme(plan), 3, 10, seed=0)


class TestEndToEnd:
    def test_empty(self, worked):
        result = end_to_end_report(worked, trials=0, seed=1)
        assert all(s.trials == 0 for s in result.receivers.values())

    def test_deterministic(self):
        a = end_to_end_report(MIXED, 0.25, 3000, seed=11, shards=3).to_dict()
        b = end_to_end_report(MIXED, 0.25, 3000, seed=11, shards=3).to_dict()
        assert json.dumps(a) == json.dumps(b)

    def test_seed_matters(self):
        a = end_to_end_report(MIXED, 0.0, 3000, seed=11).to_dict()
        b = end_to_end_report(MIXED, 0.0, 3000, seed=12).to_dict()
        assert a != b

    def test_margin_trend(self):
        rates = [end_to_end_report(MIXED, m, 10_000, seed=13, shards=2).block_error_rates()
                 for m in (0.25, 0.5, 1.0)]
        for r in rates[0]:
            assert rates[0][r] >= rates[1][r] >= rates[2][r]

    def test_noise_trend(self):
        rates = [end_to_end_report(MIXED, 0.25, 10_000, seed=14, noise_variance=v).block_error_rates()
                 for v in (2.0, 1.0, 0.5)]
        for r in rates[0]:
            assert rates[0][r] >= rates[1][r] >= rates[2][r]

    def test_power_budget(self):
        result = end_to_end_report(MIXED, 0.0, 20_000, seed=15)
        for k, p in result.power.items():
            assert p <= MIXED.powers[k - 1] * 1.03

    def test_layer_rows(self):
        result = end_to_end_report(MIXED, 0.5, 100, seed=16)
        rows = result.layer_rows()
        assert rows and all(len(r) == 4 and r[3] == 100 for r in rows)
