import math

import pytest
from hypothesis import given, strategies as st

from manyone.core import (
    ChannelConfig,
    DimensionMismatch,
    GaussianNoiseSpec,
    KTooSmall,
    NegativeArgument,
    NegativeGain,
    NonPositivePower,
    cap,
    ensure_valid,
    max_gain_c,
    validate,
)


class TestValidate:
    def test_accepts_worked_config(self, worked):
        assert validate(worked).ok

    @pytest.mark.parametrize(
        "config, error, pointer",
        [
            (ChannelConfig(2, [1], [1, 1]), KTooSmall, "/K"),
            (ChannelConfig(3, [4], [4, 2, 20]), DimensionMismatch, "/gains"),
            (ChannelConfig(3, [4, 9], [4, 2]), DimensionMismatch, "/powers"),
            (ChannelConfig(3, [4, -1], [4, 2, 20]), NegativeGain, "/gains/1"),
            (ChannelConfig(3, [4, 9], [4, 0, 20]), NonPositivePower, "/powers/1"),
        ],
    )
    def test_rejections_carry_field(self, config, error, pointer):
        result = validate(config)
        assert not result.ok
        assert isinstance(result.error, error)
        assert result.pointer == pointer
        with pytest.raises(error):
            ensure_valid(config)

    def test_zero_gain_allowed(self):
        assert validate(ChannelConfig(3, [0, 0], [1, 1, 1])).ok

    def test_noise_spec(self):
        assert GaussianNoiseSpec().variance == 1.0
        with pytest.raises(ValueError):
            GaussianNoiseSpec(0.0)


class TestCap:
    @pytest.mark.parametrize("x, expected", [(0, 0.0), (3, 1.0)])
    def test_exact_values(self, x, expected):
        assert cap(x) == expected

    def test_twenty(self):
        assert cap(20) == pytest.approx(0.5 * math.log2(21))
        assert cap(20) == pytest.approx(2.19616, abs=1e-5)

    def test_negative(self):
        with pytest.raises(NegativeArgument):
            cap(-0.1)

    @given(st.floats(min_value=1e-12, max_value=1e12))
    def test_within_half_bit_of_high_snr_form(self, x):
        diff = cap(x) - max(0.0, 0.5 * math.log2(x))
        assert -1e-12 <= diff <= 0.5 + 1e-12

    @given(st.floats(min_value=0, max_value=1e9), st.floats(min_value=1e-6, max_value=1e3))
    def test_monotone(self, x, dx):
        assert cap(x + dx) >= cap(x)


@pytest.mark.parametrize(
    "gains, expected", [([4, 9], 9.0), ([0.2, 0.5], 1.0), ([1, 1], 1.0)]
)
def test_max_gain_c(gains, expected):
    assert max_gain_c(ChannelConfig(3, gains, [1, 1, 1])) == expected
