"""Channel model for the K-user Gaussian many-to-one interference channel.

Receivers 1..K-1 see only their own transmitter; receiver K hears every
transmitter, with power gain ``a_i`` from user ``i``, and acts as the
eavesdropper on the messages of users 1..K-1.  All rates are in bits per
real channel use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional


class ValidationError(ValueError):
    """Invalid channel configuration.

    ``pointer`` is a JSON pointer to the offending field of the config
    document (``""`` for the whole document).
    """

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(message)
        self.pointer = pointer


class DimensionMismatch(ValidationError):
    pass


class NonPositivePower(ValidationError):
    pass


class NegativeGain(ValidationError):
    pass


class KTooSmall(ValidationError):
    pass


class NegativeArgument(ValueError):
    pass


@dataclass(frozen=True)
class ChannelConfig:
    """A channel instance.

    Parameters
    ----------
    K : int
        Number of users, at least 3.
    gains : sequence of float
        Power gains ``a_1..a_{K-1}`` from users 1..K-1 to receiver K.
    powers : sequence of float
        Average power budgets ``P_1..P_K``.

    The constructor does not validate; call :func:`validate` or
    :func:`ensure_valid`.
    """

    K: int
    gains: tuple = field(default=())
    powers: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "gains", tuple(float(a) for a in self.gains))
        object.__setattr__(self, "powers", tuple(float(p) for p in self.powers))

    def to_dict(self) -> dict:
        return {"K": self.K, "gains": list(self.gains), "powers": list(self.powers)}

    @classmethod
    def symmetric(cls, K: int, gain: float, power: float) -> "ChannelConfig":
        """All interferers share ``gain``; every user has ``power``."""
        return cls(K, [gain] * (K - 1), [power] * K)


@dataclass(frozen=True)
class GaussianNoiseSpec:
    variance: float = 1.0

    def __post_init__(self):
        if not self.variance > 0:
            raise ValueError(f"noise variance must be positive, got {self.variance}")


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    error: Optional[ValidationError] = None

    @property
    def reason(self) -> str:
        return "" if self.error is None else str(self.error)

    @property
    def pointer(self) -> Optional[str]:
        return None if self.error is None else self.error.pointer

    def __bool__(self):
        return self.ok


def _check(config: ChannelConfig) -> None:
    K = config.K
    if isinstance(K, bool) or not isinstance(K, int):
        raise ValidationError(f"K must be an integer, got {K!r}", "/K")
    if K < 3:
        raise KTooSmall(f"K must be at least 3, got {K}", "/K")
    if len(config.gains) != K - 1:
        raise DimensionMismatch(
            f"expected {K - 1} gains for K={K}, got {len(config.gains)}", "/gains"
        )
    if len(config.powers) != K:
        raise DimensionMismatch(
            f"expected {K} powers for K={K}, got {len(config.powers)}", "/powers"
        )
    for i, a in enumerate(config.gains):
        if not math.isfinite(a):
            raise ValidationError(f"gain a_{i + 1} is not finite", f"/gains/{i}")
        if a < 0:
            raise NegativeGain(f"gain a_{i + 1} = {a} is negative", f"/gains/{i}")
    for i, p in enumerate(config.powers):
        if not math.isfinite(p):
            raise ValidationError(f"power P_{i + 1} is not finite", f"/powers/{i}")
        if p <= 0:
            raise NonPositivePower(f"power P_{i + 1} = {p} must be positive", f"/powers/{i}")


def validate(config: ChannelConfig) -> ValidationResult:
    try:
        _check(config)
    except ValidationError as exc:
        return ValidationResult(False, exc)
    return ValidationResult(True)


def ensure_valid(config: ChannelConfig) -> ChannelConfig:
    """Return ``config`` unchanged or raise the first invariant violation."""
    _check(config)
    return config


def cap(x: float) -> float:
    """Gaussian capacity ``0.5 * log2(1 + x)``."""
    if x < 0:
        raise NegativeArgument(f"cap() requires x >= 0, got {x}")
    return 0.5 * math.log2(1.0 + x)


def half_log2_plus(x: float) -> float:
    """``max(0, 0.5 * log2(x))``, with 0 for ``x <= 0``."""
    if x <= 1.0:
        return 0.0
    return 0.5 * math.log2(x)


def max_gain_c(config: ChannelConfig) -> float:
    ensure_valid(config)
    return max([1.0, *config.gains])
