"""Model parameterization and unit handling.

The queue position of a transaction is modelled as

    X(t) = x0 + c t - P(t)

in block units (one full block of data = 1) and block-interval time units
(the block-arrival Poisson process P has rate 1).  Every jump of P removes
exactly one block of data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "DomainError",
    "StabilityError",
    "ModelParams",
    "UnitScale",
    "DEFAULT_SCALE",
    "JUMP_SIZE",
    "validate",
    "to_block_units",
    "from_block_units",
    "time_to_block_intervals",
    "block_intervals_to_time",
]

#: Size of every downward jump (one full block).
JUMP_SIZE = 1.0


class DomainError(ValueError):
    """An input lies outside the domain of the requested operation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class StabilityError(DomainError):
    """Raised when a proper confirmation-time law is requested with c >= 1."""


@dataclass(frozen=True)
class ModelParams:
    """Traffic rate ``c`` and initial position ``x0``, both in block units."""

    c: float
    x0: float

    @property
    def is_stable(self) -> bool:
        return self.c < 1.0

    @property
    def drift(self) -> float:
        """Mean rate of decrease of the queue position, ``1 - c``."""
        return 1.0 - self.c


def _check_finite_nonneg(field: str, value: float) -> None:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise DomainError(field, f"expected a real number, got {value!r}")
    if not math.isfinite(value):
        raise DomainError(field, f"must be finite, got {value!r}")
    if value < 0:
        raise DomainError(field, f"must be >= 0, got {value!r}")


def validate(params: ModelParams, require_stable: bool = False) -> ModelParams:
    """Return ``params`` unchanged if valid, otherwise raise.

    With ``require_stable`` the traffic rate must satisfy ``c < 1``, which is
    what makes the confirmation time finite with probability one.
    """
    _check_finite_nonneg("c", params.c)
    _check_finite_nonneg("x0", params.x0)
    if require_stable and params.c >= 1.0:
        raise StabilityError("c", f"stability requires c < 1, got {params.c!r}")
    return params


@dataclass(frozen=True)
class UnitScale:
    """Conversion between bytes/seconds and block units."""

    block_size_bytes: int = 1_000_000
    block_interval_seconds: float = 600.0

    def __post_init__(self):
        if isinstance(self.block_size_bytes, bool) or not isinstance(self.block_size_bytes, int):
            raise DomainError("block_size_bytes", "must be an integer")
        if self.block_size_bytes <= 0:
            raise DomainError("block_size_bytes", "must be positive")
        if not (math.isfinite(self.block_interval_seconds) and self.block_interval_seconds > 0):
            raise DomainError("block_interval_seconds", "must be positive and finite")


DEFAULT_SCALE = UnitScale()


def _finite(field: str, value: float) -> float:
    v = float(value)
    if not math.isfinite(v):
        raise DomainError(field, f"must be finite, got {value!r}")
    return v


def to_block_units(nbytes: int, scale: UnitScale = DEFAULT_SCALE) -> float:
    if isinstance(nbytes, int) and not isinstance(nbytes, bool):
        if nbytes < 0:
            raise DomainError("bytes", f"must be >= 0, got {nbytes!r}")
        return nbytes / scale.block_size_bytes
    return _finite("bytes", nbytes) / scale.block_size_bytes


def from_block_units(blocks: float, scale: UnitScale = DEFAULT_SCALE) -> float:
    return _finite("blocks", blocks) * scale.block_size_bytes


def time_to_block_intervals(seconds: float, scale: UnitScale = DEFAULT_SCALE) -> float:
    return _finite("seconds", seconds) / scale.block_interval_seconds


def block_intervals_to_time(t: float, scale: UnitScale = DEFAULT_SCALE) -> float:
    return _finite("t", t) * scale.block_interval_seconds
