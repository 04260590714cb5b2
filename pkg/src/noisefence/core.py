"""Shared numeric primitives: seeded counter-based RNG streams, the standard
normal quantile, and the small-noise validity predicate."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

# Floor applied to softmax values before any log-ratio, so that noisy
# non-positive outputs never produce log(0) or log of a negative number.
LOG_FLOOR = 1e-30

# Default sigma/F ratio below which log(1+v) ~ v is accepted: a 3-sigma
# excursion keeps the relative linearization error under ~16%.
SMALL_NOISE_THRESHOLD = 0.1


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


def _philox_key(seed: int, path: tuple[str, ...]) -> int:
    material = repr((seed, path)).encode()
    return int.from_bytes(hashlib.sha256(material).digest()[:16], "little")


@dataclass
class RngStream:
    """Counter-based random stream keyed by (seed, derivation path).

    Child streams derived with distinct labels are statistically independent
    and reproducible regardless of scheduling or thread count.
    """

    seed: int
    path: tuple[str, ...] = ()
    _gen: np.random.Generator | None = field(default=None, repr=False, compare=False)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            self._gen = np.random.Generator(
                np.random.Philox(key=_philox_key(self.seed, self.path))
            )
        return self._gen

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.generator.normal(loc, scale, size)

    def standard_normal(self, size=None):
        return self.generator.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)


def derive_stream(base: RngStream, label: str) -> RngStream:
    """Deterministic child stream; independent of how much `base` has drawn."""
    return RngStream(base.seed, base.path + (label,))


def inverse_normal_cdf(p: float) -> float:
    """Standard normal quantile z with Phi(z) = p."""
    if not 0.0 < p < 1.0:
        raise DomainError(f"probability must be in (0, 1), got {p}")
    return float(ndtri(p))


def normal_cdf(x: float) -> float:
    return float(ndtr(x))


@dataclass(frozen=True)
class SmallNoiseMargin:
    """Ratio of noise std to the smallest softmax value entering a log-ratio."""

    ratio: float
    threshold: float = SMALL_NOISE_THRESHOLD

    @property
    def ok(self) -> bool:
        return self.ratio <= self.threshold


def small_noise_ok(sigma: float, min_f: float) -> SmallNoiseMargin:
    """Check whether the log(1+v) ~ v linearization is trustworthy."""
    if min_f <= 0:
        raise DomainError(f"min_f must be positive, got {min_f}")
    if sigma < 0:
        raise DomainError(f"sigma must be non-negative, got {sigma}")
    return SmallNoiseMargin(ratio=sigma / min_f)
