"""The defended query interface: output perturbation (white / quantization /
correlated), soft vs hard label modes, post-processing, and query metering."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import Model, predict
from .core import DomainError, RngStream

PRESERVE_LOOP_LIMIT = 10_000


@dataclass(frozen=True)
class NoiseSpec:
    """Defense configuration.

    kind "white" adds i.i.d. N(0, sigma^2) to every softmax entry;
    "quantization" rounds entries to 2^q_bits uniform levels on [0,1];
    "correlated" adds alpha*F(x) plus tiny residual noise of std eps_sigma;
    "none" is the undefended passthrough.
    """

    kind: str = "none"  # none | white | quantization | correlated
    sigma: float = 0.0
    q_bits: int = 8
    alpha: float = 0.0
    eps_sigma: float = 1e-8
    preserve_top1: bool = False
    label_mode: str = "soft"  # soft | hard

    def __post_init__(self):
        if self.kind not in ("none", "white", "quantization", "correlated"):
            raise DomainError(f"unknown noise kind {self.kind!r}")
        if self.label_mode not in ("soft", "hard"):
            raise DomainError(f"unknown label mode {self.label_mode!r}")
        if self.sigma < 0 or self.eps_sigma < 0 or self.q_bits < 1:
            raise DomainError("sigma/eps_sigma must be >= 0 and q_bits >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sigma": self.sigma,
            "q_bits": self.q_bits,
            "alpha": self.alpha,
            "eps_sigma": self.eps_sigma,
            "preserve_top1": self.preserve_top1,
            "label_mode": self.label_mode,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NoiseSpec":
        return cls(**doc)


def quantize(values: np.ndarray, q_bits: int) -> np.ndarray:
    """Round each entry to the nearest of the 2^q_bits uniform levels on [0,1]."""
    levels = (1 << q_bits) - 1
    return np.round(values * levels) / levels


@dataclass
class DefendedModel:
    """Wraps a model behind the configured perturbation; every query call
    increments the counter by exactly one."""

    model: Model
    spec: NoiseSpec
    rng: RngStream
    query_count: int = 0
    stuck_events: int = 0

    def _perturb(self, clean: np.ndarray, preserve: bool) -> np.ndarray:
        spec = self.spec
        if spec.kind == "none":
            return clean.copy()
        if spec.kind == "quantization":
            return quantize(clean, spec.q_bits)
        if spec.kind == "white":
            noise_std = spec.sigma
            y = clean + self.rng.normal(0.0, spec.sigma, clean.shape)
        else:  # correlated
            noise_std = spec.eps_sigma
            y = clean + spec.alpha * clean + self.rng.normal(0.0, spec.eps_sigma, clean.shape)
        # abs then clip, in that order
        y = np.abs(y)
        y = np.minimum(y, 1.0)
        if preserve and noise_std > 0:
            top = int(np.argmax(clean))
            if int(np.argmax(y)) != top:
                boost_std = noise_std / np.sqrt(2.0)  # half variance
                others_max = np.max(np.delete(y, top))
                value = y[top]
                for _ in range(PRESERVE_LOOP_LIMIT):
                    if value > others_max:
                        break
                    value += abs(self.rng.normal(0.0, boost_std))
                else:
                    self.stuck_events += 1
                y[top] = min(value, 1.0)
        return y

    def query_soft(self, x: np.ndarray) -> np.ndarray:
        if self.spec.label_mode != "soft":
            raise DomainError("oracle is in hard-label mode")
        self.query_count += 1
        clean = predict(self.model, x)
        return self._perturb(clean, preserve=self.spec.preserve_top1)

    def query_hard(self, x: np.ndarray) -> int:
        if self.spec.label_mode != "hard":
            raise DomainError("oracle is in soft-label mode")
        self.query_count += 1
        clean = predict(self.model, x)
        y = self._perturb(clean, preserve=False)
        # clipping can tie several entries at 1.0; break ties randomly so a
        # large-noise oracle is near-uniform instead of biased to class 0
        top = np.flatnonzero(y == y.max())
        if len(top) > 1:
            return int(top[int(self.rng.integers(0, len(top)))])
        return int(top[0])
