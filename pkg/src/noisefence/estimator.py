"""Black-box gradient estimators and the attacker's counter-defense
estimators: antithetic NES, ZOO/C&W finite differences, repeated-query MLE
and ratio estimators, and EOT-averaged probing."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import DomainError, LOG_FLOOR, RngStream
from .oracle import DefendedModel


class EstimatorUndefinedError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    beta: float = 1e-3
    queries_per_iter: int = 50  # J; must be even for antithetic pairs

    def __post_init__(self):
        if self.beta <= 0:
            raise DomainError("beta must be positive")
        if self.queries_per_iter < 2 or self.queries_per_iter % 2:
            raise DomainError("queries_per_iter must be even and >= 2")

    def to_dict(self) -> dict:
        return {"beta": self.beta, "queries_per_iter": self.queries_per_iter}

    @classmethod
    def from_dict(cls, doc: dict) -> "EstimatorConfig":
        return cls(**doc)


@dataclass
class GradEstimate:
    vector: np.ndarray
    factors: list[float] = field(default_factory=list)
    queries_used: int = 0


def unit_direction(dim: int, rng: RngStream) -> np.ndarray:
    u = rng.standard_normal(dim)
    return u / np.linalg.norm(u)


def _floored(value: float) -> float:
    return max(float(value), LOG_FLOOR)


def log_ratio_factor(f_minus: float, f_plus: float, beta: float) -> float:
    return float(np.log(_floored(f_minus) / _floored(f_plus)) / beta)


def nes_gradient(
    dm: DefendedModel,
    x: np.ndarray,
    target: int,
    cfg: EstimatorConfig,
    rng: RngStream,
    repeat_n: int = 1,
) -> GradEstimate:
    """Antithetic NES estimate of the gradient of -log F_t at x.

    With repeat_n > 1 each antithetic pair is queried repeat_n times and the
    per-pair factor is the noise-corrected MLE over the repeated log-ratios.
    """
    half = cfg.queries_per_iter // 2
    beta = cfg.beta
    vector = np.zeros_like(x, dtype=np.float64)
    factors = []
    queries = 0
    for _ in range(half):
        u = unit_direction(len(x), rng)
        if repeat_n == 1:
            f_minus = dm.query_soft(x - beta * u)[target]
            f_plus = dm.query_soft(x + beta * u)[target]
            queries += 2
            factor = log_ratio_factor(f_minus, f_plus, beta)
        else:
            minus = np.empty(repeat_n)
            plus = np.empty(repeat_n)
            for n in range(repeat_n):
                minus[n] = dm.query_soft(x - beta * u)[target]
                plus[n] = dm.query_soft(x + beta * u)[target]
            queries += 2 * repeat_n
            ys = np.log(np.maximum(minus, LOG_FLOOR) / np.maximum(plus, LOG_FLOOR)) / beta
            sigma_z_sq = dm.spec.sigma**2 * (
                1.0 / _floored(minus.mean()) ** 2 + 1.0 / _floored(plus.mean()) ** 2
            )
            factor = repeated_mle(ys, beta, sigma_z_sq)
        factors.append(factor)
        vector += factor * u
    vector /= cfg.queries_per_iter
    return GradEstimate(vector=vector, factors=factors, queries_used=queries)


def cw_loss(probs: np.ndarray, target: int) -> float:
    """log(F_max / F_t) with F_max the largest non-target entry."""
    f_max = float(np.max(np.delete(probs, target)))
    return float(np.log(_floored(f_max) / _floored(probs[target])))


def zoo_gradient(
    dm: DefendedModel,
    x: np.ndarray,
    target: int,
    cfg: EstimatorConfig,
    rng: RngStream,
    repeat_n: int = 1,
) -> GradEstimate:
    """ZOO/AutoZOOM finite-difference estimate of the C&W loss gradient.

    One base query shared by all J-1 probes; with repeat_n > 1 both the base
    and each probe loss are averaged over repeat_n queries.
    """
    beta = cfg.beta
    n_probes = cfg.queries_per_iter - 1

    def loss_at(point: np.ndarray) -> float:
        vals = [cw_loss(dm.query_soft(point), target) for _ in range(repeat_n)]
        return float(np.mean(vals))

    f_base = loss_at(x)
    queries = repeat_n
    vector = np.zeros_like(x, dtype=np.float64)
    factors = []
    for _ in range(n_probes):
        u = unit_direction(len(x), rng)
        factor = (loss_at(x + beta * u) - f_base) / beta
        queries += repeat_n
        factors.append(factor)
        vector += factor * u
    vector /= cfg.queries_per_iter
    return GradEstimate(vector=vector, factors=factors, queries_used=queries)


def eot_gradient(
    dm: DefendedModel,
    x: np.ndarray,
    target: int,
    cfg: EstimatorConfig,
    rng: RngStream,
    transform_sigma: float = 0.0,
) -> GradEstimate:
    """NES estimate with each antithetic pair centered at a randomly
    transformed input x + dx_j, dx_j ~ N(0, transform_sigma^2 I)."""
    half = cfg.queries_per_iter // 2
    beta = cfg.beta
    vector = np.zeros_like(x, dtype=np.float64)
    factors = []
    for _ in range(half):
        u = unit_direction(len(x), rng)
        center = x + transform_sigma * rng.standard_normal(len(x)) if transform_sigma > 0 else x
        f_minus = dm.query_soft(center - beta * u)[target]
        f_plus = dm.query_soft(center + beta * u)[target]
        factor = log_ratio_factor(f_minus, f_plus, beta)
        factors.append(factor)
        vector += factor * u
    vector /= cfg.queries_per_iter
    return GradEstimate(vector=vector, factors=factors, queries_used=cfg.queries_per_iter)


def repeated_mle(samples, beta: float, sigma_z_sq: float) -> float:
    """Noise-corrected maximum likelihood estimate of the multiplication
    factor from repeated log-ratio samples: mean(y) - sigma_Z^2 / beta."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 1:
        raise DomainError("need at least one sample")
    if beta <= 0:
        raise DomainError("beta must be positive")
    return float(samples.mean() - sigma_z_sq / beta)


def repeated_ratio(f1_samples, f2_samples, beta: float) -> float:
    """Average-then-log estimate: log(mean(f1)/mean(f2)) / beta."""
    f1 = np.asarray(f1_samples, dtype=np.float64)
    f2 = np.asarray(f2_samples, dtype=np.float64)
    if f1.size < 1 or f2.size < 1 or f1.size != f2.size:
        raise DomainError("sample lists must be non-empty and equal length")
    if beta <= 0:
        raise DomainError("beta must be positive")
    m1, m2 = f1.mean(), f2.mean()
    if m1 <= 0 or m2 <= 0:
        raise EstimatorUndefinedError("sample means must be positive")
    return float(np.log(m1 / m2) / beta)
