"""Full black-box attack loops (NES, ZOO/C&W, hard-label proxy) with query
budgets, clean-model success checks, and ASR/QC/distortion metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import predict
from .core import DomainError, RngStream
from .estimator import EstimatorConfig, log_ratio_factor, nes_gradient, unit_direction, zoo_gradient
from .oracle import DefendedModel


@dataclass(frozen=True)
class AttackConfig:
    kind: str = "nes"  # nes | zoo | hard-proxy
    targeted: bool = True
    target_class: int | None = None
    learning_rate: float = 0.01
    qc_limit: int = 20_000
    max_distortion: float | None = None  # per-pixel squared-L2 threshold
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    hard_proxy_r: int = 20  # hard-label queries per proxy score
    hard_proxy_spread: float = 0.05
    repeat_n: int = 1  # repeated queries per probe (counter-defense)

    def __post_init__(self):
        if self.kind not in ("nes", "zoo", "hard-proxy"):
            raise DomainError(f"unknown attack kind {self.kind!r}")
        if self.qc_limit < 0 or self.repeat_n < 1 or self.hard_proxy_r < 1:
            raise DomainError("qc_limit >= 0, repeat_n >= 1, hard_proxy_r >= 1 required")
        if self.learning_rate <= 0:
            raise DomainError("learning_rate must be positive")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "targeted": self.targeted,
            "target_class": self.target_class,
            "learning_rate": self.learning_rate,
            "qc_limit": self.qc_limit,
            "max_distortion": self.max_distortion,
            "estimator": self.estimator.to_dict(),
            "hard_proxy_r": self.hard_proxy_r,
            "hard_proxy_spread": self.hard_proxy_spread,
            "repeat_n": self.repeat_n,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AttackConfig":
        doc = dict(doc)
        if "estimator" in doc:
            doc["estimator"] = EstimatorConfig.from_dict(doc["estimator"])
        return cls(**doc)


@dataclass
class AttackOutcome:
    success: bool
    queries: int
    iterations: int
    l2_per_pixel: float
    final_label: int
    trajectory: list[tuple[int, float]] | None = None


def hard_proxy_score(
    dm: DefendedModel, x: np.ndarray, target: int, r: int, spread: float, rng: RngStream
) -> float:
    """Fraction of randomly perturbed hard-label queries that return the
    target class; a soft surrogate for F_t built from R queries."""
    if r < 1:
        raise DomainError("r must be >= 1")
    hits = 0
    for _ in range(r):
        delta = spread * rng.standard_normal(len(x))
        if dm.query_hard(x + delta) == target:
            hits += 1
    return hits / r


def per_pixel_l2(x_adv: np.ndarray, x0: np.ndarray) -> float:
    """Squared L2 distortion divided by the input dimension."""
    diff = x_adv - x0
    return float(diff @ diff) / len(x0)


def _hard_proxy_gradient(dm, x, target, cfg: AttackConfig, rng: RngStream):
    """Antithetic NES over the proxy score, floored at 1/R."""
    est = cfg.estimator
    half = est.queries_per_iter // 2
    floor = 1.0 / cfg.hard_proxy_r
    vector = np.zeros_like(x)
    queries = 0
    for _ in range(half):
        u = unit_direction(len(x), rng)
        s_minus = hard_proxy_score(
            dm, x - est.beta * u, target, cfg.hard_proxy_r, cfg.hard_proxy_spread, rng
        )
        s_plus = hard_proxy_score(
            dm, x + est.beta * u, target, cfg.hard_proxy_r, cfg.hard_proxy_spread, rng
        )
        queries += 2 * cfg.hard_proxy_r
        factor = log_ratio_factor(max(s_minus, floor), max(s_plus, floor), est.beta)
        vector += factor * u
    return vector / est.queries_per_iter, queries


def run_attack(
    dm: DefendedModel,
    x0: np.ndarray,
    clean_class: int,
    cfg: AttackConfig,
    rng: RngStream,
    record_trajectory: bool = False,
) -> AttackOutcome:
    """Iterative estimated-gradient descent within a query budget.

    Success is always judged on the clean classifier, never on a noisy
    output; the per-iteration clean evaluation is not charged to the
    attacker's budget.
    """
    if cfg.targeted:
        if cfg.target_class is None or cfg.target_class == clean_class:
            raise DomainError("targeted attack needs a target_class distinct from the clean class")
        target = cfg.target_class
    else:
        target = clean_class

    x = x0.astype(np.float64).copy()
    start_count = dm.query_count
    iterations = 0
    trajectory: list[tuple[int, float]] = []
    per_iter_cost = _iteration_cost(cfg)

    def finish(success: bool) -> AttackOutcome:
        label = int(np.argmax(predict(dm.model, x)))
        return AttackOutcome(
            success=success,
            queries=dm.query_count - start_count,
            iterations=iterations,
            l2_per_pixel=per_pixel_l2(x, x0),
            final_label=label,
            trajectory=trajectory if record_trajectory else None,
        )

    def is_success() -> bool:
        label = int(np.argmax(predict(dm.model, x)))
        ok = label == target if cfg.targeted else label != clean_class
        if ok and cfg.max_distortion is not None:
            ok = per_pixel_l2(x, x0) <= cfg.max_distortion
        return ok

    while dm.query_count - start_count + per_iter_cost <= cfg.qc_limit:
        if cfg.kind == "nes":
            est = nes_gradient(dm, x, target, cfg.estimator, rng, repeat_n=cfg.repeat_n)
            grad = est.vector
            # targeted NES descends -log F_t; untargeted flips the sign to
            # descend +log F_t of the clean class
            if not cfg.targeted:
                grad = -grad
        elif cfg.kind == "zoo":
            est = zoo_gradient(dm, x, target, cfg.estimator, rng, repeat_n=cfg.repeat_n)
            # C&W loss log(F_max/F_t) drives toward the target; untargeted
            # uses log(F_t/F_max) with t the clean class
            grad = est.vector if cfg.targeted else -est.vector
        else:
            grad, _ = _hard_proxy_gradient(dm, x, target, cfg, rng)
            if not cfg.targeted:
                grad = -grad
        # normalized step: the log-ratio factors blow up under output noise,
        # so a raw gradient step would teleport x across the box
        norm = float(np.linalg.norm(grad))
        if norm > 0.0:
            grad = grad / norm
        x = np.clip(x - cfg.learning_rate * grad, 0.0, 1.0)
        iterations += 1
        if record_trajectory:
            trajectory.append((iterations, float(np.linalg.norm(grad))))
        if is_success():
            return finish(True)
    return finish(False)


def _iteration_cost(cfg: AttackConfig) -> int:
    if cfg.kind == "hard-proxy":
        return cfg.estimator.queries_per_iter * cfg.hard_proxy_r
    return cfg.estimator.queries_per_iter * cfg.repeat_n


def compute_metrics(outcomes: list[AttackOutcome]) -> dict[str, float]:
    """ASR plus mean query count and distortion over successful runs only;
    zeros when nothing succeeded."""
    if not outcomes:
        raise DomainError("outcome list must be non-empty")
    successes = [o for o in outcomes if o.success]
    asr = len(successes) / len(outcomes)
    if not successes:
        return {"asr": asr, "mean_qc_success": 0.0, "mean_l2_success": 0.0}
    return {
        "asr": asr,
        "mean_qc_success": float(np.mean([o.queries for o in successes])),
        "mean_l2_success": float(np.mean([o.l2_per_pixel for o in successes])),
    }
