"""Closed-form expressions for the noisy-gradient analysis: the log-ratio
noise variance, the noisy multiplication factor's distribution, gradient SNR
and bounds, the query-count blowup ratio, the repeated-query sample
complexity, the ZOO-factor variance, and the quantization degeneracy."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import DomainError, inverse_normal_cdf, normal_cdf
from .oracle import quantize


@dataclass(frozen=True)
class NesNoiseParams:
    """Inputs to the NES log-ratio noise formulas: defense noise std, probe
    radius, the two probed softmax values, and a Lipschitz bound."""

    sigma: float
    beta: float
    f_minus: float
    f_plus: float
    lipschitz: float = 0.0

    def __post_init__(self):
        if self.sigma < 0 or self.beta <= 0 or self.lipschitz < 0:
            raise DomainError("need sigma >= 0, beta > 0, lipschitz >= 0")
        if not (0 < self.f_minus <= 1 and 0 < self.f_plus <= 1):
            raise DomainError("softmax values must be in (0, 1]")

    @property
    def factor(self) -> float:
        """The noiseless multiplication factor log(f_minus/f_plus)/beta."""
        return math.log(self.f_minus / self.f_plus) / self.beta


@dataclass(frozen=True)
class RatioParams:
    a_lambda: float  # learning rate times curvature constant
    eta_over_v0: float  # target distance relative to initial distance
    epsilon: float  # confidence tail probability
    snr: float

    def __post_init__(self):
        if self.a_lambda <= 0 or not 0 <= self.eta_over_v0 < 1:
            raise DomainError("need a_lambda > 0 and eta_over_v0 in [0, 1)")
        if not 0 < self.epsilon < 0.5:
            raise DomainError("epsilon must be in (0, 0.5)")
        if self.snr <= 0:
            raise DomainError("snr must be positive")


@dataclass(frozen=True)
class RepeatParams:
    sigma: float
    f_t: float
    beta: float
    a: float
    epsilon: float

    def __post_init__(self):
        if self.sigma < 0 or self.f_t <= 0 or self.beta <= 0 or self.a <= 0:
            raise DomainError("need sigma >= 0, f_t > 0, beta > 0, a > 0")
        if not 0 < self.epsilon < 0.5:
            raise DomainError("epsilon must be in (0, 0.5)")


@dataclass(frozen=True)
class AutozoomNoiseParams:
    sigma: float
    beta: float
    f_max_x: float
    f_max_xb: float
    f_t_x: float
    f_t_xb: float
    lipschitz: float = 0.0

    def __post_init__(self):
        if self.sigma < 0 or self.beta <= 0:
            raise DomainError("need sigma >= 0 and beta > 0")
        for f in (self.f_max_x, self.f_max_xb, self.f_t_x, self.f_t_xb):
            if not 0 < f <= 1:
                raise DomainError("softmax values must be in (0, 1]")


def sigma_z_sq(p: NesNoiseParams) -> float:
    """Variance of the log-ratio noise multiplier Z."""
    return p.sigma**2 / p.f_minus**2 + p.sigma**2 / p.f_plus**2


def snr_nes(p: NesNoiseParams) -> dict[str, float]:
    """SNR of the noisy NES factor: exact small-noise form and the Lipschitz
    upper bound 2 L^2 beta^2 / sigma^2. Returns inf for sigma = 0."""
    if p.sigma == 0:
        return {"exact": math.inf, "bound": math.inf}
    exact = ((p.f_minus - p.f_plus) ** 2 * p.f_minus**2) / (
        p.sigma**2 * (p.f_minus**2 + p.f_plus**2)
    )
    bound = 2.0 * p.lipschitz**2 * p.beta**2 / p.sigma**2
    return {"exact": exact, "bound": bound}


def snr_db(snr: float) -> float:
    return 10.0 * math.log10(snr) if snr > 0 else -math.inf


def pdf_a(x: float, a: float, beta: float, sigma_z: float) -> float:
    """Density of the noisy factor A = a + log(Z)/beta with Z ~ N(1, sigma_Z^2),
    by change of variables Z = exp(beta (x - a))."""
    if beta <= 0 or sigma_z <= 0:
        raise DomainError("need beta > 0 and sigma_z > 0")
    z = math.exp(beta * (x - a))
    return beta * z * math.exp(-((z - 1.0) ** 2) / (2.0 * sigma_z**2)) / (
        math.sqrt(2.0 * math.pi) * sigma_z
    )


def prob_a_negative(a: float, beta: float, sigma_z: float, method: str = "exact") -> float:
    """P[A < 0] for the noisy factor.

    exact: P[Z < exp(-beta a)] with Z ~ N(1, sigma_Z^2);
    gaussian: the linearized tail Phi(-a beta / sigma_Z).
    """
    if sigma_z < 0 or beta <= 0:
        raise DomainError("need sigma_z >= 0 and beta > 0")
    if method not in ("exact", "gaussian"):
        raise DomainError(f"unknown method {method!r}")
    if sigma_z == 0:
        return 0.5 if a == 0 else (0.0 if a > 0 else 1.0)
    if method == "exact":
        return normal_cdf((math.exp(-beta * a) - 1.0) / sigma_z)
    return normal_cdf(-a * beta / sigma_z)


def qc_ratio(p: RatioParams) -> float:
    """Ratio of query counts with vs without defense noise; >= 1 for
    epsilon < 0.5 and -> 1 as SNR -> inf."""
    k = inverse_normal_cdf(p.epsilon) * math.sqrt(p.a_lambda) / math.sqrt(
        p.snr * (1.0 - p.eta_over_v0)
    )
    return 0.25 * (math.sqrt(k * k + 4.0) - k) ** 2


def repeated_query_n(p: RepeatParams) -> dict:
    """Number of repeated queries needed to keep the sign-error probability of
    the corrected mean estimate below epsilon; infeasible when the log-ratio
    noise variance reaches a*beta."""
    szq = 2.0 * p.sigma**2 / p.f_t**2
    if szq >= p.a * p.beta:
        return {"feasible": False, "n": None, "sigma_z_sq": szq}
    if szq == 0:
        return {"feasible": True, "n": 0, "sigma_z_sq": 0.0}
    denom = math.exp(szq - p.a * p.beta) - 1.0
    n = szq * (inverse_normal_cdf(p.epsilon) / denom) ** 2
    return {"feasible": True, "n": math.ceil(n), "sigma_z_sq": szq}


def autozoom_variance(p: AutozoomNoiseParams) -> dict[str, float]:
    """Small-noise variance of the noisy ZOO factor and its SNR bound."""
    var_a = (p.sigma**2 / p.beta**2) * (
        1.0 / p.f_max_x**2 + 1.0 / p.f_max_xb**2 + 1.0 / p.f_t_x**2 + 1.0 / p.f_t_xb**2
    )
    bound = (
        p.lipschitz**2 * p.beta**2 / (2.0 * p.sigma**2) if p.sigma > 0 else math.inf
    )
    return {"var_a": var_a, "snr_bound": bound}


def quantized_z2(f_t_x: float, f_t_xb: float, q_bits: int) -> float:
    """Deterministic residual multiplier of the quantized C&W log-ratio when
    both probed values share one quantization level."""
    import numpy as np

    level_x = float(quantize(np.array([f_t_x]), q_bits)[0])
    level_xb = float(quantize(np.array([f_t_xb]), q_bits)[0])
    if level_x != level_xb:
        raise DomainError(
            "inputs quantize to different levels; the shared-level form does not apply"
        )
    q = level_x
    return (2.0 - q / f_t_x) / (2.0 - q / f_t_xb)


def analysis_rows(
    sigmas,
    beta: float,
    mean_dft: float,
    mean_ft: float,
    a_lambda: float,
    eta_over_v0: float,
    epsilon: float,
    repeat_a: float = 1.0,
    repeat_epsilon: float = 0.3,
) -> list[dict]:
    """Per-sigma analysis curve: log-ratio noise variance, factor SNR, QC
    blowup ratio, and repeated-query sample complexity.

    The probed values are centered on mean_ft with spread mean_dft, the same
    reduction used for the headline worked example.
    """
    f_minus = mean_ft + mean_dft / 2.0
    f_plus = mean_ft - mean_dft / 2.0
    rows = []
    for sigma in sigmas:
        if sigma == 0:
            rows.append(
                {
                    "sigma": 0.0,
                    "sigma_z_sq": 0.0,
                    "snr_exact": math.inf,
                    "snr_db": math.inf,
                    "qc_ratio": 1.0,
                    "repeat_n": 0,
                }
            )
            continue
        p = NesNoiseParams(sigma=sigma, beta=beta, f_minus=f_minus, f_plus=f_plus)
        snr = snr_nes(p)["exact"]
        ratio = qc_ratio(
            RatioParams(a_lambda=a_lambda, eta_over_v0=eta_over_v0, epsilon=epsilon, snr=snr)
        )
        rep = repeated_query_n(
            RepeatParams(sigma=sigma, f_t=mean_ft, beta=beta, a=repeat_a, epsilon=repeat_epsilon)
        )
        rows.append(
            {
                "sigma": sigma,
                "sigma_z_sq": sigma_z_sq(p),
                "snr_exact": snr,
                "snr_db": snr_db(snr),
                "qc_ratio": ratio,
                "repeat_n": rep["n"] if rep["feasible"] else "inf",
            }
        )
    return rows
