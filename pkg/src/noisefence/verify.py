"""Monte Carlo checks of the noisy-gradient theory: factor distribution, SNR
collapse, repeated-query sample complexity, MLE vs ratio estimators, the
ZOO-factor variance, and the convergence-ratio simulator."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .analytic import (
    AutozoomNoiseParams,
    NesNoiseParams,
    RatioParams,
    RepeatParams,
    autozoom_variance,
    qc_ratio,
    repeated_query_n,
    sigma_z_sq,
    snr_nes,
)
from .core import DomainError, RngStream, small_noise_ok
from .estimator import repeated_mle, repeated_ratio


class PreconditionError(ValueError):
    """Inputs outside the regime a theorem assumes."""


@dataclass
class VerificationReport:
    name: str
    n_samples: int
    empirical: dict[str, float] = field(default_factory=dict)
    analytic: dict[str, float] = field(default_factory=dict)
    rel_error: dict[str, float] = field(default_factory=dict)
    tolerance: float = 1.0
    passed: bool = False

    def finalize(self) -> "VerificationReport":
        self.passed = all(v <= self.tolerance for v in self.rel_error.values())
        return self

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n_samples": self.n_samples,
            "empirical": self.empirical,
            "analytic": self.analytic,
            "rel_error": self.rel_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _require_small_noise(sigma: float, *f_values: float) -> None:
    margin = small_noise_ok(sigma, min(f_values))
    if not margin.ok:
        raise PreconditionError(
            f"sigma/F ratio {margin.ratio:.3g} exceeds the small-noise threshold"
        )


def sample_noisy_factors(p: NesNoiseParams, n_samples: int, rng: RngStream) -> np.ndarray:
    """Draw noisy multiplication factors from the physical model: independent
    Gaussian output noise on each of the two probed softmax values."""
    v1 = rng.normal(0.0, p.sigma, n_samples)
    v2 = rng.normal(0.0, p.sigma, n_samples)
    return np.log((p.f_minus + v1) / (p.f_plus + v2)) / p.beta


def verify_theorem1(p: NesNoiseParams, a: float, n_samples: int, rng: RngStream) -> VerificationReport:
    """Empirical mean/variance of the noisy factor vs the Gaussian
    approximation N(a, sigma_Z^2 / beta^2)."""
    _require_small_noise(p.sigma, p.f_minus, p.f_plus)
    samples = sample_noisy_factors(p, n_samples, rng)
    var_pred = sigma_z_sq(p) / p.beta**2
    mean_emp = float(samples.mean())
    var_emp = float(samples.var())
    stderr = math.sqrt(var_pred / n_samples)
    ks = stats.kstest(samples, "norm", args=(a, math.sqrt(var_pred)))
    report = VerificationReport(name="theorem1", n_samples=n_samples)
    report.empirical = {"mean": mean_emp, "var": var_emp, "ks_distance": float(ks.statistic)}
    report.analytic = {"mean": a, "var": var_pred}
    # fraction of the allowance used: 3 std-errors on the mean, 5% on variance
    report.rel_error = {
        "mean": abs(mean_emp - a) / (3.0 * stderr),
        "var": abs(var_emp - var_pred) / var_pred / 0.05,
    }
    return report.finalize()


def verify_lemma1(p: NesNoiseParams, n_samples: int, rng: RngStream) -> VerificationReport:
    """Empirical factor SNR vs the closed small-noise form, 10% tolerance."""
    _require_small_noise(p.sigma, p.f_minus, p.f_plus)
    if p.f_minus == p.f_plus:
        raise PreconditionError("f_minus must differ from f_plus for a nonzero signal")
    a = p.factor
    samples = sample_noisy_factors(p, n_samples, rng)
    emp = a * a / float(np.mean((samples - a) ** 2))
    exact = snr_nes(p)["exact"]
    report = VerificationReport(name="lemma1", n_samples=n_samples, tolerance=0.10)
    report.empirical = {"snr": emp}
    report.analytic = {"snr": exact, "bound": snr_nes(p)["bound"]}
    report.rel_error = {"snr": abs(emp - exact) / exact}
    return report.finalize()


def verify_theorem3(p: RepeatParams, trials: int, rng: RngStream) -> VerificationReport:
    """Empirical sign-error rate of the repeated-query MLE at the prescribed
    sample count, compared against the target epsilon plus binomial margin."""
    result = repeated_query_n(p)
    if not result["feasible"]:
        raise PreconditionError("repeated-query estimation is infeasible at these parameters")
    n = max(result["n"], 1)
    szq = result["sigma_z_sq"]
    failures = 0
    for _ in range(trials):
        v1 = rng.normal(0.0, p.sigma, n)
        v2 = rng.normal(0.0, p.sigma, n)
        ys = p.a + np.log((p.f_t + v1) / (p.f_t + v2)) / p.beta
        if repeated_mle(ys, p.beta, szq) < 0:
            failures += 1
    rate = failures / trials
    margin = 2.0 * math.sqrt(p.epsilon * (1.0 - p.epsilon) / trials)
    report = VerificationReport(name="theorem3", n_samples=trials * n)
    report.empirical = {"failure_rate": rate, "n": float(n)}
    report.analytic = {"epsilon": p.epsilon, "margin": margin}
    report.rel_error = {"failure_rate": rate / (p.epsilon + margin)}
    return report.finalize()


def verify_lemma34(
    p: NesNoiseParams,
    n: int,
    n_bias: int,
    trials: int,
    rng: RngStream,
) -> VerificationReport:
    """MLE vs average-then-log ratio estimator on shared samples.

    Two sub-checks: at sample count `n` the mean gap between the estimators
    must stay below 5% of |a|; at the attacker's operating count `n_bias` the
    MLE's mean bias must be within 3 std-errors of a single n_bias-sample
    estimate, i.e. statistically indistinguishable from zero at that scale.
    (The linearized MLE carries a fixed O(sigma_Z^2/beta) offset, so pooling
    the std-error over all trials would shrink the yardstick below it.)
    """
    _require_small_noise(p.sigma, p.f_minus, p.f_plus)
    a = p.factor
    szq = sigma_z_sq(p)
    mles = np.empty(trials)
    ratios = np.empty(trials)
    for i in range(trials):
        f1 = p.f_minus + rng.normal(0.0, p.sigma, n)
        f2 = p.f_plus + rng.normal(0.0, p.sigma, n)
        ys = np.log(np.maximum(f1, 1e-30) / np.maximum(f2, 1e-30)) / p.beta
        mles[i] = repeated_mle(ys, p.beta, szq)
        ratios[i] = repeated_ratio(f1, f2, p.beta)
    gap = float(np.mean(np.abs(mles - ratios)))

    bias_runs = np.empty(trials)
    for i in range(trials):
        f1 = p.f_minus + rng.normal(0.0, p.sigma, n_bias)
        f2 = p.f_plus + rng.normal(0.0, p.sigma, n_bias)
        ys = np.log(np.maximum(f1, 1e-30) / np.maximum(f2, 1e-30)) / p.beta
        bias_runs[i] = repeated_mle(ys, p.beta, szq)
    stderr = math.sqrt(szq / p.beta**2 / n_bias)
    bias_mle = float(bias_runs.mean() - a)
    bias_ratio = float(ratios.mean() - a)

    report = VerificationReport(name="lemma34", n_samples=n * trials)
    report.empirical = {"bias_mle": bias_mle, "bias_ratio": bias_ratio, "mean_gap": gap}
    report.analytic = {"a": a, "stderr": stderr, "gap_allowance": 0.05 * abs(a)}
    report.rel_error = {
        "bias_mle": abs(bias_mle) / (3.0 * stderr),
        "gap": gap / (0.05 * abs(a)) if a != 0 else 0.0,
    }
    return report.finalize()


def verify_theorem4(p: AutozoomNoiseParams, n_samples: int, rng: RngStream) -> VerificationReport:
    """Empirical variance of the noisy ZOO factor vs the four-term closed
    form, 20% tolerance."""
    _require_small_noise(p.sigma, p.f_max_x, p.f_max_xb, p.f_t_x, p.f_t_xb)
    v_max = rng.normal(0.0, p.sigma, n_samples)
    v_j_max = rng.normal(0.0, p.sigma, n_samples)
    v_t = rng.normal(0.0, p.sigma, n_samples)
    v_j_t = rng.normal(0.0, p.sigma, n_samples)
    z1 = (1.0 + v_j_max / p.f_max_xb) / (1.0 + v_max / p.f_max_x)
    z2 = (1.0 + v_t / p.f_t_x) / (1.0 + v_j_t / p.f_t_xb)
    noise = np.log(z1 * z2) / p.beta
    var_emp = float(noise.var())
    pred = autozoom_variance(p)
    report = VerificationReport(name="theorem4", n_samples=n_samples, tolerance=0.20)
    report.empirical = {"var": var_emp}
    report.analytic = {"var": pred["var_a"], "snr_bound": pred["snr_bound"]}
    report.rel_error = {"var": abs(var_emp - pred["var_a"]) / pred["var_a"]}
    return report.finalize()


@dataclass(frozen=True)
class ConvergenceSpec:
    """Scalar gradient-descent convergence model with a sigmoid response."""

    w: float = 1.0
    x0: float = 0.0
    x_star: float = 0.3
    a: float = 0.005
    snr: float = 1e-2
    eta_over_v0: float = 0.9
    epsilon: float = 0.1
    trials: int = 400
    max_iters: int = 10_000_000

    def __post_init__(self):
        if self.x0 == self.x_star:
            raise DomainError("x0 must differ from x_star")
        if self.a <= 0 or self.w <= 0 or self.snr <= 0:
            raise DomainError("need a > 0, w > 0, snr > 0")
        if not 0 < self.eta_over_v0 < 1 or not 0 < self.epsilon < 0.5:
            raise DomainError("eta_over_v0 in (0,1) and epsilon in (0, 0.5) required")


def _sigmoid(z: float) -> float:
    return 1.0 / (1.0 + math.exp(z))


def _sigmoid_deriv(z: float) -> float:
    s = _sigmoid(z)
    return -s * (1.0 - s)


def _descend(spec: ConvergenceSpec, rates) -> int:
    """Iterations of x <- x - rate * f'(x) until |w x* - w x| <= eta.

    `rates` yields the per-iteration learning rate; returns max_iters if the
    target distance is never reached.
    """
    w, z_star = spec.w, spec.w * spec.x_star
    f_star = _sigmoid(z_star)
    x = spec.x0
    v0 = abs(z_star - w * spec.x0)
    eta = spec.eta_over_v0 * v0
    for i, rate in enumerate(rates):
        if i >= spec.max_iters:
            return spec.max_iters
        z = w * x
        if abs(z_star - z) <= eta:
            return i
        grad = (_sigmoid(z) - f_star) * _sigmoid_deriv(z) * w
        x = x - rate * grad
    return spec.max_iters


def _constant_rates(a: float):
    while True:
        yield a


def _noisy_rates(a: float, snr: float, gen: np.random.Generator):
    scale = a / math.sqrt(snr)
    while True:
        yield a + scale * gen.standard_normal()


def convergence_lambda(spec: ConvergenceSpec) -> float:
    """Numeric curvature constant: path Lipschitz bound of the response times
    w^2 |F'| at the start point."""
    z0, z_star = spec.w * spec.x0, spec.w * spec.x_star
    grid = np.linspace(min(z0, z_star), max(z0, z_star), 201)
    lip = max(abs(_sigmoid_deriv(z)) for z in grid)
    return lip * spec.w**2 * abs(_sigmoid_deriv(z0))


def simulate_convergence(spec: ConvergenceSpec, rng: RngStream) -> dict:
    """Empirical iteration blowup of noisy-rate descent vs the closed-form
    query-count ratio."""
    n_clean = _descend(spec, _constant_rates(spec.a))
    if n_clean >= spec.max_iters:
        raise DomainError("clean run failed to converge within max_iters")
    counts = np.empty(spec.trials)
    for t in range(spec.trials):
        counts[t] = _descend(
            spec, _noisy_rates(spec.a, spec.snr, _trial_generator(rng, t))
        )
    n_noisy = float(np.quantile(counts, 1.0 - spec.epsilon, method="higher"))
    lam = convergence_lambda(spec)
    r_theory = qc_ratio(
        RatioParams(
            a_lambda=spec.a * lam,
            eta_over_v0=spec.eta_over_v0,
            epsilon=spec.epsilon,
            snr=spec.snr,
        )
    )
    return {
        "n_clean": n_clean,
        "n_noisy_q": int(n_noisy),
        "r_emp": n_noisy / n_clean,
        "r_theory": r_theory,
        "lambda": lam,
    }


def _trial_generator(rng: RngStream, trial: int) -> np.random.Generator:
    from .core import derive_stream

    return derive_stream(rng, f"trial-{trial}").generator


def run_suite(seed: int, suites: list[str] | None = None) -> list[VerificationReport]:
    """Run the standard verification battery; one report per suite name."""
    base = RngStream(seed)
    available = ["theorem1", "lemma1", "theorem3", "lemma34", "theorem4", "convergence"]
    selected = available if suites in (None, ["all"]) else suites
    unknown = [s for s in selected if s not in available]
    if unknown:
        raise DomainError(f"unknown suite name(s): {unknown}")
    from .core import derive_stream

    reports = []
    for name in selected:
        rng = derive_stream(base, name)
        if name == "theorem1":
            p = NesNoiseParams(sigma=1e-3, beta=1e-3, f_minus=0.105, f_plus=0.095)
            reports.append(verify_theorem1(p, p.factor, 1_000_000, rng))
        elif name == "lemma1":
            p = NesNoiseParams(sigma=1e-3, beta=1e-3, f_minus=0.1005, f_plus=0.0995)
            reports.append(verify_lemma1(p, 400_000, rng))
        elif name == "theorem3":
            p = RepeatParams(sigma=5e-6, f_t=4e-4, beta=1e-3, a=1.0, epsilon=0.3)
            reports.append(verify_theorem3(p, 10_000, rng))
        elif name == "lemma34":
            p = NesNoiseParams(sigma=1e-3, beta=1e-3, f_minus=0.1005, f_plus=0.0995)
            reports.append(verify_lemma34(p, 100_000, 10_000, 20, rng))
        elif name == "theorem4":
            p = AutozoomNoiseParams(
                sigma=1e-3, beta=1e-3, f_max_x=0.1, f_max_xb=0.1, f_t_x=0.1, f_t_xb=0.1
            )
            reports.append(verify_theorem4(p, 500_000, rng))
        else:
            spec = ConvergenceSpec(snr=1e-2, trials=400, max_iters=1_000_000)
            result = simulate_convergence(spec, rng)
            report = VerificationReport(name="convergence", n_samples=spec.trials, tolerance=3.0)
            report.empirical = {"r_emp": result["r_emp"]}
            report.analytic = {"r_theory": result["r_theory"]}
            ratio = result["r_emp"] / result["r_theory"]
            report.rel_error = {"ratio": max(ratio, 1.0 / ratio)}
            reports.append(report.finalize())
    return reports
