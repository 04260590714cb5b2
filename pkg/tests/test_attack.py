"""Attack loops: budgets, success judging, distortion caps, and metrics."""

import numpy as np
import pytest

from noisefence.attack import (
    AttackConfig,
    AttackOutcome,
    compute_metrics,
    hard_proxy_score,
    per_pixel_l2,
    run_attack,
)
from noisefence.classifier import Model, predict
from noisefence.core import DomainError, RngStream, derive_stream
from noisefence.estimator import EstimatorConfig
from noisefence.oracle import DefendedModel, NoiseSpec


def make_dm(model, spec=None, label="atk"):
    return DefendedModel(
        model=model, spec=spec or NoiseSpec(), rng=derive_stream(RngStream(0), label)
    )


def uniform_hard_model(n_classes=10, d=4):
    weights = {"W": np.zeros((n_classes, d)), "b": np.zeros(n_classes)}
    return Model(kind="linear", weights=weights)


@pytest.fixture()
def desk_instance(desk_model):
    model, data = desk_model
    x = data.inputs[0]
    clean = int(np.argmax(predict(model, x)))
    target = (clean + 1) % 10
    return model, x, clean, target


class TestConfig:
    def test_validation(self):
        with pytest.raises(DomainError):
            AttackConfig(kind="boundary")
        with pytest.raises(DomainError):
            AttackConfig(qc_limit=-1)
        with pytest.raises(DomainError):
            AttackConfig(repeat_n=0)
        with pytest.raises(DomainError):
            AttackConfig(learning_rate=0.0)

    def test_dict_roundtrip(self):
        cfg = AttackConfig(kind="zoo", targeted=False, qc_limit=500, max_distortion=0.01)
        assert AttackConfig.from_dict(cfg.to_dict()) == cfg


class TestPerPixelL2:
    def test_value(self):
        x0 = np.zeros(4)
        x = np.array([0.1, 0.0, 0.0, 0.2])
        assert per_pixel_l2(x, x0) == pytest.approx((0.01 + 0.04) / 4)


class TestRunAttack:
    CFG = AttackConfig(
        kind="nes",
        targeted=True,
        learning_rate=0.05,
        qc_limit=20_000,
        estimator=EstimatorConfig(beta=1e-3, queries_per_iter=50),
    )

    def test_clean_targeted_succeeds(self, desk_instance):
        model, x, clean, target = desk_instance
        cfg = AttackConfig.from_dict({**self.CFG.to_dict(), "target_class": target})
        out = run_attack(make_dm(model), x, clean, cfg, RngStream(1))
        assert out.success
        assert out.final_label == target
        assert out.queries <= cfg.qc_limit

    def test_untargeted_succeeds(self, desk_instance):
        model, x, clean, _ = desk_instance
        cfg = AttackConfig.from_dict({**self.CFG.to_dict(), "targeted": False})
        out = run_attack(make_dm(model), x, clean, cfg, RngStream(1))
        assert out.success
        assert out.final_label != clean

    def test_zero_budget_fails_immediately(self, desk_instance):
        model, x, clean, target = desk_instance
        cfg = AttackConfig.from_dict(
            {**self.CFG.to_dict(), "target_class": target, "qc_limit": 0}
        )
        out = run_attack(make_dm(model), x, clean, cfg, RngStream(1))
        assert not out.success
        assert out.queries == 0 and out.iterations == 0
        assert out.l2_per_pixel == 0.0

    def test_budget_never_exceeded(self, desk_instance):
        # a budget below one iteration of a doomed attack: no query is spent
        model, x, clean, target = desk_instance
        dm = make_dm(model, NoiseSpec(kind="white", sigma=1.0))
        cfg = AttackConfig.from_dict(
            {**self.CFG.to_dict(), "target_class": target, "qc_limit": 149,
             "estimator": {"beta": 1e-3, "queries_per_iter": 50}}
        )
        out = run_attack(dm, x, clean, cfg, RngStream(1))
        assert out.queries <= 149
        assert out.queries % 50 == 0

    def test_max_distortion_blocks_distant_success(self, desk_instance):
        model, x, clean, target = desk_instance
        base = {**self.CFG.to_dict(), "target_class": target}
        free = run_attack(
            make_dm(model), x, clean, AttackConfig.from_dict(base), RngStream(1)
        )
        assert free.success
        tight = AttackConfig.from_dict(
            {**base, "max_distortion": free.l2_per_pixel / 100}
        )
        capped = run_attack(make_dm(model), x, clean, tight, RngStream(1))
        assert not capped.success

    def test_targeted_requires_distinct_target(self, desk_instance):
        model, x, clean, _ = desk_instance
        cfg = AttackConfig.from_dict({**self.CFG.to_dict(), "target_class": clean})
        with pytest.raises(DomainError):
            run_attack(make_dm(model), x, clean, cfg, RngStream(1))
        with pytest.raises(DomainError):
            run_attack(make_dm(model), x, clean, self.CFG, RngStream(1))

    def test_deterministic(self, desk_instance):
        model, x, clean, target = desk_instance
        cfg = AttackConfig.from_dict(
            {**self.CFG.to_dict(), "target_class": target, "qc_limit": 2000}
        )
        a = run_attack(make_dm(model, label="d"), x, clean, cfg, RngStream(9))
        b = run_attack(make_dm(model, label="d"), x, clean, cfg, RngStream(9))
        assert (a.success, a.queries, a.iterations, a.l2_per_pixel) == (
            b.success, b.queries, b.iterations, b.l2_per_pixel
        )

    def test_zoo_untargeted_succeeds(self, desk_instance):
        model, x, clean, _ = desk_instance
        cfg = AttackConfig(
            kind="zoo",
            targeted=False,
            learning_rate=0.05,
            qc_limit=8000,
            estimator=EstimatorConfig(beta=0.4, queries_per_iter=64),
        )
        out = run_attack(make_dm(model), x, clean, cfg, RngStream(1))
        assert out.success

    def test_trajectory_recording(self, desk_instance):
        model, x, clean, target = desk_instance
        cfg = AttackConfig.from_dict(
            {**self.CFG.to_dict(), "target_class": target, "qc_limit": 500}
        )
        out = run_attack(
            make_dm(model), x, clean, cfg, RngStream(1), record_trajectory=True
        )
        assert out.trajectory is not None
        assert len(out.trajectory) == out.iterations


class TestHardProxy:
    def test_uniform_model_score_is_binomial(self):
        # against an exactly uniform hard oracle the proxy score is a
        # Binomial(R, 1/C)/R draw
        model = uniform_hard_model(n_classes=10)
        dm = make_dm(model, NoiseSpec(kind="white", sigma=0.1, label_mode="hard"))
        r = 10_000
        score = hard_proxy_score(
            dm, np.full(4, 0.5), 3, r, 0.05, derive_stream(RngStream(0), "dirs")
        )
        band = 5 * np.sqrt(0.1 * 0.9 / r)
        assert abs(score - 0.1) <= band
        assert dm.query_count == r

    def test_score_validation(self):
        model = uniform_hard_model()
        dm = make_dm(model, NoiseSpec(kind="white", sigma=0.1, label_mode="hard"))
        with pytest.raises(DomainError):
            hard_proxy_score(dm, np.full(4, 0.5), 0, 0, 0.05, RngStream(0))

    def test_hard_proxy_attack_runs(self, desk_instance):
        model, x, clean, target = desk_instance
        spec = NoiseSpec(kind="white", sigma=0.01, label_mode="hard")
        cfg = AttackConfig(
            kind="hard-proxy",
            targeted=True,
            target_class=target,
            learning_rate=0.05,
            qc_limit=4000,
            hard_proxy_r=10,
            estimator=EstimatorConfig(beta=0.05, queries_per_iter=10),
        )
        out = run_attack(make_dm(model, spec), x, clean, cfg, RngStream(1))
        assert out.queries <= cfg.qc_limit
        assert out.iterations >= 1


class TestMetrics:
    def outcome(self, success, queries=100, l2=0.01):
        return AttackOutcome(
            success=success, queries=queries, iterations=1, l2_per_pixel=l2, final_label=0
        )

    def test_mixed(self):
        outs = [self.outcome(True, 100, 0.02), self.outcome(False, 500, 0.5),
                self.outcome(True, 300, 0.04)]
        m = compute_metrics(outs)
        assert m == {
            "asr": pytest.approx(2 / 3),
            "mean_qc_success": pytest.approx(200.0),
            "mean_l2_success": pytest.approx(0.03),
        }

    def test_all_failed_gives_zeros(self):
        m = compute_metrics([self.outcome(False)])
        assert m == {"asr": 0.0, "mean_qc_success": 0.0, "mean_l2_success": 0.0}

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            compute_metrics([])
