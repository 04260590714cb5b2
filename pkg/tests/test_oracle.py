"""Defended oracle: perturbation kinds, label modes, preservation, metering."""

import numpy as np
import pytest

from noisefence.classifier import Model, predict
from noisefence.core import DomainError, RngStream, derive_stream
from noisefence.oracle import DefendedModel, NoiseSpec, quantize


def uniform_model(n_classes=5, d=4):
    """Zero-weight linear model: exactly uniform softmax everywhere."""
    weights = {"W": np.zeros((n_classes, d)), "b": np.zeros(n_classes)}
    return Model(kind="linear", weights=weights)


def make_dm(model, spec, label="t"):
    return DefendedModel(model=model, spec=spec, rng=derive_stream(RngStream(0), label))


class TestNoiseSpec:
    def test_defaults_passthrough(self):
        assert NoiseSpec().kind == "none"

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"kind": "pepper"},
            {"label_mode": "fuzzy"},
            {"sigma": -0.1},
            {"eps_sigma": -1.0},
            {"q_bits": 0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(DomainError):
            NoiseSpec(**kwargs)

    def test_dict_roundtrip(self):
        spec = NoiseSpec(kind="white", sigma=0.01, preserve_top1=True)
        assert NoiseSpec.from_dict(spec.to_dict()) == spec


class TestQuantize:
    def test_two_bit_example(self):
        out = quantize(np.array([0.7, 0.2, 0.1]), 2)
        np.testing.assert_allclose(out, [2 / 3, 1 / 3, 0.0], atol=1e-12)

    def test_idempotent(self):
        values = RngStream(0).uniform(size=100)
        once = quantize(values, 4)
        np.testing.assert_array_equal(quantize(once, 4), once)

    def test_endpoints_are_levels(self):
        np.testing.assert_array_equal(quantize(np.array([0.0, 1.0]), 3), [0.0, 1.0])

    def test_level_count(self):
        values = np.linspace(0, 1, 1000)
        assert len(set(quantize(values, 2))) == 4


class TestPerturbation:
    def test_none_returns_clean_copy(self, desk_model):
        model, data = desk_model
        dm = make_dm(model, NoiseSpec())
        out = dm.query_soft(data.inputs[0])
        np.testing.assert_array_equal(out, predict(model, data.inputs[0]))

    def test_white_noise_moments(self):
        model = uniform_model()
        sigma = 0.05
        dm = make_dm(model, NoiseSpec(kind="white", sigma=sigma))
        x = np.full(4, 0.5)
        draws = np.array([dm.query_soft(x) for _ in range(3000)])
        # clean value 0.2 with sigma=0.05: abs/clip almost never bites
        assert draws.mean() == pytest.approx(0.2, abs=0.005)
        assert draws.std() == pytest.approx(sigma, rel=0.05)

    def test_outputs_in_unit_interval(self, desk_model):
        model, data = desk_model
        dm = make_dm(model, NoiseSpec(kind="white", sigma=0.5))
        for i in range(50):
            out = dm.query_soft(data.inputs[i % data.n])
            assert np.all((0 <= out) & (out <= 1))

    def test_correlated_scaling(self):
        model = uniform_model()
        dm = make_dm(model, NoiseSpec(kind="correlated", alpha=0.1, eps_sigma=1e-12))
        out = dm.query_soft(np.full(4, 0.5))
        np.testing.assert_allclose(out, 0.2 * 1.1, atol=1e-9)

    def test_quantization_kind(self, desk_model):
        model, data = desk_model
        dm = make_dm(model, NoiseSpec(kind="quantization", q_bits=2))
        out = dm.query_soft(data.inputs[0])
        levels = {0.0, 1 / 3, 2 / 3, 1.0}
        assert all(any(abs(v - l) < 1e-12 for l in levels) for v in out)


class TestPreservation:
    def test_top1_never_changes(self, desk_model):
        model, data = desk_model
        dm = make_dm(model, NoiseSpec(kind="white", sigma=0.05, preserve_top1=True))
        x = data.inputs[0]
        top = int(np.argmax(predict(model, x)))
        for _ in range(2000):
            assert int(np.argmax(dm.query_soft(x))) == top
        assert dm.stuck_events == 0

    def test_disabled_preservation_flips_sometimes(self):
        model = uniform_model()
        dm = make_dm(model, NoiseSpec(kind="white", sigma=0.1, preserve_top1=False))
        x = np.full(4, 0.5)
        tops = {int(np.argmax(dm.query_soft(x))) for _ in range(500)}
        assert len(tops) > 1


class TestHardLabel:
    def test_mode_enforcement(self, desk_model):
        model, data = desk_model
        soft = make_dm(model, NoiseSpec(kind="white", sigma=0.1, label_mode="soft"))
        with pytest.raises(DomainError):
            soft.query_hard(data.inputs[0])
        hard = make_dm(model, NoiseSpec(kind="white", sigma=0.1, label_mode="hard"))
        with pytest.raises(DomainError):
            hard.query_soft(data.inputs[0])

    def test_uniform_output_noise_breaks_ties(self):
        model = uniform_model(n_classes=5)
        dm = make_dm(model, NoiseSpec(kind="white", sigma=0.1, label_mode="hard"))
        x = np.full(4, 0.5)
        n = 10_000
        counts = np.bincount([dm.query_hard(x) for _ in range(n)], minlength=5)
        expect = n / 5
        band = 5 * np.sqrt(n * 0.2 * 0.8)
        assert np.all(np.abs(counts - expect) <= band)

    def test_large_sigma_near_uniform_even_when_confident(self, desk_model):
        model, data = desk_model
        dm = make_dm(model, NoiseSpec(kind="white", sigma=10.0, label_mode="hard"))
        x = data.inputs[0]
        n = 5000
        counts = np.bincount([dm.query_hard(x) for _ in range(n)], minlength=10)
        assert counts.min() > 0  # every class appears
        # nearly uniform: every class within 20% of the uniform frequency
        np.testing.assert_allclose(counts / n, 0.1, rtol=0.2)

    def test_hard_mode_ignores_preservation(self):
        model = uniform_model(n_classes=5)
        spec = NoiseSpec(kind="white", sigma=0.1, label_mode="hard", preserve_top1=True)
        dm = make_dm(model, spec)
        labels = {dm.query_hard(np.full(4, 0.5)) for _ in range(500)}
        assert len(labels) > 1


class TestMetering:
    def test_query_count_increments(self, desk_model):
        model, data = desk_model
        dm = make_dm(model, NoiseSpec(kind="white", sigma=0.01))
        for i in range(7):
            dm.query_soft(data.inputs[0])
        assert dm.query_count == 7

    def test_reproducible_stream(self, desk_model):
        model, data = desk_model
        spec = NoiseSpec(kind="white", sigma=0.01)
        a = make_dm(model, spec, "same").query_soft(data.inputs[0])
        b = make_dm(model, spec, "same").query_soft(data.inputs[0])
        np.testing.assert_array_equal(a, b)
