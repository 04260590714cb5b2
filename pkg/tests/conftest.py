"""Shared fixtures: trained desk-scale models are expensive, so they are
built once per session."""

import pytest

from noisefence.core import RngStream
from noisefence.grid import ModelSpec, build_model, make_data


@pytest.fixture(scope="session")
def desk_model():
    """The default confident desk model plus its training data."""
    master = RngStream(0)
    model, data = build_model(ModelSpec(), master)
    return model, data


@pytest.fixture(scope="session")
def desk_holdout():
    master = RngStream(0)
    _train, holdout = make_data(ModelSpec(), master)
    return holdout


@pytest.fixture(scope="session")
def moderate_model():
    """A lower-confidence desk model whose outputs span quantization levels."""
    master = RngStream(0)
    model, data = build_model(ModelSpec(spread=0.45, train_epochs=60), master)
    return model, data
