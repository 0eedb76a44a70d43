import pytest

from modelsvc.config import ENCODERS, StanceModelConfig


def test_defaults_are_pinned():
    config = StanceModelConfig()
    assert config.encoder == "tiny"
    assert config.learning_rate == 5e-6
    assert config.batch_size == 16
    assert config.max_epochs == 20
    assert config.early_stop_patience == 2
    assert config.class_weighting == "inverse_frequency"
    assert config.seed == 0
    assert config.restarts == 5


def test_round_trip_through_dict():
    config = StanceModelConfig(encoder="mini", learning_rate=1e-3, seed=7)
    assert StanceModelConfig.from_dict(config.to_dict()) == config


def test_validation_rejects_bad_values():
    with pytest.raises(ValueError):
        StanceModelConfig(encoder="enormous")
    with pytest.raises(ValueError):
        StanceModelConfig(batch_size=0)
    with pytest.raises(ValueError):
        StanceModelConfig(learning_rate=-1.0)
    with pytest.raises(ValueError):
        StanceModelConfig(restarts=0)
    with pytest.raises(ValueError):
        StanceModelConfig(class_weighting="focal")


def test_encoder_specs_are_complete():
    for name, spec in ENCODERS.items():
        assert spec.vocab_size > 1, name
        assert spec.d_model % spec.n_heads == 0, name
        assert spec.max_positions > 0, name


def test_encoder_spec_property_matches_registry():
    assert StanceModelConfig(encoder="mini").encoder_spec is ENCODERS["mini"]
