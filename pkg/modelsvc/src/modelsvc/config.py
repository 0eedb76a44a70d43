"""Model and training configuration.

The training defaults are the reference fine-tuning recipe and are part of
the package contract: learning rate 5e-6, batch size 16, at most 20 epochs,
early stopping once dev loss has failed to improve for more than 2 epochs,
inverse-frequency class weighting, and 5 random restarts. Tests pin them.

Encoders come from a small registry of self-contained transformer stacks
sized for CPU runs. Reference-scale results need a large pretrained encoder,
which is deliberately not bundled; the registry keys leave room for one.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class EncoderSpec:
    vocab_size: int
    d_model: int
    n_layers: int
    n_heads: int
    ffn_size: int
    max_positions: int


ENCODERS: dict[str, EncoderSpec] = {
    "tiny": EncoderSpec(
        vocab_size=2048, d_model=32, n_layers=2, n_heads=4, ffn_size=64, max_positions=96
    ),
    "mini": EncoderSpec(
        vocab_size=4096, d_model=64, n_layers=2, n_heads=4, ffn_size=128, max_positions=128
    ),
}


@dataclass(frozen=True)
class StanceModelConfig:
    encoder: str = "tiny"
    learning_rate: float = 5e-6
    batch_size: int = 16
    max_epochs: int = 20
    early_stop_patience: int = 2
    class_weighting: str = "inverse_frequency"  # or "none"
    seed: int = 0
    restarts: int = 5

    def __post_init__(self) -> None:
        if self.encoder not in ENCODERS:
            raise ValueError(
                f"unknown encoder {self.encoder!r}; choose from {sorted(ENCODERS)}"
            )
        if self.class_weighting not in ("inverse_frequency", "none"):
            raise ValueError(f"unknown class weighting {self.class_weighting!r}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.restarts < 1:
            raise ValueError("batch_size, max_epochs, and restarts must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.early_stop_patience < 0:
            raise ValueError("early_stop_patience must be >= 0")

    @property
    def encoder_spec(self) -> EncoderSpec:
        return ENCODERS[self.encoder]

    def to_dict(self) -> dict:
        return {
            "encoder": self.encoder,
            "learning_rate": self.learning_rate,
            "batch_size": self.batch_size,
            "max_epochs": self.max_epochs,
            "early_stop_patience": self.early_stop_patience,
            "class_weighting": self.class_weighting,
            "seed": self.seed,
            "restarts": self.restarts,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "StanceModelConfig":
        return cls(**data)
