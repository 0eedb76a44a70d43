"""Neural companion to the stance graph toolkit.

Trains a contextual encoder with (a) a six-way stance head over
source/event embedding pairs and (b) binary token taggers for source and
event identification, then serves predictions over the toolkit's HTTP
protocol or exports them as tuple-store prediction files.
"""

from modelsvc.config import ENCODERS, EncoderSpec, StanceModelConfig

__version__ = "0.1.0"

__all__ = ["ENCODERS", "EncoderSpec", "StanceModelConfig", "__version__"]
