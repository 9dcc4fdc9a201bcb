"""Object-aware video-language pretraining at desk scale.

A dual encoder whose video side is read out through learnable hand, object
and video queries. Besides the clip embedding, the queries predict per-frame
boxes and object names, supervised by sparse noisy detections and by the
nouns of the paired narration.
"""

from .config import ModelConfig, TrainConfig
from .estimator import ObjectAwareEncoder
from .model import ObjectAwareModel

__version__ = "0.1.0"

__all__ = ["ModelConfig", "ObjectAwareEncoder", "ObjectAwareModel", "TrainConfig", "__version__"]
